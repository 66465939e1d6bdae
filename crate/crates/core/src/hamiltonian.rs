//! Hamiltonians `H(x, p)` and their structural constants.
//!
//! Coefficients are time-independent; `x`-dependence enters through profile
//! coefficients sampled on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::Profile;
use crate::regularity::{holder_exponent_estimate, holder_seminorm};
use crate::spectral::{GridFunction, SpectralGrid};

/// Slack allowed between a declared Hölder exponent and the grid estimate.
pub const BETA_SLACK: f64 = 0.05;

/// A scalar or a sampled profile `offset + amplitude * profile(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Profile {
        profile: Profile,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HamiltonianForm {
    /// `H = b(x) |p|^r + f(x)`.
    PowerGradient {
        b: Coefficient,
        r: f64,
        #[serde(default)]
        f: Coefficient,
    },
    /// Registered bounded-gradient Hamiltonians:
    /// `soft_abs`: `sqrt(1 + |p|^2) - 1`; `saturating_quadratic`: `|p|^2 / (1 + |p|^2)`.
    SmoothBounded { name: String },
}

/// Declared constants; missing entries are derived on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianConstants {
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(rename = "H0", default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "unit")]
    pub beta: f64,
}

impl Default for HamiltonianConstants {
    fn default() -> Self {
        HamiltonianConstants {
            l: None,
            h0: None,
            m: None,
            r: None,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub form: HamiltonianForm,
    #[serde(default)]
    pub constants: HamiltonianConstants,
}

/// Constants at a given gradient radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedConstants {
    /// Lipschitz constant of `p -> H` on `|p| <= R`.
    pub l: f64,
    pub h0: f64,
    pub m: f64,
    pub r: f64,
    pub beta: f64,
}

const SATURATING_LIPSCHITZ: f64 = 0.649_519_052_838_329; // 3 sqrt(3) / 8

impl HamiltonianSpec {
    pub fn power_gradient(b: f64, r: f64, f: f64) -> Self {
        HamiltonianSpec {
            form: HamiltonianForm::PowerGradient {
                b: Coefficient::Constant(b),
                r,
                f: Coefficient::Constant(f),
            },
            constants: HamiltonianConstants::default(),
        }
    }

    pub fn zero() -> Self {
        Self::power_gradient(0.0, 1.0, 0.0)
    }

    /// `H = c`, independent of `x` and `p`.
    pub fn constant(c: f64) -> Self {
        Self::power_gradient(0.0, 1.0, c)
    }

    /// Growth exponent `r`.
    pub fn growth(&self) -> f64 {
        match &self.form {
            HamiltonianForm::PowerGradient { r, .. } => *r,
            HamiltonianForm::SmoothBounded { .. } => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.constants;
        match &self.form {
            HamiltonianForm::PowerGradient { b, r, f } => {
                if !(r.is_finite() && *r >= 1.0) {
                    return Err(Error::DomainError(format!("r = {r} must be >= 1")));
                }
                for (name, coef) in [("b", b), ("f", f)] {
                    match coef {
                        Coefficient::Constant(v) if !v.is_finite() => {
                            return Err(Error::DomainError(format!("{name} must be finite")))
                        }
                        Coefficient::Profile {
                            profile,
                            amplitude,
                            offset,
                        } => {
                            profile.validate()?;
                            if !(amplitude.is_finite() && offset.is_finite()) {
                                return Err(Error::DomainError(format!(
                                    "{name} amplitude and offset must be finite"
                                )));
                            }
                        }
                        _ => {}
                    }
                }
                if let Some(cr) = c.r {
                    if cr != *r {
                        return Err(Error::DomainError(format!(
                            "constants.r = {cr} disagrees with the form's r = {r}"
                        )));
                    }
                }
            }
            HamiltonianForm::SmoothBounded { name } => {
                if !matches!(name.as_str(), "soft_abs" | "saturating_quadratic") {
                    return Err(Error::DomainError(format!(
                        "unknown smooth Hamiltonian '{name}' (known: soft_abs, saturating_quadratic)"
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&c.beta) {
            return Err(Error::DomainError(format!(
                "beta = {} must lie in [0, 1]",
                c.beta
            )));
        }
        for (name, v) in [("L", c.l), ("H0", c.h0), ("M", c.m)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::DomainError(format!("{name} = {v} must be >= 0")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Field {
    Const(f64),
    Values(Vec<f64>),
}

impl Field {
    fn at(&self, i: usize) -> f64 {
        match self {
            Field::Const(c) => *c,
            Field::Values(v) => v[i],
        }
    }

    fn sup(&self) -> f64 {
        match self {
            Field::Const(c) => c.abs(),
            Field::Values(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Field::Const(c) => *c == 0.0,
            Field::Values(v) => v.iter().all(|x| *x == 0.0),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Power { b: Field, r: f64, f: Field },
    SoftAbs,
    Saturating,
}

/// A Hamiltonian with coefficients sampled on a grid.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    spec: HamiltonianSpec,
    grid: SpectralGrid,
    kind: Kind,
}

fn realize_coefficient(c: &Coefficient, grid: &SpectralGrid) -> Result<Field> {
    match c {
        Coefficient::Constant(v) => Ok(Field::Const(*v)),
        Coefficient::Profile {
            profile,
            amplitude,
            offset,
        } => {
            let p = profile.sample(grid, *amplitude)?;
            Ok(Field::Values(
                p.values().iter().map(|v| v + offset).collect(),
            ))
        }
    }
}

impl Hamiltonian {
    pub fn new(spec: &HamiltonianSpec, grid: &SpectralGrid) -> Result<Self> {
        spec.validate()?;
        let kind = match &spec.form {
            HamiltonianForm::PowerGradient { b, r, f } => Kind::Power {
                b: realize_coefficient(b, grid)?,
                r: *r,
                f: realize_coefficient(f, grid)?,
            },
            HamiltonianForm::SmoothBounded { name } => match name.as_str() {
                "soft_abs" => Kind::SoftAbs,
                _ => Kind::Saturating,
            },
        };
        Ok(Hamiltonian {
            spec: spec.clone(),
            grid: grid.clone(),
            kind,
        })
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// True when `H` vanishes identically.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            Kind::Power { b, f, .. } => b.is_zero() && f.is_zero(),
            _ => false,
        }
    }

    /// True when `H` does not depend on `p`.
    pub fn is_gradient_free(&self) -> bool {
        matches!(&self.kind, Kind::Power { b, .. } if b.is_zero())
    }

    /// Splits `H(x, p)` into the part that inherits gradient blow-up and a bounded part.
    pub fn eval_parts(&self, grad: &[GridFunction]) -> Result<(Vec<f64>, Vec<f64>)> {
        let len = self.grid.len();
        if grad.len() != self.grid.dimension() || grad.iter().any(|g| g.values().len() != len) {
            return Err(Error::InvalidGrid(
                "gradient does not match the Hamiltonian's grid".into(),
            ));
        }
        let sq = |i: usize| grad.iter().map(|g| g.values()[i].powi(2)).sum::<f64>();
        let (singular, regular) = match &self.kind {
            Kind::Power { b, r, f } => {
                let singular = if b.is_zero() {
                    vec![0.0; len]
                } else {
                    (0..len)
                        .map(|i| {
                            let s = sq(i);
                            let pr = if *r == 2.0 {
                                s
                            } else if *r == 1.0 {
                                s.sqrt()
                            } else {
                                s.powf(0.5 * r)
                            };
                            b.at(i) * pr
                        })
                        .collect()
                };
                (singular, (0..len).map(|i| f.at(i)).collect())
            }
            Kind::SoftAbs => (
                vec![0.0; len],
                (0..len)
                    .map(|i| {
                        let s = sq(i);
                        // sqrt(1 + s) - 1 without cancellation
                        s / ((1.0 + s).sqrt() + 1.0)
                    })
                    .collect(),
            ),
            Kind::Saturating => (
                vec![0.0; len],
                (0..len)
                    .map(|i| {
                        let s = sq(i);
                        s / (1.0 + s)
                    })
                    .collect(),
            ),
        };
        if let Some(i) = singular
            .iter()
            .zip(&regular)
            .position(|(a, b): (&f64, &f64)| !(a.is_finite() && b.is_finite()))
        {
            return Err(Error::NonFiniteField(format!(
                "Hamiltonian is not finite at node {i}"
            )));
        }
        Ok((singular, regular))
    }

    /// Pointwise `H(x, Du(x))`.
    pub fn eval(&self, grad: &[GridFunction]) -> Result<GridFunction> {
        let (a, b) = self.eval_parts(grad)?;
        GridFunction::new(&self.grid, a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }

    /// Lipschitz constant of `p -> H(x, p)` on `|p| <= radius`.
    pub fn lipschitz_at(&self, radius: f64) -> f64 {
        match &self.kind {
            Kind::Power { b, r, .. } => {
                if b.is_zero() {
                    0.0
                } else {
                    r * b.sup() * radius.max(0.0).powf(r - 1.0)
                }
            }
            Kind::SoftAbs => 1.0,
            Kind::Saturating => SATURATING_LIPSCHITZ,
        }
    }

    /// `sup_x |H(x, 0)|`.
    pub fn h0(&self) -> f64 {
        match &self.kind {
            Kind::Power { f, .. } => f.sup(),
            _ => 0.0,
        }
    }

    /// `x`-Hölder scale: the larger `beta`-seminorm of the coefficients.
    pub fn holder_scale(&self, beta: f64) -> Result<f64> {
        let Kind::Power { b, f, .. } = &self.kind else {
            return Ok(0.0);
        };
        let mut m: f64 = 0.0;
        for field in [b, f] {
            if let Field::Values(v) = field {
                let g = GridFunction::new(&self.grid, v.clone())?;
                let s = if beta > 0.0 {
                    holder_seminorm(&g, beta)?
                } else {
                    let (lo, hi) = v
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
                            (l.min(*x), h.max(*x))
                        });
                    hi - lo
                };
                m = m.max(s);
            }
        }
        Ok(m)
    }

    /// Declared constants, with missing entries derived at gradient radius `radius`.
    pub fn constants_at(&self, radius: f64) -> Result<ResolvedConstants> {
        let c = &self.spec.constants;
        Ok(ResolvedConstants {
            l: c.l.unwrap_or_else(|| self.lipschitz_at(radius)),
            h0: c.h0.unwrap_or_else(|| self.h0()),
            m: match c.m {
                Some(m) => m,
                None => self.holder_scale(c.beta)?,
            },
            r: c.r.unwrap_or_else(|| self.spec.growth()),
            beta: c.beta,
        })
    }

    /// Checks that the declared `beta` does not exceed the measured Hölder
    /// exponent of any sampled coefficient.
    pub fn check_declared_beta(&self) -> Result<()> {
        let beta = self.spec.constants.beta;
        let Kind::Power { b, f, .. } = &self.kind else {
            return Ok(());
        };
        for (name, field) in [("b", b), ("f", f)] {
            if let Field::Values(v) = field {
                let g = GridFunction::new(&self.grid, v.clone())?;
                let measured = holder_exponent_estimate(&g)?;
                if beta > measured + BETA_SLACK {
                    return Err(Error::Inadmissible(format!(
                        "declared beta = {beta} exceeds the measured Hölder exponent {measured:.3} of {name}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `H(x, p(x))` on the grid.
pub fn hamiltonian_eval(h: &Hamiltonian, p: &[GridFunction]) -> Result<GridFunction> {
    h.eval(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    fn constant_gradient(grid: &SpectralGrid, p: &[f64]) -> Vec<GridFunction> {
        p.iter()
            .map(|v| GridFunction::constant(grid, *v).unwrap())
            .collect()
    }

    #[test]
    fn power_gradient_examples() {
        let g = make_grid(2, 2.0 * PI, 8).unwrap();
        let h = Hamiltonian::new(&HamiltonianSpec::power_gradient(1.0, 2.0, 0.0), &g).unwrap();
        let zero = h.eval(&constant_gradient(&g, &[0.0, 0.0])).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        let v = h.eval(&constant_gradient(&g, &[3.0, 4.0])).unwrap();
        assert!(v.values().iter().all(|x| *x == 25.0));
        let g1 = make_grid(1, 2.0 * PI, 8).unwrap();
        let h = Hamiltonian::new(&HamiltonianSpec::power_gradient(1.0, 1.5, 0.0), &g1).unwrap();
        let v = h.eval(&constant_gradient(&g1, &[-4.0])).unwrap();
        assert!(v
            .values()
            .iter()
            .all(|x| (x - 4f64.powf(1.5)).abs() < 1e-12));
    }

    #[test]
    fn bounded_forms() {
        let g = make_grid(1, 2.0 * PI, 8).unwrap();
        let spec = HamiltonianSpec {
            form: HamiltonianForm::SmoothBounded {
                name: "saturating_quadratic".into(),
            },
            constants: HamiltonianConstants::default(),
        };
        let h = Hamiltonian::new(&spec, &g).unwrap();
        let v = h.eval(&constant_gradient(&g, &[1.0])).unwrap();
        assert_eq!(v.values()[0], 0.5);
        // numerical Lipschitz constant of s^2/(1+s^2)
        let slope = (0..2000)
            .map(|i| {
                let s = i as f64 * 1e-3;
                2.0 * s / (1.0 + s * s).powi(2)
            })
            .fold(0.0, f64::max);
        assert!((slope - h.lipschitz_at(10.0)).abs() < 1e-6);
        let bad = HamiltonianSpec {
            form: HamiltonianForm::SmoothBounded {
                name: "nope".into(),
            },
            constants: HamiltonianConstants::default(),
        };
        assert!(Hamiltonian::new(&bad, &g).is_err());
    }

    #[test]
    fn derived_constants() {
        let g = make_grid(1, 2.0 * PI, 64).unwrap();
        let h = Hamiltonian::new(&HamiltonianSpec::power_gradient(0.5, 2.0, -0.25), &g).unwrap();
        let c = h.constants_at(3.0).unwrap();
        assert_eq!(c.l, 2.0 * 0.5 * 3.0);
        assert_eq!(c.h0, 0.25);
        assert_eq!(c.m, 0.0);
        assert_eq!(c.r, 2.0);
    }

    #[test]
    fn declared_beta_is_checked_against_the_coefficient() {
        let g = make_grid(1, 2.0 * PI, 4096).unwrap();
        let mut spec = HamiltonianSpec {
            form: HamiltonianForm::PowerGradient {
                b: Coefficient::Profile {
                    profile: Profile::HolderCusp { delta: 0.5 },
                    amplitude: 0.25,
                    offset: 0.5,
                },
                r: 2.0,
                f: Coefficient::Constant(0.0),
            },
            constants: HamiltonianConstants {
                beta: 0.5,
                ..HamiltonianConstants::default()
            },
        };
        assert!(Hamiltonian::new(&spec, &g)
            .unwrap()
            .check_declared_beta()
            .is_ok());
        spec.constants.beta = 0.9;
        assert!(matches!(
            Hamiltonian::new(&spec, &g).unwrap().check_declared_beta(),
            Err(Error::Inadmissible(_))
        ));
    }

    #[test]
    fn parses_from_toml() {
        let text = r#"
            form = { type = "power_gradient", r = 2.0, b = { profile = { name = "holder_cusp", delta = 0.5 }, amplitude = 0.25, offset = 0.5 } }
            constants = { beta = 0.5, L = 3.0 }
        "#;
        let spec: HamiltonianSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.constants.l, Some(3.0));
        assert_eq!(spec.growth(), 2.0);
        let text = "form = { type = \"power_gradient\", r = 1.3, b = 1 }\n";
        let spec: HamiltonianSpec = toml::from_str(text).unwrap();
        assert_eq!(
            spec.form,
            HamiltonianSpec::power_gradient(1.0, 1.3, 0.0).form
        );
    }
}
