//! Catalog of subcritical Lévy operators and their symbols.
//!
//! The symbol of an operator with triplet `(A, 0, mu)` is
//! `psi(xi) = xi.A.xi + int (1 - e^{i xi.z} + i xi.z 1_{|z|<1}) dmu(z)`, so that
//! the heat kernel has Fourier transform `e^{-t psi}` and the generator acts as
//! the multiplier `-psi`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

const MATRIX_TOL: f64 = 1e-12;

/// Measure family and diffusion data of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorKind {
    FractionalLaplacian {
        alpha: f64,
    },
    AnisotropicSum {
        alphas: Vec<f64>,
    },
    /// Jumps only to the right: `mu(dz) = z^{-1-alpha} 1_{z>0} dz`.
    RieszFellerOneSided {
        alpha: f64,
    },
    /// `mu(dz) = c_+ e^{-lambda_+ z} z^{-1-alpha} 1_{z>0} + c_- e^{-lambda_- |z|} |z|^{-1-alpha} 1_{z<0}`.
    TemperedStable {
        c_plus: f64,
        c_minus: f64,
        lambda_plus: f64,
        lambda_minus: f64,
        alpha: f64,
    },
    Diffusion {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    Sum {
        parts: Vec<LevyOperatorSpec>,
    },
}

/// Declarative description of a Lévy operator on `R^d`.
///
/// Construction through [`LevyOperatorSpec::new`] or deserialization always
/// validates, so a value of this type satisfies every structural invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct LevyOperatorSpec {
    pub dimension: usize,
    #[serde(flatten)]
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_order: Option<f64>,
}

#[derive(Deserialize)]
struct RawSpec {
    dimension: usize,
    #[serde(flatten)]
    kind: OperatorKind,
    #[serde(default)]
    nominal_order: Option<f64>,
}

impl TryFrom<RawSpec> for LevyOperatorSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = LevyOperatorSpec {
            dimension: raw.dimension,
            kind: raw.kind,
            nominal_order: raw.nominal_order,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Result of the `(1 ∧ |z|^sigma)` moment computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Divergent,
}

impl Moment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Moment::Finite(_))
    }
}

impl LevyOperatorSpec {
    pub fn new(dimension: usize, kind: OperatorKind) -> Result<Self> {
        let spec = LevyOperatorSpec {
            dimension,
            kind,
            nominal_order: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Attaches a claimed (L1) order; it must agree with [`Self::effective_order`].
    pub fn with_nominal_order(mut self, order: f64) -> Result<Self> {
        self.nominal_order = Some(order);
        self.validate()?;
        Ok(self)
    }

    pub fn fractional_laplacian(dimension: usize, alpha: f64) -> Result<Self> {
        Self::new(dimension, OperatorKind::FractionalLaplacian { alpha })
    }

    pub fn anisotropic_sum(alphas: Vec<f64>) -> Result<Self> {
        Self::new(alphas.len(), OperatorKind::AnisotropicSum { alphas })
    }

    pub fn riesz_feller_one_sided(alpha: f64) -> Result<Self> {
        Self::new(1, OperatorKind::RieszFellerOneSided { alpha })
    }

    pub fn tempered_stable(
        c_plus: f64,
        c_minus: f64,
        lambda_plus: f64,
        lambda_minus: f64,
        alpha: f64,
    ) -> Result<Self> {
        Self::new(
            1,
            OperatorKind::TemperedStable {
                c_plus,
                c_minus,
                lambda_plus,
                lambda_minus,
                alpha,
            },
        )
    }

    pub fn diffusion(a: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(a.len(), OperatorKind::Diffusion { a })
    }

    /// The standard Laplacian `Delta` on `R^d` (`A = I`).
    pub fn laplacian(dimension: usize) -> Result<Self> {
        let a = (0..dimension)
            .map(|i| {
                (0..dimension)
                    .map(|j| if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::diffusion(a)
    }

    pub fn sum(parts: Vec<LevyOperatorSpec>) -> Result<Self> {
        let dimension = parts.first().map_or(0, |p| p.dimension);
        Self::new(dimension, OperatorKind::Sum { parts })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if d == 0 {
            return Err(Error::InvalidOperator("dimension must be positive".into()));
        }
        let check_alpha = |name: &str, a: f64, lo: f64| -> Result<()> {
            if a.is_finite() && a > lo && a < 2.0 {
                Ok(())
            } else {
                Err(Error::InvalidOperator(format!(
                    "{name} = {a} must lie in ({lo}, 2)"
                )))
            }
        };
        match &self.kind {
            OperatorKind::FractionalLaplacian { alpha } => check_alpha("alpha", *alpha, 0.0)?,
            OperatorKind::AnisotropicSum { alphas } => {
                if alphas.len() != d {
                    return Err(Error::InvalidOperator(format!(
                        "anisotropic sum needs one alpha per axis: got {} for d = {d}",
                        alphas.len()
                    )));
                }
                for a in alphas {
                    check_alpha("alphas[i]", *a, 0.0)?;
                }
            }
            OperatorKind::RieszFellerOneSided { alpha } => {
                if d != 1 {
                    return Err(Error::InvalidOperator(
                        "one-sided Riesz-Feller operator is defined for d = 1 only".into(),
                    ));
                }
                check_alpha("alpha", *alpha, 1.0)?;
            }
            OperatorKind::TemperedStable {
                c_plus,
                c_minus,
                lambda_plus,
                lambda_minus,
                alpha,
            } => {
                if d != 1 {
                    return Err(Error::InvalidOperator(
                        "tempered stable operator is defined for d = 1 only".into(),
                    ));
                }
                check_alpha("alpha", *alpha, 0.0)?;
                for (name, c) in [("c_plus", c_plus), ("c_minus", c_minus)] {
                    if !(c.is_finite() && *c >= 0.0) {
                        return Err(Error::InvalidOperator(format!(
                            "{name} = {c} must be a nonnegative real"
                        )));
                    }
                }
                for (name, l) in [("lambda_plus", lambda_plus), ("lambda_minus", lambda_minus)] {
                    if !(l.is_finite() && *l > 0.0) {
                        return Err(Error::InvalidOperator(format!(
                            "{name} = {l} must be positive"
                        )));
                    }
                }
            }
            OperatorKind::Diffusion { a } => {
                let m = diffusion_matrix(a, d)?;
                let eig = SymmetricEigen::new(m);
                let min = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                if min < -MATRIX_TOL {
                    return Err(Error::InvalidOperator(format!(
                        "diffusion matrix has negative eigenvalue {min:.3e}"
                    )));
                }
            }
            OperatorKind::Sum { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidOperator("sum needs at least one part".into()));
                }
                for p in parts {
                    if p.dimension != d {
                        return Err(Error::InvalidOperator(format!(
                            "sum part has dimension {} but the sum has {d}",
                            p.dimension
                        )));
                    }
                    p.validate()?;
                }
            }
        }
        if let Some(order) = self.nominal_order {
            if !(order > 1.0 && order <= 2.0) {
                return Err(Error::InvalidOperator(format!(
                    "nominal_order = {order} must lie in (1, 2]"
                )));
            }
            let eff = self.effective_order()?;
            if (eff - order).abs() > MATRIX_TOL {
                return Err(Error::InvalidOperator(format!(
                    "nominal_order = {order} disagrees with the operator's order {eff}"
                )));
            }
        }
        Ok(())
    }

    /// Order `alpha in (1, 2]` of the kernel-gradient decay `t^{-1/alpha}`.
    pub fn effective_order(&self) -> Result<f64> {
        let order = self.raw_order();
        match order {
            Some(o) if o > 1.0 => Ok(o),
            _ => Err(Error::DegenerateOperator(format!(
                "no part of the operator has order above 1 (found {})",
                order.map_or("none".to_string(), |o| o.to_string())
            ))),
        }
    }

    // Order of the part, or None when the part is degenerate (no smoothing).
    fn raw_order(&self) -> Option<f64> {
        match &self.kind {
            OperatorKind::FractionalLaplacian { alpha }
            | OperatorKind::RieszFellerOneSided { alpha } => Some(*alpha),
            OperatorKind::AnisotropicSum { alphas } => {
                Some(alphas.iter().copied().fold(f64::INFINITY, f64::min))
            }
            OperatorKind::TemperedStable {
                c_plus,
                c_minus,
                alpha,
                ..
            } => (*c_plus > 0.0 || *c_minus > 0.0).then_some(*alpha),
            OperatorKind::Diffusion { a } => {
                let m = diffusion_matrix(a, self.dimension).ok()?;
                let min = SymmetricEigen::new(m)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                (min > MATRIX_TOL).then_some(2.0)
            }
            OperatorKind::Sum { parts } => parts
                .iter()
                .filter_map(|p| p.raw_order())
                .fold(None, |acc: Option<f64>, o| {
                    Some(acc.map_or(o, |a| a.max(o)))
                }),
        }
    }

    /// True if the operator's symbol is real (the measure is symmetric).
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            OperatorKind::FractionalLaplacian { .. }
            | OperatorKind::AnisotropicSum { .. }
            | OperatorKind::Diffusion { .. } => true,
            OperatorKind::RieszFellerOneSided { .. } => false,
            OperatorKind::TemperedStable {
                c_plus,
                c_minus,
                lambda_plus,
                lambda_minus,
                ..
            } => c_plus == c_minus && lambda_plus == lambda_minus,
            OperatorKind::Sum { parts } => parts.iter().all(|p| p.is_symmetric()),
        }
    }

    /// True if no part needs quadrature to evaluate its symbol.
    pub fn has_closed_form_symbol(&self) -> bool {
        match &self.kind {
            OperatorKind::RieszFellerOneSided { .. } | OperatorKind::TemperedStable { .. } => false,
            OperatorKind::Sum { parts } => parts.iter().all(|p| p.has_closed_form_symbol()),
            _ => true,
        }
    }

    /// Evaluates `psi(xi)`.
    pub fn symbol(&self, xi: &[f64]) -> Result<Complex64> {
        if xi.len() != self.dimension {
            return Err(Error::DomainError(format!(
                "frequency has {} components, operator dimension is {}",
                xi.len(),
                self.dimension
            )));
        }
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::DomainError("frequency must be finite".into()));
        }
        self.symbol_unchecked(xi)
    }

    fn symbol_unchecked(&self, xi: &[f64]) -> Result<Complex64> {
        let real = |v: f64| Ok(Complex64::new(v, 0.0));
        match &self.kind {
            OperatorKind::FractionalLaplacian { alpha } => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                real(if r2 == 0.0 { 0.0 } else { r2.powf(0.5 * alpha) })
            }
            OperatorKind::AnisotropicSum { alphas } => {
                real(xi.iter().zip(alphas).map(|(x, a)| x.abs().powf(*a)).sum())
            }
            OperatorKind::RieszFellerOneSided { alpha } => one_sided(xi[0], *alpha, 0.0),
            OperatorKind::TemperedStable {
                c_plus,
                c_minus,
                lambda_plus,
                lambda_minus,
                alpha,
            } => {
                let mut acc = Complex64::new(0.0, 0.0);
                if *c_plus > 0.0 {
                    acc += *c_plus * one_sided(xi[0], *alpha, *lambda_plus)?;
                }
                if *c_minus > 0.0 {
                    acc += *c_minus * one_sided(-xi[0], *alpha, *lambda_minus)?;
                }
                Ok(acc)
            }
            OperatorKind::Diffusion { a } => {
                let mut q = 0.0;
                for (i, row) in a.iter().enumerate() {
                    for (j, aij) in row.iter().enumerate() {
                        q += xi[i] * aij * xi[j];
                    }
                }
                real(q)
            }
            OperatorKind::Sum { parts } => {
                parts.iter().try_fold(Complex64::new(0.0, 0.0), |acc, p| {
                    Ok(acc + p.symbol_unchecked(xi)?)
                })
            }
        }
    }

    /// `int (1 ∧ |z|^sigma) dmu(z)`; divergence is decided from the exponents.
    pub fn sigma_moment(&self, sigma: f64) -> Result<Moment> {
        if !(sigma > 0.0 && sigma <= 2.0) {
            return Err(Error::DomainError(format!(
                "sigma = {sigma} must lie in (0, 2]"
            )));
        }
        match &self.kind {
            OperatorKind::FractionalLaplacian { alpha } => {
                if sigma <= *alpha {
                    return Ok(Moment::Divergent);
                }
                let d = self.dimension as f64;
                let sphere = 2.0 * PI.powf(0.5 * d) / gamma(0.5 * d);
                Ok(Moment::Finite(
                    fractional_laplacian_constant(self.dimension, *alpha)
                        * sphere
                        * (1.0 / (sigma - alpha) + 1.0 / alpha),
                ))
            }
            OperatorKind::AnisotropicSum { alphas } => {
                let mut total = 0.0;
                for a in alphas {
                    if sigma <= *a {
                        return Ok(Moment::Divergent);
                    }
                    total +=
                        fractional_laplacian_constant(1, *a) * 2.0 * (1.0 / (sigma - a) + 1.0 / a);
                }
                Ok(Moment::Finite(total))
            }
            OperatorKind::RieszFellerOneSided { alpha } => {
                if sigma <= *alpha {
                    Ok(Moment::Divergent)
                } else {
                    Ok(Moment::Finite(1.0 / (sigma - alpha) + 1.0 / alpha))
                }
            }
            OperatorKind::TemperedStable {
                c_plus,
                c_minus,
                lambda_plus,
                lambda_minus,
                alpha,
            } => {
                let mut total = 0.0;
                for (c, l) in [(c_plus, lambda_plus), (c_minus, lambda_minus)] {
                    if *c == 0.0 {
                        continue;
                    }
                    if sigma <= *alpha {
                        return Ok(Moment::Divergent);
                    }
                    total += c * tempered_moment(sigma, *alpha, *l)?;
                }
                Ok(Moment::Finite(total))
            }
            OperatorKind::Diffusion { a } => {
                if a.iter().flatten().any(|v| *v != 0.0) {
                    Err(Error::HasDiffusionPart)
                } else {
                    Ok(Moment::Finite(0.0))
                }
            }
            OperatorKind::Sum { parts } => {
                let mut total = 0.0;
                let mut divergent = false;
                for p in parts {
                    match p.sigma_moment(sigma)? {
                        Moment::Finite(v) => total += v,
                        Moment::Divergent => divergent = true,
                    }
                }
                Ok(if divergent {
                    Moment::Divergent
                } else {
                    Moment::Finite(total)
                })
            }
        }
    }
}

fn diffusion_matrix(a: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if a.len() != d || a.iter().any(|row| row.len() != d) {
        return Err(Error::InvalidOperator(format!(
            "diffusion matrix must be {d}x{d}"
        )));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidOperator(
            "diffusion matrix has non-finite entries".into(),
        ));
    }
    for i in 0..d {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > MATRIX_TOL {
                return Err(Error::InvalidOperator(format!(
                    "diffusion matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| a[i][j]))
}

/// Constant `c_{d,alpha}` for which `c_{d,alpha} |z|^{-d-alpha} dz` has symbol `|xi|^alpha`.
pub fn fractional_laplacian_constant(d: usize, alpha: f64) -> f64 {
    let d = d as f64;
    alpha * 2f64.powf(alpha - 1.0) * gamma(0.5 * (d + alpha))
        / (PI.powf(0.5 * d) * gamma(1.0 - 0.5 * alpha))
}

fn symbol_tolerance() -> Tolerance {
    Tolerance {
        abs: 0.0,
        rel: 1e-11,
        max_intervals: 4000,
    }
}

fn tempered_moment(sigma: f64, alpha: f64, lambda: f64) -> Result<f64> {
    // z = e^{-s} on (0,1], z = e^{s} on [1, inf)
    let inner = integrate(
        |s| Complex64::new((-(sigma - alpha) * s - lambda * (-s).exp()).exp(), 0.0),
        0.0,
        (40.0 / (sigma - alpha)).min(700.0),
        &[1.0, 4.0, 16.0],
        symbol_tolerance(),
    )?
    .value
    .re;
    let outer = integrate(
        |s| Complex64::new((-alpha * s - lambda * s.exp()).exp(), 0.0),
        0.0,
        (40.0 / alpha).min(700.0),
        &[1.0, 4.0],
        symbol_tolerance(),
    )?
    .value
    .re;
    Ok(inner + outer)
}

// (1 - e^{ix} + ix) / x^2, stable for small x.
fn bracket_over_square(x: f64) -> Complex64 {
    let re = {
        let h = 0.5 * x;
        let s = if h == 0.0 { 1.0 } else { h.sin() / h };
        0.5 * s * s
    };
    let im = if x.abs() < 0.5 {
        // (x - sin x) / x^2 = sum (-1)^k x^{2k+1} / (2k+3)!
        let x2 = x * x;
        let mut term = x / 6.0;
        let mut sum = term;
        for k in 1..12 {
            let k = k as f64;
            term *= -x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
            sum += term;
        }
        sum
    } else {
        (x - x.sin()) / (x * x)
    };
    Complex64::new(re, im)
}

/// `int_0^inf (1 - e^{i xi z} + i xi z 1_{z<1}) e^{-lambda z} z^{-1-alpha} dz`.
///
/// Split at `z0 = min(1, 1/|xi|)`. Below `z0` the bracket is non-oscillatory and
/// the log-substitution `z = z0 e^{-s}` grades the nodes toward the singularity.
/// Above `z0` the oscillatory exponential is integrated along the vertical ray
/// `z0 + iy`, where it decays like `e^{-xi y}`, unless tempering dominates.
fn one_sided(xi: f64, alpha: f64, lambda: f64) -> Result<Complex64> {
    if xi == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if xi < 0.0 {
        return Ok(one_sided(-xi, alpha, lambda)?.conj());
    }
    let tol = symbol_tolerance();
    let z0 = (1.0 / xi).min(1.0);

    // [0, z0]
    let s_max = (40.0 / (2.0 - alpha)).min(700.0);
    let pref = xi * xi * z0.powf(2.0 - alpha);
    let small = integrate(
        |s| {
            let z = z0 * (-s).exp();
            bracket_over_square(xi * z) * (pref * (-(2.0 - alpha) * s - lambda * z).exp())
        },
        0.0,
        s_max,
        &[1.0, 4.0, 16.0, 64.0],
        tol,
    )?
    .value
        + pref * (-(2.0 - alpha) * s_max).exp() / (2.0 * (2.0 - alpha));

    // int_{z0}^inf e^{-lambda z} z^{-1-alpha} dz with z = z0 e^{s}
    let mass = if lambda == 0.0 {
        z0.powf(-alpha) / alpha
    } else {
        z0.powf(-alpha)
            * integrate(
                |s| Complex64::new((-alpha * s - lambda * z0 * s.exp()).exp(), 0.0),
                0.0,
                (40.0 / alpha).min(700.0),
                &[1.0, 4.0],
                tol,
            )?
            .value
            .re
    };

    // i xi int_{z0}^1 e^{-lambda z} z^{-alpha} dz with z = e^{-s}
    let drift = if z0 < 1.0 {
        let top = -z0.ln();
        let v = integrate(
            |s| Complex64::new((-(1.0 - alpha) * s - lambda * (-s).exp()).exp(), 0.0),
            0.0,
            top,
            &[],
            tol,
        )?
        .value
        .re;
        Complex64::new(0.0, xi * v)
    } else {
        Complex64::new(0.0, 0.0)
    };

    // int_{z0}^inf e^{(i xi - lambda) z} z^{-1-alpha} dz
    let osc = if lambda >= xi {
        z0.powf(-alpha)
            * integrate(
                |s| {
                    let z = z0 * s.exp();
                    (Complex64::new(-lambda, xi) * z).exp() * (-alpha * s).exp()
                },
                0.0,
                (40.0 / alpha).min(700.0),
                &[1.0, 2.0, 4.0],
                tol,
            )?
            .value
    } else {
        let e = -1.0 - alpha;
        let ray = integrate(
            |v| {
                let w = Complex64::new(z0, v / xi);
                Complex64::new(-v, -lambda * v / xi).exp() * w.powf(e)
            },
            0.0,
            45.0,
            &[xi * z0, 1.0, 5.0, 15.0],
            tol,
        )?
        .value;
        Complex64::new(0.0, 1.0 / xi) * (Complex64::new(-lambda, xi) * z0).exp() * ray
    };

    Ok(small + mass + drift - osc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Independent tanh-sinh rule on [a, b] for the oracles below.
    fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
        let h = 1.0 / 64.0;
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for k in -400..=400 {
            let t = k as f64 * h;
            let u = 0.5 * PI * t.sinh();
            let x = u.tanh();
            let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
            // distance to endpoints without cancellation
            let from_a = half * u.exp() / u.cosh();
            let from_b = half * (-u).exp() / u.cosh();
            if from_a <= 0.0 || from_b <= 0.0 || !w.is_finite() || w == 0.0 {
                continue;
            }
            let z = if x < 0.0 { a + from_a } else { b - from_b };
            let v = f(z);
            if v.is_finite() {
                sum += w * v;
            }
        }
        sum * half * h
    }

    fn closed_form_riesz_feller(xi: f64, alpha: f64) -> Complex64 {
        let g = gamma(-alpha);
        let base = Complex64::new(0.0, -xi).powf(alpha);
        -g * base - Complex64::new(0.0, xi / (alpha - 1.0))
    }

    fn closed_form_tempered_side(xi: f64, alpha: f64, lambda: f64) -> Complex64 {
        let g = gamma(-alpha);
        let full = Complex64::new(lambda, -xi).powf(alpha) - lambda.powf(alpha)
            + Complex64::new(0.0, xi * alpha * lambda.powf(alpha - 1.0));
        // compensator only on |z| < 1: subtract i xi int_1^inf e^{-lambda z} z^{-alpha}
        let tail = tanh_sinh(|u| (-lambda / u).exp() * u.powf(alpha - 2.0), 0.0, 1.0);
        -g * full - Complex64::new(0.0, xi * tail)
    }

    #[test]
    fn fractional_laplacian_matches_brute_force_integral() {
        let alpha = 1.5;
        let c = fractional_laplacian_constant(1, alpha);
        let xi: f64 = 2.0;
        // 2 c int_0^inf 2 sin^2(xi z / 2) z^{-1-alpha} dz, split and mapped to (0,1)
        let near = tanh_sinh(
            |z| 2.0 * (0.5 * xi * z).sin().powi(2) * z.powf(-1.0 - alpha),
            0.0,
            1.0,
        );
        let far_periods = 400;
        let mut far = 0.0;
        let period = 2.0 * PI / xi;
        let start = 1.0;
        for k in 0..far_periods {
            let lo = start + k as f64 * period;
            far += tanh_sinh(
                |z| 2.0 * (0.5 * xi * z).sin().powi(2) * z.powf(-1.0 - alpha),
                lo,
                lo + period,
            );
        }
        let end = start + far_periods as f64 * period;
        // tail: the mean of (1 - cos) is 1; the oscillatory part is O(end^{-1-alpha})
        far += end.powf(-alpha) / alpha;
        let brute = 2.0 * c * (near + far);
        let spec = LevyOperatorSpec::fractional_laplacian(1, alpha).unwrap();
        let psi = spec.symbol(&[xi]).unwrap();
        assert_relative_eq!(psi.re, 2f64.powf(1.5), epsilon = 1e-12);
        assert!((brute - psi.re).abs() < 1e-6, "brute {brute} vs {}", psi.re);
    }

    #[test]
    fn symbol_vanishes_at_origin() {
        let specs = [
            LevyOperatorSpec::fractional_laplacian(2, 1.5).unwrap(),
            LevyOperatorSpec::riesz_feller_one_sided(1.5).unwrap(),
            LevyOperatorSpec::tempered_stable(1.0, 0.5, 2.0, 1.0, 1.2).unwrap(),
            LevyOperatorSpec::laplacian(1).unwrap(),
        ];
        for s in &specs {
            let xi = vec![0.0; s.dimension];
            assert_eq!(s.symbol(&xi).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn diffusion_symbol_is_quadratic_form() {
        let s = LevyOperatorSpec::laplacian(2).unwrap();
        assert_relative_eq!(s.symbol(&[3.0, 4.0]).unwrap().re, 25.0);
        let s = LevyOperatorSpec::diffusion(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_relative_eq!(s.symbol(&[1.0, -1.0]).unwrap().re, 2.0);
    }

    #[test]
    fn riesz_feller_quadrature_matches_closed_form() {
        for &alpha in &[1.1, 1.5, 1.9] {
            let s = LevyOperatorSpec::riesz_feller_one_sided(alpha).unwrap();
            for &xi in &[0.3, 1.0, 2.5, 17.0, 400.0, 5000.0] {
                let got = s.symbol(&[xi]).unwrap();
                let want = closed_form_riesz_feller(xi, alpha);
                assert!(
                    (got - want).norm() <= 1e-9 * want.norm(),
                    "alpha {alpha} xi {xi}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn tempered_quadrature_matches_closed_form() {
        for &(alpha, lambda) in &[(0.5, 1.0), (1.2, 2.0), (1.7, 0.3), (1.5, 30.0)] {
            for &xi in &[0.2, 1.0, 7.0, 90.0, 2000.0] {
                let got = one_sided(xi, alpha, lambda).unwrap();
                let want = closed_form_tempered_side(xi, alpha, lambda);
                assert!(
                    (got - want).norm() <= 1e-8 * want.norm(),
                    "alpha {alpha} lambda {lambda} xi {xi}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn riesz_feller_symbol_is_not_real() {
        let s = LevyOperatorSpec::riesz_feller_one_sided(1.5).unwrap();
        assert!(s.symbol(&[1.0]).unwrap().im.abs() > 1e-3);
    }

    #[test]
    fn effective_order_examples() {
        let a = LevyOperatorSpec::anisotropic_sum(vec![1.4, 1.8]).unwrap();
        assert_eq!(a.effective_order().unwrap(), 1.4);
        let s = LevyOperatorSpec::sum(vec![
            LevyOperatorSpec::fractional_laplacian(1, 1.6).unwrap(),
            LevyOperatorSpec::fractional_laplacian(1, 1.2).unwrap(),
        ])
        .unwrap();
        assert_eq!(s.effective_order().unwrap(), 1.6);
        assert_eq!(
            LevyOperatorSpec::laplacian(3)
                .unwrap()
                .effective_order()
                .unwrap(),
            2.0
        );
        let low = LevyOperatorSpec::fractional_laplacian(1, 0.8).unwrap();
        assert!(matches!(
            low.effective_order(),
            Err(Error::DegenerateOperator(_))
        ));
        let flat = LevyOperatorSpec::diffusion(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            flat.effective_order(),
            Err(Error::DegenerateOperator(_))
        ));
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(LevyOperatorSpec::fractional_laplacian(1, 2.0).is_err());
        assert!(LevyOperatorSpec::riesz_feller_one_sided(0.9).is_err());
        assert!(
            LevyOperatorSpec::new(2, OperatorKind::RieszFellerOneSided { alpha: 1.5 }).is_err()
        );
        assert!(LevyOperatorSpec::diffusion(vec![vec![1.0, 0.3], vec![0.2, 1.0]]).is_err());
        assert!(LevyOperatorSpec::diffusion(vec![vec![-1.0]]).is_err());
        assert!(LevyOperatorSpec::tempered_stable(1.0, 1.0, 0.0, 1.0, 1.5).is_err());
        let mixed = LevyOperatorSpec::new(
            2,
            OperatorKind::Sum {
                parts: vec![LevyOperatorSpec::fractional_laplacian(1, 1.5).unwrap()],
            },
        );
        assert!(mixed.is_err());
        let aniso = LevyOperatorSpec::anisotropic_sum(vec![1.4, 1.8]).unwrap();
        assert!(aniso.clone().with_nominal_order(1.4).is_ok());
        assert!(aniso.with_nominal_order(1.8).is_err());
    }

    #[test]
    fn sigma_moment_examples() {
        let s = LevyOperatorSpec::fractional_laplacian(1, 1.5).unwrap();
        let c = fractional_laplacian_constant(1, 1.5);
        let near = tanh_sinh(|z| z.powf(1.8 - 2.5), 0.0, 1.0);
        // int_1^inf z^{-2.5} dz via z = 1/u
        let far = tanh_sinh(|u| u.powf(0.5), 0.0, 1.0);
        let oracle = 2.0 * c * (near + far);
        match s.sigma_moment(1.8).unwrap() {
            Moment::Finite(v) => assert_relative_eq!(v, oracle, max_relative = 1e-10),
            Moment::Divergent => panic!("expected finite"),
        }
        assert_eq!(s.sigma_moment(1.4).unwrap(), Moment::Divergent);

        let t = LevyOperatorSpec::tempered_stable(1.0, 1.0, 2.0, 3.0, 1.2).unwrap();
        let side = |l: f64| {
            tanh_sinh(|z| z.powf(1.5 - 2.2) * (-l * z).exp(), 0.0, 1.0)
                + tanh_sinh(|u| (-l / u).exp() * u.powf(0.2), 0.0, 1.0)
        };
        match t.sigma_moment(1.5).unwrap() {
            Moment::Finite(v) => assert_relative_eq!(v, side(2.0) + side(3.0), max_relative = 1e-9),
            Moment::Divergent => panic!("expected finite"),
        }
        let lap = LevyOperatorSpec::laplacian(1).unwrap();
        assert_eq!(lap.sigma_moment(1.5), Err(Error::HasDiffusionPart));
    }

    #[test]
    fn deserializes_nested_specs() {
        let text = r#"
            dimension = 1
            type = "sum"
            parts = [
                { dimension = 1, type = "fractional_laplacian", alpha = 1.6 },
                { dimension = 1, type = "tempered_stable", c_plus = 1, c_minus = 0.5, lambda_plus = 2.0, lambda_minus = 1.0, alpha = 1.2 },
            ]
        "#;
        let spec: LevyOperatorSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.effective_order().unwrap(), 1.6);
        let bad = "dimension = 1\ntype = \"fractional_laplacian\"\nalpha = 2.5\n";
        assert!(toml::from_str::<LevyOperatorSpec>(bad).is_err());
        let diff = "dimension = 1\ntype = \"diffusion\"\nA = [[1.0]]\n";
        let spec: LevyOperatorSpec = toml::from_str(diff).unwrap();
        assert_eq!(spec.effective_order().unwrap(), 2.0);
    }

    fn any_spec() -> impl Strategy<Value = LevyOperatorSpec> {
        prop_oneof![
            (0.2f64..1.99).prop_map(|a| LevyOperatorSpec::fractional_laplacian(1, a).unwrap()),
            (1.01f64..1.99).prop_map(|a| LevyOperatorSpec::riesz_feller_one_sided(a).unwrap()),
            (
                0.0f64..2.0,
                0.0f64..2.0,
                0.1f64..5.0,
                0.1f64..5.0,
                0.1f64..1.95
            )
                .prop_map(|(cp, cm, lp, lm, a)| LevyOperatorSpec::tempered_stable(
                    cp, cm, lp, lm, a
                )
                .unwrap()),
            (0.0f64..3.0).prop_map(|a| LevyOperatorSpec::diffusion(vec![vec![a]]).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hermitian_and_nonnegative(spec in any_spec(), xi in -300.0f64..300.0) {
            let p = spec.symbol(&[xi]).unwrap();
            let m = spec.symbol(&[-xi]).unwrap();
            prop_assert!((p - m.conj()).norm() <= 1e-9 * (1.0 + p.norm()));
            prop_assert!(p.re >= -1e-9);
            if spec.is_symmetric() {
                prop_assert!(p.im.abs() <= 1e-9);
            }
        }

        #[test]
        fn sum_is_additive(a in 1.05f64..1.95, b in 0.3f64..1.9, xi in -50.0f64..50.0) {
            let p1 = LevyOperatorSpec::riesz_feller_one_sided(a).unwrap();
            let p2 = LevyOperatorSpec::tempered_stable(1.0, 0.3, 1.5, 0.7, b).unwrap();
            let s = LevyOperatorSpec::sum(vec![p1.clone(), p2.clone()]).unwrap();
            let lhs = s.symbol(&[xi]).unwrap();
            let rhs = p1.symbol(&[xi]).unwrap() + p2.symbol(&[xi]).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }
}
