//! Named field generators for initial data and Hamiltonian coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{GridFunction, SpectralGrid, Spectrum};

/// Field shape; amplitudes are applied by [`Profile::sample`].
///
/// With `k = 2 pi / period`:
/// - `sin`: `sum_a sin(k x_a)`
/// - `gaussian_bump`: `exp(-|x|^2 / (2 w^2))`, `w` defaulting to `period / 16`
/// - `holder_cusp`: `sum_a |sin(k x_a)|^delta`, exactly `delta`-Hölder at its zeros
/// - `random_bandlimited`: random modes with `|k_a| <= cutoff`, scaled to unit sup-norm
/// - `constant`: `1`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Profile {
    Sin,
    GaussianBump {
        #[serde(default)]
        width: Option<f64>,
    },
    HolderCusp {
        delta: f64,
    },
    RandomBandlimited {
        /// Falls back to the experiment seed, then 0.
        #[serde(default)]
        seed: Option<u64>,
        cutoff: usize,
    },
    Constant,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::HolderCusp { delta } if !(*delta > 0.0 && *delta <= 1.0) => Err(
                Error::DomainError(format!("holder_cusp delta = {delta} must lie in (0, 1]")),
            ),
            Profile::GaussianBump { width: Some(w) } if !(w.is_finite() && *w > 0.0) => Err(
                Error::DomainError(format!("gaussian_bump width = {w} must be positive")),
            ),
            Profile::RandomBandlimited { cutoff, .. } if *cutoff == 0 => Err(Error::DomainError(
                "random_bandlimited cutoff must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Hölder exponent of the continuum profile (1 for smooth shapes).
    pub fn nominal_holder_exponent(&self) -> f64 {
        match self {
            Profile::HolderCusp { delta } => *delta,
            _ => 1.0,
        }
    }

    pub fn sample(&self, grid: &SpectralGrid, amplitude: f64) -> Result<GridFunction> {
        self.validate()?;
        let k = 2.0 * PI / grid.period();
        match self {
            Profile::Sin => GridFunction::from_fn(grid, |x| {
                amplitude * x.iter().map(|v| (k * v).sin()).sum::<f64>()
            }),
            Profile::GaussianBump { width } => {
                let w = width.unwrap_or(grid.period() / 16.0);
                GridFunction::from_fn(grid, |x| {
                    amplitude * (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * w * w)).exp()
                })
            }
            Profile::HolderCusp { delta } => GridFunction::from_fn(grid, |x| {
                amplitude
                    * x.iter()
                        .map(|v| (k * v).sin().abs().powf(*delta))
                        .sum::<f64>()
            }),
            Profile::RandomBandlimited { seed, cutoff } => {
                random_bandlimited(grid, seed.unwrap_or(0), *cutoff)?.scaled(amplitude)
            }
            Profile::Constant => GridFunction::constant(grid, amplitude),
        }
    }
}

fn random_bandlimited(grid: &SpectralGrid, seed: u64, cutoff: usize) -> Result<GridFunction> {
    let n = grid.points_per_axis();
    if cutoff >= n / 2 {
        return Err(Error::DomainError(format!(
            "random_bandlimited cutoff {cutoff} must be below N/2 = {}",
            n / 2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dimension();
    let mut spec = Spectrum::zeros(grid);
    let coeffs = spec.coeffs_mut();
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let idx = grid.unflatten(flat);
        let inside = (0..d).all(|a| {
            let j = idx[a];
            let k = if j < n / 2 { j } else { n - j };
            k <= cutoff
        });
        if inside && flat != 0 {
            *c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    // the real part of the inverse transform is the Hermitian projection
    let field = spec.to_field()?;
    let sup = field.sup_norm();
    if sup == 0.0 {
        return Err(Error::DomainError("random field vanished".into()));
    }
    field.scaled(1.0 / sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn shapes_on_the_standard_torus() {
        let g = make_grid(1, 2.0 * PI, 64).unwrap();
        let s = Profile::Sin.sample(&g, 2.0).unwrap();
        assert!((s.sup_norm() - 2.0).abs() < 1e-12);
        let c = Profile::HolderCusp { delta: 0.5 }.sample(&g, 1.0).unwrap();
        // node j = N/2 sits at x = 0, the cusp
        assert_eq!(c.values()[32], 0.0);
        assert!(c.values().iter().all(|v| *v >= 0.0 && *v <= 1.0));
        let b = Profile::GaussianBump { width: None }
            .sample(&g, 1.0)
            .unwrap();
        assert_eq!(b.values()[32], 1.0);
        assert!(Profile::HolderCusp { delta: 1.5 }.sample(&g, 1.0).is_err());
    }

    #[test]
    fn random_fields_are_seeded_and_bandlimited() {
        let g = make_grid(1, 2.0 * PI, 64).unwrap();
        let p = Profile::RandomBandlimited {
            seed: Some(7),
            cutoff: 5,
        };
        let a = p.sample(&g, 1.0).unwrap();
        let b = p.sample(&g, 1.0).unwrap();
        assert_eq!(a, b);
        assert!((a.sup_norm() - 1.0).abs() < 1e-12);
        let spec = a.spectrum();
        for (j, c) in spec.coeffs().iter().enumerate() {
            let k = if j < 32 { j } else { 64 - j };
            if k > 5 {
                assert!(c.norm() < 1e-10);
            }
        }
        let other = Profile::RandomBandlimited {
            seed: Some(8),
            cutoff: 5,
        }
        .sample(&g, 1.0)
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn parses_named_profiles() {
        let p: Profile = toml::from_str("name = \"holder_cusp\"\ndelta = 0.6\n").unwrap();
        assert_eq!(p, Profile::HolderCusp { delta: 0.6 });
        let p: Profile = toml::from_str("name = \"sin\"\n").unwrap();
        assert_eq!(p, Profile::Sin);
    }
}
