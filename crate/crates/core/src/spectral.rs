//! Periodic pseudo-spectral discretization: grids, fields, Fourier multipliers
//! and heat-kernel measurements.
//!
//! Node `j` along an axis sits at `x_j = (j - N/2) h` with `h = period / N`, so
//! the torus is `[-period/2, period/2)^d`. Spectral data are kept in FFT order:
//! index `j` carries the wavenumber `2 pi k / period` with `k = j` for `j < N/2`
//! and `k = j - N` otherwise.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::levy_ops::LevyOperatorSpec;

const NYQUIST_TOL: f64 = 1e-10;
const MASS_TOL: f64 = 1e-3;
const MAX_DERIVATIVE: usize = 4;
// Node budget of the oversampled grid used for kernel norms.
const FINE_BUDGET: usize = 1 << 22;
const MAX_OVERSAMPLING: usize = 16;

struct GridInner {
    d: usize,
    n: usize,
    period: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

/// Uniform periodic grid on the torus of side `period` in `d` dimensions.
///
/// Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct SpectralGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("d", &self.inner.d)
            .field("n", &self.inner.n)
            .field("period", &self.inner.period)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.d == other.inner.d
                && self.inner.n == other.inner.n
                && self.inner.period == other.inner.period)
    }
}

/// Builds a grid; `d in {1,2,3}`, `n` a power of two `>= 8`, `period > 0`.
pub fn make_grid(d: usize, period: f64, n: usize) -> Result<SpectralGrid> {
    SpectralGrid::new(d, period, n)
}

impl SpectralGrid {
    pub fn new(d: usize, period: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!(
                "dimension {d} not in {{1, 2, 3}}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {n} must be a power of two >= 8"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "period {period} must be positive"
            )));
        }
        n.checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidGrid("grid size overflows".into()))?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let step = 2.0 * std::f64::consts::PI / period;
        let wavenumbers = (0..n)
            .map(|j| {
                let k = if j < n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                };
                step * k
            })
            .collect();
        Ok(SpectralGrid {
            inner: Arc::new(GridInner {
                d,
                n,
                period,
                forward,
                inverse,
                wavenumbers,
            }),
        })
    }

    pub fn dimension(&self) -> usize {
        self.inner.d
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.n
    }

    pub fn period(&self) -> f64 {
        self.inner.period
    }

    pub fn spacing(&self) -> f64 {
        self.inner.period / self.inner.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.d as i32)
    }

    /// Total node count `N^d`.
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumbers along one axis in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// Wavenumbers along one axis in increasing order, `2 pi / period * {-N/2, ..., N/2 - 1}`.
    pub fn centered_frequencies(&self) -> Vec<f64> {
        let n = self.inner.n;
        (0..n)
            .map(|j| self.inner.wavenumbers[(j + n / 2) % n])
            .collect()
    }

    /// Node coordinates along one axis.
    pub fn coordinates(&self) -> Vec<f64> {
        let h = self.spacing();
        let n = self.inner.n;
        (0..n).map(|j| (j as f64 - (n / 2) as f64) * h).collect()
    }

    /// Per-axis indices of a flat (row-major) index.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let n = self.inner.n;
        let mut idx = [0; 3];
        for a in (0..self.inner.d).rev() {
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Flat index of the mode `-k` for the mode at `flat`.
    pub fn mirror(&self, flat: usize) -> usize {
        let n = self.inner.n;
        let idx = self.unflatten(flat);
        (0..self.inner.d).fold(0, |acc, a| acc * n + (n - idx[a]) % n)
    }

    /// Calls `f(flat, xi)` for every mode, with `xi` the wave vector.
    pub fn for_each_wavevector<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let d = self.inner.d;
        let k = &self.inner.wavenumbers;
        let mut xi = [0.0; 3];
        for flat in 0..self.len() {
            let idx = self.unflatten(flat);
            for a in 0..d {
                xi[a] = k[idx[a]];
            }
            f(flat, &xi[..d]);
        }
    }

    /// Calls `f(flat, x)` for every node, with `x` the node coordinates.
    pub fn for_each_point<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let d = self.inner.d;
        let coords = self.coordinates();
        let mut x = [0.0; 3];
        for flat in 0..self.len() {
            let idx = self.unflatten(flat);
            for a in 0..d {
                x[a] = coords[idx[a]];
            }
            f(flat, &x[..d]);
        }
    }

    /// 2/3-rule mask: false where any axis has `|k| > N/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let n = self.inner.n;
        let keep: Vec<bool> = (0..n)
            .map(|j| {
                let k = if j < n / 2 { j } else { n - j };
                3 * k <= n
            })
            .collect();
        (0..self.len())
            .map(|flat| {
                let idx = self.unflatten(flat);
                (0..self.inner.d).all(|a| keep[idx[a]])
            })
            .collect()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.inner.n;
        let d = self.inner.d;
        let plan = if inverse {
            &self.inner.inverse
        } else {
            &self.inner.forward
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut lines = vec![Complex64::new(0.0, 0.0); block];
            for chunk in data.chunks_mut(block) {
                for j in 0..n {
                    for s in 0..stride {
                        lines[s * n + j] = chunk[j * stride + s];
                    }
                }
                plan.process_with_scratch(&mut lines, &mut scratch);
                for j in 0..n {
                    for s in 0..stride {
                        chunk[j * stride + s] = lines[s * n + j];
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / self.len() as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Unnormalized forward DFT of real data.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    /// Inverse DFT (normalized by `1/N^d`), keeping the real part.
    pub fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut coeffs, true);
        coeffs.into_iter().map(|c| c.re).collect()
    }
}

/// Real field sampled on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField(format!(
                "value at node {i} is {}",
                values[i]
            )));
        }
        Ok(GridFunction {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &SpectralGrid, f: F) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        grid.for_each_point(|flat, x| values[flat] = f(x));
        Self::new(grid, values)
    }

    pub fn constant(grid: &SpectralGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        GridFunction {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.grid, self.values.iter().map(|v| c * v).collect())
    }

    /// Pointwise `self - other`.
    pub fn difference(&self, other: &GridFunction) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn max_abs_difference(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self.grid.forward(&self.values),
        }
    }
}

/// Fourier coefficients of a field (unnormalized DFT, FFT order).
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: SpectralGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: &SpectralGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "spectrum has {} modes, grid has {}",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Spectrum {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        Spectrum {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Back to physical space; fails on non-finite output.
    pub fn to_field(&self) -> Result<GridFunction> {
        let values = self.grid.inverse_real(self.coeffs.clone());
        GridFunction::new(&self.grid, values)
    }

    /// Applies `(i xi)^kappa`, zeroing the Nyquist mode on axes of odd order.
    pub fn derivative(&self, kappa: &[usize]) -> Result<Spectrum> {
        let d = self.grid.dimension();
        if kappa.len() != d {
            return Err(Error::DomainError(format!(
                "multi-index has {} entries for a {d}-dimensional grid",
                kappa.len()
            )));
        }
        let order: usize = kappa.iter().sum();
        if order > MAX_DERIVATIVE {
            return Err(Error::DomainError(format!(
                "derivative order {order} exceeds {MAX_DERIVATIVE}"
            )));
        }
        let n = self.grid.points_per_axis();
        let factors: Vec<Vec<Complex64>> = kappa
            .iter()
            .map(|&m| {
                self.grid
                    .wavenumbers()
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| {
                        if m % 2 == 1 && j == n / 2 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new(0.0, k).powu(m as u32)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out = self.clone();
        for (flat, c) in out.coeffs.iter_mut().enumerate() {
            let idx = self.grid.unflatten(flat);
            for (a, f) in factors.iter().enumerate() {
                *c *= f[idx[a]];
            }
        }
        Ok(out)
    }
}

/// `D^kappa phi` by Fourier multipliers.
pub fn spectral_derivative(phi: &GridFunction, kappa: &[usize]) -> Result<GridFunction> {
    phi.spectrum().derivative(kappa)?.to_field()
}

/// Components of `D phi`.
pub fn gradient(phi: &GridFunction) -> Result<Vec<GridFunction>> {
    let spec = phi.spectrum();
    gradient_of_spectrum(&spec)
}

pub fn gradient_of_spectrum(spec: &Spectrum) -> Result<Vec<GridFunction>> {
    let d = spec.grid().dimension();
    (0..d)
        .map(|a| {
            let mut kappa = vec![0; d];
            kappa[a] = 1;
            spec.derivative(&kappa)?.to_field()
        })
        .collect()
}

/// Pointwise Euclidean norm of a vector field.
pub fn pointwise_norm(components: &[GridFunction]) -> Vec<f64> {
    let len = components.first().map_or(0, |c| c.values().len());
    (0..len)
        .map(|i| {
            components
                .iter()
                .map(|c| c.values()[i].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Measured decay of the kernel derivative norms.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDecayFit {
    pub m: usize,
    pub times: Vec<f64>,
    pub l1_norms: Vec<f64>,
    pub fitted_slope: f64,
    /// Prefactor at `t = 1`, `exp(intercept)`.
    pub fitted_c0: f64,
    pub r_squared: f64,
}

/// An operator's symbol tabulated on a grid.
#[derive(Clone, Debug)]
pub struct GridOperator {
    grid: SpectralGrid,
    spec: LevyOperatorSpec,
    symbols: Arc<Vec<Complex64>>,
    nyquist_min_re: f64,
    fine: Arc<OnceLock<SpectralGrid>>,
}

impl GridOperator {
    /// Tabulates `psi` on every mode of `grid`, enforcing exact Hermitian pairing.
    pub fn new(grid: &SpectralGrid, spec: &LevyOperatorSpec) -> Result<Self> {
        if spec.dimension != grid.dimension() {
            return Err(Error::InvalidGrid(format!(
                "operator dimension {} differs from grid dimension {}",
                spec.dimension,
                grid.dimension()
            )));
        }
        let len = grid.len();
        let mut symbols = vec![Complex64::new(0.0, 0.0); len];
        let mut failure = None;
        if spec.has_closed_form_symbol() {
            grid.for_each_wavevector(|flat, xi| match spec.symbol(xi) {
                Ok(v) => symbols[flat] = v,
                Err(e) => failure = Some(e),
            });
        } else {
            // quadrature-backed symbols: evaluate half the modes, mirror the rest
            let mut done = vec![false; len];
            grid.for_each_wavevector(|flat, xi| {
                if done[flat] || failure.is_some() {
                    return;
                }
                match spec.symbol(xi) {
                    Ok(v) => {
                        symbols[flat] = v;
                        let m = grid.mirror(flat);
                        symbols[m] = v.conj();
                        done[flat] = true;
                        done[m] = true;
                    }
                    Err(e) => failure = Some(e),
                }
            });
        }
        if let Some(e) = failure {
            return Err(e);
        }
        // self-paired modes (Nyquist corners) must carry real multipliers
        for flat in 0..len {
            if grid.mirror(flat) == flat {
                symbols[flat].im = 0.0;
            }
        }
        let n = grid.points_per_axis();
        let mut nyquist_min_re = f64::INFINITY;
        for (flat, s) in symbols.iter().enumerate() {
            let idx = grid.unflatten(flat);
            if (0..grid.dimension()).any(|a| idx[a] == n / 2) {
                nyquist_min_re = nyquist_min_re.min(s.re);
            }
        }
        Ok(GridOperator {
            grid: grid.clone(),
            spec: spec.clone(),
            symbols: Arc::new(symbols),
            nyquist_min_re,
            fine: Arc::new(OnceLock::new()),
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn spec(&self) -> &LevyOperatorSpec {
        &self.spec
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    fn check_grid(&self, grid: &SpectralGrid) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::InvalidGrid(
                "field grid differs from the operator's grid".into(),
            ));
        }
        Ok(())
    }

    /// `e^{-t psi} hat phi`.
    pub fn semigroup_spectrum(&self, spec: &Spectrum, t: f64) -> Result<Spectrum> {
        self.check_grid(spec.grid())?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::DomainError(format!("time {t} must be nonnegative")));
        }
        if t == 0.0 {
            return Ok(spec.clone());
        }
        let mut out = spec.clone();
        for (c, s) in out.coeffs.iter_mut().zip(self.symbols.iter()) {
            *c *= (-t * s).exp();
        }
        Ok(out)
    }

    /// `P_t phi`; `t = 0` returns `phi` unchanged.
    pub fn apply_semigroup(&self, phi: &GridFunction, t: f64) -> Result<GridFunction> {
        self.check_grid(phi.grid())?;
        if t == 0.0 {
            return Ok(phi.clone());
        }
        self.semigroup_spectrum(&phi.spectrum(), t)?.to_field()
    }

    /// `L phi`, the multiplier `-psi`.
    pub fn apply_generator(&self, phi: &GridFunction) -> Result<GridFunction> {
        self.check_grid(phi.grid())?;
        let mut spec = phi.spectrum();
        for (c, s) in spec.coeffs.iter_mut().zip(self.symbols.iter()) {
            *c *= -s;
        }
        spec.to_field()
    }

    /// Time range on which kernel measurements are meaningful on this grid.
    ///
    /// The lower end is where the multiplier at the Nyquist frequency drops to
    /// `1e-10`; the upper end is where the kernel scale `t^{1/alpha}` reaches
    /// one eighth of the period.
    pub fn resolved_time_window(&self) -> Result<(f64, f64)> {
        let alpha = self.spec.effective_order()?;
        let lo = if self.nyquist_min_re > 0.0 {
            -NYQUIST_TOL.ln() / self.nyquist_min_re
        } else {
            f64::INFINITY
        };
        let hi = (self.grid.period() / 8.0).powf(alpha);
        Ok((lo, hi))
    }

    fn check_resolved(&self, t: f64) -> Result<()> {
        let nyq = (-t * self.nyquist_min_re).exp();
        if nyq > NYQUIST_TOL {
            return Err(Error::GridTooCoarse(format!(
                "multiplier at the Nyquist frequency is {nyq:.3e} > {NYQUIST_TOL:.0e} at t = {t}"
            )));
        }
        Ok(())
    }

    fn multiplier(&self, t: f64) -> Vec<Complex64> {
        self.symbols.iter().map(|s| (-t * s).exp()).collect()
    }

    /// Heat kernel `p_t` sampled on the nodes (density values).
    pub fn kernel(&self, t: f64) -> Result<GridFunction> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::DomainError(format!("time {t} must be positive")));
        }
        let scale = 1.0 / self.grid.cell_volume();
        let values = self
            .grid
            .inverse_real(self.multiplier(t))
            .into_iter()
            .map(|v| v * scale)
            .collect();
        GridFunction::new(&self.grid, values)
    }

    /// `int |D^m p_t|`, with `|.|` the Euclidean norm of the derivative tensor.
    pub fn kernel_deriv_l1_norm(&self, t: f64, m: usize) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::DomainError(format!("time {t} must be positive")));
        }
        if m > MAX_DERIVATIVE {
            return Err(Error::DomainError(format!(
                "derivative order {m} exceeds {MAX_DERIVATIVE}"
            )));
        }
        self.check_resolved(t)?;
        // |D^m p_t| has kinks where components change sign, so the node sum is
        // only second-order accurate; evaluate it on an oversampled grid.
        let fine = self.fine_grid()?;
        let multiplier = self.zero_pad(&self.multiplier(t), &fine);
        let p: f64 = fine
            .inverse_real(multiplier.clone())
            .iter()
            .map(|v| v.abs())
            .sum();
        check_mass(p, t)?;
        if m == 0 {
            return Ok(p);
        }
        let base = Spectrum::new(&fine, multiplier)?;
        let d = fine.dimension();
        let mut squares = vec![0.0; fine.len()];
        for kappa in multi_indices(d, m) {
            let weight = multinomial(m, &kappa);
            let values = fine.inverse_real(base.derivative(&kappa)?.coeffs);
            for (acc, v) in squares.iter_mut().zip(values) {
                *acc += weight * v * v;
            }
        }
        Ok(squares.iter().map(|s| s.sqrt()).sum())
    }

    fn fine_grid(&self) -> Result<SpectralGrid> {
        if let Some(g) = self.fine.get() {
            return Ok(g.clone());
        }
        let d = self.grid.dimension();
        let n = self.grid.points_per_axis();
        let mut r = 1;
        while r < MAX_OVERSAMPLING && (2 * r * n).pow(d as u32) <= FINE_BUDGET {
            r *= 2;
        }
        let g = SpectralGrid::new(d, self.grid.period(), r * n)?;
        Ok(self.fine.get_or_init(|| g).clone())
    }

    // Embeds coarse coefficients into a finer grid; the unpaired Nyquist modes are dropped.
    fn zero_pad(&self, coeffs: &[Complex64], fine: &SpectralGrid) -> Vec<Complex64> {
        let n = self.grid.points_per_axis();
        let nf = fine.points_per_axis();
        let d = self.grid.dimension();
        if nf == n {
            return coeffs.to_vec();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (flat, c) in coeffs.iter().enumerate() {
            let idx = self.grid.unflatten(flat);
            if (0..d).any(|a| idx[a] == n / 2) {
                continue;
            }
            let target = (0..d).fold(0, |acc, a| {
                let j = if idx[a] < n / 2 {
                    idx[a]
                } else {
                    idx[a] + nf - n
                };
                acc * nf + j
            });
            out[target] = *c;
        }
        out
    }

    /// Log-log fit of `int |D^m p_t|` against `t`.
    pub fn fit_kernel_decay(&self, times: &[f64], m: usize) -> Result<KernelDecayFit> {
        if times.len() < 4 {
            return Err(Error::InsufficientWindow(format!(
                "kernel fit needs at least 4 times, got {}",
                times.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times[0] <= 0.0 {
            return Err(Error::DomainError(
                "kernel fit times must be positive and strictly increasing".into(),
            ));
        }
        let norms = times
            .iter()
            .map(|&t| self.kernel_deriv_l1_norm(t, m))
            .collect::<Result<Vec<_>>>()?;
        let fit = loglog_fit(times, &norms)?;
        Ok(KernelDecayFit {
            m,
            times: times.to_vec(),
            l1_norms: norms,
            fitted_slope: fit.slope,
            fitted_c0: fit.intercept.exp(),
            r_squared: fit.r_squared,
        })
    }
}

// Kernels are probability densities, so on the torus their L1 norm is 1 unless
// the sampled kernel has spurious negative lobes.
fn check_mass(p: f64, t: f64) -> Result<()> {
    if (p - 1.0).abs() > MASS_TOL {
        return Err(Error::KernelMassDefect(format!(
            "kernel L1 norm {p:.6} deviates from 1 by more than {MASS_TOL:.0e} at t = {t}"
        )));
    }
    Ok(())
}

fn multi_indices(d: usize, m: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in multi_indices(d - 1, m - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multinomial(m: usize, kappa: &[usize]) -> f64 {
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    fact(m) / kappa.iter().map(|&k| fact(k)).product::<f64>()
}

/// `P_t phi` for the operator `spec`.
pub fn apply_semigroup(
    phi: &GridFunction,
    spec: &LevyOperatorSpec,
    t: f64,
) -> Result<GridFunction> {
    GridOperator::new(phi.grid(), spec)?.apply_semigroup(phi, t)
}

/// `L phi` for the operator `spec`.
pub fn apply_generator(phi: &GridFunction, spec: &LevyOperatorSpec) -> Result<GridFunction> {
    GridOperator::new(phi.grid(), spec)?.apply_generator(phi)
}

pub fn kernel_deriv_l1_norm(
    spec: &LevyOperatorSpec,
    t: f64,
    m: usize,
    grid: &SpectralGrid,
) -> Result<f64> {
    GridOperator::new(grid, spec)?.kernel_deriv_l1_norm(t, m)
}

pub fn fit_kernel_decay(
    spec: &LevyOperatorSpec,
    times: &[f64],
    m: usize,
    grid: &SpectralGrid,
) -> Result<KernelDecayFit> {
    GridOperator::new(grid, spec)?.fit_kernel_decay(times, m)
}
