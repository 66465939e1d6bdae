//! Mild solutions `u(t) = P_t u0 + int_0^t P_{t-s} H(Du(s)) ds` by Picard
//! iteration of the Duhamel map on a time mesh.
//!
//! The Duhamel integral is discretized by exponential product integration in
//! Fourier space: between consecutive nodes the nonlinear term is interpolated
//! linearly and integrated exactly against `e^{-(t-s) psi}`. The kernel
//! singularity `(t-s)^{-1/alpha}` of the gradient is thereby absorbed by the
//! multiplier. In the gradient blow-up case the first step instead weights the
//! term by `s^{-gamma r}`, integrated exactly per mode.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::quadrature::{phi1, phi2, singular_start_weight};
use crate::regularity::holder_seminorm;
use crate::spectral::{
    gradient, gradient_of_spectrum, pointwise_norm, GridFunction, GridOperator, Spectrum,
};

/// Bounded initial gradient (X_A) or Hölder initial data with gradient blow-up (X_B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
}

fn case_one() -> Case {
    Case::I
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    50
}
fn default_holder_constant() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_times: usize,
    /// Mesh exponent `q` in `t_j = T (j/n)^q`; 1 in case I and 2 in case II by default.
    #[serde(default)]
    pub time_grading: Option<f64>,
    #[serde(default = "case_one")]
    pub case: Case,
    /// Gradient weight exponent; `(1 - delta) / alpha` by default in case II.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Hölder exponent of the initial data (case II).
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_max_iter")]
    pub picard_max_iter: usize,
    /// 2/3-rule on the nonlinear term; on by default when `r >= 2`.
    #[serde(default)]
    pub dealias: Option<bool>,
    /// Kernel constant used to report the case-II radius.
    #[serde(default)]
    pub c0: Option<f64>,
    /// Interpolation constant `C_{delta,d}` entering the case-II radius.
    #[serde(default = "default_holder_constant")]
    pub holder_constant: f64,
}

impl SolverConfig {
    pub fn case_one(horizon: f64, n_times: usize) -> Self {
        SolverConfig {
            horizon,
            n_times,
            time_grading: None,
            case: Case::I,
            gamma: None,
            delta: None,
            picard_tol: default_tol(),
            picard_max_iter: default_max_iter(),
            dealias: None,
            c0: None,
            holder_constant: 1.0,
        }
    }

    pub fn case_two(horizon: f64, n_times: usize, delta: f64) -> Self {
        SolverConfig {
            case: Case::II,
            delta: Some(delta),
            ..Self::case_one(horizon, n_times)
        }
    }

    /// Validates the configuration for an operator of order `alpha` and growth `r`.
    pub fn resolve(&self, alpha: f64, r: f64) -> Result<ResolvedConfig> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Inadmissible(format!(
                "T = {} must be positive",
                self.horizon
            )));
        }
        if self.n_times < 2 {
            return Err(Error::Inadmissible(format!(
                "n_times = {} must be at least 2",
                self.n_times
            )));
        }
        if !(self.picard_tol.is_finite() && self.picard_tol > 0.0) {
            return Err(Error::Inadmissible(format!(
                "picard_tol = {} must be positive",
                self.picard_tol
            )));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::Inadmissible(
                "picard_max_iter must be positive".into(),
            ));
        }
        let grading = self.time_grading.unwrap_or(match self.case {
            Case::I => 1.0,
            Case::II => 2.0,
        });
        if !(grading.is_finite() && grading >= 1.0) {
            return Err(Error::Inadmissible(format!(
                "time_grading = {grading} must be >= 1"
            )));
        }
        let (gamma, delta) = match self.case {
            Case::I => (0.0, None),
            Case::II => {
                let delta = self.delta.ok_or_else(|| {
                    Error::Inadmissible("case II needs the Hölder exponent delta of u0".into())
                })?;
                check_initial_regularity(delta, r, alpha)?;
                let gamma = self.gamma.unwrap_or((1.0 - delta) / alpha);
                if !((0.0..1.0).contains(&gamma) && gamma * r < 1.0) {
                    return Err(Error::Inadmissible(format!(
                        "gamma = {gamma} must satisfy 0 <= gamma < 1 and gamma * r < 1"
                    )));
                }
                (gamma, Some(delta))
            }
        };
        if !(self.holder_constant.is_finite() && self.holder_constant > 0.0) {
            return Err(Error::Inadmissible(
                "holder_constant must be positive".into(),
            ));
        }
        Ok(ResolvedConfig {
            horizon: self.horizon,
            n_times: self.n_times,
            grading,
            case: self.case,
            gamma,
            delta,
            alpha,
            r,
            picard_tol: self.picard_tol,
            picard_max_iter: self.picard_max_iter,
            dealias: self.dealias.unwrap_or(r >= 2.0),
            c0: self.c0,
            holder_constant: self.holder_constant,
        })
    }
}

/// Admissible Hölder exponents of `u0` when the gradient may blow up:
/// any `delta in [0, 1)` if `r < alpha`, `delta in (0, 1)` if `r = alpha`,
/// and `delta in ((r - alpha)/(r - 1), 1)` if `r > alpha`.
pub fn check_initial_regularity(delta: f64, r: f64, alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Inadmissible(format!(
            "(U0') requires delta in [0, 1), got {delta}"
        )));
    }
    if r > alpha {
        let bound = (r - alpha) / (r - 1.0);
        // open interval; equality up to rounding of the bound is a violation
        if delta <= bound + 4.0 * f64::EPSILON * bound.abs().max(1.0) {
            return Err(Error::Inadmissible(format!(
                "(U0') requires delta > (r-alpha)/(r-1) = {bound:.6} for r = {r} > alpha = {alpha}, got delta = {delta}"
            )));
        }
    } else if r == alpha && delta == 0.0 {
        return Err(Error::Inadmissible(format!(
            "(U0') requires delta > 0 when r = alpha = {alpha}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub horizon: f64,
    pub n_times: usize,
    pub grading: f64,
    pub case: Case,
    pub gamma: f64,
    pub delta: Option<f64>,
    pub alpha: f64,
    pub r: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub dealias: bool,
    pub c0: Option<f64>,
    pub holder_constant: f64,
}

impl ResolvedConfig {
    /// Nodes `t_j = T (j/n)^q`, `j = 1..n`.
    pub fn time_nodes(&self) -> Vec<f64> {
        let n = self.n_times as f64;
        (1..=self.n_times)
            .map(|j| self.horizon * (j as f64 / n).powf(self.grading))
            .collect()
    }
}

/// Fields of a solution at positive times, with cached spectral gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<GridFunction>,
    gradients: Vec<Vec<GridFunction>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<GridFunction>) -> Result<Self> {
        let gradients = fields.iter().map(gradient).collect::<Result<Vec<_>>>()?;
        Self::with_gradients(times, fields, gradients)
    }

    fn with_gradients(
        times: Vec<f64>,
        fields: Vec<GridFunction>,
        gradients: Vec<Vec<GridFunction>>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() || times.len() != gradients.len() {
            return Err(Error::DomainError(format!(
                "trajectory has {} times and {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DomainError(
                "trajectory times must be positive and strictly increasing".into(),
            ));
        }
        let grid = fields[0].grid();
        if fields.iter().any(|f| f.grid() != grid) {
            return Err(Error::InvalidGrid(
                "trajectory fields live on different grids".into(),
            ));
        }
        Ok(Trajectory {
            times,
            fields,
            gradients,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[GridFunction] {
        &self.fields
    }

    pub fn gradients(&self) -> &[Vec<GridFunction>] {
        &self.gradients
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `sup_x |Du(t_j, x)|` per node.
    pub fn gradient_sups(&self) -> Vec<f64> {
        self.gradients
            .iter()
            .map(|g| pointwise_norm(g).iter().fold(0.0, |m: f64, v| m.max(*v)))
            .collect()
    }

    pub fn sups(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.sup_norm()).collect()
    }
}

/// `max_j ( ||u(t_j)||_inf + t_j^gamma ||Du(t_j)||_inf )`.
pub fn weighted_norm(traj: &Trajectory, gamma: f64) -> f64 {
    traj.times
        .iter()
        .zip(traj.sups())
        .zip(traj.gradient_sups())
        .map(|((t, u), g)| u + t.powf(gamma) * g)
        .fold(0.0, f64::max)
}

/// Per-node weighted norms `||u(t_j)||_inf + t_j^gamma ||Du(t_j)||_inf`.
pub fn weighted_norms(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    traj.times
        .iter()
        .zip(traj.sups())
        .zip(traj.gradient_sups())
        .map(|((t, u), g)| u + t.powf(gamma) * g)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// Weighted-norm distance between consecutive iterates.
    pub deltas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest ratio of consecutive deltas; `None` with fewer than two deltas.
    pub empirical_ratio: Option<f64>,
    /// Deltas increased on three consecutive iterations.
    pub no_contraction: bool,
    /// Radius of the solution ball, `R_1` in case I and `R_2` in case II.
    pub radius: Option<f64>,
}

impl PicardReport {
    /// Turns the advisory contraction flag into an error.
    pub fn check(&self) -> Result<()> {
        if self.no_contraction {
            return Err(Error::NoContraction(format!(
                "Picard deltas increased three times in a row: {:?}; shrink T below the contraction horizon",
                self.deltas
            )));
        }
        Ok(())
    }
}

struct StepWeights {
    decay: Vec<Complex64>,
    w_prev: Vec<Complex64>,
    w_cur: Vec<Complex64>,
}

impl StepWeights {
    fn new(symbols: &[Complex64], dt: f64) -> Self {
        let mut decay = Vec::with_capacity(symbols.len());
        let mut w_prev = Vec::with_capacity(symbols.len());
        let mut w_cur = Vec::with_capacity(symbols.len());
        for s in symbols {
            let a = dt * s;
            let p1 = phi1(a);
            let p2 = phi2(a);
            decay.push((-a).exp());
            w_prev.push(dt * p2);
            w_cur.push(dt * (p1 - p2));
        }
        StepWeights {
            decay,
            w_prev,
            w_cur,
        }
    }
}

/// Precomputed Duhamel march for fixed operator, Hamiltonian and time nodes.
pub struct MildSolver {
    op: GridOperator,
    ham: Hamiltonian,
    cfg: ResolvedConfig,
    times: Vec<f64>,
    steps: Vec<Arc<StepWeights>>,
    first_singular: Option<Vec<Complex64>>,
    mask: Option<Vec<bool>>,
}

// Iterate kept in both representations.
struct Iterate {
    spectra: Vec<Spectrum>,
    fields: Vec<GridFunction>,
    gradients: Vec<Vec<GridFunction>>,
}

impl MildSolver {
    pub fn new(op: &GridOperator, ham: &Hamiltonian, cfg: &SolverConfig) -> Result<Self> {
        let alpha = op.spec().effective_order()?;
        let resolved = cfg.resolve(alpha, ham.spec().growth())?;
        let times = resolved.time_nodes();
        Self::build(op, ham, resolved, times)
    }

    /// Solver on explicit time nodes (positive, strictly increasing).
    pub fn with_times(
        op: &GridOperator,
        ham: &Hamiltonian,
        cfg: &SolverConfig,
        times: Vec<f64>,
    ) -> Result<Self> {
        let alpha = op.spec().effective_order()?;
        let mut resolved = cfg.resolve(alpha, ham.spec().growth())?;
        if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DomainError(
                "time nodes must be positive and strictly increasing".into(),
            ));
        }
        resolved.n_times = times.len();
        resolved.horizon = *times.last().expect("nonempty");
        Self::build(op, ham, resolved, times)
    }

    fn build(
        op: &GridOperator,
        ham: &Hamiltonian,
        cfg: ResolvedConfig,
        times: Vec<f64>,
    ) -> Result<Self> {
        if op.grid() != ham.grid() {
            return Err(Error::InvalidGrid(
                "Hamiltonian and operator grids differ".into(),
            ));
        }
        let symbols = op.symbols();
        let mut cache: HashMap<u64, Arc<StepWeights>> = HashMap::new();
        let mut prev = 0.0;
        let mut steps = Vec::with_capacity(times.len());
        for &t in &times {
            let dt = t - prev;
            prev = t;
            let w = cache
                .entry(dt.to_bits())
                .or_insert_with(|| Arc::new(StepWeights::new(symbols, dt)))
                .clone();
            steps.push(w);
        }
        let first_singular = if cfg.case == Case::II && !ham.is_gradient_free() {
            let rho = cfg.gamma * cfg.r;
            let t1 = times[0];
            let grid = op.grid();
            let mut out = vec![Complex64::new(0.0, 0.0); symbols.len()];
            let mut done = vec![false; symbols.len()];
            for flat in 0..symbols.len() {
                if done[flat] {
                    continue;
                }
                let w = t1 * singular_start_weight(t1 * symbols[flat], rho)?;
                out[flat] = w;
                let m = grid.mirror(flat);
                if m != flat {
                    // symbols are Hermitian-paired, hence so are the weights
                    out[m] = w.conj();
                    done[m] = true;
                }
                done[flat] = true;
            }
            Some(out)
        } else {
            None
        };
        let mask = cfg.dealias.then(|| op.grid().dealias_mask());
        Ok(MildSolver {
            op: op.clone(),
            ham: ham.clone(),
            cfg,
            times,
            steps,
            first_singular,
            mask,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn config(&self) -> &ResolvedConfig {
        &self.cfg
    }

    pub fn operator(&self) -> &GridOperator {
        &self.op
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    fn transform(&self, values: Vec<f64>) -> Result<Spectrum> {
        let grid = self.op.grid();
        let mut spec = GridFunction::new(grid, values)?.spectrum();
        if let Some(mask) = &self.mask {
            for (c, keep) in spec.coeffs_mut().iter_mut().zip(mask) {
                if !keep {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(spec)
    }

    fn nonlinear(&self, grad: &[GridFunction]) -> Result<Spectrum> {
        let (a, b) = self.ham.eval_parts(grad)?;
        self.transform(a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }

    fn nonlinear_split(&self, grad: &[GridFunction]) -> Result<(Spectrum, Spectrum)> {
        let (a, b) = self.ham.eval_parts(grad)?;
        Ok((self.transform(a)?, self.transform(b)?))
    }

    // One application of the Duhamel map given gradients at the nodes.
    fn march(
        &self,
        u0: &Spectrum,
        u0_grad: &[GridFunction],
        grads: &[Vec<GridFunction>],
    ) -> Result<Vec<Spectrum>> {
        let n = self.times.len();
        let mut out = Vec::with_capacity(n);
        if self.ham.is_zero() {
            let mut cur = u0.clone();
            for step in &self.steps {
                for (c, e) in cur.coeffs_mut().iter_mut().zip(&step.decay) {
                    *c *= e;
                }
                out.push(cur.clone());
            }
            return Ok(out);
        }
        let mut prev_h = match self.cfg.case {
            Case::I => Some(self.nonlinear(u0_grad)?),
            Case::II => None,
        };
        let mut cur = u0.clone();
        for (j, step) in self.steps.iter().enumerate() {
            let h = if j == 0 && self.cfg.case == Case::II {
                let (hs, hr) = self.nonlinear_split(&grads[0])?;
                let zero = vec![Complex64::new(0.0, 0.0); hs.coeffs().len()];
                let sing = self.first_singular.as_ref().unwrap_or(&zero);
                for (i, c) in cur.coeffs_mut().iter_mut().enumerate() {
                    let reg_w = step.w_prev[i] + step.w_cur[i];
                    *c = step.decay[i] * *c + sing[i] * hs.coeffs()[i] + reg_w * hr.coeffs()[i];
                }
                let mut total = hs;
                for (c, r) in total.coeffs_mut().iter_mut().zip(hr.coeffs()) {
                    *c += r;
                }
                total
            } else {
                let h = self.nonlinear(&grads[j])?;
                let hp = prev_h.as_ref().expect("previous nonlinear term");
                for (i, c) in cur.coeffs_mut().iter_mut().enumerate() {
                    *c = step.decay[i] * *c
                        + step.w_prev[i] * hp.coeffs()[i]
                        + step.w_cur[i] * h.coeffs()[i];
                }
                h
            };
            prev_h = Some(h);
            out.push(cur.clone());
        }
        Ok(out)
    }

    fn realize(&self, spectra: Vec<Spectrum>) -> Result<Iterate> {
        let mut fields = Vec::with_capacity(spectra.len());
        let mut gradients = Vec::with_capacity(spectra.len());
        for s in &spectra {
            fields.push(s.to_field()?);
            gradients.push(gradient_of_spectrum(s)?);
        }
        Ok(Iterate {
            spectra,
            fields,
            gradients,
        })
    }

    fn heat_iterate(&self, u0: &Spectrum) -> Result<Iterate> {
        let mut cur = u0.clone();
        let mut spectra = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            for (c, e) in cur.coeffs_mut().iter_mut().zip(&step.decay) {
                *c *= e;
            }
            spectra.push(cur.clone());
        }
        self.realize(spectra)
    }

    fn check_u0(&self, u0: &GridFunction) -> Result<()> {
        if u0.grid() != self.op.grid() {
            return Err(Error::InvalidGrid(
                "initial data lives on another grid".into(),
            ));
        }
        Ok(())
    }

    /// `t -> P_t u0` on the nodes, through the same march as the Duhamel map.
    pub fn heat_flow(&self, u0: &GridFunction) -> Result<Trajectory> {
        self.check_u0(u0)?;
        let it = self.heat_iterate(&u0.spectrum())?;
        Trajectory::with_gradients(self.times.clone(), it.fields, it.gradients)
    }

    /// `S[phi]` on the nodes.
    pub fn duhamel_map(&self, phi: &Trajectory, u0: &GridFunction) -> Result<Trajectory> {
        self.check_u0(u0)?;
        if phi.times != self.times {
            return Err(Error::DomainError(
                "trajectory is not defined on the solver's time nodes".into(),
            ));
        }
        let u0_grad = gradient(u0)?;
        let spectra = self.march(&u0.spectrum(), &u0_grad, &phi.gradients)?;
        let it = self.realize(spectra)?;
        Trajectory::with_gradients(self.times.clone(), it.fields, it.gradients)
    }

    fn distance(&self, a: &Iterate, b: &Iterate) -> f64 {
        let gamma = self.cfg.gamma;
        let mut worst: f64 = 0.0;
        for j in 0..self.times.len() {
            let du = a.fields[j]
                .values()
                .iter()
                .zip(b.fields[j].values())
                .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
            let len = a.fields[j].values().len();
            let mut dg: f64 = 0.0;
            for i in 0..len {
                let s: f64 = a.gradients[j]
                    .iter()
                    .zip(&b.gradients[j])
                    .map(|(x, y)| (x.values()[i] - y.values()[i]).powi(2))
                    .sum();
                dg = dg.max(s);
            }
            let w = if gamma == 0.0 {
                1.0
            } else {
                self.times[j].powf(gamma)
            };
            worst = worst.max(du + w * dg.sqrt());
        }
        worst
    }

    /// Radius of the solution ball for `u0`.
    pub fn radius(&self, u0: &GridFunction) -> Result<Option<f64>> {
        let sup = u0.sup_norm();
        match self.cfg.case {
            Case::I => {
                let g = pointwise_norm(&gradient(u0)?)
                    .iter()
                    .fold(0.0, |m: f64, v| m.max(*v));
                Ok(Some(sup + g + 1.0))
            }
            Case::II => {
                let (Some(c0), Some(delta)) = (self.cfg.c0, self.cfg.delta) else {
                    return Ok(None);
                };
                let semi = if delta > 0.0 {
                    holder_seminorm(u0, delta)?
                } else {
                    let v = u0.values();
                    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                    hi - lo
                };
                let c1 = c0.powf(1.0 - delta) * self.cfg.holder_constant;
                Ok(Some(sup + c1 * semi + 1.0))
            }
        }
    }

    /// Picard iteration from the heat flow of `u0`.
    pub fn solve(&self, u0: &GridFunction) -> Result<(Trajectory, PicardReport)> {
        self.check_u0(u0)?;
        let u0_hat = u0.spectrum();
        let u0_grad = gradient(u0)?;
        let mut cur = self.heat_iterate(&u0_hat)?;
        let mut deltas = Vec::new();
        let mut converged = false;
        let mut no_contraction = false;
        let mut rising = 0;
        for _ in 0..self.cfg.picard_max_iter {
            let spectra = self.march(&u0_hat, &u0_grad, &cur.gradients)?;
            let next = self.realize(spectra)?;
            let delta = self.distance(&next, &cur);
            if let Some(&last) = deltas.last() {
                rising = if delta > last { rising + 1 } else { 0 };
            }
            deltas.push(delta);
            cur = next;
            if delta <= self.cfg.picard_tol {
                converged = true;
                break;
            }
            if rising >= 3 {
                no_contraction = true;
                break;
            }
        }
        let empirical_ratio = deltas
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |v| v.max(r))));
        let report = PicardReport {
            iterations: deltas.len(),
            deltas,
            converged,
            empirical_ratio,
            no_contraction,
            radius: self.radius(u0)?,
        };
        drop(cur.spectra);
        let traj = Trajectory::with_gradients(self.times.clone(), cur.fields, cur.gradients)?;
        Ok((traj, report))
    }

    /// Solves again from `u(t_{j0})` on the remaining nodes, shifted to start at 0.
    ///
    /// The returned trajectory lives on the nodes `t_{j0+k} - t_{j0}`.
    pub fn restart(&self, traj: &Trajectory, j0: usize) -> Result<(Trajectory, PicardReport)> {
        if j0 + 1 >= traj.len() {
            return Err(Error::DomainError(format!(
                "restart node {j0} leaves no later nodes"
            )));
        }
        let t0 = traj.times[j0];
        let times: Vec<f64> = traj.times[j0 + 1..].iter().map(|t| t - t0).collect();
        let cfg = SolverConfig {
            horizon: *times.last().expect("nonempty"),
            n_times: times.len(),
            time_grading: None,
            case: Case::I,
            gamma: None,
            delta: None,
            picard_tol: self.cfg.picard_tol,
            picard_max_iter: self.cfg.picard_max_iter,
            dealias: Some(self.cfg.dealias),
            c0: self.cfg.c0,
            holder_constant: self.cfg.holder_constant,
        };
        let solver = MildSolver::with_times(&self.op, &self.ham, &cfg, times)?;
        solver.solve(&traj.fields[j0])
    }
}

/// Duhamel map `S[phi]` for the given operator, Hamiltonian and configuration.
pub fn duhamel_map(
    phi: &Trajectory,
    u0: &GridFunction,
    ham: &Hamiltonian,
    op: &GridOperator,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    MildSolver::with_times(op, ham, cfg, phi.times.clone())?.duhamel_map(phi, u0)
}

/// Picard fixed point of the Duhamel map.
pub fn solve_mild(
    u0: &GridFunction,
    ham: &Hamiltonian,
    op: &GridOperator,
    cfg: &SolverConfig,
) -> Result<(Trajectory, PicardReport)> {
    MildSolver::new(op, ham, cfg)?.solve(u0)
}

/// Horizon below which the Duhamel map contracts in the bounded-gradient space:
/// `((alpha-1) / (2 alpha c0 K))^{alpha/(alpha-1)} ∧ 1/(2K)` with `K = L R1 + H0`.
/// Returns `+inf` when `K = 0`.
pub fn contraction_horizon_from_constants(alpha: f64, c0: f64, l: f64, r1: f64, h0: f64) -> f64 {
    let k = l * r1 + h0;
    if k == 0.0 {
        return f64::INFINITY;
    }
    let first = ((alpha - 1.0) / (2.0 * alpha * c0 * k)).powf(alpha / (alpha - 1.0));
    first.min(1.0 / (2.0 * k))
}

/// Contraction horizon for initial data `u0`, with `R1 = ||u0||_inf + ||Du0||_inf + 1`
/// and `L_{R1}`, `H0` taken from the Hamiltonian's constants.
pub fn contraction_horizon(
    ham: &Hamiltonian,
    u0: &GridFunction,
    c0: f64,
    alpha: f64,
) -> Result<f64> {
    let g = pointwise_norm(&gradient(u0)?)
        .iter()
        .fold(0.0, |m: f64, v| m.max(*v));
    let r1 = u0.sup_norm() + g + 1.0;
    let c = ham.constants_at(r1)?;
    Ok(contraction_horizon_from_constants(alpha, c0, c.l, r1, c.h0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Interior nodes.
    pub times: Vec<f64>,
    pub residual_sup: Vec<f64>,
    /// Leading truncation error of the time stencil, `h- h+ / 6 * sup |u_ttt|`.
    pub stencil_estimate: Vec<f64>,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.residual_sup.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_stencil_estimate(&self) -> f64 {
        self.stencil_estimate.iter().fold(0.0, |m, v| m.max(*v))
    }
}

// sup_x |6 u[t_a, t_b, t_c, t_d]|
fn third_derivative_sup(t: &[f64], u: &[&GridFunction]) -> f64 {
    let len = u[0].values().len();
    let mut worst: f64 = 0.0;
    for i in 0..len {
        let mut dd: Vec<f64> = u.iter().map(|f| f.values()[i]).collect();
        for level in 1..4 {
            for k in 0..4 - level {
                dd[k] = (dd[k + 1] - dd[k]) / (t[k + level] - t[k]);
            }
        }
        worst = worst.max((6.0 * dd[0]).abs());
    }
    worst
}

/// `sup_x |u_t - L u - H(Du)|` at interior nodes, with `u_t` from the
/// three-point centered difference on the (possibly graded) mesh.
pub fn pde_residual(
    traj: &Trajectory,
    ham: &Hamiltonian,
    op: &GridOperator,
) -> Result<ResidualReport> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::InsufficientWindow(format!(
            "residual needs at least 3 time nodes, got {n}"
        )));
    }
    let t = &traj.times;
    let u = &traj.fields;
    let mut report = ResidualReport {
        times: Vec::new(),
        residual_sup: Vec::new(),
        stencil_estimate: Vec::new(),
    };
    for j in 1..n - 1 {
        let hm = t[j] - t[j - 1];
        let hp = t[j + 1] - t[j];
        let lu = op.apply_generator(&u[j])?;
        let h = ham.eval(&traj.gradients[j])?;
        let denom = hm * hp * (hm + hp);
        let mut worst: f64 = 0.0;
        for i in 0..u[j].values().len() {
            let dudt = (hm * hm * u[j + 1].values()[i] - hp * hp * u[j - 1].values()[i]
                + (hp * hp - hm * hm) * u[j].values()[i])
                / denom;
            let r = dudt - lu.values()[i] - h.values()[i];
            worst = worst.max(r.abs());
        }
        let mut third: f64 = 0.0;
        if n >= 4 {
            for start in [j.saturating_sub(2), j - 1] {
                if start + 3 < n {
                    let idx = [start, start + 1, start + 2, start + 3];
                    let ts: Vec<f64> = idx.iter().map(|&k| t[k]).collect();
                    let fs: Vec<&GridFunction> = idx.iter().map(|&k| &u[k]).collect();
                    third = third.max(third_derivative_sup(&ts, &fs));
                }
            }
        }
        report.times.push(t[j]);
        report.residual_sup.push(worst);
        report.stencil_estimate.push(hm * hp / 6.0 * third);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianSpec;
    use crate::levy_ops::LevyOperatorSpec;
    use crate::spectral::make_grid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup(n: usize, alpha: f64, ham: HamiltonianSpec) -> (GridOperator, Hamiltonian) {
        let grid = make_grid(1, 2.0 * PI, n).unwrap();
        let spec = if alpha == 2.0 {
            LevyOperatorSpec::laplacian(1).unwrap()
        } else {
            LevyOperatorSpec::fractional_laplacian(1, alpha).unwrap()
        };
        let op = GridOperator::new(&grid, &spec).unwrap();
        let h = Hamiltonian::new(&ham, &grid).unwrap();
        (op, h)
    }

    fn sin0(op: &GridOperator, amp: f64) -> GridFunction {
        GridFunction::from_fn(op.grid(), |x| amp * x[0].sin()).unwrap()
    }

    #[test]
    fn zero_hamiltonian_gives_the_heat_flow_in_one_iteration() {
        let (op, h) = setup(64, 1.5, HamiltonianSpec::zero());
        let solver = MildSolver::new(&op, &h, &SolverConfig::case_one(1.0, 10)).unwrap();
        let u0 = sin0(&op, 1.0);
        let (traj, rep) = solver.solve(&u0).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.deltas, vec![0.0]);
        assert!(rep.converged);
        for (t, f) in traj.times().iter().zip(traj.fields()) {
            let want = u0.scaled((-t).exp()).unwrap();
            assert!(f.max_abs_difference(&want).unwrap() < 1e-13);
        }
        let heat = solver.heat_flow(&u0).unwrap();
        assert_eq!(heat, traj);
    }

    #[test]
    fn constant_hamiltonian_grows_linearly() {
        let (op, h) = setup(32, 1.5, HamiltonianSpec::constant(0.7));
        for case in [Case::I, Case::II] {
            let mut cfg = SolverConfig::case_one(1.0, 8);
            if case == Case::II {
                cfg = SolverConfig::case_two(1.0, 8, 0.5);
            }
            let solver = MildSolver::new(&op, &h, &cfg).unwrap();
            let u0 = GridFunction::zeros(op.grid());
            let (traj, rep) = solver.solve(&u0).unwrap();
            assert!(rep.converged);
            // the second application confirms the fixed point
            assert_eq!(rep.iterations, 2);
            for (t, f) in traj.times().iter().zip(traj.fields()) {
                assert!(f.values().iter().all(|v| (v - 0.7 * t).abs() < 1e-13));
            }
        }
    }

    #[test]
    fn duhamel_map_of_zero_hamiltonian_is_the_eigenfunction_decay() {
        let (op, h) = setup(64, 1.3, HamiltonianSpec::zero());
        let cfg = SolverConfig::case_one(0.5, 5);
        let solver = MildSolver::new(&op, &h, &cfg).unwrap();
        let u0 = sin0(&op, 1.0);
        let phi = Trajectory::new(
            solver.times().to_vec(),
            solver.times().iter().map(|_| sin0(&op, 3.0)).collect(),
        )
        .unwrap();
        let out = duhamel_map(&phi, &u0, &h, &op, &cfg).unwrap();
        for (t, f) in out.times().iter().zip(out.fields()) {
            assert!(
                f.max_abs_difference(&u0.scaled((-t).exp()).unwrap())
                    .unwrap()
                    < 1e-13
            );
        }
    }

    #[test]
    fn quadratic_hamiltonian_contracts_and_is_a_fixed_point() {
        let (op, h) = setup(64, 2.0, HamiltonianSpec::power_gradient(1.0, 2.0, 0.0));
        let mut cfg = SolverConfig::case_one(0.2, 20);
        cfg.picard_tol = 1e-12;
        let solver = MildSolver::new(&op, &h, &cfg).unwrap();
        let u0 = sin0(&op, 0.5);
        let (traj, rep) = solver.solve(&u0).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.empirical_ratio.unwrap() < 1.0);
        let again = solver.duhamel_map(&traj, &u0).unwrap();
        let d = weighted_norm(
            &Trajectory::new(
                traj.times().to_vec(),
                again
                    .fields()
                    .iter()
                    .zip(traj.fields())
                    .map(|(a, b)| a.difference(b).unwrap())
                    .collect(),
            )
            .unwrap(),
            0.0,
        );
        assert!(d <= 2.0 * cfg.picard_tol, "{d}");
        // sup-norm growth bound with L_{R1} R1 + H0
        let r1 = rep.radius.unwrap();
        let k = h.lipschitz_at(r1) * r1;
        for (t, s) in traj.times().iter().zip(traj.sups()) {
            assert!(s <= u0.sup_norm() + t * k + 1e-9);
        }
    }

    #[test]
    fn restart_reproduces_the_tail() {
        let (op, h) = setup(64, 1.6, HamiltonianSpec::power_gradient(0.5, 2.0, 0.1));
        let mut cfg = SolverConfig::case_one(0.3, 24);
        cfg.picard_tol = 1e-13;
        let solver = MildSolver::new(&op, &h, &cfg).unwrap();
        let u0 = sin0(&op, 0.8);
        let (traj, _) = solver.solve(&u0).unwrap();
        let j0 = 9;
        let (tail, rep) = solver.restart(&traj, j0).unwrap();
        assert!(rep.converged);
        for (k, f) in tail.fields().iter().enumerate() {
            let err = f.max_abs_difference(&traj.fields()[j0 + 1 + k]).unwrap();
            assert!(err <= 5.0 * cfg.picard_tol.max(1e-12), "node {k}: {err}");
        }
    }

    #[test]
    fn residual_of_heat_flow_is_second_order() {
        let (op, h) = setup(32, 1.5, HamiltonianSpec::zero());
        let u0 = sin0(&op, 1.0);
        let mut prev = None;
        for n in [10, 20, 40] {
            let solver = MildSolver::new(&op, &h, &SolverConfig::case_one(1.0, n)).unwrap();
            let traj = solver.heat_flow(&u0).unwrap();
            let rep = pde_residual(&traj, &h, &op).unwrap();
            let r = rep.max_residual();
            // leading-order estimate; higher-order terms add a few percent on coarse meshes
            assert!(r <= 1.25 * rep.max_stencil_estimate() + 1e-12);
            if let Some(p) = prev {
                let ratio: f64 = p / r;
                assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
            }
            prev = Some(r);
        }
    }

    #[test]
    fn residual_of_linear_growth_vanishes() {
        let (op, h) = setup(16, 1.5, HamiltonianSpec::constant(2.0));
        let times: Vec<f64> = (1..=6).map(|j| 0.1 * (j as f64).powi(2)).collect();
        let fields = times
            .iter()
            .map(|t| GridFunction::constant(op.grid(), 2.0 * t).unwrap())
            .collect();
        let traj = Trajectory::new(times, fields).unwrap();
        let rep = pde_residual(&traj, &h, &op).unwrap();
        assert!(rep.max_residual() <= 1e-10);
    }

    #[test]
    fn weighted_norm_examples() {
        let grid = make_grid(1, 2.0 * PI, 32).unwrap();
        let c = GridFunction::constant(&grid, -3.0).unwrap();
        let traj = Trajectory::new(vec![0.1, 0.2], vec![c.clone(), c]).unwrap();
        assert_eq!(weighted_norm(&traj, 0.0), 3.0);

        // heat flow of sin: |u| = |Du| = e^{-t}, largest at the first node
        let (op, h) = setup(32, 1.5, HamiltonianSpec::zero());
        let solver = MildSolver::new(&op, &h, &SolverConfig::case_one(1.0, 4)).unwrap();
        let traj = solver.heat_flow(&sin0(&op, 1.0)).unwrap();
        let t1 = traj.times()[0];
        assert_relative_eq!(
            weighted_norm(&traj, 0.0),
            2.0 * (-t1).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn weights_cancel_gradient_blow_up() {
        // max |Du(t)| = t^{-1/4} at the nodes: t^{1/4} * |Du| = 1
        let grid = make_grid(1, 2.0 * PI, 64).unwrap();
        let times = vec![0.01, 0.1, 0.5];
        let fields = times
            .iter()
            .map(|t: &f64| GridFunction::from_fn(&grid, |x| t.powf(-0.25) * x[0].sin()).unwrap())
            .collect();
        let traj = Trajectory::new(times.clone(), fields).unwrap();
        let want = times
            .iter()
            .map(|t| t.powf(-0.25) + 1.0)
            .fold(0.0, f64::max);
        assert_relative_eq!(weighted_norm(&traj, 0.25), want, max_relative = 1e-10);
    }

    #[test]
    fn contraction_horizon_examples() {
        assert_relative_eq!(
            contraction_horizon_from_constants(2.0, 1.0, 1.0, 2.0, 1.0),
            1.0 / 144.0,
            epsilon = 1e-15
        );
        assert_eq!(
            contraction_horizon_from_constants(1.5, 1.0, 0.0, 2.0, 0.0),
            f64::INFINITY
        );
        let alpha: f64 = 1.5;
        let a = contraction_horizon_from_constants(alpha, 1.0, 1.0, 1.0, 0.0);
        let b = contraction_horizon_from_constants(alpha, 2.0, 1.0, 1.0, 0.0);
        // both on the first branch here
        assert!(a < 0.5);
        assert_relative_eq!(
            b / a,
            2f64.powf(-alpha / (alpha - 1.0)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn initial_regularity_conditions() {
        assert!(check_initial_regularity(0.0, 1.3, 1.5).is_ok());
        assert!(check_initial_regularity(0.6, 1.3, 1.5).is_ok());
        assert!(check_initial_regularity(0.0, 1.5, 1.5).is_err());
        assert!(check_initial_regularity(0.1, 1.5, 1.5).is_ok());
        assert!(check_initial_regularity(0.4, 2.0, 1.6).is_err());
        let e = check_initial_regularity(0.5, 2.0, 1.5).unwrap_err();
        assert!(e
            .to_string()
            .contains("(U0') requires delta > (r-alpha)/(r-1)"));
        assert!(check_initial_regularity(0.51, 2.0, 1.5).is_ok());
        assert!(check_initial_regularity(1.0, 1.2, 1.5).is_err());
    }

    #[test]
    fn diverging_iteration_is_flagged() {
        let (op, h) = setup(128, 1.5, HamiltonianSpec::power_gradient(1.0, 3.0, 0.0));
        let mut cfg = SolverConfig::case_one(1.0, 20);
        cfg.dealias = Some(true);
        let solver = MildSolver::new(&op, &h, &cfg).unwrap();
        let u0 = sin0(&op, 2.0);
        match solver.solve(&u0) {
            Ok((_, rep)) => {
                assert!(rep.no_contraction, "{rep:?}");
                assert!(matches!(rep.check(), Err(Error::NoContraction(_))));
            }
            Err(e) => assert!(matches!(e, Error::NonFiniteField(_)), "{e}"),
        }
    }
}
