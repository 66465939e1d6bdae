//! Discrete Hölder seminorms, blow-up rate regression and the interpolation check.
//!
//! Seminorms are suprema over a dyadic offset set: steps `1, 2, 4, ..., N/4`
//! along each axis and along the main diagonals, with periodic wraparound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::solver::Trajectory;
use crate::spectral::{GridFunction, SpectralGrid};

/// Offsets (in grid steps) along the axes and main diagonals.
pub fn dyadic_offsets(grid: &SpectralGrid) -> Vec<Vec<isize>> {
    let d = grid.dimension();
    let n = grid.points_per_axis();
    let mut out = Vec::new();
    let mut s = 1usize;
    while s <= n / 4 {
        let s_i = s as isize;
        for a in 0..d {
            let mut o = vec![0; d];
            o[a] = s_i;
            out.push(o);
        }
        if d > 1 {
            // sign patterns with the last axis fixed positive
            for mask in 0..(1usize << (d - 1)) {
                let o = (0..d)
                    .map(|a| {
                        if a + 1 < d && mask & (1 << a) != 0 {
                            -s_i
                        } else {
                            s_i
                        }
                    })
                    .collect();
                out.push(o);
            }
        }
        s *= 2;
    }
    out
}

fn check_offsets(grid: &SpectralGrid, offsets: &[Vec<isize>]) -> Result<()> {
    if offsets
        .iter()
        .any(|o| o.len() != grid.dimension() || o.iter().all(|v| *v == 0))
    {
        return Err(Error::DomainError(
            "offsets must be nonzero and match the grid dimension".into(),
        ));
    }
    Ok(())
}

// max_x |phi(x + o) - phi(x)| with periodic wraparound
fn max_increment(grid: &SpectralGrid, values: &[f64], o: &[isize]) -> f64 {
    let n = grid.points_per_axis();
    let d = grid.dimension();
    let shift: Vec<usize> = o
        .iter()
        .map(|v| v.rem_euclid(n as isize) as usize)
        .collect();
    let mut worst: f64 = 0.0;
    for (flat, v) in values.iter().enumerate() {
        let idx = grid.unflatten(flat);
        let mut other = 0;
        for a in 0..d {
            other = other * n + (idx[a] + shift[a]) % n;
        }
        worst = worst.max((values[other] - v).abs());
    }
    worst
}

fn offset_length(grid: &SpectralGrid, o: &[isize]) -> f64 {
    let n = grid.points_per_axis() as isize;
    // shortest periodic representative
    let sq: f64 = o
        .iter()
        .map(|v| {
            let r = v.rem_euclid(n);
            let r = r.min(n - r) as f64;
            r * r
        })
        .sum();
    grid.spacing() * sq.sqrt()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::DomainError(format!(
            "Hölder exponent {beta} must lie in (0, 1]"
        )));
    }
    Ok(())
}

/// `max_o max_x |phi(x + o) - phi(x)| / |o|^beta` over the given offsets.
pub fn holder_seminorm_with_offsets(
    phi: &GridFunction,
    beta: f64,
    offsets: &[Vec<isize>],
) -> Result<f64> {
    check_beta(beta)?;
    let grid = phi.grid();
    check_offsets(grid, offsets)?;
    Ok(offsets
        .iter()
        .map(|o| max_increment(grid, phi.values(), o) / offset_length(grid, o).powf(beta))
        .fold(0.0, f64::max))
}

/// Discrete `[phi]_beta` on the dyadic offset set.
pub fn holder_seminorm(phi: &GridFunction, beta: f64) -> Result<f64> {
    holder_seminorm_with_offsets(phi, beta, &dyadic_offsets(phi.grid()))
}

/// Componentwise seminorm of a vector field, maximized over components.
pub fn holder_seminorm_vector(components: &[GridFunction], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let mut m: f64 = 0.0;
    for c in components {
        m = m.max(holder_seminorm(c, beta)?);
    }
    Ok(m)
}

/// Hölder exponent read off the oscillation at small scales:
/// the log-log slope of `max_o |phi(x+o) - phi(x)|` over axis offsets of
/// 1 to 16 steps, clamped to `[0, 1]`. Constant fields give 1.
pub fn holder_exponent_estimate(phi: &GridFunction) -> Result<f64> {
    let grid = phi.grid();
    let n = grid.points_per_axis();
    let d = grid.dimension();
    let mut lengths = Vec::new();
    let mut osc = Vec::new();
    let mut s = 1usize;
    while s <= 16 && s <= n / 4 {
        let mut m: f64 = 0.0;
        for a in 0..d {
            let mut o = vec![0; d];
            o[a] = s as isize;
            m = m.max(max_increment(grid, phi.values(), &o));
        }
        lengths.push(s as f64 * grid.spacing());
        osc.push(m);
        s *= 2;
    }
    let scale = phi.sup_norm().max(1.0);
    if osc.iter().all(|v| *v <= 1e-14 * scale) {
        return Ok(1.0);
    }
    if osc.iter().any(|v| *v <= 0.0) {
        return Ok(1.0);
    }
    Ok(loglog_fit(&lengths, &osc)?.slope.clamp(0.0, 1.0))
}

/// Exact margin of `[g]_gamma <= 2^{1-gamma/eta} ||g||^{1-gamma/eta} [g]_eta^{gamma/eta}`
/// with both seminorms on the dyadic offset set.
pub fn interpolation_margin(g: &GridFunction, gamma: f64, eta: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < eta && eta <= 1.0) {
        return Err(Error::DomainError(format!(
            "interpolation needs 0 < gamma < eta <= 1, got gamma = {gamma}, eta = {eta}"
        )));
    }
    let theta = gamma / eta;
    let lhs = holder_seminorm(g, gamma)?;
    let rhs = 2f64.powf(1.0 - theta)
        * g.sup_norm().powf(1.0 - theta)
        * holder_seminorm(g, eta)?.powf(theta);
    Ok(rhs - lhs)
}

/// Quantity whose decay or blow-up in time is regressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    /// `sup |Du|`.
    GradSup,
    /// `[D^k u]_sigma`; `sigma = 0` means `sup |D^k u|`.
    Holder { k: usize, sigma: f64 },
    /// Largest second partial derivative in sup-norm.
    SecondDerivSup,
}

impl Quantity {
    pub fn label(&self) -> String {
        match self {
            Quantity::GradSup => "grad_sup".into(),
            Quantity::Holder { k, sigma } => format!("holder({k},{sigma})"),
            Quantity::SecondDerivSup => "second_deriv_sup".into(),
        }
    }

    /// Quantity splitting `alpha + beta` into integer and fractional parts.
    pub fn holder_of_order(order: f64) -> Self {
        let k = order.floor();
        // drop representation noise such as 2.1 - 2 = 0.10000000000000009
        let sigma = ((order - k) * 1e12).round() / 1e12;
        Quantity::Holder {
            k: k as usize,
            sigma,
        }
    }

    pub fn evaluate(&self, u: &GridFunction) -> Result<f64> {
        match *self {
            Quantity::GradSup => {
                let g = crate::spectral::gradient(u)?;
                Ok(crate::spectral::pointwise_norm(&g)
                    .iter()
                    .fold(0.0, |m, v| m.max(*v)))
            }
            Quantity::Holder { k, sigma } => {
                let comps = derivatives_of_order(u, k)?;
                if sigma == 0.0 {
                    Ok(comps.iter().map(|c| c.sup_norm()).fold(0.0, f64::max))
                } else {
                    holder_seminorm_vector(&comps, sigma)
                }
            }
            Quantity::SecondDerivSup => Ok(derivatives_of_order(u, 2)?
                .iter()
                .map(|c| c.sup_norm())
                .fold(0.0, f64::max)),
        }
    }
}

fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![k]];
    }
    let mut out = Vec::new();
    for first in 0..=k {
        for mut rest in multi_indices(d - 1, k - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All partial derivatives `D^kappa u` with `|kappa| = k`.
pub fn derivatives_of_order(u: &GridFunction, k: usize) -> Result<Vec<GridFunction>> {
    let spec = u.spectrum();
    multi_indices(u.grid().dimension(), k)
        .iter()
        .map(|kappa| spec.derivative(kappa)?.to_field())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub quantity_label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub predicted_slope: f64,
    pub window: (f64, f64),
}

impl RateFit {
    /// `|slope - predicted_slope| <= tol`.
    pub fn matches(&self, tol: f64) -> bool {
        (self.slope - self.predicted_slope).abs() <= tol
    }

    /// Blow-up no faster than predicted: `slope >= predicted_slope - tol`.
    pub fn within_bound(&self, tol: f64) -> bool {
        self.slope >= self.predicted_slope - tol
    }
}

/// Fits `log value = intercept + slope log t` on the nodes inside `window`
/// (inclusive). Without a window, the 2 smallest and 2 largest nodes are dropped.
pub fn rate_fit_from_values(
    label: &str,
    times: &[f64],
    values: &[f64],
    predicted: f64,
    window: Option<(f64, f64)>,
) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::DomainError(
            "times and values differ in length".into(),
        ));
    }
    let (ts, vs): (Vec<f64>, Vec<f64>) = match window {
        Some((lo, hi)) => {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::DomainError(format!(
                    "fit window ({lo}, {hi}) must satisfy 0 < lo < hi"
                )));
            }
            times
                .iter()
                .zip(values)
                .filter(|(t, _)| **t >= lo && **t <= hi)
                .map(|(t, v)| (*t, *v))
                .unzip()
        }
        None => {
            let n = times.len();
            if n < 8 {
                return Err(Error::InsufficientWindow(format!(
                    "default window keeps {} of {n} nodes, need 4",
                    n.saturating_sub(4)
                )));
            }
            (times[2..n - 2].to_vec(), values[2..n - 2].to_vec())
        }
    };
    if ts.len() < 4 {
        return Err(Error::InsufficientWindow(format!(
            "rate fit needs 4 nodes in the window, got {}",
            ts.len()
        )));
    }
    let fit = loglog_fit(&ts, &vs)?;
    Ok(RateFit {
        quantity_label: label.to_string(),
        window: (ts[0], *ts.last().expect("nonempty")),
        times: ts,
        values: vs,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        predicted_slope: -predicted,
    })
}

/// Regresses `quantity(u(t))` against `t` on the trajectory.
///
/// `predicted` is the blow-up exponent `p` of `O(t^{-p})`.
pub fn blowup_rate_fit(
    traj: &Trajectory,
    quantity: Quantity,
    predicted: f64,
    window: Option<(f64, f64)>,
) -> Result<RateFit> {
    let keep: Vec<usize> = match window {
        Some((lo, hi)) => (0..traj.len())
            .filter(|&j| traj.times()[j] >= lo && traj.times()[j] <= hi)
            .collect(),
        None => (0..traj.len()).collect(),
    };
    let times: Vec<f64> = keep.iter().map(|&j| traj.times()[j]).collect();
    let values = match quantity {
        Quantity::GradSup => {
            let g = traj.gradient_sups();
            keep.iter().map(|&j| g[j]).collect()
        }
        _ => keep
            .iter()
            .map(|&j| quantity.evaluate(&traj.fields()[j]))
            .collect::<Result<Vec<f64>>>()?,
    };
    rate_fit_from_values(&quantity.label(), &times, &values, predicted, window)
}
