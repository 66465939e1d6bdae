//! Schauder constants, Beta function, and the two generalized Grönwall bounds
//! with a brute-force Volterra oracle.

use serde::Serialize;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `B(s1, s2) = Gamma(s1) Gamma(s2) / Gamma(s1 + s2)` through log-Gamma.
pub fn beta_function(s1: f64, s2: f64) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
        return Err(Error::DomainError(format!(
            "Beta function needs positive arguments, got ({s1}, {s2})"
        )));
    }
    Ok((ln_gamma(s1) + ln_gamma(s2) - ln_gamma(s1 + s2)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchauderConstants {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c0: f64,
    pub d: usize,
    /// Smoothing prefactor `c_{k,beta,d}`.
    pub c_k_beta_d: f64,
    /// `c^{(k)}_{gamma,alpha,beta}` for `D^k` of the Duhamel term.
    pub c_upper_k: f64,
    /// Hölder constant of `D^{floor(alpha+beta)}` of the Duhamel term;
    /// `None` when `alpha + beta` is an integer, where no such estimate holds.
    pub c_bar: Option<f64>,
}

/// `c_{k,beta,d} = C_{beta,d} (k^{1/alpha} c0)^{k-beta}`, with `C_{beta,d} = 1`
/// for `beta` in `{0, 1}` and caller-supplied otherwise.
pub fn smoothing_prefactor(
    k: usize,
    alpha: f64,
    beta: f64,
    c0: f64,
    holder_constant: Option<f64>,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::DomainError("k must be at least 1".into()));
    }
    let scale = if beta == 0.0 || beta == 1.0 {
        1.0
    } else {
        holder_constant.ok_or_else(|| {
            Error::DomainError(format!(
                "beta = {beta} needs the interpolation constant C_(beta,d), which has no known value"
            ))
        })?
    };
    Ok(scale * ((k as f64).powf(1.0 / alpha) * c0).powf(k as f64 - beta))
}

/// Constants of the smoothing estimates for the semigroup and the Duhamel term.
pub fn schauder_constants(
    k: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
    c0: f64,
    d: usize,
    holder_constant: Option<f64>,
) -> Result<SchauderConstants> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::DomainError(format!(
            "alpha = {alpha} must lie in (1, 2]"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::DomainError(format!(
            "beta = {beta} must lie in [0, 1]"
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::DomainError(format!(
            "gamma = {gamma} must lie in [0, 1)"
        )));
    }
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::DomainError(format!("c0 = {c0} must be positive")));
    }
    let s = alpha + beta;
    if s - k as f64 <= 0.0 {
        return Err(Error::DomainError(format!(
            "alpha + beta - k = {} must be positive",
            s - k as f64
        )));
    }
    let ck = smoothing_prefactor(k, alpha, beta, c0, holder_constant)?;
    let c_upper_k = if gamma == 0.0 {
        alpha * ck / (s - k as f64)
    } else {
        ck * beta_function(1.0 - gamma, (s - k as f64) / alpha)?
    };
    let c_bar = if s.fract() == 0.0 {
        None
    } else {
        let fl = s.floor() as usize;
        let frac = s - s.floor();
        let c_fl = smoothing_prefactor(fl, alpha, beta, c0, holder_constant)?;
        let c_next = smoothing_prefactor(fl + 1, alpha, beta, c0, holder_constant)?;
        Some(if gamma == 0.0 {
            alpha * (c_next / (fl as f64 + 1.0 - s) + 2.0 * c_fl / frac)
        } else {
            let first = 4.0 * c_fl * (1.0 / (1.0 - gamma) + alpha / frac);
            let second = 2.0
                * (c_fl * beta_function(1.0 - gamma, frac / alpha)?
                    + c_next * (alpha / (1.0 - frac) + 1.0 / (1.0 - gamma)));
            first.max(second)
        })
    };
    Ok(SchauderConstants {
        k,
        alpha,
        beta,
        gamma,
        c0,
        d,
        c_k_beta_d: ck,
        c_upper_k,
        c_bar,
    })
}

// Sums `sum_{m>=0} term_m` with `term_{m+1} = term_m * ratio(m)` and `ratio`
// nonincreasing in `m`; the geometric tail bound certifies the truncation.
fn ratio_series<F: Fn(usize) -> f64>(ratio: F, tol: f64) -> Result<Series> {
    let mut sum = 1.0;
    let mut term: f64 = 1.0;
    for m in 0..1_000_000 {
        let r = ratio(m);
        if !r.is_finite() || r < 0.0 {
            return Err(Error::DomainError(format!("series ratio {r} at term {m}")));
        }
        if r == 0.0 {
            return Ok(Series {
                value: sum,
                tail_bound: 0.0,
                terms: m + 1,
            });
        }
        let next = term * r;
        if r < 1.0 {
            let tail = next / (1.0 - r);
            if tail <= tol * sum {
                return Ok(Series {
                    value: sum,
                    tail_bound: tail,
                    terms: m + 1,
                });
            }
        }
        sum += next;
        term = next;
        if !sum.is_finite() {
            return Err(Error::NoConvergence("series overflows f64".into()));
        }
    }
    Err(Error::NoConvergence(
        "ratio series did not reach its tolerance".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Series {
    /// Partial sum.
    pub value: f64,
    /// Certified bound on the discarded terms.
    pub tail_bound: f64,
    pub terms: usize,
}

const SERIES_TOL: f64 = 1e-16;

/// `sum_{m>=1} prod_{j<m} c B(1-zeta, 1-gamma+j(1-zeta)) T0^{(m-1)(1-zeta)}`,
/// so that the iterated kernel applied to `t^{-gamma}` is bounded by
/// `S T0^{1-zeta} t^{-gamma}` on `(0, T0)`.
fn resolvent_sum(c: f64, gamma: f64, zeta: f64, t0: f64) -> Result<f64> {
    let e = 1.0 - zeta;
    let b0 = beta_function(e, 1.0 - gamma)?;
    let first = c * b0;
    if first == 0.0 {
        return Ok(0.0);
    }
    // ratios B(e, 1-gamma+m e) decrease in m
    let s = ratio_series(
        |m| {
            let x = 1.0 - gamma + (m + 1) as f64 * e;
            c * (ln_gamma(e) + ln_gamma(x) - ln_gamma(e + x)).exp() * t0.powf(e)
        },
        SERIES_TOL,
    )?;
    Ok(first * (s.value + s.tail_bound))
}

/// Constants `(C1, C2)` of the first Grönwall bound.
///
/// They follow from summing the iterated kernels exactly (a Neumann series) and
/// are proportional to `a0` and `aT0`: no pair independent of the data can hold
/// for all data, since the hypothesis is linear in `u`.
pub fn gronwall_1_constants(
    a0: f64,
    at0: f64,
    c: f64,
    gamma: f64,
    zeta: f64,
    t0: f64,
) -> Result<(f64, f64)> {
    check_gronwall_1(a0, at0, c, gamma, zeta, t0)?;
    let c1 = if a0 == 0.0 {
        0.0
    } else {
        a0 * resolvent_sum(c, gamma, zeta, t0)?
    };
    let c2 = if at0 == 0.0 {
        0.0
    } else {
        at0 * resolvent_sum(c, 0.0, zeta, t0)?
    };
    Ok((c1, c2))
}

fn check_gronwall_1(a0: f64, at0: f64, c: f64, gamma: f64, zeta: f64, t0: f64) -> Result<()> {
    if !(gamma < 1.0 && zeta < 1.0) {
        return Err(Error::DomainError(format!(
            "gamma = {gamma} and zeta = {zeta} must both be below 1"
        )));
    }
    if [a0, at0, c].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::DomainError(
            "a0, aT0 and c must be nonnegative".into(),
        ));
    }
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::DomainError(format!("T0 = {t0} must be positive")));
    }
    Ok(())
}

/// `(a0 + C1 T0^{1-zeta}) t^{-gamma} + aT0 + C2 T0^{1-zeta}` for any `u` with
/// `u(t) <= a0 t^{-gamma} + aT0 + c int_0^t (t-s)^{-zeta} u(s) ds` on `[0, T0)`.
pub fn gronwall_bound_1(
    a0: f64,
    at0: f64,
    c: f64,
    gamma: f64,
    zeta: f64,
    t0: f64,
    t: f64,
) -> Result<f64> {
    check_gronwall_1(a0, at0, c, gamma, zeta, t0)?;
    if !(t > 0.0 && t <= t0) {
        return Err(Error::DomainError(format!("t = {t} must lie in (0, T0]")));
    }
    let (c1, c2) = gronwall_1_constants(a0, at0, c, gamma, zeta, t0)?;
    let w = t0.powf(1.0 - zeta);
    Ok((a0 + c1 * w) * t.powf(-gamma) + at0 + c2 * w)
}

/// Series bound `a t^{abar-1} sum_m C'_m (b Gamma(bbar))^m t^{m nu}` for
/// `u(t) <= a t^{abar-1} + b int_0^t (t-s)^{bbar-1} s^{gbar-1} u(s) ds`,
/// with `nu = bbar + gbar - 1`, `delta = abar + gbar - 1` and
/// `C'_{m+1} / C'_m = Gamma(m nu + delta) / Gamma(m nu + delta + bbar)`.
pub fn gronwall_bound_2(
    a: f64,
    b: f64,
    alpha_bar: f64,
    beta_bar: f64,
    gamma_bar: f64,
    t: f64,
    tol: f64,
) -> Result<Series> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::DomainError("a and b must be nonnegative".into()));
    }
    if !(alpha_bar > 0.0 && beta_bar > 0.0 && gamma_bar > 0.0) {
        return Err(Error::DomainError("exponents must be positive".into()));
    }
    let nu = beta_bar + gamma_bar - 1.0;
    let delta = alpha_bar + gamma_bar - 1.0;
    if !(nu > 0.0 && delta > 0.0) {
        return Err(Error::DomainError(format!(
            "need beta_bar + gamma_bar > 1 and alpha_bar + gamma_bar > 1, got nu = {nu}, delta = {delta}"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::DomainError(format!("t = {t} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::DomainError("tol must be positive".into()));
    }
    let scale = a * t.powf(alpha_bar - 1.0);
    if b == 0.0 || a == 0.0 {
        return Ok(Series {
            value: scale,
            tail_bound: 0.0,
            terms: 1,
        });
    }
    let lead = (b.ln() + ln_gamma(beta_bar) + nu * t.ln()).exp();
    // Gamma(x) / Gamma(x + bbar) decreases in x, so the ratios are nonincreasing
    let s = ratio_series(
        |m| {
            let x = m as f64 * nu + delta;
            lead * (ln_gamma(x) - ln_gamma(x + beta_bar)).exp()
        },
        tol,
    )?;
    Ok(Series {
        value: scale * s.value,
        tail_bound: scale * s.tail_bound,
        terms: s.terms,
    })
}

/// Forcing term of the Volterra oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    /// `a0 t^{-gamma} + aT0`.
    SingularPlusConstant { a0: f64, gamma: f64, at0: f64 },
    /// `a t^{abar - 1}`.
    Power { a: f64, alpha_bar: f64 },
}

impl Forcing {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Forcing::SingularPlusConstant { a0, gamma, at0 } => {
                if a0 == 0.0 {
                    at0
                } else {
                    a0 * t.powf(-gamma) + at0
                }
            }
            Forcing::Power { a, alpha_bar } => {
                if a == 0.0 {
                    0.0
                } else {
                    a * t.powf(alpha_bar - 1.0)
                }
            }
        }
    }
}

/// Treatment of `u` on each cell of the oracle's product integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Smaller endpoint value; a lower Riemann sum for monotone pieces.
    Lower,
    /// Linear interpolation, integrated exactly against the kernel.
    Trapezoid,
}

// int_{x0}^{x1} s^{p-1} (1-s)^{q-1} ds, keeping relative accuracy near both ends
fn beta_moment(x0: f64, x1: f64, p: f64, q: f64, bpq: f64) -> f64 {
    if x1 <= x0 {
        return 0.0;
    }
    if q == 1.0 {
        return (x1.powf(p) - x0.powf(p)) / p;
    }
    if p == 1.0 {
        return ((1.0 - x0).powf(q) - (1.0 - x1).powf(q)) / q;
    }
    if x1 <= 0.5 {
        bpq * (beta_reg(p, q, x1) - beta_reg(p, q, x0))
    } else if x0 >= 0.5 {
        bpq * (beta_reg(q, p, 1.0 - x0) - beta_reg(q, p, 1.0 - x1))
    } else {
        beta_moment(x0, 0.5, p, q, bpq) + beta_moment(0.5, x1, p, q, bpq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sweeps: usize,
}

const ORACLE_TOL: f64 = 1e-10;
const ORACLE_MAX_SWEEPS: usize = 10_000;

/// Fixed point of `u = a + b K u` with `K u(t) = int_0^t (t-s)^{bbar-1} s^{gbar-1} u(s) ds`
/// on the nodes `t_j = j T / n`, `j = 1..n`, by Picard sweeps.
///
/// The kernel is integrated exactly on each cell; only `u` is approximated.
pub fn volterra_oracle<F: Fn(f64) -> f64>(
    a_fn: F,
    b: f64,
    beta_bar: f64,
    gamma_bar: f64,
    horizon: f64,
    n: usize,
    scheme: Scheme,
) -> Result<OracleSolution> {
    if n < 64 {
        return Err(Error::DomainError(format!(
            "oracle needs at least 64 nodes, got {n}"
        )));
    }
    if !(beta_bar > 0.0 && gamma_bar > 0.0 && beta_bar + gamma_bar > 1.0) {
        // otherwise K u does not vanish at t = 0 and u(0) is not the forcing
        return Err(Error::DomainError(
            "kernel exponents must be positive with beta_bar + gamma_bar > 1".into(),
        ));
    }
    if !(b >= 0.0 && b.is_finite() && horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::DomainError("need b >= 0 and T > 0".into()));
    }
    let h = horizon / n as f64;
    let times: Vec<f64> = (1..=n).map(|j| j as f64 * h).collect();
    let forcing: Vec<f64> = times.iter().map(|t| a_fn(*t)).collect();
    if forcing.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteField(
            "forcing is not finite on the nodes".into(),
        ));
    }
    let a_zero = a_fn(0.0);
    if b == 0.0 {
        return Ok(OracleSolution {
            times,
            values: forcing,
            sweeps: 0,
        });
    }
    // cell k = [s_k, s_{k+1}] with s_k = k h; row j holds cells 0..=j
    let b0 = beta_function(gamma_bar, beta_bar)?;
    let b1 = beta_function(gamma_bar + 1.0, beta_bar)?;
    let mut w0 = Vec::with_capacity(n);
    let mut w1 = Vec::with_capacity(n);
    for (j, &t) in times.iter().enumerate() {
        let s0 = t.powf(beta_bar + gamma_bar - 1.0);
        let s1 = s0 * t;
        let cells = j + 1;
        let mut r0 = Vec::with_capacity(cells);
        let mut r1 = Vec::with_capacity(cells);
        for k in 0..cells {
            let x0 = k as f64 / cells as f64;
            let x1 = (k + 1) as f64 / cells as f64;
            r0.push(s0 * beta_moment(x0, x1, gamma_bar, beta_bar, b0));
            if scheme == Scheme::Trapezoid {
                r1.push(s1 * beta_moment(x0, x1, gamma_bar + 1.0, beta_bar, b1));
            }
        }
        w0.push(r0);
        w1.push(r1);
    }
    let start = if a_zero.is_finite() {
        Some(a_zero)
    } else {
        None
    };
    let mut u = forcing.clone();
    for sweep in 1..=ORACLE_MAX_SWEEPS {
        let mut next = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..=j {
                // u at s_k and s_{k+1}; with a(0) singular the first cell uses
                // a(t_1), a lower value there since u >= a and a decreases near 0
                let left = if k == 0 { start } else { Some(u[k - 1]) };
                let right = u[k];
                acc += match (scheme, left) {
                    (Scheme::Lower, Some(l)) => w0[j][k] * l.min(right),
                    (Scheme::Trapezoid, Some(l)) => {
                        // linear piece l + (right - l) (s - s_k) / h
                        let sk = k as f64 * h;
                        let slope = (right - l) / h;
                        w0[j][k] * (l - slope * sk) + w1[j][k] * slope
                    }
                    (Scheme::Lower, None) => w0[j][k] * forcing[0].min(right),
                    (Scheme::Trapezoid, None) => w0[j][k] * right,
                };
            }
            next.push(forcing[j] + b * acc);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField("oracle iterate overflowed".into()));
        }
        let change = next
            .iter()
            .zip(&u)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        u = next;
        if change < ORACLE_TOL {
            return Ok(OracleSolution {
                times,
                values: u,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NoConvergence(format!(
        "Volterra oracle did not settle in {ORACLE_MAX_SWEEPS} sweeps"
    )))
}
