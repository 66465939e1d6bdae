//! Adaptive Gauss-Kronrod integration and the exponential product-integration
//! weights used by the Duhamel march.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

// Kronrod 15-point abscissae on [-1, 1] (positive half, descending).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Embedded 7-point Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += pair * wk;
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).norm(),
    }
}

/// Adaptive G7/K15 integration of a complex-valued integrand over `[a, b]`.
///
/// `breaks` are optional interior points where the integrand changes scale;
/// they seed the initial partition.
pub fn integrate<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Result<Estimate>
where
    F: Fn(f64) -> Complex64,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::DomainError(format!(
            "integration interval [{a}, {b}] is not a finite ordered interval"
        )));
    }
    if a == b {
        return Ok(Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            intervals: 0,
        });
    }
    let mut points = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    points.extend(inner);
    points.push(b);

    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        heap.push(kronrod(&f, w[0], w[1]));
    }
    loop {
        let (value, error) = heap
            .iter()
            .fold((Complex64::new(0.0, 0.0), 0.0), |(v, e), s| {
                (v + s.value, e + s.error)
            });
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::NonConvergedQuadrature(
                "integrand produced a non-finite value".into(),
            ));
        }
        let target = tol.abs.max(tol.rel * value.norm());
        if error <= target {
            return Ok(Estimate {
                value,
                error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::NonConvergedQuadrature(format!(
                "error estimate {error:.3e} above target {target:.3e} after {} subintervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NonConvergedQuadrature(
                "subinterval width reached machine resolution".into(),
            ));
        }
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(|x| Complex64::new(f(x), 0.0), a, b, breaks, tol).map(|e| e.value.re)
}

const SERIES_RADIUS: f64 = 0.5;

/// `phi_1(a) = (1 - e^{-a}) / a`, the exact integral of `e^{-a(1-x)}` over `[0, 1]`.
pub fn phi1(a: Complex64) -> Complex64 {
    if a.norm() < SERIES_RADIUS {
        // sum (-a)^n / (n+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..30 {
            term *= -a / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (1.0 - (-a).exp()) / a
    }
}

/// `phi_2(a) = (1 - e^{-a}(1 + a)) / a^2 = int_0^1 y e^{-a y} dy`.
pub fn phi2(a: Complex64) -> Complex64 {
    if a.norm() < SERIES_RADIUS {
        // sum (-a)^n / (n! (n + 2))
        let mut power = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.5, 0.0);
        for n in 1..30 {
            power *= -a / n as f64;
            sum += power / (n as f64 + 2.0);
        }
        sum
    } else {
        (1.0 - (-a).exp() * (1.0 + a)) / (a * a)
    }
}

/// `int_0^1 e^{-a (1 - z)} z^{-rho} dz` for `Re a >= 0` and `rho in [0, 1)`.
///
/// The substitution `z = v^{1/(1-rho)}` removes the endpoint singularity, which
/// leaves a smooth integrand with at most a boundary layer at `v = 1`.
pub fn singular_start_weight(a: Complex64, rho: f64) -> Result<Complex64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::DomainError(format!(
            "singular exponent {rho} outside [0, 1)"
        )));
    }
    if rho == 0.0 {
        return Ok(phi1(a));
    }
    let k = 1.0 / (1.0 - rho);
    let scale = a.norm();
    let mut breaks = Vec::new();
    if scale > 1.0 {
        // boundary layer of width ~ 1 / (k |a|) next to v = 1
        for m in [1.0, 4.0, 16.0, 64.0] {
            let w = m / (k * scale);
            if w < 1.0 {
                breaks.push(1.0 - w);
            }
        }
    }
    let est = integrate(
        |v| (-a * (1.0 - v.powf(k))).exp() * k,
        0.0,
        1.0,
        &breaks,
        Tolerance {
            abs: 1e-15,
            rel: 1e-12,
            max_intervals: 2000,
        },
    )?;
    Ok(est.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate_real(|x| 3.0 * x * x, 0.0, 2.0, &[], Tolerance::default()).unwrap();
        assert_relative_eq!(v, 8.0, epsilon = 1e-14);
    }

    #[test]
    fn endpoint_singularity_converges() {
        // int_0^1 x^{-1/2} dx = 2
        let v = integrate_real(|x| x.powf(-0.5), 0.0, 1.0, &[], Tolerance::default()).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let tol = Tolerance {
            abs: 1e-300,
            rel: 1e-300,
            max_intervals: 4,
        };
        let r = integrate_real(|x| (50.0 * x).sin(), 0.0, 10.0, &[], tol);
        assert!(matches!(r, Err(Error::NonConvergedQuadrature(_))));
    }

    #[test]
    fn phi_functions_match_defining_integrals() {
        let tight = Tolerance {
            abs: 0.0,
            rel: 1e-14,
            max_intervals: 100,
        };
        for &re in &[1e-6, 0.1, 0.49, 0.51, 2.0, 40.0] {
            for &im in &[0.0, 0.3, -3.0] {
                let a = Complex64::new(re, im);
                let p1 = integrate(|x| (-a * (1.0 - x)).exp(), 0.0, 1.0, &[], tight)
                    .unwrap()
                    .value;
                let p2 = integrate(|y| (-a * y).exp() * y, 0.0, 1.0, &[], tight)
                    .unwrap()
                    .value;
                assert!((phi1(a) - p1).norm() <= 1e-13 * p1.norm(), "phi1 at {a}");
                assert!((phi2(a) - p2).norm() <= 1e-13 * p2.norm(), "phi2 at {a}");
            }
        }
        assert_relative_eq!(phi1(Complex64::new(0.0, 0.0)).re, 1.0);
        assert_relative_eq!(phi2(Complex64::new(0.0, 0.0)).re, 0.5);
    }

    #[test]
    fn singular_weight_limits() {
        // a = 0: int z^{-rho} = 1 / (1 - rho)
        let w = singular_start_weight(Complex64::new(0.0, 0.0), 0.4).unwrap();
        assert_relative_eq!(w.re, 1.0 / 0.6, epsilon = 1e-12);
        // rho = 0 reduces to phi_1
        let a = Complex64::new(3.0, 1.0);
        assert_eq!(singular_start_weight(a, 0.0).unwrap(), phi1(a));
        // large a: dominated by z near 1, w ~ 1/a
        let big = Complex64::new(1e4, 0.0);
        let w = singular_start_weight(big, 0.3).unwrap();
        assert_relative_eq!(w.re, 1e-4, max_relative = 1e-3);
    }
}
