//! Adaptive Gauss-Kronrod quadrature on finite and semi-infinite intervals,
//! plus Gauss-Laguerre rules for exponentially weighted tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}")]
    NonConvergence { value: f64, error: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Value and absolute error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

// Kronrod 15-point abscissae and weights; the Gauss 7-point rule uses the
// odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Estimate, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { x: center });
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite { x: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite { x: x2 });
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok(Estimate { value, error })
}

struct Interval {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Globally adaptive G7/K15 quadrature of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |value|)`. An empty interval
/// integrates to exactly zero.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate, QuadError> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    if b < a {
        let e = integrate(f, b, a, rel_tol, abs_tol)?;
        return Ok(Estimate { value: -e.value, error: e.error });
    }
    let first = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, est: first });
    let mut total = first;
    loop {
        let target = abs_tol.max(rel_tol * total.value.abs());
        // roundoff floor: no point refining below a few ulps of the result
        let floor = 64.0 * f64::EPSILON * total.value.abs();
        if total.error <= target || total.error <= floor {
            // re-sum to shed accumulated cancellation from the running updates
            let value = heap.iter().map(|iv| iv.est.value).sum();
            let error = heap.iter().map(|iv| iv.est.error).sum();
            return Ok(Estimate { value, error });
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(QuadError::NonConvergence { value: total.value, error: total.error });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(QuadError::NonConvergence { value: total.value, error: total.error });
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        heap.push(Interval { a: worst.a, b: mid, est: left });
        heap.push(Interval { a: mid, b: worst.b, est: right });
    }
}

/// Adaptive quadrature over `[a, ∞)` through the map `x = a + (1 - u) / u`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate, QuadError> {
    integrate(
        |u| {
            let x = a + (1.0 - u) / u;
            if !x.is_finite() {
                return 0.0;
            }
            let v = f(x) / (u * u);
            // the mapped integrand vanishes at u -> 0 for integrable f
            if v.is_nan() { 0.0 } else { v }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// Gauss-Laguerre rule for `∫_0^∞ e^{-x} g(x) dx`.
#[derive(Debug, Clone)]
pub struct Laguerre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Laguerre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2, "Gauss-Laguerre order must be at least 2");
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0_f64;
        for i in 0..n {
            // asymptotic initial guesses, refined by Newton on L_n
            if i == 0 {
                z = 3.0 / (1.0 + 2.4 * nf);
            } else if i == 1 {
                z += 15.0 / (1.0 + 2.5 * nf);
            } else {
                let ai = (i - 1) as f64;
                z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2]);
            }
            let mut pp = 0.0;
            let mut p2 = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = (nf * p1 - nf * p2) / z;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            weights[i] = -1.0 / (pp * nf * p2);
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫_0^∞ e^{-x} g(x) dx`.
    pub fn integrate<G: FnMut(f64) -> f64>(&self, mut g: G) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }

    /// `∫_{s0}^∞ e^{-rate (s - s0)} g(s) ds` for `rate > 0`.
    pub fn integrate_exp_tail<G: FnMut(f64) -> f64>(&self, rate: f64, s0: f64, mut g: G) -> f64 {
        debug_assert!(rate > 0.0);
        self.integrate(|x| g(s0 + x / rate)) / rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(|x| 3.0 * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((e.value - 9.0).abs() < 1e-13);
    }

    #[test]
    fn empty_and_reversed_intervals() {
        let e = integrate(|x| x.exp(), 1.5, 1.5, 1e-12, 0.0).unwrap();
        assert_eq!(e.value, 0.0);
        let fwd = integrate(|x| x.exp(), 0.0, 1.0, 1e-13, 0.0).unwrap();
        let rev = integrate(|x| x.exp(), 1.0, 0.0, 1e-13, 0.0).unwrap();
        assert!((fwd.value + rev.value).abs() < 1e-15);
        assert!((fwd.value - (1.0_f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_refines() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let exact = 2.0 * (1.0 / 1e-2) * (1.0 / 1e-2_f64).atan();
        let e = integrate(f, -1.0, 1.0, 1e-11, 0.0).unwrap();
        assert!(((e.value - exact) / exact).abs() < 1e-10, "{} vs {}", e.value, exact);
    }

    #[test]
    fn semi_infinite_interval() {
        let e = integrate_to_infinity(|x| (-x).exp(), 2.0, 1e-12, 0.0).unwrap();
        assert!((e.value - (-2.0_f64).exp()).abs() < 1e-14);
        let e = integrate_to_infinity(|x| 1.0 / (x * x), 1.0, 1e-12, 0.0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn non_finite_is_reported() {
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, 1e-10, 0.0);
        assert!(matches!(err, Err(QuadError::NonFinite { .. })));
    }

    #[test]
    fn laguerre_moments() {
        let rule = Laguerre::new(40);
        // ∫ e^{-x} x^k = k!
        let mut fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                fact *= k as f64;
            }
            let v = rule.integrate(|x| x.powi(k));
            assert!(((v - fact) / fact).abs() < 1e-11, "k={k}: {v} vs {fact}");
        }
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-13);
    }

    #[test]
    fn laguerre_shifted_tail() {
        let rule = Laguerre::new(40);
        // ∫_3^∞ e^{-0.7 s} (1 + s) ds
        let direct = rule.integrate_exp_tail(0.7, 3.0, |s| 1.0 + s) * (-0.7_f64 * 3.0).exp();
        let exact = (-2.1_f64).exp() * (4.0 / 0.7 + 1.0 / 0.49);
        assert!(((direct - exact) / exact).abs() < 1e-13, "{direct} vs {exact}");
    }
}
