//! Executable identities and inequalities among the estimating functions.
//!
//! Every integral appearing on one side of a relation is evaluated here by
//! its own adaptive quadrature; the evaluators are only used for the
//! integrands and for the side that names an estimating function directly.

use crate::estfun::{h0_general, h_general, EstContext, EstError};
use crate::quad;

pub const EQUALITY_REL_TOL: f64 = 1e-8;
pub const INEQUALITY_SLACK: f64 = 1e-12;
/// Smallest decay rate in log time for which an independent quadrature over
/// `[log t, 700]` still captures the whole tail of a P-type integral.
pub const MIN_TAIL_RATE: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `lhs == rhs` to relative tolerance; `measure` is the relative error.
    Equality,
    /// `lhs <= rhs + slack`; `measure` is `lhs - rhs`.
    Inequality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub id: String,
    pub kind: CheckKind,
    pub gamma: f64,
    pub m: usize,
    pub t: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub measure: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityReport {
    pub checked: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn failures(&self) -> Vec<&IdentityCheck> {
        self.checked.iter().filter(|c| !c.pass).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.checked.iter().all(|c| c.pass)
    }

    pub fn equalities(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checked.iter().filter(|c| c.kind == CheckKind::Equality)
    }

    pub fn inequalities(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checked.iter().filter(|c| c.kind == CheckKind::Inequality)
    }
}

fn relative_error(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

struct Sample {
    m: usize,
    t: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
}

struct Recorder<'a> {
    gamma: f64,
    out: &'a mut Vec<IdentityCheck>,
}

impl Recorder<'_> {
    fn push(&mut self, id: &str, kind: CheckKind, at: &Sample, sides: Result<(f64, f64), EstError>) {
        let (lhs, rhs, measure, pass) = match sides {
            Ok((lhs, rhs)) => match kind {
                CheckKind::Equality => {
                    let e = relative_error(lhs, rhs);
                    (lhs, rhs, e, e <= EQUALITY_REL_TOL)
                }
                CheckKind::Inequality => (lhs, rhs, lhs - rhs, lhs <= rhs + INEQUALITY_SLACK),
            },
            Err(_) => (f64::NAN, f64::NAN, f64::NAN, false),
        };
        self.out.push(IdentityCheck {
            id: id.to_string(),
            kind,
            gamma: self.gamma,
            m: at.m,
            t: at.t,
            a: at.a,
            b: at.b,
            lhs,
            rhs,
            measure,
            pass,
        });
    }

    fn eq(&mut self, id: &str, at: &Sample, sides: Result<(f64, f64), EstError>) {
        self.push(id, CheckKind::Equality, at, sides)
    }

    fn le(&mut self, id: &str, at: &Sample, sides: Result<(f64, f64), EstError>) {
        self.push(id, CheckKind::Inequality, at, sides)
    }
}

/// Independent integrals in log time.
struct Integrals<'a> {
    ctx: &'a EstContext,
}

impl Integrals<'_> {
    /// `∫_a^b dt t^{-2} f(t)` as `∫ e^{-x} f(e^x) dx`.
    fn inv_sq(&self, f: impl Fn(f64) -> Result<f64, EstError>, sa: f64, sb: f64) -> Result<f64, EstError> {
        self.finite(|x| Ok((-x).exp() * f(x)?), sa, sb)
    }

    /// `∫_a^b dt t^{-gamma} f(t)`.
    fn inv_gamma(&self, f: impl Fn(f64) -> Result<f64, EstError>, sa: f64, sb: f64) -> Result<f64, EstError> {
        let ctx = self.ctx;
        self.finite(|x| Ok(ctx.weight_log(x) * f(x)?), sa, sb)
    }

    /// `∫_t^∞ dt1 t1^{-2} f(t1)`.
    fn inv_sq_tail(&self, f: impl Fn(f64) -> Result<f64, EstError>, s: f64) -> Result<f64, EstError> {
        self.infinite(|x| Ok((-x).exp() * f(x)?), s)
    }

    /// `∫_t^∞ dt1 t1^{-gamma} f(t1)`.
    fn inv_gamma_tail(&self, f: impl Fn(f64) -> Result<f64, EstError>, s: f64) -> Result<f64, EstError> {
        let ctx = self.ctx;
        self.infinite(|x| Ok(ctx.weight_log(x) * f(x)?), s)
    }

    fn finite(&self, f: impl Fn(f64) -> Result<f64, EstError>, sa: f64, sb: f64) -> Result<f64, EstError> {
        let mut err = None;
        let v = quad::integrate(
            |x| match f(x) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            sa,
            sb,
            self.ctx.quad_rel_tol,
            0.0,
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(v.value),
        }
    }

    fn infinite(&self, f: impl Fn(f64) -> Result<f64, EstError>, s: f64) -> Result<f64, EstError> {
        let mut err = None;
        let v = quad::integrate_to_infinity(
            |x| {
                // all integrands decay exponentially in log time
                if x > 700.0 {
                    return 0.0;
                }
                match f(x) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            s,
            self.ctx.quad_rel_tol,
            0.0,
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(v.value),
        }
    }
}

/// Runs the identity and inequality suite on every sample.
///
/// `t_samples` feed the pointwise relations, `a_b_pairs` the windowed ones
/// over `[a, b]`. Relations that need `(m + 2) gamma > 1` or `m >= 1` are
/// only sampled where their hypotheses hold. The upper sandwich bounds on
/// `N_m` and `Q_m` are skipped for `gamma > 0.95`, where their constant
/// blows up, and the upper bounds on `h` and `P_m` are skipped at
/// `gamma = 1`, where they do not hold. Relations whose integrals decay like
/// `t^{1-(m+2) gamma}` are skipped when that rate is below [`MIN_TAIL_RATE`].
pub fn verify_identities(
    ctx: &EstContext,
    m_max: usize,
    t_samples: &[f64],
    a_b_pairs: &[(f64, f64)],
) -> Result<IdentityReport, EstError> {
    for &t in t_samples {
        if !(t >= 1.0) {
            return Err(EstError::Domain(format!("sample t = {t} is below 1")));
        }
    }
    for &(a, b) in a_b_pairs {
        if !(1.0 <= a && a <= b) {
            return Err(EstError::Domain(format!("pair ({a}, {b}) does not satisfy 1 <= a <= b")));
        }
    }
    let gamma = ctx.gamma;
    let mut out = Vec::new();
    let mut rec = Recorder { gamma, out: &mut out };
    let ints = Integrals { ctx };
    let g = gamma;
    let p_ok = |m: usize| (m as f64 + 2.0) * g - 1.0 >= MIN_TAIL_RATE;
    let gpow = |k: i32| g.powi(-k);

    let n = |m: usize, x: f64| -> Result<f64, EstError> { Ok(ctx.n_log(m, x)?) };
    let q = |m: usize, x: f64| -> Result<f64, EstError> { Ok(ctx.q_log(m, x)?) };
    let h = |x: f64| ctx.h_log(x);
    let h0 = |x: f64| ctx.h0_log(x);

    for &t in t_samples {
        let s = t.ln();
        let at0 = Sample { m: 0, t: Some(t), a: None, b: None };

        rec.eq("h_split", &at0, Ok((h(s), (-s).exp() * h0(s) + (-g * s).exp() / g)));
        rec.eq("h_tail", &at0, ints.inv_sq_tail(|x| Ok(h0(x)), s).map(|l| (l, h(s))));
        rec.le("h_lower", &at0, Ok((((-g * s).exp().max((-s).exp())) / g, h(s))));
        if g < 1.0 {
            let upper = ((-g * s).exp() / g).max((-s).exp()) / (1.0 - g).abs();
            rec.le("h_upper", &at0, Ok((h(s), upper)));
        }

        for m in 0..=m_max {
            let at = Sample { m, t: Some(t), a: None, b: None };
            let mi = m as i32;

            rec.eq("n_tail_is_q", &at, (|| Ok((ints.inv_sq_tail(|x| n(m, x), s)?, q(m, s)?)))());
            rec.eq(
                "h0n_head",
                &at,
                (|| {
                    let lhs = ints.inv_sq(|x| Ok(h0(x) * n(m, x)?), 0.0, s)?;
                    Ok((lhs, n(m + 1, s)? - h(s) * n(m, s)?))
                })(),
            );
            rec.le(
                "h0n_head_bound",
                &at,
                (|| Ok((ints.inv_sq(|x| Ok(h0(x) * n(m, x)?), 0.0, s)?, n(m + 1, s)?)))(),
            );
            if p_ok(m) {
                rec.eq(
                    "h0n_tail_is_p",
                    &at,
                    (|| Ok((ints.inv_sq_tail(|x| Ok(h0(x) * n(m, x)?), s)?, ctx.p_log(m, s)?)))(),
                );
            }

            for i in 0..=m {
                let j = m - i;
                let (ii, ji) = (i as i32, j as i32);
                if j >= 1 {
                    rec.le(&format!("n_order:i{i}j{j}"), &at, (|| Ok((n(m, s)?, gpow(ji) * n(i, s)?)))());
                    rec.le(&format!("q_order:i{i}j{j}"), &at, (|| Ok((q(m, s)?, gpow(ji) * q(i, s)?)))());
                }
                rec.le(
                    &format!("n_order_h0:i{i}j{j}"),
                    &at,
                    (|| Ok((gpow(ji) * n(i, s)?, gpow(ii + ji) * h0(s))))(),
                );
                rec.le(
                    &format!("q_order_h:i{i}j{j}"),
                    &at,
                    (|| Ok((gpow(ji) * q(i, s)?, gpow(ii + ji) * h(s))))(),
                );
            }

            let gm = (m as f64 + 1.0) * g;
            rec.le("n_sandwich_lower", &at, (|| Ok((gpow(mi) * h0_general(gm, t), n(m, s)?)))());
            rec.le("q_sandwich_lower", &at, (|| Ok((gpow(mi) * h_general(gm, t), q(m, s)?)))());
            if g <= 0.95 {
                let c = (1.0 - g).powi(-mi) * gpow(mi);
                rec.le("n_sandwich_upper", &at, (|| Ok((n(m, s)?, c * h0_general(gm, t))))());
                rec.le("q_sandwich_upper", &at, (|| Ok((q(m, s)?, c * h_general(gm, t))))());
            }

            if p_ok(m) {
                let p = ctx.p_log(m, s);
                let base = gpow(mi + 1)
                    * ((-g * s).exp() * h0_general(gm, t)
                        + ((1.0 - (m as f64 + 2.0) * g) * s).exp() / ((m as f64 + 2.0) * g - 1.0));
                rec.le("p_lower", &at, p.clone().map(|p| (base, p)));
                if g < 1.0 {
                    rec.le("p_upper", &at, p.clone().map(|p| (p, (1.0 - g).powi(-(mi + 1)) * base)));
                }
                rec.le(
                    "q_tail_vs_p",
                    &at,
                    (|| Ok((ints.inv_gamma_tail(|x| q(m, x), s)?, p.clone()?)))(),
                );
                rec.le("r_bound", &at, (|| Ok((ctx.r_log(m, s)?, ctx.c_m(m) * h(s) * q(m, s)?)))());
                if m >= 1 {
                    rec.le(
                        "hq_tail_vs_q_tail",
                        &at,
                        (|| {
                            let lhs = ints.inv_gamma_tail(|x| Ok(h(x) * q(m - 1, x)?), s)?;
                            Ok((lhs, ints.inv_gamma_tail(|x| q(m, x), s)?))
                        })(),
                    );
                }
            }

            if m >= 1 {
                rec.le(
                    "hq_head_vs_n",
                    &at,
                    (|| Ok((ints.inv_gamma(|x| Ok(h(x) * q(m - 1, x)?), 0.0, s)?, n(m + 1, s)?)))(),
                );
                rec.le("hq_vs_2q", &at, (|| Ok((h(s) * q(m - 1, s)?, 2.0 * q(m, s)?)))());
            }
            rec.le(
                "q_head_vs_n",
                &at,
                (|| Ok((ints.inv_gamma(|x| q(m, x), 0.0, s)?, n(m + 1, s)?)))(),
            );
        }
    }

    for &(a, b) in a_b_pairs {
        let (sa, sb) = (a.ln(), b.ln());
        for m in 0..=m_max {
            let at = Sample { m, t: None, a: Some(a), b: Some(b) };
            for i in 0..=m {
                let j = m - i;
                rec.le(
                    &format!("nn_vs_h0n:i{i}j{j}"),
                    &at,
                    (|| {
                        let lhs = ints.inv_sq(|x| Ok(n(i, x)? * n(j, x)?), sa, sb)?;
                        Ok((lhs, ints.inv_sq(|x| Ok(h0(x) * n(m, x)?), sa, sb)?))
                    })(),
                );
                rec.le(
                    &format!("nq_vs_hn:i{i}j{j}"),
                    &at,
                    (|| {
                        let lhs = ints.inv_sq(|x| Ok(n(i, x)? * q(j, x)?), sa, sb)?;
                        Ok((lhs, ints.inv_sq(|x| Ok(h(x) * n(m, x)?), sa, sb)?))
                    })(),
                );
                rec.le(
                    &format!("qq_vs_hq:i{i}j{j}"),
                    &at,
                    (|| {
                        let lhs = ints.inv_gamma(|x| Ok(q(i, x)? * q(j, x)?), sa, sb)?;
                        Ok((lhs, ints.inv_gamma(|x| Ok(h(x) * q(m, x)?), sa, sb)?))
                    })(),
                );
            }
            rec.le(
                "hn_vs_n_next",
                &at,
                (|| {
                    let lhs = ints.inv_sq(|x| Ok(h(x) * n(m, x)?), sa, sb)?;
                    Ok((lhs, ints.inv_sq(|x| n(m + 1, x), sa, sb)?))
                })(),
            );
            let dh0 = h0(sb) - h0(sa);
            rec.le(
                "q_window",
                &at,
                (|| Ok((ints.inv_gamma(|x| q(m, x), sa, sb)?, q(m, sa)? * dh0)))(),
            );
            if m >= 1 {
                rec.le(
                    "hq_window",
                    &at,
                    (|| {
                        let lhs = ints.inv_gamma(|x| Ok(h(x) * q(m - 1, x)?), sa, sb)?;
                        Ok((lhs, 2.0 * q(m, sa)? * dh0))
                    })(),
                );
            }
        }
    }

    Ok(IdentityReport { checked: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_at_half() {
        let ctx = EstContext::new(0.5).unwrap();
        let report = verify_identities(&ctx, 2, &[1.0, 2.0, 10.0, 100.0, 1000.0], &[(1.0, 3.0), (2.0, 50.0)]).unwrap();
        let failures = report.failures();
        assert!(failures.is_empty(), "{failures:#?}");
        assert!(report.equalities().count() > 0 && report.inequalities().count() > 0);
    }

    #[test]
    fn h_tail_at_gamma_one() {
        let ctx = EstContext::new(1.0).unwrap();
        let report = verify_identities(&ctx, 0, &[10.0], &[]).unwrap();
        let c = report.checked.iter().find(|c| c.id == "n_tail_is_q").unwrap();
        assert!((c.lhs - (1.0 + 10f64.ln()) / 10.0).abs() < 1e-12);
        assert!(c.pass);
    }

    #[test]
    fn h_lower_is_tight_at_one() {
        let ctx = EstContext::new(0.3).unwrap();
        let report = verify_identities(&ctx, 0, &[1.0], &[]).unwrap();
        let c = report.checked.iter().find(|c| c.id == "h_lower").unwrap();
        assert_eq!(c.lhs, c.rhs);
    }

    #[test]
    fn each_sample_is_recorded_once() {
        let ctx = EstContext::new(0.75).unwrap();
        let report = verify_identities(&ctx, 1, &[2.0, 20.0], &[(1.0, 4.0)]).unwrap();
        let mut keys: Vec<String> = report
            .checked
            .iter()
            .map(|c| format!("{}|{}|{:?}|{:?}|{:?}", c.id, c.m, c.t, c.a, c.b))
            .collect();
        let before = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(before, keys.len());
    }

    #[test]
    fn rejects_bad_samples() {
        let ctx = EstContext::new(0.75).unwrap();
        assert!(verify_identities(&ctx, 1, &[0.5], &[]).is_err());
        assert!(verify_identities(&ctx, 1, &[], &[(3.0, 2.0)]).is_err());
    }

    #[test]
    fn a_broken_relation_is_reported() {
        let mut out = Vec::new();
        let mut rec = Recorder { gamma: 0.75, out: &mut out };
        let at = Sample { m: 0, t: Some(1.0), a: None, b: None };
        rec.le("x", &at, Ok((1.0, 0.5)));
        rec.eq("y", &at, Ok((1.0, 1.0 + 1e-6)));
        let report = IdentityReport { checked: out };
        assert_eq!(report.failures().len(), 2);
    }
}
