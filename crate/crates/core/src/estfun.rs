//! Estimating functions of time h0, h, N_m, Q_m, P_m, R_m and the
//! identity/inequality suite relating them.
//!
//! All integrals are taken in the logarithmic variable tau = log t. Improper
//! integrals are cut at `t_cut`; beyond it the integrand is an exponential
//! sum in tau and is integrated exactly (or by Gauss-Laguerre when gamma is
//! so close to one that the exponential sum cancels badly).

use thiserror::Error;

use crate::quad::{self, Estimate, Laguerre, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("closed form and quadrature disagree: {closed:e} vs {quadrature:e}")]
    Mismatch { closed: f64, quadrature: f64 },
    #[error("bound violated: {lhs:e} > {rhs:e}")]
    BoundViolated { lhs: f64, rhs: f64 },
}

/// Below this value of 1 - gamma the tails use Gauss-Laguerre instead of
/// the expanded exponential sum.
const EXACT_TAIL_MIN_EPS: f64 = 0.05;
const LOG_BRANCH_EPS: f64 = 1e-12;

/// `expm1(eps * s) / eps`, continuous at eps = 0.
fn expm1_ratio(eps: f64, s: f64) -> f64 {
    if eps.abs() < LOG_BRANCH_EPS {
        s
    } else {
        (eps * s).exp_m1() / eps
    }
}

/// `-expm1(-eps * s) / eps`, continuous at eps = 0.
fn neg_expm1_ratio(eps: f64, s: f64) -> f64 {
    if eps.abs() < LOG_BRANCH_EPS {
        s
    } else {
        -(-eps * s).exp_m1() / eps
    }
}

/// h0(gamma, t) in log time; valid for any gamma > 0.
pub fn h0_log(gamma: f64, s: f64) -> f64 {
    expm1_ratio(1.0 - gamma, s)
}

/// h(gamma, t) in log time; valid for any gamma > 0.
pub fn h_log(gamma: f64, s: f64) -> f64 {
    (-s).exp() * (1.0 + h0_log(gamma, s)) / gamma
}

/// h0 for arbitrary gamma > 0, as needed by the sandwich bounds.
pub fn h0_general(gamma: f64, t: f64) -> f64 {
    h0_log(gamma, t.ln())
}

/// h for arbitrary gamma > 0, as needed by the sandwich bounds.
pub fn h_general(gamma: f64, t: f64) -> f64 {
    h_log(gamma, t.ln())
}

#[derive(Debug, Clone)]
pub struct EstContext {
    pub gamma: f64,
    pub quad_rel_tol: f64,
    pub t_cut: f64,
    /// Node count of the Gauss-Laguerre rule used for tails near gamma = 1.
    pub tail_nodes: usize,
    laguerre: Laguerre,
}

impl EstContext {
    pub fn new(gamma: f64) -> Result<Self, EstError> {
        Self::with_config(gamma, 1e-10, 1e8, 40)
    }

    pub fn with_config(gamma: f64, quad_rel_tol: f64, t_cut: f64, tail_nodes: usize) -> Result<Self, EstError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(EstError::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(quad_rel_tol > 0.0) {
            return Err(EstError::Domain(format!("quad_rel_tol must be positive, got {quad_rel_tol}")));
        }
        if !(t_cut > 1.0) {
            return Err(EstError::Domain(format!("t_cut must exceed 1, got {t_cut}")));
        }
        if tail_nodes < 2 {
            return Err(EstError::Domain("tail_nodes must be at least 2".into()));
        }
        Ok(Self { gamma, quad_rel_tol, t_cut, tail_nodes, laguerre: Laguerre::new(tail_nodes) })
    }

    fn eps(&self) -> f64 {
        1.0 - self.gamma
    }

    fn check_t(t: f64) -> Result<f64, EstError> {
        if !(t >= 1.0) || !t.is_finite() {
            return Err(EstError::Domain(format!("t must be a finite value >= 1, got {t}")));
        }
        Ok(t.ln())
    }

    fn check_p_domain(&self, m: usize) -> Result<(), EstError> {
        if (m as f64 + 2.0) * self.gamma <= 1.0 {
            return Err(EstError::Domain(format!(
                "(m + 2) gamma must exceed 1, got m = {m}, gamma = {}",
                self.gamma
            )));
        }
        Ok(())
    }

    fn integrate(&self, f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64, QuadError> {
        quad::integrate(f, a, b, self.quad_rel_tol, 0.0).map(|e: Estimate| e.value)
    }

    /// `t^{1-gamma}` written in log time, the weight of `dt t^{-gamma}`.
    pub fn weight_log(&self, s: f64) -> f64 {
        (self.eps() * s).exp()
    }

    pub fn h0_log(&self, s: f64) -> f64 {
        h0_log(self.gamma, s)
    }

    pub fn h_log(&self, s: f64) -> f64 {
        h_log(self.gamma, s)
    }

    /// `G` with `h(e^s) = e^{-gamma s} G(s) / gamma`.
    fn tail_factor(&self, s: f64) -> f64 {
        let eps = self.eps();
        (-eps * s).exp() + neg_expm1_ratio(eps, s)
    }

    /// `K` with `∫_σ^∞ t^{-2} h = e^{-(1+gamma) s} K(s) / gamma`, `s = log σ`.
    fn h2_factor(&self, s: f64) -> f64 {
        let eps = self.eps();
        let e = (-eps * s).exp();
        0.5 * e + (2.0 * neg_expm1_ratio(eps, s) + e) / (2.0 * (2.0 - eps))
    }

    /// `∫_σ^∞ dt t^{-2} h(t)` with `s = log σ`.
    pub fn h2_log(&self, s: f64) -> f64 {
        (-(1.0 + self.gamma) * s).exp() * self.h2_factor(s) / self.gamma
    }

    /// `∫_{s0}^∞ e^{-rate s} (G/gamma)^g_pow [K/gamma] ds`.
    fn tail(&self, rate: f64, s0: f64, g_pow: usize, with_k: bool) -> f64 {
        let gamma = self.gamma;
        let eps = self.eps();
        if eps >= EXACT_TAIL_MIN_EPS {
            // G = a + b e^{-eps s}, K = ka + kb e^{-eps s}
            let a = 1.0 / (eps * gamma);
            let b = (1.0 - 1.0 / eps) / gamma;
            let ka = 1.0 / (eps * (2.0 - eps) * gamma);
            let kb = (0.5 - 1.0 / (eps * (2.0 - eps)) + 0.5 / (2.0 - eps)) / gamma;
            let mut coef = vec![1.0];
            for _ in 0..g_pow {
                coef = poly_mul(&coef, &[a, b]);
            }
            if with_k {
                coef = poly_mul(&coef, &[ka, kb]);
            }
            coef.iter()
                .enumerate()
                .map(|(k, c)| {
                    let r = rate + k as f64 * eps;
                    c * (-r * s0).exp() / r
                })
                .sum()
        } else {
            let g = |s: f64| {
                let mut v = (self.tail_factor(s) / gamma).powi(g_pow as i32);
                if with_k {
                    v *= self.h2_factor(s) / gamma;
                }
                v
            };
            (-rate * s0).exp() * self.laguerre.integrate_exp_tail(rate, s0, g)
        }
    }

    fn s_cut(&self) -> f64 {
        self.t_cut.ln()
    }

    /// `∫_{s}^∞ dτ f(τ)` as quadrature up to `log t_cut` plus an exact tail.
    fn improper(
        &self,
        s: f64,
        f: impl FnMut(f64) -> f64,
        tail: impl FnOnce(f64) -> f64,
    ) -> Result<f64, QuadError> {
        let sc = self.s_cut();
        if s >= sc {
            return Ok(tail(s));
        }
        Ok(self.integrate(f, s, sc)? + tail(sc))
    }

    pub fn n_log(&self, m: usize, s: f64) -> Result<f64, QuadError> {
        if m == 0 {
            return Ok(self.h0_log(s));
        }
        self.integrate(|x| self.weight_log(x) * self.h_log(x).powi(m as i32), 0.0, s)
    }

    /// `∫_t^∞ dt1 t1^{-1-gamma} h^m(t1)`.
    fn q_plus_log(&self, m: usize, s: f64) -> Result<f64, QuadError> {
        let g = self.gamma;
        self.improper(
            s,
            |x| (-g * x).exp() * self.h_log(x).powi(m as i32),
            |x0| self.tail((m as f64 + 1.0) * g, x0, m, false),
        )
    }

    /// `∫_t^∞ dt1 t1^{-gamma} h^{m+1}(t1)`.
    fn p_plus_log(&self, m: usize, s: f64) -> Result<f64, QuadError> {
        let g = self.gamma;
        self.improper(
            s,
            |x| self.weight_log(x) * self.h_log(x).powi(m as i32 + 1),
            |x0| self.tail((m as f64 + 2.0) * g - 1.0, x0, m + 1, false),
        )
    }

    pub fn q_log(&self, m: usize, s: f64) -> Result<f64, QuadError> {
        if m == 0 {
            return Ok(self.h_log(s));
        }
        Ok((-s).exp() * self.n_log(m, s)? + self.q_plus_log(m, s)?)
    }

    fn p_quadrature_log(&self, m: usize, s: f64) -> Result<f64, QuadError> {
        Ok(self.h_log(s) * self.n_log(m, s)? + self.p_plus_log(m, s)?)
    }

    fn p0_closed_log(&self, s: f64) -> f64 {
        let g = self.gamma;
        self.h0_log(s) * (self.h_log(s) + (-g * s).exp() / g)
            + 2.0 / (g * (2.0 * g - 1.0)) * ((1.0 - 2.0 * g) * s).exp()
    }

    pub fn p_log(&self, m: usize, s: f64) -> Result<f64, EstError> {
        self.check_p_domain(m)?;
        let quadrature = self.p_quadrature_log(m, s)?;
        if m == 0 {
            let closed = self.p0_closed_log(s);
            if (closed - quadrature).abs() > 10.0 * self.quad_rel_tol * closed.abs() {
                return Err(EstError::Mismatch { closed, quadrature });
            }
            return Ok(closed);
        }
        Ok(quadrature)
    }

    pub fn r_log(&self, m: usize, s: f64) -> Result<f64, EstError> {
        self.check_p_domain(m)?;
        let g = self.gamma;
        let mi = m as i32;
        let mf = m as f64;
        // head part: ∫_1^∞ dt2 t2^{-gamma} h^m(t2) H2(t ∨ t2)
        let below = self.h2_log(s) * self.n_log(m, s)?;
        let above = self.improper(
            s,
            |x| self.weight_log(x) * self.h_log(x).powi(mi) * self.h2_log(x),
            |x0| self.tail((mf + 2.0) * g, x0, m, true),
        )?;
        // tail part: ∫_t^∞ dt1 t1^{-gamma} h^{m+1}(t1) (t^{-1} - t1^{-1})
        let inv_t = (-s).exp();
        let rate = (mf + 2.0) * g - 1.0;
        let tail_part = self.improper(
            s,
            |x| self.weight_log(x) * self.h_log(x).powi(mi + 1) * inv_t * -(-(x - s)).exp_m1(),
            |x0| inv_t * self.tail(rate, x0, m + 1, false) - self.tail(rate + 1.0, x0, m + 1, false),
        )?;
        let r = below + above + tail_part;
        let bound = self.c_m(m) * self.h_log(s) * self.q_log(m, s)?;
        if r > bound + 1e-9 {
            return Err(EstError::BoundViolated { lhs: r, rhs: bound });
        }
        Ok(r)
    }

    /// Constant of the bound `R_m <= C_m h Q_m`.
    pub fn c_m(&self, m: usize) -> f64 {
        let g = self.gamma;
        (2.0 * m as f64 + 3.0) * g / ((m as f64 + 2.0) * g - 1.0)
    }

    pub fn eval_h0(&self, t: f64) -> Result<f64, EstError> {
        Ok(self.h0_log(Self::check_t(t)?))
    }

    pub fn eval_h(&self, t: f64) -> Result<f64, EstError> {
        Ok(self.h_log(Self::check_t(t)?))
    }

    pub fn eval_n(&self, m: usize, t: f64) -> Result<f64, EstError> {
        Ok(self.n_log(m, Self::check_t(t)?)?)
    }

    pub fn eval_q(&self, m: usize, t: f64) -> Result<f64, EstError> {
        Ok(self.q_log(m, Self::check_t(t)?)?)
    }

    pub fn eval_p(&self, m: usize, t: f64) -> Result<f64, EstError> {
        self.p_log(m, Self::check_t(t)?)
    }

    /// P_m by quadrature alone, without the closed-form shortcut at m = 0.
    pub fn eval_p_quadrature(&self, m: usize, t: f64) -> Result<f64, EstError> {
        let s = Self::check_t(t)?;
        self.check_p_domain(m)?;
        Ok(self.p_quadrature_log(m, s)?)
    }

    /// The closed form of P_0.
    pub fn eval_p0_closed(&self, t: f64) -> Result<f64, EstError> {
        let s = Self::check_t(t)?;
        self.check_p_domain(0)?;
        Ok(self.p0_closed_log(s))
    }

    pub fn eval_r(&self, m: usize, t: f64) -> Result<f64, EstError> {
        self.r_log(m, Self::check_t(t)?)
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn eval_h0(ctx: &EstContext, t: f64) -> Result<f64, EstError> {
    ctx.eval_h0(t)
}

pub fn eval_h(ctx: &EstContext, t: f64) -> Result<f64, EstError> {
    ctx.eval_h(t)
}

pub fn eval_n(ctx: &EstContext, m: usize, t: f64) -> Result<f64, EstError> {
    ctx.eval_n(m, t)
}

pub fn eval_q(ctx: &EstContext, m: usize, t: f64) -> Result<f64, EstError> {
    ctx.eval_q(m, t)
}

pub fn eval_p(ctx: &EstContext, m: usize, t: f64) -> Result<f64, EstError> {
    ctx.eval_p(m, t)
}

pub fn eval_r(ctx: &EstContext, m: usize, t: f64) -> Result<f64, EstError> {
    ctx.eval_r(m, t)
}

pub use crate::identities::{verify_identities, CheckKind, IdentityCheck, IdentityReport};
