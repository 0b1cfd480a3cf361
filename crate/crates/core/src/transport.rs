//! Linear transport equations with data at infinity:
//! `∂_t V = (2t²)^{-1}(2∇Φ·∇ + ΔΦ)V` and `∂_t χ = t^{-2}∇Φ·∇χ`.

use thiserror::Error;

use crate::estfun::{h_general, EstContext, EstError};
use crate::grid::{Grid, GridError, PhaseField, ProfileField};
use crate::hierarchy::Hierarchy;
use crate::timegrid::{power_law_tail_between, FieldLike, PhaseTrajectory, ProfileTrajectory, RateSeries, TimeError, TimeGrid, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Est(#[from] EstError),
    #[error("step rejected near t = {t}: local error estimate {estimate:e} exceeds {tol:e}")]
    StepRejected { t: f64, estimate: f64, tol: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    /// RK4 steps per node interval.
    pub substeps: usize,
    /// Add the power-law tail `-∫_{t_max}^∞` of the first-order source to the
    /// data at `t_max`.
    pub tail_correction: bool,
    /// Relative local error tolerance checked by step doubling.
    pub error_tol: Option<f64>,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { substeps: 1, tail_correction: true, error_tol: None }
    }
}

/// Classical RK4 from `tau_a` to `tau_b` in `steps` equal steps.
pub fn rk4<F, R>(state: &F, tau_a: f64, tau_b: f64, steps: usize, rhs: &mut R) -> Result<F, TimeError>
where
    F: FieldLike,
    R: FnMut(f64, &F) -> Result<F, TimeError>,
{
    let h = (tau_b - tau_a) / steps as f64;
    let mut y = state.clone();
    for s in 0..steps {
        let tau = tau_a + s as f64 * h;
        let k1 = rhs(tau, &y)?;
        let mut y2 = y.clone();
        y2.add_scaled(0.5 * h, &k1);
        let k2 = rhs(tau + 0.5 * h, &y2)?;
        let mut y3 = y.clone();
        y3.add_scaled(0.5 * h, &k2);
        let k3 = rhs(tau + 0.5 * h, &y3)?;
        let mut y4 = y.clone();
        y4.add_scaled(h, &k3);
        let k4 = rhs(tau + h, &y4)?;
        y.add_scaled(h / 6.0, &k1);
        y.add_scaled(h / 3.0, &k2);
        y.add_scaled(h / 3.0, &k3);
        y.add_scaled(h / 6.0, &k4);
    }
    Ok(y)
}

/// Integrates `dF/dτ = rhs(τ, F)` backward over every node of `tg` from the
/// data at its last node.
fn integrate_backward<F, R>(tg: &TimeGrid, data: F, cfg: &TransportConfig, mut rhs: R) -> Result<Trajectory<F>, TransportError>
where
    F: FieldLike,
    R: FnMut(f64, &F) -> Result<F, TimeError>,
{
    let n = tg.len();
    let mut out = vec![data.clone(); n];
    let mut y = data;
    for j in (0..n - 1).rev() {
        let (ta, tb) = (tg.tau(j + 1), tg.tau(j));
        let next = rk4(&y, ta, tb, cfg.substeps, &mut rhs)?;
        if let Some(tol) = cfg.error_tol {
            let fine = rk4(&y, ta, tb, 2 * cfg.substeps, &mut rhs)?;
            let mut d = fine.clone();
            d.add_scaled(-1.0, &next);
            let estimate = d.raw_norm() / fine.raw_norm().max(f64::MIN_POSITIVE);
            if estimate > tol {
                return Err(TransportError::StepRejected { t: tg.t(j), estimate, tol });
            }
            y = fine;
        } else {
            y = next;
        }
        out[j] = y.clone();
    }
    Ok(Trajectory::new(tg.clone(), out))
}

fn check_cover(phi: &PhaseTrajectory, tg: &TimeGrid) -> Result<(), TransportError> {
    let (lo, hi) = (phi.grid.t_min(), phi.grid.t_max());
    if tg.t_min() < lo * (1.0 - 1e-12) || tg.t_max() > hi * (1.0 + 1e-12) {
        return Err(TimeError::OutOfRange { t: if tg.t_min() < lo { tg.t_min() } else { tg.t_max() }, t_min: lo, t_max: hi }.into());
    }
    Ok(())
}

/// Time one decade before `t_max`, clamped to the coefficient's span.
fn tail_fit_start(phi: &PhaseTrajectory, t_max: f64) -> f64 {
    (t_max / 10.0).max(phi.grid.t_min())
}

/// `V` on `tg` with `V(t_max) = w₊` (plus the tail correction when enabled).
pub fn solve_v(
    grid: &Grid,
    w_plus: &ProfileField,
    phi: &PhaseTrajectory,
    tg: &TimeGrid,
    cfg: &TransportConfig,
) -> Result<ProfileTrajectory, TransportError> {
    grid.check_len(w_plus.values.len())?;
    check_cover(phi, tg)?;
    let source = |t: f64, v: &ProfileField| -> Result<ProfileField, TimeError> {
        let d = grid.phase_derivs(&phi.at(t)?);
        Ok(grid.transport_apply(&d, v).scaled(0.5 / t))
    };
    let t_max = tg.t_max();
    let mut data = w_plus.clone();
    if cfg.tail_correction {
        let t_a = tail_fit_start(phi, t_max);
        let f_end = source(t_max, w_plus)?;
        let f_start = source(t_a, w_plus)?;
        let tail = power_law_tail_between(&f_start, &f_end, (t_max / t_a).ln())?;
        data.add_scaled(-1.0, &tail);
    }
    integrate_backward(tg, data, cfg, |tau, v| source(tau.exp(), v))
}

/// `V` on `tg` for the hierarchy's `w₊`, driven by `Φ_{p-1}`, with data at
/// `t_max` equal to `W_p(t_max)` minus the tail of the residual source
/// `(2t)^{-1}[T(Φ_{p-1}, W_p) - Σ_{m<p} Σ_{i≤m} T(φ_i, w_{m-i})]`, where
/// `T(φ, w) = 2∇φ·∇w + Δφ w`.
pub fn solve_v_from_hierarchy(grid: &Grid, h: &Hierarchy, tg: &TimeGrid, cfg: &TransportConfig) -> Result<ProfileTrajectory, TransportError> {
    let p = h.p;
    let phi = h.big_phi_trajectory(p as isize - 1);
    check_cover(&phi, tg)?;
    let source = |t: f64, v: &ProfileField| -> Result<ProfileField, TimeError> {
        let d = grid.phase_derivs(&phi.at(t)?);
        Ok(grid.transport_apply(&d, v).scaled(0.5 / t))
    };
    let residual = |t: f64| -> Result<ProfileField, TransportError> {
        let mut acc = vec![num_complex::Complex64::new(0.0, 0.0); grid.len()];
        let big = grid.phase_derivs(&phi.at(t)?);
        grid.transport_accumulate(&big, &h.big_w_at(p, t)?, &mut acc);
        let phases = (0..p).map(|i| h.phases[i].at(t)).collect::<Result<Vec<_>, _>>()?;
        let amps = (0..p).map(|m| if m == 0 { Ok(h.w_plus.clone()) } else { h.amplitudes[m - 1].at(t) }).collect::<Result<Vec<_>, _>>()?;
        let mut sub = vec![num_complex::Complex64::new(0.0, 0.0); grid.len()];
        for m in 0..p {
            for i in 0..=m {
                grid.transport_accumulate(&grid.phase_derivs(&phases[i]), &amps[m - i], &mut sub);
            }
        }
        for (a, b) in acc.iter_mut().zip(&sub) {
            *a -= b;
        }
        Ok(grid.project(&ProfileField { values: acc }).scaled(0.5 / t))
    };
    let t_max = tg.t_max();
    let mut data = h.big_w_at(p, t_max)?;
    if cfg.tail_correction && p > 0 {
        let t_a = tail_fit_start(&phi, t_max);
        let tail = power_law_tail_between(&residual(t_a)?, &residual(t_max)?, (t_max / t_a).ln())?;
        data.add_scaled(-1.0, &tail);
    }
    integrate_backward(tg, data, cfg, |tau, v| source(tau.exp(), v))
}

/// `χ` on `tg` with `χ(t_max) = ψ₊` (plus the tail correction when enabled).
pub fn solve_chi(
    grid: &Grid,
    psi_plus: &PhaseField,
    phi: &PhaseTrajectory,
    tg: &TimeGrid,
    cfg: &TransportConfig,
) -> Result<PhaseTrajectory, TransportError> {
    grid.check_len(psi_plus.values.len())?;
    check_cover(phi, tg)?;
    let source = |t: f64, chi: &PhaseField| -> Result<PhaseField, TimeError> {
        let d = grid.phase_derivs(&phi.at(t)?);
        Ok(grid.grad_dot(&d, &grid.phase_derivs(chi)).scaled(1.0 / t))
    };
    let t_max = tg.t_max();
    let mut data = psi_plus.clone();
    if cfg.tail_correction {
        let t_a = tail_fit_start(phi, t_max);
        let f_end = source(t_max, psi_plus)?;
        let f_start = source(t_a, psi_plus)?;
        let tail = power_law_tail_between(&f_start, &f_end, (t_max / t_a).ln())?;
        data.add_scaled(-1.0, &tail);
    }
    integrate_backward(tg, data, cfg, |tau, c| source(tau.exp(), c))
}

/// `|V(t) - w₊|_{k-1} / h(t)` over the nodes of `v`.
pub fn v_vs_wplus(grid: &Grid, v: &ProfileTrajectory, w_plus: &ProfileField, k: usize, gamma: f64) -> Result<RateSeries, TransportError> {
    let mut s = RateSeries::new("V-w+");
    for (j, f) in v.fields.iter().enumerate() {
        let t = v.grid.t(j);
        s.push(t, grid.hk_norm(&f.sub(w_plus), k.saturating_sub(1))?, h_general(gamma, t));
    }
    Ok(s)
}

/// `|χ(t) - ψ₊|_{ℓ-1} / h(t)` over the nodes of `chi`.
pub fn chi_vs_psiplus(grid: &Grid, chi: &PhaseTrajectory, psi_plus: &PhaseField, ell: usize, gamma: f64) -> Result<RateSeries, TransportError> {
    let mut s = RateSeries::new("chi-psi+");
    for (j, f) in chi.fields.iter().enumerate() {
        let t = chi.grid.t(j);
        s.push(t, grid.yl_norm(&f.sub(psi_plus), ell as isize - 1)?, h_general(gamma, t));
    }
    Ok(s)
}

/// `|V(t) - W_p(t)|_k / Q_p(t)` over the nodes of `v`.
pub fn compare_v_wp(grid: &Grid, v: &ProfileTrajectory, h: &Hierarchy, k: usize) -> Result<RateSeries, TransportError> {
    let est = EstContext::new(h.gamma)?;
    let mut s = RateSeries::new("V-Wp");
    for (j, f) in v.fields.iter().enumerate() {
        let t = v.grid.t(j);
        let wp = h.big_w_at(h.p, t)?;
        s.push(t, grid.hk_norm(&f.sub(&wp), k)?, est.eval_q(h.p, t)?);
    }
    Ok(s)
}

/// Largest `‖V e^{-iχ} - V' e^{-iχ'}‖₂` over the nodes, where `(V', χ')`
/// start from the gauge partner `(w₊ e^{-iψ₊}, 0)` of `(w₊, ψ₊)`.
pub fn gauge_check_transport(
    grid: &Grid,
    w_plus: &ProfileField,
    psi_plus: &PhaseField,
    phi: &PhaseTrajectory,
    tg: &TimeGrid,
    cfg: &TransportConfig,
) -> Result<f64, TransportError> {
    let v = solve_v(grid, w_plus, phi, tg, cfg)?;
    let chi = solve_chi(grid, psi_plus, phi, tg, cfg)?;
    let partner = w_plus.rotated(psi_plus, -1.0);
    let v2 = solve_v(grid, &partner, phi, tg, cfg)?;
    let chi2 = solve_chi(grid, &PhaseField::zeros(grid.len()), phi, tg, cfg)?;
    let mut worst: f64 = 0.0;
    for j in 0..tg.len() {
        let a = v.fields[j].rotated(&chi.fields[j], -1.0);
        let b = v2.fields[j].rotated(&chi2.fields[j], -1.0);
        worst = worst.max(grid.l2(&a.sub(&b)));
    }
    Ok(worst)
}

/// Largest relative change of `‖V(t)‖₂` along the trajectory.
pub fn l2_drift(grid: &Grid, v: &ProfileTrajectory) -> f64 {
    let n0 = grid.l2(v.fields.last().expect("nonempty trajectory"));
    v.fields.iter().map(|f| (grid.l2(f) - n0).abs() / n0.max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}

/// Compares `V` from data at `t_max` with `V` from data at the node nearest
/// `t_max / 2`: returns the largest `‖V₁ - V₂‖₂` on their common nodes
/// divided by `h` at the smaller horizon.
pub fn richardson_check(
    grid: &Grid,
    w_plus: &ProfileField,
    phi: &PhaseTrajectory,
    tg: &TimeGrid,
    cfg: &TransportConfig,
) -> Result<f64, TransportError> {
    let half = tg.t(tg.nearest(tg.t_max() / 2.0));
    let short = tg.restrict(tg.t_min(), half)?;
    let a = solve_v(grid, w_plus, phi, tg, cfg)?;
    let b = solve_v(grid, w_plus, phi, &short, cfg)?;
    let mut worst: f64 = 0.0;
    for (j, f) in b.fields.iter().enumerate() {
        let t = short.t(j);
        worst = worst.max(grid.l2(&a.at(t)?.sub(f)));
    }
    Ok(worst / h_general(grid.params().gamma, short.t_max()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ModelParams;
    use crate::hierarchy::solve_hierarchy;

    fn setup() -> (Grid, ProfileField, PhaseField, Hierarchy) {
        let grid = Grid::new(ModelParams::default()).unwrap();
        let w = grid.random_band_limited(3, 2, 1.0, 2).unwrap();
        let psi = grid.random_band_limited_real(4, 2, 0.1, 2).unwrap();
        let time = TimeGrid::decades(1.0, 1e4, 16).unwrap();
        let h = solve_hierarchy(&grid, &w, 1, &time).unwrap();
        (grid, w, psi, h)
    }

    #[test]
    fn zero_coefficient_keeps_data() {
        let (grid, w, psi, h) = setup();
        let zero = Trajectory::constant(h.time.clone(), PhaseField::zeros(grid.len()));
        let cfg = TransportConfig::default();
        let v = solve_v(&grid, &w, &zero, &h.time, &cfg).unwrap();
        assert!(v.fields.iter().all(|f| f == &w));
        let chi = solve_chi(&grid, &psi, &zero, &h.time, &cfg).unwrap();
        assert!(chi.fields.iter().all(|f| f == &psi));
    }

    #[test]
    fn chi_trivial_cases() {
        let (grid, _, _, h) = setup();
        let phi = h.big_phi_trajectory(0);
        let cfg = TransportConfig::default();
        let zero = solve_chi(&grid, &PhaseField::zeros(grid.len()), &phi, &h.time, &cfg).unwrap();
        assert!(zero.fields.iter().all(|f| f.max_abs() == 0.0));
        let c = PhaseField::constant(grid.len(), 0.7);
        let out = solve_chi(&grid, &c, &phi, &h.time, &cfg).unwrap();
        for f in &out.fields {
            assert!(f.sub(&c).max_abs() < 1e-14);
        }
    }

    #[test]
    fn v_is_linear_in_data() {
        let (grid, w, _, h) = setup();
        let other = grid.random_band_limited(9, 2, 1.0, 2).unwrap();
        let phi = h.big_phi_trajectory(0);
        let cfg = TransportConfig::default();
        let a = solve_v(&grid, &w, &phi, &h.time, &cfg).unwrap();
        let b = solve_v(&grid, &other, &phi, &h.time, &cfg).unwrap();
        let c = solve_v(&grid, &w.scaled(2.0).axpy(-3.0, &other), &phi, &h.time, &cfg).unwrap();
        for j in [0, 10, 40] {
            let lin = a.fields[j].scaled(2.0).axpy(-3.0, &b.fields[j]);
            assert!(c.fields[j].sub(&lin).max_abs() <= 1e-10 * lin.max_abs());
        }
    }

    #[test]
    fn first_order_v_matches_first_amplitude() {
        let (grid, w, _, h) = setup();
        let phi = h.big_phi_trajectory(0);
        let v = solve_v(&grid, &w, &phi, &h.time, &TransportConfig::default()).unwrap();
        for t in [1.0, 10.0, 100.0] {
            let j = h.time.index_of(t).unwrap();
            let w1 = h.w(1, j);
            let d = grid.l2(&v.fields[j].sub(&w).sub(w1));
            assert!(d < 1e-3 * grid.l2(w1), "t={t}: {d} vs {}", grid.l2(w1));
        }
    }

    #[test]
    fn l2_is_nearly_conserved() {
        let (grid, w, _, h) = setup();
        let phi = h.big_phi_trajectory(0);
        let v = solve_v(&grid, &w, &phi, &h.time, &TransportConfig::default()).unwrap();
        assert!(l2_drift(&grid, &v) < 1e-6);
    }

    #[test]
    fn gauge_trivial_cases() {
        let (grid, w, _, h) = setup();
        let phi = h.big_phi_trajectory(0);
        let cfg = TransportConfig::default();
        let zero = PhaseField::zeros(grid.len());
        assert_eq!(gauge_check_transport(&grid, &w, &zero, &phi, &h.time, &cfg).unwrap(), 0.0);
        let c = PhaseField::constant(grid.len(), 0.4);
        assert!(gauge_check_transport(&grid, &w, &c, &phi, &h.time, &cfg).unwrap() < 1e-10);
    }

    #[test]
    fn step_rejection_reports_time() {
        let (grid, w, _, h) = setup();
        let phi = h.big_phi_trajectory(0);
        let cfg = TransportConfig { error_tol: Some(1e-300), ..TransportConfig::default() };
        assert!(matches!(solve_v(&grid, &w, &phi, &h.time, &cfg), Err(TransportError::StepRejected { .. })));
    }
}
