//! The `u`-level layer: reconstruction `u = M D e^{-iφ} w`, the independent
//! single-field profile solver, gauge comparisons and asymptotic error
//! proxies.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::auxsys::{omega0, prepare, AsymptoticData, AuxConfig, AuxError, AuxTrajectory, WaveOpResult};
use crate::estfun::{h0_general, h_general, EstContext, EstError};
use crate::grid::{Grid, GridError, PhaseField, ProfileField};
use crate::timegrid::{FieldLike, ProfileTrajectory, TimeError, TimeGrid, Trajectory};
use crate::transport::TransportConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatterError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Est(#[from] EstError),
    #[error(transparent)]
    Aux(#[from] AuxError),
    #[error("invalid exponent r = {r}: need 0 <= n/2 - n/r <= min(k, n/2)")]
    InvalidExponent { r: f64 },
    #[error("trajectories are not gauge equivalent: metric {metric:e} exceeds {tol:e}")]
    NotGaugeEquivalent { metric: f64, tol: f64 },
    #[error("step rejected near t = {t}: local error estimate {estimate:e} exceeds {tol:e}")]
    StepRejected { t: f64, estimate: f64, tol: f64 },
}

/// `u(t, ·)` sampled at the moving points `x = t y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSample {
    pub t: f64,
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Complex64>,
    /// Volume of one moving cell, `t^n` times the profile cell.
    pub cell_volume: f64,
}

impl PhysicalSample {
    /// `L^r` norm over the moving grid, `r = ∞` allowed.
    pub fn lr(&self, r: f64) -> f64 {
        if r.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        (self.cell_volume * self.values.iter().map(|v| v.norm().powf(r)).sum::<f64>()).powf(1.0 / r)
    }

    pub fn l2(&self) -> f64 {
        self.lr(2.0)
    }
}

/// `u(t, t y) = (it)^{-n/2} e^{i t |y|²/2} e^{-iφ(y)} w(y)` at the centred grid
/// points `y`.
pub fn lambda_map(grid: &Grid, w: &ProfileField, phi: &PhaseField, t: f64) -> Result<PhysicalSample, GridError> {
    grid.check_len(phi.values.len())?;
    modulate(grid, &w.rotated(phi, -1.0), t)
}

/// `(it)^{-n/2} e^{i t |y|²/2} f(y)` at the moving points `x = t y`.
pub fn modulate(grid: &Grid, f: &ProfileField, t: f64) -> Result<PhysicalSample, GridError> {
    grid.check_len(f.values.len())?;
    let n = grid.n();
    let pre = Complex64::from_polar(t.powf(-(n as f64) / 2.0), -std::f64::consts::FRAC_PI_4 * n as f64);
    let mut points = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let y = grid.centred_point(idx);
        let y2: f64 = y.iter().map(|v| v * v).sum();
        values.push(pre * Complex64::from_polar(1.0, 0.5 * t * y2) * f.values[idx]);
        points.push(y.iter().map(|v| t * v).collect());
    }
    Ok(PhysicalSample { t, n, points, values, cell_volume: t.powi(n as i32) * grid.cell_volume() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectConfig {
    /// Strang steps per node interval.
    pub substeps: usize,
    /// Relative local error tolerance checked by step doubling.
    pub error_tol: Option<f64>,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self { substeps: 1, error_tol: None }
    }
}

/// Strang steps of `i∂_tψ = -(2t²)^{-1}Δψ + t^{-γ} g0(ψ, ψ) ψ` in log time.
/// The nonlinear substep is the exact rotation `e^{-i g0(ψ,ψ) (h₀(t_b) - h₀(t_a))}`.
fn direct_steps(grid: &Grid, psi: &ProfileField, tau_a: f64, tau_b: f64, steps: usize) -> Result<ProfileField, GridError> {
    let gamma = grid.params().gamma;
    let h = (tau_b - tau_a) / steps as f64;
    let mut y = psi.clone();
    for i in 0..steps {
        let ta = tau_a + i as f64 * h;
        let tb = ta + h;
        let tm = 0.5 * (ta + tb);
        y = grid.free_flow(&y, ta.exp(), tm.exp());
        let g = grid.g0(&y, &y)?;
        y = y.rotated(&g, -(h0_general(gamma, tb.exp()) - h0_general(gamma, ta.exp())));
        y = grid.free_flow(&y, tm.exp(), tb.exp());
    }
    Ok(y)
}

/// Evolves `ψ(t₀) = psi0` over every node of `tg` in both directions.
pub fn direct_profile_solve(grid: &Grid, psi0: &ProfileField, t0: f64, tg: &TimeGrid, cfg: &DirectConfig) -> Result<ProfileTrajectory, ScatterError> {
    grid.check_len(psi0.values.len())?;
    let j0 = tg.index_of(t0)?;
    let mut fields = vec![psi0.clone(); tg.len()];
    let step = |y: &ProfileField, a: usize, b: usize| -> Result<ProfileField, ScatterError> {
        let (ta, tb) = (tg.tau(a), tg.tau(b));
        let coarse = direct_steps(grid, y, ta, tb, cfg.substeps)?;
        match cfg.error_tol {
            None => Ok(coarse),
            Some(tol) => {
                let fine = direct_steps(grid, y, ta, tb, 2 * cfg.substeps)?;
                let estimate = fine.sub(&coarse).raw_norm() / fine.raw_norm().max(f64::MIN_POSITIVE);
                if estimate > tol {
                    return Err(ScatterError::StepRejected { t: tg.t(b), estimate, tol });
                }
                Ok(fine)
            }
        }
    };
    let mut y = psi0.clone();
    for j in j0 + 1..tg.len() {
        y = step(&y, j - 1, j)?;
        fields[j] = y.clone();
    }
    let mut y = psi0.clone();
    for j in (0..j0).rev() {
        y = step(&y, j + 1, j)?;
        fields[j] = y.clone();
    }
    Ok(Trajectory::new(tg.clone(), fields))
}

/// `‖w e^{-iφ} - w₂ e^{-iφ₂}‖₂`.
pub fn gauge_equiv(grid: &Grid, w: &ProfileField, phi: &PhaseField, w2: &ProfileField, phi2: &PhaseField) -> Result<f64, GridError> {
    for f in [w.values.len(), phi.values.len(), w2.values.len(), phi2.values.len()] {
        grid.check_len(f)?;
    }
    let d: Vec<f64> = (0..grid.len())
        .map(|i| {
            let a = w.values[i] * Complex64::from_polar(1.0, -phi.values[i]);
            let b = w2.values[i] * Complex64::from_polar(1.0, -phi2.values[i]);
            (a - b).norm_sqr()
        })
        .collect();
    Ok((grid.cell_volume() * d.iter().sum::<f64>()).sqrt())
}

/// Threshold of the gauge-equivalence predicate.
pub const GAUGE_TOL: f64 = 1e-6;

pub fn gauge_equivalent(grid: &Grid, w: &ProfileField, phi: &PhaseField, w2: &ProfileField, phi2: &PhaseField) -> Result<bool, GridError> {
    Ok(gauge_equiv(grid, w, phi, w2, phi2)? <= GAUGE_TOL)
}

/// Gauge metric at every node common to both trajectories, as `(t, metric)`.
pub fn gauge_distance_series(grid: &Grid, a: &AuxTrajectory, b: &AuxTrajectory) -> Result<Vec<(f64, f64)>, ScatterError> {
    let mut out = Vec::new();
    for j in 0..a.grid().len() {
        let t = a.grid().t(j);
        if let Ok(k) = b.grid().index_of(t) {
            out.push((t, gauge_equiv(grid, &a.w.fields[j], &a.phi.fields[j], &b.w.fields[k], &b.phi.fields[k])?));
        }
    }
    Ok(out)
}

/// The wave operator at the level of profiles: `omega0(w₊, 0)`.
#[allow(clippy::too_many_arguments)]
pub fn omega(
    grid: &Grid,
    w_plus: &ProfileField,
    p: usize,
    hier_time: &TimeGrid,
    tg: &TimeGrid,
    t0_sequence: &[f64],
    tcfg: &TransportConfig,
    cfg: &AuxConfig,
) -> Result<(AsymptoticData, WaveOpResult), ScatterError> {
    let zero = PhaseField::zeros(grid.len());
    let data = prepare(grid, w_plus, &zero, p, hier_time, tg, tcfg, false)?;
    let res = omega0(grid, &data, t0_sequence, cfg)?;
    Ok((data, res))
}

/// `δ(r) = n/2 - n/r`, checked against `0 <= δ <= min(k, n/2)` (strict when
/// `k = n/2`).
pub fn delta_r(r: f64, n: usize, k: usize) -> Result<f64, ScatterError> {
    let half = n as f64 / 2.0;
    let d = if r.is_infinite() { half } else { half - n as f64 / r };
    let cap = (k as f64).min(half);
    let strict = (k as f64 - half).abs() < 1e-15;
    if r.is_nan() || r < 1.0 || d < -1e-15 || d > cap + 1e-15 || (strict && d >= half - 1e-15) {
        return Err(ScatterError::InvalidExponent { r });
    }
    Ok(d.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub t: f64,
    /// `|e^{i(Φ_p - φ)} w - w_target|_k`.
    pub e_k: f64,
    /// `‖e^{i(Φ_p - φ)} w - w_target‖₂`.
    pub e_0: f64,
    pub p_p: f64,
    /// `(r, t^{δ(r)} ‖u - e^{-iΦ_p} M D w_target‖_r / P_p)` per requested `r`.
    pub lr: Vec<(f64, f64)>,
}

impl ErrorRow {
    pub fn ratio(&self) -> f64 {
        if self.e_k == 0.0 {
            0.0
        } else {
            self.e_k / self.p_p
        }
    }
}

/// Error proxies along a trajectory against the target `w₊ e^{-iψ₊}`.
pub fn asymptotic_error_report(grid: &Grid, data: &AsymptoticData, traj: &AuxTrajectory, r_list: &[f64]) -> Result<Vec<ErrorRow>, ScatterError> {
    let k = grid.params().k;
    let deltas = r_list.iter().map(|&r| delta_r(r, grid.n(), k)).collect::<Result<Vec<_>, _>>()?;
    let est = EstContext::new(data.gamma)?;
    let target = data.w_plus.rotated(&data.psi_plus, -1.0);
    (0..traj.grid().len())
        .into_par_iter()
        .map(|j| {
            let t = traj.grid().t(j);
            let jd = data.tg.index_of(t)?;
            let big_phi = &data.big_phi.fields[jd];
            let w = &traj.w.fields[j];
            let phi = &traj.phi.fields[j];
            let diff = w.rotated(&big_phi.sub(phi), 1.0).sub(&target);
            let p_p = est.eval_p(data.p, t)?;
            // u - u_ref = M D (e^{-iΦ_p} diff), mapped directly to avoid cancellation
            let gap = modulate(grid, &diff.rotated(big_phi, -1.0), t)?;
            let lr = r_list.iter().zip(&deltas).map(|(&r, &d)| (r, t.powf(d) * gap.lr(r) / p_p)).collect();
            Ok(ErrorRow { t, e_k: grid.hk_norm(&diff, k)?, e_0: grid.l2(&diff), p_p, lr })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: PhaseField,
    /// `sup` over the last decade of `|(φ₂ - φ)(t) - σ|_{ℓ-2} / h(t)`.
    pub residual: f64,
    /// `‖w₂(t_max) - w(t_max) e^{iσ}‖₂`.
    pub amplitude_mismatch: f64,
    /// Largest gauge metric over common nodes.
    pub metric: f64,
}

/// Tolerance of the gauge-equivalence precondition of [`sigma_extract`].
pub const SIGMA_GAUGE_TOL: f64 = 1e-5;

/// Phase shift between two gauge-equivalent trajectories on the same grid.
pub fn sigma_extract(grid: &Grid, a: &AuxTrajectory, b: &AuxTrajectory) -> Result<SigmaEstimate, ScatterError> {
    let series = gauge_distance_series(grid, a, b)?;
    let metric = series.iter().map(|(_, m)| *m).fold(0.0, f64::max);
    if series.is_empty() || metric > SIGMA_GAUGE_TOL {
        return Err(ScatterError::NotGaugeEquivalent { metric, tol: SIGMA_GAUGE_TOL });
    }
    let t_max = series.last().map(|(t, _)| *t).unwrap_or(0.0);
    let (ja, jb) = (a.grid().index_of(t_max)?, b.grid().index_of(t_max)?);
    let sigma = b.phi.fields[jb].sub(&a.phi.fields[ja]);
    let gamma = grid.params().gamma;
    let ell = grid.params().ell as isize;
    let mut residual: f64 = 0.0;
    for &(t, _) in series.iter().filter(|(t, _)| *t >= t_max / 10.0 * (1.0 - 1e-12)) {
        let d = b.phi.at_node(t)?.sub(a.phi.at_node(t)?).sub(&sigma);
        let r = grid.yl_norm(&d, ell - 2)?;
        if r > 0.0 {
            residual = residual.max(r / h_general(gamma, t));
        }
    }
    let amplitude_mismatch = grid.l2(&b.w.fields[jb].sub(&a.w.fields[ja].rotated(&sigma, 1.0)));
    Ok(SigmaEstimate { sigma, residual, amplitude_mismatch, metric })
}

/// `‖ψ_a - ψ_b‖₂` maximised over the nodes of `a`, where both are sampled on
/// the same grid.
pub fn max_l2_gap(grid: &Grid, a: &ProfileTrajectory, b: &ProfileTrajectory) -> Result<f64, ScatterError> {
    let mut worst: f64 = 0.0;
    for (j, f) in a.fields.iter().enumerate() {
        worst = worst.max(grid.l2(&f.sub(b.at_node(a.grid.t(j))?)));
    }
    Ok(worst)
}

/// Observed order `log2(|y_h - y_{h/2}| / |y_{h/2} - y_{h/4}|)` from three
/// runs at successively halved steps.
pub fn observed_order<F: FieldLike>(coarse: &F, mid: &F, fine: &F) -> f64 {
    let mut a = coarse.clone();
    a.add_scaled(-1.0, mid);
    let mut b = mid.clone();
    b.add_scaled(-1.0, fine);
    (a.raw_norm() / b.raw_norm()).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ModelParams;

    fn grid_with(lambda: f64) -> Grid {
        Grid::new(ModelParams { lambda, ..ModelParams::default() }).unwrap()
    }

    #[test]
    fn lambda_map_is_an_isometry() {
        let grid = grid_with(1.0);
        let w = grid.random_band_limited(3, 4, 1.3, 2).unwrap();
        let phi = grid.random_band_limited_real(4, 4, 2.0, 2).unwrap();
        for t in [1.0, 7.5, 1e3] {
            let u = lambda_map(&grid, &w, &phi, t).unwrap();
            assert!((u.l2() - grid.l2(&w)).abs() < 1e-12 * grid.l2(&w));
            for (idx, v) in u.values.iter().enumerate() {
                assert!((v.norm() - t.powf(-1.5) * w.values[idx].norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lambda_map_constant_phase_shift() {
        let grid = grid_with(1.0);
        let w = grid.random_band_limited(3, 4, 1.0, 2).unwrap();
        let phi = grid.random_band_limited_real(4, 4, 1.0, 2).unwrap();
        let u = lambda_map(&grid, &w, &phi, 3.0).unwrap();
        let v = lambda_map(&grid, &w, &phi.add(&PhaseField::constant(grid.len(), 0.3)), 3.0).unwrap();
        let rot = Complex64::from_polar(1.0, -0.3);
        for (a, b) in u.values.iter().zip(&v.values) {
            assert!((a * rot - b).norm() < 1e-14);
        }
    }

    #[test]
    fn lambda_map_phase_pattern_at_unit_time() {
        let grid = grid_with(1.0);
        let w = ProfileField { values: vec![Complex64::new(2.0, 0.0); grid.len()] };
        let u = lambda_map(&grid, &w, &PhaseField::zeros(grid.len()), 1.0).unwrap();
        for idx in [0, 17, 1000, 4095] {
            let y = grid.centred_point(idx);
            let x2: f64 = y.iter().map(|v| v * v).sum();
            let expected = Complex64::from_polar(2.0, 0.5 * x2 - 3.0 * std::f64::consts::FRAC_PI_4);
            assert!((u.values[idx] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_equiv_closed_forms() {
        let grid = grid_with(1.0);
        let w = grid.random_band_limited(1, 3, 1.0, 2).unwrap();
        let phi = grid.random_band_limited_real(2, 3, 1.0, 2).unwrap();
        let sigma = grid.random_band_limited_real(5, 3, 3.0, 2).unwrap();
        assert!(gauge_equiv(&grid, &w, &phi, &w.rotated(&sigma, 1.0), &phi.add(&sigma)).unwrap() < 1e-13);
        let two_pi = PhaseField::constant(grid.len(), 2.0 * std::f64::consts::PI);
        assert!(gauge_equiv(&grid, &w, &phi, &w, &phi.add(&two_pi)).unwrap() < 1e-13);
        let shifted = phi.add(&PhaseField::constant(grid.len(), 0.1));
        let expected = 2.0 * grid.l2(&w) * 0.05f64.sin();
        assert!((gauge_equiv(&grid, &w, &phi, &w, &shifted).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn direct_solver_linear_is_free_flow() {
        let grid = grid_with(0.0);
        let psi = grid.random_band_limited(9, 4, 1.0, 2).unwrap();
        let tg = TimeGrid::octaves(50.0, 5.0, 500.0, 8).unwrap();
        let traj = direct_profile_solve(&grid, &psi, 50.0, &tg, &DirectConfig::default()).unwrap();
        for (j, f) in traj.fields.iter().enumerate() {
            assert!(grid.l2(&f.sub(&grid.free_flow(&psi, 50.0, tg.t(j)))) < 1e-9);
        }
    }

    #[test]
    fn direct_solver_conserves_mass() {
        let grid = grid_with(20.0);
        let psi = grid.random_band_limited(9, 4, 1.0, 2).unwrap();
        let tg = TimeGrid::octaves(50.0, 1.0, 1000.0, 4).unwrap();
        let traj = direct_profile_solve(&grid, &psi, 50.0, &tg, &DirectConfig::default()).unwrap();
        let m = grid.l2(&psi);
        for f in &traj.fields {
            assert!((grid.l2(f) - m).abs() < 1e-10 * m);
        }
    }

    #[test]
    fn delta_r_limits() {
        assert_eq!(delta_r(2.0, 3, 2).unwrap(), 0.0);
        assert!((delta_r(6.0, 3, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((delta_r(f64::INFINITY, 3, 2).unwrap() - 1.5).abs() < 1e-15);
        assert!(delta_r(1.5, 3, 2).is_err());
        assert!(delta_r(f64::INFINITY, 4, 2).is_err());
        assert!(delta_r(6.0, 3, 0).is_err());
    }

    #[test]
    fn sigma_of_constant_shift_and_identity() {
        let grid = grid_with(1.0);
        let tg = TimeGrid::octaves(50.0, 5.0, 400.0, 4).unwrap();
        let w = grid.random_band_limited(1, 3, 1.0, 2).unwrap();
        let phi = grid.random_band_limited_real(2, 3, 1.0, 2).unwrap();
        let traj = AuxTrajectory {
            w: Trajectory::constant(tg.clone(), w.clone()),
            phi: Trajectory::new(tg.clone(), tg.nodes().iter().map(|t| phi.scaled(t.ln())).collect()),
        };
        let same = sigma_extract(&grid, &traj, &traj).unwrap();
        assert_eq!(same.sigma.max_abs(), 0.0);
        assert_eq!(same.residual, 0.0);
        let c = PhaseField::constant(grid.len(), 0.25);
        let shifted = AuxTrajectory {
            w: Trajectory::new(tg.clone(), traj.w.fields.iter().map(|f| f.rotated(&c, 1.0)).collect()),
            phi: Trajectory::new(tg.clone(), traj.phi.fields.iter().map(|f| f.add(&c)).collect()),
        };
        let s = sigma_extract(&grid, &traj, &shifted).unwrap();
        assert!(s.sigma.sub(&c).max_abs() < 1e-13);
        assert!(s.residual < 1e-12);
        assert!(s.amplitude_mismatch < 1e-13);
        let other = AuxTrajectory { w: traj.w.clone(), phi: shifted.phi.clone() };
        assert!(matches!(sigma_extract(&grid, &traj, &other), Err(ScatterError::NotGaugeEquivalent { .. })));
    }
}
