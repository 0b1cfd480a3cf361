//! Pseudospectral integrator for the auxiliary system in `(w, φ)`, local wave
//! operators with data at a finite `t₀`, and the `t₀ → ∞` limit.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::estfun::{h0_general, h_general, EstContext, EstError};
use crate::grid::{Grid, GridError, PhaseField, ProfileField};
use crate::hierarchy::{solve_hierarchy, Hierarchy, HierarchyError};
use crate::timegrid::{FieldLike, PhaseTrajectory, ProfileTrajectory, RateSeries, TimeError, TimeGrid, Trajectory};
use crate::transport::{rk4, solve_chi, solve_v_from_hierarchy, TransportConfig, TransportError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuxError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Est(#[from] EstError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("blow-up at t = {t}")]
    BlowUp { t: f64 },
    #[error("step rejected near t = {t}: local error estimate {estimate:e} exceeds {tol:e}")]
    StepRejected { t: f64, estimate: f64, tol: f64 },
    #[error("Cauchy property fails: difference grows from {first:e} to {last:e}")]
    CauchyFailure { first: f64, last: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub t: f64,
    pub w: ProfileField,
    pub phi: PhaseField,
}

/// `(w, φ)` as a single linear-space element for the explicit stepper.
#[derive(Debug, Clone, PartialEq)]
struct Pair {
    w: ProfileField,
    phi: PhaseField,
}

impl FieldLike for Pair {
    fn zeros_like(&self) -> Self {
        Pair { w: self.w.zeros_like(), phi: self.phi.zeros_like() }
    }

    fn add_scaled(&mut self, c: f64, other: &Self) {
        self.w.add_scaled(c, &other.w);
        self.phi.add_scaled(c, &other.phi);
    }

    fn raw_norm(&self) -> f64 {
        self.w.raw_norm().hypot(self.phi.raw_norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxConfig {
    /// Strang steps per node interval.
    pub substeps: usize,
    /// Relative local error tolerance checked by step doubling.
    pub error_tol: Option<f64>,
    /// Blow-up when `max|w|` exceeds this multiple of its initial value (or
    /// `max|φ|` this multiple of one plus its initial value).
    pub blowup_factor: f64,
}

impl Default for AuxConfig {
    fn default() -> Self {
        Self { substeps: 1, error_tol: None, blowup_factor: 1e6 }
    }
}

/// Sampled `(w, φ)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxTrajectory {
    pub w: ProfileTrajectory,
    pub phi: PhaseTrajectory,
}

impl AuxTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.w.grid
    }

    pub fn state(&self, j: usize) -> AuxState {
        AuxState { t: self.grid().t(j), w: self.w.fields[j].clone(), phi: self.phi.fields[j].clone() }
    }

    /// `e^{-iφ} w` at node `j`.
    pub fn psi(&self, j: usize) -> ProfileField {
        self.w.fields[j].rotated(&self.phi.fields[j], -1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxRun {
    pub traj: AuxTrajectory,
    /// First node at which blow-up was detected, if any.
    pub blowup: Option<f64>,
}

/// Log-time derivative of the non-dispersive part:
/// `w' = (2t)^{-1} P(2∇φ·∇ + Δφ)w`, `φ' = (2t)^{-1} P|∇φ|² + t^{1-γ} g0(w, w)`.
fn nonlinear_rhs(grid: &Grid, t: f64, s: &Pair) -> Result<Pair, GridError> {
    let d = grid.phase_derivs(&s.phi);
    let w = grid.transport_apply(&d, &s.w).scaled(0.5 / t);
    let g = grid.g0(&s.w, &s.w)?;
    let phi = grid.grad_dot(&d, &d).scaled(0.5 / t).axpy(t.powf(1.0 - grid.params().gamma), &g);
    Ok(Pair { w, phi })
}

fn strang(grid: &Grid, s: &Pair, tau_a: f64, tau_b: f64, steps: usize) -> Result<Pair, TimeError> {
    let h = (tau_b - tau_a) / steps as f64;
    let mut rhs = |tau: f64, p: &Pair| nonlinear_rhs(grid, tau.exp(), p).map_err(|e| TimeError::Invalid(e.to_string()));
    let mut y = s.clone();
    for i in 0..steps {
        let ta = tau_a + i as f64 * h;
        let tb = ta + h;
        let tm = 0.5 * (ta + tb);
        y.w = grid.free_flow(&y.w, ta.exp(), tm.exp());
        y = rk4(&y, ta, tb, 1, &mut rhs)?;
        y.w = grid.free_flow(&y.w, tm.exp(), tb.exp());
    }
    Ok(y)
}

/// One Strang-split step of the auxiliary system from `ta` to `tb` (either
/// order), split into `steps` equal steps in log time.
pub fn strang_step(grid: &Grid, state: &AuxState, tb: f64, steps: usize) -> Result<AuxState, AuxError> {
    let s = Pair { w: state.w.clone(), phi: state.phi.clone() };
    let out = strang(grid, &s, state.t.ln(), tb.ln(), steps.max(1))?;
    Ok(AuxState { t: tb, w: out.w, phi: out.phi })
}

fn blown_up(s: &Pair, w0: f64, phi0: f64, factor: f64) -> bool {
    !s.w.is_finite() || !s.phi.is_finite() || s.w.max_abs() > factor * w0 || s.phi.max_abs() > factor * (1.0 + phi0)
}

/// Integrates from `state0` (at a node of `tg`) to the end of `tg` in the
/// given direction. Backward runs stop at the first blown-up node and keep
/// the trajectory above it; forward blow-up is an error.
pub fn integrate(grid: &Grid, state0: &AuxState, tg: &TimeGrid, direction: Direction, cfg: &AuxConfig) -> Result<AuxRun, AuxError> {
    grid.check_len(state0.w.values.len())?;
    grid.check_len(state0.phi.values.len())?;
    let j0 = tg.index_of(state0.t)?;
    let w0 = state0.w.max_abs().max(f64::MIN_POSITIVE);
    let phi0 = state0.phi.max_abs();
    let mut y = Pair { w: state0.w.clone(), phi: state0.phi.clone() };
    let mut out = vec![y.clone()];
    let mut blowup = None;
    let targets: Vec<usize> = match direction {
        Direction::Forward => (j0 + 1..tg.len()).collect(),
        Direction::Backward => (0..j0).rev().collect(),
    };
    let mut prev = j0;
    for j in targets {
        let (ta, tb) = (tg.tau(prev), tg.tau(j));
        let next = strang(grid, &y, ta, tb, cfg.substeps)?;
        let next = if let Some(tol) = cfg.error_tol {
            let fine = strang(grid, &y, ta, tb, 2 * cfg.substeps)?;
            let mut d = fine.clone();
            d.add_scaled(-1.0, &next);
            let estimate = d.raw_norm() / fine.raw_norm().max(f64::MIN_POSITIVE);
            if estimate > tol && !blown_up(&fine, w0, phi0, cfg.blowup_factor) {
                return Err(AuxError::StepRejected { t: tg.t(j), estimate, tol });
            }
            fine
        } else {
            next
        };
        if blown_up(&next, w0, phi0, cfg.blowup_factor) {
            if direction == Direction::Forward {
                return Err(AuxError::BlowUp { t: tg.t(j) });
            }
            blowup = Some(tg.t(j));
            break;
        }
        y = next;
        out.push(y.clone());
        prev = j;
    }
    let (sub, fields) = match direction {
        Direction::Forward => (tg.slice(j0, prev), out),
        Direction::Backward => {
            out.reverse();
            (tg.slice(prev, j0), out)
        }
    };
    let (w, phi): (Vec<_>, Vec<_>) = fields.into_iter().map(|p| (p.w, p.phi)).unzip();
    Ok(AuxRun { traj: AuxTrajectory { w: Trajectory::new(sub.clone(), w), phi: Trajectory::new(sub, phi) }, blowup })
}

/// Largest relative change of `‖w‖₂` along a trajectory.
pub fn mass_drift(grid: &Grid, traj: &AuxTrajectory) -> f64 {
    let m0 = grid.l2(&traj.w.fields[0]);
    traj.w.fields.iter().map(|f| (grid.l2(f) - m0).abs() / m0.max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}

/// Everything derived from `(w₊, ψ₊)` that the local wave operators need:
/// the hierarchy, `V`, `χ`, and `W_p`, `Φ_p` sampled on the run grid.
#[derive(Debug, Clone)]
pub struct AsymptoticData {
    pub p: usize,
    pub gamma: f64,
    pub w_plus: ProfileField,
    pub psi_plus: PhaseField,
    pub hierarchy: Hierarchy,
    /// Run grid.
    pub tg: TimeGrid,
    pub v: ProfileTrajectory,
    pub chi: PhaseTrajectory,
    pub big_w: ProfileTrajectory,
    pub big_phi: PhaseTrajectory,
}

impl AsymptoticData {
    /// `(p + 2)γ > 1`.
    pub fn supercritical(&self) -> bool {
        (self.p as f64 + 2.0) * self.gamma > 1.0
    }
}

pub fn supercritical(p: usize, gamma: f64) -> bool {
    (p as f64 + 2.0) * gamma > 1.0
}

/// Builds the hierarchy on `hier_time` and the transport solutions on `tg`.
/// `allow_subcritical` lifts the `(p + 2)γ > 1` precondition.
pub fn prepare(
    grid: &Grid,
    w_plus: &ProfileField,
    psi_plus: &PhaseField,
    p: usize,
    hier_time: &TimeGrid,
    tg: &TimeGrid,
    tcfg: &TransportConfig,
    allow_subcritical: bool,
) -> Result<AsymptoticData, AuxError> {
    let gamma = grid.params().gamma;
    if !allow_subcritical && !supercritical(p, gamma) {
        return Err(AuxError::Precondition(format!("(p+2)gamma = {} must exceed 1", (p as f64 + 2.0) * gamma)));
    }
    grid.check_len(psi_plus.values.len())?;
    let h = solve_hierarchy(grid, w_plus, p, hier_time)?;
    let phi_lower = h.big_phi_trajectory(p as isize - 1);
    let v = solve_v_from_hierarchy(grid, &h, tg, tcfg)?;
    let chi = solve_chi(grid, psi_plus, &phi_lower, tg, tcfg)?;
    let nodes = tg.nodes();
    let big_w = nodes.iter().map(|&t| h.big_w_at(p, t)).collect::<Result<Vec<_>, _>>()?;
    let big_phi = nodes.iter().map(|&t| h.big_phi_at(p as isize, t)).collect::<Result<Vec<_>, _>>()?;
    Ok(AsymptoticData {
        p,
        gamma,
        w_plus: w_plus.clone(),
        psi_plus: psi_plus.clone(),
        hierarchy: h,
        tg: tg.clone(),
        v,
        chi,
        big_w: Trajectory::new(tg.clone(), big_w),
        big_phi: Trajectory::new(tg.clone(), big_phi),
    })
}

/// Solution with data `(V(t₀), Φ_p(t₀) + χ(t₀))` at `t₀`.
#[derive(Debug, Clone)]
pub struct LocalRun {
    pub t0: f64,
    /// Lowest time reached (the empirical `T`).
    pub t_lower: f64,
    pub traj: AuxTrajectory,
    pub blowup: Option<f64>,
}

/// Runs the local wave operator at `t0` over the whole run grid, down to
/// the first blown-up node.
pub fn local_wave_op(grid: &Grid, data: &AsymptoticData, t0: f64, cfg: &AuxConfig) -> Result<LocalRun, AuxError> {
    let tg = &data.tg;
    let j0 = tg.index_of(t0)?;
    let state0 = AuxState { t: tg.t(j0), w: data.v.fields[j0].clone(), phi: data.big_phi.fields[j0].add(&data.chi.fields[j0]) };
    let (down, up) = rayon::join(
        || integrate(grid, &state0, tg, Direction::Backward, cfg),
        || integrate(grid, &state0, tg, Direction::Forward, cfg),
    );
    let (down, up) = (down?, up?);
    let lo = down.traj.grid().t_min();
    let sub = tg.slice(tg.index_of(lo)?, tg.len() - 1);
    let mut w = down.traj.w.fields;
    let mut phi = down.traj.phi.fields;
    w.extend(up.traj.w.fields.into_iter().skip(1));
    phi.extend(up.traj.phi.fields.into_iter().skip(1));
    Ok(LocalRun {
        t0: state0.t,
        t_lower: lo,
        traj: AuxTrajectory { w: Trajectory::new(sub.clone(), w), phi: Trajectory::new(sub, phi) },
        blowup: down.blowup,
    })
}

/// Comparison of a run against `V`, `W_p`, `Φ_p + χ`, `Φ_p + ψ₊`, with the
/// envelopes `Q_p(t₀)`, `Q_p(t₀)h₀(t)` above `t₀` and `Q_p(t)`, `P_p(t)`
/// below it, plus the uniform bounds `|w|_k` and `|φ|_ℓ / h₀(t)`.
#[derive(Debug, Clone)]
pub struct LocalEstimates {
    pub w_v: RateSeries,
    pub w_wp: RateSeries,
    pub phi_chi: RateSeries,
    pub phi_psi: RateSeries,
    pub w_bound: RateSeries,
    pub phi_bound: RateSeries,
}

impl LocalEstimates {
    pub fn all(&self) -> Vec<&RateSeries> {
        vec![&self.w_v, &self.w_wp, &self.phi_chi, &self.phi_psi, &self.w_bound, &self.phi_bound]
    }
}

struct Differences {
    w_v: f64,
    w_wp: f64,
    phi_chi: f64,
    phi_psi: f64,
}

fn differences(grid: &Grid, data: &AsymptoticData, traj: &AuxTrajectory, j: usize) -> Result<(f64, Differences), AuxError> {
    let t = traj.grid().t(j);
    let jd = data.tg.index_of(t)?;
    let (k, ell) = (grid.params().k, grid.params().ell as isize);
    let w = &traj.w.fields[j];
    let rest = traj.phi.fields[j].sub(&data.big_phi.fields[jd]);
    Ok((
        t,
        Differences {
            w_v: grid.hk_norm(&w.sub(&data.v.fields[jd]), k)?,
            w_wp: grid.hk_norm(&w.sub(&data.big_w.fields[jd]), k)?,
            phi_chi: grid.yl_norm(&rest.sub(&data.chi.fields[jd]), ell)?,
            phi_psi: grid.yl_norm(&rest.sub(&data.psi_plus), ell)?,
        },
    ))
}

pub fn local_estimates(grid: &Grid, data: &AsymptoticData, run: &LocalRun) -> Result<LocalEstimates, AuxError> {
    if !data.supercritical() {
        return Err(AuxError::Precondition("estimates need (p+2)gamma > 1".into()));
    }
    let est = EstContext::new(data.gamma)?;
    let q0 = est.eval_q(data.p, run.t0)?;
    let (k, ell) = (grid.params().k, grid.params().ell as isize);
    let n = run.traj.grid().len();
    let rows = (0..n)
        .into_par_iter()
        .map(|j| {
            let (t, d) = differences(grid, data, &run.traj, j)?;
            let h0 = h0_general(data.gamma, t);
            let (ew, ep) = if t >= run.t0 { (q0, q0 * h0) } else { (est.eval_q(data.p, t)?, est.eval_p(data.p, t)?) };
            let wb = grid.hk_norm(&run.traj.w.fields[j], k)?;
            let pb = grid.yl_norm(&run.traj.phi.fields[j], ell)?;
            Ok((t, d, ew, ep, wb, pb, h0))
        })
        .collect::<Result<Vec<_>, AuxError>>()?;
    let mut out = LocalEstimates {
        w_v: RateSeries::new("w-V"),
        w_wp: RateSeries::new("w-Wp"),
        phi_chi: RateSeries::new("phi-Phip-chi"),
        phi_psi: RateSeries::new("phi-Phip-psi+"),
        w_bound: RateSeries::new("|w|_k"),
        phi_bound: RateSeries::new("|phi|_l/h0"),
    };
    for (t, d, ew, ep, wb, pb, h0) in rows {
        out.w_v.push(t, d.w_v, ew);
        out.w_wp.push(t, d.w_wp, ew);
        out.phi_chi.push(t, d.phi_chi, ep);
        out.phi_psi.push(t, d.phi_psi, ep);
        out.w_bound.push(t, wb, 1.0);
        out.phi_bound.push(t, pb, h0.max(f64::MIN_POSITIVE));
    }
    Ok(out)
}

/// One row of the Cauchy table: `|w_{t_{i+1}}(t_i) - V(t_i)|_k` against `Q_p(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyRow {
    pub t0: f64,
    pub diff_w: f64,
    pub q_p: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct WaveOpResult {
    pub t0_sequence: Vec<f64>,
    pub runs: Vec<LocalRun>,
    pub cauchy: Vec<CauchyRow>,
    /// Time at which consecutive runs are compared.
    pub t_fixed: f64,
    /// `|w_{t_{i+1}} - w_{t_i}|_k` at `t_fixed`.
    pub fixed_diff_w: Vec<f64>,
    /// `|φ_{t_{i+1}} - φ_{t_i}|_ℓ` at `t_fixed`.
    pub fixed_diff_phi: Vec<f64>,
    /// `|w - V|_k / Q_p`, `|φ - Φ_p - χ|_ℓ / P_p` and `|φ - Φ_p - ψ₊|_ℓ / P_p`
    /// on the representative.
    pub rates: Vec<RateSeries>,
}

impl WaveOpResult {
    /// The run with the largest `t₀`.
    pub fn representative(&self) -> &LocalRun {
        self.runs.last().expect("at least one run")
    }

    /// Largest over smallest Cauchy ratio.
    pub fn cauchy_spread(&self) -> f64 {
        let r: Vec<f64> = self.cauchy.iter().map(|c| c.ratio).collect();
        let hi = r.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.iter().cloned().fold(f64::MAX, f64::min);
        if lo > 0.0 {
            hi / lo
        } else if hi == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// Each fixed-time difference is at most `slack` times the previous one.
    pub fn fixed_diffs_decrease(&self, slack: f64) -> bool {
        self.fixed_diff_w.windows(2).all(|d| d[1] <= slack * d[0])
    }

    pub fn check_cauchy(&self, slack: f64) -> Result<(), AuxError> {
        if self.fixed_diffs_decrease(slack) {
            Ok(())
        } else {
            Err(AuxError::CauchyFailure {
                first: self.fixed_diff_w.first().copied().unwrap_or(0.0),
                last: self.fixed_diff_w.last().copied().unwrap_or(0.0),
            })
        }
    }
}

/// Local wave operators for an increasing sequence of `t₀` and the Cauchy
/// diagnostics of the sequence.
pub fn omega0(grid: &Grid, data: &AsymptoticData, t0_sequence: &[f64], cfg: &AuxConfig) -> Result<WaveOpResult, AuxError> {
    if t0_sequence.len() < 4 || t0_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AuxError::Precondition("t0 sequence must be increasing with at least 4 entries".into()));
    }
    if !data.supercritical() {
        return Err(AuxError::Precondition(format!("(p+2)gamma = {} must exceed 1", (data.p as f64 + 2.0) * data.gamma)));
    }
    let runs = t0_sequence.par_iter().map(|&t0| local_wave_op(grid, data, t0, cfg)).collect::<Result<Vec<_>, _>>()?;
    let est = EstContext::new(data.gamma)?;
    let k = grid.params().k;
    let ell = grid.params().ell as isize;
    let mut cauchy = Vec::new();
    for i in 0..runs.len() - 1 {
        let t = runs[i].t0;
        let w = runs[i + 1].traj.w.at_node(t)?;
        let jd = data.tg.index_of(t)?;
        let diff_w = grid.hk_norm(&w.sub(&data.v.fields[jd]), k)?;
        let q_p = est.eval_q(data.p, t)?;
        cauchy.push(CauchyRow { t0: t, diff_w, q_p, ratio: diff_w / q_p });
    }
    let t_fixed = t0_sequence[0];
    let mut fixed_diff_w = Vec::new();
    let mut fixed_diff_phi = Vec::new();
    for pair in runs.windows(2) {
        let (a, b) = (&pair[0].traj, &pair[1].traj);
        fixed_diff_w.push(grid.hk_norm(&b.w.at_node(t_fixed)?.sub(a.w.at_node(t_fixed)?), k)?);
        fixed_diff_phi.push(grid.yl_norm(&b.phi.at_node(t_fixed)?.sub(a.phi.at_node(t_fixed)?), ell)?);
    }
    let rep = runs.last().expect("nonempty");
    let n = rep.traj.grid().len();
    let rows = (0..n)
        .into_par_iter()
        .map(|j| {
            let (t, d) = differences(grid, data, &rep.traj, j)?;
            Ok((t, d, est.eval_q(data.p, t)?, est.eval_p(data.p, t)?))
        })
        .collect::<Result<Vec<_>, AuxError>>()?;
    let mut w_v = RateSeries::new("w-V/Qp");
    let mut phi_chi = RateSeries::new("phi-Phip-chi/Pp");
    let mut phi_psi = RateSeries::new("phi-Phip-psi+/Pp");
    for (t, d, q, p) in rows {
        w_v.push(t, d.w_v, q);
        phi_chi.push(t, d.phi_chi, p);
        phi_psi.push(t, d.phi_psi, p);
    }
    Ok(WaveOpResult {
        t0_sequence: t0_sequence.to_vec(),
        runs,
        cauchy,
        t_fixed,
        fixed_diff_w,
        fixed_diff_phi,
        rates: vec![w_v, phi_chi, phi_psi],
    })
}

/// Estimates of `(w₊, ψ₊)` read off at the end of a trajectory.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub w_plus_est: ProfileField,
    pub psi_plus_est: PhaseField,
    pub t_max: f64,
    /// `|w_est - w₊|_{k-1} / h(t_max)`.
    pub c_w: f64,
    /// `|ψ_est - ψ₊|_{ℓ-1} / P_p(t_max)`; `None` when `P_p` is undefined.
    pub c_psi: Option<f64>,
    /// `|w - W_m| / Q_m` and `|φ - Φ_m| / N_{m+1}` for `m ≤ p`.
    pub rates: Vec<RateSeries>,
    /// `D(t) = |(φ - Φ_p)(t) - (φ - Φ_p)(t_max/1000)|_{ℓ-1}`, ratio
    /// `D(t_max/10) / D(t_max/100)`.
    pub growth: f64,
    pub nonconvergent: bool,
}

/// Growth factor above which the phase remainder is declared divergent.
pub const NONCONVERGENCE_GROWTH: f64 = 2.0;

pub fn extract_asymptotics(grid: &Grid, traj: &AuxTrajectory, data: &AsymptoticData) -> Result<Extraction, AuxError> {
    let tg = traj.grid();
    let t_max = tg.t_max();
    if (t_max / data.tg.t_max() - 1.0).abs() > 1e-9 {
        return Err(AuxError::Precondition(format!("trajectory ends at {t_max}, not at {}", data.tg.t_max())));
    }
    let (k, ell) = (grid.params().k, grid.params().ell as isize);
    let last = tg.len() - 1;
    let jd = data.tg.index_of(t_max)?;
    let w_plus_est = traj.w.fields[last].clone();
    let psi_plus_est = traj.phi.fields[last].sub(&data.big_phi.fields[jd]);
    let c_w = grid.hk_norm(&w_plus_est.sub(&data.w_plus), k.saturating_sub(1))? / h_general(data.gamma, t_max);
    let est = EstContext::new(data.gamma)?;
    let c_psi = if data.supercritical() {
        Some(grid.yl_norm(&psi_plus_est.sub(&data.psi_plus), ell - 1)? / est.eval_p(data.p, t_max)?)
    } else {
        None
    };
    let h = &data.hierarchy;
    let mut rates = Vec::new();
    for m in 0..=data.p {
        let mut rw = RateSeries::new(format!("w-W{m}/Q{m}"));
        let mut rp = RateSeries::new(format!("phi-Phi{m}/N{}", m + 1));
        for j in 0..tg.len() {
            let t = tg.t(j);
            rw.push(t, grid.hk_norm(&traj.w.fields[j].sub(&h.big_w_at(m, t)?), k)?, est.eval_q(m, t)?);
            rp.push(t, grid.yl_norm(&traj.phi.fields[j].sub(&h.big_phi_at(m as isize, t)?), ell)?, est.eval_n(m + 1, t)?);
        }
        rates.push(rw);
        rates.push(rp);
    }
    let growth = remainder_growth(grid, traj, data)?;
    Ok(Extraction {
        w_plus_est,
        psi_plus_est,
        t_max,
        c_w,
        c_psi,
        rates,
        growth,
        nonconvergent: !(growth <= NONCONVERGENCE_GROWTH),
    })
}

/// `D(t_max/10) / D(t_max/100)` with `D` measured from the node nearest
/// `t_max / 1000` (clamped to the trajectory start). The decade next to
/// `t_max` is skipped because the data pins the remainder there.
pub fn remainder_growth(grid: &Grid, traj: &AuxTrajectory, data: &AsymptoticData) -> Result<f64, AuxError> {
    let tg = traj.grid();
    let ell = grid.params().ell as isize;
    let rest = |t: f64| -> Result<PhaseField, AuxError> {
        let j = tg.nearest(t);
        let jd = data.tg.index_of(tg.t(j))?;
        Ok(traj.phi.fields[j].sub(&data.big_phi.fields[jd]))
    };
    let t_end = tg.t_max() / 10.0;
    let r0 = rest((t_end / 100.0).max(tg.t_min()))?;
    let d_mid = grid.yl_norm(&rest(t_end / 10.0)?.sub(&r0), ell - 1)?;
    let d_end = grid.yl_norm(&rest(t_end)?.sub(&r0), ell - 1)?;
    Ok(if d_mid == 0.0 { if d_end == 0.0 { 1.0 } else { f64::INFINITY } } else { d_end / d_mid })
}

/// `max_j |w(t_j)|_k` and `max_j |φ(t_j)|_ℓ`.
pub fn growth_measure(grid: &Grid, traj: &AuxTrajectory) -> Result<(f64, f64), AuxError> {
    let (k, ell) = (grid.params().k, grid.params().ell as isize);
    let mut a: f64 = 0.0;
    let mut b: f64 = 0.0;
    for j in 0..traj.grid().len() {
        a = a.max(grid.hk_norm(&traj.w.fields[j], k)?);
        b = b.max(grid.yl_norm(&traj.phi.fields[j], ell)?);
    }
    Ok((a, b))
}

/// Sets the zero mode of a real field to zero.
pub fn remove_mean(grid: &Grid, phi: &PhaseField) -> PhaseField {
    let mut c = grid.forward_real(&phi.values);
    c[0] = Complex64::new(0.0, 0.0);
    PhaseField { values: grid.inverse_real(&c) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ModelParams;

    fn grid_with(lambda: f64, gamma: f64) -> Grid {
        Grid::new(ModelParams { lambda, gamma, ..ModelParams::default() }).unwrap()
    }

    #[test]
    fn linear_run_is_free_flow() {
        let grid = grid_with(0.0, 0.6);
        let w = grid.random_band_limited(5, 3, 1.0, 2).unwrap();
        let tg = TimeGrid::octaves(50.0, 1.0, 800.0, 8).unwrap();
        let s0 = AuxState { t: 50.0, w: w.clone(), phi: PhaseField::zeros(grid.len()) };
        for dir in [Direction::Forward, Direction::Backward] {
            let run = integrate(&grid, &s0, &tg, dir, &AuxConfig::default()).unwrap();
            assert!(run.blowup.is_none());
            for j in 0..run.traj.grid().len() {
                let t = run.traj.grid().t(j);
                assert_eq!(run.traj.phi.fields[j].max_abs(), 0.0);
                let exact = grid.free_flow(&w, 50.0, t);
                assert!(run.traj.w.fields[j].sub(&exact).max_abs() < 1e-12);
            }
            assert!(mass_drift(&grid, &run.traj) < 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_keeps_zero_phase() {
        let grid = grid_with(1.0, 0.6);
        let tg = TimeGrid::octaves(50.0, 5.0, 400.0, 8).unwrap();
        let s0 = AuxState { t: 50.0, w: ProfileField::zeros(grid.len()), phi: PhaseField::zeros(grid.len()) };
        let run = integrate(&grid, &s0, &tg, Direction::Backward, &AuxConfig::default()).unwrap();
        assert!(run.traj.w.fields.iter().all(|f| f.max_abs() == 0.0));
        assert!(run.traj.phi.fields.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn eikonal_only_run_matches_fine_run() {
        let grid = grid_with(1.0, 0.6);
        let phi = grid.random_band_limited_real(2, 2, 0.5, 2).unwrap();
        let tg = TimeGrid::octaves(8.0, 1.0, 64.0, 4).unwrap();
        let s0 = AuxState { t: 1.0, w: ProfileField::zeros(grid.len()), phi };
        let a = integrate(&grid, &s0, &tg, Direction::Forward, &AuxConfig::default()).unwrap();
        let b = integrate(&grid, &s0, &tg, Direction::Forward, &AuxConfig { substeps: 4, ..AuxConfig::default() }).unwrap();
        let last = tg.len() - 1;
        let d = a.traj.phi.fields[last].sub(&b.traj.phi.fields[last]).max_abs();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn mass_is_conserved_with_coupling() {
        let grid = grid_with(5.0, 0.6);
        let w = grid.random_band_limited(7, 2, 1.0, 2).unwrap();
        let phi = grid.random_band_limited_real(8, 2, 0.3, 2).unwrap();
        let tg = TimeGrid::octaves(50.0, 5.0, 500.0, 16).unwrap();
        let s0 = AuxState { t: 50.0, w, phi };
        let run = integrate(&grid, &s0, &tg, Direction::Backward, &AuxConfig::default()).unwrap();
        assert!(mass_drift(&grid, &run.traj) < 1e-8, "{}", mass_drift(&grid, &run.traj));
    }

    #[test]
    fn backward_blowup_sets_lower_time() {
        let grid = grid_with(1.0, 0.6);
        let w = grid.random_band_limited(7, 3, 1.0, 2).unwrap();
        let phi = grid.random_band_limited_real(8, 3, 1.0, 2).unwrap();
        let tg = TimeGrid::octaves(50.0, 1.0, 100.0, 4).unwrap();
        let s0 = AuxState { t: 50.0, w, phi: phi.scaled(1e4) };
        let cfg = AuxConfig { blowup_factor: 1.5, ..AuxConfig::default() };
        let run = integrate(&grid, &s0, &tg, Direction::Backward, &cfg).unwrap();
        let t_b = run.blowup.expect("blow-up expected");
        assert!(t_b < 50.0);
        assert!(run.traj.grid().t_min() > t_b);
    }

    #[test]
    fn subcritical_prepare_is_rejected() {
        let grid = grid_with(1.0, 0.4);
        let w = grid.random_band_limited(1, 2, 1.0, 2).unwrap();
        let ht = TimeGrid::decades(1.0, 1e3, 8).unwrap();
        let tg = TimeGrid::octaves(50.0, 5.0, 800.0, 4).unwrap();
        let err = prepare(&grid, &w, &PhaseField::zeros(grid.len()), 0, &ht, &tg, &TransportConfig::default(), false);
        assert!(matches!(err, Err(AuxError::Precondition(_))));
    }

    #[test]
    fn linear_wave_op_runs_agree() {
        let grid = grid_with(0.0, 0.6);
        let w = grid.random_band_limited(1, 2, 1.0, 2).unwrap();
        let ht = TimeGrid::decades(1.0, 1e4, 8).unwrap();
        let tg = TimeGrid::octaves(50.0, 5.0, 800.0, 4).unwrap();
        let data = prepare(&grid, &w, &PhaseField::zeros(grid.len()), 1, &ht, &tg, &TransportConfig::default(), false).unwrap();
        let res = omega0(&grid, &data, &[50.0, 100.0, 200.0, 400.0], &AuxConfig::default()).unwrap();
        for run in &res.runs {
            for j in 0..run.traj.grid().len() {
                assert_eq!(run.traj.phi.fields[j].max_abs(), 0.0);
                let t = run.traj.grid().t(j);
                let exact = grid.free_flow(&w, run.t0, t);
                assert!(run.traj.w.fields[j].sub(&exact).max_abs() < 1e-12);
            }
        }
    }
}
