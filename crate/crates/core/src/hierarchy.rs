//! The asymptotic hierarchy `{w_m, φ_m}`: amplitudes by integration from
//! infinity, phases by integration from `t = 1`, plus the phase remainder
//! `φ_{p+1}` fixed at infinity.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::estfun::{h0_general, EstContext, EstError};
use crate::grid::{Grid, GridError, PhaseField, ProfileField};
use crate::timegrid::{
    cumulative_from_start, cumulative_to_end, power_law_tail, PhaseTrajectory, ProfileTrajectory, RateSeries, TimeError,
    TimeGrid, Trajectory,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierarchyError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Est(#[from] EstError),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Solution of the hierarchy on a log-time grid starting at `t = 1`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub p: usize,
    pub gamma: f64,
    pub time: TimeGrid,
    pub w_plus: ProfileField,
    /// `amplitudes[m - 1]` holds `w_m` for `1 <= m <= p + 1`.
    pub amplitudes: Vec<ProfileTrajectory>,
    /// `phases[m]` holds `φ_m` for `0 <= m <= p`.
    pub phases: Vec<PhaseTrajectory>,
    /// `φ_{p+1}` with zero data at infinity, when requested.
    pub psi_tail: Option<PhaseTrajectory>,
    /// Zero-mode density of `g0(w₊, w₊)` dropped by the multiplier.
    pub dropped_mean: f64,
}

impl Hierarchy {
    /// `w_m` at node `j` (`w_0 = w₊`).
    pub fn w(&self, m: usize, j: usize) -> &ProfileField {
        if m == 0 {
            &self.w_plus
        } else {
            &self.amplitudes[m - 1].fields[j]
        }
    }

    pub fn phi(&self, m: usize, j: usize) -> &PhaseField {
        &self.phases[m].fields[j]
    }

    /// `W_m = Σ_{j≤m} w_j` at node `j`.
    pub fn big_w(&self, m: usize, j: usize) -> ProfileField {
        let mut out = self.w_plus.clone();
        for i in 1..=m {
            out = out.add(&self.amplitudes[i - 1].fields[j]);
        }
        out
    }

    /// `Φ_m = Σ_{j≤m} φ_j` at node `j`; the empty sum for `m = -1` is zero.
    pub fn big_phi(&self, m: isize, j: usize) -> PhaseField {
        let mut out = PhaseField::zeros(self.w_plus.values.len());
        for i in 0..=m {
            out = out.add(&self.phases[i as usize].fields[j]);
        }
        out
    }

    /// `W_m(t)` at any `t` in the grid span.
    pub fn big_w_at(&self, m: usize, t: f64) -> Result<ProfileField, TimeError> {
        let mut out = self.w_plus.clone();
        for i in 1..=m {
            out = out.add(&self.amplitudes[i - 1].at(t)?);
        }
        Ok(out)
    }

    /// `Φ_m(t)` at any `t` in the grid span.
    pub fn big_phi_at(&self, m: isize, t: f64) -> Result<PhaseField, TimeError> {
        let mut out = PhaseField::zeros(self.w_plus.values.len());
        for i in 0..=m {
            out = out.add(&self.phases[i as usize].at(t)?);
        }
        Ok(out)
    }

    /// `Φ_m` as a trajectory on the hierarchy grid.
    pub fn big_phi_trajectory(&self, m: isize) -> PhaseTrajectory {
        let fields = (0..self.time.len()).map(|j| self.big_phi(m, j)).collect();
        Trajectory::new(self.time.clone(), fields)
    }
}

fn check_budget(grid: &Grid, p: usize) -> Result<(), HierarchyError> {
    let need = grid.params().k + p + 1;
    if need > grid.max_derivative() {
        return Err(GridError::Unresolvable { order: need, size: grid.size() }.into());
    }
    Ok(())
}

/// Source of `w_{m+1}` in log time at one node:
/// `(2t)^{-1} P Σ_{j≤m} (2∇φ_j·∇ + Δφ_j) w_{m-j}`.
fn amplitude_source(grid: &Grid, h: &Hierarchy, m: usize, j: usize) -> ProfileField {
    let t = h.time.t(j);
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i in 0..=m {
        let d = grid.phase_derivs(h.phi(i, j));
        grid.transport_accumulate(&d, h.w(m - i, j), &mut acc);
    }
    grid.project(&ProfileField { values: acc }).scaled(0.5 / t)
}

/// Source of `φ_{m+1}` in log time at one node:
/// `(2t)^{-1} P Σ_{j≤m} ∇φ_j·∇φ_{m-j} + t^{1-γ} Σ_{j≤m+1} g0(w_j, w_{m+1-j})`.
fn phase_source(grid: &Grid, h: &Hierarchy, m: usize, j: usize) -> Result<PhaseField, GridError> {
    let t = h.time.t(j);
    let derivs: Vec<_> = (0..=m).map(|i| grid.phase_derivs(h.phi(i, j))).collect();
    let mut eik = vec![0.0; grid.len()];
    for i in 0..=m {
        grid.grad_dot_accumulate(&derivs[i], &derivs[m - i], &mut eik);
    }
    let eik = grid.project_real(&PhaseField { values: eik });
    let mut dens = vec![0.0; grid.len()];
    for i in 0..=m + 1 {
        grid.density_accumulate(h.w(i, j), h.w(m + 1 - i, j), &mut dens);
    }
    let (g, _) = grid.g0_density(&dens)?;
    Ok(eik.scaled(0.5 / t).axpy(t.powf(1.0 - h.gamma), &g))
}

/// `-(∫_τ^{τ_end} f + tail)` at every node.
fn integrate_from_infinity<F: crate::timegrid::FieldLike>(
    values: &[F],
    time: &TimeGrid,
) -> Result<Vec<F>, TimeError> {
    let tail = power_law_tail(values, time)?;
    let mut out = cumulative_to_end(values, time.dtau());
    for v in &mut out {
        v.add_scaled(1.0, &tail);
        let z = v.zeros_like();
        let mut neg = z;
        neg.add_scaled(-1.0, v);
        *v = neg;
    }
    Ok(out)
}

/// Solves the hierarchy up to `φ_p` and `w_{p+1}`.
pub fn solve_hierarchy(grid: &Grid, w_plus: &ProfileField, p: usize, time: &TimeGrid) -> Result<Hierarchy, HierarchyError> {
    grid.check_len(w_plus.values.len())?;
    check_budget(grid, p)?;
    if time.t_min() != 1.0 {
        return Err(HierarchyError::Domain(format!("the hierarchy grid must start at t = 1, got {}", time.t_min())));
    }
    let gamma = grid.params().gamma;
    let (g00, dropped_mean) = grid.g0_with_mean(w_plus, w_plus)?;
    let phi0 = (0..time.len()).map(|j| g00.scaled(h0_general(gamma, time.t(j)))).collect();
    let mut h = Hierarchy {
        p,
        gamma,
        time: time.clone(),
        w_plus: w_plus.clone(),
        amplitudes: Vec::new(),
        phases: vec![Trajectory::new(time.clone(), phi0)],
        psi_tail: None,
        dropped_mean,
    };
    for m in 0..=p {
        let src: Vec<ProfileField> = (0..time.len()).into_par_iter().map(|j| amplitude_source(grid, &h, m, j)).collect();
        let w_next = integrate_from_infinity(&src, time)?;
        h.amplitudes.push(Trajectory::new(time.clone(), w_next));
        if m < p {
            let src: Vec<PhaseField> =
                (0..time.len()).into_par_iter().map(|j| phase_source(grid, &h, m, j)).collect::<Result<_, _>>()?;
            let phi_next = cumulative_from_start(&src, time.dtau());
            h.phases.push(Trajectory::new(time.clone(), phi_next));
        }
    }
    Ok(h)
}

/// `φ_{p+1}(t) = -∫_t^∞` of its source, defined when `(p + 2)γ > 1`.
pub fn solve_psi_tail(grid: &Grid, h: &Hierarchy) -> Result<PhaseTrajectory, HierarchyError> {
    let p = h.p;
    if (p as f64 + 2.0) * h.gamma <= 1.0 {
        return Err(HierarchyError::Domain(format!(
            "(p+2)gamma = {} does not exceed 1",
            (p as f64 + 2.0) * h.gamma
        )));
    }
    let src: Vec<PhaseField> =
        (0..h.time.len()).into_par_iter().map(|j| phase_source(grid, h, p, j)).collect::<Result<_, _>>()?;
    Ok(Trajectory::new(h.time.clone(), integrate_from_infinity(&src, &h.time)?))
}

/// Solves the hierarchy and, when `(p+2)γ > 1`, attaches `φ_{p+1}`.
pub fn solve_with_tail(grid: &Grid, w_plus: &ProfileField, p: usize, time: &TimeGrid) -> Result<Hierarchy, HierarchyError> {
    let mut h = solve_hierarchy(grid, w_plus, p, time)?;
    if (p as f64 + 2.0) * h.gamma > 1.0 {
        h.psi_tail = Some(solve_psi_tail(grid, &h)?);
    }
    Ok(h)
}

/// Decay ratios of the hierarchy against the estimating functions.
#[derive(Debug, Clone)]
pub struct DecayReport {
    /// `|w_{m+1}|_{k+p-m-1} / Q_m`, one per `m ≤ p`.
    pub amplitude: Vec<RateSeries>,
    /// `|φ_m|_{ℓ+p-m} / N_m`, one per `m ≤ p`.
    pub phase: Vec<RateSeries>,
    /// `|φ_{p+1}|_{ℓ-1} / P_p`, when the remainder was computed.
    pub remainder: Option<RateSeries>,
}

impl DecayReport {
    pub fn all(&self) -> Vec<&RateSeries> {
        self.amplitude.iter().chain(&self.phase).chain(&self.remainder).collect()
    }
}

/// Ratio tables over the nodes in `(1, t_hi]`.
pub fn hierarchy_decay_report(grid: &Grid, h: &Hierarchy, k: usize, ell: usize, t_hi: f64) -> Result<DecayReport, HierarchyError> {
    let est = EstContext::new(h.gamma)?;
    let p = h.p;
    let nodes: Vec<usize> = (1..h.time.len()).filter(|&j| h.time.t(j) <= t_hi * (1.0 + 1e-12)).collect();
    let mut amplitude = Vec::new();
    let mut phase = Vec::new();
    for m in 0..=p {
        let order_w = k + p - m - 1;
        let order_phi = (ell + p - m) as isize;
        let rows: Vec<(f64, f64, f64, f64, f64)> = nodes
            .par_iter()
            .map(|&j| -> Result<_, HierarchyError> {
                let t = h.time.t(j);
                let nw = grid.hk_norm(h.w(m + 1, j), order_w)?;
                let np = grid.yl_norm(h.phi(m, j), order_phi)?;
                Ok((t, nw, est.eval_q(m, t)?, np, est.eval_n(m, t)?))
            })
            .collect::<Result<_, _>>()?;
        let mut a = RateSeries::new(format!("w{}", m + 1));
        let mut b = RateSeries::new(format!("phi{m}"));
        for (t, nw, q, np, n) in rows {
            a.push(t, nw, q);
            b.push(t, np, n);
        }
        amplitude.push(a);
        phase.push(b);
    }
    let remainder = match &h.psi_tail {
        Some(tail) => {
            let rows: Vec<(f64, f64, f64)> = nodes
                .par_iter()
                .map(|&j| -> Result<_, HierarchyError> {
                    let t = h.time.t(j);
                    Ok((t, grid.yl_norm(&tail.fields[j], ell as isize - 1)?, est.eval_p(p, t)?))
                })
                .collect::<Result<_, _>>()?;
            let mut r = RateSeries::new(format!("phi{}", p + 1));
            for (t, n, e) in rows {
                r.push(t, n, e);
            }
            Some(r)
        }
        None => None,
    };
    Ok(DecayReport { amplitude, phase, remainder })
}

/// Largest `|φ_m - φ'_m|_{ℓ-1} / (1 + |φ_m|_{ℓ-1})` between the hierarchies of
/// `w₊` and `w₊ e^{iσ}`, over `m ≤ p + 1` (the remainder when defined) and all
/// nodes.
pub fn hierarchy_gauge_check(
    grid: &Grid,
    w_plus: &ProfileField,
    sigma: &PhaseField,
    p: usize,
    time: &TimeGrid,
) -> Result<f64, HierarchyError> {
    let ell = grid.params().ell as isize;
    let a = solve_with_tail(grid, w_plus, p, time)?;
    let b = solve_with_tail(grid, &w_plus.rotated(sigma, 1.0), p, time)?;
    let mut pairs: Vec<(&PhaseTrajectory, &PhaseTrajectory)> = a.phases.iter().zip(&b.phases).collect();
    if let (Some(x), Some(y)) = (&a.psi_tail, &b.psi_tail) {
        pairs.push((x, y));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in pairs {
        let devs: Vec<f64> = (0..time.len())
            .into_par_iter()
            .map(|j| -> Result<f64, HierarchyError> {
                let d = grid.yl_norm(&x.fields[j].sub(&y.fields[j]), ell - 1)?;
                Ok(d / (1.0 + grid.yl_norm(&x.fields[j], ell - 1)?))
            })
            .collect::<Result<_, _>>()?;
        worst = devs.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}
