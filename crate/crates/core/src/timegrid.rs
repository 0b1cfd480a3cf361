//! Uniform grids in log time `τ = log t`, field trajectories on them, cubic
//! interpolation between nodes, cumulative quadrature and power-law tails.

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{PhaseField, ProfileField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeError {
    #[error("invalid time grid: {0}")]
    Invalid(String),
    #[error("time {t} is not a grid node")]
    NotANode { t: f64 },
    #[error("time {t} lies outside [{t_min}, {t_max}]")]
    OutOfRange { t: f64, t_min: f64, t_max: f64 },
    #[error("tail extrapolation failed: integrand exponent {exponent:.4} is not decaying on the last decade")]
    TailNotDecaying { exponent: f64 },
}

/// Nodes `t_j = exp(tau0 + j dtau)`, `j = 0..len`, with `dtau = ln(unit) /
/// per_unit`. Nodes a whole number of units away from `anchor` are exact
/// products `anchor * unit^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    tau0: f64,
    dtau: f64,
    len: usize,
    anchor: f64,
    /// Index of the anchor node; may lie outside `0..len`.
    anchor_index: i64,
    unit: f64,
    per_unit: usize,
}

impl TimeGrid {
    /// Grid anchored at `t_min` with `steps_per_decade` nodes per factor 10;
    /// `t_max` is rounded to the nearest node.
    pub fn decades(t_min: f64, t_max: f64, steps_per_decade: usize) -> Result<Self, TimeError> {
        if !(t_min >= 1.0 && t_max > t_min && t_max.is_finite()) {
            return Err(TimeError::Invalid(format!("need 1 <= t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if steps_per_decade == 0 {
            return Err(TimeError::Invalid("steps_per_decade must be positive".into()));
        }
        let dtau = std::f64::consts::LN_10 / steps_per_decade as f64;
        let steps = ((t_max / t_min).ln() / dtau).round().max(1.0) as usize;
        Ok(Self { tau0: t_min.ln(), dtau, len: steps + 1, anchor: t_min, anchor_index: 0, unit: 10.0, per_unit: steps_per_decade })
    }

    /// Grid containing `anchor * 2^{j/steps_per_octave}` for every integer
    /// `j` with the node inside `[t_min, t_max]`.
    pub fn octaves(anchor: f64, t_min: f64, t_max: f64, steps_per_octave: usize) -> Result<Self, TimeError> {
        if !(t_min >= 1.0 && t_max > t_min && anchor > 0.0) {
            return Err(TimeError::Invalid(format!("need 1 <= t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if steps_per_octave == 0 {
            return Err(TimeError::Invalid("steps_per_octave must be positive".into()));
        }
        let dtau = std::f64::consts::LN_2 / steps_per_octave as f64;
        let a = anchor.ln();
        let lo = ((t_min.ln() - a) / dtau - 1e-9).ceil() as i64;
        let hi = ((t_max.ln() - a) / dtau + 1e-9).floor() as i64;
        if hi <= lo {
            return Err(TimeError::Invalid("octave grid has fewer than two nodes".into()));
        }
        Ok(Self {
            tau0: a + lo as f64 * dtau,
            dtau,
            len: (hi - lo + 1) as usize,
            anchor,
            anchor_index: -lo,
            unit: 2.0,
            per_unit: steps_per_octave,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn steps_per_decade(&self) -> f64 {
        std::f64::consts::LN_10 / self.dtau
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.tau0 + j as f64 * self.dtau
    }

    pub fn t(&self, j: usize) -> f64 {
        let k = j as i64 - self.anchor_index;
        let per = self.per_unit as i64;
        let (q, r) = (k.div_euclid(per), k.rem_euclid(per));
        let whole = self.anchor * self.unit.powi(q as i32);
        if r == 0 {
            whole
        } else {
            whole * (r as f64 * self.dtau).exp()
        }
    }

    pub fn t_min(&self) -> f64 {
        self.t(0)
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.len - 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.t(j)).collect()
    }

    /// Index of the node equal to `t` (relative tolerance 1e-9 in τ).
    pub fn index_of(&self, t: f64) -> Result<usize, TimeError> {
        let x = (t.ln() - self.tau0) / self.dtau;
        let j = x.round();
        if (x - j).abs() > 1e-6 || j < 0.0 || j as usize >= self.len {
            return Err(TimeError::NotANode { t });
        }
        Ok(j as usize)
    }

    /// Index of the node closest to `t` in log time, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let x = ((t.ln() - self.tau0) / self.dtau).round();
        x.clamp(0.0, (self.len - 1) as f64) as usize
    }

    /// Sub-grid of nodes inside `[t_lo, t_hi]`, same spacing.
    pub fn restrict(&self, t_lo: f64, t_hi: f64) -> Result<Self, TimeError> {
        let lo = ((t_lo.ln() - self.tau0) / self.dtau - 1e-9).ceil().max(0.0) as usize;
        let hi = (((t_hi.ln() - self.tau0) / self.dtau + 1e-9).floor() as i64).min(self.len as i64 - 1);
        if hi < lo as i64 + 1 {
            return Err(TimeError::Invalid(format!("restriction to [{t_lo}, {t_hi}] leaves fewer than two nodes")));
        }
        Ok(self.slice(lo, hi as usize))
    }

    /// Nodes `lo..=hi` as a grid of their own.
    pub fn slice(&self, lo: usize, hi: usize) -> Self {
        assert!(lo <= hi && hi < self.len, "slice {lo}..={hi} outside a grid of {} nodes", self.len);
        Self { tau0: self.tau(lo), len: hi - lo + 1, anchor_index: self.anchor_index - lo as i64, ..self.clone() }
    }

    /// Same span with `factor` times as many intervals.
    pub fn refine(&self, factor: usize) -> Self {
        Self {
            dtau: self.dtau / factor as f64,
            len: (self.len - 1) * factor + 1,
            anchor_index: self.anchor_index * factor as i64,
            per_unit: self.per_unit * factor,
            ..self.clone()
        }
    }

    /// Number of nodes spanning one decade (at least one).
    pub fn decade_steps(&self) -> usize {
        (std::f64::consts::LN_10 / self.dtau).round().max(1.0) as usize
    }

    /// Cubic Lagrange weights for evaluating at `t`: returns the stencil start
    /// and four weights (fewer nodes on tiny grids are padded with zeros).
    pub fn stencil(&self, t: f64) -> Result<(usize, [f64; 4]), TimeError> {
        let x = (t.ln() - self.tau0) / self.dtau;
        let last = (self.len - 1) as f64;
        if !(x >= -1e-9 && x <= last + 1e-9) {
            return Err(TimeError::OutOfRange { t, t_min: self.t_min(), t_max: self.t_max() });
        }
        let j = x.round();
        if (x - j).abs() < 1e-12 {
            let mut w = [0.0; 4];
            w[0] = 1.0;
            return Ok((j as usize, w));
        }
        if self.len < 4 {
            // linear fallback
            let i = (x.floor() as usize).min(self.len - 2);
            let f = x - i as f64;
            return Ok((i, [1.0 - f, f, 0.0, 0.0]));
        }
        let i = x.floor() as i64;
        let start = (i - 1).clamp(0, self.len as i64 - 4) as usize;
        let u = x - start as f64;
        let mut w = [0.0; 4];
        for (a, wa) in w.iter_mut().enumerate() {
            let mut prod = 1.0;
            for b in 0..4 {
                if a != b {
                    prod *= (u - b as f64) / (a as f64 - b as f64);
                }
            }
            *wa = prod;
        }
        Ok((start, w))
    }
}

/// Linear-space operations shared by profile and phase fields.
pub trait FieldLike: Clone + Send + Sync {
    fn zeros_like(&self) -> Self;
    /// `self += c * other`.
    fn add_scaled(&mut self, c: f64, other: &Self);
    /// Unweighted Euclidean norm of the values.
    fn raw_norm(&self) -> f64;
}

impl FieldLike for ProfileField {
    fn zeros_like(&self) -> Self {
        ProfileField::zeros(self.values.len())
    }

    fn add_scaled(&mut self, c: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * c;
        }
    }

    fn raw_norm(&self) -> f64 {
        self.values.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }
}

impl FieldLike for PhaseField {
    fn zeros_like(&self) -> Self {
        PhaseField::zeros(self.values.len())
    }

    fn add_scaled(&mut self, c: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * c;
        }
    }

    fn raw_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A field sampled at every node of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F> {
    pub grid: TimeGrid,
    pub fields: Vec<F>,
}

pub type ProfileTrajectory = Trajectory<ProfileField>;
pub type PhaseTrajectory = Trajectory<PhaseField>;

impl<F: FieldLike> Trajectory<F> {
    pub fn new(grid: TimeGrid, fields: Vec<F>) -> Self {
        assert_eq!(grid.len(), fields.len(), "trajectory length must match its grid");
        Self { grid, fields }
    }

    pub fn constant(grid: TimeGrid, field: F) -> Self {
        let fields = vec![field; grid.len()];
        Self { grid, fields }
    }

    /// Value at an arbitrary `t` inside the grid, by cubic Lagrange
    /// interpolation in log time; exact at nodes.
    pub fn at(&self, t: f64) -> Result<F, TimeError> {
        let (start, w) = self.grid.stencil(t)?;
        if w[1] == 0.0 && w[2] == 0.0 && w[3] == 0.0 && w[0] == 1.0 {
            return Ok(self.fields[start].clone());
        }
        let mut out = self.fields[start].zeros_like();
        for (a, wa) in w.iter().enumerate() {
            if *wa != 0.0 {
                out.add_scaled(*wa, &self.fields[start + a]);
            }
        }
        Ok(out)
    }

    /// Field at the node equal to `t`.
    pub fn at_node(&self, t: f64) -> Result<&F, TimeError> {
        Ok(&self.fields[self.grid.index_of(t)?])
    }
}

/// Weights of `∫_{τ_j}^{τ_{j+1}} f dτ` from a cubic through four
/// neighbouring nodes, as (first index, weights / dτ).
fn interval_rule(j: usize, len: usize) -> (usize, [f64; 4]) {
    const C: f64 = 1.0 / 24.0;
    if j == 0 {
        (0, [9.0 * C, 19.0 * C, -5.0 * C, C])
    } else if j + 2 >= len {
        (len - 4, [C, -5.0 * C, 19.0 * C, 9.0 * C])
    } else {
        (j - 1, [-C, 13.0 * C, 13.0 * C, -C])
    }
}

fn interval_integral<F: FieldLike>(values: &[F], j: usize, dtau: f64) -> F {
    let len = values.len();
    let mut out = values[0].zeros_like();
    if len < 4 {
        out.add_scaled(0.5 * dtau, &values[j]);
        out.add_scaled(0.5 * dtau, &values[j + 1]);
        return out;
    }
    let (s, w) = interval_rule(j, len);
    for (a, wa) in w.iter().enumerate() {
        out.add_scaled(wa * dtau, &values[s + a]);
    }
    out
}

/// `I_j = ∫_{τ_0}^{τ_j} f dτ` at every node; fourth order on smooth data.
pub fn cumulative_from_start<F: FieldLike>(values: &[F], dtau: f64) -> Vec<F> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = values[0].zeros_like();
    out.push(acc.clone());
    for j in 0..values.len() - 1 {
        acc.add_scaled(1.0, &interval_integral(values, j, dtau));
        out.push(acc.clone());
    }
    out
}

/// `J_j = ∫_{τ_j}^{τ_end} f dτ` at every node, summed from the end.
pub fn cumulative_to_end<F: FieldLike>(values: &[F], dtau: f64) -> Vec<F> {
    let len = values.len();
    let mut out = vec![values[0].zeros_like(); len];
    let mut acc = values[0].zeros_like();
    for j in (0..len - 1).rev() {
        acc.add_scaled(1.0, &interval_integral(values, j, dtau));
        out[j] = acc.clone();
    }
    out
}

/// Estimate of `∫_{τ_end}^∞ f dτ` assuming `f` decays like a power of `t`
/// fitted on the last decade (or the whole grid if shorter).
pub fn power_law_tail<F: FieldLike>(values: &[F], grid: &TimeGrid) -> Result<F, TimeError> {
    let last = values.len() - 1;
    let first = last.saturating_sub(grid.decade_steps());
    power_law_tail_between(&values[first], &values[last], grid.tau(last) - grid.tau(first))
}

/// Tail `∫_{τ_end}^∞ f dτ` from samples at `τ_end - span` and `τ_end`.
pub fn power_law_tail_between<F: FieldLike>(start: &F, end: &F, span: f64) -> Result<F, TimeError> {
    let e = end.raw_norm();
    let s = start.raw_norm();
    if e == 0.0 {
        return Ok(end.zeros_like());
    }
    if span <= 0.0 || s == 0.0 {
        return Err(TimeError::TailNotDecaying { exponent: 0.0 });
    }
    let exponent = (e / s).ln() / span;
    if !(exponent < -1e-3) {
        return Err(TimeError::TailNotDecaying { exponent });
    }
    let mut out = end.zeros_like();
    out.add_scaled(-1.0 / exponent, end);
    Ok(out)
}

/// Ratio of a scalar series at the end of a window to its value one decade
/// earlier, both obtained by linear interpolation in log time.
pub fn drift_factor(ts: &[f64], values: &[f64], t_end: f64) -> Option<f64> {
    let a = interpolate_series(ts, values, t_end / 10.0)?;
    let b = interpolate_series(ts, values, t_end)?;
    if a == 0.0 {
        return None;
    }
    Some(b / a)
}

/// Linear interpolation of a scalar series in log time.
pub fn interpolate_series(ts: &[f64], values: &[f64], t: f64) -> Option<f64> {
    if ts.is_empty() {
        return None;
    }
    let lt = t.ln();
    for i in 0..ts.len() {
        if (ts[i].ln() - lt).abs() < 1e-9 {
            return Some(values[i]);
        }
    }
    for i in 0..ts.len().saturating_sub(1) {
        let (a, b) = (ts[i].ln(), ts[i + 1].ln());
        if (a <= lt && lt <= b) || (b <= lt && lt <= a) {
            let f = (lt - a) / (b - a);
            return Some(values[i] + f * (values[i + 1] - values[i]));
        }
    }
    None
}

/// A ratio `numerator / envelope` sampled along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub label: String,
    pub ts: Vec<f64>,
    pub numerator: Vec<f64>,
    pub envelope: Vec<f64>,
}

impl RateSeries {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), ts: Vec::new(), numerator: Vec::new(), envelope: Vec::new() }
    }

    pub fn push(&mut self, t: f64, numerator: f64, envelope: f64) {
        self.ts.push(t);
        self.numerator.push(numerator);
        self.envelope.push(envelope);
    }

    /// Ratios; a zero numerator over a zero envelope counts as zero.
    pub fn ratios(&self) -> Vec<f64> {
        self.numerator
            .iter()
            .zip(&self.envelope)
            .map(|(n, e)| if *n == 0.0 { 0.0 } else { n / e })
            .collect()
    }

    pub fn sup(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    /// Ratio at `t_end` over the ratio at `t_end / 10`.
    pub fn drift(&self, t_end: f64) -> Option<f64> {
        drift_factor(&self.ts, &self.ratios(), t_end)
    }

    pub fn ratio_at(&self, t: f64) -> Option<f64> {
        interpolate_series(&self.ts, &self.ratios(), t)
    }

    /// Largest over smallest ratio on `[t_lo, t_hi]`.
    pub fn spread(&self, t_lo: f64, t_hi: f64) -> Option<f64> {
        let r: Vec<f64> = self
            .ts
            .iter()
            .zip(self.ratios())
            .filter(|(t, _)| **t >= t_lo * (1.0 - 1e-12) && **t <= t_hi * (1.0 + 1e-12))
            .map(|(_, v)| v)
            .collect();
        if r.is_empty() {
            return None;
        }
        let hi = r.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.iter().cloned().fold(f64::MAX, f64::min);
        Some(hi / lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> PhaseField {
        PhaseField { values: vec![v] }
    }

    #[test]
    fn decade_grid_nodes() {
        let g = TimeGrid::decades(1.0, 1e3, 64).unwrap();
        assert_eq!(g.len(), 193);
        assert_eq!(g.t(0), 1.0);
        assert!((g.t_max() - 1e3).abs() < 1e-9);
        assert_eq!(g.index_of(10.0).unwrap(), 64);
        assert!(g.index_of(11.0).is_err());
        assert!(TimeGrid::decades(0.5, 10.0, 8).is_err());
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn octave_grid_contains_anchored_doublings() {
        let g = TimeGrid::octaves(50.0, 1.0, 1e4, 20).unwrap();
        for t in [50.0, 100.0, 200.0, 400.0, 6400.0] {
            let j = g.index_of(t).unwrap();
            assert!((g.t(j) / t - 1.0).abs() < 1e-12);
        }
        assert!(g.t_min() >= 1.0 && g.t_min() < 2f64.powf(0.05));
        assert!(g.t_max() <= 1e4);
    }

    #[test]
    fn whole_units_are_exact() {
        let g = TimeGrid::octaves(62.5, 1.0, 1000.0, 16).unwrap();
        assert_eq!(g.t_max(), 1000.0);
        assert_eq!(g.t(g.index_of(125.0).unwrap()), 125.0);
        let fine = g.refine(3).restrict(100.0, 600.0).unwrap();
        assert_eq!(fine.t(fine.index_of(250.0).unwrap()), 250.0);
        let d = TimeGrid::decades(1.0, 1e5, 64).unwrap();
        assert_eq!(d.t(0), 1.0);
        assert_eq!(d.t_max(), 1e5);
        assert_eq!(d.slice(64, 200).t(0), 10.0);
    }

    #[test]
    fn restrict_and_refine() {
        let g = TimeGrid::decades(1.0, 1e4, 16).unwrap();
        let r = g.restrict(10.0, 1000.0).unwrap();
        assert!((r.t_min() - 10.0).abs() < 1e-9 && (r.t_max() - 1000.0).abs() < 1e-9);
        let f = r.refine(2);
        assert_eq!(f.len(), 2 * (r.len() - 1) + 1);
        assert!((f.t_max() - r.t_max()).abs() < 1e-9);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics_in_tau() {
        let g = TimeGrid::decades(1.0, 100.0, 8).unwrap();
        let f = |tau: f64| 1.0 - 2.0 * tau + 0.5 * tau * tau - 0.1 * tau.powi(3);
        let traj = Trajectory::new(g.clone(), (0..g.len()).map(|j| scalar(f(g.tau(j)))).collect());
        for t in [1.0, 1.3, 7.7, 50.0, 99.0, 100.0] {
            let v = traj.at(t).unwrap().values[0];
            assert!((v - f(t.ln())).abs() < 1e-12, "t={t}");
        }
        assert!(traj.at(0.9).is_err());
        assert!(traj.at(200.0).is_err());
    }

    #[test]
    fn cumulative_rules_are_exact_for_cubics() {
        let g = TimeGrid::decades(1.0, 1000.0, 5).unwrap();
        let f = |x: f64| 3.0 * x.powi(3) - x + 2.0;
        let big_f = |x: f64| 0.75 * x.powi(4) - 0.5 * x * x + 2.0 * x;
        let vals: Vec<PhaseField> = (0..g.len()).map(|j| scalar(f(g.tau(j)))).collect();
        let fwd = cumulative_from_start(&vals, g.dtau());
        let bwd = cumulative_to_end(&vals, g.dtau());
        let end = g.tau(g.len() - 1);
        for j in 0..g.len() {
            let x = g.tau(j);
            assert!((fwd[j].values[0] - (big_f(x) - big_f(0.0))).abs() < 1e-10);
            assert!((bwd[j].values[0] - (big_f(end) - big_f(x))).abs() < 1e-10);
        }
    }

    #[test]
    fn cumulative_rule_is_fourth_order() {
        let err = |spd: usize| {
            let g = TimeGrid::decades(1.0, 100.0, spd).unwrap();
            let vals: Vec<PhaseField> = (0..g.len()).map(|j| scalar((-g.tau(j)).exp() * g.tau(j).sin())).collect();
            let fwd = cumulative_from_start(&vals, g.dtau());
            let x = g.tau(g.len() - 1);
            // ∫_0^x e^{-s} sin s ds
            let exact = 0.5 * (1.0 - (-x).exp() * (x.sin() + x.cos()));
            (fwd.last().unwrap().values[0] - exact).abs()
        };
        let order = (err(16) / err(32)).log2();
        assert!(order > 3.7 && order < 4.5, "order {order}");
    }

    #[test]
    fn power_law_tail_recovers_exponential_tails() {
        let g = TimeGrid::decades(1.0, 1e4, 32).unwrap();
        let vals: Vec<PhaseField> = (0..g.len()).map(|j| scalar(2.0 * (-0.6 * g.tau(j)).exp())).collect();
        let tail = power_law_tail(&vals, &g).unwrap();
        let exact = 2.0 * (-0.6 * g.tau(g.len() - 1)).exp() / 0.6;
        assert!((tail.values[0] - exact).abs() < 1e-12 * exact);
        let flat: Vec<PhaseField> = (0..g.len()).map(|_| scalar(1.0)).collect();
        assert!(matches!(power_law_tail(&flat, &g), Err(TimeError::TailNotDecaying { .. })));
        let zero: Vec<PhaseField> = (0..g.len()).map(|_| scalar(0.0)).collect();
        assert_eq!(power_law_tail(&zero, &g).unwrap().values[0], 0.0);
    }

    #[test]
    fn drift_factor_of_power_law() {
        let ts: Vec<f64> = (0..=40).map(|j| 10f64.powf(j as f64 / 10.0)).collect();
        let vals: Vec<f64> = ts.iter().map(|t| t.powf(-0.3)).collect();
        let d = drift_factor(&ts, &vals, 1000.0).unwrap();
        assert!((d - 10f64.powf(-0.3)).abs() < 1e-12);
        assert!(drift_factor(&ts, &vals, 1e6).is_none());
    }
}
