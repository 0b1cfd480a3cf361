//! Pass/fail bookkeeping shared by the pipelines and the acceptance suite.

use hsl_core::auxsys::AuxError;
use hsl_core::estfun::EstError;
use hsl_core::grid::GridError;
use hsl_core::hierarchy::HierarchyError;
use hsl_core::quad::QuadError;
use hsl_core::scattering::ScatterError;
use hsl_core::snapshot::SnapshotError;
use hsl_core::timegrid::TimeError;
use hsl_core::transport::TransportError;
use thiserror::Error;

use crate::config::ConfigError;
use crate::plot::PlotError;
use crate::table::TableError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Est(#[from] EstError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Aux(#[from] AuxError),
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn is_blowup(&self) -> bool {
        match self {
            RunError::Aux(AuxError::BlowUp { .. }) => true,
            RunError::Scatter(ScatterError::Aux(AuxError::BlowUp { .. })) => true,
            _ => false,
        }
    }

    /// Errors caused by the configuration rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            RunError::Config(_)
                | RunError::Aux(AuxError::Precondition(_))
                | RunError::Scatter(ScatterError::Aux(AuxError::Precondition(_)))
                | RunError::Grid(GridError::InvalidParams(_) | GridError::BandTooWide { .. })
                | RunError::Hierarchy(HierarchyError::Grid(GridError::Unresolvable { .. }))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    Above(f64),
    Within(f64, f64),
    /// Recorded for the reports only; always holds.
    Report,
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(b) => v <= b,
            Bound::Above(b) => v > b,
            Bound::Within(lo, hi) => lo <= v && v <= hi,
            Bound::Report => true,
        }
    }

    /// The limit nearest to `v`, on a log scale for ranges.
    pub fn nearest_limit(&self, v: f64) -> f64 {
        match *self {
            Bound::AtMost(b) | Bound::Above(b) => b,
            Bound::Report => v,
            Bound::Within(lo, hi) => {
                if v > 0.0 && (hi / v).ln().abs() < (v / lo).ln().abs() {
                    hi
                } else {
                    lo
                }
            }
        }
    }

    /// Relative distance to failure; negative when violated.
    fn margin(&self, v: f64) -> f64 {
        if !v.is_finite() {
            return f64::NEG_INFINITY;
        }
        match *self {
            Bound::AtMost(b) => rel_log(b, v),
            Bound::Above(b) => rel_log(v, b),
            Bound::Within(lo, hi) => rel_log(hi, v).min(rel_log(v, lo)),
            Bound::Report => f64::INFINITY,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Bound::AtMost(b) => format!("<= {b:.3e}"),
            Bound::Above(b) => format!("> {b:.3e}"),
            Bound::Within(lo, hi) => format!("in [{lo}, {hi}]"),
            Bound::Report => "reported".into(),
        }
    }
}

/// `log(a / b)` when both are positive, otherwise the sign of `a - b`.
fn rel_log(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        (a / b).ln()
    } else {
        (a - b).signum() * 1e300
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub label: String,
    pub measured: f64,
    pub bound: Bound,
}

impl Part {
    pub fn new(label: impl Into<String>, measured: f64, bound: Bound) -> Self {
        Self { label: label.into(), measured, bound }
    }

    /// A boolean condition recorded as `1` (holds) or `0`.
    pub fn flag(label: impl Into<String>, holds: bool) -> Self {
        Self::new(label, if holds { 1.0 } else { 0.0 }, Bound::Above(0.5))
    }

    pub fn pass(&self) -> bool {
        self.bound == Bound::Report || (self.measured.is_finite() && self.bound.holds(self.measured))
    }

    pub fn render(&self) -> String {
        format!(
            "{}: {:.4e} {} [{}]",
            self.label,
            self.measured,
            self.bound.describe(),
            if self.pass() { "ok" } else { "FAIL" }
        )
    }
}

/// Result of one criterion or one pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub parts: Vec<Part>,
    /// Set when a computation failed outright.
    pub error: Option<String>,
    pub blowup: bool,
}

impl Outcome {
    pub fn push(&mut self, part: Part) {
        self.parts.push(part);
    }

    pub fn failed(err: &RunError) -> Self {
        Self { parts: Vec::new(), error: Some(err.to_string()), blowup: err.is_blowup() }
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.parts.is_empty() && self.parts.iter().all(Part::pass)
    }

    /// The first failing part, or else the one closest to failing.
    pub fn headline(&self) -> Option<&Part> {
        if let Some(p) = self.parts.iter().find(|p| !p.pass()) {
            return Some(p);
        }
        self.parts
            .iter()
            .min_by(|a, b| a.bound.margin(a.measured).total_cmp(&b.bound.margin(b.measured)))
    }

    pub fn detail(&self) -> String {
        let mut items: Vec<String> = self.parts.iter().map(Part::render).collect();
        if let Some(e) = &self.error {
            items.push(format!("error: {e}"));
        }
        items.join("; ")
    }
}
