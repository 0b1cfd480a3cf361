//! Scenario configuration: a TOML file with `[section]` headers and
//! `key = value` lines. Missing keys take their defaults, unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use hsl_core::grid::ModelParams;
use hsl_core::timegrid::TimeGrid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable overriding `numerics.quad_rel_tol`.
pub const QUAD_TOL_ENV: &str = "HSL_QUAD_TOL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub mu: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub length: f64,
    pub size: usize,
    pub k: usize,
    pub ell: usize,
    pub strict: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelParams::default();
        Self {
            n: m.n,
            mu: m.mu,
            gamma: m.gamma,
            lambda: m.lambda,
            length: m.length,
            size: m.size,
            k: m.k,
            ell: m.ell,
            strict: m.strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// Hierarchy order.
    pub p: usize,
    pub seed: u64,
    /// Generated data lives on modes `|q|_∞ <= field_radius`.
    pub field_radius: usize,
    /// Target `|w₊|_k`.
    pub a_plus: f64,
    /// Target `|ψ₊|_ℓ`.
    pub b_plus: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { p: 1, seed: 1, field_radius: 2, a_plus: 1.0, b_plus: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    /// The hierarchy grid spans `[1, hier_t_max]`.
    pub hier_t_max: f64,
    pub hier_steps_per_decade: usize,
    /// The run grid spans `[run_t_min, last t0]` in octaves of the first t0.
    pub run_t_min: f64,
    pub run_steps_per_octave: usize,
    pub t0_sequence: Vec<f64>,
    pub transport_substeps: usize,
    pub aux_substeps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            hier_t_max: 1e5,
            hier_steps_per_decade: 64,
            run_t_min: 1.0,
            run_steps_per_octave: 16,
            t0_sequence: vec![50.0, 100.0, 200.0, 400.0],
            transport_substeps: 1,
            aux_substeps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub quad_rel_tol: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self { quad_rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("hsl-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    /// Transport: compare `V` from data at `t_max` and `t_max/2`.
    pub richardson: bool,
    /// Wave operator: also run the γ = 0.4 nonconvergence control.
    pub negative_control: bool,
    /// Hierarchy and transport: run the gauge checks.
    pub gauge_suite: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { richardson: true, negative_control: true, gauge_suite: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub scenario: ScenarioSection,
    pub time: TimeSection,
    pub numerics: NumericsSection,
    pub output: OutputSection,
    pub toggles: Toggles,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn serialize(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::parse(&text)
    }

    /// Applies [`QUAD_TOL_ENV`] when set.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(QUAD_TOL_ENV) {
            let tol: f64 = v.trim().parse().map_err(|_| ConfigError::Invalid(format!("{QUAD_TOL_ENV}={v} is not a number")))?;
            self.numerics.quad_rel_tol = tol;
            self.validate()?;
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            n: m.n,
            mu: m.mu,
            gamma: m.gamma,
            lambda: m.lambda,
            length: m.length,
            size: m.size,
            k: m.k,
            ell: m.ell,
            strict: m.strict,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let s = &self.scenario;
        if !(s.a_plus > 0.0 && s.a_plus.is_finite()) {
            return bad(format!("a_plus must be positive, got {}", s.a_plus));
        }
        if !(s.b_plus >= 0.0 && s.b_plus.is_finite()) {
            return bad(format!("b_plus must be non-negative, got {}", s.b_plus));
        }
        if s.seed > i64::MAX as u64 {
            return bad(format!("seed must not exceed {}", i64::MAX));
        }
        let t = &self.time;
        if !(t.hier_t_max > 10.0) {
            return bad(format!("hier_t_max must exceed 10, got {}", t.hier_t_max));
        }
        if t.hier_steps_per_decade == 0 || t.run_steps_per_octave == 0 {
            return bad("steps per decade and per octave must be positive".into());
        }
        if t.transport_substeps == 0 || t.aux_substeps == 0 {
            return bad("substeps must be positive".into());
        }
        if !(t.run_t_min >= 1.0) {
            return bad(format!("run_t_min must be at least 1, got {}", t.run_t_min));
        }
        if t.t0_sequence.is_empty() {
            return bad("t0_sequence must not be empty".into());
        }
        for w in t.t0_sequence.windows(2) {
            if !(w[1] > w[0]) {
                return bad("t0_sequence must be strictly increasing".into());
            }
        }
        let first = t.t0_sequence[0];
        if !(first >= t.run_t_min) {
            return bad(format!("t0 = {first} lies below run_t_min = {}", t.run_t_min));
        }
        for &t0 in &t.t0_sequence {
            let octaves = (t0 / first).log2();
            if (octaves - octaves.round()).abs() > 1e-9 {
                return bad(format!("t0 = {t0} is not an octave multiple of {first}"));
            }
        }
        if *t.t0_sequence.last().expect("nonempty") > t.hier_t_max {
            return bad("the last t0 exceeds hier_t_max".into());
        }
        if !(self.numerics.quad_rel_tol > 0.0 && self.numerics.quad_rel_tol < 1e-2) {
            return bad(format!("quad_rel_tol must lie in (0, 1e-2), got {}", self.numerics.quad_rel_tol));
        }
        Ok(())
    }

    pub fn hierarchy_time(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::decades(1.0, self.time.hier_t_max, self.time.hier_steps_per_decade)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Octave grid through every t0, ending at the last one.
    pub fn run_time(&self) -> Result<TimeGrid, ConfigError> {
        let t = &self.time;
        let last = *t.t0_sequence.last().expect("validated");
        TimeGrid::octaves(t.t0_sequence[0], t.run_t_min, last, t.run_steps_per_octave)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ScenarioConfig::default();
        let text = cfg.serialize().unwrap();
        assert_eq!(ScenarioConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ScenarioConfig::parse("[model]\ngamma = 0.75\n\n[scenario]\nseed = 9\n").unwrap();
        assert_eq!(cfg.model.gamma, 0.75);
        assert_eq!(cfg.scenario.seed, 9);
        assert_eq!(cfg.time, TimeSection::default());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = ScenarioConfig::parse("[model]\ngamma = 0.6\nbogus_key = 3\n").unwrap_err().to_string();
        assert!(err.contains("bogus_key"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_section_is_rejected() {
        let err = ScenarioConfig::parse("[extras]\nx = 1\n").unwrap_err().to_string();
        assert!(err.contains("extras"), "{err}");
    }

    #[test]
    fn gamma_out_of_range() {
        let err = ScenarioConfig::parse("[model]\ngamma = 1.5\n").unwrap_err().to_string();
        assert!(err.contains("gamma must lie in (0,1]"), "{err}");
    }

    #[test]
    fn t0_sequence_checks() {
        assert!(ScenarioConfig::parse("[time]\nt0_sequence = [100.0, 50.0]\n").is_err());
        assert!(ScenarioConfig::parse("[time]\nt0_sequence = [50.0, 120.0]\n").is_err());
        let cfg = ScenarioConfig::parse("[time]\nt0_sequence = [62.5, 125.0, 250.0, 500.0, 1000.0]\n").unwrap();
        let tg = cfg.run_time().unwrap();
        assert_eq!(tg.t_max(), 1000.0);
        assert!(tg.index_of(62.5).is_ok());
    }

    #[test]
    fn type_mismatch_is_a_parse_error() {
        assert!(matches!(ScenarioConfig::parse("[scenario]\np = \"one\"\n"), Err(ConfigError::Parse(_))));
    }
}
