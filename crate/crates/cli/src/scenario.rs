//! Grids and seeded data built from a configuration.

use hsl_core::grid::{Grid, GridError, PhaseField, ProfileField};

use crate::config::ScenarioConfig;

/// Grid from the config with `gamma` and `lambda` replaced.
pub fn grid_with(cfg: &ScenarioConfig, gamma: f64, lambda: f64) -> Result<Grid, GridError> {
    let mut params = cfg.params();
    params.gamma = gamma;
    params.lambda = lambda;
    Grid::new(params)
}

pub fn grid(cfg: &ScenarioConfig) -> Result<Grid, GridError> {
    Grid::new(cfg.params())
}

/// Norm order of the amplitude data for a hierarchy of order `p`:
/// `k + max(p + 1, 2)`.
pub fn amplitude_norm_order(k: usize, p: usize) -> usize {
    k + (p + 1).max(2)
}

/// `w₊` with `|w₊|_{k + max(p+1, 2)} = a₊` from the config seed, on modes up to
/// `radius`.
pub fn amplitude_data(cfg: &ScenarioConfig, grid: &Grid, p: usize, radius: usize) -> Result<ProfileField, GridError> {
    let k = grid.params().k;
    grid.random_band_limited(cfg.scenario.seed, radius, cfg.scenario.a_plus, amplitude_norm_order(k, p))
}

/// `ψ₊` with `|ψ₊|_{ℓ+1} = b₊`, drawn from the seed after the amplitude's.
pub fn phase_data(cfg: &ScenarioConfig, grid: &Grid, radius: usize) -> Result<PhaseField, GridError> {
    let ell = grid.params().ell as isize;
    grid.random_band_limited_real(cfg.scenario.seed.wrapping_add(1), radius, cfg.scenario.b_plus, ell + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_norms_match_targets() {
        let cfg = ScenarioConfig::default();
        let g = grid(&cfg).unwrap();
        let w = amplitude_data(&cfg, &g, 1, 2).unwrap();
        assert!((g.hk_norm(&w, 4).unwrap() - 1.0).abs() < 1e-12);
        let psi = phase_data(&cfg, &g, 2).unwrap();
        assert!((g.yl_norm(&psi, 3).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn seed_determines_data() {
        let cfg = ScenarioConfig::default();
        let g = grid(&cfg).unwrap();
        assert_eq!(amplitude_data(&cfg, &g, 1, 2).unwrap(), amplitude_data(&cfg, &g, 1, 2).unwrap());
        let mut other = cfg.clone();
        other.scenario.seed = 2;
        assert_ne!(amplitude_data(&cfg, &g, 1, 2).unwrap(), amplitude_data(&other, &g, 1, 2).unwrap());
    }
}
