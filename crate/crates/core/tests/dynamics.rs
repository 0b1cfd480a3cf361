//! End-to-end checks of the hierarchy, transport and auxiliary system on
//! small runs.

use hsl_core::auxsys::{local_wave_op, mass_drift, prepare, AuxConfig};
use hsl_core::grid::{Grid, ModelParams, PhaseField};
use hsl_core::hierarchy::solve_hierarchy;
use hsl_core::scattering::gauge_equiv;
use hsl_core::timegrid::TimeGrid;
use hsl_core::transport::TransportConfig;

fn grid(lambda: f64) -> Grid {
    Grid::new(ModelParams { lambda, ..ModelParams::default() }).unwrap()
}

#[test]
fn zero_coupling_is_free_flow() {
    let g = grid(0.0);
    let w = g.random_band_limited(5, 3, 1.0, 4).unwrap();
    let zero = PhaseField::zeros(g.len());
    let hier = TimeGrid::decades(1.0, 1e4, 16).unwrap();
    let tg = TimeGrid::octaves(64.0, 1.0, 64.0, 8).unwrap();
    let data = prepare(&g, &w, &zero, 1, &hier, &tg, &TransportConfig::default(), false).unwrap();
    let run = local_wave_op(&g, &data, 64.0, &AuxConfig::default()).unwrap();
    for (j, t) in run.traj.grid().nodes().into_iter().enumerate() {
        assert!(run.traj.phi.fields[j].max_abs() == 0.0);
        let free = g.free_flow(&w, 64.0, t);
        assert!(g.l2(&run.traj.w.fields[j].sub(&free)) < 1e-12, "t = {t}");
    }
}

#[test]
fn leading_phase_is_linear_in_coupling() {
    let hier = TimeGrid::decades(1.0, 1e3, 16).unwrap();
    let (g1, g2) = (grid(1.0), grid(3.0));
    let w = g1.random_band_limited(2, 2, 1.0, 4).unwrap();
    let h1 = solve_hierarchy(&g1, &w, 0, &hier).unwrap();
    let h2 = solve_hierarchy(&g2, &w, 0, &hier).unwrap();
    for j in [0, 10, 40] {
        let (a, b) = (h1.phi(0, j), h2.phi(0, j));
        assert!(g1.l2_real(&b.sub(&a.scaled(3.0))) <= 1e-12 * g1.l2_real(b));
    }
}

#[test]
fn local_run_conserves_mass_and_respects_gauge() {
    let g = grid(10.0);
    let w = g.random_band_limited(3, 2, 1.0, 4).unwrap();
    let psi = g.random_band_limited_real(4, 2, 0.1, 3).unwrap();
    let hier = TimeGrid::decades(1.0, 1e4, 32).unwrap();
    let tg = TimeGrid::octaves(128.0, 1.0, 128.0, 8).unwrap();
    let tcfg = TransportConfig::default();
    let a = prepare(&g, &w, &psi, 1, &hier, &tg, &tcfg, false).unwrap();
    let run_a = local_wave_op(&g, &a, 128.0, &AuxConfig::default()).unwrap();
    assert!(run_a.blowup.is_none());
    assert!(mass_drift(&g, &run_a.traj) < 1e-10);

    // (w₊, ψ₊) and (w₊ e^{-iψ₊}, 0) describe the same asymptotics
    let b = prepare(&g, &w.rotated(&psi, -1.0), &PhaseField::zeros(g.len()), 1, &hier, &tg, &tcfg, false).unwrap();
    let run_b = local_wave_op(&g, &b, 128.0, &AuxConfig::default()).unwrap();
    let (ta, tb) = (&run_a.traj, &run_b.traj);
    for j in 0..ta.grid().len() {
        let d = gauge_equiv(&g, &ta.w.fields[j], &ta.phi.fields[j], &tb.w.fields[j], &tb.phi.fields[j]).unwrap();
        assert!(d < 1e-6, "gauge metric {d} at t = {}", ta.grid().t(j));
    }
}
