//! Randomized invariants of the grid, the gauge metric, the physical map and
//! snapshots.

use std::sync::OnceLock;

use hsl_core::grid::{Grid, ModelParams, PhaseField, ProfileField};
use hsl_core::scattering::{gauge_equiv, lambda_map};
use hsl_core::snapshot::Snapshot;
use proptest::prelude::*;

fn grid() -> &'static Grid {
    static G: OnceLock<Grid> = OnceLock::new();
    G.get_or_init(|| Grid::new(ModelParams::default()).unwrap())
}

fn profile(seed: u64, radius: usize, norm: f64) -> ProfileField {
    grid().random_band_limited(seed, radius, norm, 0).unwrap()
}

fn phase(seed: u64, radius: usize, norm: f64) -> PhaseField {
    grid().random_band_limited_real(seed, radius, norm, 0).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_round_trip(seed in any::<u64>(), r in 1usize..=5) {
        let g = grid();
        let w = profile(seed, r, 1.0);
        let back = g.inverse(&g.forward(&w.values));
        let err = w.values.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), r in 1usize..=5) {
        let g = grid();
        let w = profile(seed, r, 2.0);
        let once = g.project(&w);
        let twice = g.project(&once);
        prop_assert!(g.l2(&once.sub(&twice)) < 1e-12);
    }

    #[test]
    fn free_flow_is_unitary_and_reversible(seed in any::<u64>(), ta in 1.0f64..100.0, tb in 1.0f64..100.0) {
        let g = grid();
        let w = profile(seed, 4, 1.0);
        let moved = g.free_flow(&w, ta, tb);
        prop_assert!(close(g.l2(&moved), g.l2(&w), 1e-12));
        prop_assert!(g.l2(&g.free_flow(&moved, tb, ta).sub(&w)) < 1e-12);
    }

    #[test]
    fn gauge_metric_is_a_pseudometric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let g = grid();
        let (wa, wb, wc) = (profile(a, 3, 1.0), profile(b, 3, 1.0), profile(c, 3, 1.0));
        let (pa, pb, pc) = (phase(a ^ 1, 3, 0.5), phase(b ^ 1, 3, 0.5), phase(c ^ 1, 3, 0.5));
        let ab = gauge_equiv(g, &wa, &pa, &wb, &pb).unwrap();
        let ba = gauge_equiv(g, &wb, &pb, &wa, &pa).unwrap();
        let bc = gauge_equiv(g, &wb, &pb, &wc, &pc).unwrap();
        let ac = gauge_equiv(g, &wa, &pa, &wc, &pc).unwrap();
        prop_assert!(gauge_equiv(g, &wa, &pa, &wa, &pa).unwrap() == 0.0);
        prop_assert!(close(ab, ba, 1e-14));
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn common_rotation_is_a_gauge_move(seed in any::<u64>(), s in any::<u64>()) {
        let g = grid();
        let w = profile(seed, 3, 1.0);
        let phi = phase(seed ^ 7, 3, 0.5);
        let sigma = phase(s, 4, 3.0);
        let moved = gauge_equiv(g, &w, &phi, &w.rotated(&sigma, 1.0), &phi.add(&sigma)).unwrap();
        prop_assert!(moved < 1e-12);
    }

    #[test]
    fn physical_map_preserves_l2(seed in any::<u64>(), t in 1.0f64..1e4) {
        let g = grid();
        let w = profile(seed, 4, 1.0);
        let phi = phase(seed ^ 3, 4, 1.0);
        let u = lambda_map(g, &w, &phi, t).unwrap();
        let mass = (u.cell_volume * u.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
        prop_assert!(close(mass, g.l2(&w), 1e-12));
    }

    #[test]
    fn snapshot_round_trip(seed in any::<u64>()) {
        let g = grid();
        let w = profile(seed, 4, 1.0);
        let phi = phase(seed, 4, 1.0);
        let mut buf = Vec::new();
        Snapshot::from_profile(g, &w).write_to(&mut buf).unwrap();
        prop_assert_eq!(Snapshot::read_from(buf.as_slice()).unwrap().into_profile(g).unwrap(), w);
        buf.clear();
        Snapshot::from_phase(g, &phi).write_to(&mut buf).unwrap();
        prop_assert_eq!(Snapshot::read_from(buf.as_slice()).unwrap().into_phase(g).unwrap(), phi);
    }
}
