use chainsim_core::chain::{propagator_row, ChainParams, Propagator, PropagatorKind};
use chainsim_core::coarse::{
    fluctuating_block_sum, subsection_energy_stats, subsection_momentum_stats,
    subsection_momentum_stats_dense, HomogeneousStart,
};
use chainsim_core::gaussian::{evolve_state, product_state, GaussianChainState, ProductWidths};
use chainsim_core::specfun::bessel_j;
use chainsim_core::Error;
use proptest::prelude::*;

fn drifting(params: &ChainParams, len: usize, dq2: f64, dp2: f64, v0: f64) -> GaussianChainState {
    let q = (0..len).map(|i| params.site(i as i64)).collect();
    let p = vec![params.mass * v0; len];
    product_state(params, 0, q, p, ProductWidths::uniform(len, dq2, dp2, 0.0)).unwrap()
}

#[test]
fn uncorrelated_start_gives_block_size() {
    let params = ChainParams::infinite(1.0, 1.0, 0.0).unwrap();
    let start = HomogeneousStart { dq2: 0.5, dp2: 0.5, sqp: 0.0, drift: 1.0 };
    let stats = subsection_momentum_stats(&params, PropagatorKind::InfiniteSimple, start, 7, &[0.0]).unwrap();
    assert!((stats.coefficients.a[0] - 7.0).abs() < 1e-15);
    assert!((stats.coefficients.a_fluct[0] - 3.5).abs() < 1e-15);
    assert!((stats.report.variance[0] - 3.5).abs() < 1e-14);
    assert!((stats.report.ratio[0].unwrap() - 3.5 / 49.0).abs() < 1e-15);
}

#[test]
fn fluctuating_sum_matches_pairwise_bessel_oracle() {
    let params = ChainParams::infinite(1.0, 1.7, 0.0).unwrap();
    let start = HomogeneousStart { dq2: 1.0, dp2: 1.0, sqp: 0.0, drift: 0.0 };
    let times: Vec<f64> = (0..30).map(|i| 0.37 * i as f64).collect();
    let stats = subsection_momentum_stats(&params, PropagatorKind::InfiniteSimple, start, 5, &times).unwrap();
    for (i, &t) in times.iter().enumerate() {
        let x = 4.0 * params.omega() * t;
        let mut oracle = 0.0;
        for n in 1..=5 {
            for m in 1..=5 {
                oracle += 0.5 * bessel_j(2 * n - 2 * m, x).unwrap();
            }
        }
        assert!((stats.coefficients.a_fluct[i] - oracle).abs() < 1e-13);
        assert!((fluctuating_block_sum(&params, 5, t).unwrap() - oracle).abs() < 1e-13);
        assert!(stats.report.ratio[i].is_none());
    }
}

#[test]
fn dense_and_closed_form_block_variance_agree() {
    let ring = ChainParams::finite(120, 1.0, 1.0, 0.0).unwrap();
    let line = ChainParams::infinite(1.0, 1.0, 0.0).unwrap();
    let (dq2, dp2, v0) = (0.6, 0.8, 0.3);
    let state = drifting(&ring, 120, dq2, dp2, v0);
    let times: Vec<f64> = (0..12).map(|i| 1.5 * i as f64).collect();
    let prop = Propagator::new(&ring, PropagatorKind::FiniteDft, &times, Default::default()).unwrap();
    let states: Vec<_> = prop.rows.iter().map(|r| evolve_state(&state, r).unwrap()).collect();
    let dense = subsection_momentum_stats_dense(&states, 40, 6).unwrap();
    let start = HomogeneousStart { dq2, dp2, sqp: 0.0, drift: v0 };
    let closed = subsection_momentum_stats(&line, PropagatorKind::InfiniteSimple, start, 6, &times).unwrap();
    for i in 0..times.len() {
        assert!((dense.variance[i] - closed.report.variance[i]).abs() < 1e-8, "t={}", times[i]);
        assert!((dense.squared_mean[i] - closed.report.squared_mean[i]).abs() < 1e-10);
    }
}

#[test]
fn full_chain_momentum_variance_is_conserved() {
    let params = ChainParams::finite(24, 1.0, 1.0, 0.0).unwrap();
    let state = drifting(&params, 24, 0.4, 1.1, 0.2);
    let times: Vec<f64> = (0..8).map(|i| 3.1 * i as f64).collect();
    let prop = Propagator::new(&params, PropagatorKind::FiniteDft, &times, Default::default()).unwrap();
    let states: Vec<_> = prop.rows.iter().map(|r| evolve_state(&state, r).unwrap()).collect();
    let rep = subsection_momentum_stats_dense(&states, 0, 24).unwrap();
    for i in 0..times.len() {
        assert!((rep.variance[i] / rep.variance[0] - 1.0).abs() < 1e-10);
        assert!((rep.squared_mean[i] / rep.squared_mean[0] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn block_larger_than_state_is_a_shape_error() {
    let params = ChainParams::finite(6, 1.0, 1.0, 1.0).unwrap();
    let state = drifting(&params, 6, 1.0, 1.0, 0.0);
    assert!(matches!(subsection_momentum_stats_dense(&[state.clone()], 2, 5), Err(Error::Shape { .. })));
    assert!(matches!(subsection_energy_stats(&[state], 0, 7), Err(Error::Shape { .. })));
}

#[test]
fn fluctuating_sum_envelope_decays_as_inverse_square_root() {
    let params = ChainParams::infinite(1.0, 1.0, 0.0).unwrap();
    let omega = params.omega();
    // local maxima of |Ã_5| in windows of 4ωt, fitted on a log-log scale
    let mut points = Vec::new();
    for w in 0..12 {
        let lo = 60.0 * 1.35f64.powi(w);
        let hi = lo + 2.0 * std::f64::consts::PI;
        let mut best: f64 = 0.0;
        for i in 0..=400 {
            let x = lo + (hi - lo) * i as f64 / 400.0;
            best = best.max(fluctuating_block_sum(&params, 5, x / (4.0 * omega)).unwrap().abs());
        }
        points.push((lo.ln(), best.ln()));
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.2, "envelope exponent {slope}");
}

#[test]
fn uncorrelated_energy_variance_is_sum_of_sites() {
    let params = ChainParams::finite(8, 1.0, 0.01, 1.0).unwrap().with_spacing(2.0).unwrap();
    let mut w = ProductWidths::uniform(8, 0.0, 0.0, 0.0);
    for i in 0..8 {
        w.dq2[i] = 0.5 + 0.1 * i as f64;
        w.dp2[i] = 0.7 + 0.05 * i as f64;
        w.sqp[i] = 0.02 * i as f64;
    }
    let q: Vec<f64> = (0..8).map(|i| params.site(i) + 0.1 * i as f64).collect();
    let p: Vec<f64> = (0..8).map(|i| 0.3 - 0.05 * i as f64).collect();
    let state = product_state(&params, 0, q, p, w).unwrap();
    let block = subsection_energy_stats(&[state.clone()], 1, 5).unwrap();
    let sum: f64 = (1..6).map(|j| subsection_energy_stats(&[state.clone()], j, 1).unwrap().variance[0]).sum();
    assert!((block.variance[0] - sum).abs() < 1e-14);
}

#[test]
fn oscillator_ground_state_has_sharp_energy() {
    // ν = 0: each site is an independent oscillator in its ground state
    let params = ChainParams::finite(4, 1.3, 0.0, 2.0).unwrap().with_hbar(0.8).unwrap();
    let q = (0..4).map(|i| params.site(i)).collect();
    let state = product_state(&params, 0, q, vec![0.0; 4], ProductWidths::ground(&params, 4)).unwrap();
    let rep = subsection_energy_stats(&[state], 0, 4).unwrap();
    assert!(rep.variance[0].abs() < 1e-15);
    let expect = 4.0 * 0.5 * 0.8 * params.big_omega();
    assert!((rep.squared_mean[0].sqrt() - expect).abs() < 1e-14);
}

#[test]
fn energy_ratio_scales_inversely_with_block() {
    let params = ChainParams::finite(40, 1.0, 0.02, 1.0).unwrap();
    let g = ProductWidths::ground(&params, 1);
    let q = (0..40).map(|i| params.site(i) + 0.5).collect();
    let state =
        product_state(&params, 0, q, vec![0.2; 40], ProductWidths::uniform(40, 1.5 * g.dq2[0], g.dp2[0], 0.0))
            .unwrap();
    let r1 = subsection_energy_stats(&[state.clone()], 0, 1).unwrap().ratio[0].unwrap();
    for m in [2, 5, 10, 40] {
        let rm = subsection_energy_stats(&[state.clone()], 0, m).unwrap().ratio[0].unwrap();
        assert!((rm * m as f64 / r1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn evolved_energy_ratio_stays_bounded() {
    let params = ChainParams::finite(30, 1.0, 0.05, 1.0).unwrap();
    let g = ProductWidths::ground(&params, 1);
    let q = (0..30).map(|i| params.site(i) + 0.4).collect();
    let state =
        product_state(&params, 0, q, vec![0.0; 30], ProductWidths::uniform(30, 2.0 * g.dq2[0], g.dp2[0], 0.0))
            .unwrap();
    let big = params.big_omega();
    let times: Vec<f64> = (0..=50).map(|i| i as f64 / big).collect();
    let prop = Propagator::new(&params, PropagatorKind::FiniteDft, &times, Default::default()).unwrap();
    let states: Vec<_> = prop.rows.iter().map(|r| evolve_state(&state, r).unwrap()).collect();
    let rep = subsection_energy_stats(&states, 10, 10).unwrap();
    let r0 = rep.ratio[0].unwrap();
    assert!(rep.ratio.iter().all(|r| r.unwrap() < 10.0 * r0), "max {:?} vs {r0}", rep.max_ratio());
}

#[test]
fn energy_proxy_needs_bound_chain() {
    let params = ChainParams::finite(4, 1.0, 1.0, 0.0).unwrap();
    let state = drifting(&params, 4, 1.0, 1.0, 0.0);
    assert!(subsection_energy_stats(&[state], 0, 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coarser_blocks_are_more_peaked(t in 0.0f64..40.0, m1 in 2usize..12, extra in 1usize..12) {
        let params = ChainParams::infinite(1.0, 1.0, 0.0).unwrap();
        let start = HomogeneousStart { dq2: 0.5, dp2: 0.5, sqp: 0.0, drift: 1.0 };
        let m2 = m1 + extra;
        let r = |m| subsection_momentum_stats(&params, PropagatorKind::InfiniteSimple, start, m, &[t])
            .unwrap().report.ratio[0].unwrap();
        prop_assert!(r(m2) <= 1.2 * r(m1));
    }

    #[test]
    fn block_variance_is_nonnegative(t in 0.0f64..60.0, m in 1usize..20) {
        let params = ChainParams::infinite(1.0, 0.03, 1.0).unwrap();
        let start = HomogeneousStart { dq2: 0.4, dp2: 0.9, sqp: 0.1, drift: 0.5 };
        let rep = subsection_momentum_stats(&params, PropagatorKind::InfiniteBound, start, m, &[t]).unwrap();
        prop_assert!(rep.report.variance[0] >= 0.0);
    }
}

#[test]
fn single_site_row_matches_propagator() {
    // block of one reproduces the site variance from a direct row sum
    let params = ChainParams::infinite(1.0, 1.0, 0.0).unwrap();
    let t = 2.5;
    let row = propagator_row(&params, PropagatorKind::InfiniteSimple, t, Default::default()).unwrap();
    let (dq2, dp2) = (0.3, 0.9);
    let mut direct = 0.0;
    for r in -60..=60 {
        direct += (params.mass * row.f_dot(r)).powi(2) * dq2 + (row.g_dot(r) / params.big_omega()).powi(2) * dp2;
    }
    let start = HomogeneousStart { dq2, dp2, sqp: 0.0, drift: 0.0 };
    let rep = subsection_momentum_stats(&params, PropagatorKind::InfiniteSimple, start, 1, &[t]).unwrap();
    assert!((rep.report.variance[0] - direct).abs() < 1e-12);
}
