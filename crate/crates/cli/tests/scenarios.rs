use std::collections::BTreeMap;
use std::path::Path;

use chainsim::run::config_hash;
use chainsim::{read_csv, run_scenario, Manifest, ScenarioConfig, Table};
use chainsim_core::chain::{propagator_row, ChainParams, PropagatorKind};
use chainsim_core::coarse::subsection_momentum_stats_dense;
use chainsim_core::gaussian::{evolve_state, product_state, ProductWidths};
use sha2::{Digest, Sha256};

fn run(json: &str, dir: &Path) -> Manifest {
    let config = ScenarioConfig::from_json(json).unwrap();
    run_scenario(&config, dir).unwrap()
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap().into_iter().map(|v| v.unwrap()).collect()
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn modes_of_an_eight_site_ring() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(
        r#"{"chain": {"sites": 8, "mass": 2, "coupling": 0.5, "binding": 0.3}, "analysis": {"kind": "modes"}}"#,
        dir.path(),
    );
    assert_eq!(m.files.len(), 1);
    let t = read_csv(&dir.path().join("modes.csv")).unwrap();
    assert_eq!(t.len(), 8);
    let omega = column(&t, "omega");
    for (i, w) in omega.iter().enumerate() {
        let alpha = (i + 1) as f64;
        let s = (std::f64::consts::PI * alpha / 8.0).sin();
        let expect = ((0.3 + 4.0 * 0.5 * s * s) / 2.0f64).sqrt();
        assert!((w - expect).abs() < 1e-14, "alpha {alpha}: {w} vs {expect}");
    }
}

const SUBSECTION: &str = r#"{
    "chain": {"mass": 1, "coupling": 1},
    "state": {"kind": "product", "dq2": 0.8, "dp2": 0.6, "sqp": 0.1},
    "analysis": {"kind": "subsection", "block": 5},
    "grids": {"times": {"start": 0, "stop": 10, "count": 21}}
}"#;

#[test]
fn subsection_closed_form_matches_a_large_ring() {
    let dir = tempfile::tempdir().unwrap();
    run(SUBSECTION, dir.path());
    let t = read_csv(&dir.path().join("subsection.csv")).unwrap();
    assert_eq!(t.len(), 21);
    let times = column(&t, "t");
    let variance = column(&t, "variance");
    let a_fluct = column(&t, "a_fluct");
    assert!((a_fluct[0] - 2.5).abs() < 1e-12);
    // finite ring far from wrap-around at these times
    let n = 200;
    let params = ChainParams::finite(n, 1.0, 1.0, 0.0).unwrap();
    let q = (0..n).map(|i| params.site(i as i64)).collect();
    let state = product_state(&params, 0, q, vec![0.0; n], ProductWidths::uniform(n, 0.8, 0.6, 0.1)).unwrap();
    let states: Vec<_> = times
        .iter()
        .map(|&t| evolve_state(&state, &propagator_row(&params, PropagatorKind::FiniteDft, t, Default::default()).unwrap()).unwrap())
        .collect();
    let dense = subsection_momentum_stats_dense(&states, 97, 5).unwrap();
    for (a, b) in variance.iter().zip(&dense.variance) {
        assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn subsection_fluctuating_sum_long_time_mean() {
    // omega = 1: Ã_5 over t in [20, 100] should oscillate about roughly 0.1
    let dir = tempfile::tempdir().unwrap();
    run(
        r#"{"chain": {"mass": 1, "coupling": 1}, "analysis": {"kind": "subsection", "block": 5},
            "grids": {"times": {"start": 20, "stop": 100, "count": 1601}}}"#,
        dir.path(),
    );
    let a = column(&read_csv(&dir.path().join("subsection.csv")).unwrap(), "a_fluct");
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let max = a.iter().copied().fold(f64::MIN, f64::max);
    assert!(max < 1.0, "max {max}");
    assert!((0.05..=0.2).contains(&mean), "long-time mean {mean}");
}

const DENSITIES: &str = r#"{
    "chain": {"sites": 8, "mass": 1, "coupling": 0.7, "binding": 0.4},
    "state": {"kind": "product", "dq2": 0.3, "dp2": 1.2, "sqp": 0.05, "drift": 0.2},
    "analysis": {"kind": "densities", "monte_carlo": 40000},
    "grids": {"times": [0, 0.5, 3], "k": [0.3, 0.9, 1.6, 2.4, 3.5]},
    "seed": 99
}"#;

#[test]
fn identical_runs_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run(DENSITIES, a.path());
    let mb = run(DENSITIES, b.path());
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, fb);
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.summary, mb.summary);

    let c = tempfile::tempdir().unwrap();
    run(&DENSITIES.replace("\"seed\": 99", "\"seed\": 100"), c.path());
    let fc = csv_files(c.path());
    assert_eq!(fa["densities.csv"], fc["densities.csv"]);
    assert_ne!(fa["monte_carlo.csv"], fc["monte_carlo.csv"]);
}

#[test]
fn monte_carlo_column_agrees_with_formulas() {
    let dir = tempfile::tempdir().unwrap();
    run(DENSITIES, dir.path());
    let t = read_csv(&dir.path().join("monte_carlo.csv")).unwrap();
    for (exact, est, se) in [("var_n", "var_n_sampled", "se_n"), ("var_g", "var_g_sampled", "se_g")] {
        for ((x, y), s) in column(&t, exact).iter().zip(column(&t, est)).zip(column(&t, se)) {
            assert!((x - y).abs() < 4.0 * s, "{exact}: {x} vs {y} (se {s})");
        }
    }
}

#[test]
fn manifest_lists_existing_files_and_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = ScenarioConfig::from_json(DENSITIES).unwrap();
    let m = run_scenario(&config, dir.path()).unwrap();
    let on_disk: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(Manifest::FILE_NAME)).unwrap()).unwrap();
    assert_eq!(on_disk, m);
    assert_eq!(m.config_sha256, config_hash(&config));
    assert_eq!(m.config_sha256.len(), 64);
    assert_eq!(m.seed, 99);
    for f in &m.files {
        let bytes = std::fs::read(dir.path().join(&f.name)).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(digest, f.sha256, "{}", f.name);
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), f.rows + 1);
    }
    assert!(m.wall_seconds.contains_key("evolve"));
    assert!(m.summary.contains_key("k_crit"));
}

#[test]
fn coherent_evolution_keeps_its_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(
        r#"{"chain": {"sites": 16, "mass": 1, "coupling": 1, "binding": 0.5, "spacing": 1},
            "state": {"kind": "coherent", "modes": [{"alpha": 3, "q": [0.4, 0.1], "k": [0, 0.2]}]},
            "analysis": {"kind": "evolve"},
            "grids": {"times": {"start": 0, "stop": 40, "count": 9}}}"#,
        dir.path(),
    );
    assert!(m.summary["energy_relative_drift"].unwrap() < 1e-10);
    assert!(m.summary["symplectic_drift"].unwrap() < 1e-10);
    assert!(m.warnings.is_empty(), "{:?}", m.warnings);
    let t = read_csv(&dir.path().join("evolve.csv")).unwrap();
    for v in column(&t, "symplectic_min").into_iter().chain(column(&t, "symplectic_max")) {
        assert!((v - 0.5).abs() < 1e-10);
    }
    assert_eq!(read_csv(&dir.path().join("sites.csv")).unwrap().len(), 9 * 16);
}

#[test]
fn free_ring_conserves_total_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(
        r#"{"chain": {"sites": 24, "mass": 1.5, "coupling": 0.8},
            "state": {"kind": "product", "dq2": 0.4, "dp2": 2.0, "sqp": 0.3, "drift": 0.7},
            "analysis": {"kind": "evolve"},
            "grids": {"times": [0, 3, 17, 60]}}"#,
        dir.path(),
    );
    assert!(m.summary["momentum_mean_drift"].unwrap() < 1e-10);
    assert!(m.summary["momentum_variance_relative_drift"].unwrap() < 1e-10);
    let t = read_csv(&dir.path().join("evolve.csv")).unwrap();
    for v in column(&t, "momentum_variance") {
        assert!((v - 48.0).abs() < 1e-9);
    }
}

#[test]
fn bound_ring_reaches_the_predicted_temperature() {
    let dir = tempfile::tempdir().unwrap();
    // gamma = 0.05, 20/(gamma Omega) ~ 380
    let m = run(
        r#"{"chain": {"sites": 128, "mass": 1, "coupling": 0.05555555555555555, "binding": 1},
            "state": {"kind": "ground", "dq2_scale": 1.1},
            "analysis": {"kind": "equilibrium"},
            "tolerances": {"equilibrium": 0.05},
            "grids": {"times": {"start": 0, "stop": 1000, "count": 41}}}"#,
        dir.path(),
    );
    let big = (1.0f64 + 2.0 / 18.0).sqrt();
    let (dq2, dp2) = (1.1 / (2.0 * big), big / 2.0);
    let kt = (big * big * dq2 + dp2) / 2.0;
    assert!((m.summary["kt"].unwrap() - kt).abs() < 1e-15);
    let t_conv = m.summary["convergence_time"].unwrap_or(f64::INFINITY);
    assert!(t_conv <= 20.0 / (0.05 * big), "converged at {t_conv}");
    assert_eq!(read_csv(&dir.path().join("equilibrium.csv")).unwrap().len(), 41);
}

#[test]
fn static_trap_profile_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(
        r#"{"chain": {"mass": 1, "coupling": 1, "binding": 1},
            "analysis": {"kind": "hydro", "half_width": 4, "points": 161, "dt": 0.005},
            "grids": {"times": [0, 5, 10]}}"#,
        dir.path(),
    );
    assert!(m.summary["mass_drift"].unwrap() < 1e-12);
    let t = read_csv(&dir.path().join("hydro.csv")).unwrap();
    let f = column(&t, "f");
    let v = column(&t, "v");
    for i in 0..161 {
        assert!((f[2 * 161 + i] - f[i]).abs() < 1e-8);
        assert!(v[2 * 161 + i].abs() < 1e-8);
    }
}

#[test]
fn displaced_profile_oscillates_at_the_trap_frequency() {
    let dir = tempfile::tempdir().unwrap();
    // K/m = 1: the centroid returns after 2 pi
    run(
        r#"{"chain": {"mass": 1, "coupling": 1, "binding": 1},
            "analysis": {"kind": "hydro", "shift": 0.05, "dt": 0.005},
            "grids": {"times": [0, 1.57, 3.14, 6.285]}}"#,
        dir.path(),
    );
    let c = column(&read_csv(&dir.path().join("hydro_summary.csv")).unwrap(), "centroid");
    assert!((c[0] - 0.05).abs() < 1e-3);
    assert!(c[1].abs() < 2e-3);
    assert!((c[2] + 0.05).abs() < 2e-3);
    assert!((c[3] - 0.05).abs() < 2e-3);
}

#[test]
fn sound_wave_comparison_on_the_reference_ring() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(
        r#"{"chain": {"sites": 400, "mass": 1, "coupling": 1, "spacing": 1}, "analysis": {"kind": "compare"}}"#,
        dir.path(),
    );
    let c = m.summary["sound_speed"].unwrap();
    let measured = m.summary["measured_speed"].unwrap();
    assert!((measured - c).abs() < 0.05 * c);
    assert!(m.summary["l2_max"].unwrap() < 0.1);
    assert_eq!(read_csv(&dir.path().join("compare.csv")).unwrap().len(), 9);
}
