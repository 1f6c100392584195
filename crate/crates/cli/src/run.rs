//! Scenario execution and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chainsim_core::chain::{
    normal_mode_frequencies, propagator_row, ChainParams, PropagatorKind, PropagatorOptions,
};
use chainsim_core::coarse::{subsection_energy_stats, subsection_momentum_stats, HomogeneousStart, PeakingReport};
use chainsim_core::densities::{decoherence_scan, default_k_grid, density_observables};
use chainsim_core::gaussian::{
    equilibrium_limits, evolve_state, normal_mode_coherent_state, product_state, CoherentOptions,
    GaussianChainState, ModeAmplitudes, ProductWidths,
};
use chainsim_core::hydro::{
    compare_micro_hydro, euler_energy, euler_solve, local_equilibrium_metric, Boundary, EulerFields,
    EulerOptions, Grid, Smearing, SoundScenario,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Analysis, AnalysisKind, ScenarioConfig, StateConfig};
use crate::error::{Context, RunError};
use crate::sampling::sample_density_variances;
use crate::table::{emit_csv, Cell, Table};

/// Stored sites of an infinite-chain state when the config gives no window.
pub const DEFAULT_WINDOW: usize = 128;

/// Largest ring on which the evolve analysis computes symplectic eigenvalues.
const SYMPLECTIC_MAX_SITES: usize = 64;

/// Largest ring accepted by the Monte Carlo check.
const MONTE_CARLO_MAX_SITES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub analysis: AnalysisKind,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    /// Wall-clock seconds per stage.
    pub wall_seconds: BTreeMap<String, f64>,
    /// Scalar results; `null` where undefined.
    pub summary: BTreeMap<String, Option<f64>>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.json";
}

/// SHA-256 of the compact JSON serialization of the config.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex(&Sha256::digest(json.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Run {
    out: PathBuf,
    files: Vec<FileEntry>,
    clock: Instant,
    wall: BTreeMap<String, f64>,
    summary: BTreeMap<String, Option<f64>>,
    warnings: Vec<String>,
}

impl Run {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        *self.wall.entry(stage.into()).or_default() += (now - self.clock).as_secs_f64();
        self.clock = now;
    }

    fn write(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        let path = self.out.join(name);
        emit_csv(table, &path)?;
        let bytes = std::fs::read(&path).map_err(|e| RunError::io(&path, e))?;
        self.files.push(FileEntry { name: name.into(), rows: table.len(), sha256: hex(&Sha256::digest(&bytes)) });
        log::info!("wrote {} ({} rows)", path.display(), table.len());
        Ok(())
    }

    fn note(&mut self, key: &str, value: Option<f64>) {
        self.summary.insert(key.into(), value.filter(|v| v.is_finite()));
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }
}

/// Execute the configured analysis, writing CSV files and `manifest.json`
/// into `out`.
pub fn run_scenario(config: &ScenarioConfig, out: &Path) -> Result<Manifest, RunError> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(|e| RunError::io(out, e))?;
    let mut run = Run {
        out: out.to_path_buf(),
        files: Vec::new(),
        clock: Instant::now(),
        wall: BTreeMap::new(),
        summary: BTreeMap::new(),
        warnings: Vec::new(),
    };
    let params = config.chain_params()?;
    log::info!("running {:?} analysis", config.analysis.kind());
    match &config.analysis {
        Analysis::Modes => modes(&mut run, &params)?,
        Analysis::Evolve => evolve(&mut run, config, &params)?,
        Analysis::Subsection { block, energy } => subsection(&mut run, config, &params, *block, *energy)?,
        Analysis::Densities { k_points, monte_carlo } => {
            densities(&mut run, config, &params, *k_points, *monte_carlo)?
        }
        Analysis::Hydro { .. } => hydro(&mut run, config, &params)?,
        Analysis::Equilibrium { edge } => equilibrium(&mut run, config, &params, *edge)?,
        Analysis::Compare { .. } => compare(&mut run, config, &params)?,
    }
    run.lap("analysis");
    let manifest = Manifest {
        analysis: config.analysis.kind(),
        config_sha256: config_hash(config),
        seed: config.seed,
        files: run.files,
        wall_seconds: run.wall,
        summary: run.summary,
        warnings: run.warnings,
    };
    let path = out.join(Manifest::FILE_NAME);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| RunError::io(&path, e))?;
    Ok(manifest)
}

/// Propagator kind matching the chain topology.
pub fn propagator_kind(params: &ChainParams) -> PropagatorKind {
    if params.len().is_some() {
        PropagatorKind::FiniteDft
    } else if params.is_bound() {
        PropagatorKind::InfiniteBound
    } else {
        PropagatorKind::InfiniteSimple
    }
}

/// Homogeneous widths and drift of a product-type state config.
fn homogeneous_start(state: &StateConfig, params: &ChainParams) -> Option<HomogeneousStart> {
    match *state {
        StateConfig::Ground { dq2_scale, drift, .. } => {
            let g = ProductWidths::ground(params, 1);
            Some(HomogeneousStart { dq2: dq2_scale * g.dq2[0], dp2: g.dp2[0], sqp: 0.0, drift })
        }
        StateConfig::Product { dq2, dp2, sqp, drift, .. } => Some(HomogeneousStart { dq2, dp2, sqp, drift }),
        StateConfig::Coherent { .. } => None,
    }
}

/// The `t = 0` state described by the config.
pub fn initial_state(config: &ScenarioConfig, params: &ChainParams) -> Result<(GaussianChainState, Vec<String>), RunError> {
    if let StateConfig::Coherent { modes, cluster_half_width } = &config.state {
        let n = params.len().ok_or_else(|| RunError::config("state.kind", "coherent states need a finite chain"))?;
        let mut amps = ModeAmplitudes::zero(n);
        for m in modes {
            amps.q[m.alpha - 1] = Complex64::new(m.q[0], m.q[1]);
            amps.k[m.alpha - 1] = Complex64::new(m.k[0], m.k[1]);
        }
        let options = CoherentOptions { cluster_half_width: *cluster_half_width };
        let (state, warning) =
            normal_mode_coherent_state(params, &amps, options).context(|| "building the coherent state".into())?;
        let warnings = warning
            .map(|w| format!("dropped zero-mode amplitudes Q = {}, K = {}", w.q, w.k))
            .into_iter()
            .collect();
        return Ok((state, warnings));
    }
    let start = homogeneous_start(&config.state, params).expect("product-type state");
    let window = match config.state {
        StateConfig::Ground { window, .. } | StateConfig::Product { window, .. } => window,
        StateConfig::Coherent { .. } => None,
    };
    let (len, origin) = match params.len() {
        Some(n) => (n, 0),
        None => {
            let len = window.unwrap_or(DEFAULT_WINDOW);
            (len, -(len as i64 / 2))
        }
    };
    let q = (0..len).map(|i| params.site(origin + i as i64)).collect();
    let p = vec![params.mass * start.drift; len];
    let widths = ProductWidths::uniform(len, start.dq2, start.dp2, start.sqp);
    let state = product_state(params, origin, q, p, widths).map_err(|e| RunError::config("state", e.to_string()))?;
    Ok((state, Vec::new()))
}

/// Exact evolution of `state` to each time, in parallel over times.
pub fn trajectory(state: &GaussianChainState, times: &[f64]) -> Result<Vec<GaussianChainState>, RunError> {
    let params = state.params;
    let kind = propagator_kind(&params);
    times
        .par_iter()
        .map(|&t| {
            let row = propagator_row(&params, kind, t, PropagatorOptions::default())?;
            evolve_state(state, &row)
        })
        .collect::<chainsim_core::Result<Vec<_>>>()
        .context(|| "evolving the initial state".into())
}

fn modes(run: &mut Run, params: &ChainParams) -> Result<(), RunError> {
    let spectrum = normal_mode_frequencies(params).context(|| "normal-mode spectrum".into())?;
    let mut t = Table::new(&["alpha", "omega"]);
    for a in 1..=spectrum.len() {
        t.push(vec![a.into(), spectrum.omega(a).into()]);
    }
    run.lap("compute");
    run.write("modes.csv", &t)
}

fn setup(run: &mut Run, config: &ScenarioConfig, params: &ChainParams) -> Result<GaussianChainState, RunError> {
    let (state, warnings) = initial_state(config, params)?;
    for w in warnings {
        run.warn(w);
    }
    Ok(state)
}

fn evolve(run: &mut Run, config: &ScenarioConfig, params: &ChainParams) -> Result<(), RunError> {
    let state = setup(run, config, params)?;
    let times = config.times().expect("validated");
    let traj = trajectory(&state, &times)?;
    run.lap("evolve");
    let finite = params.len().is_some();
    let e0 = if finite { Some(state.expected_energy().context(|| "initial energy".into())?) } else { None };
    let symplectic = finite && state.len() <= SYMPLECTIC_MAX_SITES;
    let rows: Vec<[Option<f64>; 5]> = traj
        .par_iter()
        .map(|s| {
            let energy = if finite { Some(s.expected_energy()?) } else { None };
            let n = s.len();
            let p_mean: f64 = s.p.iter().sum();
            let mut p_var = 0.0;
            for i in 0..n {
                for j in 0..n {
                    p_var += s.sigma_pp(i, j);
                }
            }
            let (lo, hi) = if symplectic {
                let ev = s.symplectic_eigenvalues()?;
                (ev.first().copied(), ev.last().copied())
            } else {
                (None, None)
            };
            Ok([energy, Some(p_mean), Some(p_var), lo, hi])
        })
        .collect::<chainsim_core::Result<_>>()
        .context(|| "evolve invariants".into())?;
    let mut summary = Table::new(&["t", "energy", "momentum_mean", "momentum_variance", "symplectic_min", "symplectic_max"]);
    for (s, r) in traj.iter().zip(&rows) {
        let mut row = vec![Cell::Float(s.time)];
        row.extend(r.iter().map(|&v| Cell::from(v)));
        summary.push(row);
    }
    let mut sites = Table::new(&["t", "site", "q", "p", "dq2", "dp2", "sqp"]);
    for s in &traj {
        for i in 0..s.len() {
            sites.push(vec![
                s.time.into(),
                s.site(i).into(),
                s.q[i].into(),
                s.p[i].into(),
                s.dq2(i).into(),
                s.dp2(i).into(),
                s.sigma_qp(i, i).into(),
            ]);
        }
    }
    let tol = config.tolerances.invariants;
    let rel_drift = |vals: Vec<f64>, reference: f64| {
        let scale = reference.abs().max(f64::MIN_POSITIVE);
        vals.iter().map(|v| (v - reference).abs() / scale).fold(0.0, f64::max)
    };
    if let Some(e0) = e0 {
        let drift = rel_drift(rows.iter().filter_map(|r| r[0]).collect(), e0);
        run.note("energy_relative_drift", Some(drift));
        if drift > tol {
            run.warn(format!("energy drifts by {drift:e} (relative)"));
        }
    }
    if finite && !params.is_bound() {
        let p0: f64 = state.p.iter().sum();
        let v0: f64 = (0..state.len()).map(|i| state.dp2(i)).sum();
        let dm = rows.iter().map(|r| (r[1].unwrap() - p0).abs()).fold(0.0, f64::max) / p0.abs().max(v0.sqrt());
        let dv = rel_drift(rows.iter().map(|r| r[2].unwrap()).collect(), v0);
        run.note("momentum_mean_drift", Some(dm));
        run.note("momentum_variance_relative_drift", Some(dv));
        if dm.max(dv) > tol {
            run.warn(format!("total momentum drifts (mean {dm:e}, variance {dv:e})"));
        }
    }
    if symplectic {
        let half = 0.5 * params.hbar;
        let initial = state.symplectic_eigenvalues().context(|| "initial symplectic spectrum".into())?;
        let spread = traj
            .iter()
            .map(|s| -> chainsim_core::Result<f64> {
                let ev = s.symplectic_eigenvalues()?;
                Ok(ev.iter().zip(&initial).map(|(a, b)| (a - b).abs() / half).fold(0.0, f64::max))
            })
            .collect::<chainsim_core::Result<Vec<_>>>()
            .context(|| "symplectic spectrum".into())?
            .into_iter()
            .fold(0.0, f64::max);
        run.note("symplectic_drift", Some(spread));
    }
    run.lap("compute");
    run.write("evolve.csv", &summary)?;
    run.write("sites.csv", &sites)
}

fn peaking_table(report: &PeakingReport) -> Table {
    let mut t = Table::new(&["t", "variance", "squared_mean", "ratio"]);
    for i in 0..report.times.len() {
        t.push(vec![
            report.times[i].into(),
            report.variance[i].into(),
            report.squared_mean[i].into(),
            report.ratio[i].into(),
        ]);
    }
    t
}

fn subsection(
    run: &mut Run,
    config: &ScenarioConfig,
    params: &ChainParams,
    block: usize,
    energy: bool,
) -> Result<(), RunError> {
    let times = config.times().expect("validated");
    if let Some(start) = homogeneous_start(&config.state, params) {
        let stats = subsection_momentum_stats(params, propagator_kind(params), start, block, &times)
            .context(|| format!("block momentum, M = {block}"))?;
        let mut t = Table::new(&["t", "variance", "squared_mean", "ratio", "a", "a_fluct", "b", "c"]);
        let (r, c) = (&stats.report, &stats.coefficients);
        for i in 0..r.times.len() {
            t.push(vec![
                r.times[i].into(),
                r.variance[i].into(),
                r.squared_mean[i].into(),
                r.ratio[i].into(),
                c.a[i].into(),
                c.a_fluct[i].into(),
                c.b[i].into(),
                c.c[i].into(),
            ]);
        }
        let n = c.a_fluct.len().max(1) as f64;
        run.note("a_fluct_mean", Some(c.a_fluct.iter().sum::<f64>() / n));
        run.note("a_fluct_max", c.a_fluct.iter().copied().reduce(f64::max));
        run.note("max_ratio", r.max_ratio());
        run.lap("compute");
        run.write("subsection.csv", &t)?;
    }
    if energy {
        let state = setup(run, config, params)?;
        if block > state.len() {
            return Err(RunError::config("analysis.block", "block exceeds the stored sites"));
        }
        let traj = trajectory(&state, &times)?;
        run.lap("evolve");
        let first = (state.len() - block) / 2;
        let report = subsection_energy_stats(&traj, first, block).context(|| format!("block energy, M = {block}"))?;
        run.note("energy_max_ratio", report.max_ratio());
        run.lap("compute");
        run.write("subsection_energy.csv", &peaking_table(&report))?;
    }
    Ok(())
}

fn densities(
    run: &mut Run,
    config: &ScenarioConfig,
    params: &ChainParams,
    k_points: usize,
    monte_carlo: Option<usize>,
) -> Result<(), RunError> {
    let state = setup(run, config, params)?;
    let times = config.times().expect("validated");
    let traj = trajectory(&state, &times)?;
    run.lap("evolve");
    let k_grid = match &config.grids.k {
        Some(spec) => spec.values(),
        None => default_k_grid(traj.last().expect("non-empty time grid"), k_points)
            .context(|| "default k grid".into())?,
    };
    let obs: Vec<_> = traj.par_iter().map(|s| density_observables(s, &k_grid)).collect();
    let scan = decoherence_scan(&traj, &k_grid, config.tolerances.decoherence).context(|| "decoherence scan".into())?;
    let mut t = Table::new(&[
        "t", "k", "n_re", "n_im", "var_n", "ratio_n", "g_re", "g_im", "var_g", "ratio_g", "tau_re", "tau_im",
    ]);
    for (s, o) in traj.iter().zip(&obs) {
        for i in 0..k_grid.len() {
            t.push(vec![
                s.time.into(),
                o.k[i].into(),
                o.mean_n[i].re.into(),
                o.mean_n[i].im.into(),
                o.var_n[i].into(),
                o.ratio_n[i].into(),
                o.mean_g[i].re.into(),
                o.mean_g[i].im.into(),
                o.var_g[i].into(),
                o.ratio_g[i].into(),
                o.mean_tau[i].re.into(),
                o.mean_tau[i].im.into(),
            ]);
        }
    }
    let mut scan_t = Table::new(&["k", "max_ratio"]);
    for (k, r) in scan.k.iter().zip(&scan.max_ratio) {
        scan_t.push(vec![(*k).into(), Some(*r).filter(|r| r.is_finite()).into()]);
    }
    let mut corr = Table::new(&["t", "correlation_length"]);
    for (s, l) in traj.iter().zip(&scan.correlation_length) {
        corr.push(vec![s.time.into(), (*l).into()]);
    }
    run.note("k_crit", scan.k_crit);
    run.note("correlation_length_max", scan.correlation_length.iter().copied().reduce(f64::max));
    run.lap("compute");
    run.write("densities.csv", &t)?;
    run.write("decoherence.csv", &scan_t)?;
    run.write("correlation.csv", &corr)?;
    if let Some(samples) = monte_carlo {
        if params.len().map_or(true, |n| n > MONTE_CARLO_MAX_SITES) {
            return Err(RunError::config(
                "analysis.monte_carlo",
                format!("sampling needs a finite ring of at most {MONTE_CARLO_MAX_SITES} sites"),
            ));
        }
        let first = &traj[0];
        let o = &obs[0];
        let sampled = sample_density_variances(first, &k_grid, &o.mean_n, &o.mean_g, samples, config.seed)
            .context(|| "Monte Carlo sampling".into())?;
        let mut mc = Table::new(&["k", "var_n", "var_n_sampled", "se_n", "var_g", "var_g_sampled", "se_g"]);
        let mut worst = 0.0f64;
        for (i, s) in sampled.iter().enumerate() {
            mc.push(vec![
                s.k.into(),
                o.var_n[i].into(),
                s.var_n.into(),
                s.se_n.into(),
                o.var_g[i].into(),
                s.var_g.into(),
                s.se_g.into(),
            ]);
            for (exact, est, se) in [(o.var_n[i], s.var_n, s.se_n), (o.var_g[i], s.var_g, s.se_g)] {
                if se > 0.0 {
                    worst = worst.max((exact - est).abs() / se);
                }
            }
        }
        run.note("monte_carlo_max_z", Some(worst));
        run.lap("sampling");
        run.write("monte_carlo.csv", &mc)?;
    }
    Ok(())
}

fn hydro(run: &mut Run, config: &ScenarioConfig, params: &ChainParams) -> Result<(), RunError> {
    let Analysis::Hydro { theta0, shift, stretch, velocity, half_width, points, dt } = config.analysis else {
        unreachable!()
    };
    let (m, k) = (params.mass, params.binding);
    let sigma = (theta0 / k).sqrt();
    let l = half_width * sigma;
    let grid = Grid::bounded(-l, l, points).map_err(|e| RunError::config("analysis.points", e.to_string()))?;
    let x = grid.nodes();
    let raw: Vec<f64> = x.iter().map(|&x| (-(x - shift).powi(2) / (2.0 * sigma * sigma * stretch * stretch)).exp()).collect();
    let norm = grid.integrate(&raw);
    let initial = EulerFields {
        time: 0.0,
        f: raw.iter().map(|v| v / norm).collect(),
        v: vec![velocity; points],
        theta: vec![theta0; points],
    };
    let options = EulerOptions { boundary: Boundary::Reflecting, dt, upwind_threshold: 0.3 };
    let times = config.times().expect("validated");
    let fields = euler_solve(&grid, &initial, m, k, &times, options).context(|| "Euler solve".into())?;
    run.lap("solve");
    let mut t = Table::new(&["t", "x", "f", "v", "theta"]);
    let mut s = Table::new(&["t", "mass", "energy", "centroid", "width"]);
    let e0 = euler_energy(&grid, &initial, m, k);
    let mut drift = (0.0f64, 0.0f64);
    for fl in &fields {
        for i in 0..points {
            t.push(vec![fl.time.into(), x[i].into(), fl.f[i].into(), fl.v[i].into(), fl.theta[i].into()]);
        }
        let mass = grid.integrate(&fl.f);
        let xf: Vec<f64> = (0..points).map(|i| x[i] * fl.f[i]).collect();
        let centroid = grid.integrate(&xf) / mass;
        let x2f: Vec<f64> = (0..points).map(|i| (x[i] - centroid).powi(2) * fl.f[i]).collect();
        let width = (grid.integrate(&x2f) / mass).sqrt();
        let energy = euler_energy(&grid, fl, m, k);
        drift.0 = drift.0.max((mass - 1.0).abs());
        drift.1 = drift.1.max((energy - e0).abs() / e0);
        s.push(vec![fl.time.into(), mass.into(), energy.into(), centroid.into(), width.into()]);
    }
    run.note("mass_drift", Some(drift.0));
    run.note("energy_relative_drift", Some(drift.1));
    run.lap("compute");
    run.write("hydro.csv", &t)?;
    run.write("hydro_summary.csv", &s)
}

fn equilibrium(run: &mut Run, config: &ScenarioConfig, params: &ChainParams, edge: usize) -> Result<(), RunError> {
    let state = setup(run, config, params)?;
    let mut times = config.times().expect("validated");
    if times.first() != Some(&0.0) {
        times.insert(0, 0.0);
    }
    let traj = trajectory(&state, &times)?;
    run.lap("evolve");
    let report = local_equilibrium_metric(&traj, edge, config.tolerances.equilibrium)
        .context(|| "local-equilibrium metric".into())?;
    let mut t = Table::new(&["t", "cross", "flatness", "distance"]);
    for m in &report.metrics {
        t.push(vec![m.time.into(), m.cross.into(), m.flatness.into(), Some(m.distance).filter(|d| d.is_finite()).into()]);
    }
    run.note("convergence_time", report.convergence_time);
    if let Some(start) = homogeneous_start(&config.state, params).filter(|_| params.is_bound()) {
        let lim = equilibrium_limits(params, start.dq2, start.dp2).context(|| "equilibrium limits".into())?;
        run.note("limit_qq", Some(lim.qq));
        run.note("limit_pp", Some(lim.pp));
        run.note("kt", Some(lim.kt));
    }
    if !params.is_bound() {
        run.warn("no equilibrium limit for K = 0; distance column left empty".into());
    }
    run.lap("compute");
    run.write("equilibrium.csv", &t)
}

fn compare(run: &mut Run, config: &ScenarioConfig, params: &ChainParams) -> Result<(), RunError> {
    let Analysis::Compare { amplitude, wavelength, smearing_width, nodes_per_site, courant } = config.analysis else {
        unreachable!()
    };
    let mut smearing = Smearing::lattice_default(params.spacing);
    if let Some(w) = smearing_width {
        smearing.width = w;
    }
    let scenario = SoundScenario { params: *params, amplitude, wavelength, smearing, nodes_per_site, courant };
    let times = config.times().unwrap_or_else(|| {
        let period = scenario.acoustic_period();
        (0..=8).map(|i| period * i as f64 / 8.0).collect()
    });
    let report = compare_micro_hydro(&scenario, &times).context(|| "micro-vs-wave comparison".into())?;
    for w in &report.warnings {
        run.warn(w.clone());
    }
    let mut t = Table::new(&["t", "l2", "linf"]);
    for i in 0..report.times.len() {
        t.push(vec![report.times[i].into(), report.l2[i].into(), report.linf[i].into()]);
    }
    run.note("sound_speed", Some(report.sound_speed));
    run.note("measured_speed", report.measured_speed);
    run.note("l2_max", report.l2.iter().copied().reduce(f64::max));
    run.lap("compute");
    run.write("compare.csv", &t)
}

