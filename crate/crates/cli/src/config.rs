//! JSON scenario configuration.

use std::path::{Path, PathBuf};

use chainsim_core::chain::ChainParams;
use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub chain: ChainConfig,
    #[serde(default)]
    pub state: StateConfig,
    pub analysis: Analysis,
    #[serde(default)]
    pub grids: Grids,
    /// Output directory; the CLI flag and `CHAINSIM_OUT` take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Seed for the sampling oracles.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Ring size; absent for the infinite chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    pub mass: f64,
    /// Nearest-neighbour coupling `ν²`.
    pub coupling: f64,
    /// Binding `K` to the lattice sites.
    #[serde(default)]
    pub binding: f64,
    #[serde(default)]
    pub spacing: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    /// Product of single-site ground states, with `Δq²` scaled by `dq2_scale`.
    Ground {
        #[serde(default = "one")]
        dq2_scale: f64,
        #[serde(default)]
        drift: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
    },
    /// Uncorrelated homogeneous widths and a uniform drift velocity.
    Product {
        dq2: f64,
        dp2: f64,
        #[serde(default)]
        sqp: f64,
        #[serde(default)]
        drift: f64,
        /// Number of stored sites on an infinite chain.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
    },
    /// Normal-mode coherent state; unlisted modes stay at zero amplitude.
    Coherent {
        #[serde(default)]
        modes: Vec<ModeConfig>,
        #[serde(default = "one_usize")]
        cluster_half_width: usize,
    },
}

impl Default for StateConfig {
    fn default() -> Self {
        StateConfig::Ground { dq2_scale: 1.0, drift: 0.0, window: None }
    }
}

/// Mode `α` (1-based) with complex amplitudes `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub alpha: usize,
    #[serde(default)]
    pub q: [f64; 2],
    #[serde(default)]
    pub k: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Modes,
    Evolve,
    Subsection,
    Densities,
    Hydro,
    Equilibrium,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    Modes,
    Evolve,
    Subsection {
        block: usize,
        /// Also report the block energy (bound chains, evolved states).
        #[serde(default)]
        energy: bool,
    },
    Densities {
        #[serde(default = "default_k_points")]
        k_points: usize,
        /// Monte Carlo check of the variances at the first time.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        monte_carlo: Option<usize>,
    },
    /// Euler system from a displaced or stretched trap profile.
    Hydro {
        #[serde(default = "one")]
        theta0: f64,
        #[serde(default)]
        shift: f64,
        #[serde(default = "one")]
        stretch: f64,
        #[serde(default)]
        velocity: f64,
        /// Half width of the domain in units of the static width `√(θ₀/K)`.
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default = "default_points")]
        points: usize,
        dt: f64,
    },
    Equilibrium {
        #[serde(default)]
        edge: usize,
    },
    /// Microscopic sound wave against the wave equation.
    Compare {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Wavelength in sites.
        #[serde(default = "default_wavelength")]
        wavelength: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smearing_width: Option<f64>,
        #[serde(default = "one_usize")]
        nodes_per_site: usize,
        #[serde(default = "default_courant")]
        courant: f64,
    },
}

impl Analysis {
    pub fn kind(&self) -> AnalysisKind {
        match self {
            Analysis::Modes => AnalysisKind::Modes,
            Analysis::Evolve => AnalysisKind::Evolve,
            Analysis::Subsection { .. } => AnalysisKind::Subsection,
            Analysis::Densities { .. } => AnalysisKind::Densities,
            Analysis::Hydro { .. } => AnalysisKind::Hydro,
            Analysis::Equilibrium { .. } => AnalysisKind::Equilibrium,
            Analysis::Compare { .. } => AnalysisKind::Compare,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<GridSpec>,
}

/// Explicit values or `count` points from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            GridSpec::Values(ref v) => v.clone(),
            GridSpec::Range { start, stop, count, log } => {
                if count == 1 {
                    return vec![start];
                }
                let step = |i: usize| i as f64 / (count - 1) as f64;
                if log {
                    let (a, b) = (start.ln(), stop.ln());
                    (0..count).map(|i| (a + (b - a) * step(i)).exp()).collect()
                } else {
                    (0..count).map(|i| start + (stop - start) * step(i)).collect()
                }
            }
        }
    }

    fn check(&self, path: &str, non_negative: bool) -> Result<(), RunError> {
        if let GridSpec::Range { start, log: true, .. } = *self {
            if !(start > 0.0) {
                return Err(RunError::config(format!("{path}.start"), "log grids need a positive start"));
            }
        }
        let v = self.values();
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(RunError::config(format!("{path}[{i}]"), "grid values must be finite"));
        }
        if let Some(i) = v.windows(2).position(|w| w[1] <= w[0]) {
            return Err(RunError::config(format!("{path}[{}]", i + 1), "grid must be strictly increasing"));
        }
        if non_negative && v.first().is_some_and(|&x| x < 0.0) {
            return Err(RunError::config(format!("{path}[0]"), "grid values must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Peaking-ratio threshold `ε` of the decoherence scan.
    #[serde(default = "default_decoherence")]
    pub decoherence: f64,
    /// Threshold of the local-equilibrium metric.
    #[serde(default = "default_equilibrium")]
    pub equilibrium: f64,
    /// Relative drift of conserved quantities reported as a warning.
    #[serde(default = "default_invariants")]
    pub invariants: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            decoherence: default_decoherence(),
            equilibrium: default_equilibrium(),
            invariants: default_invariants(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_k_points() -> usize {
    40
}
fn default_half_width() -> f64 {
    5.5
}
fn default_points() -> usize {
    221
}
fn default_amplitude() -> f64 {
    0.01
}
fn default_wavelength() -> f64 {
    50.0
}
fn default_courant() -> f64 {
    0.5
}
fn default_decoherence() -> f64 {
    1e-3
}
fn default_equilibrium() -> f64 {
    0.05
}
fn default_invariants() -> f64 {
    1e-10
}

impl ScenarioConfig {
    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            RunError::config(path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn chain_params(&self) -> Result<ChainParams, RunError> {
        let c = &self.chain;
        let bad = |e: chainsim_core::Error| RunError::config("chain", e.to_string());
        let params = match c.sites {
            Some(n) => ChainParams::finite(n, c.mass, c.coupling, c.binding),
            None => ChainParams::infinite(c.mass, c.coupling, c.binding),
        }
        .map_err(bad)?;
        params.with_spacing(c.spacing).and_then(|p| p.with_hbar(c.hbar)).map_err(bad)
    }

    pub fn times(&self) -> Option<Vec<f64>> {
        self.grids.times.as_ref().map(GridSpec::values)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let params = self.chain_params()?;
        if let Some(t) = &self.grids.times {
            t.check("grids.times", true)?;
        }
        if let Some(k) = &self.grids.k {
            k.check("grids.k", true)?;
        }
        let finite = params.len().is_some();
        match &self.state {
            StateConfig::Ground { dq2_scale, window, .. } => {
                if !(*dq2_scale > 0.0) {
                    return Err(RunError::config("state.dq2_scale", "must be positive"));
                }
                check_window(finite, *window)?;
            }
            StateConfig::Product { window, .. } => check_window(finite, *window)?,
            StateConfig::Coherent { modes, .. } => {
                let Some(n) = params.len() else {
                    return Err(RunError::config("state.kind", "coherent states need a finite chain"));
                };
                for (i, m) in modes.iter().enumerate() {
                    if m.alpha == 0 || m.alpha > n {
                        return Err(RunError::config(format!("state.modes[{i}].alpha"), format!("must lie in 1..={n}")));
                    }
                }
            }
        }
        let needs_times = |what: &str| -> Result<(), RunError> {
            if self.grids.times.is_none() {
                return Err(RunError::config("grids.times", format!("{what} needs a time grid")));
            }
            Ok(())
        };
        match &self.analysis {
            Analysis::Modes => {
                if !finite {
                    return Err(RunError::config("chain.sites", "the mode spectrum needs a finite chain"));
                }
            }
            Analysis::Evolve | Analysis::Equilibrium { .. } | Analysis::Densities { .. } => {
                needs_times("this analysis")?;
            }
            Analysis::Subsection { block, energy } => {
                needs_times("subsection")?;
                if *block == 0 {
                    return Err(RunError::config("analysis.block", "must be at least 1"));
                }
                if *energy && !params.is_bound() {
                    return Err(RunError::config("analysis.energy", "the block energy needs K > 0"));
                }
                if matches!(self.state, StateConfig::Coherent { .. }) && !*energy {
                    return Err(RunError::config("state.kind", "closed-form block momentum needs a product state"));
                }
            }
            Analysis::Hydro { theta0, stretch, half_width, points, dt, .. } => {
                needs_times("hydro")?;
                if !params.is_bound() {
                    return Err(RunError::config("chain.binding", "the trapped Euler profile needs K > 0"));
                }
                for (name, v) in [("theta0", theta0), ("stretch", stretch), ("half_width", half_width), ("dt", dt)] {
                    if !(*v > 0.0) {
                        return Err(RunError::config(format!("analysis.{name}"), "must be positive"));
                    }
                }
                if *points < 3 {
                    return Err(RunError::config("analysis.points", "need at least 3 nodes"));
                }
            }
            Analysis::Compare { wavelength, nodes_per_site, courant, .. } => {
                if !finite || !(params.spacing > 0.0) {
                    return Err(RunError::config("chain", "the sound comparison needs a finite ring with spacing > 0"));
                }
                if !(*wavelength > 0.0) {
                    return Err(RunError::config("analysis.wavelength", "must be positive"));
                }
                if *nodes_per_site == 0 {
                    return Err(RunError::config("analysis.nodes_per_site", "must be at least 1"));
                }
                if !(*courant > 0.0 && *courant <= 1.0) {
                    return Err(RunError::config("analysis.courant", "must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

fn check_window(finite: bool, window: Option<usize>) -> Result<(), RunError> {
    match window {
        Some(_) if finite => Err(RunError::config("state.window", "only meaningful on an infinite chain")),
        Some(0) => Err(RunError::config("state.window", "must be at least 1")),
        _ => Ok(()),
    }
}
