//! Coarse-grainings by chain subsections: block momentum `P_M` and block
//! energy `h_M`, with their variances and peaking ratios.

use alloc::string::String;
use alloc::vec::Vec;

// inherent float methods shadow these when std is linked (tests)
#[allow(unused_imports)]
use num_traits::Float;

use crate::chain::{ChainParams, PropagatorKind};
use crate::error::{Error, Result};
use crate::gaussian::{correlation_coefficients, GaussianChainState};

/// Variance, squared mean and their ratio along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakingReport {
    pub label: String,
    pub block: usize,
    pub times: Vec<f64>,
    pub variance: Vec<f64>,
    pub squared_mean: Vec<f64>,
    /// `None` where the squared mean vanishes.
    pub ratio: Vec<Option<f64>>,
}

impl PeakingReport {
    fn new(label: &str, block: usize) -> Self {
        PeakingReport {
            label: label.into(),
            block,
            times: Vec::new(),
            variance: Vec::new(),
            squared_mean: Vec::new(),
            ratio: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, variance: f64, squared_mean: f64) {
        self.times.push(t);
        self.variance.push(variance);
        self.squared_mean.push(squared_mean);
        self.ratio.push(if squared_mean > 0.0 { Some(variance / squared_mean) } else { None });
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.ratio.iter().flatten().copied().reduce(f64::max)
    }
}

/// Block sums of the correlation coefficients at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCoefficients {
    /// `A_M = Σ_{n,m ≤ M} a_nm`.
    pub a: Vec<f64>,
    /// `Ã_M = A_M − M/2`, the part left after removing the static `½δ_nm`.
    pub a_fluct: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumStats {
    pub report: PeakingReport,
    pub coefficients: BlockCoefficients,
}

/// Homogeneous uncorrelated initial widths and a uniform drift `p̄ = m v₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousStart {
    pub dq2: f64,
    pub dp2: f64,
    pub sqp: f64,
    pub drift: f64,
}

/// `Σ_{n,m=1}^{M} x_{n−m}` for a lag function `x`.
fn block_sum(m: usize, mut x: impl FnMut(i64) -> f64) -> f64 {
    let mut s = m as f64 * x(0);
    for l in 1..m as i64 {
        s += (m as i64 - l) as f64 * (x(l) + x(-l));
    }
    s
}

/// Block momentum statistics from the closed-form coefficients.
///
/// `(ΔP_M)² = C_M Δq² + 2 B_M σ(q,p) + A_M Δp²`; the mean follows the uniform
/// mode, `⟨P_M⟩ = M m v₀ cos(√(K/m) t)`.
pub fn subsection_momentum_stats(
    params: &ChainParams,
    kind: PropagatorKind,
    start: HomogeneousStart,
    block: usize,
    times: &[f64],
) -> Result<MomentumStats> {
    if block == 0 {
        return Err(Error::InvalidParams("block size must be at least 1".into()));
    }
    let mut report = PeakingReport::new("subsection_momentum", block);
    let mut coeffs = BlockCoefficients { a: Vec::new(), a_fluct: Vec::new(), b: Vec::new(), c: Vec::new() };
    let uniform = (params.binding / params.mass).sqrt();
    for &t in times {
        let table: Vec<_> = (-(block as i64) + 1..block as i64)
            .map(|l| correlation_coefficients(params, kind, l, t))
            .collect::<Result<_>>()?;
        let at = |l: i64| &table[(l + block as i64 - 1) as usize];
        let a = block_sum(block, |l| at(l).a);
        let b = block_sum(block, |l| at(l).b);
        let c = block_sum(block, |l| at(l).c);
        let variance = c * start.dq2 + 2.0 * b * start.sqp + a * start.dp2;
        let mean = block as f64 * params.mass * start.drift * (uniform * t).cos();
        report.push(t, variance, mean * mean);
        coeffs.a.push(a);
        coeffs.a_fluct.push(a - 0.5 * block as f64);
        coeffs.b.push(b);
        coeffs.c.push(c);
    }
    Ok(MomentumStats { report, coefficients: coeffs })
}

/// Simple-chain fluctuating sum `Ã_M(t) = ½ Σ_{n,m ≤ M} J_{2n−2m}(4ωt)`.
pub fn fluctuating_block_sum(params: &ChainParams, block: usize, t: f64) -> Result<f64> {
    let x = 4.0 * params.omega() * t;
    let js = crate::specfun::bessel_j_orders(2 * block, x)?;
    Ok(0.5 * block_sum(block, |l| js[(2 * l).unsigned_abs() as usize]))
}

fn check_block(state: &GaussianChainState, first: usize, block: usize) -> Result<()> {
    if block == 0 {
        return Err(Error::InvalidParams("block size must be at least 1".into()));
    }
    if first + block > state.len() {
        return Err(Error::Shape { expected: first + block, got: state.len() });
    }
    Ok(())
}

/// Block momentum statistics by direct summation over evolved states.
pub fn subsection_momentum_stats_dense(
    states: &[GaussianChainState],
    first: usize,
    block: usize,
) -> Result<PeakingReport> {
    let mut report = PeakingReport::new("subsection_momentum", block);
    for state in states {
        check_block(state, first, block)?;
        let range = first..first + block;
        let mut variance = 0.0;
        for n in range.clone() {
            for m in range.clone() {
                variance += state.sigma_pp(n, m);
            }
        }
        let mean: f64 = state.p[range].iter().sum();
        report.push(state.time, variance, mean * mean);
    }
    Ok(report)
}

/// Block energy `h_M = Σ_j (p_j²/2m + ½K u_j²)` over evolved Gaussian states.
///
/// Uses the Gaussian fourth-moment identity
/// `σ(X², Y²) = 2σ(X,Y)² + 4X̄Ȳσ(X,Y)`, with the ordering term `−ħ²/2` for the
/// pair `(q_j², p_j²)` of one site.
pub fn subsection_energy_stats(
    states: &[GaussianChainState],
    first: usize,
    block: usize,
) -> Result<PeakingReport> {
    let mut report = PeakingReport::new("subsection_energy", block);
    for state in states {
        check_block(state, first, block)?;
        let params = &state.params;
        if !params.is_bound() {
            return Err(Error::InvalidParams("the block energy proxy needs a bound chain".into()));
        }
        let (m, k, hbar) = (params.mass, params.binding, params.hbar);
        let u: Vec<f64> = (0..state.len()).map(|i| state.displacement(i)).collect();
        let p = &state.p;
        let sq = |s: f64, x: f64, y: f64| 2.0 * s * s + 4.0 * x * y * s;
        let mut variance = 0.0;
        let mut mean = 0.0;
        for j in first..first + block {
            mean += (state.dp2(j) + p[j] * p[j]) / (2.0 * m) + 0.5 * k * (state.dq2(j) + u[j] * u[j]);
            for n in first..first + block {
                let pp = sq(state.sigma_pp(j, n), p[j], p[n]);
                let qq = sq(state.sigma_qq(j, n), u[j], u[n]);
                let mut qp = sq(state.sigma_qp(j, n), u[j], p[n]);
                let mut pq = sq(state.sigma_qp(n, j), u[n], p[j]);
                if j == n {
                    qp -= 0.5 * hbar * hbar;
                    pq -= 0.5 * hbar * hbar;
                }
                variance += pp / (4.0 * m * m) + 0.25 * k * k * qq + k / (4.0 * m) * (qp + pq);
            }
        }
        report.push(state.time, variance, mean * mean);
    }
    Ok(report)
}
