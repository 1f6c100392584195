//! Fourier-transformed local densities `n(k) = Σ_j e^{ikq_j}`,
//! `g(k) = Σ_j p_j e^{ikq_j}` and the stress `τ(k)` in Gaussian states.
//!
//! Means and variances are phase-space (Wigner) averages, evaluated with the
//! Gaussian characteristic function. Pair sums run only over pairs with
//! nonzero covariance, which is exact.

use alloc::vec::Vec;

use num_complex::Complex64;
// inherent float methods shadow these when std is linked (tests)
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::gaussian::GaussianChainState;

/// Covariances below this (relative to the largest) count as zero.
const SUPPORT_CUTOFF: f64 = 1e-14;

/// Per-`k` means, variances and peaking ratios of the local densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityObservables {
    pub k: Vec<f64>,
    pub mean_n: Vec<Complex64>,
    pub var_n: Vec<f64>,
    pub ratio_n: Vec<Option<f64>>,
    pub mean_g: Vec<Complex64>,
    pub var_g: Vec<f64>,
    pub ratio_g: Vec<Option<f64>>,
    pub mean_tau: Vec<Complex64>,
    /// e-folding length of `|σ(q_n, q_m)|` in `|n − m|`.
    pub correlation_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityStats {
    pub mean: Vec<Complex64>,
    pub variance: Vec<f64>,
    pub ratio: Vec<Option<f64>>,
}

fn ratio(var: f64, mean: Complex64) -> Option<f64> {
    let m2 = mean.norm_sqr();
    if m2 > 0.0 {
        Some(var / m2)
    } else {
        None
    }
}

/// Ordered pairs `(j, n)`, `j ≠ n`, with some nonzero covariance between the sites.
fn correlated_pairs(state: &GaussianChainState) -> Vec<(usize, usize)> {
    let len = state.len();
    let width = state.correlation_width();
    let mut scale = 0.0f64;
    for j in 0..len {
        scale = scale.max(state.dq2(j)).max(state.dp2(j)).max(state.sigma_qp(j, j).abs());
    }
    let cut = SUPPORT_CUTOFF * scale;
    let mut out = Vec::new();
    for j in 0..len {
        for n in j.saturating_sub(width)..(j + width + 1).min(len) {
            if n == j {
                continue;
            }
            let live = state.sigma_qq(j, n).abs() > cut
                || state.sigma_qp(j, n).abs() > cut
                || state.sigma_qp(n, j).abs() > cut
                || state.sigma_pp(j, n).abs() > cut;
            if live {
                out.push((j, n));
            }
        }
    }
    out
}

/// `⟨e^{ikq_j}⟩ = exp(ik q̄_j − ½k² Δq_j²)` for every site.
fn characteristic(state: &GaussianChainState, k: f64) -> Vec<Complex64> {
    (0..state.len())
        .map(|j| (Complex64::new(-0.5 * k * k * state.dq2(j), k * state.q[j])).exp())
        .collect()
}

/// Mean and variance of `n(k)` on each grid point.
///
/// `(Δn)² = Σ_{jn} ⟨e^{ikq_j}⟩⟨e^{−ikq_n}⟩ (e^{k² σ(q_j,q_n)} − 1)`.
pub fn number_density_stats(state: &GaussianChainState, k_grid: &[f64]) -> DensityStats {
    let pairs = correlated_pairs(state);
    number_stats_with(state, k_grid, &pairs)
}

fn number_stats_with(state: &GaussianChainState, k_grid: &[f64], pairs: &[(usize, usize)]) -> DensityStats {
    let mut out = DensityStats { mean: Vec::new(), variance: Vec::new(), ratio: Vec::new() };
    for &k in k_grid {
        let e = characteristic(state, k);
        let k2 = k * k;
        let mean: Complex64 = e.iter().sum();
        let mut var = 0.0;
        for j in 0..state.len() {
            var += e[j].norm_sqr() * (k2 * state.dq2(j)).exp_m1();
        }
        for &(j, n) in pairs {
            var += (e[j] * e[n].conj()).re * (k2 * state.sigma_qq(j, n)).exp_m1();
        }
        out.mean.push(mean);
        out.variance.push(var);
        out.ratio.push(ratio(var, mean));
    }
    out
}

/// Mean and variance of `g(k)` on each grid point.
///
/// With `L = k(q_j − q_n)`, each pair contributes
/// `⟨e^{iL}⟩[(p̄_j + i σ(p_j,L))(p̄_n + i σ(p_n,L)) + σ(p_j,p_n)] − ⟨G_j⟩⟨G_n⟩*`,
/// which regroups into the `A + B + C` terms with
/// `σ(q_n − q_j, p_n) = σ(q_n,p_n) − σ(q_j,p_n)`.
pub fn momentum_density_stats(state: &GaussianChainState, k_grid: &[f64]) -> DensityStats {
    let pairs = correlated_pairs(state);
    momentum_stats_with(state, k_grid, &pairs)
}

fn momentum_stats_with(state: &GaussianChainState, k_grid: &[f64], pairs: &[(usize, usize)]) -> DensityStats {
    let i = Complex64::i();
    let mut out = DensityStats { mean: Vec::new(), variance: Vec::new(), ratio: Vec::new() };
    for &k in k_grid {
        let e = characteristic(state, k);
        let tilt: Vec<Complex64> =
            (0..state.len()).map(|j| state.p[j] + i * k * state.sigma_qp(j, j)).collect();
        let mean: Complex64 = tilt.iter().zip(&e).map(|(a, b)| a * b).sum();
        let term = |j: usize, n: usize| -> f64 {
            let w = (k * k * state.sigma_qq(j, n)).exp();
            let a = state.p[j] + i * k * (state.sigma_qp(j, j) - state.sigma_qp(n, j));
            let b = state.p[n] + i * k * (state.sigma_qp(j, n) - state.sigma_qp(n, n));
            let full = w * (a * b + state.sigma_pp(j, n));
            (e[j] * e[n].conj() * (full - tilt[j] * tilt[n].conj())).re
        };
        let mut var = 0.0;
        for j in 0..state.len() {
            var += term(j, j);
        }
        for &(j, n) in pairs {
            var += term(j, n);
        }
        out.mean.push(mean);
        out.variance.push(var);
        out.ratio.push(ratio(var, mean));
    }
    out
}

/// Second difference of the mean displacements, `Δ²u_j`, closing the ring on
/// a finite chain and continuing the end values on a window.
fn second_difference(state: &GaussianChainState, j: usize) -> f64 {
    let len = state.len();
    let ring = state.params.len().is_some();
    let u = |i: usize| state.displacement(i);
    let (prev, next) = match (j, ring) {
        (0, true) => (u(len - 1), u(1 % len)),
        (_, true) if j + 1 == len => (u(j - 1), u(0)),
        (0, false) => (0.0, if len > 1 { u(1) } else { 0.0 }),
        (_, false) if j + 1 == len => (u(j - 1), 0.0),
        _ => (u(j - 1), u(j + 1)),
    };
    prev - 2.0 * u(j) + next
}

fn neighbour_qq(state: &GaussianChainState, j: usize, step: i64) -> f64 {
    let len = state.len() as i64;
    let ring = state.params.len().is_some();
    let n = j as i64 + step;
    if ring {
        state.sigma_qq(j, n.rem_euclid(len) as usize)
    } else if (0..len).contains(&n) {
        state.sigma_qq(j, n as usize)
    } else {
        0.0
    }
}

/// `C_j = Δp_j²/m + ν²[σ(q_{j+1},q_j) − 2Δq_j² + σ(q_j,q_{j−1})]`.
pub fn stress_coefficients(state: &GaussianChainState) -> Vec<f64> {
    let (m, nu2) = (state.params.mass, state.params.coupling);
    (0..state.len())
        .map(|j| {
            state.dp2(j) / m
                + nu2 * (neighbour_qq(state, j, 1) - 2.0 * state.dq2(j) + neighbour_qq(state, j, -1))
        })
        .collect()
}

/// Long-wavelength stress mean
/// `⟨τ(k)⟩ = Σ_j [(p̄_j + ikσ(q_j,p_j))²/m + C_j + (ν²/ik) Δ²u_j] ⟨e^{ikq_j}⟩`.
///
/// At `k = 0` the `1/ik` term is replaced by its limit `ν² Σ_j Δ²u_j u_j`
/// (the constant part of the expansion vanishes by summation).
pub fn stress_mean(state: &GaussianChainState, k_grid: &[f64]) -> Vec<Complex64> {
    let i = Complex64::i();
    let m = state.params.mass;
    let nu2 = state.params.coupling;
    let c = stress_coefficients(state);
    let d2: Vec<f64> = (0..state.len()).map(|j| second_difference(state, j)).collect();
    k_grid
        .iter()
        .map(|&k| {
            let e = characteristic(state, k);
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..state.len() {
                let v = state.p[j] + i * k * state.sigma_qp(j, j);
                s += (v * v / m + c[j]) * e[j];
                if k != 0.0 {
                    s += nu2 * d2[j] * e[j] / (i * k);
                } else {
                    s += nu2 * d2[j] * state.displacement(j);
                }
            }
            s
        })
        .collect()
}

/// e-folding length of `|σ(q_n, q_{n+l})|` in the lag `l`, in sites.
///
/// The lag profile is averaged over the stored sites and interpolated linearly
/// between the last lag above `1/e` of the zero-lag value and the first below.
pub fn correlation_length_sites(state: &GaussianChainState) -> f64 {
    let len = state.len();
    let ring = state.params.len().is_some();
    let max_lag = if ring { len / 2 } else { state.correlation_width().min(len.saturating_sub(1)) };
    let profile = |l: usize| -> f64 {
        let mut s = 0.0;
        let mut count = 0usize;
        for j in 0..len {
            let n = j + l;
            if ring {
                s += state.sigma_qq(j, n % len).abs();
            } else if n < len {
                s += state.sigma_qq(j, n).abs();
            } else {
                continue;
            }
            count += 1;
        }
        if count == 0 {
            0.0
        } else {
            s / count as f64
        }
    };
    let c0 = profile(0);
    let target = c0 * (-1.0f64).exp();
    let mut prev = c0;
    for l in 1..=max_lag {
        let c = profile(l);
        if c < target {
            return (l - 1) as f64 + (prev - target) / (prev - c);
        }
        prev = c;
    }
    if max_lag == 0 {
        1.0 - (-1.0f64).exp()
    } else {
        max_lag as f64
    }
}

/// Length per site for converting lags: `b`, or the rms `Δq` when `b = 0`.
pub fn site_length_scale(state: &GaussianChainState) -> f64 {
    if state.params.spacing > 0.0 {
        state.params.spacing
    } else {
        rms_width(state)
    }
}

fn rms_width(state: &GaussianChainState) -> f64 {
    let len = state.len().max(1);
    ((0..state.len()).map(|j| state.dq2(j)).sum::<f64>() / len as f64).sqrt()
}

pub fn correlation_length(state: &GaussianChainState) -> f64 {
    correlation_length_sites(state) * site_length_scale(state)
}

/// Logarithmic grid from `2π/L` (`L` the stored chain length) to `π/Δq`.
pub fn default_k_grid(state: &GaussianChainState, points: usize) -> Result<Vec<f64>> {
    let length = state.len() as f64 * site_length_scale(state);
    let dq = rms_width(state);
    let (lo, hi) = (2.0 * core::f64::consts::PI / length, core::f64::consts::PI / dq);
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(Error::Grid("no valid k range for this state".into()));
    }
    if points < 2 {
        return Err(Error::Grid("a k grid needs at least two points".into()));
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    Ok((0..points).map(|i| lo * (step * i as f64).exp()).collect())
}

/// All density observables of one state.
pub fn density_observables(state: &GaussianChainState, k_grid: &[f64]) -> DensityObservables {
    let pairs = correlated_pairs(state);
    let n = number_stats_with(state, k_grid, &pairs);
    let g = momentum_stats_with(state, k_grid, &pairs);
    DensityObservables {
        k: k_grid.to_vec(),
        mean_n: n.mean,
        var_n: n.variance,
        ratio_n: n.ratio,
        mean_g: g.mean,
        var_g: g.variance,
        ratio_g: g.ratio,
        mean_tau: stress_mean(state, k_grid),
        correlation_length: correlation_length(state),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceScan {
    pub k: Vec<f64>,
    pub times: Vec<f64>,
    /// Number-density ratio, `surface[t][k]`; `None` where the mean vanishes.
    pub surface: Vec<Vec<Option<f64>>>,
    /// Largest ratio over the trajectory for each `k`.
    pub max_ratio: Vec<f64>,
    /// Largest `k` below which every grid ratio stays under the threshold.
    pub k_crit: Option<f64>,
    pub correlation_length: Vec<f64>,
}

/// Number-density peaking over a trajectory and the critical wavenumber.
///
/// A vanishing mean counts as an infinite ratio.
pub fn decoherence_scan(
    trajectory: &[GaussianChainState],
    k_grid: &[f64],
    threshold: f64,
) -> Result<DecoherenceScan> {
    if k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("k grid must be strictly increasing".into()));
    }
    let mut surface = Vec::with_capacity(trajectory.len());
    let mut lengths = Vec::with_capacity(trajectory.len());
    let mut max_ratio = alloc::vec![0.0f64; k_grid.len()];
    for state in trajectory {
        let stats = number_density_stats(state, k_grid);
        for (m, r) in max_ratio.iter_mut().zip(&stats.ratio) {
            *m = m.max(r.unwrap_or(f64::INFINITY));
        }
        surface.push(stats.ratio);
        lengths.push(correlation_length(state));
    }
    let k_crit = k_grid.iter().zip(&max_ratio).take_while(|(_, r)| **r < threshold).map(|(k, _)| *k).last();
    Ok(DecoherenceScan {
        k: k_grid.to_vec(),
        times: trajectory.iter().map(|s| s.time).collect(),
        surface,
        max_ratio,
        k_crit,
        correlation_length: lengths,
    })
}
