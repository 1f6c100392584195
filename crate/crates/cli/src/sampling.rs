//! Monte Carlo estimates of the density variances over the phase-space
//! Gaussian, used as an oracle for the closed forms.

use chainsim_core::gaussian::GaussianChainState;
use chainsim_core::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Samples drawn per independent RNG stream.
const CHUNK: usize = 50_000;

/// Sampled variance of `n(k)` and `g(k)` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledVariance {
    pub k: f64,
    pub var_n: f64,
    pub se_n: f64,
    pub var_g: f64,
    pub se_g: f64,
}

#[derive(Clone)]
struct Sums {
    // per k: Σ|G − μ|², Σ|G − μ|⁴ for n and g
    s2: Vec<[f64; 2]>,
    s4: Vec<[f64; 2]>,
}

impl Sums {
    fn zero(len: usize) -> Self {
        Sums { s2: vec![[0.0; 2]; len], s4: vec![[0.0; 2]; len] }
    }

    fn merge(mut self, other: Sums) -> Sums {
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            a[0] += b[0];
            a[1] += b[1];
        }
        for (a, b) in self.s4.iter_mut().zip(&other.s4) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self
    }
}

/// Draw `samples` phase-space points and estimate `⟨|G − ⟨G⟩|²⟩` for the
/// number and momentum densities, centred on the given exact means.
///
/// Chunks use separate ChaCha streams and are summed in order, so the result
/// depends only on `seed`.
pub fn sample_density_variances(
    state: &GaussianChainState,
    k_grid: &[f64],
    mean_n: &[Complex64],
    mean_g: &[Complex64],
    samples: usize,
    seed: u64,
) -> Result<Vec<SampledVariance>> {
    let n = state.len();
    let l = state.phase_space_covariance().cholesky()?;
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut sums = Sums::zero(k_grid.len());
            let mut z = vec![0.0; 2 * n];
            let mut x = vec![0.0; 2 * n];
            for _ in 0..count {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = l.row(i)[..=i].iter().zip(&z).map(|(a, b)| a * b).sum();
                }
                for (ik, &k) in k_grid.iter().enumerate() {
                    let mut nk = Complex64::new(0.0, 0.0);
                    let mut gk = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        let e = Complex64::from_polar(1.0, k * (state.q[j] + x[j]));
                        nk += e;
                        gk += (state.p[j] + x[j + n]) * e;
                    }
                    for (slot, d) in [(nk - mean_n[ik]).norm_sqr(), (gk - mean_g[ik]).norm_sqr()].into_iter().enumerate() {
                        sums.s2[ik][slot] += d;
                        sums.s4[ik][slot] += d * d;
                    }
                }
            }
            sums
        })
        .collect();
    let total = partial.into_iter().fold(Sums::zero(k_grid.len()), Sums::merge);
    let s = samples as f64;
    Ok(k_grid
        .iter()
        .enumerate()
        .map(|(ik, &k)| {
            let est = |slot: usize| {
                let var = total.s2[ik][slot] / s;
                (var, ((total.s4[ik][slot] / s - var * var) / s).sqrt())
            };
            let (var_n, se_n) = est(0);
            let (var_g, se_g) = est(1);
            SampledVariance { k, var_n, se_n, var_g, se_g }
        })
        .collect())
}
