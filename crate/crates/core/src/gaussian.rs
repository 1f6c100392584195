//! Gaussian chain states: construction, exact evolution of first and second
//! moments, the closed-form correlation coefficients of the infinite chain and
//! the bound-chain equilibrium limits.
//!
//! `σ(A, B)` is the symmetrized covariance `½⟨AB + BA⟩ − ⟨A⟩⟨B⟩`. The block
//! `Σqp[n, m]` holds `σ(q_n, p_m)` and is not symmetric in general.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// inherent float methods shadow these when std is linked (tests)
#[allow(unused_imports)]
use num_traits::Float;

use crate::chain::{
    evolve_means, mean_energy, normal_mode_frequencies, propagator_row, ChainParams, ChainSize, Indexing,
    PropagatorKind, PropagatorOptions, PropagatorRow, WEAK_COUPLING_LIMIT,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::specfun::{bessel_j_integral_orders, bessel_j_orders};

/// Relative slack on the per-site uncertainty bound, for round-off in inputs.
const UNCERTAINTY_SLACK: f64 = 1e-12;

/// Second moments of the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// Full `N × N` blocks of a finite chain.
    Dense { qq: Matrix, qp: Matrix, pp: Matrix },
    /// Entries with `|n − m| ≤ width` stored row by row; zero beyond. Width 0
    /// is the uncorrelated product descriptor.
    Banded { width: usize, qq: Vec<f64>, qp: Vec<f64>, pp: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChainState {
    pub params: ChainParams,
    /// Site index of the first array element.
    pub origin: i64,
    pub time: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub covariance: Covariance,
    /// Initial widths vary along the chain.
    pub slowly_varying: bool,
}

impl GaussianChainState {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn site(&self, i: usize) -> i64 {
        self.origin + i as i64
    }

    /// `q̄_i − b_i`.
    pub fn displacement(&self, i: usize) -> f64 {
        self.q[i] - self.params.site(self.site(i))
    }

    pub fn is_product(&self) -> bool {
        matches!(self.covariance, Covariance::Banded { width: 0, .. })
    }

    fn banded(&self, block: &[f64], width: usize, n: usize, m: usize) -> f64 {
        let d = m as i64 - n as i64;
        if d.unsigned_abs() as usize > width {
            0.0
        } else {
            block[n * (2 * width + 1) + (d + width as i64) as usize]
        }
    }

    pub fn sigma_qq(&self, n: usize, m: usize) -> f64 {
        match &self.covariance {
            Covariance::Dense { qq, .. } => qq[(n, m)],
            Covariance::Banded { width, qq, .. } => self.banded(qq, *width, n, m),
        }
    }

    /// `σ(q_n, p_m)`.
    pub fn sigma_qp(&self, n: usize, m: usize) -> f64 {
        match &self.covariance {
            Covariance::Dense { qp, .. } => qp[(n, m)],
            Covariance::Banded { width, qp, .. } => self.banded(qp, *width, n, m),
        }
    }

    pub fn sigma_pp(&self, n: usize, m: usize) -> f64 {
        match &self.covariance {
            Covariance::Dense { pp, .. } => pp[(n, m)],
            Covariance::Banded { width, pp, .. } => self.banded(pp, *width, n, m),
        }
    }

    /// `(Δq_n)²`.
    pub fn dq2(&self, n: usize) -> f64 {
        self.sigma_qq(n, n)
    }

    /// `(Δp_n)²`.
    pub fn dp2(&self, n: usize) -> f64 {
        self.sigma_pp(n, n)
    }

    /// Largest `|n − m|` with possibly nonzero covariance, ignoring ring wrap.
    pub fn correlation_width(&self) -> usize {
        match &self.covariance {
            Covariance::Dense { .. } => self.len().saturating_sub(1),
            Covariance::Banded { width, .. } => *width,
        }
    }

    /// Covariance of `(q_1..q_N, p_1..p_N)` as one `2N × 2N` matrix.
    pub fn phase_space_covariance(&self) -> Matrix {
        let n = self.len();
        Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.sigma_qq(i, j),
            (true, false) => self.sigma_qp(i, j - n),
            (false, true) => self.sigma_qp(j, i - n),
            (false, false) => self.sigma_pp(i - n, j - n),
        })
    }

    /// Williamson symplectic eigenvalues, ascending, one per degree of freedom.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        if let Covariance::Banded { width: 0, .. } = self.covariance {
            let mut out: Vec<f64> = (0..self.len())
                .map(|i| {
                    let s = self.sigma_qp(i, i);
                    (self.dq2(i) * self.dp2(i) - s * s).max(0.0).sqrt()
                })
                .collect();
            out.sort_by(f64::total_cmp);
            return Ok(out);
        }
        symplectic_eigenvalues(&self.phase_space_covariance())
    }

    /// Whether every symplectic eigenvalue equals `ħ/2` within `tol` (relative).
    pub fn is_pure(&self, tol: f64) -> Result<bool> {
        let half = 0.5 * self.params.hbar;
        Ok(self.symplectic_eigenvalues()?.iter().all(|v| (v - half).abs() <= tol * half))
    }

    /// `⟨H⟩` of a finite ring: the first-moment energy plus the covariance part.
    pub fn expected_energy(&self) -> Result<f64> {
        let n = self.params.len().ok_or(Error::UnsupportedTopology)?;
        let (m, k, nu2) = (self.params.mass, self.params.binding, self.params.coupling);
        let mut e = mean_energy(&self.params, self.origin, &self.q, &self.p)?;
        for j in 0..n {
            let l = (j + n - 1) % n;
            e += self.dp2(j) / (2.0 * m) + 0.5 * k * self.dq2(j);
            e += 0.5 * nu2 * (self.dq2(j) + self.dq2(l) - 2.0 * self.sigma_qq(j, l));
        }
        Ok(e)
    }
}

/// Symplectic eigenvalues of a `2N × 2N` covariance ordered `(q.., p..)`.
///
/// These are the square roots of the eigenvalues of `Σ^{1/2} Jᵀ Σ J Σ^{1/2}`,
/// each appearing twice.
pub fn symplectic_eigenvalues(sigma: &Matrix) -> Result<Vec<f64>> {
    let dim = sigma.rows();
    if dim % 2 != 0 || sigma.cols() != dim {
        return Err(Error::Shape { expected: dim + dim % 2, got: sigma.cols() });
    }
    let n = dim / 2;
    let (vals, vecs) = sigma.symmetric_eigen()?;
    if vals.first().map_or(false, |&v| v < -1e-12 * vals.last().unwrap().abs()) {
        return Err(Error::InvalidState("covariance is not positive semidefinite".into()));
    }
    let sqrt_vals: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let half = Matrix::from_fn(dim, dim, |i, j| {
        (0..dim).map(|k| vecs[(i, k)] * sqrt_vals[k] * vecs[(j, k)]).sum()
    });
    // Jᵀ Σ J for J = [[0, 1], [−1, 0]] swaps the q and p blocks
    let swapped = Matrix::from_fn(dim, dim, |i, j| {
        let (si, sj) = ((i + n) % dim, (j + n) % dim);
        let sign = if (i < n) == (j < n) { 1.0 } else { -1.0 };
        sign * sigma[(si, sj)]
    });
    let m = half.matmul(&swapped)?.matmul(&half)?;
    let sym = Matrix::from_fn(dim, dim, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let (ev, _) = sym.symmetric_eigen()?;
    Ok(ev.chunks(2).map(|pair| 0.5 * (pair[0].max(0.0).sqrt() + pair[1].max(0.0).sqrt())).collect())
}

/// Per-site widths of an uncorrelated state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductWidths {
    pub dq2: Vec<f64>,
    pub dp2: Vec<f64>,
    pub sqp: Vec<f64>,
}

impl ProductWidths {
    pub fn uniform(len: usize, dq2: f64, dp2: f64, sqp: f64) -> Self {
        ProductWidths { dq2: vec![dq2; len], dp2: vec![dp2; len], sqp: vec![sqp; len] }
    }

    /// Single-site ground-state widths `ħ/(2mΩ)`, `ħmΩ/2`.
    pub fn ground(params: &ChainParams, len: usize) -> Self {
        let w = params.big_omega();
        let m = params.mass;
        Self::uniform(len, params.hbar / (2.0 * m * w), params.hbar * m * w / 2.0, 0.0)
    }

    fn is_uniform(&self) -> bool {
        let same = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        same(&self.dq2) && same(&self.dp2) && same(&self.sqp)
    }

    /// Widths at site array index `i`, continued by the edge values outside.
    fn clamped(&self, i: i64) -> (f64, f64, f64) {
        let last = self.dq2.len() as i64 - 1;
        let k = i.clamp(0, last) as usize;
        (self.dq2[k], self.dp2[k], self.sqp[k])
    }
}

/// Uncorrelated Gaussian state with given first moments and per-site widths.
///
/// For a finite chain the arrays cover the whole ring and `origin` must be 0.
pub fn product_state(
    params: &ChainParams,
    origin: i64,
    q: Vec<f64>,
    p: Vec<f64>,
    widths: ProductWidths,
) -> Result<GaussianChainState> {
    params.validate()?;
    let len = q.len();
    for got in [p.len(), widths.dq2.len(), widths.dp2.len(), widths.sqp.len()] {
        if got != len {
            return Err(Error::Shape { expected: len, got });
        }
    }
    if let ChainSize::Finite(n) = params.size {
        if n != len {
            return Err(Error::Shape { expected: n, got: len });
        }
        if origin != 0 {
            return Err(Error::InvalidState("finite-chain states start at site 0".into()));
        }
    }
    let bound = 0.25 * params.hbar * params.hbar;
    for i in 0..len {
        let (a, b, s) = (widths.dq2[i], widths.dp2[i], widths.sqp[i]);
        if !(a > 0.0 && b > 0.0 && s.is_finite()) {
            return Err(Error::InvalidState(format!("site {i} needs positive finite widths")));
        }
        let det = a * b - s * s;
        if det < bound * (1.0 - UNCERTAINTY_SLACK) {
            return Err(Error::Uncertainty { site: i, det, bound });
        }
    }
    let slowly_varying = !widths.is_uniform();
    Ok(GaussianChainState {
        params: *params,
        origin,
        time: 0.0,
        q,
        p,
        covariance: Covariance::Banded { width: 0, qq: widths.dq2, qp: widths.sqp, pp: widths.dp2 },
        slowly_varying,
    })
}

/// Complex normal-mode amplitudes `Q_α`, `K_α`, stored for `α = 1..=N` at
/// index `α − 1`, with `q_n = b_n + N^{-1/2} Σ_α e^{2πiαn/N} Q_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitudes {
    pub q: Vec<Complex64>,
    pub k: Vec<Complex64>,
}

impl ModeAmplitudes {
    pub fn zero(n: usize) -> Self {
        ModeAmplitudes { q: vec![Complex64::new(0.0, 0.0); n], k: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Amplitudes of real site displacements `u_n` and momenta `p_n`.
    pub fn from_site_profile(u: &[f64], p: &[f64]) -> Result<Self> {
        if u.len() != p.len() {
            return Err(Error::Shape { expected: u.len(), got: p.len() });
        }
        let n = u.len();
        let norm = 1.0 / (n as f64).sqrt();
        let transform = |x: &[f64]| -> Vec<Complex64> {
            (1..=n)
                .map(|alpha| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (site, &v) in x.iter().enumerate() {
                        let phase = -2.0 * PI * ((alpha * site) % n) as f64 / n as f64;
                        acc += Complex64::from_polar(v, phase);
                    }
                    acc * norm
                })
                .collect()
        };
        Ok(ModeAmplitudes { q: transform(u), k: transform(p) })
    }

    /// Real site profiles; the anti-Hermitian part of the amplitudes drops out.
    pub fn to_site_profile(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.q.len();
        let norm = 1.0 / (n as f64).sqrt();
        let back = |amps: &[Complex64]| -> Vec<f64> {
            (0..n)
                .map(|site| {
                    let mut acc = 0.0;
                    for (i, a) in amps.iter().enumerate() {
                        let alpha = i + 1;
                        let phase = 2.0 * PI * ((alpha * site) % n) as f64 / n as f64;
                        acc += (a * Complex64::from_polar(1.0, phase)).re;
                    }
                    acc * norm
                })
                .collect()
        };
        (back(&self.q), back(&self.k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentOptions {
    /// For `K = 0`, modes within this circular distance of `α = N` are left
    /// out of both covariance sums.
    pub cluster_half_width: usize,
}

impl Default for CoherentOptions {
    fn default() -> Self {
        CoherentOptions { cluster_half_width: 1 }
    }
}

/// Nonzero zero-mode amplitude dropped while building a `K = 0` coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroModeWarning {
    pub q: Complex64,
    pub k: Complex64,
}

/// Coherent state of every normal mode, displaced by `amplitudes`.
pub fn normal_mode_coherent_state(
    params: &ChainParams,
    amplitudes: &ModeAmplitudes,
    options: CoherentOptions,
) -> Result<(GaussianChainState, Option<ZeroModeWarning>)> {
    let spectrum = normal_mode_frequencies(params)?;
    let n = spectrum.len();
    for got in [amplitudes.q.len(), amplitudes.k.len()] {
        if got != n {
            return Err(Error::Shape { expected: n, got });
        }
    }
    let excluded = |alpha: usize| -> bool {
        if params.is_bound() {
            return false;
        }
        let d = alpha % n;
        d.min(n - d) <= options.cluster_half_width
    };
    let mut amps = amplitudes.clone();
    let mut warning = None;
    if !params.is_bound() {
        let (q0, k0) = (amps.q[n - 1], amps.k[n - 1]);
        if q0.norm() > 0.0 || k0.norm() > 0.0 {
            warning = Some(ZeroModeWarning { q: q0, k: k0 });
        }
        amps.q[n - 1] = Complex64::new(0.0, 0.0);
        amps.k[n - 1] = Complex64::new(0.0, 0.0);
    }
    let (u, p) = amps.to_site_profile();
    let q: Vec<f64> = u.iter().enumerate().map(|(i, v)| params.site(i as i64) + v).collect();

    let hbar = params.hbar;
    let m = params.mass;
    let mut lag_qq = vec![0.0; n];
    let mut lag_pp = vec![0.0; n];
    for (lag, (lq, lp)) in lag_qq.iter_mut().zip(lag_pp.iter_mut()).enumerate() {
        for alpha in 1..=n {
            if excluded(alpha) {
                continue;
            }
            let w = spectrum.omega(alpha);
            let c = (2.0 * PI * ((alpha * lag) % n) as f64 / n as f64).cos();
            *lq += hbar / (2.0 * m * w) * c;
            *lp += 0.5 * hbar * m * w * c;
        }
        *lq /= n as f64;
        *lp /= n as f64;
    }
    let qq = Matrix::from_fn(n, n, |i, j| lag_qq[(i + n - j) % n]);
    let pp = Matrix::from_fn(n, n, |i, j| lag_pp[(i + n - j) % n]);
    let state = GaussianChainState {
        params: *params,
        origin: 0,
        time: 0.0,
        q,
        p,
        covariance: Covariance::Dense { qq, qp: Matrix::zeros(n, n), pp },
        slowly_varying: false,
    };
    Ok((state, warning))
}

/// Rows `(q-part, p-part)` of the linear map taking initial displacements and
/// momenta to `q_n(t)` and `p_n(t)`, as functions of the relative index.
struct LinearMap<'a> {
    row: &'a PropagatorRow,
    m: f64,
    big: f64,
}

impl LinearMap<'_> {
    #[inline]
    fn q(&self, rel: i64) -> (f64, f64) {
        (self.row.f(rel), self.row.g(rel) / (self.m * self.big))
    }

    #[inline]
    fn p(&self, rel: i64) -> (f64, f64) {
        (self.m * self.row.f_dot(rel), self.row.g_dot(rel) / self.big)
    }
}

/// State at the row's time, evolved exactly from `state` at `t = 0`.
///
/// A finite chain with a periodic row uses the dense map `Σ(t) = S Σ(0) Sᵀ`.
/// A windowed row needs an uncorrelated initial state; sites outside the
/// window continue the edge widths.
pub fn evolve_state(state: &GaussianChainState, row: &PropagatorRow) -> Result<GaussianChainState> {
    if state.time != 0.0 {
        return Err(Error::InvalidState("evolution starts from a t = 0 state".into()));
    }
    let (q, p) = evolve_means(&state.params, row, state.origin, &state.q, &state.p)?;
    let covariance = match row.indexing {
        Indexing::Periodic(n) => {
            if n != state.len() {
                return Err(Error::Shape { expected: n, got: state.len() });
            }
            dense_evolution(state, row)?
        }
        Indexing::Window(w) => {
            if !state.is_product() {
                return Err(Error::UnsupportedRepresentation("windowed evolution of a correlated state"));
            }
            windowed_evolution(state, row, w)
        }
    };
    Ok(GaussianChainState {
        params: state.params,
        origin: state.origin,
        time: row.time,
        q,
        p,
        covariance,
        slowly_varying: state.slowly_varying,
    })
}

fn dense_evolution(state: &GaussianChainState, row: &PropagatorRow) -> Result<Covariance> {
    let n = state.len();
    let map = LinearMap { row, m: state.params.mass, big: state.params.big_omega() };
    let s = Matrix::from_fn(2 * n, 2 * n, |i, j| {
        let (site, src) = (i % n, j % n);
        let rel = src as i64 - site as i64;
        let (u, p) = if i < n { map.q(rel) } else { map.p(rel) };
        if j < n { u } else { p }
    });
    let sigma = state.phase_space_covariance();
    let out = s.matmul(&sigma)?.matmul(&s.transpose())?;
    Ok(Covariance::Dense {
        qq: Matrix::from_fn(n, n, |i, j| 0.5 * (out[(i, j)] + out[(j, i)])),
        qp: Matrix::from_fn(n, n, |i, j| out[(i, j + n)]),
        pp: Matrix::from_fn(n, n, |i, j| 0.5 * (out[(i + n, j + n)] + out[(j + n, i + n)])),
    })
}

fn windowed_evolution(state: &GaussianChainState, row: &PropagatorRow, reach: usize) -> Covariance {
    let len = state.len();
    let widths = match &state.covariance {
        Covariance::Banded { qq, qp, pp, .. } => {
            ProductWidths { dq2: qq.clone(), dp2: pp.clone(), sqp: qp.clone() }
        }
        Covariance::Dense { .. } => unreachable!("checked by caller"),
    };
    let map = LinearMap { row, m: state.params.mass, big: state.params.big_omega() };
    let width = (2 * reach).min(len.saturating_sub(1));
    let stride = 2 * width + 1;
    let mut qq = vec![0.0; len * stride];
    let mut qp = vec![0.0; len * stride];
    let mut pp = vec![0.0; len * stride];
    let reach = reach as i64;
    for n in 0..len {
        for d in -(width as i64)..=(width as i64) {
            let m = n as i64 + d;
            if m < 0 || m >= len as i64 {
                continue;
            }
            let n_ = n as i64;
            let (lo, hi) = (n_.max(m) - reach, n_.min(m) + reach);
            let (mut sqq, mut sqp, mut spp) = (0.0, 0.0, 0.0);
            for r in lo..=hi {
                let (dq2, dp2, s) = widths.clamped(r);
                let (qn_u, qn_p) = map.q(r - n_);
                let (qm_u, qm_p) = map.q(r - m);
                let (pn_u, pn_p) = map.p(r - n_);
                let (pm_u, pm_p) = map.p(r - m);
                sqq += qn_u * qm_u * dq2 + (qn_u * qm_p + qn_p * qm_u) * s + qn_p * qm_p * dp2;
                sqp += qn_u * pm_u * dq2 + (qn_u * pm_p + qn_p * pm_u) * s + qn_p * pm_p * dp2;
                spp += pn_u * pm_u * dq2 + (pn_u * pm_p + pn_p * pm_u) * s + pn_p * pm_p * dp2;
            }
            let slot = n * stride + (d + width as i64) as usize;
            qq[slot] = sqq;
            qp[slot] = sqp;
            pp[slot] = spp;
        }
    }
    Covariance::Banded { width, qq, qp, pp }
}

/// Evolve a homogeneous uncorrelated state with the closed-form coefficients.
pub fn evolve_state_closed_form(
    state: &GaussianChainState,
    kind: PropagatorKind,
    t: f64,
) -> Result<GaussianChainState> {
    if state.time != 0.0 {
        return Err(Error::InvalidState("evolution starts from a t = 0 state".into()));
    }
    let (dq2, dp2, s) = match &state.covariance {
        Covariance::Banded { width: 0, qq, qp, pp } if !state.slowly_varying && !qq.is_empty() => {
            (qq[0], pp[0], qp[0])
        }
        _ => return Err(Error::UnsupportedRepresentation("closed-form evolution of a non-homogeneous state")),
    };
    let row = propagator_row(&state.params, kind, t, PropagatorOptions::default())?;
    let (q, p) = evolve_means(&state.params, &row, state.origin, &state.q, &state.p)?;
    let reach = match row.indexing {
        Indexing::Window(w) => w,
        Indexing::Periodic(_) => {
            return Err(Error::InvalidParams("closed forms exist for the infinite kinds only".into()))
        }
    };
    let len = state.len();
    let width = (2 * reach).min(len.saturating_sub(1));
    let stride = 2 * width + 1;
    let table = CoefficientTable::new(&state.params, kind, t, width)?;
    let mut qq = vec![0.0; len * stride];
    let mut qp = vec![0.0; len * stride];
    let mut pp = vec![0.0; len * stride];
    for n in 0..len {
        for d in -(width as i64)..=(width as i64) {
            let m = n as i64 + d;
            if m < 0 || m >= len as i64 {
                continue;
            }
            // coefficients depend on n − m
            let c = table.get(-d);
            let slot = n * stride + (d + width as i64) as usize;
            qq[slot] = c.a * dq2 + 2.0 * c.e * s + c.d * dp2;
            qp[slot] = c.b * dq2 + (c.a + c.k) * s + c.e * dp2;
            pp[slot] = c.c * dq2 + 2.0 * c.b * s + c.a * dp2;
        }
    }
    Ok(GaussianChainState {
        params: state.params,
        origin: state.origin,
        time: t,
        q,
        p,
        covariance: Covariance::Banded { width, qq, qp, pp },
        slowly_varying: false,
    })
}

/// `a_nm … k_nm` at one lag `n − m` and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub k: f64,
}

pub fn correlation_coefficients(
    params: &ChainParams,
    kind: PropagatorKind,
    lag: i64,
    t: f64,
) -> Result<CorrelationCoefficients> {
    let lag_abs = lag.unsigned_abs() as usize;
    Ok(CoefficientTable::new(params, kind, t, lag_abs)?.get(lag))
}

/// Closed-form coefficients for lags `|n − m| ≤ width` at one time.
struct CoefficientTable {
    kind: PropagatorKind,
    m: f64,
    big: f64,
    omega: f64,
    t: f64,
    /// `J_j` at `4ωt` (simple) or `2γΩt` (bound), `j = 0..=2·width + 3`.
    js: Vec<f64>,
    /// Simple chain: `∫_0^{4ωt} J_j`.
    ints: Vec<f64>,
}

impl CoefficientTable {
    fn new(params: &ChainParams, kind: PropagatorKind, t: f64, width: usize) -> Result<Self> {
        params.validate()?;
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(t, "correlation coefficient time"));
        }
        let (x, ints) = match kind {
            PropagatorKind::InfiniteSimple => {
                if params.is_bound() {
                    return Err(Error::InvalidParams("simple-chain coefficients need K = 0".into()));
                }
                let x = 4.0 * params.omega() * t;
                (x, bessel_j_integral_orders(2 * width + 1, x)?)
            }
            PropagatorKind::InfiniteBound => {
                let gamma = params
                    .gamma()
                    .ok_or_else(|| Error::InvalidParams("bound-chain coefficients need K > 0".into()))?;
                if gamma >= WEAK_COUPLING_LIMIT {
                    return Err(Error::WeakCouplingViolated(gamma));
                }
                (2.0 * gamma * params.big_omega() * t, Vec::new())
            }
            PropagatorKind::FiniteDft => {
                return Err(Error::InvalidParams("closed forms exist for the infinite kinds only".into()))
            }
        };
        Ok(CoefficientTable {
            kind,
            m: params.mass,
            big: params.big_omega(),
            omega: params.omega(),
            t,
            js: bessel_j_orders(2 * width + 3, x)?,
            ints,
        })
    }

    fn j(&self, order: i64) -> f64 {
        let v = self.js[order.unsigned_abs() as usize];
        if order < 0 && order % 2 != 0 { -v } else { v }
    }

    fn get(&self, lag: i64) -> CorrelationCoefficients {
        let delta = |l: i64| if lag == l { 1.0 } else { 0.0 };
        let m = self.m;
        match self.kind {
            PropagatorKind::InfiniteSimple => {
                let w = self.omega;
                let mw = m * w;
                let l2 = 2 * lag;
                let a = 0.5 * (delta(0) + self.j(l2));
                let b = 0.5 * mw * (self.j(l2 - 1) - self.j(l2 + 1));
                let c = 0.5
                    * mw
                    * mw
                    * (self.j(l2 + 2) + self.j(l2 - 2) - 2.0 * self.j(l2) - delta(-1) - delta(1)
                        + 2.0 * delta(0));
                let partial: f64 = (1..=lag.unsigned_abs() as usize).map(|j| self.ints[2 * j - 1]).sum();
                let d = self.t / (2.0 * w * m * m) * (self.ints[0] - self.js[1])
                    - partial / (4.0 * mw * mw);
                let e = self.ints[l2.unsigned_abs() as usize] / (4.0 * mw);
                // from Ω k = d/dt Σ f g − Ω a with ġ_r = Ω f_r
                let k = 0.5 * (self.j(l2) - delta(0));
                CorrelationCoefficients { a, b, c, d, e, k }
            }
            _ => {
                let mw = m * self.big;
                let (s, co) = (2.0 * self.big * self.t - 0.5 * PI * lag as f64).sin_cos();
                let jl = self.j(lag);
                let a = 0.5 * (delta(0) + jl * co);
                let b = -0.5 * mw * jl * s;
                let c = 0.5 * mw * mw * (delta(0) - jl * co);
                let d = c / (mw * mw * mw * mw);
                let e = -b / (mw * mw);
                let k = -c / (mw * mw);
                CorrelationCoefficients { a, b, c, d, e, k }
            }
        }
    }
}

/// Long-time limits of an initially uncorrelated homogeneous bound chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumLimits {
    /// `σ(q_n, q_n)` as `t → ∞`.
    pub qq: f64,
    /// `σ(p_n, p_n)` as `t → ∞`.
    pub pp: f64,
    /// Temperature `kT`.
    pub kt: f64,
}

pub fn equilibrium_limits(params: &ChainParams, dq2: f64, dp2: f64) -> Result<EquilibriumLimits> {
    params.validate()?;
    if !params.is_bound() {
        return Err(Error::NoEquilibrium);
    }
    let mw = params.mass * params.big_omega();
    Ok(EquilibriumLimits {
        qq: 0.5 * (dq2 + dp2 / (mw * mw)),
        pp: 0.5 * (mw * mw * dq2 + dp2),
        kt: (mw * mw * dq2 + dp2) / (2.0 * params.mass),
    })
}

/// Simple-chain late-time growth rate of `(Δq_n)²`: `(Δp)²/(2ωm²)`.
pub fn diffusive_growth_rate(params: &ChainParams, dp2: f64) -> f64 {
    dp2 / (2.0 * params.omega() * params.mass * params.mass)
}
