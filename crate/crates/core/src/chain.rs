//! Chain definition, normal-mode spectrum and the propagator coefficient
//! families `f_r(t)`, `g_r(t)` in finite-sum and infinite-chain Bessel form.
//!
//! Displacements are measured from the lattice sites `b_n = n·b`. A finite
//! chain of `N` particles is periodic (`q_{N+1} = q_1`) and indexes its sites
//! `0..N`. An infinite chain is represented by a window of sites starting at an
//! arbitrary origin; sites outside the window are taken to sit at rest on their
//! lattice positions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;


// inherent float methods shadow these when std is linked (tests)
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::specfun::{bessel_j_integral_orders, bessel_j_orders};

/// Bessel forms for the bound chain are trusted below this coupling ratio.
pub const WEAK_COUPLING_LIMIT: f64 = 0.1;

/// Propagator support is truncated once the edge coefficient drops below this.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSize {
    Finite(usize),
    Infinite,
}

/// Physical constants and topology of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub size: ChainSize,
    pub mass: f64,
    /// Nearest-neighbour coupling `ν²`.
    pub coupling: f64,
    /// Harmonic binding `K` to the lattice sites.
    pub binding: f64,
    /// Lattice spacing `b`.
    pub spacing: f64,
    pub hbar: f64,
}

impl ChainParams {
    pub fn finite(n: usize, mass: f64, coupling: f64, binding: f64) -> Result<Self> {
        let params = ChainParams {
            size: ChainSize::Finite(n),
            mass,
            coupling,
            binding,
            spacing: 0.0,
            hbar: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn infinite(mass: f64, coupling: f64, binding: f64) -> Result<Self> {
        let params = ChainParams {
            size: ChainSize::Infinite,
            mass,
            coupling,
            binding,
            spacing: 0.0,
            hbar: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = spacing;
        self.validate()?;
        Ok(self)
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        self.hbar = hbar;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(format!("{what}")));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive and finite");
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return bad("coupling nu^2 must be non-negative");
        }
        if !(self.binding >= 0.0 && self.binding.is_finite()) {
            return bad("binding K must be non-negative");
        }
        if self.coupling == 0.0 && self.binding == 0.0 {
            return bad("nu^2 and K cannot both vanish");
        }
        if !(self.spacing >= 0.0 && self.spacing.is_finite()) {
            return bad("lattice spacing must be non-negative");
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad("hbar must be positive");
        }
        if let ChainSize::Finite(n) = self.size {
            if n == 0 {
                return bad("a finite chain needs at least one particle");
            }
        }
        Ok(())
    }

    pub fn len(&self) -> Option<usize> {
        match self.size {
            ChainSize::Finite(n) => Some(n),
            ChainSize::Infinite => None,
        }
    }

    pub fn is_bound(&self) -> bool {
        self.binding > 0.0
    }

    /// `ω = ν / √m`.
    pub fn omega(&self) -> f64 {
        (self.coupling / self.mass).sqrt()
    }

    /// `Ω = ((K + 2ν²)/m)^{1/2}`.
    pub fn big_omega(&self) -> f64 {
        ((self.binding + 2.0 * self.coupling) / self.mass).sqrt()
    }

    /// `γ = (ω/Ω)²`, defined for the bound chain.
    pub fn gamma(&self) -> Option<f64> {
        if self.is_bound() {
            let r = self.omega() / self.big_omega();
            Some(r * r)
        } else {
            None
        }
    }

    /// Whether the bound-chain Bessel forms apply (`γ < 0.1`).
    pub fn weak_coupling(&self) -> bool {
        self.gamma().map_or(false, |g| g < WEAK_COUPLING_LIMIT)
    }

    /// Lattice site `b_n = n·b`.
    pub fn site(&self, n: i64) -> f64 {
        n as f64 * self.spacing
    }

    /// Long-wavelength sound speed `c = b ν / √m`.
    pub fn sound_speed(&self) -> f64 {
        self.spacing * self.omega()
    }
}

/// Normal-mode frequencies `ω_α`, stored for `α = 1..=N` at index `α - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeSpectrum {
    pub frequencies: Vec<f64>,
    /// Mode labels `α` with `ω_α = 0`.
    pub zero_modes: Vec<usize>,
}

impl NormalModeSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// `ω_α` for `α` in `1..=N`.
    pub fn omega(&self, alpha: usize) -> f64 {
        self.frequencies[alpha - 1]
    }
}

pub fn normal_mode_frequencies(params: &ChainParams) -> Result<NormalModeSpectrum> {
    let n = params.len().ok_or(Error::UnsupportedTopology)?;
    let mut frequencies = Vec::with_capacity(n);
    let mut zero_modes = Vec::new();
    for alpha in 1..=n {
        // α = N maps onto the phase 0 so the zero mode is exact
        let s = (PI * (alpha % n) as f64 / n as f64).sin();
        let w2 = params.binding / params.mass + 4.0 * params.coupling / params.mass * s * s;
        let w = w2.sqrt();
        if w == 0.0 {
            zero_modes.push(alpha);
        }
        frequencies.push(w);
    }
    Ok(NormalModeSpectrum { frequencies, zero_modes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorKind {
    FiniteDft,
    InfiniteSimple,
    InfiniteBound,
}

/// How a row maps a relative index `r` onto its tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indexing {
    /// Relative index taken modulo `N`.
    Periodic(usize),
    /// Relative index in `[-R, R]`, zero outside.
    Window(usize),
}

impl Indexing {
    #[inline]
    fn slot(self, r: i64) -> Option<usize> {
        match self {
            Indexing::Periodic(n) => Some(r.rem_euclid(n as i64) as usize),
            Indexing::Window(w) => {
                if r.unsigned_abs() as usize > w {
                    None
                } else {
                    Some((r + w as i64) as usize)
                }
            }
        }
    }

    pub fn table_len(self) -> usize {
        match self {
            Indexing::Periodic(n) => n,
            Indexing::Window(w) => 2 * w + 1,
        }
    }

    /// Relative indices covered by the tables, in table order.
    pub fn offsets(self) -> impl Iterator<Item = i64> {
        let (lo, hi) = match self {
            Indexing::Periodic(n) => (0, n as i64 - 1),
            Indexing::Window(w) => (-(w as i64), w as i64),
        };
        lo..=hi
    }
}

/// `f_r, g_r` and their time derivatives at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorRow {
    pub time: f64,
    pub indexing: Indexing,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub f_dot: Vec<f64>,
    pub g_dot: Vec<f64>,
}

macro_rules! accessor {
    ($name:ident) => {
        #[inline]
        pub fn $name(&self, r: i64) -> f64 {
            self.indexing.slot(r).map_or(0.0, |i| self.$name[i])
        }
    };
}

impl PropagatorRow {
    accessor!(f);
    accessor!(g);
    accessor!(f_dot);
    accessor!(g_dot);

    /// Largest `|f|` or `|g|` at the window edge; zero for periodic rows.
    pub fn edge_magnitude(&self) -> f64 {
        match self.indexing {
            Indexing::Periodic(_) => 0.0,
            Indexing::Window(w) => {
                let w = w as i64;
                [self.f(w), self.f(-w), self.g(w), self.g(-w)]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorOptions {
    /// Index window `R` for the infinite kinds; chosen from the support when `None`.
    pub window: Option<usize>,
    /// Leave the `ω_α = 0` term out of the finite `g`-sum (centre-of-mass drift).
    pub drop_zero_mode: bool,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions { window: None, drop_zero_mode: false }
    }
}

/// Support edge exceeded the tolerance: `|f_R|` or `|g_R|` at the latest time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    pub window: usize,
    pub edge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub kind: PropagatorKind,
    pub params: ChainParams,
    pub rows: Vec<PropagatorRow>,
    pub truncation: Option<TruncationWarning>,
}

impl Propagator {
    pub fn new(
        params: &ChainParams,
        kind: PropagatorKind,
        times: &[f64],
        options: PropagatorOptions,
    ) -> Result<Self> {
        params.validate()?;
        for &t in times {
            if !t.is_finite() {
                return Err(Error::Domain(t, "propagator time"));
            }
        }
        let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let rows = match kind {
            PropagatorKind::FiniteDft => {
                let builder = FiniteBuilder::new(params, options.drop_zero_mode)?;
                times.iter().map(|&t| builder.row(t)).collect()
            }
            PropagatorKind::InfiniteSimple => {
                if params.is_bound() {
                    return Err(Error::InvalidParams("simple-chain propagator needs K = 0".into()));
                }
                let w = options.window.unwrap_or_else(|| simple_window(params, t_max));
                times.iter().map(|&t| simple_row(params, w, t)).collect::<Result<Vec<_>>>()?
            }
            PropagatorKind::InfiniteBound => {
                let gamma = params.gamma().ok_or_else(|| {
                    Error::InvalidParams("bound-chain propagator needs K > 0".into())
                })?;
                if gamma >= WEAK_COUPLING_LIMIT {
                    return Err(Error::WeakCouplingViolated(gamma));
                }
                let w = options.window.unwrap_or_else(|| bound_window(params, t_max));
                times.iter().map(|&t| bound_row(params, w, t)).collect::<Result<Vec<_>>>()?
            }
        };
        let truncation = rows
            .iter()
            .map(PropagatorRow::edge_magnitude)
            .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))))
            .and_then(|edge| match rows.first().map(|r| r.indexing) {
                Some(Indexing::Window(w)) if edge > SUPPORT_TOLERANCE => {
                    Some(TruncationWarning { window: w, edge })
                }
                _ => None,
            });
        Ok(Propagator { kind, params: *params, rows, truncation })
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.time)
    }

    pub fn row(&self, i: usize) -> &PropagatorRow {
        &self.rows[i]
    }
}

/// Single-time row, convenient when no grid is at hand.
pub fn propagator_row(
    params: &ChainParams,
    kind: PropagatorKind,
    t: f64,
    options: PropagatorOptions,
) -> Result<PropagatorRow> {
    Ok(Propagator::new(params, kind, &[t], options)?.rows.remove(0))
}

/// Smallest `R` with `|J_{2R}(2ωT)| < 1e-12`.
pub fn simple_window(params: &ChainParams, t_max: f64) -> usize {
    let x = 2.0 * params.omega() * t_max;
    smallest_order_below(x, 2) / 2 + 1
}

/// Smallest `R` with `|J_R(γΩT)| < 1e-12`.
pub fn bound_window(params: &ChainParams, t_max: f64) -> usize {
    let x = params.gamma().unwrap_or(0.0) * params.big_omega() * t_max;
    smallest_order_below(x, 1) + 1
}

fn smallest_order_below(x: f64, step: usize) -> usize {
    if x == 0.0 {
        return step;
    }
    let top = (x + 40.0 + 10.0 * x.cbrt()) as usize + 2 * step;
    let js = bessel_j_orders(top, x).unwrap_or_default();
    let mut order = (x.floor() as usize / step) * step;
    while order + step < js.len() && js[order..].iter().any(|v| v.abs() >= SUPPORT_TOLERANCE) {
        order += step;
    }
    order
}

struct FiniteBuilder {
    n: usize,
    big_omega: f64,
    spectrum: NormalModeSpectrum,
    cos_table: Vec<f64>,
    drop_zero_mode: bool,
}

impl FiniteBuilder {
    fn new(params: &ChainParams, drop_zero_mode: bool) -> Result<Self> {
        let spectrum = normal_mode_frequencies(params)?;
        let n = spectrum.len();
        if n < 2 {
            return Err(Error::InvalidParams("finite propagator needs N >= 2".into()));
        }
        let cos_table = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
        Ok(FiniteBuilder { n, big_omega: params.big_omega(), spectrum, cos_table, drop_zero_mode })
    }

    fn row(&self, t: f64) -> PropagatorRow {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        let mut c = vec![0.0; n];
        let mut cd = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut sd = vec![0.0; n];
        for (i, &w) in self.spectrum.frequencies.iter().enumerate() {
            let (sin, cos) = (w * t).sin_cos();
            c[i] = cos;
            cd[i] = -w * sin;
            if w == 0.0 {
                if !self.drop_zero_mode {
                    s[i] = t;
                    sd[i] = 1.0;
                }
            } else {
                s[i] = sin / w;
                sd[i] = cos;
            }
        }
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut f_dot = vec![0.0; n];
        let mut g_dot = vec![0.0; n];
        for r in 0..n {
            let (mut a, mut b, mut ad, mut bd) = (0.0, 0.0, 0.0, 0.0);
            for alpha in 1..=n {
                // imaginary parts cancel between α and N - α
                let phase = self.cos_table[(alpha * r) % n];
                let i = alpha - 1;
                a += phase * c[i];
                ad += phase * cd[i];
                b += phase * s[i];
                bd += phase * sd[i];
            }
            f[r] = a * inv_n;
            f_dot[r] = ad * inv_n;
            g[r] = b * inv_n * self.big_omega;
            g_dot[r] = bd * inv_n * self.big_omega;
        }
        PropagatorRow { time: t, indexing: Indexing::Periodic(n), f, g, f_dot, g_dot }
    }
}

/// `f_r = J_{2r}(2ωt)`, `g_r = Ω ∫_0^t J_{2r}(2ωt') dt'`.
fn simple_row(params: &ChainParams, window: usize, t: f64) -> Result<PropagatorRow> {
    let omega = params.omega();
    let big = params.big_omega();
    let x = 2.0 * omega * t.abs();
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let js = bessel_j_orders(2 * window + 1, x)?;
    let ints = bessel_j_integral_orders(2 * window, x)?;
    let len = 2 * window + 1;
    let (mut f, mut g, mut f_dot, mut g_dot) =
        (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for r in -(window as i64)..=(window as i64) {
        let k = (2 * r).unsigned_abs() as usize;
        let i = (r + window as i64) as usize;
        f[i] = js[k];
        g_dot[i] = big * js[k];
        g[i] = sign * big / (2.0 * omega) * ints[k];
        // d/dt J_{2r}(2ωt) = ω (J_{2r-1} - J_{2r+1}); J_{-m} = (-1)^m J_m
        let below = if k == 0 { -js[1] } else { js[k - 1] };
        f_dot[i] = sign * omega * (below - js[k + 1]);
    }
    Ok(PropagatorRow { time: t, indexing: Indexing::Window(window), f, g, f_dot, g_dot })
}

/// `f_r ≈ J_r(γΩt) cos(Ωt − πr/2)`, `g_r ≈ J_r(γΩt) sin(Ωt − πr/2)`.
fn bound_row(params: &ChainParams, window: usize, t: f64) -> Result<PropagatorRow> {
    let big = params.big_omega();
    let gamma = params.gamma().unwrap_or(0.0);
    let x = gamma * big * t;
    let js = bessel_j_orders(window + 1, x.abs())?;
    let j = |r: i64| -> f64 {
        let k = r.unsigned_abs() as usize;
        // negative order and negative argument each contribute (-1)^k
        let flips = (r < 0) as u32 + (x < 0.0) as u32;
        if flips == 1 && k % 2 == 1 { -js[k] } else { js[k] }
    };
    let len = 2 * window + 1;
    let (mut f, mut g, mut f_dot, mut g_dot) =
        (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for r in -(window as i64)..=(window as i64) {
        let i = (r + window as i64) as usize;
        let (s, c) = (big * t - 0.5 * PI * r as f64).sin_cos();
        let jr = j(r);
        let jp = 0.5 * (j(r - 1) - j(r + 1));
        f[i] = jr * c;
        g[i] = jr * s;
        f_dot[i] = gamma * big * jp * c - big * jr * s;
        g_dot[i] = gamma * big * jp * s + big * jr * c;
    }
    Ok(PropagatorRow { time: t, indexing: Indexing::Window(window), f, g, f_dot, g_dot })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got { Ok(()) } else { Err(Error::Shape { expected, got }) }
}

/// First moments at the row's time from first moments at `t = 0`.
///
/// `origin` is the site index of the first array element (0 for a finite
/// chain). Returns `(q̄(t), p̄(t))` with `p̄ = m dq̄/dt`.
pub fn evolve_means(
    params: &ChainParams,
    row: &PropagatorRow,
    origin: i64,
    q: &[f64],
    p: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(q.len(), p.len())?;
    if let Indexing::Periodic(n) = row.indexing {
        check_len(n, q.len())?;
    }
    let len = q.len();
    let m = params.mass;
    let big = params.big_omega();
    let disp: Vec<f64> =
        q.iter().enumerate().map(|(i, &qi)| qi - params.site(origin + i as i64)).collect();
    let mut q_out = vec![0.0; len];
    let mut p_out = vec![0.0; len];
    let reach = match row.indexing {
        Indexing::Periodic(_) => len,
        Indexing::Window(w) => w,
    };
    for n in 0..len {
        let (lo, hi) = match row.indexing {
            Indexing::Periodic(_) => (0, len),
            Indexing::Window(_) => (n.saturating_sub(reach), (n + reach + 1).min(len)),
        };
        let (mut qa, mut pa) = (0.0, 0.0);
        for r in lo..hi {
            let rel = r as i64 - n as i64;
            let u = disp[r];
            let pr = p[r];
            if u == 0.0 && pr == 0.0 {
                continue;
            }
            qa += row.f(rel) * u + row.g(rel) * pr / (m * big);
            pa += m * row.f_dot(rel) * u + row.g_dot(rel) * pr / big;
        }
        q_out[n] = params.site(origin + n as i64) + qa;
        p_out[n] = pa;
    }
    Ok((q_out, p_out))
}

/// Mean total energy of a configuration of first moments.
///
/// Finite chains close the ring; for an infinite window the sites beyond
/// either end are at rest on the lattice.
pub fn mean_energy(params: &ChainParams, origin: i64, q: &[f64], p: &[f64]) -> Result<f64> {
    check_len(q.len(), p.len())?;
    let u: Vec<f64> =
        q.iter().enumerate().map(|(i, &qi)| qi - params.site(origin + i as i64)).collect();
    let len = u.len();
    let mut e = 0.0;
    for i in 0..len {
        e += p[i] * p[i] / (2.0 * params.mass) + 0.5 * params.binding * u[i] * u[i];
    }
    let bond = |a: f64, b: f64| 0.5 * params.coupling * (a - b) * (a - b);
    match params.size {
        ChainSize::Finite(_) => {
            for i in 0..len {
                e += bond(u[i], u[(i + len - 1) % len]);
            }
        }
        ChainSize::Infinite => {
            if len > 0 {
                e += bond(u[0], 0.0) + bond(0.0, u[len - 1]);
            }
            for i in 1..len {
                e += bond(u[i], u[i - 1]);
            }
        }
    }
    Ok(e)
}
