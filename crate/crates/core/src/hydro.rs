//! Hydrodynamic fields from Gaussian chain states and the two continuum
//! systems they obey: the linear wave equation for the density perturbation
//! and the `f, v, θ` Euler fluid in a harmonic potential.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// inherent float methods shadow these when std is linked (tests)
#[allow(unused_imports)]
use num_traits::Float;

use crate::chain::{evolve_means, propagator_row, ChainParams, ChainSize, PropagatorKind, PropagatorOptions};
use crate::error::{Error, Result};
use crate::gaussian::{equilibrium_limits, GaussianChainState};

/// Uniform spatial grid `x_i = x0 + i·dx`.
///
/// A periodic grid of `points` nodes has period `points·dx`; a bounded grid
/// has nodes on both walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub points: usize,
    pub periodic: bool,
}

impl Grid {
    pub fn periodic(x0: f64, period: f64, points: usize) -> Result<Self> {
        Self::checked(Grid { x0, dx: period / points as f64, points, periodic: true })
    }

    /// Nodes on `[a, b]` including both ends.
    pub fn bounded(a: f64, b: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Grid("a bounded grid needs two nodes".into()));
        }
        Self::checked(Grid { x0: a, dx: (b - a) / (points - 1) as f64, points, periodic: false })
    }

    fn checked(self) -> Result<Self> {
        if self.points < 3 || !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Grid(format!("invalid grid: {} points, dx = {}", self.points, self.dx)));
        }
        Ok(self)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    pub fn period(&self) -> Option<f64> {
        self.periodic.then(|| self.points as f64 * self.dx)
    }

    /// Quadrature weights: uniform on a periodic grid, trapezoid otherwise.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.dx; self.points];
        if !self.periodic {
            w[0] *= 0.5;
            w[self.points - 1] *= 0.5;
        }
        w
    }

    pub fn integrate(&self, a: &[f64]) -> f64 {
        self.weights().iter().zip(a).map(|(w, v)| w * v).sum()
    }

    /// Separation `x − y`, reduced to the nearest image on a periodic grid.
    fn separation(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        match self.period() {
            Some(p) => d - p * (d / p).round(),
            None => d,
        }
    }
}

/// Normalized Gaussian smearing kernel `K_w(d)`.
pub fn gaussian_kernel(d: f64, w: f64) -> f64 {
    (-0.5 * d * d / (w * w)).exp() / (w * (2.0 * PI).sqrt())
}

fn kernel_slope(d: f64, w: f64) -> f64 {
    -d / (w * w) * gaussian_kernel(d, w)
}

/// Smeared fields on a grid. `v` and `θ` are `None` where `n` is below the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroFields {
    pub time: f64,
    pub x: Vec<f64>,
    pub n: Vec<f64>,
    /// Lattice background `Σ_j K_w(x − b_j)`.
    pub n0: Vec<f64>,
    pub n1: Vec<f64>,
    /// `∂n/∂t` from continuity, `−(1/m) Σ_j p̄_j K_w'(x − q̄_j)`.
    pub n_dot: Vec<f64>,
    pub g: Vec<f64>,
    pub v: Vec<Option<f64>>,
    /// Temperature `kT` in energy units.
    pub theta: Vec<Option<f64>>,
    /// One-particle normalization `n / N`.
    pub f: Vec<f64>,
}

/// Smearing inputs for [`smeared_fields`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smearing {
    pub width: f64,
    pub n_floor: f64,
}

impl Smearing {
    /// Width `5b` with a floor of `1e-6` of the mean lattice density.
    pub fn lattice_default(spacing: f64) -> Self {
        Smearing { width: 5.0 * spacing, n_floor: 1e-6 / spacing }
    }
}

/// Fields from first moments and per-site momentum variances.
pub fn smeared_fields(
    params: &ChainParams,
    origin: i64,
    time: f64,
    q: &[f64],
    p: &[f64],
    dp2: &[f64],
    grid: &Grid,
    smearing: Smearing,
) -> Result<HydroFields> {
    let len = q.len();
    for got in [p.len(), dp2.len()] {
        if got != len {
            return Err(Error::Shape { expected: len, got });
        }
    }
    let w = smearing.width;
    if !(w > 0.0) {
        return Err(Error::InvalidParams("smearing width must be positive".into()));
    }
    let max_gap = q.windows(2).map(|s| (s[1] - s[0]).abs()).fold(0.0, f64::max);
    if w < 3.0 * max_gap {
        return Err(Error::InvalidParams(format!("smearing width {w} below three site spacings ({max_gap})")));
    }
    let m = params.mass;
    let x = grid.nodes();
    let mut n = vec![0.0; grid.points];
    let mut n0 = vec![0.0; grid.points];
    let mut n_dot = vec![0.0; grid.points];
    let mut g = vec![0.0; grid.points];
    let mut heat = vec![0.0; grid.points];
    for j in 0..len {
        let b = params.site(origin + j as i64);
        for (i, &xi) in x.iter().enumerate() {
            let d = grid.separation(xi, q[j]);
            let kern = gaussian_kernel(d, w);
            n[i] += kern;
            n0[i] += gaussian_kernel(grid.separation(xi, b), w);
            n_dot[i] -= p[j] / m * kernel_slope(d, w);
            g[i] += p[j] * kern;
            heat[i] += dp2[j] * kern;
        }
    }
    let n1 = n.iter().zip(&n0).map(|(a, b)| a - b).collect();
    let live = |i: usize| n[i] > smearing.n_floor;
    let v = (0..grid.points).map(|i| live(i).then(|| g[i] / (m * n[i]))).collect();
    let theta = (0..grid.points).map(|i| live(i).then(|| heat[i] / (m * n[i]))).collect();
    let f = n.iter().map(|a| a / len as f64).collect();
    Ok(HydroFields { time, x, n, n0, n1, n_dot, g, v, theta, f })
}

/// Smeared `n`, `g`, `v`, `θ` of a Gaussian state.
///
/// `θ` follows from `½θ n = Σ_j (Δp_j²/2m) K_w(x − q̄_j)`.
pub fn extract_fields(state: &GaussianChainState, grid: &Grid, smearing: Smearing) -> Result<HydroFields> {
    let dp2: Vec<f64> = (0..state.len()).map(|j| state.dp2(j)).collect();
    smeared_fields(&state.params, state.origin, state.time, &state.q, &state.p, &dp2, grid, smearing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Mirror walls: `∂x` of even fields vanishes and `v = 0` on the walls.
    Reflecting,
}

fn check_boundary(grid: &Grid, boundary: Boundary) -> Result<()> {
    match (boundary, grid.periodic) {
        (Boundary::Periodic, true) | (Boundary::Reflecting, false) => Ok(()),
        _ => Err(Error::Grid("boundary kind does not match the grid".into())),
    }
}

/// Step counts reaching each output time exactly.
fn step_counts(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Grid("time step must be positive".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Grid("output times must be non-negative and strictly increasing".into()));
    }
    times
        .iter()
        .map(|&t| {
            let steps = (t / dt).round();
            if (steps * dt - t).abs() > 1e-9 * dt.max(t) {
                Err(Error::Grid(format!("output time {t} is not a multiple of dt = {dt}")))
            } else {
                Ok(steps as usize)
            }
        })
        .collect()
}

/// Neighbour values of node `i` with ghost nodes for the boundary kind.
/// `odd` fields flip sign across a mirror wall.
#[inline]
fn neighbours(a: &[f64], i: usize, boundary: Boundary, odd: bool) -> (f64, f64) {
    let n = a.len();
    let s = if odd { -1.0 } else { 1.0 };
    match boundary {
        Boundary::Periodic => (a[(i + n - 1) % n], a[(i + 1) % n]),
        Boundary::Reflecting => {
            let left = if i == 0 { s * a[1] } else { a[i - 1] };
            let right = if i + 1 == n { s * a[n - 2] } else { a[i + 1] };
            (left, right)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOptions {
    pub boundary: Boundary,
    pub dt: f64,
}

/// Leapfrog solution of `∂²u/∂t² = c² ∂²u/∂x²` sampled at `times`.
///
/// Output times must be multiples of `dt`. Refuses Courant numbers above 1.
pub fn wave_solve(
    grid: &Grid,
    u0: &[f64],
    u0_dot: &[f64],
    c: f64,
    times: &[f64],
    options: WaveOptions,
) -> Result<Vec<Vec<f64>>> {
    check_boundary(grid, options.boundary)?;
    for got in [u0.len(), u0_dot.len()] {
        if got != grid.points {
            return Err(Error::Shape { expected: grid.points, got });
        }
    }
    let dt = options.dt;
    let courant = c.abs() * dt / grid.dx;
    if courant > 1.0 {
        return Err(Error::Cfl { courant, limit: 1.0 });
    }
    let steps = step_counts(times, dt)?;
    let c2 = courant * courant;
    let lap = |u: &[f64], i: usize| {
        let (l, r) = neighbours(u, i, options.boundary, false);
        l - 2.0 * u[i] + r
    };
    let mut out = Vec::with_capacity(times.len());
    let mut prev = u0.to_vec();
    let mut cur: Vec<f64> = (0..grid.points).map(|i| u0[i] + dt * u0_dot[i] + 0.5 * c2 * lap(u0, i)).collect();
    let mut done = 1usize;
    for &target in &steps {
        while done < target {
            let next: Vec<f64> = (0..grid.points).map(|i| 2.0 * cur[i] - prev[i] + c2 * lap(&cur, i)).collect();
            prev = core::mem::replace(&mut cur, next);
            done += 1;
        }
        out.push(if target == 0 { u0.to_vec() } else { cur.clone() });
    }
    Ok(out)
}

/// Fields of the Euler system on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerFields {
    pub time: f64,
    pub f: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerOptions {
    pub boundary: Boundary,
    pub dt: f64,
    /// Local Courant number `|v| dt/dx` above which advection is upwinded.
    pub upwind_threshold: f64,
}

/// Courant limit on `(|v| + c_s) dt/dx` with `c_s = √(3θ/m)`.
pub const EULER_COURANT_LIMIT: f64 = 1.0;

/// Time derivatives `(∂t f, ∂t v, ∂t θ)` of the Euler system.
///
/// `∂t f = −∂x(f v)`,
/// `∂t v = −v∂x v − (1/m)∂x θ − (θ/m)∂x ln f − K x/m`,
/// `∂t θ = −v∂x θ − 2θ ∂x v`.
///
/// The compression `∂x v` is discretized as `(1/f)∂x(f v) − v ∂x ln f`, which
/// makes the linearization about the static solution conserve a discrete
/// f-weighted energy; the plain centred `∂x v` is unstable in thin tails.
pub fn euler_rhs(
    grid: &Grid,
    fields: &EulerFields,
    mass: f64,
    binding: f64,
    options: EulerOptions,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let bc = options.boundary;
    let n = grid.points;
    let h = grid.dx;
    let (f, v, th) = (&fields.f, &fields.v, &fields.theta);
    let flux: Vec<f64> = f.iter().zip(v).map(|(a, b)| a * b).collect();
    let lnf: Vec<f64> = f.iter().map(|a| a.ln()).collect();
    let centred = |a: &[f64], i: usize, odd: bool| {
        let (l, r) = neighbours(a, i, bc, odd);
        (r - l) / (2.0 * h)
    };
    let advect = |a: &[f64], i: usize, odd: bool| {
        let vi = v[i];
        if vi.abs() * options.dt / h > options.upwind_threshold {
            let (l, r) = neighbours(a, i, bc, odd);
            if vi > 0.0 { vi * (a[i] - l) / h } else { vi * (r - a[i]) / h }
        } else {
            vi * centred(a, i, odd)
        }
    };
    let mut df = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut dth = vec![0.0; n];
    for i in 0..n {
        df[i] = -centred(&flux, i, true);
        let wall = bc == Boundary::Reflecting && (i == 0 || i + 1 == n);
        if !wall {
            dv[i] = -advect(v, i, true)
                - centred(th, i, false) / mass
                - th[i] * centred(&lnf, i, false) / mass
                - binding * grid.x(i) / mass;
        }
        let divergence = centred(&flux, i, true) / f[i] - v[i] * centred(&lnf, i, false);
        dth[i] = -advect(th, i, false) - 2.0 * th[i] * divergence;
    }
    (df, dv, dth)
}

fn check_fields(fields: &EulerFields) -> Result<()> {
    for (i, ((f, v), th)) in fields.f.iter().zip(&fields.v).zip(&fields.theta).enumerate() {
        if !(*f > 0.0 && f.is_finite() && *th > 0.0 && th.is_finite() && v.is_finite()) {
            return Err(Error::SolverHalt {
                t: fields.time,
                reason: format!("node {i}: f = {f:e}, v = {v:e}, theta = {th:e}"),
            });
        }
    }
    Ok(())
}

/// RK4 method-of-lines integration of the Euler system, sampled at `times`.
///
/// Halts with a node dump when `f` or `θ` stops being positive. Reflecting
/// walls set `v = 0` on the wall nodes of the initial data.
pub fn euler_solve(
    grid: &Grid,
    initial: &EulerFields,
    mass: f64,
    binding: f64,
    times: &[f64],
    options: EulerOptions,
) -> Result<Vec<EulerFields>> {
    check_boundary(grid, options.boundary)?;
    for got in [initial.f.len(), initial.v.len(), initial.theta.len()] {
        if got != grid.points {
            return Err(Error::Shape { expected: grid.points, got });
        }
    }
    if !(mass > 0.0) || binding < 0.0 {
        return Err(Error::InvalidParams("Euler system needs m > 0 and K >= 0".into()));
    }
    let steps = step_counts(times, options.dt)?;
    let dt = options.dt;
    let mut state = initial.clone();
    state.time = 0.0;
    if options.boundary == Boundary::Reflecting {
        let last = grid.points - 1;
        state.v[0] = 0.0;
        state.v[last] = 0.0;
    }
    check_fields(&state)?;
    let axpy = |base: &EulerFields, d: &(Vec<f64>, Vec<f64>, Vec<f64>), s: f64| {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        EulerFields { time: base.time + s, f: add(&base.f, &d.0), v: add(&base.v, &d.1), theta: add(&base.theta, &d.2) }
    };
    let mut out = Vec::with_capacity(times.len());
    let mut done = 0usize;
    for &target in &steps {
        while done < target {
            let sound = state.theta.iter().fold(0.0f64, |m, th| m.max((3.0 * th / mass).sqrt()));
            let speed = state.v.iter().fold(0.0f64, |m, v| m.max(v.abs())) + sound;
            let courant = speed * dt / grid.dx;
            if courant > EULER_COURANT_LIMIT {
                return Err(Error::Cfl { courant, limit: EULER_COURANT_LIMIT });
            }
            let k1 = euler_rhs(grid, &state, mass, binding, options);
            let s2 = axpy(&state, &k1, 0.5 * dt);
            let k2 = euler_rhs(grid, &s2, mass, binding, options);
            let s3 = axpy(&state, &k2, 0.5 * dt);
            let k3 = euler_rhs(grid, &s3, mass, binding, options);
            let s4 = axpy(&state, &k3, dt);
            let k4 = euler_rhs(grid, &s4, mass, binding, options);
            let comb = |a: &[f64], b: &[f64], c: &[f64], d: &[f64], base: &[f64]| -> Vec<f64> {
                (0..base.len()).map(|i| base[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect()
            };
            state = EulerFields {
                time: (done + 1) as f64 * dt,
                f: comb(&k1.0, &k2.0, &k3.0, &k4.0, &state.f),
                v: comb(&k1.1, &k2.1, &k3.1, &k4.1, &state.v),
                theta: comb(&k1.2, &k2.2, &k3.2, &k4.2, &state.theta),
            };
            done += 1;
            check_fields(&state)?;
        }
        out.push(state.clone());
    }
    Ok(out)
}

/// Energy functional `∫ f (½ m v² + ½ θ + ½ K x²) dx`.
pub fn euler_energy(grid: &Grid, fields: &EulerFields, mass: f64, binding: f64) -> f64 {
    let e: Vec<f64> = (0..grid.points)
        .map(|i| {
            let x = grid.x(i);
            fields.f[i] * (0.5 * mass * fields.v[i] * fields.v[i] + 0.5 * fields.theta[i] + 0.5 * binding * x * x)
        })
        .collect();
    grid.integrate(&e)
}

/// Averaged densities and currents of `N` non-interacting particles in local
/// equilibrium with `b_j = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEquilibriumCurrents {
    pub n: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub tau: Vec<f64>,
    pub j: Vec<f64>,
}

/// `n = Nf`, `g = m v n`, `h = (½mv² + ½θ + ½Kx²) n`, `τ = (mv² + θ) n`,
/// `j = (3/2 vθ + ½ m v³) n + (K/2m) x² g`.
pub fn local_equilibrium_currents(
    x: &[f64],
    f: &[f64],
    v: &[f64],
    theta: &[f64],
    mass: f64,
    binding: f64,
    particles: f64,
) -> LocalEquilibriumCurrents {
    let mut out = LocalEquilibriumCurrents { n: vec![], g: vec![], h: vec![], tau: vec![], j: vec![] };
    for i in 0..x.len() {
        let n = particles * f[i];
        let g = mass * v[i] * n;
        out.n.push(n);
        out.g.push(g);
        out.h.push((0.5 * mass * v[i] * v[i] + 0.5 * theta[i] + 0.5 * binding * x[i] * x[i]) * n);
        out.tau.push((mass * v[i] * v[i] + theta[i]) * n);
        out.j.push((1.5 * v[i] * theta[i] + 0.5 * mass * v[i].powi(3)) * n + binding / (2.0 * mass) * x[i] * x[i] * g);
    }
    out
}

/// Linear phase-space form `c + Σ a_i z_i` with `z = (q_0.., p_0..)`.
#[derive(Debug, Clone)]
struct Lin {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

struct Moments<'a> {
    state: &'a GaussianChainState,
    len: usize,
}

impl Moments<'_> {
    fn q(&self, j: usize) -> Lin {
        Lin { terms: vec![(j, 1.0)], constant: 0.0 }
    }

    fn p(&self, j: usize) -> Lin {
        Lin { terms: vec![(self.len + j, 1.0)], constant: 0.0 }
    }

    /// `u_j = q_j − b_j`.
    fn u(&self, j: usize) -> Lin {
        Lin { terms: vec![(j, 1.0)], constant: -self.state.params.site(self.state.site(j)) }
    }

    /// `u_a − u_b`.
    fn du(&self, a: usize, b: usize) -> Lin {
        let mut l = self.u(a);
        let r = self.u(b);
        l.terms.push((b, -1.0));
        l.constant -= r.constant;
        l
    }

    fn sigma(&self, a: usize, b: usize) -> f64 {
        let (n, s) = (self.len, self.state);
        match (a < n, b < n) {
            (true, true) => s.sigma_qq(a, b),
            (true, false) => s.sigma_qp(a, b - n),
            (false, true) => s.sigma_qp(b, a - n),
            (false, false) => s.sigma_pp(a - n, b - n),
        }
    }

    fn mean(&self, l: &Lin) -> f64 {
        let z = |i: usize| if i < self.len { self.state.q[i] } else { self.state.p[i - self.len] };
        l.constant + l.terms.iter().map(|&(i, a)| a * z(i)).sum::<f64>()
    }

    fn cov(&self, a: &Lin, b: &Lin) -> f64 {
        let mut s = 0.0;
        for &(i, x) in &a.terms {
            for &(j, y) in &b.terms {
                s += x * y * self.sigma(i, j);
            }
        }
        s
    }

    /// `⟨X_1 ⋯ X_r e^{ikq_s}⟩` for `r ≤ 3`.
    fn expect(&self, forms: &[Lin], k: f64, s: usize) -> Complex64 {
        let qs = self.q(s);
        let weight = Complex64::new(-0.5 * k * k * self.state.dq2(s), k * self.state.q[s]).exp();
        let mu: Vec<Complex64> =
            forms.iter().map(|l| Complex64::new(self.mean(l), k * self.cov(l, &qs))).collect();
        let c = |a: usize, b: usize| self.cov(&forms[a], &forms[b]);
        let m = match forms.len() {
            0 => Complex64::new(1.0, 0.0),
            1 => mu[0],
            2 => mu[0] * mu[1] + c(0, 1),
            3 => mu[0] * mu[1] * mu[2] + mu[0] * c(1, 2) + mu[1] * c(0, 2) + mu[2] * c(0, 1),
            _ => unreachable!("at most cubic"),
        };
        weight * m
    }

    /// Plain moment `⟨X_1 ⋯ X_r⟩` for `r ≤ 3`.
    fn plain(&self, forms: &[Lin]) -> f64 {
        self.expect(forms, 0.0, 0).re
    }
}

fn ring_moments(state: &GaussianChainState) -> Result<Moments<'_>> {
    match state.params.size {
        ChainSize::Finite(_) => Ok(Moments { state, len: state.len() }),
        ChainSize::Infinite => Err(Error::UnsupportedTopology),
    }
}

/// Exact Gaussian means of the microscopic densities and currents at one `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentMeans {
    pub k: f64,
    pub n: Complex64,
    pub g: Complex64,
    pub h: Complex64,
    pub tau: Complex64,
    pub j: Complex64,
    /// `K Σ_j ⟨(q_j − b_j) e^{ikq_j}⟩`.
    pub binding_force: Complex64,
}

/// Means of `n, g, h, τ, j` on a finite ring, with the finite differences in
/// `τ` and `j` acting on displacements and cyclic site labels.
///
/// The `1/ik` structures take their analytic limits at `k = 0`.
pub fn current_means(state: &GaussianChainState, k_grid: &[f64]) -> Result<Vec<CurrentMeans>> {
    let mo = ring_moments(state)?;
    let len = mo.len;
    let (m, nu2, kb) = (state.params.mass, state.params.coupling, state.params.binding);
    let next = |j: usize| (j + 1) % len;
    let prev = |j: usize| (j + len - 1) % len;
    let i = Complex64::i();
    let mut out = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let mut r = CurrentMeans {
            k,
            n: Complex64::new(0.0, 0.0),
            g: Complex64::new(0.0, 0.0),
            h: Complex64::new(0.0, 0.0),
            tau: Complex64::new(0.0, 0.0),
            j: Complex64::new(0.0, 0.0),
            binding_force: Complex64::new(0.0, 0.0),
        };
        for j in 0..len {
            let (p, u, bond) = (mo.p(j), mo.u(j), mo.du(j, prev(j)));
            r.n += mo.expect(&[], k, j);
            r.g += mo.expect(&[p.clone()], k, j);
            r.binding_force += kb * mo.expect(&[u.clone()], k, j);
            let kinetic = mo.expect(&[p.clone(), p.clone()], k, j) / (2.0 * m);
            let h = kinetic
                + 0.5 * kb * mo.expect(&[u.clone(), u.clone()], k, j)
                + 0.5 * nu2 * mo.expect(&[bond.clone(), bond.clone()], k, j);
            r.h += h;
            r.tau += 2.0 * kinetic;
            r.j += (mo.expect(&[p.clone(), p.clone(), p.clone()], k, j) / (2.0 * m)
                + 0.5 * kb * mo.expect(&[p.clone(), u.clone(), u.clone()], k, j)
                + 0.5 * nu2 * mo.expect(&[p.clone(), bond.clone(), bond.clone()], k, j))
                / m;
            let stretch = mo.du(next(j), j);
            if k != 0.0 {
                let lap = mo.expect(&[u.clone()], k, prev(j)) - 2.0 * mo.expect(&[u.clone()], k, j)
                    + mo.expect(&[u.clone()], k, next(j));
                r.tau += nu2 * lap / (i * k);
                let pair = [p.clone(), stretch.clone()];
                r.j += nu2 / m * (mo.expect(&pair, k, j) - mo.expect(&pair, k, next(j))) / (i * k);
            } else {
                let lap = mo.plain(&[u.clone(), mo.q(prev(j))]) - 2.0 * mo.plain(&[u.clone(), mo.q(j)])
                    + mo.plain(&[u.clone(), mo.q(next(j))]);
                r.tau += nu2 * lap;
                let gap = Lin { terms: vec![(j, 1.0), (next(j), -1.0)], constant: 0.0 };
                r.j += nu2 / m * mo.plain(&[p, stretch, gap]);
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Proximity of one state to local equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumMetric {
    pub time: f64,
    /// `max_j |σ(q_j,p_j)| / √(Δq_j² Δp_j²)`.
    pub cross: f64,
    /// `max_j |Δp_{j+1}² − Δp_j²|` relative to the mean `Δp²`.
    pub flatness: f64,
    /// Largest relative distance of the mean `Δq²`, `Δp²` from the
    /// equilibrium limits of the initial widths; infinite when `K = 0`.
    pub distance: f64,
}

impl EquilibriumMetric {
    pub fn max_component(&self) -> f64 {
        self.cross.max(self.flatness).max(self.distance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub metrics: Vec<EquilibriumMetric>,
    /// First time after which every component stays below the tolerance.
    pub convergence_time: Option<f64>,
}

fn mean_of(len: usize, f: impl Fn(usize) -> f64) -> f64 {
    (0..len).map(f).sum::<f64>() / len as f64
}

/// Equilibrium metric along a trajectory whose first state is the `t = 0`
/// start. Sites within `edge` of either end of the stored range are skipped.
pub fn local_equilibrium_metric(
    trajectory: &[GaussianChainState],
    edge: usize,
    tolerance: f64,
) -> Result<EquilibriumReport> {
    let Some(first) = trajectory.first() else {
        return Ok(EquilibriumReport { metrics: vec![], convergence_time: None });
    };
    let len = first.len();
    if 2 * edge >= len {
        return Err(Error::InvalidParams("edge exclusion leaves no sites".into()));
    }
    let sites = edge..len - edge;
    let n = sites.len();
    let dq0 = mean_of(n, |i| first.dq2(edge + i));
    let dp0 = mean_of(n, |i| first.dp2(edge + i));
    let limits = match equilibrium_limits(&first.params, dq0, dp0) {
        Ok(l) => Some(l),
        Err(Error::NoEquilibrium) => None,
        Err(e) => return Err(e),
    };
    let mut metrics = Vec::with_capacity(trajectory.len());
    for state in trajectory {
        if state.len() != len {
            return Err(Error::Shape { expected: len, got: state.len() });
        }
        let mut cross = 0.0f64;
        for j in sites.clone() {
            cross = cross.max(state.sigma_qp(j, j).abs() / (state.dq2(j) * state.dp2(j)).sqrt());
        }
        let dp_mean = mean_of(n, |i| state.dp2(edge + i));
        let mut flatness = 0.0f64;
        for j in edge..len - edge - 1 {
            flatness = flatness.max((state.dp2(j + 1) - state.dp2(j)).abs() / dp_mean);
        }
        let distance = match limits {
            Some(l) => {
                let dq_mean = mean_of(n, |i| state.dq2(edge + i));
                ((dq_mean - l.qq).abs() / l.qq).max((dp_mean - l.pp).abs() / l.pp)
            }
            None => f64::INFINITY,
        };
        metrics.push(EquilibriumMetric { time: state.time, cross, flatness, distance });
    }
    let mut convergence_time = None;
    for m in metrics.iter().rev() {
        if m.max_component() < tolerance {
            convergence_time = Some(m.time);
        } else {
            break;
        }
    }
    Ok(EquilibriumReport { metrics, convergence_time })
}

/// Long-wavelength sound-wave scenario on a ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoundScenario {
    pub params: ChainParams,
    /// Displacement amplitude of `δq_j = A sin(2πj/λ)`.
    pub amplitude: f64,
    /// Wavelength `λ` in sites.
    pub wavelength: f64,
    pub smearing: Smearing,
    /// Wave-solver grid nodes per lattice site.
    pub nodes_per_site: usize,
    /// Wave-solver Courant number.
    pub courant: f64,
}

impl SoundScenario {
    /// `N = 400`, `K = 0`, `λ = 50` sites, amplitude `0.01 d`, `w = 5d`.
    pub fn reference() -> Result<Self> {
        let params = ChainParams::finite(400, 1.0, 1.0, 0.0)?.with_spacing(1.0)?;
        Ok(SoundScenario {
            params,
            amplitude: 0.01,
            wavelength: 50.0,
            smearing: Smearing::lattice_default(1.0),
            nodes_per_site: 1,
            courant: 0.5,
        })
    }

    pub fn acoustic_period(&self) -> f64 {
        self.wavelength * self.params.spacing / self.params.sound_speed()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// `‖n₁_micro − n₁_wave‖₂ / ‖n₁_micro(0)‖₂` (absolute when the reference vanishes).
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
    pub sound_speed: f64,
    /// Speed from the first zero of the projection of `n₁(t)` on `n₁(0)`.
    pub measured_speed: Option<f64>,
    pub warnings: Vec<String>,
}

/// Evolve the scenario microscopically and with the wave equation from the
/// same smeared initial field, and compare the density perturbations.
pub fn compare_micro_hydro(scenario: &SoundScenario, times: &[f64]) -> Result<ComparisonReport> {
    let params = scenario.params;
    let n = params.len().ok_or(Error::UnsupportedTopology)?;
    let d = params.spacing;
    if !(d > 0.0) {
        return Err(Error::InvalidParams("the sound scenario needs a lattice spacing".into()));
    }
    let mut warnings = Vec::new();
    let kappa = 2.0 * PI / (scenario.wavelength * d);
    if kappa * d > 0.3 {
        warnings.push(format!("k d = {:.3} is not small; lattice dispersion is visible", kappa * d));
    }
    if kappa * scenario.smearing.width > 2.0 {
        warnings.push(format!("smearing width {} washes out the wave", scenario.smearing.width));
    }
    let cycles = n as f64 / scenario.wavelength;
    if (cycles - cycles.round()).abs() > 1e-9 {
        warnings.push("wavelength does not divide the ring; the profile has a seam".into());
    }
    if params.is_bound() {
        warnings.push("K > 0: the chain is not a free sound medium".into());
    }

    let q0: Vec<f64> = (0..n)
        .map(|j| params.site(j as i64) + scenario.amplitude * (2.0 * PI * j as f64 / scenario.wavelength).sin())
        .collect();
    let p0 = vec![0.0; n];
    let dp2 = vec![0.0; n];
    let grid = Grid::periodic(0.0, n as f64 * d, n * scenario.nodes_per_site.max(1))?;
    let initial = smeared_fields(&params, 0, 0.0, &q0, &p0, &dp2, &grid, scenario.smearing)?;
    let c = params.sound_speed();
    let dt = scenario.courant * grid.dx / c;
    // output times rounded to the solver step
    let wave_times: Vec<f64> = times.iter().map(|t| (t / dt).round() * dt).collect();
    let waves = wave_solve(&grid, &initial.n1, &initial.n_dot, c, &wave_times, WaveOptions { boundary: Boundary::Periodic, dt })?;

    let norm2 = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_inf = |a: &[f64]| a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (ref2, ref_inf) = (norm2(&initial.n1), norm_inf(&initial.n1));
    let ref_dot = initial.n1.iter().map(|x| x * x).sum::<f64>();
    let mut report = ComparisonReport {
        times: wave_times.clone(),
        l2: vec![],
        linf: vec![],
        sound_speed: c,
        measured_speed: None,
        warnings,
    };
    let mut projection = Vec::with_capacity(times.len());
    for (wave, &t) in waves.iter().zip(&wave_times) {
        let row = propagator_row(&params, PropagatorKind::FiniteDft, t, PropagatorOptions::default())?;
        let (q, p) = evolve_means(&params, &row, 0, &q0, &p0)?;
        let micro = smeared_fields(&params, 0, t, &q, &p, &dp2, &grid, scenario.smearing)?;
        let diff: Vec<f64> = micro.n1.iter().zip(wave).map(|(a, b)| a - b).collect();
        let scale = |r: f64| if r > 0.0 { r } else { 1.0 };
        report.l2.push(norm2(&diff) / scale(ref2));
        report.linf.push(norm_inf(&diff) / scale(ref_inf));
        if ref_dot > 0.0 {
            projection.push(micro.n1.iter().zip(&initial.n1).map(|(a, b)| a * b).sum::<f64>() / ref_dot);
        }
    }
    // a standing wave projects as cos(cκt); its first zero sits at t = π/(2cκ)
    if projection.len() == wave_times.len() {
        for w in 1..projection.len() {
            let (a, b) = (projection[w - 1], projection[w]);
            if a > 0.0 && b <= 0.0 {
                let (t0, t1) = (wave_times[w - 1], wave_times[w]);
                let zero = t0 + (t1 - t0) * a / (a - b);
                report.measured_speed = Some(PI / (2.0 * kappa * zero));
                break;
            }
        }
    }
    Ok(report)
}
