//! Bessel functions of the first kind for integer order, and their
//! running integrals.
//!
//! Three evaluation regimes:
//!
//! * `x < 2`: the ascending power series, which converges from its first term.
//! * `2 <= x <= 25`: Miller's backward recurrence normalised with
//!   `J_0 + 2 Σ J_{2k} = 1`.
//! * `x > 25`: Hankel asymptotic expansion for `J_0`, `J_1`, forward
//!   recurrence for orders below `x` and a backward sweep matched onto it for
//!   orders above.
//!
//! Integrals `∫_0^x J_n(y) dy` use 7/15-point Gauss–Kronrod panels whose edges
//! follow the asymptotic zeros of the integrand.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};


// inherent float methods shadow these when std is linked (tests)
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;
const RESCALE_ABOVE: f64 = 1e250;

/// One evaluation `J_order(argument) = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: i32,
    pub argument: f64,
    pub value: f64,
}

impl BesselEval {
    pub fn new(order: i32, argument: f64) -> Result<Self> {
        Ok(BesselEval { order, argument, value: bessel_j(order, argument)? })
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(x, "bessel_j"))
    }
}

#[inline]
fn parity_sign(n: i64) -> f64 {
    if n & 1 == 0 { 1.0 } else { -1.0 }
}

/// `J_n(x)` for any integer order.
///
/// Negative orders use `J_{-n} = (-1)^n J_n`, negative arguments
/// `J_n(-x) = (-1)^n J_n(x)`.
pub fn bessel_j(n: i32, x: f64) -> Result<f64> {
    check_finite(x)?;
    let order = n.unsigned_abs() as usize;
    let mut sign = if n < 0 { parity_sign(order as i64) } else { 1.0 };
    let ax = if x < 0.0 {
        sign *= parity_sign(order as i64);
        -x
    } else {
        x
    };
    Ok(sign * bessel_j_nonneg(order, ax))
}

fn bessel_j_nonneg(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < SERIES_LIMIT {
        return series(n, x);
    }
    if x <= ASYMPTOTIC_LIMIT {
        return miller(n, x)[n];
    }
    large_argument(n, x)[n]
}

/// `J_0(x), …, J_max_order(x)` in one sweep, `x >= 0`.
pub fn bessel_j_orders(max_order: usize, x: f64) -> Result<Vec<f64>> {
    check_finite(x)?;
    if x < 0.0 {
        return Err(Error::Domain(x, "bessel_j_orders"));
    }
    if x == 0.0 {
        let mut out = vec![0.0; max_order + 1];
        out[0] = 1.0;
        return Ok(out);
    }
    Ok(if x <= ASYMPTOTIC_LIMIT { miller(max_order, x) } else { large_argument(max_order, x) })
}

fn series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    // (x/2)^n / n!, built multiplicatively so tiny results underflow gracefully
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= half / k as f64;
        if lead == 0.0 {
            return 0.0;
        }
    }
    let q = -half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

fn miller_start(max_order: usize, x: f64) -> usize {
    let top = (max_order as f64).max(x);
    let start = top + 20.0 + (160.0 * top).sqrt();
    2 * ((start as usize + 1) / 2)
}

/// Backward recurrence from a high even order, normalised by the
/// generating-function sum. Returns orders `0..=max_order`.
fn miller(max_order: usize, x: f64) -> Vec<f64> {
    let start = miller_start(max_order, x);
    let mut out = vec![0.0; max_order + 1];
    let two_over_x = 2.0 / x;
    let mut above = 0.0; // J_{k+1}
    let mut current = 1e-30; // J_k
    let mut norm = 0.0;
    let mut k = start;
    loop {
        if k <= max_order {
            out[k] = current;
        }
        if k % 2 == 0 && k > 0 {
            norm += 2.0 * current;
        }
        if k == 0 {
            norm += current;
            break;
        }
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        k -= 1;
        if current.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            current *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut().skip(k + 1) {
                *v *= s;
            }
        }
    }
    let inv = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= inv;
    }
    out
}

/// Hankel asymptotic expansion of `J_0` and `J_1`.
fn hankel_j01(x: f64) -> (f64, f64) {
    let (s, c) = (x.sin(), x.cos());
    let pref = (2.0 / (PI * x)).sqrt();
    let eval = |nu: f64| -> (f64, f64) {
        let mu = 4.0 * nu * nu;
        let mut p = 1.0;
        let mut q = 0.0;
        let mut term = 1.0;
        let mut last = f64::INFINITY;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
            if term.abs() > last {
                break;
            }
            last = term.abs();
            // a_k / x^k with the alternating pattern of P and Q
            match k % 4 {
                1 => q += term,
                2 => p -= term,
                3 => q -= term,
                _ => p += term,
            }
            if last < 1e-18 {
                break;
            }
        }
        (p, q)
    };
    let (p0, q0) = eval(0.0);
    let (p1, q1) = eval(1.0);
    // cos/sin of x - π/4 and x - 3π/4 without subtracting from a large x
    let c0 = FRAC_1_SQRT_2 * (c + s);
    let s0 = FRAC_1_SQRT_2 * (s - c);
    let c1 = FRAC_1_SQRT_2 * (s - c);
    let s1 = -FRAC_1_SQRT_2 * (s + c);
    (pref * (p0 * c0 - q0 * s0), pref * (p1 * c1 - q1 * s1))
}

fn large_argument(max_order: usize, x: f64) -> Vec<f64> {
    let (j0, j1) = hankel_j01(x);
    let mut out = vec![0.0; max_order + 1];
    out[0] = j0;
    if max_order == 0 {
        return out;
    }
    out[1] = j1;
    let forward_top = (x.floor() as usize).min(max_order);
    let two_over_x = 2.0 / x;
    for k in 1..forward_top {
        out[k + 1] = k as f64 * two_over_x * out[k] - out[k - 1];
    }
    if forward_top >= max_order {
        return out;
    }
    // Orders above x: the wanted solution is minimal there, so sweep down
    // and match onto the forward values at forward_top - 1, forward_top.
    let start = miller_start(max_order, x);
    let mut above = 0.0;
    let mut current = 1e-30;
    let mut tail = vec![0.0; max_order + 1];
    let mut k = start;
    let low = forward_top.saturating_sub(1);
    loop {
        if k <= max_order {
            tail[k] = current;
        }
        if k == low {
            break;
        }
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        k -= 1;
        if current.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            current *= s;
            above *= s;
            for v in tail.iter_mut().skip(k + 1) {
                *v *= s;
            }
        }
    }
    let (a, b) = (out[low], out[forward_top]);
    // normalize before squaring, the unscaled tail can sit near overflow
    let norm = tail[low].abs().max(tail[forward_top].abs());
    let (u, v) = (tail[low] / norm, tail[forward_top] / norm);
    let scale = (a * u + b * v) / (u * u + v * v) / norm;
    for k in forward_top + 1..=max_order {
        out[k] = scale * tail[k];
    }
    out
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss–Kronrod on one panel for a vector-valued integrand. Adds the
/// Kronrod estimate into `acc` and returns the largest |K - G| component.
fn gk15_panel<F>(lo: f64, hi: f64, width: usize, f: &mut F, acc: &mut [f64]) -> f64
where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kron = vec![0.0; width];
    let mut gauss = vec![0.0; width];
    let mut buf = vec![0.0; width];
    for (i, (&xk, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if xk == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &sgn in nodes {
            f(center + sgn * half * xk, &mut buf);
            for j in 0..width {
                kron[j] += wk * buf[j];
                if i % 2 == 1 {
                    gauss[j] += WG[i / 2] * buf[j];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for j in 0..width {
        acc[j] += half * kron[j];
        err = err.max((half * (kron[j] - gauss[j])).abs());
    }
    err
}

fn integrate_panels<F>(edges: &[f64], width: usize, tol: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut acc = vec![0.0; width];
    let mut stack: Vec<(f64, f64, u32)> = Vec::new();
    for pair in edges.windows(2).rev() {
        stack.push((pair[0], pair[1], 0));
    }
    while let Some((lo, hi, depth)) = stack.pop() {
        let mut trial = vec![0.0; width];
        let err = gk15_panel(lo, hi, width, &mut f, &mut trial);
        if err > tol && depth < 30 {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        } else {
            for (a, t) in acc.iter_mut().zip(trial) {
                *a += t;
            }
        }
    }
    acc
}

/// Panel edges on `[0, x]`: unit-ish panels through the monotone rise of
/// `J_order`, then the asymptotic zeros `(k + order/2 - 1/4)π`.
fn panel_edges(order: usize, x: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    let rise = (order as f64).min(x);
    let steps = (rise / 2.0).ceil() as usize;
    for i in 1..=steps {
        edges.push(rise * i as f64 / steps as f64);
    }
    let shift = 0.5 * order as f64 - 0.25;
    let mut k = ((rise / PI) - shift).floor().max(0.0) as i64;
    loop {
        let zero = (k as f64 + shift) * PI;
        k += 1;
        if zero <= *edges.last().unwrap() + 1e-9 {
            continue;
        }
        if zero >= x {
            break;
        }
        edges.push(zero);
    }
    if *edges.last().unwrap() < x {
        edges.push(x);
    }
    edges
}

/// `∫_0^x J_n(y) dy`.
pub fn bessel_j_integral(n: u32, x: f64) -> Result<f64> {
    check_finite(x)?;
    if x < 0.0 {
        return Err(Error::Domain(x, "bessel_j_integral"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let order = n as usize;
    let edges = panel_edges(order, x);
    let tol = 1e-13 / edges.len() as f64;
    let out = integrate_panels(&edges, 1, tol, |y, buf| buf[0] = bessel_j_nonneg(order, y));
    Ok(out[0])
}

/// `∫_0^x J_k(y) dy` for every `k in 0..=max_order`.
pub fn bessel_j_integral_orders(max_order: usize, x: f64) -> Result<Vec<f64>> {
    check_finite(x)?;
    if x < 0.0 {
        return Err(Error::Domain(x, "bessel_j_integral_orders"));
    }
    if x == 0.0 {
        return Ok(vec![0.0; max_order + 1]);
    }
    let edges = panel_edges(0, x);
    let tol = 1e-13 / edges.len() as f64;
    Ok(integrate_panels(&edges, max_order + 1, tol, |y, buf| {
        if y == 0.0 {
            buf.iter_mut().for_each(|v| *v = 0.0);
            buf[0] = 1.0;
        } else if y <= ASYMPTOTIC_LIMIT {
            buf.copy_from_slice(&miller(max_order, y));
        } else {
            buf.copy_from_slice(&large_argument(max_order, y));
        }
    }))
}

/// Leading-order envelope `(2/πx)^{1/2}` of the oscillatory regime.
pub fn asymptotic_envelope(x: f64) -> f64 {
    (2.0 / (PI * x)).sqrt()
}
