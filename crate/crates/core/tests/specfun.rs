use chainsim_core::specfun::{
    asymptotic_envelope, bessel_j, bessel_j_integral, bessel_j_integral_orders, bessel_j_orders,
};
use proptest::prelude::*;

// Reference values from mpmath at 30 digits.
const REFERENCE: &[(i32, f64, f64)] = &[
    (0, 0.5, 0.93846980724081290423),
    (0, 7.25, 0.29199692419177899751),
    (0, 12.0, 0.047689310796833536624),
    (0, 19.9, 0.17287775639261846235),
    (0, 30.0, -0.086367983581040211336),
    (0, 100.0, 0.019985850304223122424),
    (0, 1234.5, -0.013550379618035721909),
    (0, 10000.0, -0.0070961603533888014773),
    (1, 2.0, 0.5767248077568733872),
    (1, 25.5, -0.062048536491484101721),
    (1, 9999.0, 0.0079424897098126263364),
    (2, 13.0, -0.21774426424195679117),
    (3, 1.0, 0.019563353982668405919),
    (5, 2.0, 0.0070396297558716854842),
    (5, 60.0, 0.02745474422834409975),
    (10, 9.5, 0.16502640472619115732),
    (10, 10.5, 0.24774553753592743271),
    (17, 200.0, -0.050997934476438416467),
    (20, 30.0, 0.0048310199934040645386),
    (40, 39.0, 0.096839571963787074895),
    (40, 41.0, 0.16362999007132056796),
    (60, 5.0, 8.1600240380935177771e-59),
    (100, 99.0, 0.077687161700459400794),
    (100, 150.0, -0.015359526118405390629),
    (150, 140.0, 0.0043110999456728774821),
    (200, 199.0, 0.0646389635767720465),
    (200, 10000.0, -0.00036340052342683507369),
    (200, 250.0, -0.0059021679152339692719),
    (7, 10000.0, -0.0036304094796513990915),
    (33, 0.001, 1.3406779077012348112e-146),
];

// ∫_0^x J_n, mpmath quadrature at 30 digits.
const INTEGRAL_REFERENCE: &[(u32, f64, f64)] = &[
    (0, 0.7, 0.67193680940897659421),
    (0, 50.0, 0.90141212258183461184),
    (0, 213.0, 0.94597918956145542775),
    (1, 2.0, 0.77610922085876433195),
    (1, 80.0, 1.0697421655122100228),
    (2, 5.0, 1.3704701929676982464),
    (4, 33.3, 1.1352836229036039373),
    (11, 40.0, 0.86732623071803264827),
    (30, 20.0, 0.00010191841157300196133),
    (60, 200.0, 1.0487098770685983022),
    (3, 400.0, 0.9612670390535019078),
];

/// Ascending series summed term by term in f64, independent of the library path.
fn series_oracle(n: u32, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut k = 0u32;
    loop {
        let mut term = if k % 2 == 0 { 1.0 } else { -1.0 };
        for i in 1..=k {
            term *= (x / 2.0) * (x / 2.0) / (i as f64);
        }
        for i in 1..=(n + k) {
            term /= i as f64;
        }
        term *= (x / 2.0f64).powi(n as i32);
        sum += term;
        if term.abs() < 1e-20 && k > 2 {
            return sum;
        }
        k += 1;
    }
}

/// Composite Simpson on a fine grid as an integration oracle.
fn simpson_oracle(n: i32, x: f64, panels: usize) -> f64 {
    let h = x / panels as f64;
    let mut s = bessel_j(n, 0.0).unwrap() + bessel_j(n, x).unwrap();
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * bessel_j(n, i as f64 * h).unwrap();
    }
    s * h / 3.0
}

#[test]
fn matches_reference_table() {
    for &(n, x, expect) in REFERENCE {
        let got = bessel_j(n, x).unwrap();
        assert!((got - expect).abs() <= 1e-12, "J_{n}({x}) = {got}, want {expect}");
    }
}

#[test]
fn series_oracle_examples() {
    let oracle = series_oracle(5, 2.0);
    assert!((oracle - 0.00704).abs() < 5e-6);
    assert!((bessel_j(5, 2.0).unwrap() - oracle).abs() < 1e-15);
    for &(n, x) in &[(0u32, 1.5), (2, 3.0), (7, 6.5), (12, 9.0)] {
        let got = bessel_j(n as i32, x).unwrap();
        assert!((got - series_oracle(n, x)).abs() < 1e-13, "n={n} x={x}");
    }
}

#[test]
fn integral_reference_and_identity() {
    for &(n, x, expect) in INTEGRAL_REFERENCE {
        let got = bessel_j_integral(n, x).unwrap();
        assert!((got - expect).abs() <= 1e-10, "∫J_{n} to {x}: {got}, want {expect}");
    }
    // ∫_0^x J_1 = 1 - J_0(x), with quadrature cross-check
    let direct = bessel_j_integral(1, 2.0).unwrap();
    let identity = 1.0 - bessel_j(0, 2.0).unwrap();
    assert!((direct - identity).abs() < 1e-13);
    assert!((simpson_oracle(1, 2.0, 2000) - identity).abs() < 1e-12);
    // the full integral of J_0 is 1; at 50 we sit in the decaying tail
    let tail = bessel_j_integral(0, 50.0).unwrap();
    assert!((tail - 1.0).abs() < 2.0 * asymptotic_envelope(50.0));
}

#[test]
fn integral_orders_match_scalar_and_neumann_sum() {
    for &x in &[3.0, 24.0, 61.5] {
        let all = bessel_j_integral_orders(40, x).unwrap();
        let js = bessel_j_orders(400, x).unwrap();
        for (n, v) in all.iter().enumerate() {
            assert!((v - bessel_j_integral(n as u32, x).unwrap()).abs() < 1e-11);
            // ∫_0^x J_n = 2 Σ_k J_{n+2k+1}(x)
            let neumann: f64 = 2.0 * js.iter().skip(n + 1).step_by(2).sum::<f64>();
            assert!((v - neumann).abs() < 1e-11, "n={n} x={x}: {v} vs {neumann}");
        }
    }
}

#[test]
fn addition_theorem() {
    let mut worst: f64 = 0.0;
    for n in 0..=20i32 {
        for step in 0..=60 {
            let x = 0.5 * step as f64;
            let mut sum = 0.0;
            let mut k = 0i32;
            loop {
                let plus = bessel_j(n - k, x).unwrap() * bessel_j(k, x).unwrap();
                let minus =
                    if k > 0 { bessel_j(n + k, x).unwrap() * bessel_j(-k, x).unwrap() } else { 0.0 };
                sum += plus + minus;
                if k > n + 20 && plus.abs() + minus.abs() < 1e-14 && k as f64 > x + 10.0 {
                    break;
                }
                k += 1;
            }
            worst = worst.max((bessel_j(n, 2.0 * x).unwrap() - sum).abs());
        }
    }
    assert!(worst <= 1e-10, "addition theorem error {worst}");
}

#[test]
fn oscillation_onset_moves_with_order() {
    let mut last_location = 0.0;
    for n in [2usize, 5, 10, 20, 40, 80] {
        let (mut best, mut at) = (0.0f64, 0.0);
        let top = 2.0 * n as f64 + 10.0;
        let steps = 4000;
        for i in 0..=steps {
            let x = top * i as f64 / steps as f64;
            let v = bessel_j(n as i32, x).unwrap().abs();
            if v > best {
                best = v;
                at = x;
            }
        }
        assert!(at > last_location, "first maximum of J_{n} at {at}");
        assert!(at > 0.9 * n as f64 && at < n as f64 + 3.0 * (n as f64).cbrt() + 2.0);
        // O(n^{-1/3}) height
        let scaled = best * (n as f64).cbrt();
        assert!(scaled > 0.5 && scaled < 1.0, "n={n} scaled peak {scaled}");
        last_location = at;
    }
}

proptest! {
    #[test]
    fn bounded_by_one(n in -200i32..=200, x in 0.0f64..1.0e4) {
        prop_assert!(bessel_j(n, x).unwrap().abs() <= 1.0 + 1e-14);
    }

    #[test]
    fn order_parity(n in 0i32..=200, x in 0.0f64..500.0) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert_eq!(bessel_j(-n, x).unwrap(), sign * bessel_j(n, x).unwrap());
    }

    #[test]
    fn asymptotic_envelope_bound(n in 0i32..=40, scale in 10.0f64..200.0) {
        let x = scale * f64::from(n.max(1));
        prop_assert!(bessel_j(n, x).unwrap().abs() <= 1.1 * asymptotic_envelope(x));
    }

    #[test]
    fn three_term_recurrence(n in 1i32..=150, x in 0.5f64..2000.0) {
        let lhs = bessel_j(n - 1, x).unwrap() + bessel_j(n + 1, x).unwrap();
        let rhs = 2.0 * f64::from(n) / x * bessel_j(n, x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + 2.0 * f64::from(n) / x));
    }
}

#[test]
fn order_sweep_far_beyond_argument() {
    for &x in &[25.5, 30.98, 80.0, 400.0] {
        let top = (x as usize) * 3 + 60;
        let all = bessel_j_orders(top, x).unwrap();
        for (n, v) in all.iter().enumerate() {
            let scalar = bessel_j(n as i32, x).unwrap();
            assert!((v - scalar).abs() < 1e-13, "J_{n}({x}): {v} vs {scalar}");
        }
    }
}

