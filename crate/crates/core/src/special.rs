//! Small closed-form helpers: binomials, half-integer gamma values and unit
//! ball volumes.

use std::f64::consts::PI;

pub fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Gamma function at a positive multiple of 1/2.
pub fn gamma_half(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(
        twice >= 1.0 && (2.0 * x - twice).abs() < 1e-12,
        "gamma_half needs a positive half-integer, got {x}"
    );
    let twice = twice as i64;
    let (mut acc, mut arg) = if twice % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    while arg + 0.25 < x {
        acc *= arg;
        arg += 1.0;
    }
    acc
}

/// Volume of the unit ball in R^j, `pi^{j/2} / Gamma(j/2 + 1)`.
pub fn kappa(j: usize) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / j as f64 * kappa(j - 2),
    }
}

/// Surface area of the unit sphere S^{n-1}.
pub fn sphere_area(n: usize) -> f64 {
    n as f64 * kappa(n)
}
