//! Mixed volumes by polynomial coefficient extraction, the permanent oracle
//! for boxes, intrinsic volumes from the Steiner polynomial, and the one-sided
//! derivative along the ball.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, numerical, Result};
use crate::geometry::{ball_polytope, minkowski_combination, minkowski_sum, scale, Polytope};
use crate::linalg::least_squares;
use crate::special::{binomial, factorial, kappa};

const FIT_RCOND: f64 = 1e-13;

/// Relative RMS residual above which a fit is treated as a geometry failure.
const FIT_RESIDUAL_TOL: f64 = 1e-7;

const GRID_SEED: u64 = 0x6d69_7865_6476;

/// Smallest accepted number of grid values per variable.
pub fn min_fit_grid(n: usize) -> usize {
    n + 1
}

pub fn default_fit_grid(n: usize) -> usize {
    n + 2
}

/// `V(K_1, ..., K_n)`, with `fit_grid` values `{1..g}/g` per distinct body.
///
/// Repeated bodies (bitwise equal vertex lists) share one variable, so
/// `V(K, K, L)` is a two-variable fit.
pub fn mixed_volume(bodies: &[&Polytope], fit_grid: usize) -> Result<f64> {
    let n = bodies.len();
    if n == 0 {
        return input("mixed volume of an empty list");
    }
    if let Some(b) = bodies.iter().find(|b| b.dim() != n) {
        return input(format!("{n} bodies given but one lives in R^{}", b.dim()));
    }
    if fit_grid < min_fit_grid(n) {
        return input(format!("fit grid {fit_grid} below the minimum {} for n={n}", min_fit_grid(n)));
    }

    let mut distinct: Vec<&Polytope> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for b in bodies {
        match distinct.iter().position(|d| d.coords() == b.coords()) {
            Some(i) => mult[i] += 1,
            None => {
                distinct.push(b);
                mult.push(1);
            }
        }
    }
    let r = distinct.len();
    if r == 1 {
        return Ok(distinct[0].volume());
    }

    let monomials = exponents(r, n);
    let grid = fit_points(r, fit_grid, monomials.len());
    let g = fit_grid as f64;
    let values: Vec<f64> = grid
        .par_iter()
        .map(|point| {
            let terms: Vec<(f64, &Polytope)> =
                point.iter().zip(&distinct).map(|(&i, &b)| (i as f64 / g, b)).collect();
            minkowski_combination(&terms).map(|p| p.volume())
        })
        .collect::<Result<_>>()?;

    let design = DMatrix::from_fn(grid.len(), monomials.len(), |row, col| {
        grid[row]
            .iter()
            .zip(&monomials[col])
            .map(|(&i, &e)| (i as f64 / g).powi(e as i32))
            .product()
    });
    let fit = checked_fit(&design, &values)?;
    let target = monomials.iter().position(|e| *e == mult).expect("target monomial");
    let multinomial: f64 = mult.iter().map(|&a| factorial(a)).product();
    Ok(fit[target] * multinomial / factorial(n))
}

/// All exponent vectors of length `r` summing to `n`, in lexicographic order.
fn exponents(r: usize, n: usize) -> Vec<Vec<usize>> {
    if r == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut tail in exponents(r - 1, n - first) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Integer grid indices in `1..=g`: the full tensor grid for up to three
/// variables, a fixed pseudo-random subset of size `3 * unknowns` above that.
fn fit_points(r: usize, g: usize, unknowns: usize) -> Vec<Vec<usize>> {
    if r <= 3 {
        let mut points = vec![Vec::new()];
        for _ in 0..r {
            points = points
                .into_iter()
                .flat_map(|p| {
                    (1..=g).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        points
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED ^ ((r as u64) << 8) ^ g as u64);
        (0..3 * unknowns)
            .map(|_| (0..r).map(|_| rng.random_range(1..=g)).collect())
            .collect()
    }
}

fn checked_fit(design: &DMatrix<f64>, values: &[f64]) -> Result<Vec<f64>> {
    let b = DVector::from_column_slice(values);
    let fit = least_squares(design, &b, FIT_RCOND)?;
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if fit.residual_rms > FIT_RESIDUAL_TOL * peak.max(f64::MIN_POSITIVE) {
        return numerical(format!(
            "volume samples are not polynomial (relative residual {:.3e}, condition {:.3e})",
            fit.residual_rms / peak,
            fit.condition
        ));
    }
    Ok(fit.coefficients)
}

/// Permanent by Ryser's inclusion-exclusion formula with a Gray-code walk.
pub fn permanent(a: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return input("permanent needs a square matrix");
    }
    if n == 0 {
        return Ok(1.0);
    }
    if n > 30 {
        return input("permanent limited to 30 x 30 matrices");
    }
    let mut row_sums = vec![0.0; n];
    let mut total = 0.0;
    let mut gray: u64 = 0;
    for step in 1u64..(1 << n) {
        let next = step ^ (step >> 1);
        let col = (next ^ gray).trailing_zeros() as usize;
        let sign = if next & (1 << col) != 0 { 1.0 } else { -1.0 };
        for (s, row) in row_sums.iter_mut().zip(a) {
            *s += sign * row[col];
        }
        gray = next;
        let prod: f64 = row_sums.iter().product();
        if (n - next.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    Ok(total)
}

/// Mixed volume of axis-aligned boxes; row `i` holds the edges of box `i`.
pub fn box_mixed_volume_oracle(edges: &[Vec<f64>]) -> Result<f64> {
    if edges.iter().flatten().any(|&e| !(e >= 0.0)) {
        return input("box edges must be non-negative");
    }
    Ok(permanent(edges)? / factorial(edges.len()))
}

/// Coefficients `c_0..c_n` of `lambda -> vol(K + lambda L)`.
pub fn steiner_polynomial(k: &Polytope, l: &Polytope, fit_grid: usize) -> Result<Vec<f64>> {
    let n = k.dim();
    if l.dim() != n {
        return input("Steiner polynomial of bodies in different dimensions");
    }
    if fit_grid < min_fit_grid(n) {
        return input(format!("fit grid {fit_grid} below the minimum {} for n={n}", min_fit_grid(n)));
    }
    let g = fit_grid as f64;
    let lambdas: Vec<f64> = (1..=fit_grid).map(|i| i as f64 / g).collect();
    let values: Vec<f64> = lambdas
        .par_iter()
        .map(|&t| minkowski_sum(k, &scale(l, t)?).map(|p| p.volume()))
        .collect::<Result<_>>()?;
    let design = DMatrix::from_fn(fit_grid, n + 1, |i, j| lambdas[i].powi(j as i32));
    checked_fit(&design, &values)
}

/// `mu_k` of the unit ball, `binom(n,k) kappa_n / kappa_{n-k}`.
pub fn mu_ball(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return input(format!("intrinsic volume index {k} exceeds dimension {n}"));
    }
    Ok(binomial(n as i64, k as i64) * kappa(n) / kappa(n - k))
}

/// A polytopal ball together with its volume-equivalent radius
/// `rho = (vol / kappa_n)^{1/n}`.
#[derive(Debug, Clone)]
pub struct ReferenceBall {
    pub polytope: Polytope,
    pub resolution: usize,
    pub rho: f64,
}

impl ReferenceBall {
    pub fn new(n: usize, resolution: usize) -> Result<Self> {
        let polytope = ball_polytope(n, 1.0, resolution)?;
        let rho = (polytope.volume() / kappa(n)).powf(1.0 / n as f64);
        Ok(ReferenceBall { polytope, resolution, rho })
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    /// `mu_k` of the polytopal ball under the same normalization that
    /// [`intrinsic_volumes`] applies.
    pub fn mu(&self, k: usize) -> Result<f64> {
        Ok(mu_ball(self.dim(), k)? * self.rho.powi(k as i32))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinerCoefficients {
    pub n: usize,
    /// `mu_0 .. mu_n`.
    pub mu: Vec<f64>,
    /// Raw coefficients of `vol(K + lambda B)` for the polytopal ball `B`.
    pub steiner: Vec<f64>,
    pub ball_resolution: usize,
    pub fit_grid: usize,
}

/// Intrinsic volumes from the Steiner polynomial of the polytopal ball.
///
/// The coefficient of `lambda^j` is divided by `kappa_j rho^j`, so that the
/// polytopal ball plays the role of a Euclidean ball of equal volume and
/// `mu_0 = 1` holds up to fit precision.
pub fn intrinsic_volumes(p: &Polytope, ball_resolution: usize, fit_grid: usize) -> Result<SteinerCoefficients> {
    let ball = ReferenceBall::new(p.dim(), ball_resolution)?;
    intrinsic_volumes_with(p, &ball, fit_grid)
}

pub fn intrinsic_volumes_with(p: &Polytope, ball: &ReferenceBall, fit_grid: usize) -> Result<SteinerCoefficients> {
    let n = p.dim();
    if ball.dim() != n {
        return input("reference ball has the wrong dimension");
    }
    let steiner = steiner_polynomial(p, &ball.polytope, fit_grid)?;
    let mu = (0..=n)
        .map(|k| {
            let j = n - k;
            steiner[j] / (kappa(j) * ball.rho.powi(j as i32))
        })
        .collect();
    Ok(SteinerCoefficients {
        n,
        mu,
        steiner,
        ball_resolution: ball.resolution,
        fit_grid,
    })
}

/// `1/2 d/dlambda phi(K + lambda B)` at 0, from one-sided differences at
/// `h` and `h/2` combined by Richardson extrapolation.
pub fn lefschetz_derivative<F>(phi: F, k: &Polytope, h: f64, ball_resolution: usize) -> Result<f64>
where
    F: Fn(&Polytope) -> Result<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return input(format!("step must be positive, got {h}"));
    }
    let ball = ball_polytope(k.dim(), 1.0, ball_resolution)?;
    let f0 = phi(k)?;
    let f1 = phi(&minkowski_sum(k, &scale(&ball, h)?)?)?;
    let f2 = phi(&minkowski_sum(k, &scale(&ball, h / 2.0)?)?)?;
    if ![f0, f1, f2].iter().all(|v| v.is_finite()) {
        return numerical("functional returned a non-finite value");
    }
    let d_full = (f1 - f0) / h;
    let d_half = (f2 - f0) / (h / 2.0);
    Ok(0.5 * (2.0 * d_half - d_full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn permanent_small_cases() {
        assert_eq!(permanent(&[vec![1.0, 1.0], vec![2.0, 3.0]]).unwrap(), 5.0);
        let rows = vec![vec![1.0, 1.0, 1.0], vec![2.0, 1.0, 1.0], vec![1.0, 1.0, 2.0]];
        assert_eq!(permanent(&rows).unwrap(), 11.0);
        assert!((box_mixed_volume_oracle(&rows).unwrap() - 11.0 / 6.0).abs() < 1e-15);
        for n in 1..=5 {
            let id: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
            assert!((box_mixed_volume_oracle(&id).unwrap() - 1.0 / factorial(n)).abs() < 1e-15);
        }
        let ones = vec![vec![1.0; 4]; 4];
        assert_eq!(permanent(&ones).unwrap(), 24.0);
    }

    #[test]
    fn exponent_enumeration() {
        let e = exponents(3, 2);
        assert_eq!(e.len(), 6);
        assert_eq!(e[0], vec![2, 0, 0]);
        assert_eq!(e[5], vec![0, 0, 2]);
    }

    #[test]
    fn worked_mixed_volumes() {
        let sq = Polytope::unit_cube(2).unwrap();
        assert!((mixed_volume(&[&sq, &sq], 3).unwrap() - 1.0).abs() < 1e-12);
        let b = Polytope::axis_box(&[2.0, 3.0]).unwrap();
        assert!((mixed_volume(&[&sq, &b], 3).unwrap() - 2.5).abs() < 1e-10);
        assert!(mixed_volume(&[&sq, &b], 2).is_err());
        assert!(mixed_volume(&[&sq], 3).is_err());
    }

    #[test]
    fn intrinsic_volumes_of_square_and_cube() {
        let sq = Polytope::unit_cube(2).unwrap();
        let mu = intrinsic_volumes(&sq, 1024, 5).unwrap().mu;
        assert!((mu[0] - 1.0).abs() < 1e-9);
        assert!((mu[1] - 2.0).abs() < 1e-3);
        assert!((mu[2] - 1.0).abs() < 1e-9);
        let cube = Polytope::unit_cube(3).unwrap();
        let mu = intrinsic_volumes(&cube, 256, 6).unwrap().mu;
        assert!((mu[0] - 1.0).abs() < 1e-9);
        assert!((mu[1] - 3.0).abs() < 0.05, "{mu:?}");
        assert!((mu[2] - 3.0).abs() < 0.05, "{mu:?}");
        assert!((mu[3] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mu_ball_values() {
        assert!((mu_ball(2, 1).unwrap() - PI).abs() < 1e-15);
        for n in 1..=6 {
            assert_eq!(mu_ball(n, 0).unwrap(), 1.0);
            assert!((mu_ball(n, n).unwrap() - kappa(n)).abs() < 1e-15);
        }
        assert!(mu_ball(3, 4).is_err());
    }

    #[test]
    fn derivative_of_volume_is_half_surface() {
        let cube = Polytope::unit_cube(3).unwrap();
        let d = lefschetz_derivative(|p| Ok(p.volume()), &cube, 1e-2, 128).unwrap();
        assert!((d - 3.0).abs() < 0.06, "{d}");
        let c = lefschetz_derivative(|_| Ok(7.0), &cube, 1e-2, 128).unwrap();
        assert_eq!(c, 0.0);
    }
}
