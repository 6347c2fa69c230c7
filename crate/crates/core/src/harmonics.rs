//! Real orthonormal spherical harmonics on S^{n-1} (probability measure).
//!
//! The basis is built by separation of variables. For `x = (x', t)` with
//! `t = x_n` and `x' = s y`, `s = sqrt(1 - t^2)`, the degree-`q` functions are
//!
//! ```text
//! c_{q,p} s^p C^{alpha}_{q-p}(t) Y_p(y),   alpha = p + (n - 2) / 2,
//! ```
//!
//! for `p = 0..=q` and `Y_p` running over the degree-`p` basis of S^{n-2}; on
//! the circle the basis is `1, sqrt2 cos(q phi), sqrt2 sin(q phi)`. Functions
//! are ordered by `p` and then by the order of the lower-dimensional basis.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::linalg::least_squares;
use crate::special::{binomial, factorial, gamma_half};

pub const MAX_DEGREE: usize = 12;

/// Dimension of the space of degree-`q` harmonics on S^{n-1}.
pub fn sph_dim(n: usize, q: usize) -> usize {
    let (n, q) = (n as i64, q as i64);
    (binomial(n + q - 1, q) - binomial(n + q - 3, q - 2)) as usize
}

/// Normalizing constants for one ambient dimension, cached per `(n, Q)`.
#[derive(Debug)]
pub struct HarmonicBasis {
    n: usize,
    max_degree: usize,
    /// `consts[q][p]` for this dimension.
    consts: Vec<Vec<f64>>,
    lower: Option<Arc<HarmonicBasis>>,
}

impl HarmonicBasis {
    pub fn get(n: usize, max_degree: usize) -> Result<Arc<HarmonicBasis>> {
        if !(2..=crate::geometry::MAX_DIM).contains(&n) {
            return input(format!("spherical harmonics need 2 <= n <= 6, got {n}"));
        }
        if max_degree > MAX_DEGREE {
            return input(format!("degree {max_degree} above the supported maximum {MAX_DEGREE}"));
        }
        Ok(Self::cached(n, max_degree))
    }

    fn cached(n: usize, max_degree: usize) -> Arc<HarmonicBasis> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<HarmonicBasis>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(b) = cache.lock().expect("harmonic cache").get(&(n, max_degree)) {
            return Arc::clone(b);
        }
        let built = Arc::new(Self::build(n, max_degree));
        Arc::clone(cache.lock().expect("harmonic cache").entry((n, max_degree)).or_insert(built))
    }

    fn build(n: usize, max_degree: usize) -> HarmonicBasis {
        if n == 2 {
            return HarmonicBasis {
                n,
                max_degree,
                consts: Vec::new(),
                lower: None,
            };
        }
        let d = n as f64;
        let sphere_weight = PI.sqrt() * gamma_half((d - 1.0) / 2.0) / gamma_half(d / 2.0);
        let mut consts: Vec<Vec<f64>> = (0..=max_degree)
            .map(|q| {
                (0..=q)
                    .map(|p| {
                        let alpha = p as f64 + (d - 2.0) / 2.0;
                        let k = q - p;
                        let two_alpha = 2 * p + n - 2;
                        let h = PI * 2f64.powf(1.0 - 2.0 * alpha) * factorial(k + two_alpha - 1)
                            / (factorial(k) * (k as f64 + alpha) * gamma_half(alpha).powi(2));
                        (sphere_weight / h).sqrt()
                    })
                    .collect()
            })
            .collect();
        // The constant function; the formula gives 1 up to rounding.
        consts[0][0] = 1.0;
        HarmonicBasis {
            n,
            max_degree,
            consts,
            lower: Some(Self::cached(n - 1, max_degree)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// All basis values at a unit vector, one block per degree.
    pub fn eval_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), self.n);
        let big_q = self.max_degree;
        if self.n == 2 {
            let phi = x[1].atan2(x[0]);
            return (0..=big_q)
                .map(|q| {
                    if q == 0 {
                        vec![1.0]
                    } else {
                        let a = q as f64 * phi;
                        vec![2f64.sqrt() * a.cos(), 2f64.sqrt() * a.sin()]
                    }
                })
                .collect();
        }
        let n = self.n;
        let t = x[n - 1].clamp(-1.0, 1.0);
        let s = (1.0 - t * t).max(0.0).sqrt();
        let y: Vec<f64> = if s > 1e-300 {
            x[..n - 1].iter().map(|v| v / s).collect()
        } else {
            let mut e = vec![0.0; n - 1];
            e[0] = 1.0;
            e
        };
        let lower = self.lower.as_ref().expect("lower basis").eval_all(&y);
        let mut s_pow = vec![1.0; big_q + 1];
        for p in 1..=big_q {
            s_pow[p] = s_pow[p - 1] * s;
        }
        // geg[p][k] = C^{alpha_p}_k(t)
        let geg: Vec<Vec<f64>> = (0..=big_q)
            .map(|p| gegenbauer_all(p as f64 + (n as f64 - 2.0) / 2.0, big_q - p, t))
            .collect();
        (0..=big_q)
            .map(|q| {
                let mut block = Vec::with_capacity(sph_dim(n, q));
                for p in 0..=q {
                    let factor = self.consts[q][p] * s_pow[p] * geg[p][q - p];
                    block.extend(lower[p].iter().map(|v| factor * v));
                }
                block
            })
            .collect()
    }
}

/// `C^alpha_0(t) .. C^alpha_kmax(t)` by the three-term recurrence.
pub fn gegenbauer_all(alpha: f64, kmax: usize, t: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(kmax + 1);
    c.push(1.0);
    if kmax >= 1 {
        c.push(2.0 * alpha * t);
    }
    for k in 2..=kmax {
        let kf = k as f64;
        let next = (2.0 * t * (kf + alpha - 1.0) * c[k - 1] - (kf + 2.0 * alpha - 2.0) * c[k - 2]) / kf;
        c.push(next);
    }
    c
}

fn check_unit(x: &[f64]) -> Result<()> {
    let len = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !((len - 1.0).abs() <= 1e-10) {
        return input(format!("point is not on the unit sphere (norm {len})"));
    }
    Ok(())
}

/// Value of basis function `j` of degree `q` at the unit vector `x`.
pub fn basis_eval(n: usize, q: usize, j: usize, x: &[f64]) -> Result<f64> {
    if x.len() != n {
        return input(format!("point has {} coordinates, expected {n}", x.len()));
    }
    check_unit(x)?;
    let dim = sph_dim(n, q);
    if j >= dim {
        return input(format!("index {j} out of range for degree {q} (dimension {dim})"));
    }
    Ok(HarmonicBasis::get(n, q)?.eval_all(x)[q][j])
}

/// Coefficient table of a function on S^{n-1}, one block per degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpansionFile", into = "ExpansionFile")]
pub struct HarmonicExpansion {
    n: usize,
    coeffs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionFile {
    pub n: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl TryFrom<ExpansionFile> for HarmonicExpansion {
    type Error = Error;

    fn try_from(f: ExpansionFile) -> Result<Self> {
        HarmonicExpansion::new(f.n, f.coeffs)
    }
}

impl From<HarmonicExpansion> for ExpansionFile {
    fn from(e: HarmonicExpansion) -> Self {
        ExpansionFile { n: e.n, coeffs: e.coeffs }
    }
}

/// Coefficients below this are treated as zero by the parity predicates.
pub const ZERO_TOL: f64 = 1e-10;

impl HarmonicExpansion {
    pub fn new(n: usize, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if !(2..=crate::geometry::MAX_DIM).contains(&n) {
            return input(format!("spherical harmonics need 2 <= n <= 6, got {n}"));
        }
        if coeffs.is_empty() || coeffs.len() > MAX_DEGREE + 1 {
            return input(format!("expansion needs between 1 and {} degree blocks", MAX_DEGREE + 1));
        }
        for (q, block) in coeffs.iter().enumerate() {
            if block.len() != sph_dim(n, q) {
                return input(format!(
                    "degree {q} block has {} coefficients, expected {}",
                    block.len(),
                    sph_dim(n, q)
                ));
            }
            if block.iter().any(|c| !c.is_finite()) {
                return input("expansion coefficients must be finite");
            }
        }
        Ok(HarmonicExpansion { n, coeffs })
    }

    pub fn zeros(n: usize, max_degree: usize) -> Result<Self> {
        Self::new(n, (0..=max_degree).map(|q| vec![0.0; sph_dim(n, q)]).collect())
    }

    /// A single basis function.
    pub fn unit(n: usize, max_degree: usize, q: usize, j: usize) -> Result<Self> {
        let mut e = Self::zeros(n, max_degree)?;
        if q > max_degree || j >= sph_dim(n, q) {
            return input(format!("no basis function ({q}, {j}) up to degree {max_degree}"));
        }
        e.coeffs[q][j] = 1.0;
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn block(&self, q: usize) -> &[f64] {
        &self.coeffs[q]
    }

    pub fn block_mut(&mut self, q: usize) -> &mut [f64] {
        &mut self.coeffs[q]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn is_zero_block(&self, q: usize) -> bool {
        self.coeffs.get(q).is_none_or(|b| b.iter().all(|c| c.abs() <= ZERO_TOL))
    }

    pub fn is_zero(&self) -> bool {
        (0..self.coeffs.len()).all(|q| self.is_zero_block(q))
    }

    /// True when every block of the opposite parity vanishes.
    pub fn has_parity(&self, s: usize) -> bool {
        (0..self.coeffs.len()).filter(|q| q % 2 != s % 2).all(|q| self.is_zero_block(q))
    }

    /// The part supported on degrees of parity `s`.
    pub fn parity_part(&self, s: usize) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(q, b)| if q % 2 == s % 2 { b.clone() } else { vec![0.0; b.len()] })
            .collect();
        HarmonicExpansion { n: self.n, coeffs }
    }

    pub fn scaled(&self, t: f64) -> Self {
        HarmonicExpansion {
            n: self.n,
            coeffs: self.coeffs.iter().map(|b| b.iter().map(|c| c * t).collect()).collect(),
        }
    }

    /// Sum of two expansions on the same sphere; the shorter one is padded.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return input("expansions live on different spheres");
        }
        let big_q = self.max_degree().max(other.max_degree());
        let coeffs = (0..=big_q)
            .map(|q| {
                let a = self.coeffs.get(q);
                let b = other.coeffs.get(q);
                (0..sph_dim(self.n, q))
                    .map(|j| a.map_or(0.0, |v| v[j]) + b.map_or(0.0, |v| v[j]))
                    .collect()
            })
            .collect();
        Ok(HarmonicExpansion { n: self.n, coeffs })
    }

    /// Value of the expansion at a unit vector.
    pub fn synth(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return input("point has the wrong dimension");
        }
        check_unit(x)?;
        Ok(self.synth_unchecked(x))
    }

    pub(crate) fn synth_unchecked(&self, x: &[f64]) -> f64 {
        let basis = HarmonicBasis::cached(self.n, self.max_degree());
        let values = basis.eval_all(x);
        values
            .iter()
            .zip(&self.coeffs)
            .map(|(v, c)| v.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Squared norm of the degree-`q` component (Parseval, probability measure).
pub fn degree_norm_sq(e: &HarmonicExpansion, q: usize) -> Result<f64> {
    if q > e.max_degree() {
        return input(format!("degree {q} above the expansion's maximum {}", e.max_degree()));
    }
    Ok(e.coeffs[q].iter().map(|c| c * c).sum())
}

/// Quadrature rule on S^{n-1} with weights summing to 1.
#[derive(Debug, Clone)]
pub struct Design {
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Number of points of [`quadrature_design`] for the given exactness.
pub fn design_size(n: usize, exact_degree: usize) -> usize {
    let circle = exact_degree + 1;
    let gauss = exact_degree / 2 + 1;
    circle * gauss.pow(n.saturating_sub(2) as u32)
}

/// Product rule exact for polynomials of degree `exact_degree`: equal
/// angles on the circle, Gauss nodes for the weight `(1 - t^2)^{(d-3)/2}`
/// in each further dimension `d`.
pub fn quadrature_design(n: usize, exact_degree: usize) -> Result<Design> {
    if !(2..=crate::geometry::MAX_DIM).contains(&n) {
        return input(format!("designs need 2 <= n <= 6, got {n}"));
    }
    let m = exact_degree + 1;
    let mut points: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / m as f64;
            vec![a.cos(), a.sin()]
        })
        .collect();
    let mut weights = vec![1.0 / m as f64; m];
    for d in 3..=n {
        let (nodes, w) = gauss_gegenbauer(exact_degree / 2 + 1, (d as f64 - 3.0) / 2.0)?;
        let mut next_p = Vec::with_capacity(points.len() * nodes.len());
        let mut next_w = Vec::with_capacity(points.len() * nodes.len());
        for (t, wt) in nodes.iter().zip(&w) {
            let s = (1.0 - t * t).sqrt();
            for (p, wp) in points.iter().zip(&weights) {
                let mut x: Vec<f64> = p.iter().map(|v| v * s).collect();
                x.push(*t);
                next_p.push(x);
                next_w.push(wt * wp);
            }
        }
        points = next_p;
        weights = next_w;
    }
    Ok(Design { n, points, weights })
}

/// Gauss rule for `(1 - t^2)^beta` on [-1, 1], weights normalized to 1,
/// by the Golub-Welsch eigenvalue method.
pub fn gauss_gegenbauer(count: usize, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if count == 0 {
        return input("a Gauss rule needs at least one node");
    }
    let lam = beta + 0.5;
    let jac = DMatrix::from_fn(count, count, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            (k * (k + 2.0 * lam - 1.0) / (4.0 * (k + lam) * (k + lam - 1.0))).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..count)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok((pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub expansion: HarmonicExpansion,
    pub residual_rms: f64,
    pub condition: f64,
}

/// Least-squares fit of sampled values by harmonics up to degree `max_degree`.
pub fn project(samples: &[(Vec<f64>, f64)], n: usize, max_degree: usize) -> Result<Projection> {
    let basis = HarmonicBasis::get(n, max_degree)?;
    let unknowns: usize = (0..=max_degree).map(|q| sph_dim(n, q)).sum();
    if samples.len() < unknowns {
        return input(format!(
            "under-determined projection: {} samples for {unknowns} coefficients",
            samples.len()
        ));
    }
    let mut design = DMatrix::zeros(samples.len(), unknowns);
    for (row, (x, _)) in samples.iter().enumerate() {
        if x.len() != n {
            return input("sample point has the wrong dimension");
        }
        check_unit(x)?;
        for (col, v) in basis.eval_all(x).into_iter().flatten().enumerate() {
            design[(row, col)] = v;
        }
    }
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let fit = least_squares(&design, &rhs, 1e-12)?;
    let mut coeffs = Vec::with_capacity(max_degree + 1);
    let mut offset = 0;
    for q in 0..=max_degree {
        let d = sph_dim(n, q);
        coeffs.push(fit.coefficients[offset..offset + d].to_vec());
        offset += d;
    }
    Ok(Projection {
        expansion: HarmonicExpansion::new(n, coeffs)?,
        residual_rms: fit.residual_rms,
        condition: fit.condition,
    })
}

/// Coefficients by quadrature inner products `sum_i w_i f(x_i) Y(x_i)`.
pub fn project_with_design(design: &Design, values: &[f64], max_degree: usize) -> Result<HarmonicExpansion> {
    if values.len() != design.points.len() {
        return input("one value per design point is required");
    }
    let basis = HarmonicBasis::get(design.n, max_degree)?;
    let mut coeffs: Vec<Vec<f64>> = (0..=max_degree).map(|q| vec![0.0; sph_dim(design.n, q)]).collect();
    for ((x, w), f) in design.points.iter().zip(&design.weights).zip(values) {
        for (block, vals) in coeffs.iter_mut().zip(basis.eval_all(x)) {
            block.iter_mut().zip(vals).for_each(|(c, v)| *c += w * f * v);
        }
    }
    HarmonicExpansion::new(design.n, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        for n in 2..=6 {
            assert_eq!(sph_dim(n, 0), 1);
            assert_eq!(sph_dim(n, 1), n);
        }
        for q in 1..=12 {
            assert_eq!(sph_dim(2, q), 2);
        }
        assert_eq!(sph_dim(3, 2), 5);
        assert_eq!(sph_dim(3, 7), 15);
        assert_eq!(sph_dim(4, 3), 16);
    }

    #[test]
    fn gauss_rule_integrates_moments() {
        // int t^2 (1-t^2)^beta / int (1-t^2)^beta = 1 / (2 beta + 3).
        for beta in [0.0, 0.5, 1.0, 1.5] {
            let (t, w) = gauss_gegenbauer(4, beta).unwrap();
            let m2: f64 = t.iter().zip(&w).map(|(t, w)| w * t * t).sum();
            assert!((m2 - 1.0 / (2.0 * beta + 3.0)).abs() < 1e-14, "beta={beta}");
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        for n in 2..=5 {
            let big_q = 6;
            let design = quadrature_design(n, 2 * big_q).unwrap();
            let basis = HarmonicBasis::get(n, big_q).unwrap();
            let total: usize = (0..=big_q).map(|q| sph_dim(n, q)).sum();
            let mut gram = vec![0.0; total * total];
            for (x, w) in design.points.iter().zip(&design.weights) {
                let v: Vec<f64> = basis.eval_all(x).into_iter().flatten().collect();
                for a in 0..total {
                    for b in 0..total {
                        gram[a * total + b] += w * v[a] * v[b];
                    }
                }
            }
            for a in 0..total {
                for b in 0..total {
                    let target = if a == b { 1.0 } else { 0.0 };
                    assert!((gram[a * total + b] - target).abs() < 1e-10, "n={n} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn parity_and_constant() {
        let x = [0.48, -0.6, 0.64];
        let mx: Vec<f64> = x.iter().map(|v| -v).collect();
        for q in 0..=5 {
            for j in 0..sph_dim(3, q) {
                let a = basis_eval(3, q, j, &x).unwrap();
                let b = basis_eval(3, q, j, &mx).unwrap();
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                assert!((b - sign * a).abs() < 1e-13);
            }
        }
        assert_eq!(basis_eval(4, 0, 0, &[0.5, 0.5, 0.5, 0.5]).unwrap(), 1.0);
        assert!(basis_eval(3, 2, 5, &x).is_err());
        assert!(basis_eval(3, 2, 0, &[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn circle_basis_is_cos_sin() {
        let phi: f64 = 0.7;
        let x = [phi.cos(), phi.sin()];
        assert!((basis_eval(2, 3, 0, &x).unwrap() - 2f64.sqrt() * (3.0 * phi).cos()).abs() < 1e-14);
        assert!((basis_eval(2, 3, 1, &x).unwrap() - 2f64.sqrt() * (3.0 * phi).sin()).abs() < 1e-14);
    }

    #[test]
    fn projection_recovers_basis_functions() {
        let design = quadrature_design(3, 8).unwrap();
        let samples: Vec<(Vec<f64>, f64)> = design
            .points
            .iter()
            .map(|x| (x.clone(), basis_eval(3, 3, 2, x).unwrap()))
            .collect();
        let p = project(&samples, 3, 4).unwrap();
        for q in 0..=4 {
            for (j, c) in p.expansion.block(q).iter().enumerate() {
                let target = if (q, j) == (3, 2) { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 1e-8);
            }
        }
        let few = &samples[..10];
        assert!(matches!(project(few, 3, 4), Err(Error::Input(_))));
    }

    #[test]
    fn expansion_json_round_trip() {
        let e = HarmonicExpansion::new(3, vec![vec![0.1], vec![0.0; 3], vec![1.0 / 3.0, 0.0, 2e-17, 0.0, -5.5]]).unwrap();
        let back = HarmonicExpansion::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(e, back);
        assert!(HarmonicExpansion::from_json(r#"{"n":3,"coeffs":[[1.0],[1.0]]}"#).is_err());
    }
}
