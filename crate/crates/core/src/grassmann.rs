//! Functions on Grassmannians: Haar sampling, the cosine kernel, highest
//! weight vectors, Radon and cosine transforms, and the sign checks built on
//! them.
//!
//! A subspace is carried by an orthonormal frame. Everything exported here
//! depends only on the span of the frame.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{input, numerical, Result};
use crate::frame::Frame;
use crate::geometry::{project, Polytope};
use crate::linalg::{det_complex_in_place, det_in_place, dot};
use crate::montecarlo::{estimate, estimate_many, stream_rng, Estimate, McConfig};
use crate::verdict::Verdict;

/// Haar-random `k`-frame in R^n: Gram-Schmidt on a Gaussian matrix, which
/// is QR with a positive diagonal.
pub fn haar_frame<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Frame {
    assert!(k <= n, "rank {k} exceeds dimension {n}");
    loop {
        let data: Vec<f64> = (0..n * k).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(f) = Frame::orthonormalize(n, k, data) {
            return f;
        }
    }
}

/// Haar-random `k`-frame inside span(E).
pub fn subframe_within<R: Rng + ?Sized>(e: &Frame, k: usize, rng: &mut R) -> Result<Frame> {
    if k > e.rank() {
        return input(format!("cannot pick a {k}-plane inside a {}-plane", e.rank()));
    }
    Ok(e.compose(&haar_frame(e.rank(), k, rng)))
}

/// `|det(E^T F)|`, the volume ratio of the projection of a unit cube in E
/// onto F.
pub fn cos_abs(e: &Frame, f: &Frame) -> Result<f64> {
    if e.rank() != f.rank() || e.ambient_dim() != f.ambient_dim() {
        return input(format!(
            "cosine of planes needs equal shapes, got {}x{} and {}x{}",
            e.ambient_dim(),
            e.rank(),
            f.ambient_dim(),
            f.rank()
        ));
    }
    Ok(cos_unchecked(e, f))
}

fn cos_unchecked(e: &Frame, f: &Frame) -> f64 {
    let mut g = e.cross_gram(f);
    det_in_place(&mut g, e.rank()).abs()
}

/// Orthonormal basis of the orthogonal complement, completed greedily from
/// the standard basis vector with the largest residual.
pub fn perp(e: &Frame) -> Frame {
    let n = e.ambient_dim();
    let mut basis: Vec<Vec<f64>> = (0..e.rank()).map(|j| e.column(j).to_vec()).collect();
    let mut out: Vec<f64> = Vec::with_capacity(n * (n - e.rank()));
    let mut used = vec![false; n];
    for _ in e.rank()..n {
        let mut best: (f64, usize, Vec<f64>) = (-1.0, 0, Vec::new());
        for i in (0..n).filter(|&i| !used[i]) {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let p = dot(&r, b);
                    r.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
                }
            }
            let len = dot(&r, &r).sqrt();
            if len > best.0 {
                best = (len, i, r);
            }
        }
        let (len, i, mut r) = best;
        used[i] = true;
        r.iter_mut().for_each(|x| *x /= len);
        out.extend_from_slice(&r);
        basis.push(r);
    }
    Frame::from_raw(n, n - e.rank(), out)
}

/// `lambda = (2m_1, ..., 2m_k, 0, ..., 0)` with
/// `m_1 >= ... >= m_{k-1} >= |m_k| >= 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HighestWeight {
    n: usize,
    k: usize,
    m: Vec<i64>,
}

impl HighestWeight {
    pub fn new(n: usize, m: Vec<i64>) -> Result<Self> {
        let k = m.len();
        if k == 0 || 2 * k > n {
            return input(format!("weight rank {k} must satisfy 1 <= k <= floor({n}/2)"));
        }
        for j in 0..k.saturating_sub(1) {
            let next = if j + 1 == k - 1 { m[j + 1].abs() } else { m[j + 1] };
            if m[j] < next {
                return input(format!("weight {m:?} is not dominant"));
            }
        }
        if k == 1 && m[0] < 0 && n != 2 {
            return input(format!("negative entry in weight {m:?} needs n = 2k"));
        }
        if k > 1 && m[k - 1] < 0 && 2 * k != n {
            return input(format!("negative last entry in weight {m:?} needs n = 2k"));
        }
        Ok(HighestWeight { n, k, m })
    }

    /// From the even entries of `lambda`; entries past `k` must vanish.
    pub fn from_lambda(n: usize, k: usize, lambda: &[i64]) -> Result<Self> {
        if lambda.iter().any(|l| l % 2 != 0) {
            return input(format!("weight {lambda:?} has odd entries"));
        }
        if lambda.iter().skip(k).any(|&l| l != 0) {
            return input(format!("weight {lambda:?} has non-zero entries beyond position {k}"));
        }
        let mut m: Vec<i64> = lambda.iter().take(k).map(|l| l / 2).collect();
        m.resize(k, 0);
        Self::new(n, m)
    }

    /// `(2m, 2, ..., 2, +-2)`, the weights used by the sign lemmas.
    pub fn pi_weight(n: usize, k: usize, m: i64, negative_last: bool) -> Result<Self> {
        if m < 1 {
            return input("the first weight entry must be at least 2");
        }
        let mut ms = vec![1; k];
        ms[0] = m;
        if negative_last {
            ms[k - 1] = -ms[k - 1];
        }
        Self::new(n, ms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> &[i64] {
        &self.m
    }

    pub fn lambda(&self) -> Vec<i64> {
        let mut l: Vec<i64> = self.m.iter().map(|x| 2 * x).collect();
        l.resize(self.n / 2, 0);
        l
    }

    /// Membership in the family `(2m, 2, ..., 2, +-2)` with `m >= 1`.
    pub fn in_pi(&self) -> bool {
        self.m[self.k - 1] != 0 && (self.k < 2 || self.m[1].abs() <= 1)
    }
}

/// Highest weight vector `h_lambda(E)`.
///
/// Row `r` of `A[l]` is `x_{2r-1} + i x_{2r}` restricted to the frame
/// columns. When `m_k < 0` the last row of `A[k]` is conjugated, which turns
/// the torus weight of the last factor from `+2` into `-2`.
pub fn hw_vector(w: &HighestWeight, e: &Frame) -> Result<Complex64> {
    if e.rank() != w.k || e.ambient_dim() != w.n {
        return input(format!(
            "weight for Gr_{}(R^{}) applied to a {}-frame in R^{}",
            w.k,
            w.n,
            e.rank(),
            e.ambient_dim()
        ));
    }
    Ok(hw_unchecked(w, e))
}

fn hw_unchecked(w: &HighestWeight, e: &Frame) -> Complex64 {
    let k = w.k;
    let rows: Vec<Vec<Complex64>> = (0..k)
        .map(|r| {
            let conj = r == k - 1 && w.m[k - 1] < 0;
            (0..k)
                .map(|c| {
                    let im = e.get(2 * r + 1, c);
                    Complex64::new(e.get(2 * r, c), if conj { -im } else { im })
                })
                .collect()
        })
        .collect();
    let mut value = Complex64::new(1.0, 0.0);
    let mut buf = vec![Complex64::new(0.0, 0.0); k * k];
    for l in 1..=k {
        let exp = if l < k { w.m[l - 1] - w.m[l].abs() } else { w.m[k - 1].abs() };
        if exp == 0 {
            continue;
        }
        for a in 0..l {
            for b in 0..l {
                buf[a * l + b] = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
            }
        }
        let det = det_complex_in_place(&mut buf[..l * l], l);
        value *= det.powu(exp as u32);
    }
    value
}

/// `(nu)_k = nu (nu + 1) ... (nu + k - 1)`.
pub fn pochhammer(nu: f64, k: u32) -> f64 {
    (0..k).map(|j| nu + j as f64).product()
}

/// Cosine-transform eigenvalue on `H_lambda` with the free positive
/// constant set to 1.
pub fn cosine_eigenvalue(n: usize, k: usize, w: &HighestWeight) -> Result<f64> {
    check_weight(n, k, w)?;
    Ok((1..=k)
        .map(|j| {
            let a = w.m[j - 1].unsigned_abs() as u32;
            let jf = j as f64;
            pochhammer(1.0 + jf / 2.0 - a as f64, a) / pochhammer(1.0 + n as f64 / 2.0 - jf / 2.0, a)
        })
        .product())
}

/// Sign of [`cosine_eigenvalue`] in integer arithmetic: every Pochhammer
/// factor is a half-integer, so doubling makes it exact.
pub fn cosine_eigenvalue_sign(n: usize, k: usize, w: &HighestWeight) -> Result<i32> {
    check_weight(n, k, w)?;
    let mut sign = 1;
    for j in 1..=k {
        let a = w.m[j - 1].abs();
        for i in 0..a {
            let twice = 2 + j as i64 - 2 * a + 2 * i;
            if twice == 0 {
                return Ok(0);
            }
            if twice < 0 {
                sign = -sign;
            }
        }
    }
    Ok(sign)
}

fn check_weight(n: usize, k: usize, w: &HighestWeight) -> Result<()> {
    if w.n != n || w.k != k {
        return input(format!("weight belongs to Gr_{}(R^{}), not Gr_{k}(R^{n})", w.k, w.n));
    }
    Ok(())
}

// Stream ids keep the estimators statistically independent for one seed.
const STREAM_RADON: u64 = 1;
const STREAM_COSINE: u64 = 2;
const STREAM_CROFTON: u64 = 3;
const STREAM_LEFSCHETZ: u64 = 4;
const STREAM_POINTS: u64 = 5;
const STREAM_SIGN: u64 = 6;

/// `(R_{k,l} f)(E)`: average of `f` over the `k`-planes inside `E`.
/// Exact when `k = l`.
pub fn radon_estimate<F>(f: F, k: usize, e: &Frame, cfg: &McConfig) -> Result<Estimate>
where
    F: Fn(&Frame) -> Complex64 + Sync,
{
    if k > e.rank() {
        return input(format!("Radon transform R_{{{k},{}}} needs k <= l", e.rank()));
    }
    cfg.validate()?;
    if k == e.rank() {
        return Ok(Estimate::exact(f(e)));
    }
    estimate(cfg, STREAM_RADON, |rng| f(&e.compose(&haar_frame(e.rank(), k, rng))))
}

/// `(T_k f)(E)`: average of `|cos(E, F)| f(F)` over Haar `F`.
pub fn cosine_transform_estimate<F>(f: F, k: usize, e: &Frame, cfg: &McConfig) -> Result<Estimate>
where
    F: Fn(&Frame) -> Complex64 + Sync,
{
    if k != e.rank() {
        return input(format!("cosine transform on Gr_{k} evaluated at a {}-plane", e.rank()));
    }
    let n = e.ambient_dim();
    estimate(cfg, STREAM_COSINE, |rng| {
        let g = haar_frame(n, k, rng);
        f(&g) * cos_unchecked(e, &g)
    })
}

/// Klain function of the Crofton valuation with density `f`; the same
/// estimator (and random stream) as [`cosine_transform_estimate`].
pub fn klain_of_crofton<F>(f: F, k: usize, e: &Frame, cfg: &McConfig) -> Result<Estimate>
where
    F: Fn(&Frame) -> Complex64 + Sync,
{
    cosine_transform_estimate(f, k, e, cfg)
}

/// `T_{k+l}(R_{k,k+l} f)(E)` for `E` of rank `k + l`.
pub fn lefschetz_on_crofton<F>(f: F, k: usize, l: usize, e: &Frame, cfg: &McConfig) -> Result<Estimate>
where
    F: Fn(&Frame) -> Complex64 + Sync,
{
    let n = e.ambient_dim();
    if k + l > n || e.rank() != k + l {
        return input(format!("need a ({k}+{l})-plane in R^{n}, got rank {}", e.rank()));
    }
    if l == 0 {
        return klain_of_crofton(f, k, e, cfg);
    }
    estimate(cfg, STREAM_LEFSCHETZ, |rng| {
        let g = haar_frame(n, k + l, rng);
        let inner = g.compose(&haar_frame(k + l, k, rng));
        f(&inner) * cos_unchecked(e, &g)
    })
}

/// Crofton valuation `K -> int f(E) vol_k(pi_E K) dE`.
pub fn crofton_evaluate<F>(f: F, k: usize, body: &Polytope, cfg: &McConfig) -> Result<Estimate>
where
    F: Fn(&Frame) -> f64 + Sync,
{
    let n = body.dim();
    if k == 0 || k > n {
        return input(format!("Crofton degree {k} outside 1..={n}"));
    }
    cfg.validate()?;
    if body.vertex_count() == 1 {
        return Ok(Estimate::exact(Complex64::new(0.0, 0.0)));
    }
    estimate(cfg, STREAM_CROFTON, |rng| {
        let e = haar_frame(n, k, rng);
        let vol = project(body, &e).map(|p| p.volume()).unwrap_or(f64::NAN);
        Complex64::new(f(&e) * vol, 0.0)
    })
}

/// Which transform identity a sign report checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignLemma {
    /// `perp^* R_{k,n-k}` on `H_lambda`: sign `(-1)^{m-1+k}`.
    #[serde(rename = "signR")]
    Radon,
    /// `T_k` on `H_lambda`: sign `(-1)^{m-1}`.
    #[serde(rename = "signT")]
    Cosine,
    /// `T_{n-k} R_{k,n-k}` against `perp^*`: sign `(-1)^k`.
    #[serde(rename = "signTR")]
    CosineRadon,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignOptions {
    pub samples: usize,
    pub seed: u64,
    pub test_points: usize,
    /// Candidates with `|h| < threshold * max|h|` are rejected.
    pub threshold: f64,
    /// Subframes averaged per outer sample in the composite estimator.
    pub inner_samples: usize,
}

impl Default for SignOptions {
    fn default() -> Self {
        SignOptions {
            samples: crate::montecarlo::DEFAULT_SAMPLES,
            seed: 42,
            test_points: 5,
            threshold: 0.5,
            inner_samples: 4,
        }
    }
}

/// Dispersion bound required for a verdict.
pub const MAX_REL_STDDEV: f64 = 0.2;
/// Imaginary residue bound, relative to the real part.
pub const MAX_IMAG_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct TransformSignReport {
    pub lemma: SignLemma,
    pub n: usize,
    pub k: usize,
    pub weight: HighestWeight,
    pub test_points: Vec<Frame>,
    pub estimated_ratio: Vec<Complex64>,
    pub ratio_std_err: Vec<f64>,
    pub mean_scale: Complex64,
    pub sign: i32,
    pub expected_sign: i32,
    pub rel_stddev: f64,
    pub samples: usize,
    pub seed: u64,
    pub verdict: Verdict,
}

/// `perp^* R_{k,n-k} h_lambda` compared with `h_lambda`.
pub fn verify_sign_radon(n: usize, k: usize, m: i64, opts: &SignOptions) -> Result<TransformSignReport> {
    let w = sign_weight(n, k, m)?;
    let points = select_test_points(&w, opts)?;
    let cfg = McConfig::new(opts.samples, opts.seed);
    let targets: Vec<Frame> = points.iter().map(|(e, _)| perp(e)).collect();
    let est = estimate_many(&cfg, STREAM_SIGN, targets.len(), |rng, out| {
        let z = haar_frame(n - k, k, rng);
        for (o, g) in out.iter_mut().zip(&targets) {
            *o = hw_unchecked(&w, &g.compose(&z));
        }
    })?;
    let expected = if (m - 1 + k as i64) % 2 == 0 { 1 } else { -1 };
    Ok(build_report(SignLemma::Radon, w, points, &est, expected, opts))
}

/// `T_{n-k} R_{k,n-k} h_lambda` at `E` compared with `h_lambda(perp E)`.
pub fn verify_sign_tr(n: usize, k: usize, m: i64, opts: &SignOptions) -> Result<TransformSignReport> {
    let w = sign_weight(n, k, m)?;
    if opts.inner_samples == 0 {
        return input("inner sample count must be positive");
    }
    let points = select_test_points(&w, opts)?;
    let evals: Vec<Frame> = points.iter().map(|(p, _)| perp(p)).collect();
    let torus = TorusAverage::new(&w);
    let cfg = McConfig::new(opts.samples, opts.seed);
    let inner = opts.inner_samples;
    let est = estimate_many(&cfg, STREAM_SIGN, evals.len(), |rng, out| {
        let g = haar_frame(n, n - k, rng);
        let mut hbar = Complex64::new(0.0, 0.0);
        for _ in 0..inner {
            hbar += hw_unchecked(&w, &g.compose(&haar_frame(n - k, k, rng)));
        }
        hbar /= inner as f64;
        for (o, e) in out.iter_mut().zip(&evals) {
            *o = hbar * torus.average(e, &g);
        }
    })?;
    let expected = if k.is_multiple_of(2) { 1 } else { -1 };
    Ok(build_report(SignLemma::CosineRadon, w, points, &est, expected, opts))
}

/// `T_k h_lambda` compared with `h_lambda`.
pub fn verify_sign_cosine(n: usize, k: usize, m: i64, opts: &SignOptions) -> Result<TransformSignReport> {
    let w = sign_weight(n, k, m)?;
    let points = select_test_points(&w, opts)?;
    let est = cosine_eigen_estimates(&w, &points, opts)?;
    let expected = if (m - 1) % 2 == 0 { 1 } else { -1 };
    Ok(build_report(SignLemma::Cosine, w, points, &est, expected, opts))
}

/// `(T_k h_lambda)(E_i)` at the given points, with torus averaging.
pub fn cosine_eigen_estimates(
    w: &HighestWeight,
    points: &[(Frame, Complex64)],
    opts: &SignOptions,
) -> Result<Vec<Estimate>> {
    let (n, k) = (w.n, w.k);
    let torus = TorusAverage::new(w);
    let cfg = McConfig::new(opts.samples, opts.seed);
    estimate_many(&cfg, STREAM_SIGN, points.len(), |rng, out| {
        let f = haar_frame(n, k, rng);
        let hf = hw_unchecked(w, &f);
        for (o, (e, _)) in out.iter_mut().zip(points) {
            *o = hf * torus.average(e, &f);
        }
    })
}

fn sign_weight(n: usize, k: usize, m: i64) -> Result<HighestWeight> {
    if k == 0 || 2 * k > n {
        return input(format!("sign checks need 1 <= k <= floor(n/2), got n={n}, k={k}"));
    }
    HighestWeight::pi_weight(n, k, m, false)
}

/// Haar test frames with `|h_lambda|` at least `threshold` times the largest
/// value seen in the candidate pool, paired with `h_lambda` there.
pub fn select_test_points(w: &HighestWeight, opts: &SignOptions) -> Result<Vec<(Frame, Complex64)>> {
    if opts.test_points == 0 {
        return input("at least one test point is required");
    }
    let mut rng = stream_rng(opts.seed, STREAM_POINTS, 0);
    let mut pool: Vec<(Frame, Complex64)> = Vec::new();
    for _round in 0..8 {
        for _ in 0..16 * opts.test_points {
            let e = haar_frame(w.n, w.k, &mut rng);
            let h = hw_unchecked(w, &e);
            pool.push((e, h));
        }
        let peak = pool.iter().map(|(_, h)| h.norm()).fold(0.0, f64::max);
        let chosen: Vec<(Frame, Complex64)> = pool
            .iter()
            .filter(|(_, h)| h.norm() >= opts.threshold * peak && h.norm() > 0.0)
            .take(opts.test_points)
            .cloned()
            .collect();
        if chosen.len() == opts.test_points {
            return Ok(chosen);
        }
    }
    numerical("could not find test frames away from the zero set of h_lambda")
}

fn build_report(
    lemma: SignLemma,
    weight: HighestWeight,
    points: Vec<(Frame, Complex64)>,
    est: &[Estimate],
    expected_sign: i32,
    opts: &SignOptions,
) -> TransformSignReport {
    let ratios: Vec<Complex64> = est.iter().zip(&points).map(|(e, (_, h))| e.mean / h).collect();
    let ratio_err: Vec<f64> = est.iter().zip(&points).map(|(e, (_, h))| e.std_err / h.norm()).collect();
    let count = ratios.len() as f64;
    let mean: Complex64 = ratios.iter().sum::<Complex64>() / count;
    let spread = if ratios.len() > 1 {
        (ratios.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>() / (count - 1.0)).sqrt()
    } else {
        0.0
    };
    let mc_err = (ratio_err.iter().map(|e| e * e).sum::<f64>()).sqrt() / count;
    let rel_stddev = spread.max(mc_err) / mean.norm();
    let sign = if mean.re > 0.0 {
        1
    } else if mean.re < 0.0 {
        -1
    } else {
        0
    };
    let precise = rel_stddev < MAX_REL_STDDEV && mean.im.abs() < MAX_IMAG_RATIO * mean.re.abs();
    let verdict = if !precise {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(sign == expected_sign)
    };
    TransformSignReport {
        lemma,
        n: weight.n,
        k: weight.k,
        weight,
        test_points: points.into_iter().map(|(e, _)| e).collect(),
        estimated_ratio: ratios,
        ratio_std_err: ratio_err,
        mean_scale: mean,
        sign,
        expected_sign,
        rel_stddev,
        samples: opts.samples,
        seed: opts.seed,
        verdict,
    }
}

/// Average of `chi(tau) |cos(tau^{-1} E, G)|` over a finite subgroup of the
/// maximal torus acting on the first `k` coordinate planes.
///
/// Because `h_lambda(tau F) = chi(tau) h_lambda(F)` and Haar measure is
/// invariant under `tau`, multiplying `h_lambda(G)` by this average gives an
/// unbiased estimator of the cosine transform with much smaller variance.
struct TorusAverage {
    planes: Vec<TorusPlane>,
}

struct TorusPlane {
    cos: Vec<f64>,
    sin: Vec<f64>,
    phase: Vec<Complex64>,
}

impl TorusAverage {
    fn new(w: &HighestWeight) -> Self {
        let planes = w
            .m
            .iter()
            .map(|&mj| {
                let steps = 4 * mj.unsigned_abs() as usize + 4;
                let angles: Vec<f64> = (0..steps)
                    .map(|i| 2.0 * std::f64::consts::PI * i as f64 / steps as f64)
                    .collect();
                TorusPlane {
                    cos: angles.iter().map(|a| a.cos()).collect(),
                    sin: angles.iter().map(|a| a.sin()).collect(),
                    phase: angles.iter().map(|a| Complex64::from_polar(1.0, 2.0 * mj as f64 * a)).collect(),
                }
            })
            .collect();
        TorusAverage { planes }
    }

    fn average(&self, e: &Frame, g: &Frame) -> Complex64 {
        let (n, r) = (e.ambient_dim(), e.rank());
        let rr = r * r;
        let outer = |row: usize, out: &mut [f64], sgn: f64| {
            for a in 0..r {
                let ea = e.get(row, a) * sgn;
                for b in 0..r {
                    out[a * r + b] += ea * g.get(row, b);
                }
            }
        };
        let cross = |row_e: usize, row_g: usize, out: &mut [f64], sgn: f64| {
            for a in 0..r {
                let ea = e.get(row_e, a) * sgn;
                for b in 0..r {
                    out[a * r + b] += ea * g.get(row_g, b);
                }
            }
        };
        let kp = self.planes.len();
        let mut base = vec![0.0; rr];
        for row in 2 * kp..n {
            outer(row, &mut base, 1.0);
        }
        // Rows (2j, 2j+1) of tau^{-1} E are (c E_a + s E_b, -s E_a + c E_b).
        let mut xs = vec![vec![0.0; rr]; kp];
        let mut ys = vec![vec![0.0; rr]; kp];
        for j in 0..kp {
            let (a, b) = (2 * j, 2 * j + 1);
            outer(a, &mut xs[j], 1.0);
            outer(b, &mut xs[j], 1.0);
            cross(b, a, &mut ys[j], 1.0);
            cross(a, b, &mut ys[j], -1.0);
        }

        let mut idx = vec![0usize; kp];
        let mut total = Complex64::new(0.0, 0.0);
        let mut count = 0usize;
        let mut buf = vec![0.0; rr];
        loop {
            buf.copy_from_slice(&base);
            let mut chi = Complex64::new(1.0, 0.0);
            for (j, p) in self.planes.iter().enumerate() {
                let (c, s) = (p.cos[idx[j]], p.sin[idx[j]]);
                for t in 0..rr {
                    buf[t] += c * xs[j][t] + s * ys[j][t];
                }
                chi *= p.phase[idx[j]];
            }
            total += chi * det_in_place(&mut buf, r).abs();
            count += 1;
            let mut j = 0;
            loop {
                if j == kp {
                    return total / count as f64;
                }
                idx[j] += 1;
                if idx[j] < self.planes[j].cos.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
}
