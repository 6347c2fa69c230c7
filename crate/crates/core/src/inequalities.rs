//! Aleksandrov-Fenchel, Minkowski's second inequality and the isoperimetric
//! chain, together with the eta and xi certificates that rewrite them as
//! signs of degree-1 Hodge-Riemann forms.
//!
//! Every report uses one rule: `pass <=> slack >= -rel_tol * max(1, rhs)`.
//! The certificates apply the same rule after dividing by their positive
//! denominator, so a certificate and its inequality always agree.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::geometry::{ball_polytope, default_ball_resolution, minkowski_combination, Polytope};
use crate::mixed::{default_fit_grid, mixed_volume, steiner_polynomial};
use crate::special::binomial;

/// Default relative tolerance when every quantity comes from exact-oracle
/// or polytope-only fits.
pub const EXACT_TOL: f64 = 1e-6;
/// Default relative tolerance for checks that involve the polytopal ball.
pub const BALL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CheckConfig {
    /// Relative tolerance; `None` picks [`EXACT_TOL`] or [`BALL_TOL`].
    pub tol: Option<f64>,
    pub fit_grid: Option<usize>,
    pub ball_resolution: Option<usize>,
    /// Recorded in the provenance of every report.
    pub seed: Option<u64>,
}

impl CheckConfig {
    fn tol_or(&self, default: f64) -> Result<f64> {
        let t = self.tol.unwrap_or(default);
        if !(t >= 0.0) || !t.is_finite() {
            return input(format!("tolerance must be finite and non-negative, got {t}"));
        }
        Ok(t)
    }

    fn grid(&self, n: usize) -> usize {
        self.fit_grid.unwrap_or_else(|| default_fit_grid(n))
    }

    fn resolution(&self, n: usize) -> usize {
        self.ball_resolution.unwrap_or_else(|| default_ball_resolution(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub bodies: Vec<String>,
    pub seed: Option<u64>,
    pub ball_resolution: Option<usize>,
    pub fit_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    /// Absolute tolerance actually applied, `rel_tol * max(1, rhs)`.
    pub tol: f64,
    pub rel_tol: f64,
    pub inputs: Provenance,
    pub details: BTreeMap<String, f64>,
}

impl InequalityReport {
    fn new(name: &str, lhs: f64, rhs: f64, rel_tol: f64, inputs: Provenance) -> Result<Self> {
        if !lhs.is_finite() || !rhs.is_finite() {
            return Err(Error::Numerical(format!("{name}: non-finite side ({lhs}, {rhs})")));
        }
        let slack = lhs - rhs;
        let tol = absolute_tol(rel_tol, rhs);
        Ok(InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tol,
            tol,
            rel_tol,
            inputs,
            details: BTreeMap::new(),
        })
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

fn absolute_tol(rel_tol: f64, rhs: f64) -> f64 {
    rel_tol * rhs.abs().max(1.0)
}

/// Short human-readable descriptor used in provenance records.
pub fn describe(p: &Polytope) -> String {
    format!(
        "polytope(dim={}, vertices={}, volume={:.9e})",
        p.dim(),
        p.vertex_count(),
        p.volume()
    )
}

fn provenance(bodies: &[&Polytope], cfg: &CheckConfig, ball: Option<usize>, fit_grid: usize) -> Provenance {
    Provenance {
        bodies: bodies.iter().map(|b| describe(b)).collect(),
        seed: cfg.seed,
        ball_resolution: ball,
        fit_grid,
    }
}

/// The three mixed volumes of the AF inequality for `K_1..K_n`.
struct AfTerms {
    v12: f64,
    v11: f64,
    v22: f64,
}

fn af_terms(bodies: &[&Polytope], grid: usize) -> Result<AfTerms> {
    let n = bodies.len();
    if n < 2 {
        return input("the Aleksandrov-Fenchel inequality needs at least two bodies");
    }
    if let Some(b) = bodies.iter().find(|b| b.dim() != n) {
        return input(format!("{n} bodies given but one lives in R^{}", b.dim()));
    }
    let with = |a: &Polytope, b: &Polytope| {
        let mut list: Vec<&Polytope> = vec![a, b];
        list.extend_from_slice(&bodies[2..]);
        mixed_volume(&list, grid)
    };
    let (k1, k2) = (bodies[0], bodies[1]);
    Ok(AfTerms {
        v12: with(k1, k2)?,
        v11: with(k1, k1)?,
        v22: with(k2, k2)?,
    })
}

/// `V(K1,K2,K3..)^2 >= V(K1,K1,K3..) V(K2,K2,K3..)`.
pub fn af_check(bodies: &[&Polytope], cfg: &CheckConfig) -> Result<InequalityReport> {
    let rel = cfg.tol_or(EXACT_TOL)?;
    let grid = cfg.grid(bodies.len());
    let t = af_terms(bodies, grid)?;
    let mut report = InequalityReport::new(
        "aleksandrov_fenchel",
        t.v12 * t.v12,
        t.v11 * t.v22,
        rel,
        provenance(bodies, cfg, None, grid),
    )?
    .detail("v12", t.v12)
    .detail("v11", t.v11)
    .detail("v22", t.v22);
    if t.v22 > 0.0 {
        report = report.detail("xi_qtilde", t.v11 - t.v12 * t.v12 / t.v22);
    }
    Ok(report)
}

/// Mixed volumes of `K` with the polytopal unit ball `B`, read off the
/// Steiner polynomial `vol(K + lambda B) = sum_j binom(n,j) V(K[n-j], B[j]) lambda^j`.
struct BallTerms {
    /// `V(K, B[n-1])`.
    w1: f64,
    /// `V(K, K, B[n-2])`.
    w2: f64,
    vol_ball: f64,
    resolution: usize,
    grid: usize,
}

fn ball_terms(k: &Polytope, cfg: &CheckConfig) -> Result<BallTerms> {
    let n = k.dim();
    if n < 2 {
        return input("Minkowski's second inequality needs n >= 2");
    }
    if !k.is_full_dimensional() {
        return input("the body must be full-dimensional");
    }
    let resolution = cfg.resolution(n);
    let grid = cfg.grid(n);
    let ball = ball_polytope(n, 1.0, resolution)?;
    let c = steiner_polynomial(k, &ball, grid)?;
    Ok(BallTerms {
        w1: c[n - 1] / n as f64,
        w2: c[n - 2] / binomial(n as i64, 2),
        vol_ball: ball.volume(),
        resolution,
        grid,
    })
}

/// `V(K, B[n-1])^2 >= V(K, K, B[n-2]) vol(B)`, reported together with the
/// equivalent ratio form `(mu_1(K)/mu_1(B))^2 >= mu_2(K)/mu_2(B)`.
pub fn minkowski2_ball(k: &Polytope, cfg: &CheckConfig) -> Result<InequalityReport> {
    let rel = cfg.tol_or(BALL_TOL)?;
    let t = ball_terms(k, cfg)?;
    let r1 = t.w1 / t.vol_ball;
    let r2 = t.w2 / t.vol_ball;
    Ok(InequalityReport::new(
        "minkowski_second",
        t.w1 * t.w1,
        t.w2 * t.vol_ball,
        rel,
        provenance(&[k], cfg, Some(t.resolution), t.grid),
    )?
    .detail("mu1_ratio_sq", r1 * r1)
    .detail("mu2_ratio", r2)
    .detail("vol_ball", t.vol_ball))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoChain {
    /// `(mu_k(K)/mu_k(B))^{1/k}` for `k = 1..n`.
    pub ratios: Vec<f64>,
    /// `mu_k(K)/mu_k(B)` for `k = 0..n`.
    pub normalized: Vec<f64>,
    pub monotone: bool,
    pub log_concave: bool,
    /// One report per consecutive pair, `ratio_k >= ratio_{k+1}`.
    pub steps: Vec<InequalityReport>,
    pub rel_tol: f64,
    pub inputs: Provenance,
}

/// The isoperimetric chain of `K` against the polytopal unit ball.
///
/// The normalized intrinsic volumes are `V(K[k], B[n-k]) / vol(B)`, which
/// equal `mu_k(K)/mu_k(B)` when `B` is a Euclidean ball.
pub fn iso_chain(k: &Polytope, cfg: &CheckConfig) -> Result<IsoChain> {
    let n = k.dim();
    if !k.is_full_dimensional() {
        return input("the isoperimetric chain needs a full-dimensional body");
    }
    let rel = cfg.tol_or(BALL_TOL)?;
    let resolution = cfg.resolution(n);
    let grid = cfg.grid(n);
    let ball = ball_polytope(n, 1.0, resolution)?;
    let c = steiner_polynomial(k, &ball, grid)?;
    let vol_ball = ball.volume();
    let normalized: Vec<f64> = (0..=n)
        .map(|j| c[n - j] / (binomial(n as i64, j as i64) * vol_ball))
        .collect();
    if normalized[1..].iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Numerical("non-positive normalized intrinsic volume".into()));
    }
    let ratios: Vec<f64> = (1..=n).map(|j| normalized[j].powf(1.0 / j as f64)).collect();
    let inputs = provenance(&[k], cfg, Some(resolution), grid);
    let steps = ratios
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            Ok(InequalityReport::new(&format!("iso_chain_{}_{}", i + 1, i + 2), w[0], w[1], rel, inputs.clone())?
                .detail("k", (i + 1) as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = steps.iter().all(|s| s.pass);
    let log_concave = (1..n).all(|j| {
        let lhs = normalized[j] * normalized[j];
        let rhs = normalized[j - 1] * normalized[j + 1];
        lhs - rhs >= -absolute_tol(rel, rhs)
    });
    Ok(IsoChain {
        ratios,
        normalized,
        monotone,
        log_concave,
        steps,
        rel_tol: rel,
        inputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaCertificate {
    pub coprimitivity_residual: f64,
    /// `V(K,K,B[n-2]) - V(K,B[n-1])^2 / vol(B)`.
    pub qtilde_value: f64,
    /// Largest `qtilde_value` that still certifies the sign.
    pub threshold: f64,
    /// `-vol(B) * qtilde_value`, the slack of Minkowski's second inequality.
    pub equivalent_slack: f64,
    pub pass: bool,
    pub rel_tol: f64,
    pub inputs: Provenance,
}

/// The valuation `eta = mu_{n-1}(K) vol - vol(B) V(K, .)` is primitive, and
/// its form value is a positive multiple of `qtilde_value`.
pub fn eta_certificate(k: &Polytope, cfg: &CheckConfig) -> Result<EtaCertificate> {
    let rel = cfg.tol_or(BALL_TOL)?;
    let t = ball_terms(k, cfg)?;
    let coef = t.w1 / t.vol_ball;
    let qtilde = t.w2 - t.w1 * t.w1 / t.vol_ball;
    let threshold = absolute_tol(rel, t.w2 * t.vol_ball) / t.vol_ball;
    Ok(EtaCertificate {
        coprimitivity_residual: t.w1 - coef * t.vol_ball,
        qtilde_value: qtilde,
        threshold,
        equivalent_slack: -t.vol_ball * qtilde,
        pass: qtilde <= threshold,
        rel_tol: rel,
        inputs: provenance(&[k], cfg, Some(t.resolution), t.grid),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiCertificate {
    pub coprimitivity_residual: f64,
    /// `V(K1,K1,K3..) - V(K1,K2,K3..)^2 / V(K2,K2,K3..)`.
    pub qtilde_value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub rel_tol: f64,
    pub inputs: Provenance,
}

/// Mixed analogue of [`eta_certificate`] with `K_2` in place of the ball.
pub fn xi_certificate(bodies: &[&Polytope], cfg: &CheckConfig) -> Result<XiCertificate> {
    let rel = cfg.tol_or(EXACT_TOL)?;
    let grid = cfg.grid(bodies.len());
    let t = af_terms(bodies, grid)?;
    if t.v22 < rel {
        return input(format!("V(K2,K2,K3,..) = {:.3e} is too small to divide by", t.v22));
    }
    let coef = t.v12 / t.v22;
    let qtilde = t.v11 - t.v12 * t.v12 / t.v22;
    let threshold = absolute_tol(rel, t.v11 * t.v22) / t.v22;
    Ok(XiCertificate {
        coprimitivity_residual: t.v12 - coef * t.v22,
        qtilde_value: qtilde,
        threshold,
        pass: qtilde <= threshold,
        rel_tol: rel,
        inputs: provenance(bodies, cfg, None, grid),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyKind {
    Box,
    RandomHull,
    Zonotope,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BodyParams {
    /// Points for a hull, segments for a zonotope.
    pub count: usize,
    /// Box edges and ball radii are drawn from `[min_edge, max_edge]`.
    pub min_edge: f64,
    pub max_edge: f64,
    /// Standard deviation of hull points and segment vectors.
    pub scale: f64,
    pub ball_resolution: Option<usize>,
}

impl Default for BodyParams {
    fn default() -> Self {
        BodyParams {
            count: 8,
            min_edge: 0.5,
            max_edge: 2.0,
            scale: 1.0,
            ball_resolution: None,
        }
    }
}

/// Draws rejected as degenerate before giving up.
pub const MAX_BODY_RETRIES: usize = 100;

pub fn random_body<R: Rng + ?Sized>(n: usize, kind: BodyKind, rng: &mut R, params: &BodyParams) -> Result<Polytope> {
    if n == 0 {
        return input("dimension must be positive");
    }
    if !(params.min_edge > 0.0 && params.min_edge <= params.max_edge && params.max_edge.is_finite()) {
        return input("edge range must satisfy 0 < min_edge <= max_edge");
    }
    if !(params.scale > 0.0 && params.scale.is_finite()) {
        return input("scale must be positive");
    }
    match kind {
        BodyKind::RandomHull if params.count < n + 1 => {
            return input(format!("a random hull in R^{n} needs at least {} points", n + 1))
        }
        BodyKind::Zonotope if params.count < n => {
            return input(format!("a zonotope in R^{n} needs at least {n} segments"))
        }
        _ => {}
    }
    let floor = 1e-6 * params.scale.powi(n as i32);
    for _ in 0..MAX_BODY_RETRIES {
        let body = draw(n, kind, rng, params)?;
        if body.is_full_dimensional() && body.volume() > floor {
            return Ok(body);
        }
    }
    Err(Error::Numerical(format!(
        "no full-dimensional {kind:?} in R^{n} after {MAX_BODY_RETRIES} draws"
    )))
}

fn draw<R: Rng + ?Sized>(n: usize, kind: BodyKind, rng: &mut R, p: &BodyParams) -> Result<Polytope> {
    let mut edge = || {
        if p.min_edge == p.max_edge {
            p.min_edge
        } else {
            rng.random_range(p.min_edge..p.max_edge)
        }
    };
    match kind {
        BodyKind::Box => {
            let edges: Vec<f64> = (0..n).map(|_| edge()).collect();
            Polytope::axis_box(&edges)
        }
        BodyKind::Ball => {
            let r = edge();
            ball_polytope(n, r, p.ball_resolution.unwrap_or_else(|| default_ball_resolution(n)))
        }
        BodyKind::RandomHull => {
            let coords: Vec<f64> = (0..p.count * n)
                .map(|_| p.scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Polytope::from_flat(n, coords)
        }
        BodyKind::Zonotope => {
            let segments: Vec<Polytope> = (0..p.count)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| p.scale * rng.sample::<f64, _>(StandardNormal)).collect();
                    Polytope::new(n, &[vec![0.0; n], v])
                })
                .collect::<Result<_>>()?;
            let terms: Vec<(f64, &Polytope)> = segments.iter().map(|s| (1.0, s)).collect();
            minkowski_combination(&terms)
        }
    }
}
