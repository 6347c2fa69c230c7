//! Convex polytopes given by vertex lists, and the handful of operations the
//! rest of the crate needs from them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::frame::Frame;
use crate::hull::{convex_hull, HullFacet};
use crate::linalg::dot;

/// Highest ambient dimension the hull code is tested for.
pub const MAX_DIM: usize = 6;

const BALL_SEED: u64 = 0x0ba1_15ee_d000;

/// A convex polytope in R^n, stored as the extreme points of its hull.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PolytopeFile", into = "PolytopeFile")]
pub struct Polytope {
    dim: usize,
    vertices: Vec<f64>,
    affine_dim: usize,
    volume: f64,
    facets: Arc<[HullFacet]>,
}

/// On-disk form: `{"dim": n, "vertices": [[x, ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopeFile {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
}

impl TryFrom<PolytopeFile> for Polytope {
    type Error = Error;

    fn try_from(file: PolytopeFile) -> Result<Self> {
        Polytope::new(file.dim, &file.vertices)
    }
}

impl From<Polytope> for PolytopeFile {
    fn from(p: Polytope) -> Self {
        PolytopeFile {
            dim: p.dim,
            vertices: p.vertices().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl Polytope {
    /// Convex hull of the given points.
    pub fn new(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return input(format!("point with {} coordinates in dimension {dim}", bad.len()));
        }
        Self::from_flat(dim, points.concat())
    }

    /// Convex hull of points given as one flat coordinate list.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return input(format!("dimension {dim} outside the supported range 1..={MAX_DIM}"));
        }
        if coords.is_empty() {
            return input("a polytope needs at least one vertex");
        }
        if !coords.len().is_multiple_of(dim) {
            return input(format!("{} coordinates do not split into points of dimension {dim}", coords.len()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return input("vertex coordinates must be finite");
        }
        Ok(Self::hull_of(dim, &coords))
    }

    fn hull_of(dim: usize, coords: &[f64]) -> Self {
        let hull = convex_hull(coords, dim);
        let vertices = hull
            .vertices
            .iter()
            .flat_map(|&i| coords[i * dim..(i + 1) * dim].iter().copied())
            .collect();
        Polytope {
            dim,
            vertices,
            affine_dim: hull.affine_dim,
            volume: hull.volume,
            facets: hull.facets.into(),
        }
    }

    pub fn point(coords: &[f64]) -> Result<Self> {
        Self::from_flat(coords.len(), coords.to_vec())
    }

    /// The box `[0, e_1] x ... x [0, e_n]`.
    pub fn axis_box(edges: &[f64]) -> Result<Self> {
        let n = edges.len();
        if edges.iter().any(|&e| !(e >= 0.0)) {
            return input("box edges must be non-negative");
        }
        let coords = (0..1usize << n)
            .flat_map(|mask| (0..n).map(move |i| if mask >> i & 1 == 1 { edges[i] } else { 0.0 }))
            .collect();
        Self::from_flat(n, coords)
    }

    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::axis_box(&vec![1.0; n])
    }

    /// `conv{0, e_1, ..., e_n}`.
    pub fn standard_simplex(n: usize) -> Result<Self> {
        let mut coords = vec![0.0; n * (n + 1)];
        for i in 0..n {
            coords[(i + 1) * n + i] = 1.0;
        }
        Self::from_flat(n, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn affine_dim(&self) -> usize {
        self.affine_dim
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.affine_dim == self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / self.dim
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.vertices.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.vertices
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Support function `max_x <x, u>`.
    pub fn support(&self, u: &[f64]) -> f64 {
        self.vertices().map(|v| dot(v, u)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn centroid_of_vertices(&self) -> Vec<f64> {
        let m = self.vertex_count() as f64;
        let mut c = vec![0.0; self.dim];
        for v in self.vertices() {
            c.iter_mut().zip(v).for_each(|(a, b)| *a += b / m);
        }
        c
    }

    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return input("translation vector has the wrong dimension");
        }
        let vertices = self
            .vertices
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(v).map(|(a, b)| a + b))
            .collect();
        let facets: Vec<HullFacet> = self
            .facets
            .iter()
            .map(|f| HullFacet {
                normal: f.normal.clone(),
                offset: f.offset + dot(&f.normal, v),
                area: f.area,
            })
            .collect();
        Ok(Polytope {
            vertices,
            facets: facets.into(),
            ..self.clone()
        })
    }

    /// Image under the linear map `x -> g x`.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Result<Self> {
        if g.nrows() != self.dim || g.ncols() != self.dim {
            return input("linear map has the wrong shape");
        }
        let coords: Vec<f64> = self
            .vertices()
            .flat_map(|v| (0..self.dim).map(move |i| (0..self.dim).map(|j| g[(i, j)] * v[j]).sum::<f64>()))
            .collect();
        Self::from_flat(self.dim, coords)
    }

    /// Vertex sets agree up to `tol` in the max norm, ignoring order.
    pub fn same_vertices(&self, other: &Polytope, tol: f64) -> bool {
        self.dim == other.dim
            && self.vertex_count() == other.vertex_count()
            && self
                .vertices()
                .all(|v| other.vertices().any(|w| v.iter().zip(w).all(|(a, b)| (a - b).abs() <= tol)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Top-degree area measure of a polytope: one atom per facet.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceMeasure {
    pub atoms: Vec<(Vec<f64>, f64)>,
}

impl SurfaceMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum()
    }

    /// `sum_i m_i u_i`, which vanishes for a closed polytope.
    pub fn normal_sum(&self) -> Vec<f64> {
        let n = self.atoms.first().map_or(0, |(u, _)| u.len());
        let mut s = vec![0.0; n];
        for (u, m) in &self.atoms {
            s.iter_mut().zip(u).for_each(|(a, b)| *a += m * b);
        }
        s
    }
}

pub fn minkowski_sum(p: &Polytope, q: &Polytope) -> Result<Polytope> {
    if p.dim != q.dim {
        return input(format!("cannot add polytopes of dimensions {} and {}", p.dim, q.dim));
    }
    let mut coords = Vec::with_capacity(p.vertices.len() * q.vertex_count());
    for a in p.vertices() {
        for b in q.vertices() {
            coords.extend(a.iter().zip(b).map(|(x, y)| x + y));
        }
    }
    Ok(Polytope::hull_of(p.dim, &coords))
}

/// `sum_i t_i P_i`, accumulated left to right with a hull after each step.
pub fn minkowski_combination(terms: &[(f64, &Polytope)]) -> Result<Polytope> {
    let Some(((t0, p0), rest)) = terms.split_first() else {
        return input("empty Minkowski combination");
    };
    let mut acc = scale(p0, *t0)?;
    for (t, p) in rest {
        acc = minkowski_sum(&acc, &scale(p, *t)?)?;
    }
    Ok(acc)
}

pub fn scale(p: &Polytope, t: f64) -> Result<Polytope> {
    if !(t >= 0.0) || !t.is_finite() {
        return input(format!("scale factor must be a finite non-negative number, got {t}"));
    }
    if t == 0.0 {
        return Polytope::point(&vec![0.0; p.dim]);
    }
    let n = p.dim as i32;
    let facets: Vec<HullFacet> = p
        .facets
        .iter()
        .map(|f| HullFacet {
            normal: f.normal.clone(),
            offset: f.offset * t,
            area: f.area * t.powi(n - 1),
        })
        .collect();
    Ok(Polytope {
        dim: p.dim,
        vertices: p.vertices.iter().map(|x| x * t).collect(),
        affine_dim: p.affine_dim,
        volume: p.volume * t.powi(n),
        facets: facets.into(),
    })
}

pub fn reflect(p: &Polytope) -> Polytope {
    let facets: Vec<HullFacet> = p
        .facets
        .iter()
        .map(|f| HullFacet {
            normal: f.normal.iter().map(|x| -x).collect(),
            offset: f.offset,
            area: f.area,
        })
        .collect();
    Polytope {
        vertices: p.vertices.iter().map(|x| -x).collect(),
        facets: facets.into(),
        ..p.clone()
    }
}

pub fn volume(p: &Polytope) -> f64 {
    p.volume
}

/// Orthogonal projection onto span(E), in the coordinates of the frame.
pub fn project(p: &Polytope, e: &Frame) -> Result<Polytope> {
    if e.ambient_dim() != p.dim {
        return input(format!("frame lives in R^{}, polytope in R^{}", e.ambient_dim(), p.dim));
    }
    if e.rank() == 0 {
        return input("cannot project onto the zero subspace");
    }
    let dev = e.gram_deviation();
    if !(dev <= 1e-9) {
        return input(format!("projection frame is not orthonormal (Gram deviation {dev:.3e})"));
    }
    let coords: Vec<f64> = p.vertices().flat_map(|v| e.coordinates_of(v)).collect();
    Polytope::from_flat(e.rank(), coords)
}

/// Smallest accepted `resolution` for [`ball_polytope`] in dimension `n`.
pub fn min_ball_resolution(n: usize) -> usize {
    match n {
        1 => 2,
        2 => 3,
        3 => 4,
        _ => 2 * n,
    }
}

/// Resolution used when the caller does not choose one.
pub fn default_ball_resolution(n: usize) -> usize {
    match n {
        1 => 2,
        2 => 1024,
        3 => 256,
        4 => 400,
        _ => 600,
    }
}

/// Polytope inscribed in the sphere of radius `r`.
///
/// Equal angles in the plane, a Fibonacci lattice on S^2, and a fixed stream
/// of normalized Gaussian points in higher dimensions (so that increasing the
/// resolution only adds points).
pub fn ball_polytope(n: usize, r: f64, resolution: usize) -> Result<Polytope> {
    if n == 0 || n > MAX_DIM {
        return input(format!("dimension {n} outside the supported range 1..={MAX_DIM}"));
    }
    if resolution < min_ball_resolution(n) {
        return input(format!(
            "ball resolution {resolution} below the minimum {} for n={n}",
            min_ball_resolution(n)
        ));
    }
    scale(&unit_ball(n, resolution), r)
}

fn unit_ball(n: usize, resolution: usize) -> Polytope {
    type Cache = Mutex<HashMap<(usize, usize), Polytope>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(p) = cache.lock().expect("ball cache").get(&(n, resolution)) {
        return p.clone();
    }
    let coords = sphere_points(n, resolution);
    let ball = Polytope::hull_of(n, &coords);
    cache.lock().expect("ball cache").entry((n, resolution)).or_insert(ball).clone()
}

fn sphere_points(n: usize, m: usize) -> Vec<f64> {
    match n {
        1 => vec![-1.0, 1.0],
        2 => (0..m)
            .flat_map(|i| {
                let a = 2.0 * PI * i as f64 / m as f64;
                [a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..m)
                .flat_map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / m as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    [rho * a.cos(), rho * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(BALL_SEED ^ n as u64);
            let mut out = Vec::with_capacity(n * m);
            while out.len() < n * m {
                let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = dot(&g, &g).sqrt();
                if len > 1e-8 {
                    out.extend(g.iter().map(|x| x / len));
                }
            }
            out
        }
    }
}

pub fn surface_area_measure(p: &Polytope) -> Result<SurfaceMeasure> {
    if !p.is_full_dimensional() {
        return input(format!(
            "surface area measure needs a full-dimensional body (affine dimension {} in R^{})",
            p.affine_dim, p.dim
        ));
    }
    Ok(SurfaceMeasure {
        atoms: p.facets.iter().map(|f| (f.normal.clone(), f.area)).collect(),
    })
}
