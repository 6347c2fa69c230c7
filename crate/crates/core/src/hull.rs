//! Dimension-generic convex hull (quickhull with conflict lists).
//!
//! Facets are kept simplicial while the hull grows; coplanar simplices are
//! merged afterwards so that callers see one facet per outward normal. Point
//! sets that are not full-dimensional are projected onto their affine hull
//! and handled one dimension down.

use std::collections::HashMap;

use crate::linalg::{det_in_place, dot};
use crate::special::factorial;

/// Points closer than this (max-norm) are treated as one.
pub const DEDUP_TOL: f64 = 1e-12;

/// Relative tolerance, in units of the bounding-box extent, for deciding
/// that a point lies beyond a facet or outside an affine span.
const PLANE_EPS: f64 = 1e-10;

/// Two simplicial facets with unit normals closer than this are merged.
const NORMAL_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct HullFacet {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct Hull {
    pub affine_dim: usize,
    /// Indices of the extreme points in the input, ascending.
    pub vertices: Vec<usize>,
    /// Merged facets; empty unless the hull is full-dimensional.
    pub facets: Vec<HullFacet>,
    pub volume: f64,
}

/// Convex hull of `points`, a flat list of `dim`-dimensional coordinates.
pub fn convex_hull(points: &[f64], dim: usize) -> Hull {
    assert!(dim >= 1 && points.len().is_multiple_of(dim) && !points.is_empty());
    let count = points.len() / dim;
    let at = |i: usize| &points[i * dim..(i + 1) * dim];

    let unique = dedup(points, dim);
    let scale = extent(points, dim, &unique);
    if unique.len() == 1 || scale == 0.0 {
        return Hull {
            affine_dim: 0,
            vertices: vec![unique[0]],
            facets: Vec::new(),
            volume: 0.0,
        };
    }
    let eps = PLANE_EPS * scale;

    // Greedy affine basis: each new point is the one farthest from the span
    // of the previous ones.
    let origin = unique[0];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut simplex = vec![origin];
    while basis.len() < dim {
        let mut best = (0.0, usize::MAX, Vec::new());
        for &i in &unique {
            let mut r: Vec<f64> = at(i).iter().zip(at(origin)).map(|(a, b)| a - b).collect();
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
        if best.0 <= eps {
            break;
        }
        let (len, idx, mut dir) = best;
        dir.iter_mut().for_each(|x| *x /= len);
        basis.push(dir);
        simplex.push(idx);
    }
    let rank = basis.len();

    if rank < dim {
        let projected: Vec<f64> = unique
            .iter()
            .flat_map(|&i| {
                let d: Vec<f64> = at(i).iter().zip(at(origin)).map(|(a, b)| a - b).collect();
                basis.iter().map(move |b| dot(&d, b)).collect::<Vec<_>>()
            })
            .collect();
        let sub = convex_hull(&projected, rank);
        let mut vertices: Vec<usize> = sub.vertices.iter().map(|&j| unique[j]).collect();
        vertices.sort_unstable();
        return Hull {
            affine_dim: rank,
            vertices,
            facets: Vec::new(),
            volume: 0.0,
        };
    }

    if dim == 1 {
        let (mut lo, mut hi) = (unique[0], unique[0]);
        for &i in &unique {
            if points[i] < points[lo] {
                lo = i;
            }
            if points[i] > points[hi] {
                hi = i;
            }
        }
        let mut vertices = vec![lo, hi];
        vertices.sort_unstable();
        return Hull {
            affine_dim: 1,
            vertices,
            facets: vec![
                HullFacet { normal: vec![-1.0], offset: -points[lo], area: 1.0 },
                HullFacet { normal: vec![1.0], offset: points[hi], area: 1.0 },
            ],
            volume: points[hi] - points[lo],
        };
    }

    let mut qh = QuickHull::new(points, dim, eps, &simplex);
    let others: Vec<usize> = unique.iter().copied().filter(|i| !simplex.contains(i)).collect();
    qh.run(others);
    let hull = qh.finish();
    debug_assert!(hull.vertices.iter().all(|&v| v < count));
    hull
}

fn dedup(points: &[f64], dim: usize) -> Vec<usize> {
    let count = points.len() / dim;
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a * dim..(a + 1) * dim], &points[b * dim..(b + 1) * dim]);
        pa.partial_cmp(pb).expect("finite coordinates")
    });
    let mut kept: Vec<usize> = Vec::with_capacity(count);
    for &i in &order {
        let p = &points[i * dim..(i + 1) * dim];
        let mut duplicate = false;
        for &j in kept.iter().rev() {
            let q = &points[j * dim..(j + 1) * dim];
            if q[0] < p[0] - DEDUP_TOL {
                break;
            }
            if p.iter().zip(q).all(|(a, b)| (a - b).abs() <= DEDUP_TOL) {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            kept.push(i);
        }
    }
    kept
}

fn extent(points: &[f64], dim: usize, idx: &[usize]) -> f64 {
    (0..dim)
        .map(|c| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points[i * dim + c];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

struct Facet {
    verts: Vec<usize>,
    /// `nbrs[i]` is the facet sharing every vertex except `verts[i]`.
    nbrs: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    /// Norm of the cofactor vector, `(d-1)!` times the simplex area.
    raw_area: f64,
    outside: Vec<usize>,
    alive: bool,
}

struct QuickHull<'a> {
    pts: &'a [f64],
    dim: usize,
    eps: f64,
    interior: Vec<f64>,
    facets: Vec<Facet>,
    mark: Vec<u32>,
    stamp: u32,
}

const UNSET: usize = usize::MAX;

impl<'a> QuickHull<'a> {
    fn new(pts: &'a [f64], dim: usize, eps: f64, simplex: &[usize]) -> Self {
        let mut interior = vec![0.0; dim];
        for &s in simplex {
            for (c, v) in interior.iter_mut().zip(&pts[s * dim..(s + 1) * dim]) {
                *c += v / simplex.len() as f64;
            }
        }
        let mut qh = QuickHull {
            pts,
            dim,
            eps,
            interior,
            facets: Vec::new(),
            mark: Vec::new(),
            stamp: 0,
        };
        for skip in 0..=dim {
            let verts: Vec<usize> = (0..=dim).filter(|&j| j != skip).map(|j| simplex[j]).collect();
            let nbrs: Vec<usize> = (0..=dim).filter(|&j| j != skip).collect();
            qh.push_facet(verts, nbrs);
        }
        qh
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.pts[i * self.dim..(i + 1) * self.dim]
    }

    fn distance(&self, f: usize, p: usize) -> f64 {
        let facet = &self.facets[f];
        dot(&facet.normal, self.point(p)) - facet.offset
    }

    fn push_facet(&mut self, verts: Vec<usize>, nbrs: Vec<usize>) -> usize {
        let d = self.dim;
        let base = self.point(verts[0]).to_vec();
        let edges: Vec<f64> = verts[1..]
            .iter()
            .flat_map(|&v| self.point(v).iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>())
            .collect();
        // Generalized cross product of the d-1 edge vectors.
        let mut normal = vec![0.0; d];
        let mut minor = vec![0.0; (d - 1) * (d - 1)];
        for (j, nj) in normal.iter_mut().enumerate() {
            for r in 0..d - 1 {
                let mut c = 0;
                for col in 0..d {
                    if col != j {
                        minor[r * (d - 1) + c] = edges[r * d + col];
                        c += 1;
                    }
                }
            }
            let det = if d == 1 { 1.0 } else { det_in_place(&mut minor, d - 1) };
            *nj = if j % 2 == 0 { det } else { -det };
        }
        let raw_area = dot(&normal, &normal).sqrt();
        if raw_area > 0.0 {
            normal.iter_mut().for_each(|x| *x /= raw_area);
        }
        let mut offset = dot(&normal, &base);
        if dot(&normal, &self.interior) - offset > 0.0 {
            normal.iter_mut().for_each(|x| *x = -*x);
            offset = -offset;
        }
        self.facets.push(Facet {
            verts,
            nbrs,
            normal,
            offset,
            raw_area,
            outside: Vec::new(),
            alive: true,
        });
        self.mark.push(0);
        self.facets.len() - 1
    }

    fn assign(&mut self, candidates: &[usize], points: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut touched = Vec::new();
        for p in points {
            let mut best = (self.eps, UNSET);
            for &f in candidates {
                let dist = self.distance(f, p);
                if dist > best.0 {
                    best = (dist, f);
                }
            }
            if best.1 != UNSET {
                if self.facets[best.1].outside.is_empty() {
                    touched.push(best.1);
                }
                self.facets[best.1].outside.push(p);
            }
        }
        touched
    }

    fn run(&mut self, others: Vec<usize>) {
        let initial: Vec<usize> = (0..self.facets.len()).collect();
        let mut stack = self.assign(&initial, others);
        while let Some(f) = stack.pop() {
            if !self.facets[f].alive || self.facets[f].outside.is_empty() {
                continue;
            }
            let apex = {
                let facet = &self.facets[f];
                let mut best = (f64::NEG_INFINITY, UNSET);
                for &p in &facet.outside {
                    let dist = dot(&facet.normal, self.point(p)) - facet.offset;
                    if dist > best.0 {
                        best = (dist, p);
                    }
                }
                best.1
            };
            let new_facets = self.add_point(f, apex);
            stack.extend(new_facets.into_iter().filter(|&g| !self.facets[g].outside.is_empty()));
        }
    }

    /// Inserts `apex`, which lies beyond facet `start`. Returns the new facets.
    fn add_point(&mut self, start: usize, apex: usize) -> Vec<usize> {
        self.stamp += 2;
        let visible_mark = self.stamp;
        let hidden_mark = self.stamp + 1;

        let mut visible = vec![start];
        self.mark[start] = visible_mark;
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut head = 0;
        while head < visible.len() {
            let f = visible[head];
            head += 1;
            for i in 0..self.dim {
                let nb = self.facets[f].nbrs[i];
                if self.mark[nb] == visible_mark {
                    continue;
                }
                if self.mark[nb] != hidden_mark && self.distance(nb, apex) > self.eps {
                    self.mark[nb] = visible_mark;
                    visible.push(nb);
                } else {
                    self.mark[nb] = hidden_mark;
                    horizon.push((f, i));
                }
            }
        }

        let mut ridge_map: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        let mut created = Vec::with_capacity(horizon.len());
        for &(f, i) in &horizon {
            let nb = self.facets[f].nbrs[i];
            let mut verts: Vec<usize> = self.facets[f]
                .verts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            verts.push(apex);
            let mut nbrs = vec![UNSET; self.dim];
            nbrs[self.dim - 1] = nb;
            let g = self.push_facet(verts, nbrs);
            let slot = self.facets[nb].nbrs.iter().position(|&x| x == f).expect("adjacency");
            self.facets[nb].nbrs[slot] = g;
            for j in 0..self.dim - 1 {
                let mut key: Vec<usize> = self.facets[g]
                    .verts
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| t != j)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                if let Some((h, hj)) = ridge_map.remove(&key) {
                    self.facets[g].nbrs[j] = h;
                    self.facets[h].nbrs[hj] = g;
                } else {
                    ridge_map.insert(key, (g, j));
                }
            }
            created.push(g);
        }
        debug_assert!(ridge_map.is_empty(), "unmatched ridges on the horizon");

        let mut orphans = Vec::new();
        for &f in &visible {
            let facet = &mut self.facets[f];
            facet.alive = false;
            orphans.extend(facet.outside.drain(..).filter(|&p| p != apex));
        }
        self.assign(&created, orphans);
        created
    }

    fn finish(self) -> Hull {
        let d = self.dim;
        let alive: Vec<usize> = (0..self.facets.len()).filter(|&f| self.facets[f].alive).collect();
        let area_scale = factorial(d - 1);

        let mut volume = 0.0;
        for &f in &alive {
            let facet = &self.facets[f];
            let height = facet.offset - dot(&facet.normal, &self.interior);
            volume += height * facet.raw_area / area_scale / d as f64;
        }

        // Union coplanar neighbours into groups.
        let mut group = vec![UNSET; self.facets.len()];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &f in &alive {
            if group[f] != UNSET {
                continue;
            }
            let gid = groups.len();
            group[f] = gid;
            let mut members = vec![f];
            let mut head = 0;
            while head < members.len() {
                let cur = members[head];
                head += 1;
                for &nb in &self.facets[cur].nbrs {
                    if group[nb] == UNSET && normals_close(&self.facets[f].normal, &self.facets[nb].normal) {
                        group[nb] = gid;
                        members.push(nb);
                    }
                }
            }
            groups.push(members);
        }

        let facets: Vec<HullFacet> = groups
            .iter()
            .map(|members| {
                let mut normal = vec![0.0; d];
                let mut area = 0.0;
                let mut offset = 0.0;
                for &m in members {
                    let facet = &self.facets[m];
                    let a = facet.raw_area / area_scale;
                    area += a;
                    offset += a * facet.offset;
                    normal.iter_mut().zip(&facet.normal).for_each(|(n, x)| *n += a * x);
                }
                let len = dot(&normal, &normal).sqrt();
                if len > 0.0 {
                    normal.iter_mut().for_each(|x| *x /= len);
                } else {
                    normal = self.facets[members[0]].normal.clone();
                }
                let offset = if area > 0.0 { offset / area } else { self.facets[members[0]].offset };
                HullFacet { normal, offset, area }
            })
            .collect();

        // A hull vertex is extreme iff the normals of its incident facets
        // span the whole space.
        let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
        for &f in &alive {
            for &v in &self.facets[f].verts {
                let list = incident.entry(v).or_default();
                if !list.contains(&group[f]) {
                    list.push(group[f]);
                }
            }
        }
        let mut vertices: Vec<usize> = incident
            .into_iter()
            .filter(|(_, gs)| normal_rank(gs.iter().map(|&g| facets[g].normal.as_slice()), d) == d)
            .map(|(v, _)| v)
            .collect();
        vertices.sort_unstable();

        Hull {
            affine_dim: d,
            vertices,
            facets,
            volume,
        }
    }
}

fn normals_close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < NORMAL_MERGE_TOL)
}

fn normal_rank<'b>(normals: impl Iterator<Item = &'b [f64]>, d: usize) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    for n in normals {
        let mut r = n.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let len = dot(&r, &r).sqrt();
        if len > 1e-7 {
            r.iter_mut().for_each(|x| *x /= len);
            basis.push(r);
            if basis.len() == d {
                break;
            }
        }
    }
    basis.len()
}
