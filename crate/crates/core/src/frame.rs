//! Orthonormal frames: a concrete basis standing in for a point of the
//! Grassmannian. Quantities that depend only on the span are tested for basis
//! independence elsewhere; the frame itself is just data.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{input, Result};
use crate::linalg::dot;

/// Gram deviation accepted by [`Frame::new`].
pub const FRAME_TOL: f64 = 1e-10;

/// `n x k` matrix with orthonormal columns, stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Frame {
    /// Builds a frame from column-major data, checking orthonormality.
    pub fn new(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(n, k, data, FRAME_TOL)
    }

    pub fn with_tolerance(n: usize, k: usize, data: Vec<f64>, tol: f64) -> Result<Self> {
        if k > n {
            return input(format!("frame rank {k} exceeds ambient dimension {n}"));
        }
        if data.len() != n * k {
            return input(format!("frame data has {} entries, expected {}", data.len(), n * k));
        }
        let frame = Frame { n, k, data };
        let dev = frame.gram_deviation();
        if !(dev <= tol) {
            return input(format!("frame columns are not orthonormal (Gram deviation {dev:.3e})"));
        }
        Ok(frame)
    }

    pub(crate) fn from_raw(n: usize, k: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * k);
        Frame { n, k, data }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return input("frame columns have unequal lengths");
        }
        Self::new(n, k, columns.concat())
    }

    /// Frame spanned by the listed standard basis vectors (0-based).
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Self> {
        let mut data = vec![0.0; n * axes.len()];
        for (j, &a) in axes.iter().enumerate() {
            if a >= n {
                return input(format!("axis {a} out of range for dimension {n}"));
            }
            data[j * n + a] = 1.0;
        }
        Self::new(n, axes.len(), data)
    }

    pub fn identity(n: usize) -> Self {
        let axes: Vec<usize> = (0..n).collect();
        Self::coordinate(n, &axes).expect("identity frame")
    }

    /// Gram-Schmidt (applied twice) on the columns of a column-major `n x k`
    /// matrix. Returns `None` when the columns are numerically dependent.
    pub fn orthonormalize(n: usize, k: usize, mut data: Vec<f64>) -> Option<Self> {
        for j in 0..k {
            for _pass in 0..2 {
                for i in 0..j {
                    let (done, rest) = data.split_at_mut(j * n);
                    let qi = &done[i * n..(i + 1) * n];
                    let vj = &mut rest[..n];
                    let proj = dot(qi, vj);
                    for (v, q) in vj.iter_mut().zip(qi) {
                        *v -= proj * q;
                    }
                }
            }
            let col = &mut data[j * n..(j + 1) * n];
            let len = dot(col, col).sqrt();
            if !(len > 1e-13) {
                return None;
            }
            col.iter_mut().for_each(|v| *v /= len);
        }
        Some(Frame { n, k, data })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n + row]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Max-norm deviation of `columns^T columns` from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.k {
            for b in 0..self.k {
                let g = dot(self.column(a), self.column(b));
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Row-major `k x k` matrix `self^T other`.
    pub fn cross_gram(&self, other: &Frame) -> Vec<f64> {
        let mut out = vec![0.0; self.k * other.k];
        for a in 0..self.k {
            for b in 0..other.k {
                out[a * other.k + b] = dot(self.column(a), other.column(b));
            }
        }
        out
    }

    /// Coordinates `self^T x` of a point in the frame basis.
    pub fn coordinates_of(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k).map(|j| dot(self.column(j), x)).collect()
    }

    /// Image `g * self` under a linear map given as an `n x n` matrix.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Frame {
        let m = g * self.to_matrix();
        Frame::from_raw(self.n, self.k, m.as_slice().to_vec())
    }

    /// The frame `self * inner`, where `inner` is a column-major `k x j`
    /// frame in coordinates of `self`.
    pub fn compose(&self, inner: &Frame) -> Frame {
        debug_assert_eq!(inner.n, self.k);
        let mut data = vec![0.0; self.n * inner.k];
        for c in 0..inner.k {
            let out = &mut data[c * self.n..(c + 1) * self.n];
            for a in 0..self.k {
                let w = inner.get(a, c);
                for (o, v) in out.iter_mut().zip(self.column(a)) {
                    *o += w * v;
                }
            }
        }
        Frame::from_raw(self.n, inner.k, data)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.k, &self.data)
    }

    /// Orthogonal projector `self self^T` onto the span, row-major `n x n`.
    pub fn projector(&self) -> Vec<f64> {
        let n = self.n;
        let mut p = vec![0.0; n * n];
        for c in 0..self.k {
            let col = self.column(c);
            for i in 0..n {
                for j in 0..n {
                    p[i * n + j] += col[i] * col[j];
                }
            }
        }
        p
    }
}
