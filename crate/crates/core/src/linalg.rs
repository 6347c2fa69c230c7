//! Dense kernels for the tiny matrices that show up in hot loops
//! (dimension <= 8), plus a least-squares front end over nalgebra's SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{numerical, Result};

/// Determinant of the row-major `r x r` matrix in `a`. Destroys `a`.
pub fn det_in_place(a: &mut [f64], r: usize) -> f64 {
    debug_assert_eq!(a.len(), r * r);
    let mut det = 1.0;
    for col in 0..r {
        let mut piv = col;
        let mut best = a[col * r + col].abs();
        for row in col + 1..r {
            let v = a[row * r + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..r {
                a.swap(col * r + j, piv * r + j);
            }
            det = -det;
        }
        let p = a[col * r + col];
        det *= p;
        for row in col + 1..r {
            let factor = a[row * r + col] / p;
            if factor != 0.0 {
                for j in col + 1..r {
                    a[row * r + j] -= factor * a[col * r + j];
                }
            }
        }
    }
    det
}

pub fn det_complex_in_place(a: &mut [Complex64], r: usize) -> Complex64 {
    debug_assert_eq!(a.len(), r * r);
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..r {
        let mut piv = col;
        let mut best = a[col * r + col].norm();
        for row in col + 1..r {
            let v = a[row * r + col].norm();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for j in 0..r {
                a.swap(col * r + j, piv * r + j);
            }
            det = -det;
        }
        let p = a[col * r + col];
        det *= p;
        for row in col + 1..r {
            let factor = a[row * r + col] / p;
            for j in col + 1..r {
                let sub = factor * a[col * r + j];
                a[row * r + j] -= sub;
            }
        }
    }
    det
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solution of an overdetermined (or square) system in the least-squares
/// sense, together with the spectral condition number of the design.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub condition: f64,
    pub residual_rms: f64,
}

/// Solves `min |A x - b|` with an SVD. Fails when the smallest singular value
/// falls below `rcond * largest`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Result<LeastSquares> {
    if a.nrows() < a.ncols() {
        return numerical(format!(
            "under-determined fit: {} equations for {} unknowns",
            a.nrows(),
            a.ncols()
        ));
    }
    // Column equilibration keeps the reported condition number meaningful
    // when monomials of very different magnitude share a design.
    let mut scaled = a.clone();
    let mut scales = vec![1.0; a.ncols()];
    for (j, s) in scales.iter_mut().enumerate() {
        let n = scaled.column(j).norm();
        if n > 0.0 {
            *s = n;
            scaled.column_mut(j).unscale_mut(n);
        }
    }
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(smin > rcond * smax) {
        return numerical(format!(
            "rank-deficient fit system (condition number {condition:.3e})"
        ));
    }
    let x = svd
        .solve(b, 0.0)
        .map_err(|e| crate::Error::Numerical(format!("svd solve failed: {e}")))?;
    let residual = &scaled * &x - b;
    let residual_rms = residual.norm() / (b.len() as f64).sqrt();
    let coefficients = x.iter().zip(&scales).map(|(v, s)| v / s).collect();
    Ok(LeastSquares {
        coefficients,
        condition,
        residual_rms,
    })
}
