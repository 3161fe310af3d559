//! Birkhoff-James orthogonality residuals and the determinant objective.
//!
//! `x` is Birkhoff-James orthogonal to `y` when `d/dt ||x + t y||` vanishes
//! at `t = 0`, i.e. when the norm gradient at `x` pairs to zero with `y`.
//! The relation is ordered: for non-euclidean norms `x BJ-orth y` does not
//! imply `y BJ-orth x`, so the residual matrix is generally asymmetric.
//!
//! A norm-unit frame is a BJ orthonormal basis exactly when its residual
//! matrix vanishes; these are the critical points of `1 / |det|` on the
//! frame manifold.

use crate::frames::{Frame, FrameError};
use crate::geometry::{GeometryError, NormOracle};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Norm-unit validation tolerance for frames entering residual evaluation.
const UNIT_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BjError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("frame vector {index} has norm {length}, expected 1 (norm-normalized frame required)")]
    NotNormUnit { index: usize, length: f64 },
    #[error("degenerate frame: |det| = {0:.3e}")]
    DegenerateFrame(f64),
    #[error("indices must differ")]
    EqualIndices,
}

pub type BjResult<T> = Result<T, BjError>;

/// `d/dt ||x + t y||` at `t = 0`; zero iff x is BJ-orthogonal to y.
pub fn bj_residual(norm: &NormOracle, x: &DVector<f64>, y: &DVector<f64>) -> BjResult<f64> {
    let (_, gradient) = norm.eval(x)?;
    Ok(gradient.dot(y))
}

/// Residual matrix with entries `bj_residual(e_i, e_j)` for `i != j` and a
/// zero diagonal; the frame is a BJ orthonormal basis iff it vanishes.
pub fn bj_residual_matrix(norm: &NormOracle, frame: &Frame) -> BjResult<DMatrix<f64>> {
    let n = frame.dim();
    let mut gradients = Vec::with_capacity(n);
    for (index, v) in frame.vectors().iter().enumerate() {
        let (length, gradient) = norm.eval(v)?;
        if (length - 1.0).abs() > UNIT_CHECK_TOL {
            return Err(BjError::NotNormUnit { index, length });
        }
        gradients.push(gradient);
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            gradients[i].dot(frame.vector(j))
        }
    }))
}

/// Objective `1 / |det|` and the derivative of `t -> 1 / det(frame with
/// slot i retracted along t * e_j)` at `t = 0`, which equals
/// `sign(det) * bj_residual(e_i, e_j) * objective`.
pub fn det_objective_and_derivative(
    norm: &NormOracle,
    frame: &Frame,
    i: usize,
    j: usize,
) -> BjResult<(f64, f64)> {
    if i == j {
        return Err(BjError::EqualIndices);
    }
    let det = frame.det();
    if det.abs() <= crate::frames::DEGENERACY_FLOOR {
        return Err(BjError::DegenerateFrame(det.abs()));
    }
    let objective = 1.0 / det.abs();
    let r = bj_residual(norm, frame.vector(i), frame.vector(j))?;
    Ok((objective, det.signum() * r * objective))
}

/// Residual matrix flattened in (i, j), i != j row-major order.
pub fn residual_vector(norm: &NormOracle, frame: &Frame) -> BjResult<DVector<f64>> {
    let r = bj_residual_matrix(norm, frame)?;
    Ok(crate::parallelotope::flatten_off_diagonal(&r))
}
