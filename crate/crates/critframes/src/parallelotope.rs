//! Outscribed parallelotopes, the volume objective, and the criticality
//! residual.
//!
//! For a frame (e_1, ..., e_n) the parallelotope is the slab intersection
//! `{x : a_i <= <e_i, x> <= b_i}` with `b_i = s(K, e_i)` and
//! `a_i = -s(K, -e_i)`. Its volume is `prod(b_i - a_i) / |det|`, which
//! follows from the linear change of variables `x -> (<e_i, x>)_i`. The
//! frame is critically outscribed when, for each i, the segment joining the
//! two support points of the slab is parallel to every other slab, i.e.
//! `r_ij = <p_plus_i - p_minus_i, e_j> = 0` for all `j != i`.
//!
//! The directional derivative of the volume when slot i moves toward e_j
//! (with spherical retraction) has the closed form `volume * r_ij / w_i`,
//! so the residual vanishes exactly when all directional derivatives do.

use crate::frames::{Frame, FrameError, Normalization};
use crate::geometry::{BodyOracle, GeometryError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParallelotopeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("frame must be euclidean-normalized for outscription")]
    NotEuclidean,
    #[error("degenerate frame: |det| = {0:.3e}")]
    DegenerateFrame(f64),
    #[error("indices must differ")]
    EqualIndices,
}

pub type ParResult<T> = Result<T, ParallelotopeError>;

/// Outscribed parallelotope with its support data.
#[derive(Debug, Clone)]
pub struct Parallelotope {
    pub frame: Frame,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Per slab: support point on the lower hyperplane, then the upper one.
    pub support_points: Vec<(DVector<f64>, DVector<f64>)>,
}

/// Builds the outscribed parallelotope of `body` for a euclidean frame.
pub fn outscribe(body: &BodyOracle, frame: &Frame) -> ParResult<Parallelotope> {
    if !matches!(frame.normalization(), Normalization::Euclidean) {
        return Err(ParallelotopeError::NotEuclidean);
    }
    let n = frame.dim();
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    let mut support_points = Vec::with_capacity(n);
    for i in 0..n {
        let e = frame.vector(i);
        let plus = body.support(e)?;
        let minus = body.support(&(-e))?;
        upper[i] = plus.value;
        lower[i] = -minus.value;
        support_points.push((minus.point, plus.point));
    }
    Ok(Parallelotope { frame: frame.clone(), lower, upper, support_points })
}

impl Parallelotope {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Slab widths `b_i - a_i`.
    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    /// The 2^n vertices, obtained by solving `<e_i, x> = c_i` for every
    /// corner choice `c_i in {a_i, b_i}`.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        let lu = self.frame.matrix().transpose().lu();
        (0..(1usize << n))
            .map(|mask| {
                let rhs = DVector::from_fn(n, |i, _| {
                    if mask >> i & 1 == 1 {
                        self.upper[i]
                    } else {
                        self.lower[i]
                    }
                });
                lu.solve(&rhs).expect("frame is nondegenerate")
            })
            .collect()
    }
}

/// `prod(b_i - a_i) / |det|`.
pub fn volume(p: &Parallelotope) -> ParResult<f64> {
    let det = p.frame.det().abs();
    if det <= crate::frames::DEGENERACY_FLOOR {
        return Err(ParallelotopeError::DegenerateFrame(det));
    }
    Ok(p.widths().iter().product::<f64>() / det)
}

/// Residual matrix `r_ij = <p_plus_i - p_minus_i, e_j>` (zero diagonal).
/// The frame is critically outscribed iff the matrix vanishes.
pub fn criticality_residual(body: &BodyOracle, frame: &Frame) -> ParResult<DMatrix<f64>> {
    let p = outscribe(body, frame)?;
    Ok(residual_of(&p))
}

fn residual_of(p: &Parallelotope) -> DMatrix<f64> {
    let n = p.dim();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let (p_minus, p_plus) = &p.support_points[i];
            (p_plus - p_minus).dot(p.frame.vector(j))
        }
    })
}

/// Derivative of `t -> volume(outscribe(body, frame with slot i retracted
/// along t * e_j))` at t = 0: `volume * r_ij / w_i`.
pub fn volume_directional_derivative(
    body: &BodyOracle,
    frame: &Frame,
    i: usize,
    j: usize,
) -> ParResult<f64> {
    if i == j {
        return Err(ParallelotopeError::EqualIndices);
    }
    let p = outscribe(body, frame)?;
    let vol = volume(&p)?;
    let r = residual_of(&p);
    Ok(vol * r[(i, j)] / p.widths()[i])
}

/// Residual matrix flattened in (i, j), i != j row-major order; this is the
/// root system the solver drives to zero.
pub fn residual_vector(body: &BodyOracle, frame: &Frame) -> ParResult<DVector<f64>> {
    let r = criticality_residual(body, frame)?;
    Ok(flatten_off_diagonal(&r))
}

/// Off-diagonal entries in (i, j), i != j row-major order.
pub fn flatten_off_diagonal(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut out = DVector::zeros(n * (n - 1));
    let mut k = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[k] = m[(i, j)];
                k += 1;
            }
        }
    }
    out
}

/// The (i, j) pairs in the order used by [`flatten_off_diagonal`].
pub fn off_diagonal_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    pairs
}
