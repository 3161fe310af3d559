//! Unit n-frames, the signed-permutation group action, canonical orbit
//! representatives, and retraction utilities.
//!
//! A [`Frame`] is an ordered basis of R^n whose vectors have unit length
//! under a declared normalization (euclidean, or a smooth norm). The group
//! W_n = (Z/2)^n semidirect Sym_n acts by flipping signs and permuting
//! positions; both criticality objectives in this crate are invariant under
//! it, so configurations are counted as W_n-orbits. [`canonicalize`] picks a
//! unique orbit representative and [`orbit_distance`] measures distance
//! between orbits (exactly: the sign choice decouples per position, so the
//! minimum over the whole group reduces to a minimum over permutations).

use crate::geometry::NormOracle;
use crate::sampling::SeededRng;
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use std::sync::Arc;
use thiserror::Error;

/// Frames with |det| at or below this floor are rejected as degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-10;
/// Unit-length validation tolerance.
pub const UNIT_TOL: f64 = 1e-12;
/// Coordinates smaller than this are skipped when fixing vector signs.
const SIGN_FIX_TOL: f64 = 1e-9;
/// Two sign-fixed vectors closer than this make the canonical form ambiguous.
const AMBIGUITY_TOL: f64 = 1e-9;
/// Largest n for which the permutation minimum is taken exhaustively.
const EXHAUSTIVE_ORBIT_DIM: usize = 6;
/// Frames sampled by `random_frame` are redrawn until |det| clears this.
const SAMPLE_DET_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame must contain at least two vectors")]
    TooSmall,
    #[error("vector {index} has length {got} but each vector must be an n-vector of the frame dimension")]
    NonSquare { index: usize, got: usize },
    #[error("vector {index} has length {length} under the declared normalization (unit required)")]
    NotUnitLength { index: usize, length: f64 },
    #[error("frame is degenerate: |det| = {det:.3e}")]
    DegenerateFrame { det: f64 },
    #[error("canonical form is ambiguous: vectors {i} and {j} coincide after sign fixing")]
    AmbiguousCanonicalForm { i: usize, j: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("vector {index} vanishes after displacement")]
    ZeroVectorAfterDisplacement { index: usize },
    #[error("retraction produced a degenerate frame: |det| = {det:.3e}")]
    DegenerateResult { det: f64 },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

pub type FrameResult<T> = Result<T, FrameError>;

/// Which unit sphere the frame vectors live on.
#[derive(Clone)]
pub enum Normalization {
    Euclidean,
    Norm(Arc<NormOracle>),
}

impl Normalization {
    pub fn length(&self, v: &DVector<f64>) -> FrameResult<f64> {
        match self {
            Normalization::Euclidean => Ok(v.norm()),
            Normalization::Norm(norm) => Ok(norm.value(v)?),
        }
    }
}

impl std::fmt::Debug for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Normalization::Euclidean => write!(f, "Euclidean"),
            Normalization::Norm(_) => write!(f, "Norm(..)"),
        }
    }
}

/// An ordered basis of R^n with unit vectors under a declared normalization.
#[derive(Debug, Clone)]
pub struct Frame {
    vectors: Vec<DVector<f64>>,
    normalization: Normalization,
}

impl Frame {
    /// Validates unit lengths and nondegeneracy.
    pub fn new(vectors: Vec<DVector<f64>>, normalization: Normalization) -> FrameResult<Self> {
        let n = vectors.len();
        if n < 2 {
            return Err(FrameError::TooSmall);
        }
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(FrameError::NonSquare { index, got: v.len() });
            }
            let length = normalization.length(v)?;
            if (length - 1.0).abs() > UNIT_TOL {
                return Err(FrameError::NotUnitLength { index, length });
            }
        }
        let frame = Frame { vectors, normalization };
        let det = frame.det();
        if det.abs() <= DEGENERACY_FLOOR {
            return Err(FrameError::DegenerateFrame { det });
        }
        Ok(frame)
    }

    /// Normalizes the given vectors first, then validates.
    pub fn renormalized(vectors: Vec<DVector<f64>>, normalization: Normalization) -> FrameResult<Self> {
        let mut scaled = Vec::with_capacity(vectors.len());
        for (index, v) in vectors.into_iter().enumerate() {
            if v.norm() < 1e-14 {
                return Err(FrameError::ZeroVectorAfterDisplacement { index });
            }
            let length = normalization.length(&v)?;
            scaled.push(v / length);
        }
        Frame::new(scaled, normalization)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Matrix with the frame vectors as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.vectors)
    }

    pub fn det(&self) -> f64 {
        self.matrix().determinant()
    }

    /// Row-per-vector representation used by the JSON interfaces.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(|v| v.iter().copied().collect()).collect()
    }

    /// Largest pairwise vector distance to another frame (no group action).
    pub fn max_vector_distance(&self, other: &Frame) -> FrameResult<f64> {
        if self.dim() != other.dim() {
            return Err(FrameError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

impl Serialize for Frame {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim()))?;
        for row in self.to_rows() {
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

/// Element of W_n: position `j` of the image holds `signs[perm[j]] * v[perm[j]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupElement {
    pub signs: Vec<i8>,
    pub perm: Vec<usize>,
}

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        GroupElement { signs: vec![1; n], perm: (0..n).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.signs.iter().all(|&s| s == 1) && self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    fn check(&self) {
        let n = self.perm.len();
        debug_assert_eq!(self.signs.len(), n);
        debug_assert!(self.signs.iter().all(|s| *s == 1 || *s == -1));
        let mut seen = vec![false; n];
        for &p in &self.perm {
            debug_assert!(p < n && !seen[p], "perm is not a bijection");
            seen[p] = true;
        }
    }

    /// `self . other`: acting by the result equals acting by `other`, then `self`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        self.check();
        other.check();
        let n = self.perm.len();
        let perm: Vec<usize> = (0..n).map(|j| other.perm[self.perm[j]]).collect();
        let other_inv = invert_perm(&other.perm);
        let signs: Vec<i8> = (0..n).map(|m| other.signs[m] * self.signs[other_inv[m]]).collect();
        GroupElement { signs, perm }
    }

    pub fn inverse(&self) -> GroupElement {
        let perm = invert_perm(&self.perm);
        let signs: Vec<i8> = (0..self.perm.len()).map(|m| self.signs[self.perm[m]]).collect();
        GroupElement { signs, perm }
    }

    /// All `2^n n!` elements, in a fixed deterministic order.
    pub fn enumerate(n: usize) -> Vec<GroupElement> {
        let mut out = Vec::new();
        for perm in (0..n).permutations(n) {
            for mask in 0..(1u32 << n) {
                let signs = (0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
                out.push(GroupElement { signs, perm: perm.clone() });
            }
        }
        out
    }

    pub fn order(n: usize) -> u64 {
        (1u64 << n) * (1..=n as u64).product::<u64>()
    }
}

fn invert_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Applies a group element to a frame.
pub fn act(g: &GroupElement, f: &Frame) -> Frame {
    g.check();
    let vectors = (0..f.dim())
        .map(|j| {
            let src = g.perm[j];
            let mut v = f.vectors[src].clone();
            if g.signs[src] == -1 {
                v.neg_mut();
            }
            v
        })
        .collect();
    Frame { vectors, normalization: f.normalization.clone() }
}

/// Unique orbit representative: flip each vector so its first coordinate of
/// magnitude above 1e-9 is positive, then sort vectors in descending
/// lexicographic order (ties by original index).
pub fn canonicalize(f: &Frame) -> FrameResult<(Frame, GroupElement)> {
    let n = f.dim();
    let mut signs = vec![1i8; n];
    let mut fixed: Vec<DVector<f64>> = Vec::with_capacity(n);
    for (i, v) in f.vectors.iter().enumerate() {
        let lead = v.iter().find(|c| c.abs() > SIGN_FIX_TOL);
        let sign = match lead {
            Some(&c) if c < 0.0 => -1,
            _ => 1,
        };
        signs[i] = sign;
        fixed.push(if sign == -1 { -v } else { v.clone() });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (&fixed[i] - &fixed[j]).amax() <= AMBIGUITY_TOL {
                return Err(FrameError::AmbiguousCanonicalForm { i, j });
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(&fixed[b], &fixed[a]).then(a.cmp(&b)));
    let witness = GroupElement { signs, perm: order.clone() };
    let canonical = act(&witness, f);
    Ok((canonical, witness))
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x.total_cmp(y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// `min over g in W_n` of `max_i ||act(g, f1)_i - f2_i||_2`.
///
/// For a fixed permutation the optimal signs decouple per position, so the
/// group minimum is a min-max assignment over permutations: exhaustive for
/// n <= 6, exact bottleneck assignment above that.
pub fn orbit_distance(f1: &Frame, f2: &Frame) -> FrameResult<f64> {
    let n = f1.dim();
    if n != f2.dim() {
        return Err(FrameError::DimensionMismatch(f1.dim(), f2.dim()));
    }
    // cost[m][i]: best signed distance placing f1's vector m at position i.
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|m| {
            (0..n)
                .map(|i| {
                    let d_plus = (&f1.vectors[m] - &f2.vectors[i]).norm();
                    let d_minus = (&f1.vectors[m] + &f2.vectors[i]).norm();
                    d_plus.min(d_minus)
                })
                .collect()
        })
        .collect();
    if n <= EXHAUSTIVE_ORBIT_DIM {
        let mut best = f64::INFINITY;
        for perm in (0..n).permutations(n) {
            let worst = (0..n).map(|i| cost[perm[i]][i]).fold(0.0, f64::max);
            best = best.min(worst);
        }
        Ok(best)
    } else {
        Ok(bottleneck_assignment(&cost))
    }
}

/// Exact min-max perfect matching: binary search over the candidate costs,
/// feasibility by augmenting-path bipartite matching.
fn bottleneck_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut values: Vec<f64> = cost.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let feasible = |limit: f64| -> bool {
        let mut matched_col: Vec<Option<usize>> = vec![None; n];
        fn try_assign(
            row: usize,
            limit: f64,
            cost: &[Vec<f64>],
            seen: &mut [bool],
            matched_col: &mut [Option<usize>],
        ) -> bool {
            let n = cost.len();
            for col in 0..n {
                if cost[row][col] <= limit && !seen[col] {
                    seen[col] = true;
                    if matched_col[col].is_none()
                        || try_assign(matched_col[col].unwrap(), limit, cost, seen, matched_col)
                    {
                        matched_col[col] = Some(row);
                        return true;
                    }
                }
            }
            false
        }
        for row in 0..n {
            let mut seen = vec![false; n];
            if !try_assign(row, limit, cost, &mut seen, &mut matched_col) {
                return false;
            }
        }
        true
    };
    let mut lo = 0;
    let mut hi = values.len() - 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(values[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    values[lo]
}

/// Samples a frame with vectors uniform on the euclidean sphere, renormalized
/// under `normalization`, redrawn until |det| > 1e-3.
pub fn random_frame(rng: &mut SeededRng, n: usize, normalization: &Normalization) -> FrameResult<Frame> {
    assert!(n >= 2, "frames need n >= 2");
    loop {
        let vectors: Vec<DVector<f64>> = (0..n)
            .map(|_| crate::sampling::unit_sphere_sample(rng, n))
            .collect();
        let frame = match Frame::renormalized(vectors, normalization.clone()) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if frame.det().abs() > SAMPLE_DET_FLOOR {
            return Ok(frame);
        }
    }
}

/// Frame with every vector coordinate of magnitude at most `threshold`
/// zeroed out, renormalized; `None` if nothing changed or the result is
/// degenerate.
///
/// Bodies whose boundary has zero-curvature points aligned with the axes
/// (weighted p-balls with p > 2) make the criticality residual non-smooth
/// exactly on coordinate subspaces, so iterates can only certify those zeros
/// by landing on the subspace exactly. Callers must re-verify the residual
/// of the candidate; this is a proposal, not a projection.
pub fn sparsified(f: &Frame, threshold: f64) -> Option<Frame> {
    let mut changed = false;
    let vectors: Vec<DVector<f64>> = f
        .vectors
        .iter()
        .map(|v| {
            DVector::from_fn(v.len(), |m, _| {
                let c = v[m];
                if c != 0.0 && c.abs() <= threshold {
                    changed = true;
                    0.0
                } else {
                    c
                }
            })
        })
        .collect();
    if !changed {
        return None;
    }
    Frame::renormalized(vectors, f.normalization.clone()).ok()
}

/// Moves each vector by its displacement and renormalizes.
pub fn retract(f: &Frame, displacements: &[DVector<f64>]) -> FrameResult<Frame> {
    assert_eq!(displacements.len(), f.dim());
    let mut vectors = Vec::with_capacity(f.dim());
    for (index, (v, d)) in f.vectors.iter().zip(displacements).enumerate() {
        let moved = v + d;
        if moved.norm() < 1e-14 {
            return Err(FrameError::ZeroVectorAfterDisplacement { index });
        }
        let length = f.normalization.length(&moved)?;
        vectors.push(moved / length);
    }
    let frame = Frame { vectors, normalization: f.normalization.clone() };
    let det = frame.det();
    if det.abs() <= DEGENERACY_FLOOR {
        return Err(FrameError::DegenerateResult { det });
    }
    Ok(frame)
}
