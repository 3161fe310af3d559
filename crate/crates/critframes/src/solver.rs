//! Multistart Newton refinement of criticality residual systems on the frame
//! manifold, orbit-level deduplication, Morse classification, and the census
//! check against the guaranteed lower bound.
//!
//! The solver does root finding on the n(n-1)-dimensional residual system
//! rather than descending the objective: the guaranteed critical orbits
//! include saddles, which descent methods skip. Steps live in the elementary
//! tangent directions (slot i displaced along e_j and retracted back to the
//! unit sphere of the problem's normalization); Jacobians are forward finite
//! differences, and the linear solve uses a truncated SVD so rank-deficient
//! systems (degenerate critical manifolds of symmetric bodies) still
//! converge to the nearest manifold point.

use crate::bj;
use crate::bounds;
use crate::frames::{canonicalize, orbit_distance, random_frame, retract, Frame, FrameError, Normalization};
use crate::geometry::{BodyOracle, GeometryError, NormOracle};
use crate::parallelotope::{self, off_diagonal_pairs};
use crate::sampling::fixed_rng;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

/// Jacobian condition number past which a critical manifold is flagged degenerate.
const SINGULAR_CONDITION: f64 = 1e12;
/// Relative singular-value cutoff for the truncated Newton solve; sits above
/// the finite-difference noise floor of the Jacobian entries.
const SVD_TRUNCATION_REL: f64 = 1e-7;
/// Central step for second-order finite differences in classification.
const HESSIAN_FD_STEP: f64 = 1e-5;
/// Relative objective gap below which two degenerate families merge.
const DEGENERATE_OBJECTIVE_MERGE_REL: f64 = 1e-6;
const MAX_LINE_SEARCH_HALVINGS: usize = 40;
/// Coordinate magnitudes probed by the sparsification polish.
const SNAP_THRESHOLDS: [f64; 4] = [1e-2, 1e-4, 1e-8, 1e-12];
/// Newton steps are clipped to this length so refinement stays in the basin
/// it started in; residual cusps (axis-flat p-balls) otherwise catapult
/// iterates across the manifold.
const TRUST_RADIUS: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Parallelotope(#[from] parallelotope::ParallelotopeError),
    #[error(transparent)]
    Bj(#[from] bj::BjError),
    #[error("no convergence after {iterations} iterations (residual {residual_max:.3e})")]
    NoConvergence { iterations: usize, residual_max: f64 },
    #[error("degenerate start frame: |det| = {det:.3e}")]
    DegenerateFrame { det: f64 },
    #[error("jacobian is singular: the critical set is a degenerate manifold")]
    SingularJacobian,
    #[error("frame is not critical: residual {residual_max:.3e} exceeds tolerance")]
    NotCritical { residual_max: f64 },
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("norm is pinned to dimension {expected}, problem asks for {got}")]
    NormDimensionMismatch { expected: usize, got: usize },
}

pub type SolverResult<T> = Result<T, SolverError>;

/// A criticality residual system over the frame manifold.
#[derive(Debug, Clone)]
pub enum Problem {
    Parallelotope { body: Arc<BodyOracle> },
    Bj { norm: Arc<NormOracle>, dim: usize },
}

impl Problem {
    pub fn parallelotope(body: BodyOracle) -> Self {
        Problem::Parallelotope { body: Arc::new(body) }
    }

    pub fn bj(norm: NormOracle, dim: usize) -> SolverResult<Self> {
        if let Some(expected) = norm.dim() {
            if expected != dim {
                return Err(SolverError::NormDimensionMismatch { expected, got: dim });
            }
        }
        Ok(Problem::Bj { norm: Arc::new(norm), dim })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Parallelotope { .. } => "parallelotope",
            Problem::Bj { .. } => "bj",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Parallelotope { body } => body.dim(),
            Problem::Bj { dim, .. } => *dim,
        }
    }

    /// Dimension of the residual system and of the frame manifold: n(n-1).
    pub fn residual_dim(&self) -> usize {
        let n = self.dim();
        n * (n - 1)
    }

    pub fn normalization(&self) -> Normalization {
        match self {
            Problem::Parallelotope { .. } => Normalization::Euclidean,
            Problem::Bj { norm, .. } => Normalization::Norm(norm.clone()),
        }
    }

    pub fn residual_matrix(&self, frame: &Frame) -> SolverResult<DMatrix<f64>> {
        match self {
            Problem::Parallelotope { body } => Ok(parallelotope::criticality_residual(body, frame)?),
            Problem::Bj { norm, .. } => Ok(bj::bj_residual_matrix(norm, frame)?),
        }
    }

    pub fn residual_vector(&self, frame: &Frame) -> SolverResult<DVector<f64>> {
        match self {
            Problem::Parallelotope { body } => Ok(parallelotope::residual_vector(body, frame)?),
            Problem::Bj { norm, .. } => Ok(bj::residual_vector(norm, frame)?),
        }
    }

    pub fn residual_max(&self, frame: &Frame) -> SolverResult<f64> {
        Ok(self.residual_vector(frame)?.amax())
    }

    /// Volume of the outscribed parallelotope, or `1 / |det|`.
    pub fn objective(&self, frame: &Frame) -> SolverResult<f64> {
        match self {
            Problem::Parallelotope { body } => {
                let p = parallelotope::outscribe(body, frame)?;
                Ok(parallelotope::volume(&p)?)
            }
            Problem::Bj { .. } => Ok(1.0 / frame.det().abs()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub starts: usize,
    pub master_seed: u64,
    pub tol_residual: f64,
    pub tol_merge: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    pub nullity_tol: f64,
    pub det_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            starts: 200,
            master_seed: 0,
            tol_residual: 1e-10,
            tol_merge: 1e-6,
            max_iters: 50,
            fd_step: 1e-7,
            nullity_tol: 1e-5,
            det_floor: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> SolverResult<()> {
        if self.starts < 1 {
            return Err(SolverError::InvalidConfig("starts must be >= 1".into()));
        }
        if self.max_iters < 1 {
            return Err(SolverError::InvalidConfig("max_iters must be >= 1".into()));
        }
        for (name, v) in [
            ("tol_residual", self.tol_residual),
            ("tol_merge", self.tol_merge),
            ("fd_step", self.fd_step),
            ("nullity_tol", self.nullity_tol),
            ("det_floor", self.det_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SolverError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Outcome of a successful refinement.
#[derive(Debug, Clone)]
pub struct Refined {
    pub frame: Frame,
    pub iterations: usize,
    pub residual_max: f64,
    /// Jacobian condition exceeded 1e12 at the solution, signalling a
    /// degenerate critical manifold rather than an isolated orbit.
    pub jacobian_singular: bool,
}

/// Retracts the frame along a coefficient vector over the elementary
/// directions: slot i moves by `sum_j t_(i,j) e_j`.
fn apply_step(
    frame: &Frame,
    pairs: &[(usize, usize)],
    coeffs: &DVector<f64>,
) -> Result<Frame, FrameError> {
    let n = frame.dim();
    let mut disp = vec![DVector::zeros(n); n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if coeffs[k] != 0.0 {
            disp[i] += frame.vector(j) * coeffs[k];
        }
    }
    retract(frame, &disp)
}

fn fd_jacobian(
    problem: &Problem,
    frame: &Frame,
    residual: &DVector<f64>,
    pairs: &[(usize, usize)],
    step: f64,
) -> SolverResult<DMatrix<f64>> {
    let m = pairs.len();
    let mut jac = DMatrix::zeros(m, m);
    let mut coeffs = DVector::zeros(m);
    for col in 0..m {
        coeffs[col] = step;
        let moved = apply_step(frame, pairs, &coeffs)?;
        coeffs[col] = 0.0;
        let r = problem.residual_vector(&moved)?;
        jac.set_column(col, &((r - residual) / step));
    }
    Ok(jac)
}

fn condition_of(jac: &DMatrix<f64>) -> f64 {
    let sv = jac.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Tries zeroing near-zero frame coordinates; keeps the best candidate whose
/// recomputed residual strictly improves. Zeros pinned to coordinate
/// subspaces (axis-flat p-balls) are unreachable by smooth steps, and an
/// accepted candidate is certified by its own residual, so this cannot
/// degrade the iterate.
fn sparsify_polish(
    problem: &Problem,
    config: &SolverConfig,
    frame: &mut Frame,
    residual: &mut DVector<f64>,
) {
    let mut best: Option<(Frame, DVector<f64>)> = None;
    let mut best_max = residual.amax();
    for threshold in SNAP_THRESHOLDS {
        let Some(candidate) = crate::frames::sparsified(frame, threshold) else {
            continue;
        };
        if candidate.det().abs() < config.det_floor {
            continue;
        }
        if let Ok(r) = problem.residual_vector(&candidate) {
            if r.amax() < best_max {
                best_max = r.amax();
                best = Some((candidate, r));
            }
        }
    }
    if let Some((f, r)) = best {
        *frame = f;
        *residual = r;
    }
}

/// Damped Newton iteration on the residual system, starting from `start`.
pub fn newton_refine(problem: &Problem, start: &Frame, config: &SolverConfig) -> SolverResult<Refined> {
    let det = start.det().abs();
    if det < config.det_floor {
        return Err(SolverError::DegenerateFrame { det });
    }
    let pairs = off_diagonal_pairs(problem.dim());
    let mut frame = start.clone();
    let mut residual = problem.residual_vector(&frame)?;
    let mut iterations = 0;
    loop {
        sparsify_polish(problem, config, &mut frame, &mut residual);
        let residual_max = residual.amax();
        if residual_max <= config.tol_residual {
            let jac = fd_jacobian(problem, &frame, &residual, &pairs, config.fd_step)?;
            let jacobian_singular = condition_of(&jac) > SINGULAR_CONDITION;
            return Ok(Refined { frame, iterations, residual_max, jacobian_singular });
        }
        if iterations >= config.max_iters {
            return Err(SolverError::NoConvergence { iterations, residual_max });
        }
        let jac = fd_jacobian(problem, &frame, &residual, &pairs, config.fd_step)?;
        let condition = condition_of(&jac);
        let svd = jac.svd(true, true);
        let cutoff = svd.singular_values.max() * SVD_TRUNCATION_REL;
        let step = svd
            .solve(&(-&residual), cutoff)
            .map_err(|_| SolverError::SingularJacobian)?;
        if step.amax() < 1e-14 {
            return Err(SolverError::SingularJacobian);
        }
        let current_sq = residual.norm_squared();
        let mut lambda = (TRUST_RADIUS / step.norm()).min(1.0);
        let mut advanced = false;
        for _ in 0..MAX_LINE_SEARCH_HALVINGS {
            if let Ok(mut candidate) = apply_step(&frame, &pairs, &(&step * lambda)) {
                if candidate.det().abs() >= config.det_floor {
                    if let Ok(mut next) = problem.residual_vector(&candidate) {
                        // steps pollute exact-zero coordinates and revive the
                        // cusp residual; polish the candidate before judging it
                        sparsify_polish(problem, config, &mut candidate, &mut next);
                        if next.norm_squared() < current_sq {
                            frame = candidate;
                            residual = next;
                            advanced = true;
                            break;
                        }
                    }
                }
            }
            lambda *= 0.5;
        }
        if !advanced {
            return Err(if condition > SINGULAR_CONDITION {
                SolverError::SingularJacobian
            } else {
                SolverError::NoConvergence { iterations, residual_max }
            });
        }
        iterations += 1;
    }
}

/// Morse data of the objective at a critical frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub morse_index: usize,
    pub hessian_nullity: usize,
}

/// Second-order central differences of the objective along the elementary
/// tangent directions; the eigenvalue signature of the resulting bilinear
/// form is parametrization-independent at a critical point.
pub fn classify_critical(
    problem: &Problem,
    frame: &Frame,
    config: &SolverConfig,
) -> SolverResult<Classification> {
    let residual_max = problem.residual_max(frame)?;
    if residual_max > config.tol_residual {
        return Err(SolverError::NotCritical { residual_max });
    }
    let pairs = off_diagonal_pairs(problem.dim());
    let m = pairs.len();
    let h = HESSIAN_FD_STEP;
    let f0 = problem.objective(frame)?;
    let eval = |coeffs: &DVector<f64>| -> SolverResult<f64> {
        let moved = apply_step(frame, &pairs, coeffs)?;
        problem.objective(&moved)
    };
    let mut hess = DMatrix::zeros(m, m);
    let mut coeffs = DVector::zeros(m);
    for k in 0..m {
        coeffs[k] = h;
        let fp = eval(&coeffs)?;
        coeffs[k] = -h;
        let fm = eval(&coeffs)?;
        coeffs[k] = 0.0;
        hess[(k, k)] = (fp - 2.0 * f0 + fm) / (h * h);
        for l in (k + 1)..m {
            let mut four = [0.0; 4];
            for (idx, (sk, sl)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                .into_iter()
                .enumerate()
            {
                coeffs[k] = sk * h;
                coeffs[l] = sl * h;
                four[idx] = eval(&coeffs)?;
                coeffs[k] = 0.0;
                coeffs[l] = 0.0;
            }
            let mixed = (four[0] - four[1] - four[2] + four[3]) / (4.0 * h * h);
            hess[(k, l)] = mixed;
            hess[(l, k)] = mixed;
        }
    }
    let eigenvalues = hess.symmetric_eigen().eigenvalues;
    let scale = eigenvalues.amax().max(f64::MIN_POSITIVE);
    let tol = config.nullity_tol * scale;
    let morse_index = eigenvalues.iter().filter(|&&v| v < -tol).count();
    let hessian_nullity = eigenvalues.iter().filter(|&&v| v.abs() <= tol).count();
    Ok(Classification { morse_index, hessian_nullity })
}

/// A certified critical configuration, up to the group action.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalOrbit {
    pub canonical_frame: Frame,
    pub objective: f64,
    pub residual_max: f64,
    /// Present for isolated orbits; degenerate families carry no index.
    pub morse_index: Option<usize>,
    pub hessian_nullity: usize,
    pub hits: usize,
    pub degenerate: bool,
}

/// Result of a multistart census.
#[derive(Debug, Clone, Serialize)]
pub struct Census {
    pub problem: String,
    pub n: usize,
    pub config: SolverConfig,
    pub starts_converged: usize,
    pub starts_failed: usize,
    pub orbits: Vec<CriticalOrbit>,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub struct BoundsCheck {
    pub found: usize,
    pub required: u64,
    pub satisfied: bool,
}

/// Checks a census against the guaranteed count `n(n-1)/2 + 1`. Degenerate
/// families count once; a shortfall is reported, never raised, since finitely
/// many starts may miss orbits.
pub fn verify_lower_bound(orbits: &[CriticalOrbit], n: usize) -> BoundsCheck {
    let required = bounds::critical_count_lower(n as u64).expect("frames have n >= 2");
    let found = orbits.len();
    BoundsCheck { found, required, satisfied: (found as u64) >= required }
}

struct OrbitGroup {
    canonical: Frame,
    residual_max: f64,
    hits: usize,
    jacobian_singular: bool,
}

/// Runs `starts` Newton refinements from deterministically seeded random
/// frames, deduplicates converged frames into orbits, classifies them, and
/// returns the orbits sorted by objective. Deterministic for a fixed config:
/// per-start seeds derive from `master_seed + index` and the merge is
/// sequential in start order regardless of worker count.
pub fn multistart_census(problem: &Problem, config: &SolverConfig) -> SolverResult<Census> {
    config.validate()?;
    let n = problem.dim();
    let normalization = problem.normalization();
    let outcomes: Vec<SolverResult<Refined>> = (0..config.starts)
        .into_par_iter()
        .map(|index| {
            let mut rng = fixed_rng(config.master_seed.wrapping_add(index as u64));
            let start = random_frame(&mut rng, n, &normalization)?;
            newton_refine(problem, &start, config)
        })
        .collect();

    let mut groups: Vec<OrbitGroup> = Vec::new();
    let mut starts_converged = 0;
    let mut starts_failed = 0;
    for outcome in outcomes {
        let refined = match outcome {
            Ok(r) => r,
            Err(err) => {
                log::debug!("start failed: {err}");
                starts_failed += 1;
                continue;
            }
        };
        let (canonical, _) = match canonicalize(&refined.frame) {
            Ok(c) => c,
            Err(err) => {
                log::debug!("canonicalization failed: {err}");
                starts_failed += 1;
                continue;
            }
        };
        // re-verify from scratch on the canonical representative
        let residual_max = match problem.residual_max(&canonical) {
            Ok(r) if r <= config.tol_residual => r,
            _ => {
                starts_failed += 1;
                continue;
            }
        };
        starts_converged += 1;
        let mut merged = false;
        for group in groups.iter_mut() {
            if orbit_distance(&group.canonical, &canonical)? <= config.tol_merge {
                group.hits += 1;
                group.jacobian_singular |= refined.jacobian_singular;
                if residual_max < group.residual_max {
                    group.canonical = canonical.clone();
                    group.residual_max = residual_max;
                }
                merged = true;
                break;
            }
        }
        if !merged {
            groups.push(OrbitGroup {
                canonical,
                residual_max,
                hits: 1,
                jacobian_singular: refined.jacobian_singular,
            });
        }
    }

    let mut classified: Vec<CriticalOrbit> = Vec::with_capacity(groups.len());
    for group in groups {
        let objective = problem.objective(&group.canonical)?;
        let class = classify_critical(problem, &group.canonical, config)?;
        let degenerate = class.hessian_nullity > 0;
        classified.push(CriticalOrbit {
            canonical_frame: group.canonical,
            objective,
            residual_max: group.residual_max,
            morse_index: if degenerate { None } else { Some(class.morse_index) },
            hessian_nullity: class.hessian_nullity,
            hits: group.hits,
            degenerate,
        });
    }

    // collapse degenerate families: points on one critical manifold share the
    // objective value even though their canonical frames differ
    let mut orbits: Vec<CriticalOrbit> = Vec::new();
    for orbit in classified {
        if orbit.degenerate {
            if let Some(existing) = orbits.iter_mut().find(|o| {
                o.degenerate
                    && (o.objective - orbit.objective).abs()
                        <= DEGENERATE_OBJECTIVE_MERGE_REL * o.objective.abs().max(1.0)
            }) {
                existing.hits += orbit.hits;
                existing.hessian_nullity = existing.hessian_nullity.max(orbit.hessian_nullity);
                if orbit.residual_max < existing.residual_max {
                    existing.residual_max = orbit.residual_max;
                    existing.canonical_frame = orbit.canonical_frame;
                }
                continue;
            }
        }
        orbits.push(orbit);
    }

    orbits.sort_by(|a, b| {
        a.objective
            .total_cmp(&b.objective)
            .then_with(|| frame_lex_cmp(&a.canonical_frame, &b.canonical_frame))
    });

    log::info!(
        "census: {} orbits from {}/{} converged starts",
        orbits.len(),
        starts_converged,
        config.starts
    );
    Ok(Census {
        problem: problem.kind().to_string(),
        n,
        config: config.clone(),
        starts_converged,
        starts_failed,
        orbits,
    })
}

fn frame_lex_cmp(a: &Frame, b: &Frame) -> std::cmp::Ordering {
    for (va, vb) in a.vectors().iter().zip(b.vectors()) {
        for (x, y) in va.iter().zip(vb.iter()) {
            let ord = x.total_cmp(y);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
    }
    std::cmp::Ordering::Equal
}
