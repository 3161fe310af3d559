//! Brute-force reference oracle for n = 2: exhaustive grid scan of the
//! criticality residual over frame space.
//!
//! Frames are parameterized by two angles (alpha, beta) in [0, pi) x [0, pi]
//! with beta > alpha; negating a direction or swapping the two slots is a
//! group move, so this wedge meets every orbit. Cells of the grid where both
//! residual components change sign are refined by repeated quadrant
//! subdivision, the surviving zeros are re-verified against the residual,
//! canonicalized, and merged into orbit families. Residuals are evaluated
//! straight from the geometry oracles, independent of the Newton solver's
//! frame plumbing.

use crate::bj::bj_residual;
use crate::frames::{canonicalize, orbit_distance, Frame};
use crate::solver::{Problem, SolverError};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Refined zeros are accepted only if the residual re-verifies below this.
const ZERO_VERIFY_TOL: f64 = 1e-10;
/// Quadrant subdivision stops once the cell diameter falls below this.
const REFINE_DIAMETER: f64 = 1e-12;
/// Zeros closer than this (as orbits) merge into one reported zero.
const MERGE_TOL: f64 = 1e-6;
/// Singular-value ratio of the angle-space Jacobian below which a zero is
/// part of a degenerate (continuum) family.
const DEGENERATE_RATIO: f64 = 1e-6;
/// Step for the angle-space Jacobian used in the degeneracy test.
const JACOBIAN_STEP: f64 = 1e-6;
/// Degenerate zeros with objectives this close (relatively) form one family.
const OBJECTIVE_MERGE_REL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("grid scan supports n = 2 only, problem has n = {0}")]
    DimensionUnsupported(usize),
    #[error("resolution {0} is below the minimum of 100")]
    ResolutionTooSmall(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One zero of the residual system located by the scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanZero {
    pub alpha: f64,
    pub beta: f64,
    pub frame: Frame,
    pub residual_max: f64,
    pub objective: f64,
    pub degenerate: bool,
    /// Refined grid cells that landed in this orbit family.
    pub members: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub problem: String,
    pub resolution: usize,
    pub zeros: Vec<ScanZero>,
}

/// Residual pair (r_12, r_21) straight from the oracles, bypassing frame
/// validation so near-degenerate grid nodes still evaluate.
fn residual_pair(problem: &Problem, alpha: f64, beta: f64) -> (f64, f64) {
    let raw = |theta: f64| DVector::from_column_slice(&[theta.cos(), theta.sin()]);
    match problem {
        Problem::Parallelotope { body } => {
            let e1 = raw(alpha);
            let e2 = raw(beta);
            let seg = |e: &DVector<f64>| {
                let plus = body.support(e).expect("unit direction");
                let minus = body.support(&(-e)).expect("unit direction");
                plus.point - minus.point
            };
            (seg(&e1).dot(&e2), seg(&e2).dot(&e1))
        }
        Problem::Bj { norm, .. } => {
            let unit = |theta: f64| {
                let v = raw(theta);
                let len = norm.value(&v).expect("unit direction");
                v / len
            };
            let e1 = unit(alpha);
            let e2 = unit(beta);
            (
                bj_residual(norm, &e1, &e2).expect("nonzero vector"),
                bj_residual(norm, &e2, &e1).expect("nonzero vector"),
            )
        }
    }
}

fn straddles(values: [f64; 4]) -> bool {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    min <= 0.0 && max >= 0.0
}

/// Bounded damped Newton in angle space, polishing a localized zero; the
/// iterate is confined to a neighborhood of the starting cell so it cannot
/// jump to a different zero.
fn newton_polish(problem: &Problem, start: (f64, f64), bounds: [f64; 4]) -> (f64, f64) {
    let (mut a, mut b) = start;
    let h = JACOBIAN_STEP;
    for _ in 0..60 {
        let (r1, r2) = residual_pair(problem, a, b);
        let current = r1.abs().max(r2.abs());
        if current <= 1e-14 {
            break;
        }
        let (r1p, r2p) = residual_pair(problem, a + h, b);
        let (r1m, r2m) = residual_pair(problem, a - h, b);
        let (s1p, s2p) = residual_pair(problem, a, b + h);
        let (s1m, s2m) = residual_pair(problem, a, b - h);
        let j11 = (r1p - r1m) / (2.0 * h);
        let j21 = (r2p - r2m) / (2.0 * h);
        let j12 = (s1p - s1m) / (2.0 * h);
        let j22 = (s2p - s2m) / (2.0 * h);
        let det = j11 * j22 - j12 * j21;
        if !det.is_finite() || det.abs() < 1e-300 {
            break;
        }
        let da = (-r1 * j22 + r2 * j12) / det;
        let db = (-r2 * j11 + r1 * j21) / det;
        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..40 {
            let (na, nb) = (a + lambda * da, b + lambda * db);
            if na >= bounds[0] && na <= bounds[1] && nb >= bounds[2] && nb <= bounds[3] {
                let (n1, n2) = residual_pair(problem, na, nb);
                if n1.abs().max(n2.abs()) < current {
                    a = na;
                    b = nb;
                    advanced = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    (a, b)
}

/// Quadrant subdivision of a cell with both residual components straddling
/// zero; keeps the first qualifying quadrant, falling back to the quadrant
/// whose center has the smallest residual. A bounded Newton polish finishes
/// the job when the corner-sign test loses a transversal crossing.
fn refine_cell(problem: &Problem, cell: [f64; 4]) -> (f64, f64) {
    let margin = 2.0 * (cell[1] - cell[0]);
    let bounds = [cell[0] - margin, cell[1] + margin, cell[2] - margin, cell[3] + margin];
    let located = subdivide_cell(problem, cell);
    newton_polish(problem, located, bounds)
}

fn subdivide_cell(problem: &Problem, mut cell: [f64; 4]) -> (f64, f64) {
    loop {
        let [a0, a1, b0, b1] = cell;
        if (a1 - a0).max(b1 - b0) < REFINE_DIAMETER {
            return ((a0 + a1) / 2.0, (b0 + b1) / 2.0);
        }
        let am = (a0 + a1) / 2.0;
        let bm = (b0 + b1) / 2.0;
        let quads = [[a0, am, b0, bm], [am, a1, b0, bm], [a0, am, bm, b1], [am, a1, bm, b1]];
        let mut chosen = None;
        for quad in quads {
            let corners = [
                residual_pair(problem, quad[0], quad[2]),
                residual_pair(problem, quad[1], quad[2]),
                residual_pair(problem, quad[0], quad[3]),
                residual_pair(problem, quad[1], quad[3]),
            ];
            let r12 = [corners[0].0, corners[1].0, corners[2].0, corners[3].0];
            let r21 = [corners[0].1, corners[1].1, corners[2].1, corners[3].1];
            if straddles(r12) && straddles(r21) {
                chosen = Some(quad);
                break;
            }
        }
        cell = chosen.unwrap_or_else(|| {
            quads
                .into_iter()
                .min_by(|x, y| {
                    let rx = residual_pair(problem, (x[0] + x[1]) / 2.0, (x[2] + x[3]) / 2.0);
                    let ry = residual_pair(problem, (y[0] + y[1]) / 2.0, (y[2] + y[3]) / 2.0);
                    rx.0.abs().max(rx.1.abs()).total_cmp(&ry.0.abs().max(ry.1.abs()))
                })
                .expect("four quadrants")
        });
    }
}

/// Ratio of the singular values of the 2x2 angle-space residual Jacobian;
/// near-zero ratio means the zero sits on a curve of zeros.
fn jacobian_ratio(problem: &Problem, alpha: f64, beta: f64) -> f64 {
    let h = JACOBIAN_STEP;
    let (ap, bp) = residual_pair(problem, alpha + h, beta);
    let (am, bm) = residual_pair(problem, alpha - h, beta);
    let (cp, dp) = residual_pair(problem, alpha, beta + h);
    let (cm, dm) = residual_pair(problem, alpha, beta - h);
    let j = [
        [(ap - am) / (2.0 * h), (cp - cm) / (2.0 * h)],
        [(bp - bm) / (2.0 * h), (dp - dm) / (2.0 * h)],
    ];
    // singular values of a 2x2 matrix
    let q = j[0][0] * j[0][0] + j[0][1] * j[0][1] + j[1][0] * j[1][0] + j[1][1] * j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = (q * q / 4.0 - det * det).max(0.0).sqrt();
    let smax = (q / 2.0 + disc).sqrt();
    let smin = (q / 2.0 - disc).max(0.0).sqrt();
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

fn frame_at(problem: &Problem, alpha: f64, beta: f64) -> Option<Frame> {
    let raw = |theta: f64| DVector::from_column_slice(&[theta.cos(), theta.sin()]);
    Frame::renormalized(vec![raw(alpha), raw(beta)], problem.normalization()).ok()
}

/// Exhaustive residual scan over the angle wedge. Reports one entry per
/// orbit family of zeros, sorted by objective.
pub fn scan_2d(problem: &Problem, resolution: usize) -> Result<ScanResult, ScanError> {
    if problem.dim() != 2 {
        return Err(ScanError::DimensionUnsupported(problem.dim()));
    }
    if resolution < 100 {
        return Err(ScanError::ResolutionTooSmall(resolution));
    }
    let step = std::f64::consts::PI / resolution as f64;
    // corner grid, rows evaluated in parallel
    let grid: Vec<Vec<(f64, f64)>> = (0..=resolution)
        .into_par_iter()
        .map(|i| {
            (0..=resolution)
                .map(|j| residual_pair(problem, i as f64 * step, j as f64 * step))
                .collect()
        })
        .collect();

    let mut candidate_cells = Vec::new();
    for i in 0..resolution {
        for j in i..resolution {
            let corners = [grid[i][j], grid[i + 1][j], grid[i][j + 1], grid[i + 1][j + 1]];
            let r12 = [corners[0].0, corners[1].0, corners[2].0, corners[3].0];
            let r21 = [corners[0].1, corners[1].1, corners[2].1, corners[3].1];
            if straddles(r12) && straddles(r21) {
                candidate_cells.push([
                    i as f64 * step,
                    (i + 1) as f64 * step,
                    j as f64 * step,
                    (j + 1) as f64 * step,
                ]);
            }
        }
    }
    log::debug!("scan: {} candidate cells", candidate_cells.len());

    let refined: Vec<(f64, f64)> = candidate_cells
        .into_par_iter()
        .map(|cell| refine_cell(problem, cell))
        .collect();

    struct Family {
        alpha: f64,
        beta: f64,
        frame: Frame,
        canonical: Frame,
        residual_max: f64,
        objective: f64,
        degenerate: bool,
        members: usize,
    }
    let mut families: Vec<Family> = Vec::new();
    for (alpha, beta) in refined {
        let Some(mut frame) = frame_at(problem, alpha, beta) else {
            continue;
        };
        let mut residual_max = match problem.residual_max(&frame) {
            Ok(r) => r,
            Err(_) => continue,
        };
        // angle bisection cannot represent zeros pinned to coordinate
        // subspaces (cos of a float near pi/2 is never 0); propose exact
        // zero coordinates and keep the candidate if it re-verifies better
        for threshold in [1e-4, 1e-8, 1e-12] {
            if let Some(candidate) = crate::frames::sparsified(&frame, threshold) {
                if let Ok(r) = problem.residual_max(&candidate) {
                    if r < residual_max {
                        frame = candidate;
                        residual_max = r;
                    }
                }
            }
        }
        if residual_max > ZERO_VERIFY_TOL {
            continue;
        }
        let Ok((canonical, _)) = canonicalize(&frame) else {
            continue;
        };
        let objective = match problem.objective(&frame) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let degenerate = jacobian_ratio(problem, alpha, beta) <= DEGENERATE_RATIO;
        let mut absorbed = false;
        for family in families.iter_mut() {
            let same_orbit = orbit_distance(&family.canonical, &canonical)
                .map(|d| d <= MERGE_TOL)
                .unwrap_or(false);
            let same_continuum = family.degenerate
                && degenerate
                && (family.objective - objective).abs()
                    <= OBJECTIVE_MERGE_REL * family.objective.abs().max(1.0);
            if same_orbit || same_continuum {
                family.members += 1;
                if residual_max < family.residual_max {
                    family.alpha = alpha;
                    family.beta = beta;
                    family.frame = frame.clone();
                    family.canonical = canonical.clone();
                    family.residual_max = residual_max;
                    family.objective = objective;
                }
                family.degenerate |= degenerate;
                absorbed = true;
                break;
            }
        }
        if !absorbed {
            families.push(Family {
                alpha,
                beta,
                frame,
                canonical,
                residual_max,
                objective,
                degenerate,
                members: 1,
            });
        }
    }

    let mut zeros: Vec<ScanZero> = families
        .into_iter()
        .map(|f| ScanZero {
            alpha: f.alpha,
            beta: f.beta,
            frame: f.canonical,
            residual_max: f.residual_max,
            objective: f.objective,
            degenerate: f.degenerate,
            members: f.members,
        })
        .collect();
    zeros.sort_by(|a, b| {
        a.objective
            .total_cmp(&b.objective)
            .then_with(|| a.alpha.total_cmp(&b.alpha))
            .then_with(|| a.beta.total_cmp(&b.beta))
    });
    Ok(ScanResult {
        problem: problem.kind().to_string(),
        resolution,
        zeros,
    })
}
