//! Closed-form oracles for smooth strictly convex bodies and smooth norms.
//!
//! Bodies are described declaratively ([`ConvexBodySpec`]) and compiled into
//! validated oracle handles ([`BodyOracle`]) exposing the support function
//! `s(K, y) = sup_{x in K} <y, x>` together with its unique maximizer.
//! Three families are supported:
//!
//! * ellipsoids `{x : x^T A^{-1} x <= 1}` for symmetric positive-definite `A`,
//!   with `s(K, y) = sqrt(y^T A y)` and support point `A y / s`;
//! * weighted p-balls `{x : sum |x_m / w_m|^p <= 1}` for `1 < p < inf`,
//!   with the support function given by the Hoelder-conjugate weighted norm;
//! * Minkowski sums, where support values and support points add exactly.
//!
//! Norms ([`NormSpec`] / [`NormOracle`]) are weighted p-norms or gauges of
//! centrally symmetric bodies; `eval` returns the norm value and its gradient,
//! which satisfies `d/dt ||x + t y|| at 0 = <gradient, y>`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// Relative tolerance below which an ellipsoid eigenvalue counts as non-positive.
const SPD_EIGEN_TOL: f64 = 1e-10;
/// Sampled directions used for the central-symmetry check of gauge bodies.
const SYMMETRY_SAMPLES: usize = 64;
const SYMMETRY_TOL: f64 = 1e-9;
/// Convergence tolerance for the Minkowski-sum gauge solve.
const GAUGE_SOLVE_TOL: f64 = 1e-12;
const GAUGE_SOLVE_MAX_ITERS: usize = 80;
const GAUGE_SOLVE_FD_STEP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("matrix is not symmetric positive-definite: {0}")]
    NotPositiveDefinite(String),
    #[error("exponent p = {0} is outside the smooth range (1, inf)")]
    ExponentOutOfRange(f64),
    #[error("gauge body is not centrally symmetric (sampled support mismatch)")]
    NonSymmetricGaugeBody,
    #[error("minkowski sum needs at least one part")]
    EmptySum,
    #[error("weights must be finite and strictly positive")]
    NonPositiveWeight,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("vector must be nonzero")]
    ZeroVector,
    #[error("gauge evaluation failed to converge (residual {0:.3e})")]
    GaugeSolveFailed(f64),
}

pub type GeoResult<T> = Result<T, GeometryError>;

/// Declarative description of a smooth strictly convex body containing the origin.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConvexBodySpec {
    Ellipsoid { matrix: Vec<Vec<f64>> },
    #[serde(rename = "pball")]
    WeightedPBall { p: f64, weights: Vec<f64> },
    Sum { parts: Vec<ConvexBodySpec> },
}

/// Declarative description of a smooth norm on R^n.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NormSpec {
    #[serde(rename = "pnorm")]
    WeightedPNorm {
        p: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Gauge { body: ConvexBodySpec },
}

/// Result of a support-function evaluation: the value `s(K, y)` and the
/// unique boundary point attaining it.
#[derive(Debug, Clone)]
pub struct SupportEvaluation {
    pub value: f64,
    pub point: DVector<f64>,
}

/// Validated support-function oracle for a [`ConvexBodySpec`].
#[derive(Debug, Clone)]
pub enum BodyOracle {
    Ellipsoid {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
    },
    WeightedPBall {
        p: f64,
        weights: DVector<f64>,
    },
    Sum {
        parts: Vec<BodyOracle>,
    },
}

impl ConvexBodySpec {
    /// Validates the spec and compiles an oracle handle.
    pub fn build(&self) -> GeoResult<BodyOracle> {
        match self {
            ConvexBodySpec::Ellipsoid { matrix } => build_ellipsoid(matrix),
            ConvexBodySpec::WeightedPBall { p, weights } => build_pball(*p, weights),
            ConvexBodySpec::Sum { parts } => {
                if parts.is_empty() {
                    return Err(GeometryError::EmptySum);
                }
                let built: Vec<BodyOracle> = parts.iter().map(|p| p.build()).collect::<GeoResult<_>>()?;
                let dim = built[0].dim();
                for part in &built[1..] {
                    if part.dim() != dim {
                        return Err(GeometryError::DimensionMismatch {
                            expected: dim,
                            got: part.dim(),
                        });
                    }
                }
                Ok(BodyOracle::Sum { parts: built })
            }
        }
    }
}

fn build_ellipsoid(matrix: &[Vec<f64>]) -> GeoResult<BodyOracle> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|row| row.len() != n) {
        return Err(GeometryError::NotPositiveDefinite("matrix is not square".into()));
    }
    let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NotPositiveDefinite("matrix has non-finite entries".into()));
    }
    let scale = a.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(GeometryError::NotPositiveDefinite(format!(
                    "entry ({i},{j}) differs from its transpose"
                )));
            }
        }
    }
    let eigen = a.clone().symmetric_eigen();
    let min_eig = eigen.eigenvalues.min();
    if min_eig <= SPD_EIGEN_TOL * scale {
        return Err(GeometryError::NotPositiveDefinite(format!(
            "smallest eigenvalue {min_eig:.3e} is not positive"
        )));
    }
    let inverse = a
        .clone()
        .cholesky()
        .ok_or_else(|| GeometryError::NotPositiveDefinite("cholesky failed".into()))?
        .inverse();
    Ok(BodyOracle::Ellipsoid { matrix: a, inverse })
}

fn build_pball(p: f64, weights: &[f64]) -> GeoResult<BodyOracle> {
    if !(p.is_finite() && p > 1.0) {
        return Err(GeometryError::ExponentOutOfRange(p));
    }
    if weights.is_empty() || weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(GeometryError::NonPositiveWeight);
    }
    Ok(BodyOracle::WeightedPBall {
        p,
        weights: DVector::from_column_slice(weights),
    })
}

/// `||z||_q` computed with max-scaling so extreme exponents stay stable.
fn scaled_q_norm(z: &DVector<f64>, q: f64) -> f64 {
    let m = z.amax();
    if m == 0.0 {
        return 0.0;
    }
    let sum: f64 = z.iter().map(|&v| (v.abs() / m).powf(q)).sum();
    m * sum.powf(1.0 / q)
}

impl BodyOracle {
    pub fn dim(&self) -> usize {
        match self {
            BodyOracle::Ellipsoid { matrix, .. } => matrix.nrows(),
            BodyOracle::WeightedPBall { weights, .. } => weights.len(),
            BodyOracle::Sum { parts } => parts[0].dim(),
        }
    }

    fn check_dim(&self, v: &DVector<f64>) -> GeoResult<()> {
        if v.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Support value and support point of the body in `direction`.
    pub fn support(&self, direction: &DVector<f64>) -> GeoResult<SupportEvaluation> {
        self.check_dim(direction)?;
        if direction.norm() == 0.0 {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(self.support_unchecked(direction))
    }

    fn support_unchecked(&self, y: &DVector<f64>) -> SupportEvaluation {
        match self {
            BodyOracle::Ellipsoid { matrix, .. } => {
                let ay = matrix * y;
                let value = y.dot(&ay).sqrt();
                SupportEvaluation {
                    point: ay / value,
                    value,
                }
            }
            BodyOracle::WeightedPBall { p, weights } => {
                let q = p / (p - 1.0);
                let z = DVector::from_fn(y.len(), |m, _| weights[m] * y[m]);
                let value = scaled_q_norm(&z, q);
                let point = DVector::from_fn(y.len(), |m, _| {
                    weights[m] * z[m].signum() * (z[m].abs() / value).powf(q - 1.0)
                });
                SupportEvaluation { value, point }
            }
            BodyOracle::Sum { parts } => {
                let mut value = 0.0;
                let mut point = DVector::zeros(y.len());
                for part in parts {
                    let eval = part.support_unchecked(y);
                    value += eval.value;
                    point += eval.point;
                }
                SupportEvaluation { value, point }
            }
        }
    }

    /// Minkowski gauge of the body at `x` (1 on the boundary).
    pub fn gauge(&self, x: &DVector<f64>) -> GeoResult<f64> {
        Ok(self.gauge_and_gradient(x)?.0)
    }

    /// Gauge value together with its gradient at `x`.
    pub fn gauge_and_gradient(&self, x: &DVector<f64>) -> GeoResult<(f64, DVector<f64>)> {
        self.check_dim(x)?;
        if x.norm() == 0.0 {
            return Err(GeometryError::ZeroVector);
        }
        match self {
            BodyOracle::Ellipsoid { inverse, .. } => {
                let ix = inverse * x;
                let value = x.dot(&ix).sqrt();
                Ok((value, ix / value))
            }
            BodyOracle::WeightedPBall { p, weights } => {
                let u = DVector::from_fn(x.len(), |m, _| x[m] / weights[m]);
                let value = scaled_q_norm(&u, *p);
                let grad = DVector::from_fn(x.len(), |m, _| {
                    u[m].signum() * (u[m].abs() / value).powf(p - 1.0) / weights[m]
                });
                Ok((value, grad))
            }
            BodyOracle::Sum { .. } => self.sum_gauge(x),
        }
    }

    /// Gauge of a Minkowski sum via Gauss-Newton on the support-point map.
    ///
    /// The radial boundary point `x / g` is the unique point of the boundary
    /// with outer normal `y*` satisfying `point(y*) parallel to x`; once `y*`
    /// is known, `g = <y*, x> / s(K, y*)` and the gauge gradient is
    /// `y* / s(K, y*)`. The system solved is `P_{x-perp}(point(y)) = 0`
    /// with the normalization `<y, x_hat> = 1`.
    fn sum_gauge(&self, x: &DVector<f64>) -> GeoResult<(f64, DVector<f64>)> {
        let n = x.len();
        let x_hat = x / x.norm();
        let point_of = |y: &DVector<f64>| -> DVector<f64> { self.support_unchecked(y).point };
        let residual = |y: &DVector<f64>| -> DVector<f64> {
            let p = point_of(y);
            let tangential = &p - &x_hat * p.dot(&x_hat);
            let mut r = DVector::zeros(n + 1);
            r.rows_mut(0, n).copy_from(&tangential);
            r[n] = y.dot(&x_hat) - 1.0;
            r
        };

        let mut y = x_hat.clone();
        let mut r = residual(&y);
        let mut rnorm = r.norm();
        let scale = 1.0 + point_of(&x_hat).norm();
        for _ in 0..GAUGE_SOLVE_MAX_ITERS {
            if rnorm <= GAUGE_SOLVE_TOL * scale {
                break;
            }
            let mut jac = DMatrix::zeros(n + 1, n);
            for m in 0..n {
                let mut yh = y.clone();
                yh[m] += GAUGE_SOLVE_FD_STEP;
                let rh = residual(&yh);
                jac.set_column(m, &((rh - &r) / GAUGE_SOLVE_FD_STEP));
            }
            let svd = jac.svd(true, true);
            let step = svd
                .solve(&(-&r), 1e-14)
                .map_err(|_| GeometryError::GaugeSolveFailed(rnorm))?;
            let mut lambda = 1.0;
            let mut advanced = false;
            for _ in 0..30 {
                let candidate = &y + &step * lambda;
                let rc = residual(&candidate);
                if rc.norm() < rnorm {
                    y = candidate;
                    r = rc;
                    rnorm = r.norm();
                    advanced = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !advanced {
                return Err(GeometryError::GaugeSolveFailed(rnorm));
            }
        }
        if rnorm > GAUGE_SOLVE_TOL * scale {
            return Err(GeometryError::GaugeSolveFailed(rnorm));
        }
        let s = self.support_unchecked(&y).value;
        let value = y.dot(x) / s;
        Ok((value, y / s))
    }

    /// Checks `s(K, y) = s(K, -y)` on a fixed set of sampled directions.
    pub fn is_centrally_symmetric(&self) -> bool {
        let n = self.dim();
        let mut rng = crate::sampling::fixed_rng(0x53594d4d45545259);
        for _ in 0..SYMMETRY_SAMPLES {
            let y = crate::sampling::unit_sphere_sample(&mut rng, n);
            let plus = self.support_unchecked(&y).value;
            let minus = self.support_unchecked(&(-&y)).value;
            if (plus - minus).abs() > SYMMETRY_TOL * plus.max(minus) {
                return false;
            }
        }
        true
    }
}

/// Validated norm oracle for a [`NormSpec`].
#[derive(Debug, Clone)]
pub enum NormOracle {
    WeightedPNorm {
        p: f64,
        weights: Option<DVector<f64>>,
    },
    Gauge {
        body: Arc<BodyOracle>,
    },
}

impl NormSpec {
    pub fn build(&self) -> GeoResult<NormOracle> {
        match self {
            NormSpec::WeightedPNorm { p, weights } => {
                if !(p.is_finite() && *p > 1.0) {
                    return Err(GeometryError::ExponentOutOfRange(*p));
                }
                let weights = match weights {
                    None => None,
                    Some(w) => {
                        if w.is_empty() || w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                            return Err(GeometryError::NonPositiveWeight);
                        }
                        Some(DVector::from_column_slice(w))
                    }
                };
                Ok(NormOracle::WeightedPNorm { p: *p, weights })
            }
            NormSpec::Gauge { body } => {
                let oracle = body.build()?;
                if !oracle.is_centrally_symmetric() {
                    return Err(GeometryError::NonSymmetricGaugeBody);
                }
                Ok(NormOracle::Gauge { body: Arc::new(oracle) })
            }
        }
    }
}

impl NormOracle {
    /// Dimension pinned by the spec, or `None` when the norm applies to any n.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NormOracle::WeightedPNorm { weights, .. } => weights.as_ref().map(|w| w.len()),
            NormOracle::Gauge { body } => Some(body.dim()),
        }
    }

    /// Norm value and gradient at `x`; `<gradient, y>` is the one-sided
    /// derivative `d/dt ||x + t y||` at `t = 0`.
    pub fn eval(&self, x: &DVector<f64>) -> GeoResult<(f64, DVector<f64>)> {
        if x.norm() == 0.0 {
            return Err(GeometryError::ZeroVector);
        }
        match self {
            NormOracle::WeightedPNorm { p, weights } => {
                if let Some(w) = weights {
                    if w.len() != x.len() {
                        return Err(GeometryError::DimensionMismatch {
                            expected: w.len(),
                            got: x.len(),
                        });
                    }
                }
                let u = DVector::from_fn(x.len(), |m, _| match weights {
                    Some(w) => x[m] / w[m],
                    None => x[m],
                });
                let value = scaled_q_norm(&u, *p);
                let grad = DVector::from_fn(x.len(), |m, _| {
                    let g = u[m].signum() * (u[m].abs() / value).powf(p - 1.0);
                    match weights {
                        Some(w) => g / w[m],
                        None => g,
                    }
                });
                Ok((value, grad))
            }
            NormOracle::Gauge { body } => body.gauge_and_gradient(x),
        }
    }

    /// Norm value only.
    pub fn value(&self, x: &DVector<f64>) -> GeoResult<f64> {
        Ok(self.eval(x)?.0)
    }
}
