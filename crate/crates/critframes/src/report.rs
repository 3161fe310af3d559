//! Machine-readable output documents: JSON payloads shared by the library
//! tests and the CLI, plus the CSV census summary.
//!
//! Every document is a plain struct with a fixed field order, so identical
//! inputs serialize byte-identically. The optional `meta` block carries
//! provenance (tool, version, timestamp, command line) and is omitted
//! entirely in `--no-meta` runs.

use crate::bounds::BoundsReport;
use crate::grid::ScanResult;
use crate::solver::{BoundsCheck, Census, CriticalOrbit};
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub generated_at_unix: u64,
    pub command: String,
}

impl Meta {
    pub fn now(command: String) -> Meta {
        let generated_at_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Meta {
            tool: "critframes".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at_unix,
            command,
        }
    }
}

/// Output wrapper: optional meta block followed by the payload fields.
#[derive(Debug, Clone, Serialize)]
pub struct Document<T: Serialize> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(flatten)]
    pub payload: T,
}

impl<T: Serialize> Document<T> {
    pub fn new(meta: Option<Meta>, payload: T) -> Self {
        Document { meta, payload }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("reports serialize");
        out.push('\n');
        out
    }
}

/// Census payload: the spec echo, solver configuration, orbits, and the
/// optional bound check.
#[derive(Debug, Clone, Serialize)]
pub struct CensusReport {
    pub problem: String,
    pub spec: serde_json::Value,
    pub n: usize,
    pub config: crate::solver::SolverConfig,
    pub starts_converged: usize,
    pub starts_failed: usize,
    pub orbits: Vec<CriticalOrbit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundsCheck>,
}

pub fn census_report(census: Census, spec: serde_json::Value, check_bound: bool) -> CensusReport {
    let bound = check_bound.then(|| crate::solver::verify_lower_bound(&census.orbits, census.n));
    CensusReport {
        problem: census.problem,
        spec,
        n: census.n,
        config: census.config,
        starts_converged: census.starts_converged,
        starts_failed: census.starts_failed,
        orbits: census.orbits,
        bound,
    }
}

/// One row per orbit.
pub fn census_csv(report: &CensusReport) -> String {
    let mut out = String::from("orbit,objective,residual_max,morse_index,hessian_nullity,hits,degenerate,frame\n");
    for (i, orbit) in report.orbits.iter().enumerate() {
        let morse = orbit.morse_index.map(|m| m.to_string()).unwrap_or_default();
        let frame = orbit
            .canonical_frame
            .to_rows()
            .iter()
            .map(|row| row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{i},{},{},{morse},{},{},{},{frame}\n",
            orbit.objective, orbit.residual_max, orbit.hessian_nullity, orbit.hits, orbit.degenerate
        ));
    }
    out
}

/// Verification payload for a single frame.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub problem: String,
    pub spec: serde_json::Value,
    pub n: usize,
    pub frame: crate::frames::Frame,
    pub objective: f64,
    /// Row-major entries with nulls on the diagonal.
    pub residual_matrix: Vec<Vec<Option<f64>>>,
    pub residual_max: f64,
    pub tol: f64,
    pub critical: bool,
    /// Outscription data, present for parallelotope problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelotope: Option<ParallelotopeReport>,
}

/// JSON form of an outscribed parallelotope.
#[derive(Debug, Clone, Serialize)]
pub struct ParallelotopeReport {
    pub frame: crate::frames::Frame,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per slab: the support point on the lower hyperplane, then the upper.
    pub support_points: Vec<[Vec<f64>; 2]>,
    pub volume: f64,
    pub residual_max: f64,
}

pub fn parallelotope_report(
    body: &crate::geometry::BodyOracle,
    frame: &crate::frames::Frame,
) -> Result<ParallelotopeReport, crate::parallelotope::ParallelotopeError> {
    let p = crate::parallelotope::outscribe(body, frame)?;
    let volume = crate::parallelotope::volume(&p)?;
    let residual_max = crate::parallelotope::criticality_residual(body, frame)?.amax();
    Ok(ParallelotopeReport {
        frame: p.frame.clone(),
        lower: p.lower.iter().copied().collect(),
        upper: p.upper.iter().copied().collect(),
        support_points: p
            .support_points
            .iter()
            .map(|(lo, hi)| [lo.iter().copied().collect(), hi.iter().copied().collect()])
            .collect(),
        volume,
        residual_max,
    })
}

/// Residual matrix as JSON rows, nulls on the diagonal.
pub fn residual_matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<Option<f64>>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| if i == j { None } else { Some(m[(i, j)]) })
                .collect()
        })
        .collect()
}

/// Grid-scan payload.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub problem: String,
    pub spec: serde_json::Value,
    pub resolution: usize,
    pub zeros: Vec<crate::grid::ScanZero>,
}

pub fn scan_report(result: ScanResult, spec: serde_json::Value) -> ScanReport {
    ScanReport {
        problem: result.problem,
        spec,
        resolution: result.resolution,
        zeros: result.zeros,
    }
}

/// Aligned text table for a bounds report.
pub fn bounds_text(report: &BoundsReport) -> String {
    let mut rows: Vec<(String, String)> = vec![
        ("n".into(), report.n.to_string()),
        ("k".into(), report.k.to_string()),
    ];
    if let Some(d) = report.d {
        rows.push(("d".into(), d.to_string()));
    }
    rows.push(("genus".into(), report.genus.to_string()));
    rows.push(("cat_quotient".into(), report.cat_quotient.to_string()));
    if let Some(c) = report.config_cat_lower {
        rows.push(("config_cat_lower".into(), c.to_string()));
    }
    for (p, v) in &report.digit_sum_bounds {
        rows.push((format!("digit_sum_bound[p={p}]"), v.to_string()));
    }
    rows.push(("critical_count_lower".into(), report.critical_count_lower.to_string()));
    rows.push(("best_bound".into(), report.best_bound.to_string()));
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    out
}
