//! Command-line front end: topological bounds, criticality censuses, frame
//! verification, the n = 2 grid oracle, and SVG plots, all with
//! machine-readable output.
//!
//! Exit codes: 0 success, 1 validation error, 2 internal failure, 3 when
//! `--check-bound` is requested and the census falls short of the bound.

use clap::{Args, Parser, Subcommand};
use critframes::frames::Frame;
use critframes::geometry::{ConvexBodySpec, NormSpec};
use critframes::grid::{scan_2d, ScanError};
use critframes::report::{
    bounds_text, census_csv, census_report, residual_matrix_rows, scan_report, CensusReport, Document,
    Meta, VerifyReport,
};
use critframes::solver::{multistart_census, Problem, SolverConfig};
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "critframes",
    version,
    about = "Critical outscribed parallelotopes, Birkhoff-James orthonormal bases, and their count bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form topological lower bounds
    Bounds(BoundsArgs),
    /// Multistart census of critically outscribed parallelotopes
    OutscribeCensus(OutscribeArgs),
    /// Multistart census of Birkhoff-James orthonormal bases
    BjCensus(BjArgs),
    /// Evaluate the criticality residual of a given frame
    Verify(VerifyArgs),
    /// Exhaustive grid scan of the residual zero set (n = 2)
    OracleScan(ScanArgs),
    /// Render a configuration as a static SVG (n = 2)
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write output to this file instead of stdout
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Output format
    #[arg(long, default_value = "json")]
    format: String,
    /// Omit the meta block (timestamps etc.) for byte-reproducible output
    #[arg(long)]
    no_meta: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Ambient dimension n (n >= 3)
    #[arg(long)]
    n: u64,
    /// Frame size k (1 <= k <= n)
    #[arg(long)]
    k: u64,
    /// Projective-space dimension for the configuration bounds
    #[arg(long)]
    d: Option<u64>,
    /// Primes for the digit-sum bounds, comma separated
    #[arg(long, default_value = "2,3,5", value_delimiter = ',')]
    primes: Vec<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Clone)]
struct CensusArgs {
    /// Number of refinement starts
    #[arg(long, default_value_t = 200)]
    starts: usize,
    /// Master seed; per-start seeds derive from it deterministically
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Residual tolerance for a frame to count as critical
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Orbit distance below which two converged frames merge
    #[arg(long, default_value_t = 1e-6)]
    merge_tol: f64,
    /// Maximum Newton iterations per start
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Worker threads for the multistart phase (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Check the census against the guaranteed bound; exit 3 if unsatisfied
    #[arg(long)]
    check_bound: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutscribeArgs {
    /// Body spec as inline JSON or @file
    #[arg(long)]
    body: String,
    #[command(flatten)]
    census: CensusArgs,
}

#[derive(Args)]
struct BjArgs {
    /// Norm spec as inline JSON or @file
    #[arg(long)]
    norm: String,
    /// Ambient dimension (required when the norm does not pin one)
    #[arg(long)]
    dim: Option<usize>,
    #[command(flatten)]
    census: CensusArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem variant: parallelotope | bj
    #[arg(long)]
    problem: String,
    /// Body spec (parallelotope problems) as inline JSON or @file
    #[arg(long)]
    body: Option<String>,
    /// Norm spec (bj problems) as inline JSON or @file
    #[arg(long)]
    norm: Option<String>,
    /// Frame as a JSON array of row vectors, inline or @file; rows are
    /// normalized under the problem's normalization
    #[arg(long)]
    frame: String,
    /// Residual tolerance for the critical verdict
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ScanArgs {
    /// Problem variant: parallelotope | bj
    #[arg(long)]
    problem: String,
    #[arg(long)]
    body: Option<String>,
    #[arg(long)]
    norm: Option<String>,
    /// Ambient dimension for norms that do not pin one
    #[arg(long)]
    dim: Option<usize>,
    /// Grid resolution per angle axis (>= 100)
    #[arg(long, default_value_t = 600)]
    resolution: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PlotArgs {
    /// Problem variant: parallelotope | bj
    #[arg(long)]
    problem: String,
    #[arg(long)]
    body: Option<String>,
    #[arg(long)]
    norm: Option<String>,
    /// Frame as a JSON array of row vectors, inline or @file
    #[arg(long)]
    frame: String,
    /// Boundary sample count
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

enum AppError {
    Validation(String),
    Internal(String),
    BoundUnsatisfied,
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Internal(_) => 2,
            AppError::BoundUnsatisfied => 3,
        }
    }
}

fn validation<E: std::fmt::Display>(err: E) -> AppError {
    AppError::Validation(err.to_string())
}

fn internal<E: std::fmt::Display>(err: E) -> AppError {
    AppError::Internal(err.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CRITFRAMES_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap help/version requests are successes, usage errors are not
            if err.use_stderr() {
                let _ = err.print();
                return ExitCode::from(1);
            }
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                AppError::Validation(msg) => eprintln!("error: {msg}"),
                AppError::Internal(msg) => eprintln!("internal error: {msg}"),
                AppError::BoundUnsatisfied => {
                    eprintln!("bound check failed: census found fewer orbits than guaranteed")
                }
            }
            ExitCode::from(err.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let meta_command = format!(
        "critframes {}",
        std::env::args().skip(1).collect::<Vec<_>>().join(" ")
    );
    match cli.command {
        Command::Bounds(args) => run_bounds(args, meta_command),
        Command::OutscribeCensus(args) => run_outscribe(args, meta_command),
        Command::BjCensus(args) => run_bj(args, meta_command),
        Command::Verify(args) => run_verify(args, meta_command),
        Command::OracleScan(args) => run_scan(args, meta_command),
        Command::Plot(args) => run_plot(args),
    }
}

/// Resolves `@file` arguments to their contents.
fn inline_or_file(arg: &str) -> Result<String, AppError> {
    if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path)
            .map_err(|e| AppError::Validation(format!("cannot read {path}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn parse_body(arg: &str) -> Result<(ConvexBodySpec, serde_json::Value), AppError> {
    let text = inline_or_file(arg)?;
    let spec: ConvexBodySpec =
        serde_json::from_str(&text).map_err(|e| AppError::Validation(format!("body spec: {e}")))?;
    let echo = serde_json::to_value(&spec).map_err(internal)?;
    Ok((spec, echo))
}

fn parse_norm(arg: &str) -> Result<(NormSpec, serde_json::Value), AppError> {
    let text = inline_or_file(arg)?;
    let spec: NormSpec =
        serde_json::from_str(&text).map_err(|e| AppError::Validation(format!("norm spec: {e}")))?;
    let echo = serde_json::to_value(&spec).map_err(internal)?;
    Ok((spec, echo))
}

fn parse_frame_rows(arg: &str) -> Result<Vec<Vec<f64>>, AppError> {
    let text = inline_or_file(arg)?;
    serde_json::from_str(&text).map_err(|e| AppError::Validation(format!("frame: {e}")))
}

fn build_problem(
    kind: &str,
    body: Option<&str>,
    norm: Option<&str>,
    dim: Option<usize>,
) -> Result<(Problem, serde_json::Value), AppError> {
    match kind {
        "parallelotope" => {
            let arg = body.ok_or_else(|| {
                AppError::Validation("parallelotope problems need --body".to_string())
            })?;
            let (spec, echo) = parse_body(arg)?;
            let oracle = spec.build().map_err(validation)?;
            Ok((Problem::parallelotope(oracle), echo))
        }
        "bj" => {
            let arg = norm
                .ok_or_else(|| AppError::Validation("bj problems need --norm".to_string()))?;
            let (spec, echo) = parse_norm(arg)?;
            let oracle = spec.build().map_err(validation)?;
            let dim = match (oracle.dim(), dim) {
                (Some(n), None) => n,
                (Some(n), Some(d)) if n == d => n,
                (Some(n), Some(d)) => {
                    return Err(AppError::Validation(format!(
                        "norm pins dimension {n} but --dim {d} was given"
                    )))
                }
                (None, Some(d)) => d,
                (None, None) => {
                    return Err(AppError::Validation(
                        "this norm does not pin a dimension; pass --dim".to_string(),
                    ))
                }
            };
            let problem = Problem::bj(oracle, dim).map_err(validation)?;
            Ok((problem, echo))
        }
        other => Err(AppError::Validation(format!(
            "unknown problem '{other}', expected parallelotope or bj"
        ))),
    }
}

fn emit(output: &OutputArgs, content: String) -> Result<(), AppError> {
    match &output.out {
        Some(path) => std::fs::write(path, content).map_err(internal),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(internal)
        }
    }
}

fn meta_for(output: &OutputArgs, command: String) -> Option<Meta> {
    (!output.no_meta).then(|| Meta::now(command))
}

fn run_bounds(args: BoundsArgs, command: String) -> Result<(), AppError> {
    let report =
        critframes::bounds::bounds_report(args.n, args.k, args.d, &args.primes).map_err(validation)?;
    let content = match args.output.format.as_str() {
        "json" => Document::new(meta_for(&args.output, command), report).to_json(),
        "text" => bounds_text(&report),
        other => {
            return Err(AppError::Validation(format!(
                "bounds supports --format json|text, not '{other}'"
            )))
        }
    };
    emit(&args.output, content)
}

fn configure_jobs(jobs: usize) -> Result<(), AppError> {
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(internal)?;
    }
    Ok(())
}

fn solver_config(census: &CensusArgs) -> SolverConfig {
    SolverConfig {
        starts: census.starts,
        master_seed: census.seed,
        tol_residual: census.tol,
        tol_merge: census.merge_tol,
        max_iters: census.max_iters,
        ..SolverConfig::default()
    }
}

fn emit_census(
    report: CensusReport,
    census_args: &CensusArgs,
    command: String,
) -> Result<(), AppError> {
    let satisfied = report.bound.map(|b| b.satisfied);
    let content = match census_args.output.format.as_str() {
        "json" => Document::new(meta_for(&census_args.output, command), report).to_json(),
        "csv" => census_csv(&report),
        other => {
            return Err(AppError::Validation(format!(
                "census supports --format json|csv, not '{other}'"
            )))
        }
    };
    emit(&census_args.output, content)?;
    if satisfied == Some(false) {
        return Err(AppError::BoundUnsatisfied);
    }
    Ok(())
}

fn run_outscribe(args: OutscribeArgs, command: String) -> Result<(), AppError> {
    configure_jobs(args.census.jobs)?;
    let (spec, echo) = parse_body(&args.body)?;
    let oracle = spec.build().map_err(validation)?;
    let problem = Problem::parallelotope(oracle);
    let config = solver_config(&args.census);
    let census = multistart_census(&problem, &config).map_err(internal)?;
    let report = census_report(census, echo, args.census.check_bound);
    emit_census(report, &args.census, command)
}

fn run_bj(args: BjArgs, command: String) -> Result<(), AppError> {
    configure_jobs(args.census.jobs)?;
    let (problem, echo) = build_problem("bj", None, Some(&args.norm), args.dim)?;
    let config = solver_config(&args.census);
    let census = multistart_census(&problem, &config).map_err(internal)?;
    let report = census_report(census, echo, args.census.check_bound);
    emit_census(report, &args.census, command)
}

fn run_verify(args: VerifyArgs, command: String) -> Result<(), AppError> {
    let rows = parse_frame_rows(&args.frame)?;
    let (problem, echo) = build_problem(
        &args.problem,
        args.body.as_deref(),
        args.norm.as_deref(),
        Some(rows.len()),
    )?;
    let vectors: Vec<critframes::nalgebra::DVector<f64>> = rows
        .iter()
        .map(|r| critframes::nalgebra::DVector::from_column_slice(r))
        .collect();
    let frame =
        Frame::renormalized(vectors, problem.normalization()).map_err(validation)?;
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(AppError::Validation("--tol must be positive".to_string()));
    }
    let matrix = problem.residual_matrix(&frame).map_err(validation)?;
    let residual_max = matrix.amax();
    let objective = problem.objective(&frame).map_err(internal)?;
    let parallelotope = match &problem {
        Problem::Parallelotope { body } => {
            Some(critframes::report::parallelotope_report(body, &frame).map_err(internal)?)
        }
        Problem::Bj { .. } => None,
    };
    let report = VerifyReport {
        problem: problem.kind().to_string(),
        spec: echo,
        n: problem.dim(),
        frame,
        objective,
        residual_matrix: residual_matrix_rows(&matrix),
        residual_max,
        tol: args.tol,
        critical: residual_max <= args.tol,
        parallelotope,
    };
    let content = match args.output.format.as_str() {
        "json" => Document::new(meta_for(&args.output, command), report).to_json(),
        other => {
            return Err(AppError::Validation(format!(
                "verify supports --format json, not '{other}'"
            )))
        }
    };
    emit(&args.output, content)
}

fn run_scan(args: ScanArgs, command: String) -> Result<(), AppError> {
    let (problem, echo) = build_problem(
        &args.problem,
        args.body.as_deref(),
        args.norm.as_deref(),
        args.dim,
    )?;
    let result = scan_2d(&problem, args.resolution).map_err(|e| match e {
        ScanError::DimensionUnsupported(_) | ScanError::ResolutionTooSmall(_) => validation(e),
        ScanError::Solver(inner) => internal(inner),
    })?;
    let report = scan_report(result, echo);
    let content = match args.output.format.as_str() {
        "json" => Document::new(meta_for(&args.output, command), report).to_json(),
        other => {
            return Err(AppError::Validation(format!(
                "oracle-scan supports --format json, not '{other}'"
            )))
        }
    };
    emit(&args.output, content)
}

fn run_plot(args: PlotArgs) -> Result<(), AppError> {
    let rows = parse_frame_rows(&args.frame)?;
    let (problem, _) = build_problem(
        &args.problem,
        args.body.as_deref(),
        args.norm.as_deref(),
        Some(rows.len()),
    )?;
    if problem.dim() != 2 {
        return Err(AppError::Validation("plot supports n = 2 only".to_string()));
    }
    let vectors: Vec<critframes::nalgebra::DVector<f64>> = rows
        .iter()
        .map(|r| critframes::nalgebra::DVector::from_column_slice(r))
        .collect();
    let frame = Frame::renormalized(vectors, problem.normalization()).map_err(validation)?;
    let svg = match &problem {
        Problem::Parallelotope { body } => {
            critframes::svg::parallelotope_svg(body, &frame, args.samples).map_err(validation)?
        }
        Problem::Bj { norm, .. } => {
            critframes::svg::bj_svg(norm, &frame, args.samples).map_err(validation)?
        }
    };
    match &args.out {
        Some(path) => std::fs::write(path, svg).map_err(internal),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(svg.as_bytes()).map_err(internal)
        }
    }
}
