//! `subrec`: generate planted instances, run the recovery algorithms,
//! answer basis-polytope membership queries, and compute radial isotropic
//! position. Every command prints a JSON report that echoes the
//! invocation, the seed, and the tolerances in effect, so results can be
//! reproduced exactly.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical or budget error,
//! 4 timeout or stuck, 5 outside the polytope, 6 iteration cap.

use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use subrec::instance::{PointSet, RecoveryResult};
use subrec::io::{self, InstanceFile};
use subrec::isotropy::{self, BartheProblem, SolverStatus};
use subrec::matroid::{self, AnswerKind, MembershipAnswer, Polytope, SfmMode};
use subrec::randomized::{self, NoiseGapConfig};
use subrec::{derandomized, sse, Error, Tolerances};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;
const EXIT_OUTSIDE: u8 = 5;
const EXIT_ITERATION_CAP: u8 = 6;

#[derive(Parser)]
#[command(name = "subrec", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted labeled instance, or reduce a graph file to a
    /// point-set instance.
    Gen(GenArgs),
    /// Recover the planted inlier set from an instance file.
    Recover(RecoverArgs),
    /// Test a vector for basis/independent-set polytope membership.
    Membership(MembershipArgs),
    /// Solve the concave program for radial isotropic position.
    Rip(RipArgs),
}

/// Numerical tolerances and enumeration budgets. Defaults match the
/// library defaults.
#[derive(Args, Clone)]
struct TolArgs {
    /// Rank threshold multiplier on sigma_max * max(rows, cols) * eps.
    #[arg(long, default_value_t = Tolerances::default().rank_scale, help_heading = "Tolerances")]
    tol_rank_scale: f64,
    /// Membership distance tolerance for span tests.
    #[arg(long, default_value_t = Tolerances::default().membership, help_heading = "Tolerances")]
    tol_membership: f64,
    /// Relative threshold for kernel-vector support detection.
    #[arg(long, default_value_t = Tolerances::default().support, help_heading = "Tolerances")]
    tol_support: f64,
    /// Maximum residual for an accepted kernel vector.
    #[arg(long, default_value_t = Tolerances::default().kernel_residual, help_heading = "Tolerances")]
    tol_kernel_residual: f64,
    /// Slack on polytope inequality checks.
    #[arg(long, default_value_t = Tolerances::default().polytope, help_heading = "Tolerances")]
    tol_polytope: f64,
    /// Slack on the basis-facet sum constraint.
    #[arg(long, default_value_t = Tolerances::default().polytope_sum, help_heading = "Tolerances")]
    tol_polytope_sum: f64,
    /// Relative duality-gap target for the min-norm-point solver.
    #[arg(long, default_value_t = Tolerances::default().minnorm_gap, help_heading = "Tolerances")]
    tol_minnorm_gap: f64,
    /// Relative cutoff below which a basis determinant counts as zero.
    #[arg(long, default_value_t = Tolerances::default().det_zero, help_heading = "Tolerances")]
    tol_det_zero: f64,
    /// Maximum number of subsets any exhaustive enumeration may visit.
    #[arg(long, default_value_t = Tolerances::default().subset_budget, help_heading = "Tolerances")]
    subset_budget: u64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rank_scale: self.tol_rank_scale,
            membership: self.tol_membership,
            support: self.tol_support,
            kernel_residual: self.tol_kernel_residual,
            polytope: self.tol_polytope,
            polytope_sum: self.tol_polytope_sum,
            minnorm_gap: self.tol_minnorm_gap,
            det_zero: self.tol_det_zero,
            subset_budget: self.subset_budget,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Ambient dimension.
    #[arg(long, required_unless_present = "sse_graph")]
    n: Option<usize>,
    /// Planted subspace dimension.
    #[arg(long, required_unless_present = "sse_graph")]
    d: Option<usize>,
    /// Total number of points.
    #[arg(long, required_unless_present = "sse_graph")]
    m: Option<usize>,
    /// Number of planted inliers.
    #[arg(long, required_unless_present = "sse_graph")]
    inliers: Option<usize>,
    /// Relative inlier noise level.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Reduce a graph file instead of planting a subspace; writes the
    /// point matrix plus a `<out>.sidecar` edge map.
    #[arg(long, conflicts_with_all = ["n", "d", "m", "inliers", "noise"])]
    sse_graph: Option<String>,
    /// RNG seed; defaults to $SUBREC_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file.
    #[arg(short, long)]
    output: String,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Las Vegas sampling with exact rank tests.
    Random,
    /// Determinant-gap sampling for noisy inliers.
    RandomDet,
    /// Deterministic peeling via membership queries.
    Derand,
}

#[derive(Args)]
struct RecoverArgs {
    /// Instance file in the shared matrix format.
    instance: String,
    #[arg(long, value_enum)]
    method: Method,
    /// Determinant-gap threshold C^2 (required for random-det).
    #[arg(long, value_name = "C2")]
    c2: Option<f64>,
    /// Subspace dimension for random-det on unlabeled instances.
    #[arg(long)]
    d: Option<usize>,
    /// Iteration cap for the sampling methods.
    #[arg(long)]
    max_iter: Option<u64>,
    /// RNG seed; defaults to $SUBREC_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Minnorm,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolytopeArg {
    Basis,
    Independent,
}

#[derive(Args)]
struct MembershipArgs {
    /// Instance file in the shared matrix format.
    instance: String,
    /// Query the uniform vector x = (n/m) 1.
    #[arg(long, conflicts_with = "x")]
    uniform: bool,
    /// File with the query vector.
    #[arg(long, required_unless_present = "uniform")]
    x: Option<String>,
    #[arg(long, value_enum, default_value_t = Mode::Minnorm)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = PolytopeArg::Basis)]
    polytope: PolytopeArg,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct RipArgs {
    /// Matrix file in the shared text format.
    matrix: String,
    /// Coefficient vector: "uniform" or a vector file path.
    #[arg(long, default_value = "uniform")]
    c: String,
    /// Gradient sup-norm target for the solver.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Dilation slack used for the effective box bounds.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[command(flatten)]
    tolerances: TolArgs,
}

#[derive(Serialize)]
struct RunReport {
    command: Vec<String>,
    seed: Option<u64>,
    tolerances: Value,
    payload: Value,
    wall_time_ms: u128,
}

fn tolerances_json(tol: &Tolerances) -> Value {
    json!({
        "rank_scale": tol.rank_scale,
        "membership": tol.membership,
        "support": tol.support,
        "kernel_residual": tol.kernel_residual,
        "polytope": tol.polytope,
        "polytope_sum": tol.polytope_sum,
        "minnorm_gap": tol.minnorm_gap,
        "det_zero": tol.det_zero,
        "subset_budget": tol.subset_budget,
    })
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Io(_) | Error::Parse(_) => EXIT_IO,
        Error::Timeout { .. } | Error::Stuck => EXIT_TIMEOUT,
        _ => EXIT_NUMERICAL,
    }
}

fn default_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SUBREC_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn read_file(path: &str) -> subrec::Result<String> {
    std::fs::read_to_string(path).map_err(Error::Io)
}

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|&i| i + 1).collect()
}

fn matrix_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| m[(r, c)])
        .collect()
}

fn recovery_payload(result: &RecoveryResult) -> Value {
    json!({
        "method": result.method.as_str(),
        "inliers": one_based(&result.inlier_indices),
        "subspace_dim": result.subspace_basis.ncols(),
        "basis_row_major": matrix_row_major(&result.subspace_basis),
        "iterations": result.iterations,
    })
}

fn membership_payload(answer: &MembershipAnswer) -> Value {
    let kind = match answer.kind {
        AnswerKind::Inside => "inside",
        AnswerKind::EdmondsGap => "edmonds_gap",
        AnswerKind::BoxViolation => "box_violation",
        AnswerKind::NegativeCoordinate => "negative_coordinate",
        AnswerKind::SumMismatch => "sum_mismatch",
    };
    json!({
        "inside": answer.inside,
        "min_value": answer.min_value,
        "certificate": one_based(&answer.certificate),
        "kind": kind,
    })
}

fn print_report(seed: Option<u64>, tol: &Tolerances, payload: Value, started: Instant) {
    let report = RunReport {
        command: std::env::args().collect(),
        seed,
        tolerances: tolerances_json(tol),
        payload,
        wall_time_ms: started.elapsed().as_millis(),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
}

fn parse_points(path: &str, tol: &Tolerances) -> subrec::Result<InstanceFile> {
    io::parse_instance(&read_file(path)?, tol)
}

fn cmd_gen(args: &GenArgs) -> subrec::Result<(Option<u64>, Tolerances, Value)> {
    let tol = args.tol.tolerances();
    let seed = default_seed(args.seed);

    if let Some(graph_path) = &args.sse_graph {
        let graph = io::parse_graph(&read_file(graph_path)?)?;
        let reduction = sse::reduce_sse_to_inlier(&graph, seed);
        std::fs::write(&args.output, io::write_matrix(reduction.points()))?;
        let sidecar_path = format!("{}.sidecar", args.output);
        std::fs::write(&sidecar_path, io::write_sidecar(&reduction))?;
        let payload = json!({
            "seed": seed,
            "output": args.output,
            "sidecar": sidecar_path,
            "vertices": graph.vertex_count(),
            "degree": graph.degree(),
            "points": graph.edge_count(),
        });
        return Ok((Some(seed), tol, payload));
    }

    let (n, d, m, k) = (
        args.n.expect("required by clap"),
        args.d.expect("required by clap"),
        args.m.expect("required by clap"),
        args.inliers.expect("required by clap"),
    );
    let instance = subrec::instance::generate_planted(n, d, m, k, args.noise, seed, &tol)?;
    std::fs::write(&args.output, io::write_labeled_instance(&instance))?;
    let payload = json!({
        "seed": seed,
        "output": args.output,
        "n": n, "d": d, "m": m,
        "inliers": one_based(&instance.inliers),
        "noise": args.noise,
    });
    Ok((Some(seed), tol, payload))
}

fn cmd_recover(args: &RecoverArgs) -> subrec::Result<(Option<u64>, Tolerances, Value)> {
    let tol = args.tol.tolerances();
    let seed = default_seed(args.seed);
    let file = parse_points(&args.instance, &tol)?;
    let points = file.points();

    let result = match args.method {
        Method::Random => randomized::randomized_find(points, seed, args.max_iter, &tol)?,
        Method::RandomDet => {
            let c2 = args.c2.ok_or_else(|| {
                Error::InvalidArgument("--c2 is required for --method random-det".into())
            })?;
            let d = match (&file, args.d) {
                (_, Some(d)) => d,
                (InstanceFile::Labeled(inst), None) => inst.d,
                (InstanceFile::Unlabeled(_), None) => {
                    return Err(Error::InvalidArgument(
                        "--d is required for random-det on unlabeled instances".into(),
                    ))
                }
            };
            randomized::randomized_find_noisy(
                points,
                d,
                NoiseGapConfig { c_squared: c2 },
                seed,
                args.max_iter,
                &tol,
            )?
        }
        Method::Derand => derandomized::derandomized_find(points, &tol)?.0,
    };

    let mut payload = recovery_payload(&result);
    if let InstanceFile::Labeled(inst) = &file {
        payload["planted_inliers"] = json!(one_based(&inst.inliers));
        payload["matches_planted"] = json!(result.inlier_indices == inst.inliers);
    }
    let seed = match args.method {
        Method::Derand => None,
        _ => Some(seed),
    };
    Ok((seed, tol, payload))
}

fn cmd_membership(args: &MembershipArgs) -> subrec::Result<(Option<u64>, Tolerances, Value)> {
    let tol = args.tol.tolerances();
    let file = parse_points(&args.instance, &tol)?;
    let points = file.points();
    let x: Vec<f64> = if args.uniform {
        vec![points.n() as f64 / points.m() as f64; points.m()]
    } else {
        let path = args.x.as_ref().expect("required by clap");
        let v = io::parse_vector(&read_file(path)?)?;
        if v.len() != points.m() {
            return Err(Error::InvalidArgument(format!(
                "query has {} entries for {} points",
                v.len(),
                points.m()
            )));
        }
        v.iter().copied().collect()
    };
    let polytope = match args.polytope {
        PolytopeArg::Basis => Polytope::Basis,
        PolytopeArg::Independent => Polytope::IndependentSet,
    };
    let mode = match args.mode {
        Mode::Minnorm => SfmMode::MinNorm,
        Mode::Exhaustive => SfmMode::Exhaustive,
    };
    let query = matroid::MembershipQuery { x, polytope };
    let answer = matroid::polytope_membership(points, &query, mode, &tol)?;
    let mut payload = membership_payload(&answer);
    payload["query"] = json!(query.x);
    Ok((None, tol, payload))
}

fn cmd_rip(args: &RipArgs) -> subrec::Result<(Option<u64>, Tolerances, Value, SolverStatus)> {
    let tol = args.tolerances.tolerances();
    let file = parse_points(&args.matrix, &tol)?;
    let points: &PointSet = file.points();
    let c = if args.c == "uniform" {
        DVector::from_element(points.m(), points.n() as f64 / points.m() as f64)
    } else {
        io::parse_vector(&read_file(&args.c)?)?
    };
    let problem = BartheProblem::new(points, c, &tol)?;
    let bounds = isotropy::effective_bounds(points, args.alpha, &tol)?;
    let solution = isotropy::solve_barthe(&problem, args.tol, &bounds, &tol)?;
    let payload = json!({
        "t": solution.t.as_slice(),
        "value": solution.value,
        "R": matrix_row_major(&solution.r),
        "residual_inf_norm": solution.residual_norm,
        "status": solution.status.as_str(),
        "value_bound": bounds.value_bound,
        "norm_bound": bounds.norm_bound,
    });
    Ok((None, tol, payload, solution.status))
}

fn run(cli: &Cli, started: Instant) -> u8 {
    let outcome = match &cli.command {
        Command::Gen(args) => cmd_gen(args).map(|r| (r, 0)),
        Command::Recover(args) => cmd_recover(args).map(|r| (r, 0)),
        Command::Membership(args) => cmd_membership(args).map(|r| (r, 0)),
        Command::Rip(args) => cmd_rip(args).map(|(seed, tol, payload, status)| {
            let code = match status {
                SolverStatus::Converged => 0,
                SolverStatus::OutsidePolytope => EXIT_OUTSIDE,
                SolverStatus::IterationCap => EXIT_ITERATION_CAP,
            };
            ((seed, tol, payload), code)
        }),
    };
    match outcome {
        Ok(((seed, tol, payload), code)) => {
            print_report(seed, &tol, payload, started);
            code
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    ExitCode::from(run(&cli, started))
}
