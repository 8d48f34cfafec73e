//! Batch driver: parse problem configs, run build/solve/evaluate/compare
//! pipelines, and emit JSON/CSV artifacts.
//!
//! Exit codes: 0 success, 1 config error, 2 solver failure.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use drcc::config::ConfigJson;
use drcc::manifest::{sha256_hex, RunManifest};
use drcc::oracle;
use drcc::problem::{ProblemSpec, Variant};
use drcc::sdp::{self, InnerApproximation, ResultJson, SolveStatus, SolverSettings};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Solver tolerance override (relative gap and feasibility).
const TOL_ENV: &str = "DRCC_SOLVER_TOL";

#[derive(Parser)]
#[command(name = "drcc", version, about = "Distributionally robust chance-constraint approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble and solve the moment relaxation of a problem config.
    Solve(SolveArgs),
    /// Evaluate a solved certificate w_d over a grid; 1D runs also emit
    /// the extracted intervals.
    Eval(EvalArgs),
    /// Compare a solved certificate against the worst-case oracle.
    Compare(CompareArgs),
    /// Run the worst-case-probability oracle over the decision grid.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SolveArgs {
    config: PathBuf,
    /// Even moment-degree bound (the certificate w has this degree).
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
    /// Also write the solver-neutral problem dump.
    #[arg(long)]
    dump_problem: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    verbose: bool,
}

#[derive(Args)]
struct EvalArgs {
    result: PathBuf,
    /// Grid points per decision dimension.
    #[arg(long, default_value_t = 201)]
    grid: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    result: PathBuf,
    /// The config the result was produced from (hashes must match).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 201)]
    x_steps: usize,
    #[arg(long, default_value_t = 100)]
    a_steps: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "compare.json")]
    out: PathBuf,
    /// Also sweep ε over the tabulated violation levels
    /// {0.5, 0.25, 0.125, 0.0625, 0.03125}.
    #[arg(long, default_value_t = false)]
    table: bool,
}

#[derive(Args)]
struct OracleArgs {
    config: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 201)]
    x_steps: usize,
    #[arg(long, default_value_t = 100)]
    a_steps: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "oracle.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_spec(path: &Path) -> Result<(ProblemSpec, String, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).context("config is not UTF-8")?;
    let cfg = ConfigJson::parse(&text).map_err(|e| anyhow!("{e}"))?;
    let spec = cfg.to_problem_spec().map_err(|e| anyhow!("{e}"))?;
    Ok((spec, sha256_hex(&bytes), bytes))
}

fn solver_settings(verbose: bool) -> SolverSettings {
    let mut settings = SolverSettings {
        verbose,
        ..SolverSettings::default()
    };
    if let Ok(tol) = std::env::var(TOL_ENV) {
        if let Ok(v) = tol.parse::<f64>() {
            settings.tol_gap = v;
            settings.tol_feas = v;
        }
    }
    settings
}

fn build_relaxation(spec: &ProblemSpec) -> Result<drcc::MomentRelaxation> {
    let d = spec.half_order();
    let relax = match spec.variant {
        Variant::Base => drcc::build_base(spec, d),
        Variant::Stokes => {
            drcc::build_stokes(spec, d, spec.stokes.beta_max, spec.stokes.gamma_max)
        }
        Variant::Joint => drcc::build_joint(spec, d),
        Variant::MomentBox => drcc::build_moment_box(spec, d),
    };
    relax.map_err(|e| anyhow!("{e}"))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<()> {
    let path = out.with_extension("manifest.json");
    write_atomic(&path, serde_json::to_string_pretty(manifest)?.as_bytes())
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let (mut spec, hash, bytes) = load_spec(&args.config)?;
    if let Some(d) = args.degree {
        spec.degree = d;
    }
    if let Some(v) = &args.variant {
        spec.variant = match v.as_str() {
            "base" => Variant::Base,
            "stokes" => Variant::Stokes,
            "joint" => Variant::Joint,
            "moment_box" => Variant::MomentBox,
            other => return Err(anyhow!("variant: unknown value '{other}'")),
        };
    }
    spec.validate().map_err(|e| anyhow!("{e}"))?;

    let mut manifest = RunManifest::new(&bytes);
    let t0 = Instant::now();
    let relax = build_relaxation(&spec)?;
    manifest.add_timing("assemble", t0.elapsed().as_secs_f64());

    if let Some(dump) = &args.dump_problem {
        let dump_json = sdp::problem_dump(&relax);
        write_atomic(dump, serde_json::to_string(&dump_json)?.as_bytes())?;
        manifest.add_artifact(&dump.display().to_string());
    }

    let t1 = Instant::now();
    let result = sdp::solve(&relax, &solver_settings(args.verbose)).map_err(|e| anyhow!("{e}"))?;
    manifest.add_timing("solve", t1.elapsed().as_secs_f64());

    let json = ResultJson::from_result(&result, Some(hash));
    write_atomic(&args.out, serde_json::to_string_pretty(&json)?.as_bytes())?;
    manifest.add_artifact(&args.out.display().to_string());
    write_manifest(&args.out, &manifest)?;

    eprintln!(
        "status {:?}  rho_d {:.9}  gap {:.2e}  iters {}",
        result.status, result.rho_d, result.gap, result.iterations
    );
    match result.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => Ok(ExitCode::SUCCESS),
        _ => Ok(ExitCode::from(2)),
    }
}

fn load_result(path: &Path) -> Result<(ResultJson, InnerApproximation, f64)> {
    let text = std::fs::read_to_string(path)?;
    let json: ResultJson = serde_json::from_str(&text).context("malformed result file")?;
    let space = drcc::VariableSpace::new(json.space.0, json.space.1, json.space.2)
        .map_err(|e| anyhow!("{e}"))?;
    let w = sdp::poly_from_json(space, &json.w).map_err(|e| anyhow!("{e}"))?;
    let inner = InnerApproximation {
        w,
        epsilon: 0.5, // placeholder; callers set epsilon explicitly
        degree: json.degree,
        x_box: json.x_box.clone(),
    };
    let rho = json.rho_d;
    Ok((json, inner, rho))
}

fn grid_nd(bounds: &[(f64, f64)], steps: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = vec![vec![]];
    for &(lo, hi) in bounds {
        let mut next = Vec::with_capacity(pts.len() * steps);
        for p in &pts {
            for i in 0..steps {
                let v = if steps == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (steps - 1) as f64
                };
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(anyhow!("epsilon: must lie in (0,1), got {}", args.epsilon));
    }
    let (json, mut inner, _) = load_result(&args.result)?;
    inner.epsilon = args.epsilon;

    let mut manifest = RunManifest::new(&std::fs::read(&args.result)?);
    let t0 = Instant::now();
    let grid = grid_nd(&inner.x_box, args.grid);
    let mut csv = String::new();
    let n = inner.x_box.len();
    for i in 0..n {
        csv.push_str(&format!("x{},", i + 1));
    }
    csv.push_str("w,member\n");
    for x in &grid {
        for v in x {
            csv.push_str(&format!("{v:.12},"));
        }
        let w = inner.value(x);
        csv.push_str(&format!("{w:.12},{}\n", u8::from(inner.contains(x))));
    }
    write_atomic(&args.out, csv.as_bytes())?;
    manifest.add_artifact(&args.out.display().to_string());

    if n == 1 {
        let intervals = inner.intervals_1d(2001);
        let path = args.out.with_extension("intervals.json");
        write_atomic(&path, serde_json::to_string_pretty(&intervals)?.as_bytes())?;
        manifest.add_artifact(&path.display().to_string());
        eprintln!("intervals: {intervals:?}");
    }
    manifest.add_timing("eval", t0.elapsed().as_secs_f64());
    write_manifest(&args.out, &manifest)?;
    let _ = json;
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let (spec, hash, bytes) = load_spec(&args.config)?;
    let (json, mut inner, _) = load_result(&args.result)?;
    if let Some(result_hash) = &json.config_sha256 {
        if result_hash != &hash {
            return Err(anyhow!(
                "config hash mismatch: result was produced from {result_hash}, given {hash}"
            ));
        }
    }
    let epsilon = args.epsilon.unwrap_or(spec.epsilon);
    inner.epsilon = epsilon;
    let seed = args.seed.unwrap_or(spec.seed);

    let mut manifest = RunManifest::new(&bytes);
    let epsilons: Vec<f64> = if args.table {
        vec![0.5, 0.25, 0.125, 0.0625, 0.03125]
    } else {
        vec![epsilon]
    };
    let mut reports = Vec::new();
    for eps in &epsilons {
        let t0 = Instant::now();
        let estimate =
            oracle::feasible_set_oracle(&spec, *eps, args.x_steps, args.a_steps, args.samples, seed)
                .map_err(|e| anyhow!("{e}"))?;
        let oracle_secs = t0.elapsed().as_secs_f64();
        let mut inner_eps = inner.clone();
        inner_eps.epsilon = *eps;
        let mut report = oracle::compare(&inner_eps, &estimate);
        report.oracle_seconds = oracle_secs;
        eprintln!(
            "epsilon {eps}: coverage {:.4}  violations {}  feasible {}/{}",
            report.coverage_ratio, report.violations, report.feasible_points, report.grid_points
        );
        reports.push(serde_json::json!({ "epsilon": eps, "report": report }));
    }
    let body = serde_json::json!({
        "grid": { "x_steps": args.x_steps, "a_steps": args.a_steps, "samples": args.samples, "seed": seed },
        "results": reports,
    });
    write_atomic(&args.out, serde_json::to_string_pretty(&body)?.as_bytes())?;
    manifest.add_artifact(&args.out.display().to_string());
    write_manifest(&args.out, &manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    let (spec, _, bytes) = load_spec(&args.config)?;
    let epsilon = args.epsilon.unwrap_or(spec.epsilon);
    let seed = args.seed.unwrap_or(spec.seed);
    let mut manifest = RunManifest::new(&bytes);
    let t0 = Instant::now();
    let estimate =
        oracle::feasible_set_oracle(&spec, epsilon, args.x_steps, args.a_steps, args.samples, seed)
            .map_err(|e| anyhow!("{e}"))?;
    manifest.add_timing("oracle", t0.elapsed().as_secs_f64());

    let mut csv = String::new();
    for i in 0..spec.space.n() {
        csv.push_str(&format!("x{},", i + 1));
    }
    csv.push_str("kappa_hat,feasible\n");
    for ((x, k), feas) in estimate
        .grid
        .iter()
        .zip(&estimate.kappa_hat)
        .zip(&estimate.feasible)
    {
        for v in x {
            csv.push_str(&format!("{v:.12},"));
        }
        csv.push_str(&format!("{k:.12},{}\n", u8::from(*feas)));
    }
    write_atomic(&args.out, csv.as_bytes())?;
    manifest.add_artifact(&args.out.display().to_string());
    write_manifest(&args.out, &manifest)?;
    Ok(ExitCode::SUCCESS)
}
