//! `crossover`: compute, certify and evaluate optimal crossover designs.

mod json;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crossover_core::information::{phi_exchangeable_weighted, phi_point_weighted, symmetric_realization};
use crossover_core::sweep::parse_grid;
use crossover_core::{
    certify, criterion_value, efficiency, optimize, optimize_lambda_design, round_exact, spectrum, sweep,
    ApproxDesign, Certificate, CovarianceSpec, Criterion, DesignFile, DesignSpace, Error, LoadedDesign,
    Mat, OptimizeOptions, PreparedSpace, Sequence, SigmaSpecJson,
};

use json::{num, num_map, obj, render};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NON_CONVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "crossover", version, about = "Optimal approximate crossover designs under proportional carryover")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SpaceArgs {
    /// Number of periods.
    #[arg(long)]
    p: usize,
    /// Number of treatments.
    #[arg(long)]
    t: usize,
    /// Neighbour correlation of a tridiagonal covariance.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "sigma")]
    rho: Option<f64>,
    /// JSON file with a p x p covariance matrix, or a {"kind": ...} object.
    #[arg(long)]
    sigma: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Tuning {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 100_000)]
    max_iter: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List symmetric blocks with their trace moments.
    Blocks {
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Solve the minimax game of the block quadratics.
    Envelope {
        #[command(flatten)]
        space: SpaceArgs,
        /// Use the carryover-estimation family instead.
        #[arg(long = "lambda-problem", requires = "lambda0")]
        lambda_problem: bool,
        #[arg(long, allow_hyphen_values = true)]
        lambda0: Option<f64>,
    },
    /// Find optimal block proportions.
    Optimize {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        criterion: Criterion,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        lambda0: f64,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Check a design against the equivalence theorem.
    Certify {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        criterion: Criterion,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        lambda0: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Criterion value and efficiency of a design.
    Evaluate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        criterion: Criterion,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        lambda0: f64,
        /// Comma-separated prior direction; switches to the point-prior Fisher matrix.
        #[arg(long, allow_hyphen_values = true)]
        tau0: Option<String>,
        /// `optimal` or a design file.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Design maximizing the information about the carryover proportion.
    LambdaDesign {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda0: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Optimal designs over a grid of lambda0 values.
    Sweep {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        criterion: Criterion,
        /// START:STOP:STEP
        #[arg(long = "lambda0-grid", allow_hyphen_values = true)]
        lambda0_grid: String,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Round an approximate design to n subjects.
    Round {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(v) => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", render(&v)) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::NonConvergence { best, .. }) => {
                    let best = num_map(best.iter().map(|(k, w)| (k.clone(), *w)));
                    eprintln!("best iterate: {}", serde_json::to_string(&best).unwrap_or_default());
                    ExitCode::from(EXIT_NON_CONVERGENCE)
                }
                _ => ExitCode::from(EXIT_VALIDATION),
            }
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<Value> {
    match cmd {
        Command::Blocks { space } => blocks(&space),
        Command::Envelope {
            space,
            lambda_problem,
            lambda0,
        } => envelope(&space, lambda_problem.then_some(lambda0.unwrap_or(0.0))),
        Command::Optimize {
            space,
            criterion,
            lambda0,
            tuning,
        } => optimize_cmd(&space, criterion, lambda0, &tuning),
        Command::Certify {
            design,
            criterion,
            lambda0,
            tol,
        } => certify_cmd(&design, criterion, lambda0, tol),
        Command::Evaluate {
            design,
            criterion,
            lambda0,
            tau0,
            reference,
        } => evaluate(&design, criterion, lambda0, tau0.as_deref(), reference.as_deref()),
        Command::LambdaDesign { space, lambda0, tol } => lambda_design(&space, lambda0, tol),
        Command::Sweep {
            space,
            criterion,
            lambda0_grid,
            tuning,
        } => sweep_cmd(&space, criterion, &lambda0_grid, &tuning),
        Command::Round { design, n } => round(&design, n),
    }
}

fn read_sigma(path: &Path) -> anyhow::Result<CovarianceSpec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let spec = if value.is_array() {
        let rows: Vec<Vec<f64>> = serde_json::from_value(value)?;
        CovarianceSpec::Custom(Mat::from_rows(&rows)?)
    } else {
        serde_json::from_value::<SigmaSpecJson>(value)?.into_spec()?
    };
    Ok(spec)
}

fn prepare(args: &SpaceArgs) -> anyhow::Result<PreparedSpace<f64>> {
    let cov = match (&args.sigma, args.rho) {
        (Some(path), _) => read_sigma(path)?,
        (None, Some(rho)) => CovarianceSpec::Tridiagonal { rho },
        (None, None) => CovarianceSpec::Identity,
    };
    Ok(PreparedSpace::new(DesignSpace::new(args.p, args.t, cov)?)?)
}

fn space_json(space: &PreparedSpace<f64>) -> Value {
    obj([
        ("p", Value::from(space.p())),
        ("t", Value::from(space.t())),
        ("sigma", serde_json::to_value(SigmaSpecJson::from_spec(&space.space().covariance)).unwrap_or(Value::Null)),
        ("blocks", Value::from(space.len())),
    ])
}

fn weights_json(space: &PreparedSpace<f64>, d: &ApproxDesign<f64>) -> Value {
    num_map(d.support().into_iter().map(|(i, w)| (space.label(i), w)))
}

fn certificate_json(space: &PreparedSpace<f64>, c: &Certificate<f64>) -> Value {
    obj([
        ("kind", Value::from(c.kind.to_string())),
        ("max_score", num(c.max_score)),
        ("pass", Value::from(c.pass)),
        ("support_attains_max", Value::from(c.support_attains_max)),
        ("tolerance", num(c.tolerance)),
        ("scores", num_map(c.scores.iter().map(|&(i, s)| (space.label(i), s)))),
        ("residuals", num_map(c.residuals.iter().map(|(k, r)| (k.clone(), *r)))),
    ])
}

fn options(tuning: &Tuning) -> OptimizeOptions<f64> {
    OptimizeOptions {
        tolerance: tuning.tol,
        max_iterations: tuning.max_iter,
        ..OptimizeOptions::default()
    }
}

fn blocks(args: &SpaceArgs) -> anyhow::Result<Value> {
    let space = prepare(args)?;
    let rows: Vec<Value> = space
        .blocks()
        .iter()
        .zip(space.moments())
        .enumerate()
        .map(|(i, (b, m))| {
            obj([
                ("sequence", Value::from(space.label(i))),
                ("distinct", Value::from(b.distinct_count())),
                ("orbit_size", Value::from(b.orbit_size())),
                ("c11", num(m.c11)),
                ("c12", num(m.c12)),
                ("c22", num(m.c22)),
            ])
        })
        .collect();
    Ok(obj([("space", space_json(&space)), ("blocks", Value::Array(rows))]))
}

fn envelope(args: &SpaceArgs, lambda0: Option<f64>) -> anyhow::Result<Value> {
    let space = prepare(args)?;
    let quads = match lambda0 {
        Some(l) => space.lambda_quadratics(l),
        None => space.quadratics(),
    };
    let sol = crossover_core::solve_with_weights(&quads)?;
    let weights = sol.weights.clone().unwrap_or_default();
    Ok(obj([
        ("space", space_json(&space)),
        ("family", Value::from(if lambda0.is_some() { "r" } else { "q" })),
        ("lambda0", lambda0.map_or(Value::Null, num)),
        ("x_star", num(sol.x_star)),
        ("y_star", num(sol.y_star)),
        ("flat", Value::from(sol.flat)),
        ("active", Value::from(sol.active.iter().map(|&i| space.label(i)).collect::<Vec<_>>())),
        ("weights", num_map(weights.iter().map(|&(i, w)| (space.label(i), w)))),
    ]))
}

fn optimize_cmd(args: &SpaceArgs, crit: Criterion, lambda0: f64, tuning: &Tuning) -> anyhow::Result<Value> {
    let space = prepare(args)?;
    let r = optimize(&space, crit, lambda0, &options(tuning))?;
    Ok(obj([
        ("space", space_json(&space)),
        ("criterion", Value::from(crit.to_string())),
        ("lambda0", num(lambda0)),
        ("weights", weights_json(&space, &r.design)),
        ("value", num(r.value)),
        ("x_d", num(r.x_d)),
        ("certificate", certificate_json(&space, &r.certificate)),
        ("iterations", Value::from(r.iterations)),
    ]))
}

fn load(path: &Path) -> anyhow::Result<(PreparedSpace<f64>, LoadedDesign)> {
    let file = DesignFile::read(path)?;
    Ok(file.load()?)
}

fn certify_cmd(path: &Path, crit: Criterion, lambda0: f64, tol: f64) -> anyhow::Result<Value> {
    let (space, loaded) = load(path)?;
    let d = loaded.approx(&space)?;
    let cert = certify(&space, &d, crit, lambda0, tol);
    Ok(obj([
        ("space", space_json(&space)),
        ("criterion", Value::from(crit.to_string())),
        ("lambda0", num(lambda0)),
        ("weights", weights_json(&space, &d)),
        ("value", num(criterion_value(&space, &d, lambda0, crit))),
        ("pass", Value::from(cert.pass)),
        ("certificate", certificate_json(&space, &cert)),
    ]))
}

fn parse_tau0(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad tau0 entry {s:?}")))
        .collect()
}

fn columns(space: &PreparedSpace<f64>, loaded: &LoadedDesign) -> anyhow::Result<Vec<(Sequence, f64)>> {
    Ok(match loaded {
        LoadedDesign::Exact(d) => d.weighted(),
        LoadedDesign::Approx(d) => symmetric_realization(space, d.weights()),
    })
}

/// Value per subject, either from the closed form or, with `tau0`, from the
/// point-prior Fisher matrix.
fn value_of(
    space: &PreparedSpace<f64>,
    loaded: &LoadedDesign,
    crit: Criterion,
    lambda0: f64,
    tau0: Option<&[f64]>,
) -> anyhow::Result<f64> {
    match tau0 {
        None => Ok(criterion_value(space, &loaded.approx(space)?, lambda0, crit)),
        Some(tau0) => {
            let cols = columns(space, loaded)?;
            Ok(phi_point_weighted(&cols, space.t(), space.btilde().matrix(), tau0, lambda0, crit)?)
        }
    }
}

fn evaluate(
    path: &Path,
    crit: Criterion,
    lambda0: f64,
    tau0: Option<&str>,
    reference: Option<&str>,
) -> anyhow::Result<Value> {
    let (space, loaded) = load(path)?;
    let tau0 = tau0.map(parse_tau0).transpose()?;
    if let Some(t0) = &tau0 {
        if t0.len() != space.t() {
            bail!(Error::InvalidTau0(space.t()));
        }
    }
    let value = value_of(&space, &loaded, crit, lambda0, tau0.as_deref())?;
    let approx = loaded.approx(&space)?;
    let mut out = vec![
        ("space", space_json(&space)),
        ("criterion", Value::from(crit.to_string())),
        ("lambda0", num(lambda0)),
        ("weights", weights_json(&space, &approx)),
        ("value", num(value)),
        ("prior", Value::from(if tau0.is_some() { "point" } else { "exchangeable" })),
    ];
    match &tau0 {
        None => out.push((
            "spectrum",
            Value::from(spectrum(&space, &approx, lambda0).into_iter().map(num).collect::<Vec<_>>()),
        )),
        Some(t0) => {
            out.push(("tau0", Value::from(t0.iter().copied().map(num).collect::<Vec<_>>())));
            let cols = columns(&space, &loaded)?;
            let avg = phi_exchangeable_weighted(&cols, space.t(), space.btilde().matrix(), t0, lambda0, crit);
            out.push(("relabeling_average", avg.map_or(Value::Null, num)));
        }
    }
    if let Some(reference) = reference {
        let ref_value = if reference == "optimal" {
            let r = optimize(&space, crit, lambda0, &OptimizeOptions::default())?;
            value_of(&space, &LoadedDesign::Approx(r.design), crit, lambda0, tau0.as_deref())?
        } else {
            let (ref_space, ref_design) = load(Path::new(reference))?;
            if ref_space.p() != space.p() || ref_space.t() != space.t() {
                bail!(Error::Dimension(format!(
                    "reference is ({}, {}), design is ({}, {})",
                    ref_space.p(),
                    ref_space.t(),
                    space.p(),
                    space.t()
                )));
            }
            value_of(&space, &ref_design, crit, lambda0, tau0.as_deref())?
        };
        out.push(("reference_value", num(ref_value)));
        out.push(("efficiency", num(efficiency(value, ref_value))));
    }
    Ok(obj(out))
}

fn lambda_design(args: &SpaceArgs, lambda0: f64, tol: f64) -> anyhow::Result<Value> {
    let space = prepare(args)?;
    let opts = OptimizeOptions {
        tolerance: tol,
        ..OptimizeOptions::default()
    };
    let r = optimize_lambda_design(&space, lambda0, &opts)?;
    Ok(obj([
        ("space", space_json(&space)),
        ("lambda0", num(lambda0)),
        ("weights", weights_json(&space, &r.design)),
        ("x0", num(r.x0)),
        ("y0", num(r.y0)),
        ("trace_a", num(r.trace_a)),
        ("certificate", certificate_json(&space, &r.certificate)),
    ]))
}

fn sweep_cmd(args: &SpaceArgs, crit: Criterion, grid: &str, tuning: &Tuning) -> anyhow::Result<Value> {
    let space = prepare(args)?;
    let grid = parse_grid(grid)?;
    let rows = sweep(&space, crit, &grid, &options(tuning))?;
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            obj([
                ("lambda0", num(r.lambda0)),
                ("weights", weights_json(&space, &r.design)),
                ("value", num(r.value)),
                ("breakpoint", Value::from(r.breakpoint)),
            ])
        })
        .collect();
    Ok(obj([
        ("space", space_json(&space)),
        ("criterion", Value::from(crit.to_string())),
        ("rows", Value::Array(rows)),
    ]))
}

fn round(path: &Path, n: usize) -> anyhow::Result<Value> {
    let (space, loaded) = load(path)?;
    let d = loaded.approx(&space)?;
    let r = round_exact(&space, &d, n)?;
    let counts: Vec<(String, Value)> = r
        .counts
        .iter()
        .enumerate()
        .filter(|e| *e.1 > 0)
        .map(|(i, &c)| (space.label(i), Value::from(c)))
        .collect();
    Ok(obj([
        ("space", space_json(&space)),
        ("n", Value::from(n)),
        ("target", weights_json(&space, &d)),
        ("counts", obj(counts)),
        (
            "achieved_weights",
            num_map(
                r.achieved_weights
                    .iter()
                    .enumerate()
                    .filter(|e| *e.1 > 0.0)
                    .map(|(i, &w)| (space.label(i), w)),
            ),
        ),
        ("weight_error", num(r.weight_error)),
        ("symmetry_diagnostic", num(r.symmetry_diagnostic)),
        (
            "design",
            serde_json::to_value(DesignFile::from_exact(&space, &r.exact)).unwrap_or(Value::Null),
        ),
    ]))
}
