//! Command-line front end: runs validation suites and evaluates
//! correlation kernels on grids.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails,
//! 2 on usage errors (unknown suite, family, format, or malformed
//! arguments). The worker count is capped by ELLIPTIC_DYSON_THREADS.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use elliptic_dyson_core::harness::{run_suite, ReportFormat, RunConfig, Suite};
use elliptic_dyson_core::{Config, Family, KernelContext, KernelMode, ProcessClock};

#[derive(Parser)]
#[command(
    name = "elliptic-dyson",
    version,
    about = "Validation suites and kernel evaluation for elliptic Dyson-type models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named validation suite and write its report.
    Run(RunArgs),
    /// Evaluate a correlation kernel on a space-time grid.
    EvalKernel(EvalKernelArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Suite to run: identities, martingale_mc, kernel_vs_mc,
    /// kolmogorov, integral_identity, relaxation, or all.
    #[arg(long, value_parser = clap::value_parser!(Suite))]
    suite: Suite,
    /// Family selector, repeatable (default: B C D).
    #[arg(long = "family", value_parser = clap::value_parser!(Family))]
    families: Vec<Family>,
    /// Particle count, repeatable (default: 2 3).
    #[arg(long = "n")]
    n_values: Vec<usize>,
    /// Horizon of the pinned models.
    #[arg(long, default_value_t = 1.0)]
    tstar: f64,
    /// Interval scale; the interval is [0, pi r].
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Seed of every Monte Carlo stream.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Path count of the large Monte Carlo cross-checks.
    #[arg(long, default_value_t = 100_000)]
    mc_paths: usize,
    /// Step size of the simulated interacting ensembles.
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Multiplier on every pinned tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Report path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long, default_value = "json", value_parser = clap::value_parser!(ReportFormat))]
    format: ReportFormat,
}

#[derive(Args)]
struct EvalKernelArgs {
    /// Family tag: A, B, Bv, C, Cv, BC, or D.
    #[arg(long, value_parser = clap::value_parser!(Family))]
    family: Family,
    /// Particle count.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Initial configuration, comma-separated; evenly spread when omitted.
    #[arg(long, value_delimiter = ',')]
    u: Vec<f64>,
    /// Horizon of the pinned models ("inf" for the homogeneous kernels).
    #[arg(long, default_value_t = 1.0)]
    tstar: f64,
    /// Interval scale; the interval is [0, pi r].
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Kernel mode: elliptic, trig, or eq-trig.
    #[arg(long, default_value = "elliptic")]
    mode: String,
    /// Grid as four axis specs "S;X;T;Y", each either a value or
    /// lo:hi:count (inclusive linspace). Example: "0.3;0:3.1:32;0.3;0:3.1:32".
    #[arg(long)]
    grid: String,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv", value_parser = clap::value_parser!(ReportFormat))]
    format: ReportFormat,
}

fn parse_axis(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![v
            .trim()
            .parse::<f64>()
            .with_context(|| format!("bad axis value {v:?}"))?]),
        [lo, hi, count] => {
            let lo: f64 = lo
                .trim()
                .parse()
                .with_context(|| format!("bad axis start {lo:?}"))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .with_context(|| format!("bad axis end {hi:?}"))?;
            let count: usize = count
                .trim()
                .parse()
                .with_context(|| format!("bad axis count {count:?}"))?;
            if count < 1 {
                bail!("axis count must be at least 1");
            }
            if count == 1 {
                return Ok(vec![lo]);
            }
            let step = (hi - lo) / (count as f64 - 1.0);
            Ok((0..count).map(|i| lo + step * i as f64).collect())
        }
        _ => bail!("axis spec {spec:?} is neither a value nor lo:hi:count"),
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let defaults = RunConfig::default();
    let cfg = RunConfig {
        suite: args.suite,
        families: if args.families.is_empty() {
            defaults.families.clone()
        } else {
            args.families
        },
        n_values: if args.n_values.is_empty() {
            defaults.n_values.clone()
        } else {
            args.n_values
        },
        t_star: args.tstar,
        r: args.r,
        seed: args.seed,
        mc_paths: args.mc_paths,
        dt: args.dt,
        tol_scale: args.tol_scale,
        out: args.out,
        format: args.format,
    };
    let report = run_suite(&cfg)?;
    report.write_out()?;
    eprintln!(
        "{}: {} passed, {} failed in {:.1}s ({} workers)",
        cfg.suite,
        report.passed,
        report.failed,
        report.runtime.as_secs_f64(),
        report.workers
    );
    Ok(if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn eval_kernel(args: EvalKernelArgs) -> Result<ExitCode> {
    let mode = match args.mode.to_ascii_lowercase().as_str() {
        "elliptic" => KernelMode::Elliptic,
        "trig" | "trigonometric" => KernelMode::Trigonometric,
        "eq-trig" | "equilibrium" => KernelMode::EquilibriumTrig,
        other => bail!("unknown mode {other:?}; expected elliptic, trig, or eq-trig"),
    };
    let clock = ProcessClock::new(args.tstar, args.r)?;
    let u = if args.u.is_empty() {
        (1..=args.n)
            .map(|j| std::f64::consts::PI * args.r * j as f64 / (args.n as f64 + 1.0))
            .collect()
    } else {
        args.u
    };
    let config = Config::new(args.family, args.n, clock, u)?;
    let kc = KernelContext::new(&config, mode)?;

    let axes: Vec<&str> = args.grid.split(';').collect();
    if axes.len() != 4 {
        bail!(
            "grid must have four ;-separated axes S;X;T;Y, got {}",
            axes.len()
        );
    }
    let s_axis = parse_axis(axes[0])?;
    let x_axis = parse_axis(axes[1])?;
    let t_axis = parse_axis(axes[2])?;
    let y_axis = parse_axis(axes[3])?;

    let mut rows: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    for &s in &s_axis {
        for &x in &x_axis {
            for &t in &t_axis {
                for &y in &y_axis {
                    let k = kc.corr_kernel(s, x, t, y)?;
                    rows.push((s, x, t, y, k));
                }
            }
        }
    }

    let rendered = match args.format {
        ReportFormat::Csv => {
            let mut out = String::from("s,x,t,y,K\n");
            for (s, x, t, y, k) in &rows {
                out.push_str(&format!("{s:?},{x:?},{t:?},{y:?},{k:?}\n"));
            }
            out
        }
        ReportFormat::Json => {
            let values: Vec<serde_json::Value> = rows
                .iter()
                .map(|(s, x, t, y, k)| serde_json::json!({"s": s, "x": x, "t": t, "y": y, "K": k}))
                .collect();
            let doc = serde_json::json!({
                "schema": 1,
                "family": config.family.to_string(),
                "n": config.n,
                "t_star": args.tstar,
                "r": args.r,
                "mode": args.mode,
                "values": values,
            });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s
        }
    };
    match &args.out {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::EvalKernel(args) => eval_kernel(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
