//! Command-line interface: `run` executes experiment cases and writes
//! trace/summary files, `verify` re-checks the bound and Lyapunov
//! invariants on a stored trace, `sweep` repeats a run over several
//! forgetting-factor values.
//!
//! Exit codes: 0 success, 1 invariant violations (or runtime failure),
//! 2 usage error.

use crate::analysis::{forgetting_upper_bound, proposed_lower_bound, BOUND_SLACK};
use crate::estimator::AlgoKind;
use crate::harness::{
    builtin_case, emit_csv, read_csv, run, summary::emit_summary, CaseId, ExperimentConfig,
    HarnessError, StepRecord,
};
use crate::wingrock::{regressor, PlantState};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Environment variable consulted for the output directory when `--out`
/// is absent.
pub const OUT_DIR_ENV: &str = "FORGETTING_RLS_OUT";

#[derive(Parser)]
#[command(
    name = "forgetting-rls",
    version,
    about = "Forgetting-factor RLS estimators on wing-rock parameter estimation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment case and write a CSV trace plus a summary file.
    Run(RunArgs),
    /// Re-run the information-bound and Lyapunov checks on a stored trace.
    Verify(VerifyArgs),
    /// Run one algorithm over several values of a parameter.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Builtin case id (C1 or C2).
    #[arg(long, conflicts_with = "config")]
    case: Option<String>,
    /// Key-value config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated algorithms: ef,df1,df2,pef.
    #[arg(long)]
    algo: Option<String>,
    /// Output directory (falls back to $FORGETTING_RLS_OUT, then the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Forgetting factor applied to every selected algorithm.
    #[arg(long)]
    mu: Option<f64>,
    /// Proposed-EF information floor gain.
    #[arg(long)]
    delta: Option<f64>,
    /// Simulated horizon in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Also emit a matplotlib plotting stub next to the trace.
    #[arg(long)]
    plot_script: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace CSV produced by `run`.
    #[arg(long)]
    trace: PathBuf,
    /// Case the trace came from; supplies the noise window, parameter-jump
    /// times, and default algorithm constants. Defaults to a noise-free,
    /// constant-parameter context (C2).
    #[arg(long)]
    case: Option<String>,
    /// Override the forgetting factor assumed for every algorithm.
    #[arg(long)]
    mu: Option<f64>,
    /// Override the proposed-EF floor gain.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept parameter; only `mu` is supported.
    #[arg(long)]
    param: String,
    /// Comma-separated parameter values.
    #[arg(long)]
    values: String,
    /// Builtin case id (default C1).
    #[arg(long)]
    case: Option<String>,
    /// Single algorithm to sweep (default pef).
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Runs the CLI on the given argument list and returns the process exit
/// code. Split out from `main` so tests can drive it directly.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::UnknownCase(_)
                | HarnessError::InvalidConfig(_)
                | HarnessError::ConfigParse { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn parse_algo_list(s: &str) -> Result<Vec<AlgoKind>, HarnessError> {
    let mut algos = Vec::new();
    for part in s.split(',') {
        let Some(kind) = AlgoKind::from_label(part) else {
            return Err(HarnessError::InvalidConfig(format!(
                "unknown algorithm `{part}` (expected ef, df1, df2, or pef)"
            )));
        };
        if !algos.contains(&kind) {
            algos.push(kind);
        }
    }
    if algos.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "at least one algorithm must be selected".into(),
        ));
    }
    Ok(algos)
}

fn resolve_out_dir(flag: Option<PathBuf>, config_value: &Path) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| config_value.to_path_buf())
}

fn load_base_config(
    case: &Option<String>,
    config_path: &Option<PathBuf>,
) -> Result<ExperimentConfig, HarnessError> {
    match (case, config_path) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentConfig::parse_kv(&text)
        }
        (Some(case), None) => builtin_case(CaseId::from_str(case)?),
        (None, None) => Err(HarnessError::InvalidConfig(
            "either --case or --config is required".into(),
        )),
    }
}

fn write_artifacts(
    config: &ExperimentConfig,
    prefix: &str,
    plot_script: bool,
) -> Result<i32, HarnessError> {
    let artifacts = run(config)?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| HarnessError::Io {
        path: config.out_dir.clone(),
        source: e,
    })?;
    let trace_path = config.out_dir.join(format!("{prefix}_trace.csv"));
    let summary_path = config.out_dir.join(format!("{prefix}_summary.txt"));
    emit_csv(&artifacts.trace, &trace_path)?;
    emit_summary(&artifacts.summary, &summary_path)?;
    if plot_script {
        write_plot_script(&config.out_dir)?;
    }

    if artifacts.summary.aborted {
        println!("warning: plant diverged; trace is partial");
    }
    println!("wrote {}", trace_path.display());
    println!("wrote {}", summary_path.display());
    for a in &artifacts.summary.algos {
        println!(
            "{}: final_rmse={:.6e} max_V={:.6e} lyap_violations={} bound_violations={} windup_steps={}",
            a.algo,
            a.final_rmse,
            a.max_v,
            a.lyap_violations,
            a.bound.lower_violations + a.bound.upper_violations,
            a.windup_steps,
        );
    }
    Ok(0)
}

fn cmd_run(args: RunArgs) -> Result<i32, HarnessError> {
    let mut config = load_base_config(&args.case, &args.config)?;
    if let Some(algo) = &args.algo {
        config.algos = parse_algo_list(algo)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mu) = args.mu {
        config.mu_ef = mu;
        config.mu_df = mu;
    }
    if let Some(delta) = args.delta {
        config.delta = delta;
    }
    if let Some(duration) = args.duration {
        config.duration = duration;
    }
    config.out_dir = resolve_out_dir(args.out, &config.out_dir);
    config.validate()?;
    let prefix = config.case.to_string().to_lowercase();
    write_artifacts(&config, &prefix, args.plot_script)
}

fn cmd_sweep(args: SweepArgs) -> Result<i32, HarnessError> {
    if args.param.trim() != "mu" {
        return Err(HarnessError::InvalidConfig(format!(
            "unsupported sweep parameter `{}` (only `mu`)",
            args.param
        )));
    }
    let values: Vec<f64> = args
        .values
        .split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| {
                HarnessError::InvalidConfig(format!("bad sweep value `{v}`"))
            })
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(HarnessError::InvalidConfig("no sweep values given".into()));
    }
    let case = args.case.as_deref().unwrap_or("C1");
    let algo_label = args.algo.as_deref().unwrap_or("pef");
    let algos = parse_algo_list(algo_label)?;

    for &mu in &values {
        let mut config = builtin_case(CaseId::from_str(case)?)?;
        config.algos = algos.clone();
        config.mu_ef = mu;
        config.mu_df = mu;
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        config.out_dir = resolve_out_dir(args.out.clone(), &config.out_dir);
        config.validate()?;
        let prefix = format!(
            "{}_{}_mu{}",
            config.case.to_string().to_lowercase(),
            algo_label.replace(',', "-"),
            mu
        );
        println!("--- mu = {mu} ---");
        write_artifacts(&config, &prefix, false)?;
    }
    Ok(0)
}

/// Per-algorithm context `verify` assumes about a stored trace.
struct VerifyContext {
    mu: f64,
    delta: f64,
    noise_start: f64,
    /// Times at which the true parameters jump (Lyapunov comparisons are
    /// suspended across them).
    jump_times: Vec<f64>,
}

fn verify_context(
    kind: AlgoKind,
    config: &ExperimentConfig,
    mu_override: Option<f64>,
    delta_override: Option<f64>,
) -> VerifyContext {
    let mu = mu_override.unwrap_or(match kind {
        AlgoKind::Ef | AlgoKind::ProposedEf => config.mu_ef,
        AlgoKind::Df1 | AlgoKind::Df2 => config.mu_df,
    });
    let delta = delta_override.unwrap_or(config.delta);
    let jump_times = config
        .schedule
        .theta_segments
        .iter()
        .skip(1)
        .map(|(t, _)| *t)
        .collect();
    VerifyContext {
        mu,
        delta,
        noise_start: config.schedule.noise_start,
        jump_times,
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, HarnessError> {
    let trace = read_csv(&args.trace)?;
    if trace.is_empty() {
        println!("empty trace: nothing to verify");
        return Ok(0);
    }
    let config = match &args.case {
        Some(case) => builtin_case(CaseId::from_str(case)?)?,
        None => builtin_case(CaseId::C2)?,
    };

    let mut algos: Vec<AlgoKind> = Vec::new();
    for rec in &trace {
        for a in &rec.algos {
            if !algos.contains(&a.algo) {
                algos.push(a.algo);
            }
        }
    }

    let mut total_violations = 0usize;
    for kind in algos {
        let ctx = verify_context(kind, &config, args.mu, args.delta);
        let report = verify_trace_algo(&trace, kind, &ctx);
        total_violations += report.gating_violations();
        println!(
            "verify {kind}: steps={} lower_violations={} upper_violations={} lyap_violations={}{}",
            report.steps,
            report
                .lower_violations
                .map_or("n/a".to_string(), |v| v.to_string()),
            report
                .upper_violations
                .map_or("n/a".to_string(), |v| v.to_string()),
            report
                .lyap_violations
                .map_or("n/a".to_string(), |v| v.to_string()),
            if report.gating_violations() > 0 {
                "  FAIL"
            } else {
                "  ok"
            }
        );
    }
    Ok(if total_violations > 0 { 1 } else { 0 })
}

struct TraceVerdict {
    steps: usize,
    lower_violations: Option<usize>,
    upper_violations: Option<usize>,
    lyap_violations: Option<usize>,
}

impl TraceVerdict {
    fn gating_violations(&self) -> usize {
        self.lower_violations.unwrap_or(0)
            + self.upper_violations.unwrap_or(0)
            + self.lyap_violations.unwrap_or(0)
    }
}

/// Re-checks the stored eigenvalue extremes against the bound curves and
/// the Lyapunov column against its monotonicity guarantee. Assumes the
/// harness convention R(0) = I (so lambda_max(R(0)) = 1) and step index
/// t = row + 1.
fn verify_trace_algo(trace: &[StepRecord], kind: AlgoKind, ctx: &VerifyContext) -> TraceVerdict {
    let lam_max_r0 = 1.0;
    let mut c = 0.0f64;
    let mut lower = 0usize;
    let mut upper = 0usize;
    let mut lyap = 0usize;
    let mut steps = 0usize;
    let mut prev: Option<(f64, f64)> = None; // (t, V)

    for (idx, rec) in trace.iter().enumerate() {
        let Some(data) = rec.algos.iter().find(|a| a.algo == kind) else {
            continue;
        };
        steps += 1;
        let phi = regressor(&PlantState::new(rec.x1, rec.x2, rec.t));
        c = c.max(phi.norm_sq());
        let t = (idx + 1) as u64;

        match kind {
            AlgoKind::ProposedEf => {
                if data.lam_min_r < proposed_lower_bound(ctx.mu, ctx.delta) - BOUND_SLACK {
                    lower += 1;
                }
                let ub = forgetting_upper_bound(ctx.mu, ctx.delta, lam_max_r0, c, t);
                if data.lam_max_r > ub + BOUND_SLACK {
                    upper += 1;
                }
            }
            AlgoKind::Ef => {
                let ub = forgetting_upper_bound(ctx.mu, 0.0, lam_max_r0, c, t);
                if data.lam_max_r > ub + BOUND_SLACK {
                    upper += 1;
                }
            }
            AlgoKind::Df1 | AlgoKind::Df2 => {}
        }

        if matches!(kind, AlgoKind::ProposedEf | AlgoKind::Df2) {
            if let Some((prev_t, prev_v)) = prev {
                let noisy = rec.t >= ctx.noise_start;
                let crosses_jump = ctx
                    .jump_times
                    .iter()
                    .any(|&j| prev_t < j && rec.t >= j);
                if !noisy && !crosses_jump && data.v > prev_v + 1e-12 {
                    lyap += 1;
                }
            }
            prev = Some((rec.t, data.v));
        }
    }

    TraceVerdict {
        steps,
        lower_violations: (kind == AlgoKind::ProposedEf).then_some(lower),
        upper_violations: matches!(kind, AlgoKind::Ef | AlgoKind::ProposedEf).then_some(upper),
        lyap_violations: matches!(kind, AlgoKind::ProposedEf | AlgoKind::Df2).then_some(lyap),
    }
}

fn write_plot_script(out_dir: &Path) -> Result<(), HarnessError> {
    let path = out_dir.join("plot.py");
    let script = r#"#!/usr/bin/env python3
"""Plot a forgetting-rls trace CSV: usage `python3 plot.py TRACE.csv`."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

trace = sys.argv[1]
rows = list(csv.DictReader(open(trace)))
by_algo = defaultdict(list)
for row in rows:
    by_algo[row["algo"]].append(row)

fig, axes = plt.subplots(4, 1, figsize=(9, 12), sharex=True)
ts = [float(r["t"]) for r in by_algo[next(iter(by_algo))]]
axes[0].plot(ts, [float(r["x1"]) for r in by_algo[next(iter(by_algo))]], label="x1")
axes[0].plot(ts, [float(r["x2"]) for r in by_algo[next(iter(by_algo))]], label="x2")
axes[0].set_ylabel("state")
axes[0].legend()
for algo, data in sorted(by_algo.items()):
    t = [float(r["t"]) for r in data]
    axes[1].semilogy(t, [max(float(r["V"]), 1e-18) for r in data], label=algo)
    axes[2].semilogy(t, [max(float(r["rmse"]), 1e-18) for r in data], label=algo)
    axes[3].semilogy(t, [max(float(r["lam_min_R"]), 1e-18) for r in data], label=algo)
axes[1].set_ylabel("V")
axes[2].set_ylabel("rmse")
axes[3].set_ylabel("lambda_min(R)")
axes[3].set_xlabel("t [s]")
for ax in axes[1:]:
    ax.legend()
fig.tight_layout()
out = trace.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"#;
    std::fs::write(&path, script).map_err(|e| HarnessError::Io { path, source: e })
}
