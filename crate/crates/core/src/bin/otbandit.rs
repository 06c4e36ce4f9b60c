//! Command-line front end: run experiments, sweep a parameter, verify the
//! library invariants, or print solver baselines for an environment spec.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime failure, 3 verification
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otbandit::bandit::EpsSchedule;
use otbandit::harness::bounds::{theorem_bound, BoundExtras, BoundParams, BoundReport};
use otbandit::harness::export::{export, ExportFormat};
use otbandit::harness::runner::{run_experiment_on, RunRecord};
use otbandit::harness::verify;
use otbandit::harness::{EnvSpec, ExperimentConfig, HarnessError};
use otbandit::transport::{sinkhorn_allow_unconverged, SinkhornOptions};

#[derive(Parser)]
#[command(name = "otbandit", version, about = "Entropic transport bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and export the records.
    Run(RunArgs),
    /// Vary one config parameter over a list of values.
    Sweep(SweepArgs),
    /// Execute the built-in invariant suites.
    Verify(VerifyArgs),
    /// Solve and print the Kantorovich/entropic baselines of an env spec.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Repetition count override.
    #[arg(long)]
    reps: Option<usize>,
    /// Export format.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dotted config path to vary, e.g. `agent.delta` or `env.q`.
    #[arg(long)]
    param: String,
    /// Comma-separated list of values for the swept parameter.
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BaselineArgs {
    /// Experiment config (JSON); only the env block is used.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated entropy levels to evaluate.
    #[arg(long, default_value = "0.5,0.1,0.02")]
    values: String,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Verify(args) => verify_cmd(args),
        Command::Baseline(args) => baseline_cmd(args),
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn config_fail(e: &dyn std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(1)
}

fn runtime_fail(e: &dyn std::fmt::Display) -> ExitCode {
    eprintln!("runtime failure: {e}");
    ExitCode::from(2)
}

fn run_cmd(args: RunArgs) -> ExitCode {
    let cfg = match load_config(&args.common) {
        Ok(c) => c,
        Err(e) => return config_fail(&e),
    };
    let format: ExportFormat = match args.common.format.parse() {
        Ok(f) => f,
        Err(e) => return config_fail(&e),
    };
    match execute(&cfg, format, None) {
        Ok(code) => code,
        Err(e) => runtime_fail(&e),
    }
}

fn execute(
    cfg: &ExperimentConfig,
    format: ExportFormat,
    subdir: Option<String>,
) -> Result<ExitCode, HarnessError> {
    let env = cfg.env.build()?;
    let records = run_experiment_on(&env, cfg)?;
    let aborted = records.iter().filter(|r| r.summary.aborted.is_some()).count();
    let bound = bound_report(cfg, &env, &records);

    let mut dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    if let Some(sub) = subdir {
        dir = dir.join(sub);
    }
    let written = export(&records, cfg, format, &dir, bound.as_ref())?;
    if let Some(b) = &bound {
        let path = dir.join("bound_report.json");
        std::fs::write(&path, serde_json::to_string_pretty(b)?)?;
        println!("wrote {}", path.display());
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    for r in &records {
        let s = &r.summary;
        println!(
            "rep {:02}: rounds {} cum_kant [{:.4}, {:.4}] cum_ent {} in_set {}{}",
            s.rep,
            s.rounds,
            s.final_cum_kant_lo,
            s.final_cum_kant_hi,
            s.final_cum_ent.map_or("-".to_string(), |v| format!("{v:.4}")),
            s.all_rounds_in_set,
            s.aborted.as_deref().map_or(String::new(), |m| format!(" ABORTED: {m}")),
        );
    }
    if aborted == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{aborted} repetition(s) aborted");
        Ok(ExitCode::from(2))
    }
}

/// Realized-design bound evaluation on the first complete record.
fn bound_report(
    cfg: &ExperimentConfig,
    env: &otbandit::env::BanditEnv,
    records: &[RunRecord],
) -> Option<BoundReport> {
    let record = records.iter().find(|r| {
        r.summary.aborted.is_none() && r.realized_logdet.is_some() && !r.rows.is_empty()
    })?;
    let params = BoundParams {
        sigma: cfg.agent.sigma,
        delta: cfg.agent.delta,
        lambda: cfg.agent.lambda,
        c_bound: cfg.agent.c_bound,
    };
    let kappa_alpha = match cfg.agent.schedules.eps {
        EpsSchedule::Power { alpha } => Some((env.lipschitz(), alpha)),
        EpsSchedule::Fixed { .. } => None,
    };
    let fixed_order_tail = match cfg.agent.schedules.order {
        otbandit::bandit::OrderSchedule::Fixed { n } => Some((n, env.coeff_tail(n))),
        otbandit::bandit::OrderSchedule::Growing { .. } => None,
    };
    let varying_q = match cfg.agent.schedules.order {
        otbandit::bandit::OrderSchedule::Growing { q } => Some(q),
        _ => None,
    };
    let extras = BoundExtras { kappa_alpha, fixed_order_tail, varying_q };
    theorem_bound(record, &params, &extras).ok()
}

fn sweep_cmd(args: SweepArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.common.config) {
        Ok(t) => t,
        Err(e) => return config_fail(&e),
    };
    let base: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return config_fail(&e),
    };
    let format: ExportFormat = match args.common.format.parse() {
        Ok(f) => f,
        Err(e) => return config_fail(&e),
    };
    let mut worst = ExitCode::SUCCESS;
    for raw in args.values.split(',') {
        let raw = raw.trim();
        let value: serde_json::Value =
            serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.into()));
        let mut patched = base.clone();
        if let Err(e) = set_path(&mut patched, &args.param, value) {
            return config_fail(&e);
        }
        let mut cfg: ExperimentConfig = match serde_json::from_value(patched) {
            Ok(c) => c,
            Err(e) => return config_fail(&e),
        };
        if let Some(seed) = args.common.seed {
            cfg.master_seed = seed;
        }
        if let Some(reps) = args.common.reps {
            cfg.reps = reps;
        }
        if let Some(out) = &args.common.out {
            cfg.out_dir = Some(out.clone());
        }
        if let Err(e) = cfg.validate() {
            return config_fail(&e);
        }
        println!("== {} = {raw}", args.param);
        match execute(&cfg, format, Some(format!("{}={}", args.param.replace('.', "_"), raw))) {
            Ok(code) if code == ExitCode::SUCCESS => {}
            Ok(code) => worst = code,
            Err(e) => return runtime_fail(&e),
        }
    }
    worst
}

fn set_path(
    root: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> Result<(), String> {
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cursor
            .as_object_mut()
            .ok_or_else(|| format!("config path '{path}' hits a non-object at '{part}'"))?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        cursor = map
            .get_mut(*part)
            .ok_or_else(|| format!("config path '{path}' missing component '{part}'"))?;
    }
    Err(format!("empty config path '{path}'"))
}

fn verify_cmd(args: VerifyArgs) -> ExitCode {
    let (results, ok) = verify::run_all(args.seed);
    for (name, result) in &results {
        match result {
            Ok(()) => println!("PASS {name}"),
            Err(msg) => println!("FAIL {name}: {msg}"),
        }
    }
    if ok {
        println!("verification passed ({} suites)", results.len());
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn baseline_cmd(args: BaselineArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return config_fail(&e),
    };
    // Accept either a full experiment config or a bare env spec.
    let env_spec: EnvSpec = match serde_json::from_str::<ExperimentConfig>(&text) {
        Ok(cfg) => cfg.env,
        Err(_) => match serde_json::from_str::<EnvSpec>(&text) {
            Ok(spec) => spec,
            Err(e) => return config_fail(&e),
        },
    };
    let env = match env_spec.build() {
        Ok(e) => e,
        Err(e) => return config_fail(&e),
    };
    println!(
        "env {} ({}x{} grid, L = {:.6})",
        env.hash_hex(),
        env.mu().len(),
        env.nu().len(),
        env.lipschitz()
    );
    match env.kant_baseline() {
        Ok(k) => println!(
            "Kant: {:.9}  [{:.9}, {:.9}]  ({:?})",
            k.value, k.lower, k.upper, k.method
        ),
        Err(e) => return runtime_fail(&e),
    }
    for raw in args.values.split(',') {
        let eps: f64 = match raw.trim().parse() {
            Ok(v) => v,
            Err(e) => return config_fail(&e),
        };
        let opts = SinkhornOptions { tol: 1e-9, ..SinkhornOptions::default() };
        match sinkhorn_allow_unconverged(env.true_cost(), env.mu(), env.nu(), eps, &opts) {
            Ok(r) => println!(
                "Ent(eps={eps}): {:.9}  gap {:.3e}  ({} iterations{})",
                r.primal_value,
                r.gap,
                r.iterations,
                if r.converged { "" } else { ", certified after stall" }
            ),
            Err(e) => return runtime_fail(&e),
        }
    }
    ExitCode::SUCCESS
}
