//! `pedpath` command line: `train`, `eval`, `compare`, `oracle`.
//!
//! Exit codes: 0 success, 1 invalid input (config, suite, checkpoint,
//! budget, I/O), 2 training aborted on a non-finite loss, 3 the social
//! force integration did not converge.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{
    compare_sfm, evaluate_policy, metrics_csv, reference_optimize, render_svg, Method, ReportRow,
    ScenarioSuite,
};
use crate::policy::PolicyParameters;
use crate::ppo::train;
use crate::reward::NODE_YS;

pub const BUILD_ID: &str = match option_env!("PEDPATH_BUILD_ID") {
    Some(id) => id,
    None => concat!("pedpath-", env!("CARGO_PKG_VERSION")),
};

const DEFAULT_BUDGET: usize = 10_000;
/// Buffers between periodic checkpoint writes during training.
const CHECKPOINT_EVERY: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "pedpath",
    version,
    about = "Danger-aware pedestrian path planning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy with PPO.
    Train(CommonArgs),
    /// Evaluate a checkpoint on a scenario suite.
    Eval(CommonArgs),
    /// Compare a checkpoint with the social force baseline.
    Compare(CommonArgs),
    /// Run the reference optimizer on every scenario of a suite.
    Oracle(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Reward evaluations per scenario for `oracle`.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Override a config key, e.g. `--set train.total_steps=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFiniteLoss { .. } => 2,
        Error::NonConvergence { .. } => 3,
        _ => 1,
    }
}

/// Run a parsed command and map the outcome to an exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path, &args.overrides)?,
        None => RunConfig::from_json("{}", &args.overrides)?,
    };
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg.paths.out = out.clone();
    }
    if let Some(c) = &args.checkpoint {
        cfg.paths.checkpoint = Some(c.clone());
    }
    if let Some(s) = &args.suite {
        cfg.paths.suite = Some(s.clone());
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.paths.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

fn load_suite(cfg: &RunConfig) -> Result<ScenarioSuite> {
    match &cfg.paths.suite {
        None => Ok(ScenarioSuite::canonical()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            ScenarioSuite::from_json(&text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })
        }
    }
}

fn load_checkpoint(cfg: &RunConfig) -> Result<PolicyParameters> {
    let path = cfg
        .paths
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("a checkpoint is required (--checkpoint)".into()))?;
    Ok(Checkpoint::load(path)?.params)
}

/// File-system friendly version of a scenario name.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn manifest(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "build_id={BUILD_ID}");
    let _ = writeln!(s, "config_hash={}", cfg.hash());
    let _ = writeln!(s, "env_seed={}", cfg.env.seed);
    let _ = writeln!(s, "train_seed={}", cfg.train.seed);
    let _ = writeln!(s, "oracle_seed={}", cfg.oracle.seed);
    let _ = writeln!(s, "hidden={}", cfg.train.hidden);
    let _ = writeln!(s, "total_steps={}", cfg.train.total_steps);
    let _ = writeln!(
        s,
        "config={}",
        serde_json::to_string(cfg).expect("config serialises")
    );
    s
}

pub fn cmd_train(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let out = prepare_out(&cfg)?;
    let ckpt_path = out.join("policy.ckpt");
    let hash = cfg.hash();
    write(&out.join("manifest.txt"), &manifest(&cfg))?;

    let mut buffers = 0usize;
    let mut save_error = None;
    let (params, curve) = train(&cfg.train, &cfg.env, &cfg.rewards, |point, params| {
        buffers += 1;
        if buffers.is_multiple_of(CHECKPOINT_EVERY) {
            let ck = Checkpoint {
                params: params.clone(),
                config_hash: hash.clone(),
            };
            if let Err(e) = ck.save(&ckpt_path) {
                save_error.get_or_insert(e);
            }
        }
        eprintln!(
            "step {:>8}  mean_reward {:>10.4}  loss {:>9.4}  clip {:.3}",
            point.step, point.mean_reward, point.loss, point.clip_fraction
        );
    })?;
    if let Some(e) = save_error {
        return Err(e);
    }

    Checkpoint {
        params,
        config_hash: hash,
    }
    .save(&ckpt_path)?;
    write(&out.join("curve.csv"), &curve.to_csv())
}

pub fn cmd_eval(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let params = load_checkpoint(&cfg)?;
    let suite = load_suite(&cfg)?;
    let out = prepare_out(&cfg)?;

    let evals = evaluate_policy(&params, &suite, &cfg.rewards, 0, cfg.env.seed);
    let mut rows = Vec::with_capacity(evals.len());
    for (named, e) in suite.scenarios.iter().zip(&evals) {
        let scenario = named.scenario();
        write(
            &out.join(format!("{}.svg", file_stem(&named.name))),
            &render_svg(&scenario, Some(&e.plan), None),
        )?;
        rows.push(ReportRow {
            scenario: named.name.clone(),
            method: Method::Rl,
            metrics: e.metrics,
            total_reward: e.reward,
        });
    }
    write(&out.join("metrics.csv"), &metrics_csv(&rows))
}

pub fn cmd_compare(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let params = load_checkpoint(&cfg)?;
    let suite = load_suite(&cfg)?;
    let out = prepare_out(&cfg)?;

    let report = compare_sfm(&suite, &cfg.sfm, &params, &cfg.rewards)?;
    for case in &report.cases {
        let stem = file_stem(&case.name);
        write(
            &out.join(format!("{stem}_compare.svg")),
            &render_svg(&case.scenario, Some(&case.plan), Some(&case.trajectory)),
        )?;
        write(
            &out.join(format!("{stem}_sfm.csv")),
            &case.trajectory.to_csv(),
        )?;
        let mut plan_csv = String::from("node,x,y\n");
        for (i, (x, y)) in case.plan.node_x().iter().zip(NODE_YS).enumerate() {
            let _ = writeln!(plan_csv, "{i},{x:.9},{y}");
        }
        write(&out.join(format!("{stem}_plan.csv")), &plan_csv)?;
    }
    write(&out.join("compare.csv"), &metrics_csv(&report.rows))
}

pub fn cmd_oracle(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let budget = args.budget.unwrap_or(DEFAULT_BUDGET);
    let suite = load_suite(&cfg)?;
    let out = prepare_out(&cfg)?;

    let mut csv = String::from("scenario,total_reward,evaluations");
    for i in 0..NODE_YS.len() {
        let _ = write!(csv, ",x{i}");
    }
    csv.push('\n');
    for named in &suite.scenarios {
        let result = reference_optimize(&named.scenario(), &cfg.rewards, budget, &cfg.oracle)?;
        let _ = write!(
            csv,
            "{},{:.9},{}",
            named.name, result.reward, result.evaluations
        );
        for x in result.plan.node_x() {
            let _ = write!(csv, ",{x:.9}");
        }
        csv.push('\n');
    }
    write(&out.join("oracle.csv"), &csv)
}
