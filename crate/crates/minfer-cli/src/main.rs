//! Command line driver: each experiment stage as a subcommand, plus the
//! privacy-bound calculator.
//!
//! Failures exit with a stage-specific code so pipelines can tell a bad
//! config from a diverged trainer: 10 config, 11 data, 12 training,
//! 13 calibration, 14 evaluation, 15 numerical, 16 io.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use minfer::config::{load_config, ExperimentConfig};
use minfer::error::{Error, Result};
use minfer::eval::{dp_membership_bound, membership_privacy_bound, AttackReport};
use minfer::experiment::{
    run_experiment, stage_attack, stage_eval, stage_gen_data, stage_shadow, stage_train,
    OutLayout,
};

#[derive(Parser)]
#[command(
    name = "minfer",
    version,
    about = "Membership inference attacks on simple models: generate data, \
             train targets and shadows, score attacks, evaluate, and bound."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for shadow training (default: all logical CPUs).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset into OUT/data.csv.
    GenData(StageArgs),
    /// Derive splits and train the target (and reference) models.
    Train(StageArgs),
    /// Train the shadow ensemble and estimate loss thresholds.
    Shadow(StageArgs),
    /// Score every configured attack into OUT/scores/.
    Attack(StageArgs),
    /// Evaluate score files into report.json and summary.csv.
    Eval(StageArgs),
    /// Run all stages and write a run manifest.
    Run(StageArgs),
    /// Print privacy ceilings on membership accuracy.
    DpBound(DpBoundArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Experiment config file (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory holding the run's artifacts.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Replace the config's seed for this invocation.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Overwrite existing outputs (gen-data, run).
    #[arg(long)]
    force: bool,
}

impl StageArgs {
    fn load(&self) -> Result<(ExperimentConfig, OutLayout)> {
        let mut config = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok((config, OutLayout::new(&self.out)))
    }
}

#[derive(Args)]
struct DpBoundArgs {
    /// Privacy budget of the training mechanism.
    #[arg(long)]
    epsilon: f64,
    /// Failure mass of the (epsilon, delta) guarantee.
    #[arg(long)]
    delta: Option<f64>,
    /// Posterior temperature.
    #[arg(long, value_name = "T")]
    temperature: Option<f64>,
    /// Prior membership probability.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
}

fn print_reports(reports: &[AttackReport]) {
    println!(
        "{:<18} {:>9} {:>9} {:>10} {:>10}",
        "attack", "accuracy", "cv", "map_train", "map_test"
    );
    for r in reports {
        let cv = r
            .cv_accuracy
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<18} {:>9.4} {:>9} {:>10.4} {:>10.4}",
            r.attack.to_string(),
            r.accuracy,
            cv,
            r.map_train,
            r.map_test
        );
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::GenData(args) => {
            let (config, layout) = args.load()?;
            stage_gen_data(&config, &layout, args.force)?;
            println!("wrote {}", layout.data().display());
        }
        Command::Train(args) => {
            let (config, layout) = args.load()?;
            stage_train(&config, &layout)?;
            println!("wrote {}", layout.target().display());
        }
        Command::Shadow(args) => {
            let (config, layout) = args.load()?;
            stage_shadow(&config, &layout)?;
            if config.shadows.k > 0 {
                println!("wrote {}", layout.taus().display());
            } else {
                println!("shadows.k = 0, nothing to train");
            }
        }
        Command::Attack(args) => {
            let (config, layout) = args.load()?;
            stage_attack(&config, &layout)?;
            for &attack in &config.attacks {
                println!("wrote {}", layout.score(attack).display());
            }
        }
        Command::Eval(args) => {
            let (config, layout) = args.load()?;
            let reports = stage_eval(&config, &layout)?;
            print_reports(&reports);
            println!("wrote {}", layout.report().display());
        }
        Command::Run(args) => {
            let (config, layout) = args.load()?;
            let (reports, _) = run_experiment(&config, layout.root(), args.force)?;
            print_reports(&reports);
            println!("wrote {}", layout.manifest().display());
        }
        Command::DpBound(args) => {
            let bound = dp_membership_bound(args.epsilon, args.lambda)?;
            println!(
                "dp_membership_bound(epsilon={}, lambda={}) = {bound}",
                args.epsilon, args.lambda
            );
            let delta = args.delta.unwrap_or(0.0);
            let temperature = args.temperature.unwrap_or(1.0);
            let bound =
                membership_privacy_bound(args.epsilon, delta, temperature, args.lambda)?;
            println!(
                "membership_privacy_bound(epsilon={}, delta={delta}, t={temperature}, \
                 lambda={}) = {bound}",
                args.epsilon, args.lambda
            );
        }
    }
    Ok(())
}

/// Stage-specific exit codes, documented in the module header.
fn exit_code(error: &Error) -> u8 {
    match error.stage() {
        "config" => 10,
        "data" => 11,
        "training" => 12,
        "calibration" => 13,
        "evaluation" => 14,
        "numerical" => 15,
        "io" => 16,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error (config): could not size the thread pool: {e}");
            return ExitCode::from(10);
        }
    }
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.stage());
            ExitCode::from(exit_code(&e))
        }
    }
}
