//! Command line interface: train, eval, gradcheck, and compare.

use clap::{Parser, Subcommand};
use pdqn::agent::{seeds, Agent};
use pdqn::env::{make_env, Integrator};
use pdqn::harness::checkpoint::rebuild_agent;
use pdqn::harness::evaluate::evaluate_agent;
use pdqn::harness::{read_checkpoint, run_gradcheck, run_training, HarnessError, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pdqn",
    version,
    about = "Reinforcement learning on hybrid discrete-continuous action spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent from a config file into an output directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Overrides the worker count (0 = sequential replay training).
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the segment length of the asynchronous trainer.
        #[arg(long)]
        tmax: Option<usize>,
    },
    /// Evaluate a checkpoint with the greedy policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Environment name: goal, bandit, or masked-bandit.
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Physics integrator for the goal environment: exact or euler.
        #[arg(long, default_value = "exact")]
        integrator: String,
    },
    /// Verify every analytic gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Train each config over several seeds and summarize final returns.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
}

fn parse_integrator(name: &str) -> Result<Integrator, HarnessError> {
    match name {
        "exact" => Ok(Integrator::Exact),
        "euler" => Ok(Integrator::Euler),
        other => Err(HarnessError::InvalidConfig(format!(
            "unknown integrator {other}"
        ))),
    }
}

fn cmd_train(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    resume: bool,
    workers: Option<usize>,
    tmax: Option<usize>,
) -> Result<(), HarnessError> {
    let mut cfg = RunConfig::from_file(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(workers) = workers {
        cfg.workers = workers;
    }
    if let Some(tmax) = tmax {
        cfg.tmax = tmax;
    }
    cfg.validate()?;
    let summary = run_training(&cfg, out, resume)?;
    println!(
        "trained {} on {} for {} steps in {:.1}s",
        cfg.agent,
        cfg.env,
        summary.steps,
        summary.wall.as_secs_f64()
    );
    println!(
        "final eval: mean_reward {:.4} goal_rate {:.3} mean_len {:.1} ({} trials)",
        summary.final_eval.mean_reward,
        summary.final_eval.goal_rate,
        summary.final_eval.mean_len,
        summary.final_eval.trials
    );
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    env_name: &str,
    trials: usize,
    seed: u64,
    integrator: &str,
) -> Result<(), HarnessError> {
    let integrator = parse_integrator(integrator)?;
    let tensors = read_checkpoint(checkpoint, None)?;
    let mut agent = rebuild_agent(env_name, integrator, &tensors)?;
    let mut env = make_env(env_name, seeds::derive(seed, seeds::EVAL_ENV), integrator)?;
    let step = agent.step_count();
    let report = evaluate_agent(&mut agent, env.as_mut(), trials, step)?;
    println!(
        "{} ({} at step {}) on {}:",
        checkpoint.display(),
        agent.kind(),
        report.step,
        env_name
    );
    println!(
        "trials {}: mean_reward {:.4} goal_rate {:.3} mean_len {:.1}",
        report.trials, report.mean_reward, report.goal_rate, report.mean_len
    );
    Ok(())
}

fn cmd_gradcheck(seed_count: u64) -> Result<bool, HarnessError> {
    let report = run_gradcheck(seed_count)?;
    for check in &report.checks {
        println!("{}", check.line());
    }
    println!(
        "{} checks, {} kink-excluded coordinates, max rel {:.2e}: {}",
        report.checks.len(),
        report.total_excluded(),
        report.max_rel(),
        if report.passed() { "PASS" } else { "FAIL" }
    );
    Ok(report.passed())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cmd_compare(configs: &[PathBuf], out: &Path, seed_count: u64) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out)?;
    let mut summary_lines = vec!["config,seed,mean_reward,goal_rate,mean_len,wall_s".to_string()];
    println!(
        "{:<24} {:>18} {:>12} {:>10}",
        "config", "mean_reward", "goal_rate", "mean_len"
    );
    for path in configs {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("config")
            .to_string();
        let base = RunConfig::from_file(path)?;
        let mut rewards = Vec::new();
        let mut goal_rates = Vec::new();
        let mut lens = Vec::new();
        for seed in 0..seed_count {
            let mut cfg = base.clone();
            cfg.seed = seed;
            let run_dir = out.join(format!("{stem}-seed{seed}"));
            let summary = run_training(&cfg, &run_dir, false)?;
            rewards.push(summary.final_eval.mean_reward);
            goal_rates.push(summary.final_eval.goal_rate);
            lens.push(summary.final_eval.mean_len);
            summary_lines.push(format!(
                "{stem},{seed},{:.6},{:.6},{:.6},{:.1}",
                summary.final_eval.mean_reward,
                summary.final_eval.goal_rate,
                summary.final_eval.mean_len,
                summary.wall.as_secs_f64()
            ));
        }
        let (r_mean, r_std) = mean_std(&rewards);
        let (g_mean, _) = mean_std(&goal_rates);
        let (l_mean, _) = mean_std(&lens);
        println!(
            "{stem:<24} {:>10.4} +- {:>5.4} {:>12.3} {:>10.1}",
            r_mean, r_std, g_mean, l_mean
        );
    }
    std::fs::write(out.join("summary.csv"), summary_lines.join("\n") + "\n")?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("PDQN_LOG_LEVEL", "info"),
    )
    .format_timestamp_millis()
    .init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train {
            config,
            out,
            seed,
            resume,
            workers,
            tmax,
        } => cmd_train(config, out, *seed, *resume, *workers, *tmax).map(|()| true),
        Command::Eval {
            checkpoint,
            env,
            trials,
            seed,
            integrator,
        } => cmd_eval(checkpoint, env, *trials, *seed, integrator).map(|()| true),
        Command::Gradcheck { seeds } => cmd_gradcheck(*seeds),
        Command::Compare {
            configs,
            out,
            seeds,
        } => cmd_compare(configs, out, *seeds).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
