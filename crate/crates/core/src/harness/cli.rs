use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::runner::{run_experiment, write_outputs};
use super::verify::{
    closed_form_suite, coverage_suite, info_gain_curve, invariants_suite, CoverageOptions,
};
use crate::environments::standard_envs;
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cmerl",
    version,
    about = "Kernel mean-embedding RL experiments and checks"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Exit with status 1 when any check fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated seed list (overrides the config).
    #[arg(long, global = true, value_delimiter = ',', value_name = "A,B,C")]
    seeds: Option<Vec<u64>>,
    /// Multiplier on the confidence width (1 = theory).
    #[arg(long = "beta-scale", global = true, value_name = "X")]
    beta_scale: Option<f64>,
    /// Worker threads for seed-parallel runs.
    #[arg(long, global = true, value_name = "K")]
    parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write CSV/JSON results.
    Run { config: PathBuf },
    /// Oracle verification suites.
    Verify {
        #[command(subcommand)]
        suite: VerifySuite,
    },
    /// Information gain after each episode of uniform exploration.
    InfoGain { config: PathBuf },
    /// List the built-in environments.
    ListEnvs,
}

#[derive(Debug, Subcommand)]
enum VerifySuite {
    /// Closed-form optimistic value against a brute-force maximizer.
    ClosedForm {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Empirical coverage of the concentration inequality.
    Concentration {
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value = "chain2")]
        env: String,
    },
    /// Optimism and variance-sum invariants across the finite catalog.
    Invariants {
        #[arg(long = "runs", default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 30)]
        episodes: usize,
    },
}

fn load_config(path: &PathBuf, g: &GlobalOpts) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply_env_overrides()?;
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seeds) = &g.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(b) = g.beta_scale {
        cfg.beta_scale = b;
    }
    Ok(cfg)
}

fn master_seed_from_env() -> Result<u64> {
    let mut cfg = ExperimentConfig::for_env("chain2", 1, vec![0]);
    cfg.apply_env_overrides()?;
    Ok(cfg.master_seed)
}

fn status(failed: bool, strict: bool) -> i32 {
    if failed && strict {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    match cli.command {
        Command::ListEnvs => {
            for e in standard_envs() {
                println!("{:<14} {}", e.name, e.description);
            }
            Ok(EXIT_OK)
        }
        Command::Run { config } => {
            let cfg = load_config(&config, g)?;
            let exp = cfg.resolve()?;
            let result = run_experiment(&exp, g.parallel)?;
            let path = write_outputs(&result, &exp.config.output_dir)?;
            for run in &result.runs {
                println!(
                    "seed {:>4}: cumulative regret {:.4}{}",
                    run.seed,
                    run.cum_regret(),
                    if run.any_failure() {
                        "  [check failed]"
                    } else {
                        ""
                    }
                );
            }
            println!(
                "mean cumulative regret {:.4}; wrote {}",
                result.mean_cum_regret(),
                path.display()
            );
            Ok(status(result.any_failure(), g.strict))
        }
        Command::InfoGain { config } => {
            let cfg = load_config(&config, g)?;
            println!("n,info_gain");
            for (n, gamma) in info_gain_curve(&cfg)? {
                println!("{n},{gamma}");
            }
            Ok(EXIT_OK)
        }
        Command::Verify { suite } => match suite {
            VerifySuite::ClosedForm { instances, seed } => {
                let r = closed_form_suite(instances, seed)?;
                println!("{r}");
                Ok(status(!r.passed(), g.strict))
            }
            VerifySuite::Concentration {
                runs,
                episodes,
                env,
            } => {
                let opts = CoverageOptions {
                    env,
                    runs,
                    episodes,
                    master_seed: master_seed_from_env()?,
                    beta_scale: g.beta_scale.unwrap_or(1.0),
                    ..Default::default()
                };
                let r = coverage_suite(&opts)?;
                println!("{r}");
                let fails = r.coverage() < 1.0 - opts.delta || r.optimism_violations > 0;
                Ok(status(fails, g.strict))
            }
            VerifySuite::Invariants { runs, episodes } => {
                let reports = invariants_suite(runs, episodes, master_seed_from_env()?)?;
                for r in &reports {
                    println!("{r}");
                }
                Ok(status(reports.iter().any(|r| !r.passed()), g.strict))
            }
        },
    }
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 failed check under `--strict`, 2 bad usage or config.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Oracle(_) => EXIT_CHECK_FAILED,
                _ => EXIT_CONFIG,
            }
        }
    }
}
