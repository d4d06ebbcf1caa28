//! Library equivalent of `cmerl run <config>`: load a TOML config, run every
//! seed and write the per-seed CSV files, `results.csv` and `summary.json`.
//!
//!     cargo run --release --example run_config -- examples/configs/riverswim6.toml

use anyhow::Result;
use cme_rl::harness::{run_experiment, write_outputs, ExperimentConfig};

fn main() -> Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/chain2.toml").into()
    });
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.apply_env_overrides()?;
    let exp = cfg.resolve()?;
    let result = run_experiment(&exp, None)?;
    let csv = write_outputs(&result, &exp.config.output_dir)?;
    for run in &result.runs {
        let last = run.records.last().expect("at least one episode");
        println!(
            "seed {:>3}: regret {:>8.3}  bound {:>12.1}  gamma {:>7.2}  checks {}",
            run.seed,
            last.cum_regret,
            last.bound,
            last.info_gain,
            if run.any_failure() { "FAILED" } else { "ok" }
        );
    }
    println!("wrote {}", csv.display());
    Ok(())
}
