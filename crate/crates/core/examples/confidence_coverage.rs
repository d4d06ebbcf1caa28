//! How often the true embedding operator stays inside the confidence set, and
//! whether optimism held when it did.
//!
//!     cargo run --release --example confidence_coverage

use anyhow::Result;
use cme_rl::agent::BonusMode;
use cme_rl::harness::{coverage_suite, CoverageOptions};

fn main() -> Result<()> {
    for env in ["chain2", "riverswim6"] {
        let opts = CoverageOptions {
            env: env.into(),
            runs: 50,
            episodes: 30,
            ..Default::default()
        };
        println!("{}", coverage_suite(&opts)?);
    }
    let perturbed = CoverageOptions {
        env: "riverswim6".into(),
        runs: 50,
        episodes: 30,
        mode: BonusMode::Misspecified,
        perturbation: Some(0.05),
        ..Default::default()
    };
    println!("misspecified, zeta = 0.05: {}", coverage_suite(&perturbed)?);
    Ok(())
}
