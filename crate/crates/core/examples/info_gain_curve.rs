//! Information gain growth under uniform exploration for several kernels.
//! Finite feature spaces grow logarithmically; smooth kernels on a continuous
//! state space keep growing, but sublinearly.
//!
//!     cargo run --release --example info_gain_curve

use anyhow::Result;
use cme_rl::harness::{info_gain_curve, ExperimentConfig};
use cme_rl::kernel_core::{KernelSpec, MaternNu};

fn main() -> Result<()> {
    let cases = [
        ("gridworld4x4", KernelSpec::delta(1.0)?),
        ("nlds2d", KernelSpec::squared_exponential(0.5, 1.0)?),
        (
            "nlds2d",
            KernelSpec::matern(MaternNu::ThreeHalves, 0.5, 1.0)?,
        ),
    ];
    for (env, kernel) in cases {
        let mut cfg = ExperimentConfig::for_env(env, 80, vec![0]);
        cfg.kernel = Some(kernel);
        let curve = info_gain_curve(&cfg)?;
        let picks: Vec<String> = curve
            .iter()
            .filter(|(n, _)| [10, 40, 160, 640].contains(n) || *n == curve.last().unwrap().0)
            .map(|(n, g)| format!("N={n}: {g:.1}"))
            .collect();
        println!(
            "{env:<13} {:<28} {}",
            format!("{:?}", kernel.family),
            picks.join("  ")
        );
    }
    Ok(())
}
