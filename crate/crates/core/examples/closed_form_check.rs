//! The closed-form optimistic value against a brute-force maximization over
//! the operator confidence ball.
//!
//!     cargo run --example closed_form_check

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cme_rl::environments::Environment;
use cme_rl::harness::{closed_form_suite, random_mdp};
use cme_rl::oracles::FiniteEmbeddingModel;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mdp = random_mdp(&mut rng, 3, 2, 1)?;
    let mut fem = FiniteEmbeddingModel::new(&mdp, 1.0, 1.0)?;
    for i in 0..20 {
        let (s, a) = (i % 3, i % 2);
        let s2 = mdp.sample_next(s, a, &mut rng)?;
        fem.observe(s, a, s2)?;
    }
    let f = [0.2, 1.0, -0.5];
    for beta in [0.0, 0.5, 2.0] {
        let v = fem.brute_force_optimistic_value(beta, 0, 1, &f, 9)?;
        println!(
            "beta {beta:>3}: closed form {:.9}, gradient ascent {:.9}",
            v.closed_form, v.ascent
        );
    }
    println!(
        "initial state {}, horizon {}",
        mdp.initial_state(),
        mdp.horizon()
    );
    println!("{}", closed_form_suite(100, 0)?);
    Ok(())
}
