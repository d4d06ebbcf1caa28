//! Exact kernel ridge predictions against Nyström and random Fourier sketches.
//!
//!     cargo run --example kernel_sketches

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cme_rl::cme_estimator::{CmeModel, EmbeddingModel, SketchedCmeModel, Transition};
use cme_rl::kernel_core::{FeatureSketch, KernelSpec, Point};

fn point(rng: &mut ChaCha8Rng) -> Point {
    Point::new(vec![
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ])
    .unwrap()
}

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let kernel = KernelSpec::squared_exponential(0.5, 1.0)?;
    let lambda = 0.5;
    let transitions: Vec<Transition> = (1..=150)
        .map(|t| {
            let a = rng.random_range(0..2);
            Transition {
                state: point(&mut rng),
                action: a,
                action_point: Point::one_hot(a, 2).unwrap(),
                next_state: point(&mut rng),
                reward: 0.0,
                episode: t,
                step: 1,
            }
        })
        .collect();
    let values: Vec<f64> = transitions
        .iter()
        .map(|t| t.next_state.coords()[0].sin())
        .collect();
    let queries: Vec<Point> = (0..200)
        .map(|_| point(&mut rng).join(&Point::one_hot(0, 2).unwrap()))
        .collect();

    let mut exact = CmeModel::new(kernel, lambda, 1)?;
    for tr in &transitions {
        exact.append_transition(tr.clone())?;
    }
    let truth: Vec<f64> = queries
        .iter()
        .map(|q| exact.mean_embedding_prediction(q, &values))
        .collect::<Result<_, _>>()?;

    println!("{:<22} {:>6} {:>14}", "model", "m", "max |pred gap|");
    let landmarks: Vec<Point> = transitions.iter().map(Transition::input).collect();
    let mut sketches = vec![(
        "nystrom (all data)",
        FeatureSketch::nystrom(kernel, landmarks.clone())?,
    )];
    sketches.push((
        "nystrom (every 5th)",
        FeatureSketch::nystrom(kernel, landmarks.iter().step_by(5).cloned().collect())?,
    ));
    for m in [50, 200, 1000] {
        sketches.push((
            "random fourier",
            FeatureSketch::random_fourier(kernel, 4, m, 1)?,
        ));
    }
    for (name, sketch) in sketches {
        let m = sketch.dim();
        let mut model = SketchedCmeModel::new(sketch, lambda, 1)?;
        for tr in &transitions {
            model.append_transition(tr.clone())?;
        }
        let mut worst: f64 = 0.0;
        for (q, t) in queries.iter().zip(&truth) {
            worst = worst.max((model.mean_embedding_prediction(q, &values)? - t).abs());
        }
        println!("{name:<22} {m:>6} {worst:>14.2e}");
    }
    Ok(())
}
