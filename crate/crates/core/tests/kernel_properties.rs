use anyhow::Result;
use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use cme_rl::kernel_core::{gram_matrix, CholeskyState, FeatureSketch, KernelSpec, MaternNu, Point};

fn kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::squared_exponential(0.6, 1.3).unwrap(),
        KernelSpec::matern(MaternNu::Half, 0.9, 1.0).unwrap(),
        KernelSpec::matern(MaternNu::ThreeHalves, 0.5, 2.0).unwrap(),
        KernelSpec::matern(MaternNu::FiveHalves, 1.1, 0.7).unwrap(),
        KernelSpec::linear(0.5).unwrap(),
        KernelSpec::delta(1.0).unwrap(),
    ]
}

fn points(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), 1..max_n)
        .prop_map(|rows| rows.into_iter().map(|r| Point::new(r).unwrap()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_is_symmetric_psd(xs in points(25, 3)) {
        for k in kernels() {
            let g = gram_matrix(&k, &xs).unwrap();
            prop_assert!((&g - g.transpose()).amax() == 0.0);
            let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
            prop_assert!(min >= -1e-10 * g.trace().max(1.0), "{:?}: min eigenvalue {}", k.family, min);
        }
    }

    #[test]
    fn stationary_diagonal_is_output_scale(xs in points(10, 4)) {
        for k in kernels().into_iter().filter(KernelSpec::is_stationary) {
            for x in &xs {
                prop_assert_eq!(k.eval(x, x).unwrap(), k.output_scale);
                prop_assert_eq!(k.diag(x), k.output_scale);
            }
        }
    }

    #[test]
    fn appends_match_dense_factor(xs in points(60, 2), lambda in 0.05f64..3.0) {
        for k in kernels() {
            let mut state = CholeskyState::empty(lambda).unwrap();
            for (i, x) in xs.iter().enumerate() {
                state.append(&k.cross(&xs[..i], x).unwrap(), k.diag(x)).unwrap();
            }
            let n = xs.len();
            let a = gram_matrix(&k, &xs).unwrap() + DMatrix::identity(n, n) * lambda;
            let l = a.clone().cholesky().unwrap().l();
            let rel = (state.lower() - &l).norm() / l.norm();
            prop_assert!(rel <= 1e-10, "{:?}: relative gap {}", k.family, rel);
            let logdet = 2.0 * l.diagonal().map(f64::ln).sum();
            prop_assert!((state.log_det() - logdet).abs() <= 1e-9 * logdet.abs().max(1.0));
        }
    }

    #[test]
    fn solves_invert_the_regularized_gram(xs in points(30, 3), b_seed in 0u64..1000) {
        let k = KernelSpec::squared_exponential(0.8, 1.0).unwrap();
        let n = xs.len();
        let state = CholeskyState::from_gram(&gram_matrix(&k, &xs).unwrap(), 0.3).unwrap();
        let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + b_seed) as f64).sin()).collect();
        let x = state.solve(&b);
        let a = gram_matrix(&k, &xs).unwrap() + DMatrix::identity(n, n) * 0.3;
        let residual = &a * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
        prop_assert!(residual.amax() <= 1e-10);
    }
}

#[test]
fn matern_closed_forms() -> Result<()> {
    let x = Point::new(vec![0.0, 0.0])?;
    let y = Point::new(vec![0.3, 0.4])?; // distance 0.5
    let r: f64 = 0.5 / 0.25;
    let half = KernelSpec::matern(MaternNu::Half, 0.25, 2.0)?;
    assert_abs_diff_eq!(half.eval(&x, &y)?, 2.0 * (-r).exp(), epsilon = 1e-15);
    let three = KernelSpec::matern(MaternNu::ThreeHalves, 0.25, 2.0)?;
    let a = 3f64.sqrt() * r;
    assert_abs_diff_eq!(
        three.eval(&x, &y)?,
        2.0 * (1.0 + a) * (-a).exp(),
        epsilon = 1e-15
    );
    let se = KernelSpec::squared_exponential(0.25, 2.0)?;
    assert_abs_diff_eq!(se.eval(&x, &y)?, 2.0 * (-2.0f64).exp(), epsilon = 1e-15);
    Ok(())
}

#[test]
fn delta_kernel_is_identity_gram() -> Result<()> {
    let xs: Vec<Point> = (0..4)
        .map(|i| Point::one_hot(i, 4))
        .collect::<Result<_, _>>()?;
    let g = gram_matrix(&KernelSpec::delta(1.5)?, &xs)?;
    assert_eq!(g, DMatrix::identity(4, 4) * 1.5);
    Ok(())
}

#[test]
fn fourier_sketch_is_unbiased() -> Result<()> {
    // mean over independent sketches within 3 standard errors of k(x, y)
    let k = KernelSpec::squared_exponential(0.7, 1.0)?;
    let x = Point::new(vec![0.1, -0.3])?;
    let y = Point::new(vec![0.5, 0.2])?;
    let exact = k.eval(&x, &y)?;
    let draws: Vec<f64> = (0..40)
        .map(|seed| FeatureSketch::random_fourier(k, 2, 50, seed)?.approx_kernel(&x, &y))
        .collect::<Result<_, _>>()?;
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * sd / n.sqrt() + 1e-12,
        "mean {mean} vs {exact}, sd {sd}"
    );
    Ok(())
}

#[test]
fn matern_fourier_sketch_tracks_kernel() -> Result<()> {
    let k = KernelSpec::matern(MaternNu::FiveHalves, 1.0, 1.0)?;
    let sketch = FeatureSketch::random_fourier(k, 2, 4000, 17)?;
    let pts: Vec<Point> = (0..10)
        .map(|i| Point::new(vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]))
        .collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for a in &pts {
        for b in &pts {
            worst = worst.max((sketch.approx_kernel(a, b)? - k.eval(a, b)?).abs());
        }
    }
    assert!(worst < 0.06, "sup error {worst}");
    Ok(())
}

#[test]
fn nystrom_is_exact_on_landmarks() -> Result<()> {
    let k = KernelSpec::squared_exponential(0.5, 1.0)?;
    let landmarks: Vec<Point> = (0..12)
        .map(|i| Point::new(vec![i as f64 / 6.0 - 1.0, (i as f64).sin()]))
        .collect::<Result<_, _>>()?;
    let sketch = FeatureSketch::nystrom(k, landmarks.clone())?;
    for a in &landmarks {
        for b in &landmarks {
            assert_abs_diff_eq!(sketch.approx_kernel(a, b)?, k.eval(a, b)?, epsilon = 1e-9);
        }
    }
    Ok(())
}

#[test]
fn invalid_parameters_rejected() {
    assert!(KernelSpec::squared_exponential(0.0, 1.0).is_err());
    assert!(KernelSpec::squared_exponential(1.0, -1.0).is_err());
    assert!(MaternNu::from_value(2.0).is_err());
    assert!(CholeskyState::empty(0.0).is_err());
    let k = KernelSpec::delta(1.0).unwrap();
    assert!(FeatureSketch::random_fourier(k, 2, 10, 0).is_err());
    assert!(Point::new(vec![f64::NAN]).is_err());
}
