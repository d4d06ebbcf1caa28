//! Low-rank feature maps `z: X -> R^m` with `<z(x), z(y)> ≈ k(x, y)`.
//!
//! Random Fourier features sample frequencies from the kernel's spectral
//! density; Nyström whitens the kernel column against a landmark set. Both are
//! immutable once built.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use super::{gram_matrix, KernelFamily, KernelSpec, Point};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    RandomFourier,
    Nystrom,
}

#[derive(Clone, Debug)]
enum FeatureMap {
    /// Rows of `frequencies` are the sampled spectral frequencies; each yields a
    /// `(cos, sin)` feature pair scaled by `sqrt(output_scale / pairs)`.
    Fourier {
        frequencies: DMatrix<f64>,
        scale: f64,
    },
    /// `z(x) = whitening * [k(l_j, x)]_j` with `whitening = K_LL^{-1/2}` (pseudo-inverse).
    Nystrom {
        landmarks: Vec<Point>,
        whitening: DMatrix<f64>,
    },
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut c = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|p| *p * *p <= c)
            .all(|p| !c.is_multiple_of(*p))
        {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// Standard-normal draws from a Halton sequence under a uniform random shift
/// (mod 1), pushed through Box-Muller. Each row is marginally exactly
/// Gaussian, so kernel estimates stay unbiased, while the low-discrepancy
/// layout cuts the Monte-Carlo error well below i.i.d. sampling.
fn shifted_halton_gaussians(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let uniform_dims = dim.div_ceil(2) * 2;
    let bases = first_primes(uniform_dims);
    let shift: Vec<f64> = (0..uniform_dims).map(|_| rng.random::<f64>()).collect();
    let mut out = DMatrix::zeros(rows, dim);
    for r in 0..rows {
        let u: Vec<f64> = bases
            .iter()
            .zip(&shift)
            .map(|(&b, &s)| {
                let v = (radical_inverse(r as u64 + 1, b) + s).fract();
                // keep away from 0 so the log stays finite
                v.max(f64::MIN_POSITIVE)
            })
            .collect();
        for c in 0..dim {
            let (u1, u2) = (u[2 * (c / 2)], u[2 * (c / 2) + 1]);
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = std::f64::consts::TAU * u2;
            out[(r, c)] = if c % 2 == 0 {
                radius * angle.cos()
            } else {
                radius * angle.sin()
            };
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct FeatureSketch {
    kernel: KernelSpec,
    input_dim: usize,
    map: FeatureMap,
}

impl FeatureSketch {
    /// Random Fourier features with `m` outputs (`m / 2` frequencies, each
    /// contributing a cosine and a sine). `m` must be even and positive.
    pub fn random_fourier(
        kernel: KernelSpec,
        input_dim: usize,
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 || m % 2 == 1 {
            return Err(Error::InvalidParameter(format!(
                "random Fourier feature count must be even and positive (got {m})"
            )));
        }
        if input_dim == 0 {
            return Err(Error::InvalidParameter(
                "input dimension must be >= 1".into(),
            ));
        }
        let pairs = m / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies = match kernel.family {
            KernelFamily::SquaredExponential { lengthscale } => {
                shifted_halton_gaussians(pairs, input_dim, &mut rng) / lengthscale
            }
            KernelFamily::Matern { nu, lengthscale } => {
                // multivariate Student-t with 2 nu degrees of freedom
                let dof = 2.0 * nu.value();
                let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
                let mut freq = shifted_halton_gaussians(pairs, input_dim, &mut rng);
                for mut row in freq.row_iter_mut() {
                    let u: f64 = chi.sample(&mut rng);
                    row *= (dof / u).sqrt() / lengthscale;
                }
                freq
            }
            KernelFamily::Linear | KernelFamily::Delta => {
                return Err(Error::InvalidParameter(format!(
                    "random Fourier features need a kernel with a spectral density; {:?} has none",
                    kernel.family
                )))
            }
        };
        Ok(FeatureSketch {
            kernel,
            input_dim,
            map: FeatureMap::Fourier {
                frequencies,
                scale: (kernel.output_scale / pairs as f64).sqrt(),
            },
        })
    }

    /// Nyström features on the given landmarks (`m = landmarks.len()`).
    pub fn nystrom(kernel: KernelSpec, landmarks: Vec<Point>) -> Result<Self> {
        let Some(first) = landmarks.first() else {
            return Err(Error::InvalidParameter(
                "Nyström needs at least one landmark".into(),
            ));
        };
        let input_dim = first.dim();
        let gram = gram_matrix(&kernel, &landmarks)?;
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.amax();
        let cutoff = top * 1e-12 * landmarks.len() as f64;
        let m = landmarks.len();
        let mut whitening = DMatrix::zeros(m, m);
        for (r, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > cutoff {
                let inv_sqrt = 1.0 / lam.sqrt();
                for c in 0..m {
                    whitening[(r, c)] = eig.eigenvectors[(c, r)] * inv_sqrt;
                }
            }
        }
        Ok(FeatureSketch {
            kernel,
            input_dim,
            map: FeatureMap::Nystrom {
                landmarks,
                whitening,
            },
        })
    }

    pub fn kind(&self) -> SketchKind {
        match self.map {
            FeatureMap::Fourier { .. } => SketchKind::RandomFourier,
            FeatureMap::Nystrom { .. } => SketchKind::Nystrom,
        }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Output dimension `m`.
    pub fn dim(&self) -> usize {
        match &self.map {
            FeatureMap::Fourier { frequencies, .. } => 2 * frequencies.nrows(),
            FeatureMap::Nystrom { landmarks, .. } => landmarks.len(),
        }
    }

    pub fn features(&self, x: &Point) -> Result<Vec<f64>> {
        if x.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.dim(),
            });
        }
        Ok(match &self.map {
            FeatureMap::Fourier { frequencies, scale } => {
                let xv = DVector::from_column_slice(x.coords());
                let proj = frequencies * xv;
                let mut z = Vec::with_capacity(2 * proj.len());
                for &w in proj.iter() {
                    z.push(scale * w.cos());
                    z.push(scale * w.sin());
                }
                z
            }
            FeatureMap::Nystrom {
                landmarks,
                whitening,
            } => {
                let col = DVector::from_vec(self.kernel.cross(landmarks, x)?);
                (whitening * col).iter().copied().collect()
            }
        })
    }

    /// `<z(x), z(y)>`.
    pub fn approx_kernel(&self, x: &Point, y: &Point) -> Result<f64> {
        let zx = self.features(x)?;
        let zy = self.features(y)?;
        Ok(zx.iter().zip(&zy).map(|(a, b)| a * b).sum())
    }
}
