use nalgebra::{DMatrix, DVector};

use super::model::clamp_variance;
use super::{EmbeddingModel, Projection, ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::kernel_core::{FeatureSketch, Point};

/// Primal ridge estimate on sketched features `z(s, a) in R^m`.
///
/// Keeps the Cholesky factor of `A = Z^T Z + lambda I` (m x m) and updates it
/// with one rank-one modification per transition, so appends cost O(m^2)
/// regardless of how much data has been stored.
#[derive(Clone, Debug)]
pub struct SketchedCmeModel {
    sketch: FeatureSketch,
    lambda: f64,
    buffer: ReplayBuffer,
    features: Vec<Vec<f64>>,
    factor: DMatrix<f64>,
    logdet: f64,
}

impl SketchedCmeModel {
    pub fn new(sketch: FeatureSketch, lambda: f64, horizon: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularizer lambda must be positive (got {lambda})"
            )));
        }
        let m = sketch.dim();
        Ok(SketchedCmeModel {
            sketch,
            lambda,
            buffer: ReplayBuffer::new(horizon)?,
            features: Vec::new(),
            factor: DMatrix::identity(m, m) * lambda.sqrt(),
            logdet: 0.0,
        })
    }

    pub fn sketch(&self) -> &FeatureSketch {
        &self.sketch
    }

    fn solve_lower(&self, b: DVector<f64>) -> DVector<f64> {
        self.factor
            .solve_lower_triangular(&b)
            .expect("factor diagonal is bounded below by sqrt(lambda)")
    }

    /// `alpha(q) = Z A^{-1} z(q)`.
    pub fn alpha_weights(&self, query: &Point) -> Result<Vec<f64>> {
        let z = DVector::from_vec(self.sketch.features(query)?);
        let y = self.solve_lower(z);
        let x = self
            .factor
            .tr_solve_lower_triangular(&y)
            .expect("factor diagonal is bounded below by sqrt(lambda)");
        Ok(self
            .features
            .iter()
            .map(|row| row.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `lambda z(q)^T A^{-1} z(q)`.
    pub fn predictive_variance(&self, query: &Point) -> Result<f64> {
        let mut p = Projection::default();
        self.refresh_projection(query, &mut p)?;
        Ok(p.variance)
    }

    pub fn mean_embedding_prediction(&self, query: &Point, values: &[f64]) -> Result<f64> {
        let mut p = Projection::default();
        self.refresh_projection(query, &mut p)?;
        let w = self.project_targets(values)?;
        Ok(p.coords.iter().zip(&w).map(|(a, b)| a * b).sum())
    }

    /// In-place update of the factor to that of `L L^T + z z^T`.
    fn rank_one_update(&mut self, mut z: Vec<f64>) {
        let m = z.len();
        for k in 0..m {
            let lkk = self.factor[(k, k)];
            let r = lkk.hypot(z[k]);
            let c = r / lkk;
            let s = z[k] / lkk;
            self.factor[(k, k)] = r;
            for i in k + 1..m {
                let lik = (self.factor[(i, k)] + s * z[i]) / c;
                self.factor[(i, k)] = lik;
                z[i] = c * z[i] - s * lik;
            }
        }
    }
}

impl EmbeddingModel for SketchedCmeModel {
    fn len(&self) -> usize {
        self.features.len()
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    fn log_det_accum(&self) -> f64 {
        self.logdet
    }

    fn refresh_projection(&self, query: &Point, proj: &mut Projection) -> Result<()> {
        if proj.synced == Some(self.len()) {
            return Ok(());
        }
        let z = DVector::from_vec(self.sketch.features(query)?);
        let u = self.solve_lower(z);
        proj.sq_norm = u.norm_squared();
        proj.coords = u.iter().copied().collect();
        proj.prior = self.sketch.kernel().diag(query);
        proj.variance = clamp_variance(self.lambda * proj.sq_norm)?;
        proj.synced = Some(self.len());
        Ok(())
    }

    fn project_targets(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: values.len(),
            });
        }
        let m = self.sketch.dim();
        let mut zt_v = DVector::zeros(m);
        for (row, v) in self.features.iter().zip(values) {
            for (acc, z) in zt_v.iter_mut().zip(row) {
                *acc += z * v;
            }
        }
        Ok(self.solve_lower(zt_v).iter().copied().collect())
    }

    fn append_transition(&mut self, tr: Transition) -> Result<()> {
        self.buffer.check_next(&tr)?;
        let z = self.sketch.features(&tr.input())?;
        self.rank_one_update(z.clone());
        let m = self.sketch.dim() as f64;
        self.logdet =
            2.0 * self.factor.diagonal().iter().map(|d| d.ln()).sum::<f64>() - m * self.lambda.ln();
        self.features.push(z);
        self.buffer.push(tr)?;
        Ok(())
    }
}
