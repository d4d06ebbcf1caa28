use super::{beta_width, ConfidenceConfig, EmbeddingModel, Projection, ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::kernel_core::{gram_matrix, CholeskyState, KernelSpec, Point};

/// Variances below `-VARIANCE_CLAMP` indicate a broken factorization.
pub const VARIANCE_CLAMP: f64 = 1e-10;

pub(crate) fn clamp_variance(v: f64) -> Result<f64> {
    if v < -VARIANCE_CLAMP || v.is_nan() {
        return Err(Error::NegativeVariance(v));
    }
    Ok(v.max(0.0))
}

/// Kernel ridge estimate of the conditional mean embedding, held in dual form.
///
/// The embedding of `P(.|s, a)` is `sum_i alpha_i(s, a) psi(s'_i)` with
/// `alpha(s, a) = (K + lambda I)^{-1} k(s, a)`; only the weights are ever
/// materialized.
#[derive(Clone, Debug)]
pub struct CmeModel {
    kernel: KernelSpec,
    buffer: ReplayBuffer,
    inputs: Vec<Point>,
    chol: CholeskyState,
    /// `log det(I + K / lambda)`
    logdet: f64,
}

impl CmeModel {
    pub fn new(kernel: KernelSpec, lambda: f64, horizon: usize) -> Result<Self> {
        Ok(CmeModel {
            kernel,
            buffer: ReplayBuffer::new(horizon)?,
            inputs: Vec::new(),
            chol: CholeskyState::empty(lambda)?,
            logdet: 0.0,
        })
    }

    /// Fits from scratch with one dense factorization.
    pub fn refit(kernel: KernelSpec, lambda: f64, buffer: ReplayBuffer) -> Result<Self> {
        let inputs: Vec<Point> = buffer.iter().map(Transition::input).collect();
        let gram = gram_matrix(&kernel, &inputs)?;
        let chol = CholeskyState::from_gram(&gram, lambda)?;
        let logdet = chol.log_det() - inputs.len() as f64 * lambda.ln();
        Ok(CmeModel {
            kernel,
            buffer,
            inputs,
            chol,
            logdet,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn cholesky(&self) -> &CholeskyState {
        &self.chol
    }

    fn check_query(&self, query: &Point) -> Result<()> {
        match self.inputs.first() {
            Some(x) if x.dim() != query.dim() => Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: query.dim(),
            }),
            _ => Ok(()),
        }
    }

    /// `alpha(q) = (K + lambda I)^{-1} k(q)`; empty when no data is stored.
    pub fn alpha_weights(&self, query: &Point) -> Result<Vec<f64>> {
        self.check_query(query)?;
        let cross = self.kernel.cross(&self.inputs, query)?;
        Ok(self.chol.solve(&cross))
    }

    /// `k(q, q) - k(q)^T (K + lambda I)^{-1} k(q)`, clamped at zero.
    pub fn predictive_variance(&self, query: &Point) -> Result<f64> {
        self.check_query(query)?;
        let cross = self.kernel.cross(&self.inputs, query)?;
        let u = self.chol.forward_solve(&cross);
        clamp_variance(self.kernel.diag(query) - u.iter().map(|v| v * v).sum::<f64>())
    }

    /// `<V, embedding(q)> = alpha(q)^T v`, where `values[i]` is `V` at the
    /// next state of buffered transition `i`.
    pub fn mean_embedding_prediction(&self, query: &Point, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: values.len(),
            });
        }
        let alpha = self.alpha_weights(query)?;
        Ok(alpha.iter().zip(values).map(|(a, v)| a * v).sum())
    }

    /// Confidence width for episode `episode` from the data stored now.
    pub fn beta(&self, cfg: &ConfidenceConfig, episode: usize, horizon: usize, delta: f64) -> f64 {
        beta_width(
            cfg.lambda,
            cfg.b_p,
            self.info_gain(),
            episode,
            horizon,
            delta,
        )
    }
}

impl EmbeddingModel for CmeModel {
    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn lambda(&self) -> f64 {
        self.chol.lambda()
    }

    fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    fn log_det_accum(&self) -> f64 {
        self.logdet
    }

    fn refresh_projection(&self, query: &Point, proj: &mut Projection) -> Result<()> {
        self.check_query(query)?;
        if proj.synced == Some(self.len()) {
            return Ok(());
        }
        if proj.synced.is_none() {
            proj.coords.clear();
            proj.sq_norm = 0.0;
            proj.prior = self.kernel.diag(query);
        }
        let start = proj.coords.len();
        self.chol.extend_forward(&mut proj.coords, |i| {
            self.kernel.eval_unchecked(&self.inputs[i], query)
        });
        proj.sq_norm += proj.coords[start..].iter().map(|v| v * v).sum::<f64>();
        proj.variance = clamp_variance(proj.prior - proj.sq_norm)?;
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
        Ok(self.chol.forward_solve(values))
    }

    fn append_transition(&mut self, tr: Transition) -> Result<()> {
        self.buffer.check_next(&tr)?;
        let x = tr.input();
        self.check_query(&x)?;
        let cross = self.kernel.cross(&self.inputs, &x)?;
        self.chol.append(&cross, self.kernel.diag(&x))?;
        let n = self.chol.len();
        let pivot = self.chol.diag(n - 1);
        self.logdet += 2.0 * pivot.ln() - self.chol.lambda().ln();
        self.inputs.push(x);
        self.buffer.push(tr)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn transition(
        state: Point,
        action: usize,
        n_actions: usize,
        episode: usize,
        step: usize,
    ) -> Transition {
        Transition {
            next_state: state.clone(),
            state,
            action,
            action_point: Point::one_hot(action, n_actions).unwrap(),
            reward: 0.0,
            episode,
            step,
        }
    }

    fn one_hot_model(points: &[(usize, usize)], kernel: KernelSpec) -> CmeModel {
        let mut m = CmeModel::new(kernel, 1.0, 1).unwrap();
        for (t, &(s, a)) in points.iter().enumerate() {
            m.append_transition(transition(Point::one_hot(s, 3).unwrap(), a, 2, t + 1, 1))
                .unwrap();
        }
        m
    }

    fn query(s: usize, a: usize) -> Point {
        Point::one_hot(s, 3)
            .unwrap()
            .join(&Point::one_hot(a, 2).unwrap())
    }

    #[test]
    fn empty_model() {
        let m = one_hot_model(&[], KernelSpec::delta(1.0).unwrap());
        assert!(m.alpha_weights(&query(0, 0)).unwrap().is_empty());
        assert_eq!(m.predictive_variance(&query(0, 0)).unwrap(), 1.0);
        assert_eq!(m.info_gain(), 0.0);
        assert_eq!(m.mean_embedding_prediction(&query(0, 0), &[]).unwrap(), 0.0);
        let cfg = ConfidenceConfig {
            lambda: 1.0,
            delta: 0.1,
            b_p: 1.0,
            b_v: 1.0,
            b_phi: 1.0,
            zeta: 0.0,
            one_norm: 0.0,
        };
        assert_abs_diff_eq!(m.beta(&cfg, 1, 1, 0.1), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn single_point() {
        for kernel in [
            KernelSpec::delta(1.0).unwrap(),
            KernelSpec::squared_exponential(1.0, 1.0).unwrap(),
        ] {
            let m = one_hot_model(&[(1, 0)], kernel);
            let q = query(1, 0);
            assert_abs_diff_eq!(m.alpha_weights(&q).unwrap()[0], 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(m.predictive_variance(&q).unwrap(), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(m.info_gain(), 0.5 * 2f64.ln(), epsilon = 1e-15);
            assert_abs_diff_eq!(
                m.mean_embedding_prediction(&q, &[2.0]).unwrap(),
                1.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn duplicate_point() {
        // (K + I) alpha = [1, 1] with K = ones(2, 2) -> alpha = [1/3, 1/3]
        let m = one_hot_model(&[(2, 1), (2, 1)], KernelSpec::delta(1.0).unwrap());
        let q = query(2, 1);
        let alpha = m.alpha_weights(&q).unwrap();
        assert_abs_diff_eq!(alpha[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            m.predictive_variance(&q).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            m.mean_embedding_prediction(&q, &[3.0, 3.0]).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        assert!(m.mean_embedding_prediction(&q, &[3.0]).is_err());
    }

    #[test]
    fn three_distinct_points_info_gain() {
        // det(I + I) = 8 -> gamma = 1/2 log 8 = 3/2 log 2
        let m = one_hot_model(&[(0, 0), (1, 0), (2, 1)], KernelSpec::delta(1.0).unwrap());
        assert_abs_diff_eq!(m.info_gain(), 1.5 * 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut m = CmeModel::new(KernelSpec::delta(1.0).unwrap(), 1.0, 2).unwrap();
        let s = Point::one_hot(0, 3).unwrap();
        m.append_transition(transition(s.clone(), 0, 2, 1, 1))
            .unwrap();
        assert!(matches!(
            m.append_transition(transition(s.clone(), 0, 2, 2, 1)),
            Err(Error::OutOfOrder { .. })
        ));
        assert_eq!(m.len(), 1, "failed append must not touch the factor");
        assert_eq!(m.cholesky().len(), 1);
    }

    #[test]
    fn query_dimension_checked() {
        let m = one_hot_model(&[(0, 0)], KernelSpec::delta(1.0).unwrap());
        assert!(m.alpha_weights(&Point::one_hot(0, 3).unwrap()).is_err());
    }
}
