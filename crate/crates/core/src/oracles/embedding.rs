use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cme_estimator::ReplayBuffer;
use crate::environments::FiniteMdp;
use crate::error::{Error, Result};

/// Explicit matrix form of the embedding problem on a finite MDP.
///
/// Features are `phi(s, a) = sqrt(c) e_{(s, a)}` and `psi(s) = e_s`, so the
/// true operator is the `S x SA` matrix with columns `P(. | s, a) / sqrt(c)`
/// and everything else is plain linear algebra.
#[derive(Clone, Debug)]
pub struct FiniteEmbeddingModel {
    num_states: usize,
    num_actions: usize,
    lambda: f64,
    feature_scale: f64,
    theta_p: DMatrix<f64>,
    /// `sum_i phi_i phi_i^T + lambda I`
    m: DMatrix<f64>,
    /// `sum_i psi(s'_i) phi_i^T`
    cross: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationResult {
    /// `||(Theta_P - Theta_hat) M^{1/2}||` (spectral norm)
    pub lhs: f64,
    pub beta: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimisticValue {
    /// `<f, Theta* phi>` at the analytic maximizer.
    pub closed_form: f64,
    /// Best value found by projected gradient ascent.
    pub ascent: f64,
}

impl OptimisticValue {
    pub fn value(&self) -> f64 {
        self.closed_form.max(self.ascent)
    }
}

/// Largest disagreement between the analytic maximizer and gradient ascent
/// before the closed form is declared broken.
pub const ASCENT_TOLERANCE: f64 = 1e-5;

impl FiniteEmbeddingModel {
    /// Model with no data; `output_scale` is the Delta kernel scale `c` on `(s, a)`.
    pub fn new(mdp: &FiniteMdp, lambda: f64, output_scale: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(output_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "lambda and output scale must be positive".into(),
            ));
        }
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let feature_scale = output_scale.sqrt();
        let mut theta_p = DMatrix::zeros(ns, ns * na);
        for s in 0..ns {
            for a in 0..na {
                for (s2, p) in mdp.row(s, a).iter().enumerate() {
                    theta_p[(s2, s * na + a)] = p / feature_scale;
                }
            }
        }
        Ok(FiniteEmbeddingModel {
            num_states: ns,
            num_actions: na,
            lambda,
            feature_scale,
            theta_p,
            m: DMatrix::identity(ns * na, ns * na) * lambda,
            cross: DMatrix::zeros(ns, ns * na),
        })
    }

    /// Model fitted to every transition in `buffer` (states and actions one-hot).
    pub fn from_buffer(
        mdp: &FiniteMdp,
        lambda: f64,
        output_scale: f64,
        buffer: &ReplayBuffer,
    ) -> Result<Self> {
        let mut fem = Self::new(mdp, lambda, output_scale)?;
        for tr in buffer.iter() {
            let s = mdp.state_index(&tr.state)?;
            let s2 = mdp.state_index(&tr.next_state)?;
            fem.observe(s, tr.action, s2)?;
        }
        Ok(fem)
    }

    pub fn observe(&mut self, state: usize, action: usize, next: usize) -> Result<()> {
        if state >= self.num_states || next >= self.num_states || action >= self.num_actions {
            return Err(Error::InvalidParameter(format!(
                "transition ({state}, {action}, {next}) out of range"
            )));
        }
        let j = self.index(state, action);
        let c = self.feature_scale;
        self.m[(j, j)] += c * c;
        self.cross[(next, j)] += c;
        Ok(())
    }

    fn index(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn feature(&self, s: usize, a: usize) -> DVector<f64> {
        let mut phi = DVector::zeros(self.num_states * self.num_actions);
        phi[self.index(s, a)] = self.feature_scale;
        phi
    }

    pub fn theta_p(&self) -> &DMatrix<f64> {
        &self.theta_p
    }

    pub fn m_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Exact `||Theta_P||_HS`, the tightest valid `B_P`.
    pub fn hs_norm_theta_p(&self) -> f64 {
        self.theta_p.norm()
    }

    fn m_eigen(&self) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        let eig = SymmetricEigen::new(self.m.clone());
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
        Ok(eig)
    }

    fn m_power(&self, power: f64) -> Result<DMatrix<f64>> {
        let eig = self.m_eigen()?;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(power)));
        Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
    }

    /// `Theta_hat = cross * M^{-1}`.
    pub fn theta_hat(&self) -> Result<DMatrix<f64>> {
        Ok(&self.cross * self.m_power(-1.0)?)
    }

    /// `<f, Theta_hat phi(s, a)>` with `f` given by its values on the states.
    pub fn predict(&self, f: &[f64], s: usize, a: usize) -> Result<f64> {
        let f = self.state_vector(f)?;
        Ok(f.dot(&(self.theta_hat()? * self.feature(s, a))))
    }

    /// `lambda phi^T M^{-1} phi`.
    pub fn variance(&self, s: usize, a: usize) -> Result<f64> {
        let phi = self.feature(s, a);
        Ok(self.lambda * phi.dot(&(self.m_power(-1.0)? * &phi)))
    }

    /// `||(Theta_P - Theta_hat) phi(s, a)||`.
    pub fn embedding_error(&self, s: usize, a: usize) -> Result<f64> {
        Ok(((&self.theta_p - self.theta_hat()?) * self.feature(s, a)).norm())
    }

    /// Spectral norm of `(Theta_P - Theta_hat) M^{1/2}` against `beta`.
    pub fn concentration_check(&self, beta: f64) -> Result<ConcentrationResult> {
        let d = (&self.theta_p - self.theta_hat()?) * self.m_power(0.5)?;
        let gram = &d * d.transpose();
        let top = SymmetricEigen::new(gram).eigenvalues.max().max(0.0);
        let lhs = top.sqrt();
        Ok(ConcentrationResult {
            lhs,
            beta,
            holds: lhs <= beta,
        })
    }

    fn state_vector(&self, f: &[f64]) -> Result<DVector<f64>> {
        if f.len() != self.num_states {
            return Err(Error::LengthMismatch {
                expected: self.num_states,
                found: f.len(),
            });
        }
        Ok(DVector::from_column_slice(f))
    }

    /// Value at the analytic maximizer
    /// `Theta* = Theta_hat + beta / (||phi||_{M^-1} ||f||) (f phi^T) M^{-1}`.
    pub fn closed_form_optimistic_value(
        &self,
        beta: f64,
        s: usize,
        a: usize,
        f: &[f64],
    ) -> Result<f64> {
        let fv = self.state_vector(f)?;
        let phi = self.feature(s, a);
        let m_inv = self.m_power(-1.0)?;
        let theta_hat = &self.cross * &m_inv;
        let f_norm = fv.norm();
        let phi_norm = phi.dot(&(&m_inv * &phi)).sqrt();
        let theta = if f_norm == 0.0 || phi_norm == 0.0 {
            theta_hat
        } else {
            theta_hat + (&fv * phi.transpose() * &m_inv) * (beta / (phi_norm * f_norm))
        };
        Ok(fv.dot(&(theta * phi)))
    }

    /// Maximizes `<f, Theta phi(s, a)>` over `||(Theta - Theta_hat) M^{1/2}||_HS <= beta`
    /// both analytically and by projected gradient ascent from random starts.
    /// Errors if the two disagree by more than [`ASCENT_TOLERANCE`].
    pub fn brute_force_optimistic_value(
        &self,
        beta: f64,
        s: usize,
        a: usize,
        f: &[f64],
        seed: u64,
    ) -> Result<OptimisticValue> {
        const RESTARTS: usize = 10;
        const ITERS: usize = 2000;
        const STEP: f64 = 0.1;

        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= 0 (got {beta})"
            )));
        }
        let closed_form = self.closed_form_optimistic_value(beta, s, a, f)?;
        let fv = self.state_vector(f)?;
        let phi = self.feature(s, a);
        let theta_hat = self.theta_hat()?;
        let center = fv.dot(&(&theta_hat * &phi));
        // Theta = Theta_hat + Delta M^{-1/2}; the objective is linear in Delta
        // with gradient f g^T, g = M^{-1/2} phi.
        let g = self.m_power(-0.5)? * &phi;
        let grad = &fv * g.transpose();
        let grad_norm = grad.norm();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, cols) = (self.num_states, self.num_states * self.num_actions);
        let mut ascent = f64::NEG_INFINITY;
        for _ in 0..RESTARTS {
            let mut delta =
                DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
            let radius = beta * rng.random::<f64>();
            project(&mut delta, radius, true);
            if grad_norm > 0.0 {
                // step scales with the ball so convergence does not depend on beta
                let step = &grad * (STEP * beta / grad_norm);
                for _ in 0..ITERS {
                    delta += &step;
                    project(&mut delta, beta, false);
                }
            }
            let value = center + fv.dot(&(&delta * &g));
            ascent = ascent.max(value);
        }
        if (ascent - closed_form).abs() > ASCENT_TOLERANCE {
            return Err(Error::Oracle(format!(
                "closed form {closed_form} disagrees with gradient ascent {ascent}"
            )));
        }
        Ok(OptimisticValue {
            closed_form,
            ascent,
        })
    }
}

/// Rescales `delta` onto the HS ball of the given radius. With `exact`, the
/// result lands on the sphere of that radius (used to place random starts).
fn project(delta: &mut DMatrix<f64>, radius: f64, exact: bool) {
    let norm = delta.norm();
    if norm == 0.0 {
        return;
    }
    if exact || norm > radius {
        *delta *= radius / norm;
    }
}
