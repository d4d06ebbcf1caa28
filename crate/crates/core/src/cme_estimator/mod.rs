//! Replay buffer and the fitted conditional-mean-embedding model: regression
//! weights, predictive variance, information gain and the confidence width.

mod buffer;
mod confidence;
mod model;
mod sketched;

use std::collections::HashMap;

pub use buffer::{ReplayBuffer, Transition};
pub use confidence::{beta_width, ConfidenceConfig, NOISE_CONSTANT};
pub use model::{CmeModel, VARIANCE_CLAMP};
pub use sketched::SketchedCmeModel;

use crate::error::Result;
use crate::kernel_core::Point;

/// A query point expressed in the model's whitened coordinates.
///
/// For the exact model `coords = L^{-1} k(q)` with `L L^T = K + lambda I`; for a
/// sketched model `coords = L_A^{-1} z(q)`. In both cases the mean-embedding
/// prediction against a value vector `v` is `coords . project_targets(v)`.
#[derive(Clone, Debug, Default)]
pub struct Projection {
    pub(crate) coords: Vec<f64>,
    pub(crate) sq_norm: f64,
    pub(crate) prior: f64,
    pub(crate) variance: f64,
    pub(crate) synced: Option<usize>,
}

impl Projection {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Predictive variance at the query for the model state it was synced to.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `coords . targets`, i.e. `alpha(q)^T v` when `targets = project_targets(v)`.
    pub fn predict(&self, targets: &[f64]) -> f64 {
        self.coords.iter().zip(targets).map(|(a, b)| a * b).sum()
    }
}

/// Common surface of the exact and sketched embedding models.
pub trait EmbeddingModel {
    /// Number of stored transitions.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lambda(&self) -> f64;

    fn buffer(&self) -> &ReplayBuffer;

    /// `log det(I + K / lambda)` over all stored inputs.
    fn log_det_accum(&self) -> f64;

    /// `1/2 log det(I + K / lambda)`.
    fn info_gain(&self) -> f64 {
        0.5 * self.log_det_accum()
    }

    /// Brings `proj` up to date with the current model. Exact models extend the
    /// cached triangular solve by the rows added since the last sync.
    fn refresh_projection(&self, query: &Point, proj: &mut Projection) -> Result<()>;

    /// Whitened form of a value vector indexed like the buffer.
    fn project_targets(&self, values: &[f64]) -> Result<Vec<f64>>;

    fn append_transition(&mut self, tr: Transition) -> Result<()>;
}

/// Projections keyed by exact query point, kept across episodes so that each
/// new transition costs O(n) per cached query instead of a full solve.
#[derive(Clone, Debug, Default)]
pub struct PosteriorCache {
    index: HashMap<Vec<u64>, usize>,
    entries: Vec<(Point, Projection)>,
}

impl PosteriorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.index.clear();
        self.entries.clear();
    }

    pub fn get<M: EmbeddingModel + ?Sized>(
        &mut self,
        model: &M,
        query: &Point,
    ) -> Result<&Projection> {
        let key = query.key();
        let slot = match self.index.get(&key) {
            Some(&i) => i,
            None => {
                self.entries.push((query.clone(), Projection::default()));
                self.index.insert(key, self.entries.len() - 1);
                self.entries.len() - 1
            }
        };
        let (point, proj) = &mut self.entries[slot];
        model.refresh_projection(point, proj)?;
        Ok(&self.entries[slot].1)
    }
}
