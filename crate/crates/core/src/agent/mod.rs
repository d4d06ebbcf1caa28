//! The optimistic planning agent: a backward value pass over the buffered
//! next states, closed-form optimistic Q-values and greedy action selection.

mod config;

use std::collections::HashMap;

pub use config::{AgentConfig, BonusMode, TargetPerturbation};

use crate::cme_estimator::{beta_width, EmbeddingModel, PosteriorCache, Projection, Transition};
use crate::environments::{EnvRng, Environment};
use crate::error::{Error, Result};
use crate::kernel_core::Point;

/// Known reward `R(s, a)` with `a` indexing the action set.
pub type RewardFn<'a> = dyn Fn(&Point, usize) -> f64 + 'a;

/// Value vectors `v_h` at the buffered next states, frozen at episode start.
#[derive(Clone, Debug)]
pub struct EpisodeValueTable {
    episode: usize,
    beta: f64,
    n: usize,
    /// `values[h - 1]` is `v_h`, `h = 1..=H+1`.
    values: Vec<Vec<f64>>,
    /// Whitened copies of `values`, consumed by the mean-embedding term. Their
    /// length is the model's coordinate dimension, which differs from `n` for
    /// sketched models.
    targets: Vec<Option<Vec<f64>>>,
}

impl EpisodeValueTable {
    /// Table from explicit value vectors `v_1..=v_{H+1}` over the model's buffer.
    pub fn from_values<M: EmbeddingModel + ?Sized>(
        model: &M,
        episode: usize,
        beta: f64,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = model.len();
        if values.len() < 2 {
            return Err(Error::InvalidParameter("need at least v_1 and v_2".into()));
        }
        if let Some(v) = values.iter().find(|v| v.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: v.len(),
            });
        }
        let targets = values
            .iter()
            .map(|v| model.project_targets(v).map(Some))
            .collect::<Result<Vec<_>>>()?;
        Ok(EpisodeValueTable {
            episode,
            beta,
            n,
            values,
            targets,
        })
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Width used by every bonus of this episode.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of buffered transitions the table was built over.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self, h: usize) -> Result<&[f64]> {
        if h == 0 || h > self.values.len() {
            return Err(Error::InvalidParameter(format!(
                "value table has steps 1..={}, asked for {h}",
                self.values.len()
            )));
        }
        Ok(&self.values[h - 1])
    }

    fn targets(&self, h: usize) -> Result<&[f64]> {
        match self.targets.get(h.wrapping_sub(1)) {
            Some(Some(t)) if h >= 1 => Ok(t),
            _ => Err(Error::InvalidParameter(format!(
                "value table is missing step {h}"
            ))),
        }
    }
}

/// Terms of one optimistic Q-value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QValue {
    pub q: f64,
    pub reward: f64,
    pub prediction: f64,
    pub bonus: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub state: Point,
    pub action: usize,
    pub reward: f64,
    pub next_state: Point,
    pub q: f64,
    pub bonus: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTrace {
    pub episode: usize,
    pub steps: Vec<TraceStep>,
}

impl PolicyTrace {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// `sum_h sigma^2(s_h, a_h) / lambda` for this episode.
    pub fn scaled_variance_sum(&self, lambda: f64) -> f64 {
        self.steps.iter().map(|s| s.variance).sum::<f64>() / lambda
    }
}

/// CME-RL over any embedding model (exact or sketched).
#[derive(Clone, Debug)]
pub struct CmeRlAgent<M> {
    config: AgentConfig,
    model: M,
    cache: PosteriorCache,
}

impl<M: EmbeddingModel> CmeRlAgent<M> {
    pub fn new(config: AgentConfig, model: M) -> Result<Self> {
        config.validate()?;
        if model.buffer().horizon() != config.horizon {
            return Err(Error::InvalidParameter(format!(
                "model horizon {} differs from agent horizon {}",
                model.buffer().horizon(),
                config.horizon
            )));
        }
        if (model.lambda() - config.confidence.lambda).abs() > 0.0 {
            return Err(Error::InvalidParameter(
                "model and confidence lambda differ".into(),
            ));
        }
        Ok(CmeRlAgent {
            config,
            model,
            cache: PosteriorCache::new(),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn into_model(self) -> M {
        self.model
    }

    /// Width `beta_t(delta / 2)` from the data currently stored, times `beta_scale`.
    pub fn beta(&self, episode: usize) -> f64 {
        let c = &self.config.confidence;
        let w = beta_width(
            c.lambda,
            c.b_p,
            self.model.info_gain(),
            episode,
            self.config.horizon,
            c.delta / 2.0,
        );
        w * self.config.beta_scale
    }

    fn q_with_reward(
        &mut self,
        table: &EpisodeValueTable,
        h: usize,
        state: &Point,
        action: usize,
        reward: f64,
        cached: bool,
    ) -> Result<QValue> {
        let a = self
            .config
            .action_set
            .get(action)
            .ok_or_else(|| Error::InvalidParameter(format!("action {action} out of range")))?;
        let targets = table.targets(h + 1)?;
        let query = state.join(a);
        let (prediction, variance) = if cached {
            let proj = self.cache.get(&self.model, &query)?;
            (proj.predict(targets), proj.variance())
        } else {
            let mut proj = Projection::default();
            self.model.refresh_projection(&query, &mut proj)?;
            (proj.predict(targets), proj.variance())
        };
        let bonus = self.config.bonus_coefficient() * table.beta * variance.sqrt();
        let q = reward + prediction + bonus;
        if !q.is_finite() {
            return Err(Error::NonFinite("optimistic Q-value"));
        }
        Ok(QValue {
            q,
            reward,
            prediction,
            bonus,
            variance,
        })
    }

    /// `R(s, a) + alpha(s, a)^T v_{h+1} + coef * beta * sigma(s, a)`. Not truncated.
    pub fn q_value(
        &mut self,
        table: &EpisodeValueTable,
        h: usize,
        state: &Point,
        action: usize,
        reward_fn: &RewardFn,
    ) -> Result<QValue> {
        self.q_with_reward(table, h, state, action, reward_fn(state, action), true)
    }

    pub fn q_values(
        &mut self,
        table: &EpisodeValueTable,
        h: usize,
        state: &Point,
        reward_fn: &RewardFn,
    ) -> Result<Vec<QValue>> {
        (0..self.config.num_actions())
            .map(|a| self.q_value(table, h, state, a, reward_fn))
            .collect()
    }

    /// Greedy action; ties go to the lowest index.
    pub fn select_action(
        &mut self,
        table: &EpisodeValueTable,
        h: usize,
        state: &Point,
        reward_fn: &RewardFn,
    ) -> Result<(usize, QValue)> {
        let qs = self.q_values(table, h, state, reward_fn)?;
        Ok(argmax(&qs))
    }

    /// Like [`Self::select_action`] but leaves the projection cache alone. Meant
    /// for one-off queries such as Monte-Carlo policy evaluation, where caching
    /// every visited state would only cost memory.
    pub fn select_action_uncached(
        &mut self,
        table: &EpisodeValueTable,
        h: usize,
        state: &Point,
        reward_fn: &RewardFn,
    ) -> Result<(usize, QValue)> {
        let qs = (0..self.config.num_actions())
            .map(|a| self.q_with_reward(table, h, state, a, reward_fn(state, a), false))
            .collect::<Result<Vec<_>>>()?;
        Ok(argmax(&qs))
    }

    /// Builds `v_H, ..., v_1` over the buffered next states with `v_{H+1} = 0`.
    pub fn plan_episode(
        &mut self,
        episode: usize,
        reward_fn: &RewardFn,
    ) -> Result<EpisodeValueTable> {
        let horizon = self.config.horizon;
        let n = self.model.len();
        let beta = self.beta(episode);
        let mut table = EpisodeValueTable {
            episode,
            beta,
            n,
            values: vec![Vec::new(); horizon + 1],
            targets: vec![None; horizon + 1],
        };
        table.values[horizon] = vec![0.0; n];
        table.targets[horizon] = Some(self.model.project_targets(&table.values[horizon])?);

        // distinct next states; targets are evaluated once per distinct point
        let mut slot_of: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut distinct: Vec<Point> = Vec::new();
        let mut slots = Vec::with_capacity(n);
        for tr in self.model.buffer().iter() {
            let key = tr.next_state.key();
            let slot = *slot_of.entry(key).or_insert_with(|| {
                distinct.push(tr.next_state.clone());
                distinct.len() - 1
            });
            slots.push(slot);
        }

        let perturbation = self.config.target_perturbation;
        let cap = horizon as f64;
        for h in (1..=horizon).rev() {
            let mut v_distinct = Vec::with_capacity(distinct.len());
            for s in &distinct {
                let mut best = f64::NEG_INFINITY;
                for a in 0..self.config.num_actions() {
                    let mut r = reward_fn(s, a);
                    if let Some(p) = &perturbation {
                        r += p.offset(s, a);
                    }
                    best = best.max(self.q_with_reward(&table, h, s, a, r, true)?.q);
                }
                v_distinct.push(best.min(cap));
            }
            let v: Vec<f64> = slots.iter().map(|&i| v_distinct[i]).collect();
            if h > 1 {
                table.targets[h - 1] = Some(self.model.project_targets(&v)?);
            }
            table.values[h - 1] = v;
        }
        Ok(table)
    }

    /// Runs `H` greedy steps against `env` without touching the model.
    pub fn execute_episode<E: Environment + ?Sized>(
        &mut self,
        table: &EpisodeValueTable,
        env: &E,
        rng: &mut EnvRng,
    ) -> Result<PolicyTrace> {
        let reward_fn = |s: &Point, a: usize| env.reward(s, a);
        let mut state = env.reset();
        let mut steps = Vec::with_capacity(self.config.horizon);
        for h in 1..=self.config.horizon {
            let (action, q) = self.select_action(table, h, &state, &reward_fn)?;
            let (reward, next_state) = env.step(&state, action, rng)?;
            steps.push(TraceStep {
                step: h,
                state: std::mem::replace(&mut state, next_state.clone()),
                action,
                reward,
                next_state,
                q: q.q,
                bonus: q.bonus,
                variance: q.variance,
            });
        }
        Ok(PolicyTrace {
            episode: table.episode,
            steps,
        })
    }

    /// Appends the episode's transitions to the model.
    pub fn absorb(&mut self, trace: &PolicyTrace) -> Result<()> {
        for st in &trace.steps {
            self.model.append_transition(Transition {
                state: st.state.clone(),
                action: st.action,
                action_point: self.config.action_set[st.action].clone(),
                next_state: st.next_state.clone(),
                reward: st.reward,
                episode: trace.episode,
                step: st.step,
            })?;
        }
        Ok(())
    }

    /// Plan, act for `H` steps, then fold the new data into the model.
    pub fn run_episode<E: Environment + ?Sized>(
        &mut self,
        env: &E,
        episode: usize,
        rng: &mut EnvRng,
    ) -> Result<(EpisodeValueTable, PolicyTrace)> {
        let table = self.plan_episode(episode, &|s: &Point, a: usize| env.reward(s, a))?;
        let trace = self.execute_episode(&table, env, rng)?;
        self.absorb(&trace)?;
        Ok((table, trace))
    }
}

fn argmax(qs: &[QValue]) -> (usize, QValue) {
    let mut best = 0;
    for (i, q) in qs.iter().enumerate().skip(1) {
        if q.q > qs[best].q {
            best = i;
        }
    }
    (best, qs[best])
}
