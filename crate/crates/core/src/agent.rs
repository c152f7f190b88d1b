//! Batch-as-state deep Q-learning.
//!
//! A state is a window of `batch_size` consecutive records. The agent picks one
//! action (a class) per record, earns `+1`/`-1` depending on whether it matched
//! the label, and regresses `Q(s_i, a_i)` toward `r_i + gamma * max_a Q(s'_i, a)`
//! where `s'` is the following window. One network is trained online; there is
//! no replay buffer and no separate target network.

use std::io::Write;
use std::time::Instant;

use ndarray::{s, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ClassLabel, EncodedDataset};
use crate::nn::{
    argmax, default_layers, ActionTarget, Checkpoint, NnError, Optimizer, OptimizerKind, QNetwork,
    RngState,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch size {batch} exceeds the {records} available records")]
    BatchTooLarge { batch: usize, records: usize },
    #[error("training diverged at episode {episode}, iteration {iteration}: loss = {loss}")]
    Diverged {
        episode: usize,
        iteration: usize,
        loss: f64,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScheme {
    pub correct: f64,
    pub incorrect: f64,
}

/// Defaults to `+1` / `-0.1`. With ReLU outputs, a `-1` penalty drives every
/// output unit inactive during the early, mostly random episodes, after which
/// no gradient flows and the network predicts a single class.
impl Default for RewardScheme {
    fn default() -> Self {
        Self {
            correct: 1.0,
            incorrect: -0.1,
        }
    }
}

impl RewardScheme {
    pub fn symmetric() -> Self {
        Self {
            correct: 1.0,
            incorrect: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub num_episodes: usize,
    pub num_iterations: usize,
    pub batch_size: usize,
    pub epsilon_initial: f64,
    /// Multiplicative decay applied after every iteration.
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub rewards: RewardScheme,
    pub optimizer: OptimizerKind,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            num_episodes: 200,
            num_iterations: 100,
            batch_size: 500,
            epsilon_initial: 0.9,
            epsilon_decay: 0.99,
            epsilon_floor: 0.01,
            gamma: 0.001,
            learning_rate: 1e-3,
            seed: 0,
            rewards: RewardScheme::default(),
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |msg: String| Err(AgentError::InvalidHyperParams(msg));
        if self.num_iterations == 0 {
            return fail("num_iterations must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_initial) {
            return fail(format!("epsilon {} outside [0, 1]", self.epsilon_initial));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return fail(format!(
                "epsilon decay {} outside (0, 1]",
                self.epsilon_decay
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor) || self.epsilon_floor > self.epsilon_initial {
            return fail(format!(
                "epsilon floor {} must lie in [0, epsilon = {}]",
                self.epsilon_floor, self.epsilon_initial
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.rewards.correct.is_finite() && self.rewards.incorrect.is_finite()) {
            return fail("reward magnitudes must be finite".into());
        }
        Ok(())
    }

    /// Exploration rate in effect at global iteration `step` (0-based):
    /// `max(epsilon_initial * decay^step, floor)`.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        let k = step.min(i32::MAX as u64) as i32;
        (self.epsilon_initial * self.epsilon_decay.powi(k)).max(self.epsilon_floor)
    }
}

/// One multiplicative decay step, saturating at the floor.
pub fn decay_epsilon(epsilon: f64, hp: &HyperParams) -> f64 {
    (epsilon * hp.epsilon_decay).max(hp.epsilon_floor)
}

/// Epsilon-greedy per record: with probability `epsilon` a uniform action,
/// otherwise the argmax (ties to the lowest index). Exactly one uniform draw
/// per record is consumed before the optional random action.
pub fn select_actions<R: Rng + ?Sized>(
    q_values: ArrayView2<'_, f64>,
    epsilon: f64,
    rng: &mut R,
) -> Vec<usize> {
    let n_actions = q_values.ncols();
    q_values
        .rows()
        .into_iter()
        .map(|row| {
            if rng.random::<f64>() < epsilon {
                rng.random_range(0..n_actions)
            } else {
                argmax(row.iter().copied())
            }
        })
        .collect()
}

pub fn compute_rewards(
    actions: &[usize],
    labels: &[ClassLabel],
    scheme: &RewardScheme,
) -> Result<Vec<f64>, AgentError> {
    if actions.len() != labels.len() {
        return Err(AgentError::LengthMismatch {
            what: "actions vs labels",
            left: actions.len(),
            right: labels.len(),
        });
    }
    Ok(actions
        .iter()
        .zip(labels)
        .map(|(&a, l)| {
            if a == l.code() {
                scheme.correct
            } else {
                scheme.incorrect
            }
        })
        .collect())
}

fn row_max(row: ndarray::ArrayView1<'_, f64>) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `target_i = reward_i + gamma * max_a next_q[i, a]`.
pub fn compute_targets(
    rewards: &[f64],
    next_q: ArrayView2<'_, f64>,
    gamma: f64,
) -> Result<Vec<f64>, AgentError> {
    if next_q.nrows() != rewards.len() {
        return Err(AgentError::LengthMismatch {
            what: "rewards vs next-state rows",
            left: rewards.len(),
            right: next_q.nrows(),
        });
    }
    Ok(rewards
        .iter()
        .zip(next_q.rows())
        .map(|(r, row)| r + gamma * row_max(row))
        .collect())
}

const PREDICT_CHUNK: usize = 8192;

/// Greedy class per row.
pub fn predict(net: &QNetwork, features: ArrayView2<'_, f64>) -> Result<Vec<usize>, AgentError> {
    let mut out = Vec::with_capacity(features.nrows());
    // forward() validates the width; do it up front so empty inputs are checked too.
    if features.ncols() != net.input_width() {
        return Err(NnError::InputWidth {
            expected: net.input_width(),
            found: features.ncols(),
        }
        .into());
    }
    for chunk in features.axis_chunks_iter(Axis(0), PREDICT_CHUNK) {
        let q = net.forward(chunk)?;
        out.extend(q.rows().into_iter().map(|r| argmax(r.iter().copied())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub episode: usize,
    pub iteration: usize,
    pub loss: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub iterations: Vec<IterationLog>,
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingHistory {
    pub fn losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterations.iter().map(|i| i.loss)
    }

    pub fn epsilons(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterations.iter().map(|i| i.epsilon)
    }

    pub fn episode_rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.episodes.iter().map(|e| e.cumulative_reward)
    }

    /// `episode,iteration,loss,epsilon`
    pub fn write_loss_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "episode,iteration,loss,epsilon")?;
        for it in &self.iterations {
            writeln!(
                w,
                "{},{},{},{}",
                it.episode, it.iteration, it.loss, it.epsilon
            )?;
        }
        Ok(())
    }

    /// `episode,cumulative_reward`
    pub fn write_reward_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "episode,cumulative_reward")?;
        for ep in &self.episodes {
            writeln!(w, "{},{}", ep.episode, ep.cumulative_reward)?;
        }
        Ok(())
    }

    /// `episode,wall_clock_seconds`. Kept apart from the other histories,
    /// which are deterministic.
    pub fn write_timing_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "episode,wall_clock_seconds")?;
        for ep in &self.episodes {
            writeln!(w, "{},{:.6}", ep.episode, ep.wall_clock_seconds)?;
        }
        Ok(())
    }

    pub fn total_wall_clock_seconds(&self) -> f64 {
        self.episodes.iter().map(|e| e.wall_clock_seconds).sum()
    }
}

/// Everything that happened in one training iteration.
#[derive(Debug)]
pub struct IterationRecord<'a> {
    pub episode: usize,
    pub iteration: usize,
    /// Global iteration index, also the epsilon schedule position.
    pub step: u64,
    pub cursor: usize,
    pub epsilon: f64,
    pub actions: &'a [usize],
    pub rewards: &'a [f64],
    pub next_q_max: &'a [f64],
    pub targets: &'a [f64],
    pub loss: f64,
}

/// Owns the network, optimizer and exploration RNG of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    hp: HyperParams,
    network: QNetwork,
    optimizer: Optimizer,
    rng: ChaCha8Rng,
    step: u64,
    history: TrainingHistory,
}

const EXPLORATION_STREAM: u64 = 1;

impl Trainer {
    pub fn new(hp: HyperParams, input_width: usize) -> Result<Self, AgentError> {
        hp.validate()?;
        let network = QNetwork::new(&default_layers(input_width), hp.seed)?;
        let optimizer = Optimizer::new(hp.optimizer, &network);
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        rng.set_stream(EXPLORATION_STREAM);
        Ok(Self {
            hp,
            network,
            optimizer,
            rng,
            step: 0,
            history: TrainingHistory::default(),
        })
    }

    /// Continue from a checkpoint; the epsilon schedule resumes at its step.
    pub fn resume(hp: HyperParams, checkpoint: Checkpoint) -> Result<Self, AgentError> {
        hp.validate()?;
        let rng = match checkpoint.rng {
            Some(state) => state.restore(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
                rng.set_stream(EXPLORATION_STREAM);
                rng
            }
        };
        Ok(Self {
            hp,
            network: checkpoint.network,
            optimizer: checkpoint.optimizer,
            rng,
            step: checkpoint.step,
            history: TrainingHistory::default(),
        })
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn network(&self) -> &QNetwork {
        &self.network
    }

    pub fn history(&self) -> &TrainingHistory {
        &self.history
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            network: self.network.clone(),
            optimizer: self.optimizer.clone(),
            rng: Some(RngState::capture(&self.rng)),
            step: self.step,
        }
    }

    pub fn into_parts(self) -> (QNetwork, TrainingHistory) {
        (self.network, self.history)
    }

    fn check_dataset(&self, data: &EncodedDataset) -> Result<(), AgentError> {
        if data.is_empty() {
            return Err(AgentError::EmptyDataset);
        }
        if self.hp.batch_size > data.len() {
            return Err(AgentError::BatchTooLarge {
                batch: self.hp.batch_size,
                records: data.len(),
            });
        }
        if data.width() != self.network.input_width() {
            return Err(NnError::InputWidth {
                expected: self.network.input_width(),
                found: data.width(),
            }
            .into());
        }
        Ok(())
    }

    /// Runs all configured episodes.
    pub fn run(&mut self, data: &EncodedDataset) -> Result<(), AgentError> {
        self.run_with(data, |_| {})
    }

    pub fn run_with<F>(&mut self, data: &EncodedDataset, mut observe: F) -> Result<(), AgentError>
    where
        F: FnMut(&IterationRecord<'_>),
    {
        for _ in 0..self.hp.num_episodes {
            self.run_episode_with(data, &mut observe)?;
        }
        Ok(())
    }

    /// One episode: the cursor restarts at record 0 and walks
    /// `num_iterations` windows, wrapping at the end of the data. On error the
    /// network and optimizer keep their last good values.
    pub fn run_episode_with<F>(
        &mut self,
        data: &EncodedDataset,
        observe: &mut F,
    ) -> Result<(), AgentError>
    where
        F: FnMut(&IterationRecord<'_>),
    {
        self.check_dataset(data)?;
        let n = data.len();
        let features = data.features();
        let labels = data.labels();
        let episode = self.history.episodes.len();
        let started = Instant::now();
        let mut cursor = 0;
        let mut episode_reward = 0.0;

        for iteration in 0..self.hp.num_iterations {
            let end = (cursor + self.hp.batch_size).min(n);
            let len = end - cursor;
            let pass = self
                .network
                .forward_pass(features.slice(s![cursor..end, ..]))?;

            let epsilon = self.hp.epsilon_at(self.step);
            let actions = select_actions(pass.output().view(), epsilon, &mut self.rng);
            let rewards = compute_rewards(&actions, &labels[cursor..end], &self.hp.rewards)?;

            // s' pairs record i of this window with record i of the next one.
            let next_start = end % n;
            let next_q = if next_start + len <= n {
                self.network
                    .forward(features.slice(s![next_start..next_start + len, ..]))?
            } else {
                let idx: Vec<usize> = (0..len).map(|i| (next_start + i) % n).collect();
                self.network
                    .forward(features.select(Axis(0), &idx).view())?
            };
            let next_q_max: Vec<f64> = next_q.rows().into_iter().map(row_max).collect();
            let targets = compute_targets(&rewards, next_q.view(), self.hp.gamma)?;

            let pairs: Vec<ActionTarget> = actions
                .iter()
                .zip(&targets)
                .map(|(&action, &target)| ActionTarget { action, target })
                .collect();
            let (loss, grads) = self.network.backward_from(&pass, &pairs)?;
            if !loss.is_finite() {
                return Err(AgentError::Diverged {
                    episode,
                    iteration,
                    loss,
                });
            }
            self.optimizer
                .apply_update(&mut self.network, &grads, self.hp.learning_rate)?;

            observe(&IterationRecord {
                episode,
                iteration,
                step: self.step,
                cursor,
                epsilon,
                actions: &actions,
                rewards: &rewards,
                next_q_max: &next_q_max,
                targets: &targets,
                loss,
            });
            self.history.iterations.push(IterationLog {
                episode,
                iteration,
                loss,
                epsilon,
            });
            episode_reward += rewards.iter().sum::<f64>();
            self.step += 1;
            cursor = next_start;
        }

        self.history.episodes.push(EpisodeLog {
            episode,
            cumulative_reward: episode_reward,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        });
        Ok(())
    }
}

/// Trains a fresh default-architecture network on `dataset`.
pub fn train(
    dataset: &EncodedDataset,
    hp: &HyperParams,
) -> Result<(QNetwork, TrainingHistory), AgentError> {
    let mut trainer = Trainer::new(hp.clone(), dataset.width())?;
    if hp.num_episodes > 0 {
        trainer.check_dataset(dataset)?;
    }
    trainer.run(dataset)?;
    Ok(trainer.into_parts())
}
