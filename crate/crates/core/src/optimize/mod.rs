//! Optimisers, the training loop and residual-based adaptive refinement.

pub mod adam;
pub mod checkpoint;
pub mod lbfgs;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::{LossError, LossTerms, LossWeights};
use crate::metrics::{GridMetrics, MetricsError};
use crate::network::NetworkError;
use crate::problems::{ProblemError, ProblemKind};

pub use adam::{adam_step, Adam};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use lbfgs::{lbfgs_minimize, LbfgsReport, LbfgsSettings, LbfgsStop};
pub use train::{initial_points, rar_refine, select_top, train, RunOptions};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("gradient entry {index} is {value}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "training diverged at iteration {iteration} after the learning rate was already halved; \
         last good state is iteration {last_good}{}",
        checkpoint.as_ref().map(|p| format!(" ({})", p.display())).unwrap_or_default()
    )]
    Diverged {
        iteration: u64,
        last_good: u64,
        checkpoint: Option<PathBuf>,
    },
    #[error("halted at iteration {iteration}; resume from {}", checkpoint.display())]
    Halted { iteration: u64, checkpoint: PathBuf },
    #[error("checkpoint was written by a different configuration")]
    CheckpointMismatch,
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    /// Adam for the configured iterations, then L-BFGS until it stops.
    AdamThenLbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// I.i.d. uniform over the domain.
    Uniform,
    /// Equispaced on a 1D domain, endpoints included.
    Equispaced,
    /// Deterministic low-discrepancy Hammersley set.
    Hammersley,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Adam iterations of the initial training.
    pub iterations: u64,
    pub seed: u64,
    pub weights: LossWeights,
    /// Weight layers of the u-network.
    pub depth: usize,
    pub width: usize,
    /// Rate network (react-rate-inv only).
    pub rate_depth: usize,
    pub rate_width: usize,
    pub n_residual: usize,
    /// Boundary points; split across the walls of space-time problems.
    pub n_boundary: usize,
    /// Initial-condition points of space-time problems.
    pub n_initial: usize,
    pub sampling: Sampling,
    pub snapshot_every: u64,
    pub log_every: u64,
    pub lbfgs: LbfgsSettings,
}

impl TrainConfig {
    pub fn validate(&self, dim: usize) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive and finite");
        }
        if self.depth == 0 || self.width == 0 || self.rate_depth == 0 || self.rate_width == 0 {
            return bad("network depth and width must be at least 1");
        }
        if self.n_residual == 0 {
            return bad("n_residual must be at least 1");
        }
        if self.snapshot_every == 0 || self.log_every == 0 {
            return bad("snapshot_every and log_every must be at least 1");
        }
        if self.lbfgs.history == 0 {
            return bad("lbfgs.history must be at least 1");
        }
        if self.sampling == Sampling::Equispaced && (dim != 1 || self.n_residual < 2) {
            return bad("equispaced sampling needs a 1D domain and at least 2 points");
        }
        self.weights.validate(dim).map_err(|e| TrainError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RarConfig {
    /// Points added per round.
    pub m: usize,
    pub rounds: usize,
    /// Stop once the mean `|f|` over the candidates falls below this (0 disables).
    #[serde(default)]
    pub threshold: f64,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    /// Adam iterations after each addition.
    #[serde(default = "default_round_iterations")]
    pub iterations_per_round: u64,
    /// L-BFGS iteration cap after each round's Adam phase.
    #[serde(default = "default_polish")]
    pub polish_iterations: usize,
}

fn default_candidates() -> usize {
    100_000
}

fn default_round_iterations() -> u64 {
    2000
}

fn default_polish() -> usize {
    500
}

impl RarConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.m == 0 {
            return Err(TrainError::Config("rar.m must be at least 1".into()));
        }
        if self.candidates < 10 * self.m {
            return Err(TrainError::Config(format!(
                "rar.candidates ({}) must be at least 10 * m ({})",
                self.candidates,
                10 * self.m
            )));
        }
        if !(self.threshold >= 0.0) {
            return Err(TrainError::Config("rar.threshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: u64,
    pub total: f64,
    pub terms: LossTermsRecord,
}

/// Serializable copy of [`LossTerms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTermsRecord {
    pub f: f64,
    pub g: Vec<Option<f64>>,
    pub b: Option<f64>,
    pub data: Option<f64>,
}

impl From<&LossTerms> for LossTermsRecord {
    fn from(t: &LossTerms) -> Self {
        LossTermsRecord {
            f: t.f,
            g: t.g.clone(),
            b: t.b,
            data: t.data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: u64,
    pub round: usize,
    pub n_residual: usize,
    pub loss: LossRecord,
    pub metrics: GridMetrics,
    /// Inferred parameter values.
    pub lambda: Vec<f64>,
    pub lambda_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based refinement round.
    pub round: usize,
    pub iteration: u64,
    pub mean_abs_candidate_residual: f64,
    pub added: Vec<Vec<f64>>,
    pub n_residual: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPoint {
    pub coords: Vec<f64>,
    /// 0 for the initial set, otherwise the refinement round that added it.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEvent {
    pub iteration: u64,
    pub rolled_back_to: u64,
    pub new_lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem: ProblemKind,
    pub seed: u64,
    pub config: TrainConfig,
    pub rar: Option<RarConfig>,
    pub loss_history: Vec<LossRecord>,
    /// Strictly increasing in iteration.
    pub snapshots: Vec<Snapshot>,
    pub rounds: Vec<RoundRecord>,
    pub points: Vec<TrainingPoint>,
    pub lbfgs: Vec<LbfgsSummary>,
    pub divergence: Vec<DivergenceEvent>,
    pub stopped_early: bool,
    pub final_params: Vec<f64>,
    pub wall_clock_seconds: f64,
}

impl RunResult {
    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsSummary {
    pub round: usize,
    pub start_iteration: u64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: LbfgsStop,
    pub f: f64,
}
