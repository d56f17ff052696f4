//! Named experiment presets, one per hyperparameter table row plus the
//! inverse-problem variants.

use gpinn::optimize::{LbfgsSettings, OptimizerKind, RarConfig, Sampling, TrainConfig};
use gpinn::problems::{ProblemKind, ProblemOptions, ProblemSpec};

use crate::config::Method;

/// `(preset, depth, width, optimizer, lr, iterations)`.
pub const BUDGETS: [(&str, usize, usize, OptimizerKind, f64, u64); 7] = [
    ("3.1", 4, 20, OptimizerKind::Adam, 1e-3, 10_000),
    ("3.2.1", 4, 20, OptimizerKind::Adam, 1e-3, 20_000),
    ("3.2.2", 4, 20, OptimizerKind::Adam, 1e-4, 100_000),
    ("3.3.1", 4, 20, OptimizerKind::Adam, 1e-3, 50_000),
    ("3.3.2", 4, 20, OptimizerKind::Adam, 1e-4, 200_000),
    ("3.4.1", 4, 32, OptimizerKind::AdamThenLbfgs, 1e-3, 20_000),
    ("3.4.2", 5, 64, OptimizerKind::AdamThenLbfgs, 1e-3, 20_000),
];

pub const NAMES: [&str; 9] = ["3.1", "3.2.1", "3.2.2", "3.3.1", "3.3.1-k", "3.3.1-noisy", "3.3.2", "3.4.1", "3.4.2"];

/// Gradient weights of the Burgers and Allen–Cahn presets.
pub const BURGERS_W: f64 = 1e-4;
pub const ALLEN_CAHN_W: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub problem: ProblemKind,
    pub options: ProblemOptions,
    pub method: Method,
    pub w: f64,
    /// Weights already match `method` and `w`.
    pub train: TrainConfig,
    pub rar: Option<RarConfig>,
}

pub fn preset(name: &str) -> Option<Preset> {
    let name = *NAMES.iter().find(|n| **n == name)?;
    let row = name.split('-').next().unwrap_or(name);
    let &(_, depth, width, optimizer, lr, iterations) = BUDGETS.iter().find(|r| r.0 == row)?;

    let mut options = ProblemOptions::default();
    let mut rar = None;
    let (problem, method, w, n_residual) = match name {
        "3.1" => (ProblemKind::FuncApprox, Method::Gnn, 1.0, 15),
        "3.2.1" => (ProblemKind::Poisson1d, Method::Gpinn, 0.01, 20),
        "3.2.2" => (ProblemKind::DiffReactFwd, Method::Gpinn, 0.1, 40),
        "3.3.1" => (ProblemKind::Brinkman, Method::Gpinn, 0.1, 10),
        "3.3.1-k" => {
            options.infer_permeability = true;
            (ProblemKind::Brinkman, Method::Gpinn, 0.1, 10)
        }
        "3.3.1-noisy" => {
            options.infer_permeability = true;
            options.observations = Some(12);
            options.noise_std = 0.05;
            (ProblemKind::Brinkman, Method::Gpinn, 0.1, 15)
        }
        "3.3.2" => (ProblemKind::ReactRateInv, Method::Gpinn, 0.01, 10),
        "3.4.1" => {
            rar = Some(rar_config(10, 40));
            (ProblemKind::Burgers, Method::Gpinn, BURGERS_W, 1500)
        }
        "3.4.2" => {
            rar = Some(rar_config(30, 100));
            (ProblemKind::AllenCahn, Method::Gpinn, ALLEN_CAHN_W, 500)
        }
        _ => return None,
    };
    let dim = ProblemSpec::new(problem, &options).ok()?.dim();
    let snapshot_every = iterations / 20;
    Some(Preset {
        name,
        problem,
        options,
        method,
        w,
        train: TrainConfig {
            optimizer,
            lr,
            iterations,
            seed: 0,
            weights: method.weights(dim, w),
            depth,
            width,
            rate_depth: depth,
            rate_width: width,
            n_residual,
            n_boundary: 80,
            n_initial: 160,
            sampling: match problem {
                ProblemKind::FuncApprox => Sampling::Equispaced,
                ProblemKind::Burgers | ProblemKind::AllenCahn => Sampling::Uniform,
                _ => Sampling::Hammersley,
            },
            snapshot_every,
            log_every: snapshot_every / 10,
            lbfgs: LbfgsSettings::default(),
        },
        rar,
    })
}

fn rar_config(m: usize, rounds: usize) -> RarConfig {
    RarConfig {
        m,
        rounds,
        threshold: 0.0,
        candidates: 100_000,
        iterations_per_round: 2000,
        polish_iterations: 500,
    }
}
