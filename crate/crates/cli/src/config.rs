//! Experiment configuration files.
//!
//! A config is TOML with an optional `preset` and the sections `problem`,
//! `method`, `train`, `rar`, `sweep` and `eval`. Every field is optional
//! when a preset supplies it; fields given in the file override the preset.

use std::fmt;
use std::path::Path;

use gpinn::loss::LossWeights;
use gpinn::optimize::{LbfgsSettings, OptimizerKind, RarConfig, Sampling, TrainConfig};
use gpinn::problems::{ProblemKind, ProblemOptions, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::presets::{self, Preset};

/// Seeds per cell when neither the config nor `--seeds` lists any.
pub const DEFAULT_SWEEP_SEEDS: u64 = 10;

/// A config that failed to parse or validate, with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pinn,
    Gpinn,
    /// Plain regression network (function approximation only).
    Nn,
    /// Gradient-enhanced regression network.
    Gnn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pinn => "pinn",
            Method::Gpinn => "gpinn",
            Method::Nn => "nn",
            Method::Gnn => "gnn",
        }
    }

    pub fn is_gradient_enhanced(self) -> bool {
        matches!(self, Method::Gpinn | Method::Gnn)
    }

    pub fn weights(self, dim: usize, w: f64) -> LossWeights {
        if self.is_gradient_enhanced() {
            LossWeights::gpinn(dim, w)
        } else {
            LossWeights::pinn(dim)
        }
    }

    fn fits(self, problem: ProblemKind) -> bool {
        matches!(self, Method::Nn | Method::Gnn) == (problem == ProblemKind::FuncApprox)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output directory name under `--out`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rar: Option<RarSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<ProblemKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infer_permeability: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Method>,
    /// Gradient-loss weight on every axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    /// Per-axis gradient weights; overrides `w`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_i: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_residual: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_boundary: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_initial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lbfgs: Option<LbfgsSettings>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RarSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations_per_round: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polish_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_residual: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub w: Vec<f64>,
    /// Empty means `DEFAULT_SWEEP_SEEDS` seeds counting up from `train.seed`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Run every cell with refinement.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rar: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// `[points_1d, points_per_axis_2d]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    /// Defaults to `train.snapshot_every`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
    /// Continue from an existing checkpoint (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "<root>".to_string() } else { path };
            ConfigError::new(&field, e.into_inner().to_string().trim_end())
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(Self::from_toml(&text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies the preset and every override, then validates.
    pub fn resolve(&self) -> Result<Experiment, ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(ConfigError::new("name", "must be a non-empty directory name"));
        }
        let preset: Option<Preset> = match &self.preset {
            Some(p) => Some(presets::preset(p).ok_or_else(|| {
                ConfigError::new("preset", format!("unknown preset `{p}` (known: {})", presets::NAMES.join(", ")))
            })?),
            None => None,
        };
        let ps = self.problem.clone().unwrap_or_default();
        let problem = ps
            .name
            .or(preset.as_ref().map(|p| p.problem))
            .ok_or_else(|| ConfigError::new("problem.name", "required without a preset"))?;
        let base = preset.as_ref().map(|p| p.options.clone()).unwrap_or_default();
        let options = ProblemOptions {
            infer_permeability: ps.infer_permeability.unwrap_or(base.infer_permeability),
            observations: ps.observations.or(base.observations),
            noise_std: ps.noise_std.unwrap_or(base.noise_std),
            initial_guess: ps.initial_guess.unwrap_or(base.initial_guess),
        };
        let spec = ProblemSpec::new(problem, &options).map_err(|e| ConfigError::new("problem", e.to_string()))?;
        let dim = spec.dim();

        let ms = self.method.clone().unwrap_or_default();
        let method = ms
            .kind
            .or(preset.as_ref().map(|p| p.method))
            .ok_or_else(|| ConfigError::new("method.kind", "required without a preset"))?;
        if !method.fits(problem) {
            return Err(ConfigError::new(
                "method.kind",
                format!("`{method}` does not apply to {problem}: use nn/gnn for func-approx and pinn/gpinn otherwise"),
            ));
        }
        let w = match ms.w.or(preset.as_ref().map(|p| p.w)) {
            Some(w) => w,
            None if method.is_gradient_enhanced() && ms.w_axes.is_none() => {
                return Err(ConfigError::new("method.w", "required for a gradient-enhanced method"))
            }
            None => 0.0,
        };
        check_weight("method.w", w)?;
        let mut weights = method.weights(dim, w);
        if let Some(axes) = &ms.w_axes {
            if axes.len() != dim {
                return Err(ConfigError::new("method.w_axes", format!("needs {dim} entries, got {}", axes.len())));
            }
            for &a in axes {
                check_weight("method.w_axes", a)?;
            }
            if method.is_gradient_enhanced() {
                weights.w_g = axes.clone();
            }
        }
        if let Some(v) = ms.w_b {
            check_weight("method.w_b", v)?;
            weights.w_b = v;
        }
        if let Some(v) = ms.w_i {
            check_weight("method.w_i", v)?;
            weights.w_i = v;
        }

        let mut train = preset.as_ref().map(|p| p.train.clone()).unwrap_or_else(|| default_train(problem));
        train.weights = weights;
        if let Some(t) = &self.train {
            t.apply(&mut train);
        }
        train.validate(dim).map_err(|e| ConfigError::new("train", e.to_string()))?;

        let rar = match (&self.rar, preset.as_ref().and_then(|p| p.rar.clone())) {
            (None, base) => base,
            (Some(r), base) => Some(r.resolve(base)?),
        };
        if let Some(r) = &rar {
            r.validate().map_err(|e| ConfigError::new("rar", e.to_string()))?;
        }

        let sweep = self.sweep.clone().unwrap_or_default();
        for m in &sweep.methods {
            if !m.fits(problem) {
                return Err(ConfigError::new("sweep.methods", format!("`{m}` does not apply to {problem}")));
            }
        }
        if sweep.n_residual.iter().any(|&n| n == 0) {
            return Err(ConfigError::new("sweep.n_residual", "point counts must be at least 1"));
        }
        for &v in &sweep.w {
            check_weight("sweep.w", v)?;
        }
        if sweep.rar && rar.is_none() {
            return Err(ConfigError::new("sweep.rar", "needs a [rar] section or a refinement preset"));
        }

        let ev = self.eval.clone().unwrap_or_default();
        let checkpoint_every = ev.checkpoint_every.unwrap_or(train.snapshot_every);
        if checkpoint_every % train.snapshot_every != 0 {
            return Err(ConfigError::new("eval.checkpoint_every", "must be a multiple of train.snapshot_every"));
        }
        if let Some([n1, n2]) = ev.grid {
            if n1 < 2 || n2 < 2 {
                return Err(ConfigError::new("eval.grid", "needs at least 2 points per axis"));
            }
        }
        Ok(Experiment {
            name: self.name.clone(),
            problem,
            options,
            method,
            w,
            train,
            rar,
            w_axes: ms.w_axes.clone().filter(|_| method.is_gradient_enhanced()),
            sweep,
            grid: ev.grid,
            checkpoint_every,
            resume: ev.resume.unwrap_or(true),
        })
    }
}

fn check_weight(field: &str, w: f64) -> Result<(), ConfigError> {
    if w >= 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("weights must be finite and non-negative, got {w}")))
    }
}

/// Training settings used when no preset is named.
pub fn default_train(problem: ProblemKind) -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::Adam,
        lr: 1e-3,
        iterations: 10_000,
        seed: 0,
        weights: LossWeights::pinn(1),
        depth: 4,
        width: 20,
        rate_depth: 4,
        rate_width: 20,
        n_residual: 20,
        n_boundary: 80,
        n_initial: 160,
        sampling: if problem == ProblemKind::FuncApprox { Sampling::Equispaced } else { Sampling::Uniform },
        snapshot_every: 500,
        log_every: 50,
        lbfgs: LbfgsSettings::default(),
    }
}

impl TrainSection {
    fn apply(&self, t: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { t.$f = v; } )* };
        }
        set!(optimizer, lr, iterations, seed, depth, width, rate_depth, rate_width, n_residual, n_boundary, n_initial,
            sampling, snapshot_every, log_every, lbfgs);
    }
}

impl RarSection {
    fn resolve(&self, base: Option<RarConfig>) -> Result<RarConfig, ConfigError> {
        let (m, rounds) = match &base {
            Some(b) => (self.m.unwrap_or(b.m), self.rounds.unwrap_or(b.rounds)),
            None => (
                self.m.ok_or_else(|| ConfigError::new("rar.m", "required without a refinement preset"))?,
                self.rounds.ok_or_else(|| ConfigError::new("rar.rounds", "required without a refinement preset"))?,
            ),
        };
        let b = base.unwrap_or(RarConfig {
            m,
            rounds,
            threshold: 0.0,
            candidates: 100_000,
            iterations_per_round: 2000,
            polish_iterations: 500,
        });
        Ok(RarConfig {
            m,
            rounds,
            threshold: self.threshold.unwrap_or(b.threshold),
            candidates: self.candidates.unwrap_or(b.candidates),
            iterations_per_round: self.iterations_per_round.unwrap_or(b.iterations_per_round),
            polish_iterations: self.polish_iterations.unwrap_or(b.polish_iterations),
        })
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub problem: ProblemKind,
    pub options: ProblemOptions,
    pub method: Method,
    pub w: f64,
    pub train: TrainConfig,
    pub rar: Option<RarConfig>,
    /// Per-axis gradient weights from `method.w_axes`.
    pub w_axes: Option<Vec<f64>>,
    pub sweep: SweepSection,
    pub grid: Option<[usize; 2]>,
    pub checkpoint_every: u64,
    pub resume: bool,
}

/// One point of the sweep grid, run once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub method: Method,
    pub n_residual: usize,
    /// Zero for methods without a gradient loss.
    pub w: f64,
    pub train: TrainConfig,
}

impl Experiment {
    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec::new(self.problem, &self.options).expect("validated in resolve")
    }

    /// The configured method at the configured point count.
    pub fn base_cell(&self) -> Cell {
        self.cell(self.method, self.train.n_residual, self.w)
    }

    pub fn cell(&self, method: Method, n_residual: usize, w: f64) -> Cell {
        let dim = self.spec().dim();
        let w = if method.is_gradient_enhanced() { w } else { 0.0 };
        let mut train = self.train.clone();
        train.n_residual = n_residual;
        train.weights.w_g = match &self.w_axes {
            Some(axes) if method.is_gradient_enhanced() && w == self.w => axes.clone(),
            _ => method.weights(dim, w).w_g,
        };
        let name = if method.is_gradient_enhanced() {
            format!("{method}-n{n_residual}-w{w}")
        } else {
            format!("{method}-n{n_residual}")
        };
        Cell {
            name,
            method,
            n_residual,
            w,
            train,
        }
    }

    /// Cross product of the sweep axes; unset axes take the configured value.
    pub fn cells(&self) -> Vec<Cell> {
        let methods = if self.sweep.methods.is_empty() { vec![self.method] } else { self.sweep.methods.clone() };
        let ns = if self.sweep.n_residual.is_empty() { vec![self.train.n_residual] } else { self.sweep.n_residual.clone() };
        let ws = if self.sweep.w.is_empty() { vec![self.w] } else { self.sweep.w.clone() };
        let mut out = Vec::new();
        for &m in &methods {
            for &n in &ns {
                if m.is_gradient_enhanced() {
                    for &w in &ws {
                        out.push(self.cell(m, n, w));
                    }
                } else {
                    out.push(self.cell(m, n, 0.0));
                }
            }
        }
        out
    }

    /// Seeds for this invocation: `--seeds`, then `sweep.seeds`, then `fallback`
    /// seeds counting up from `train.seed`.
    pub fn seeds(&self, cli: Option<&[u64]>, fallback: u64) -> Vec<u64> {
        match cli {
            Some(s) if !s.is_empty() => s.to_vec(),
            _ if !self.sweep.seeds.is_empty() => self.sweep.seeds.clone(),
            _ => (0..fallback).map(|i| self.train.seed + i).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Experiment, ConfigError> {
        ExperimentConfig::from_toml(s)?.resolve()
    }

    #[test]
    fn preset_only_config() {
        let e = parse("name = \"p\"\npreset = \"3.2.1\"\n").unwrap();
        assert_eq!(e.problem, ProblemKind::Poisson1d);
        assert_eq!(e.method, Method::Gpinn);
        assert_eq!(e.train.weights.w_g, vec![0.01]);
        assert_eq!((e.train.depth, e.train.width, e.train.lr, e.train.iterations), (4, 20, 1e-3, 20_000));
        assert_eq!(e.train.n_residual, 20);
        assert_eq!(e.checkpoint_every, e.train.snapshot_every);
        assert!(e.resume);
    }

    #[test]
    fn overrides_apply_on_top_of_the_preset() {
        let e = parse(
            r#"
name = "x"
preset = "3.3.1"
[problem]
infer_permeability = true
[method]
kind = "pinn"
[train]
iterations = 1000
lr = 5e-4
"#,
        )
        .unwrap();
        assert!(e.options.infer_permeability);
        assert_eq!(e.train.weights.w_g, vec![0.0]);
        assert_eq!(e.train.iterations, 1000);
        assert_eq!(e.train.lr, 5e-4);
        assert_eq!(e.train.width, 20);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("name = \"x\"\n[problem]\nname = \"heat\"\n", "problem.name"),
            ("name = \"x\"\npreset = \"9.9\"\n", "preset"),
            ("name = \"x\"\npreset = \"3.2.1\"\n[train]\nlrr = 1.0\n", "train.lrr"),
            ("name = \"x\"\npreset = \"3.2.1\"\n[train]\nlr = \"fast\"\n", "train.lr"),
            ("name = \"x\"\npreset = \"3.2.1\"\n[method]\nkind = \"gnn\"\n", "method.kind"),
            ("name = \"x\"\npreset = \"3.2.1\"\n[method]\nw = -1.0\n", "method.w"),
            ("name = \"x\"\npreset = \"3.2.1\"\n[rar]\nm = 10\n", "rar.rounds"),
            ("name = \"x\"\npreset = \"3.4.1\"\n[rar]\ncandidates = 5\n", "rar"),
            ("name = \"x\"\npreset = \"3.2.1\"\n[train]\nlr = 0.0\n", "train"),
            ("name = \"x\"\n", "problem.name"),
        ];
        for (text, field) in cases {
            let err = parse(text).unwrap_err();
            assert_eq!(err.field, field, "{text}: {err}");
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let text = r#"
name = "sweep"
preset = "3.2.1"
[problem]
name = "poisson-1d"
initial_guess = 0.5
[method]
kind = "gpinn"
w = 0.01
w_axes = [0.02]
[train]
iterations = 123
lr = 0.0001
sampling = "uniform"
optimizer = "adam-then-lbfgs"
[train.lbfgs]
history = 10
max_iterations = 7
grad_tol = 1e-9
rel_tol = 1e-13
[rar]
m = 2
rounds = 3
threshold = 1e-3
[sweep]
methods = ["pinn", "gpinn"]
n_residual = [10, 20]
w = [0.0001, 0.1, 3.3333333333333335]
seeds = [4, 5]
rar = true
[eval]
grid = [101, 11]
checkpoint_every = 12
resume = false
"#;
        let a = ExperimentConfig::from_toml(text).unwrap();
        let b = ExperimentConfig::from_toml(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_toml(), b.to_toml());
    }

    #[test]
    fn cells_cover_the_axes() {
        let e = parse(
            r#"
name = "s"
preset = "3.2.1"
[sweep]
methods = ["pinn", "gpinn"]
n_residual = [10, 20]
w = [0.01, 1.0]
"#,
        )
        .unwrap();
        let names: Vec<String> = e.cells().into_iter().map(|c| c.name).collect();
        assert_eq!(
            names,
            ["pinn-n10", "pinn-n20", "gpinn-n10-w0.01", "gpinn-n10-w1", "gpinn-n20-w0.01", "gpinn-n20-w1"]
        );
        let c = e.cell(Method::Gpinn, 15, 1.0);
        assert_eq!(c.train.weights.w_g, vec![1.0]);
        assert_eq!(c.train.n_residual, 15);
        assert_eq!(e.cell(Method::Pinn, 15, 1.0).train.weights.w_g, vec![0.0]);
    }

    #[test]
    fn seed_defaults() {
        let mut e = parse("name = \"s\"\npreset = \"3.2.1\"\n[train]\nseed = 7\n").unwrap();
        assert_eq!(e.seeds(None, DEFAULT_SWEEP_SEEDS), (7..17).collect::<Vec<_>>());
        assert_eq!(e.seeds(Some(&[]), 1), vec![7]);
        assert_eq!(e.seeds(Some(&[1, 2]), 10), vec![1, 2]);
        e.sweep.seeds = vec![9];
        assert_eq!(e.seeds(None, 10), vec![9]);
    }
}
