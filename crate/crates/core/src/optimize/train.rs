use std::path::PathBuf;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loss::compiled::PackedSets;
use crate::loss::{CompiledLoss, LossEval, PointSets};
use crate::metrics::{sample_equispaced, sample_hammersley, sample_uniform, sample_uniform_with, Evaluator, Probe, TestGrid};
use crate::model::{layer_sizes, ModelParams};
use crate::problems::ProblemSpec;
use crate::rng::{stream, Stream};
use crate::sum::tree_sum;

use super::{
    lbfgs_minimize, Adam, Checkpoint, DivergenceEvent, LbfgsSettings, LbfgsSummary, LossRecord, OptimizeError,
    OptimizerKind, RarConfig, RoundRecord, RunResult, Sampling, Snapshot, TrainConfig, TrainError, TrainingPoint,
};

/// Where a run reads and writes files.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Reference-solution cache directory.
    pub cache: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint every this many iterations (a multiple of `snapshot_every`;
    /// 0 writes only at round boundaries and at the end).
    pub checkpoint_every: u64,
    /// Continue from `checkpoint` when it exists.
    pub resume: bool,
    /// Test-grid resolution `[points_1d, points_per_axis_2d]`; defaults to the standard grid.
    pub grid: Option<[usize; 2]>,
    /// Stop with [`TrainError::Halted`] at the first checkpoint at or after this iteration.
    pub halt_at: Option<u64>,
}

/// The training points before any refinement.
pub fn initial_points(spec: &ProblemSpec, cfg: &TrainConfig) -> Result<PointSets, TrainError> {
    let residual = match cfg.sampling {
        Sampling::Uniform => sample_uniform(&spec.domain, cfg.n_residual, cfg.seed),
        Sampling::Hammersley => sample_hammersley(&spec.domain, cfg.n_residual),
        Sampling::Equispaced => sample_equispaced(spec.domain.lower[0], spec.domain.upper[0], cfg.n_residual)?
            .into_iter()
            .map(|x| vec![x])
            .collect(),
    };
    let boundary = if spec.uses_boundary_loss() && !spec.ansatz.is_hard_constraint() {
        spec.boundary_points(cfg.n_boundary, cfg.n_initial)
    } else {
        Vec::new()
    };
    let observations = if spec.is_inverse() { spec.observations(cfg.seed)? } else { Vec::new() };
    Ok(PointSets {
        residual,
        boundary,
        observations,
    })
}

/// Indices of the `m` largest values, largest first; ties go to the lower index.
pub fn select_top(values: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

pub fn train(spec: &ProblemSpec, cfg: &TrainConfig, opts: &RunOptions) -> Result<RunResult, TrainError> {
    run(spec, cfg, None, opts)
}

pub fn rar_refine(spec: &ProblemSpec, cfg: &TrainConfig, rar: &RarConfig, opts: &RunOptions) -> Result<RunResult, TrainError> {
    rar.validate()?;
    run(spec, cfg, Some(rar), opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Echo {
    spec: String,
    config: TrainConfig,
    rar: Option<RarConfig>,
    grid: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Progress {
    echo: Echo,
    loss_history: Vec<LossRecord>,
    snapshots: Vec<Snapshot>,
    rounds: Vec<RoundRecord>,
    lbfgs: Vec<LbfgsSummary>,
    divergence: Vec<DivergenceEvent>,
    stopped_early: bool,
    elapsed: f64,
}

#[derive(Clone)]
struct Good {
    params: Vec<f64>,
    adam: Adam,
    iteration: u64,
    phase_iter: u64,
}

struct State {
    params: Vec<f64>,
    adam: Adam,
    iteration: u64,
    round: usize,
    phase_iter: u64,
    lr_halved: bool,
    finished: bool,
    points: Vec<TrainingPoint>,
    rng: ChaCha8Rng,
    progress: Progress,
    good: Good,
}

impl State {
    fn mark_good(&mut self) {
        self.good = Good {
            params: self.params.clone(),
            adam: self.adam.clone(),
            iteration: self.iteration,
            phase_iter: self.phase_iter,
        };
    }
}

struct Ctx<'a> {
    spec: &'a ProblemSpec,
    cfg: &'a TrainConfig,
    opts: &'a RunOptions,
    loss: CompiledLoss,
    evaluator: Evaluator,
    base: PointSets,
    started: Instant,
}

fn run(spec: &ProblemSpec, cfg: &TrainConfig, rar: Option<&RarConfig>, opts: &RunOptions) -> Result<RunResult, TrainError> {
    cfg.validate(spec.dim())?;
    if opts.checkpoint_every > 0 && opts.checkpoint_every % cfg.snapshot_every != 0 {
        return Err(TrainError::Config("checkpoint_every must be a multiple of snapshot_every".into()));
    }
    let started = Instant::now();
    let u_sizes = layer_sizes(spec.dim(), cfg.depth, cfg.width);
    let k_sizes = layer_sizes(1, cfg.rate_depth, cfg.rate_width);
    let init = ModelParams::init(spec, &u_sizes, &k_sizes, cfg.seed)?;
    let loss = CompiledLoss::new(spec, &init, &cfg.weights)?;
    let grid = match opts.grid {
        Some([n1, n2]) => TestGrid::with_resolution(spec, n1, n2, opts.cache.as_deref())?,
        None => TestGrid::new(spec, opts.cache.as_deref())?,
    };
    let evaluator = Evaluator::new(spec, &init, grid)?;
    let base = initial_points(spec, cfg)?;
    let echo = Echo {
        spec: format!("{spec:?}"),
        config: cfg.clone(),
        rar: rar.cloned(),
        grid: opts.grid,
    };

    let resumed = match (&opts.checkpoint, opts.resume) {
        (Some(path), true) if path.exists() => Some(Checkpoint::load(path)?),
        _ => None,
    };
    let mut st = match resumed {
        Some(c) => restore(c, &echo, spec.dim())?,
        None => {
            let params = init.flatten();
            let adam = Adam::new(params.len(), cfg.lr);
            let mut st = State {
                good: Good {
                    params: params.clone(),
                    adam: adam.clone(),
                    iteration: 0,
                    phase_iter: 0,
                },
                params,
                adam,
                iteration: 0,
                round: 0,
                phase_iter: 0,
                lr_halved: false,
                finished: false,
                points: base
                    .residual
                    .iter()
                    .map(|c| TrainingPoint {
                        coords: c.clone(),
                        round: 0,
                    })
                    .collect(),
                rng: stream(cfg.seed, Stream::Refinement),
                progress: Progress {
                    echo,
                    loss_history: Vec::new(),
                    snapshots: Vec::new(),
                    rounds: Vec::new(),
                    lbfgs: Vec::new(),
                    divergence: Vec::new(),
                    stopped_early: false,
                    elapsed: 0.0,
                },
            };
            st.mark_good();
            st
        }
    };
    let ctx = Ctx {
        spec,
        cfg,
        opts,
        loss,
        evaluator,
        base,
        started,
    };
    let scorer = rar.map(|_| Probe::residual(spec, &init)).transpose()?;
    let elapsed0 = st.progress.elapsed;

    let rounds = rar.map_or(0, |r| r.rounds);
    while !st.finished {
        let packed = ctx.packed(&st.points);
        let n_adam = if st.round == 0 { cfg.iterations } else { rar.map_or(0, |r| r.iterations_per_round) };
        adam_phase(&ctx, &mut st, &packed, n_adam, elapsed0)?;
        if cfg.optimizer == OptimizerKind::AdamThenLbfgs {
            let eval = ctx.loss.evaluate(&st.params, &packed)?;
            ctx.record(&mut st, &eval)?;
            let max = if st.round == 0 { cfg.lbfgs.max_iterations } else { rar.map_or(0, |r| r.polish_iterations) };
            lbfgs_phase(&ctx, &mut st, &packed, max)?;
        }
        let eval = ctx.loss.evaluate(&st.params, &packed)?;
        ctx.log(&mut st, &eval);
        ctx.snapshot(&mut st, &eval)?;

        if st.round == rounds {
            st.finished = true;
            break;
        }
        let rar = rar.expect("rounds > 0 implies a refinement config");
        let scorer = scorer.as_ref().expect("scorer exists with a refinement config");
        let cands = sample_uniform_with(&spec.domain, rar.candidates, &mut st.rng);
        let flat: Vec<f64> = cands.iter().flatten().copied().collect();
        let abs: Vec<f64> = scorer.eval(&st.params, &flat).iter().map(|f| f.abs()).collect();
        let mean = tree_sum(&abs) / abs.len() as f64;
        if mean < rar.threshold {
            st.progress.stopped_early = true;
            st.finished = true;
            break;
        }
        let added: Vec<Vec<f64>> = select_top(&abs, rar.m).into_iter().map(|i| cands[i].clone()).collect();
        st.round += 1;
        st.phase_iter = 0;
        for c in &added {
            st.points.push(TrainingPoint {
                coords: c.clone(),
                round: st.round,
            });
        }
        st.progress.rounds.push(RoundRecord {
            round: st.round,
            iteration: st.iteration,
            mean_abs_candidate_residual: mean,
            added,
            n_residual: st.points.len(),
        });
        st.mark_good();
        ctx.save(&mut st, elapsed0)?;
        ctx.maybe_halt(&st)?;
    }
    ctx.save(&mut st, elapsed0)?;

    let p = st.progress;
    Ok(RunResult {
        problem: spec.kind,
        seed: cfg.seed,
        config: cfg.clone(),
        rar: rar.cloned(),
        loss_history: p.loss_history,
        snapshots: p.snapshots,
        rounds: p.rounds,
        points: st.points,
        lbfgs: p.lbfgs,
        divergence: p.divergence,
        stopped_early: p.stopped_early,
        final_params: st.params,
        wall_clock_seconds: elapsed0 + ctx.started.elapsed().as_secs_f64(),
    })
}

fn restore(c: Checkpoint, echo: &Echo, dim: usize) -> Result<State, TrainError> {
    let progress: Progress = serde_json::from_str(&c.progress)
        .map_err(|e| super::CheckpointError::Corrupt(format!("progress block: {e}")))?;
    if &progress.echo != echo || c.dim != dim || c.rng_stream != Stream::Refinement as u64 {
        return Err(TrainError::CheckpointMismatch);
    }
    let mut rng = stream(c.rng_seed, Stream::Refinement);
    rng.set_word_pos(c.rng_word_pos);
    let mut st = State {
        good: Good {
            params: Vec::new(),
            adam: c.adam.clone(),
            iteration: 0,
            phase_iter: 0,
        },
        params: c.params,
        adam: c.adam,
        iteration: c.iteration,
        round: c.round as usize,
        phase_iter: c.phase_iter,
        lr_halved: c.lr_halved,
        finished: c.finished,
        points: c.points,
        rng,
        progress,
    };
    st.mark_good();
    Ok(st)
}

fn adam_phase(ctx: &Ctx, st: &mut State, packed: &PackedSets, n: u64, elapsed0: f64) -> Result<(), TrainError> {
    if st.phase_iter == 0 {
        st.mark_good();
    }
    while st.phase_iter < n {
        let eval = ctx.loss.evaluate(&st.params, packed)?;
        let finite = eval.total.is_finite() && eval.grad.iter().all(|g| g.is_finite());
        if !finite {
            ctx.diverged(st)?;
            continue;
        }
        if st.iteration % ctx.cfg.log_every == 0 {
            ctx.log(st, &eval);
        }
        if st.iteration % ctx.cfg.snapshot_every == 0 && ctx.snapshot(st, &eval)? {
            st.mark_good();
            let every = ctx.opts.checkpoint_every;
            if every > 0 && st.iteration % every == 0 {
                ctx.save(st, elapsed0)?;
                ctx.maybe_halt(st)?;
            }
        }
        st.adam.step(&mut st.params, &eval.grad)?;
        st.iteration += 1;
        st.phase_iter += 1;
    }
    Ok(())
}

fn lbfgs_phase(ctx: &Ctx, st: &mut State, packed: &PackedSets, max_iterations: usize) -> Result<(), TrainError> {
    if max_iterations == 0 {
        return Ok(());
    }
    let settings = LbfgsSettings {
        max_iterations,
        ..ctx.cfg.lbfgs.clone()
    };
    let start = st.iteration;
    let (log_every, snap_every) = (ctx.cfg.log_every, ctx.cfg.snapshot_every);
    let mut marks: Vec<(u64, Vec<f64>)> = Vec::new();
    let report = lbfgs_minimize(
        |x| {
            let e = ctx.loss.evaluate(x, packed)?;
            Ok::<_, OptimizeError>((e.total, e.grad))
        },
        &st.params,
        &settings,
        |it, x, _| {
            let i = start + it as u64;
            if i % log_every == 0 || i % snap_every == 0 {
                marks.push((i, x.to_vec()));
            }
        },
    )?;
    for (i, x) in marks {
        let eval = ctx.loss.evaluate(&x, packed)?;
        let saved = std::mem::replace(&mut st.params, x);
        let saved_iter = std::mem::replace(&mut st.iteration, i);
        ctx.record(st, &eval)?;
        st.params = saved;
        st.iteration = saved_iter;
    }
    st.params = report.x;
    st.iteration += report.iterations as u64;
    st.progress.lbfgs.push(LbfgsSummary {
        round: st.round,
        start_iteration: start,
        iterations: report.iterations,
        evaluations: report.evaluations,
        stop: report.stop,
        f: report.f,
    });
    Ok(())
}

impl Ctx<'_> {
    fn packed(&self, points: &[TrainingPoint]) -> PackedSets {
        let sets = PointSets {
            residual: points.iter().map(|p| p.coords.clone()).collect(),
            boundary: self.base.boundary.clone(),
            observations: self.base.observations.clone(),
        };
        PackedSets::new(self.spec.dim(), &sets)
    }

    fn log(&self, st: &mut State, eval: &LossEval) {
        let h = &mut st.progress.loss_history;
        if h.last().is_some_and(|r| r.iteration >= st.iteration) {
            return;
        }
        h.push(LossRecord {
            iteration: st.iteration,
            total: eval.total,
            terms: (&eval.terms).into(),
        });
    }

    /// Logs and snapshots the current state when the schedule asks for it.
    fn record(&self, st: &mut State, eval: &LossEval) -> Result<(), TrainError> {
        if st.iteration % self.cfg.log_every == 0 {
            self.log(st, eval);
        }
        if st.iteration % self.cfg.snapshot_every == 0 {
            self.snapshot(st, eval)?;
        }
        Ok(())
    }

    /// Records a snapshot unless one exists at this iteration already.
    /// Returns whether a snapshot was added.
    fn snapshot(&self, st: &mut State, eval: &LossEval) -> Result<bool, TrainError> {
        if st.progress.snapshots.last().is_some_and(|s| s.iteration >= st.iteration) {
            return Ok(false);
        }
        let metrics = self.evaluator.evaluate(&st.params)?;
        let inv = &self.spec.inverse;
        let tail = &st.params[st.params.len() - inv.len()..];
        let lambda: Vec<f64> = inv.iter().zip(tail).map(|(p, &s)| p.from_storage(s)).collect();
        let lambda_errors = inv.iter().zip(&lambda).map(|(p, &v)| p.relative_error(v)).collect();
        st.progress.snapshots.push(Snapshot {
            iteration: st.iteration,
            round: st.round,
            n_residual: st.points.len(),
            loss: LossRecord {
                iteration: st.iteration,
                total: eval.total,
                terms: (&eval.terms).into(),
            },
            metrics,
            lambda,
            lambda_errors,
        });
        Ok(true)
    }

    fn diverged(&self, st: &mut State) -> Result<(), TrainError> {
        if st.lr_halved {
            return Err(TrainError::Diverged {
                iteration: st.iteration,
                last_good: st.good.iteration,
                checkpoint: self.opts.checkpoint.clone().filter(|p| p.exists()),
            });
        }
        let failed_at = st.iteration;
        let good = st.good.clone();
        st.params = good.params;
        st.adam = good.adam;
        st.iteration = good.iteration;
        st.phase_iter = good.phase_iter;
        st.adam.lr *= 0.5;
        st.lr_halved = true;
        st.progress.loss_history.retain(|r| r.iteration <= good.iteration);
        st.progress.divergence.push(DivergenceEvent {
            iteration: failed_at,
            rolled_back_to: good.iteration,
            new_lr: st.adam.lr,
        });
        Ok(())
    }

    fn maybe_halt(&self, st: &State) -> Result<(), TrainError> {
        match (&self.opts.checkpoint, self.opts.halt_at) {
            (Some(path), Some(h)) if st.iteration >= h => Err(TrainError::Halted {
                iteration: st.iteration,
                checkpoint: path.clone(),
            }),
            _ => Ok(()),
        }
    }

    fn save(&self, st: &mut State, elapsed0: f64) -> Result<(), TrainError> {
        let Some(path) = &self.opts.checkpoint else { return Ok(()) };
        st.progress.elapsed = elapsed0 + self.started.elapsed().as_secs_f64();
        let progress = serde_json::to_string(&st.progress)
            .map_err(|e| super::CheckpointError::Corrupt(format!("progress block: {e}")))?;
        let c = Checkpoint {
            iteration: st.iteration,
            round: st.round as u64,
            phase_iter: st.phase_iter,
            lr_halved: st.lr_halved,
            finished: st.finished,
            params: st.params.clone(),
            adam: st.adam.clone(),
            rng_seed: self.cfg.seed,
            rng_stream: st.rng.get_stream(),
            rng_word_pos: st.rng.get_word_pos(),
            dim: self.spec.dim(),
            points: st.points.clone(),
            progress,
        };
        Ok(c.save(path)?)
    }
}
