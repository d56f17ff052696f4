//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `GPINN_ACCEPTANCE` selects the training budget: `reduced` (default),
//! `half` or `full`. `GPINN_ACCEPTANCE_ONLY=3,5` runs a subset and
//! `GPINN_ACCEPTANCE_STRICT=1` turns any FAIL into a non-zero exit.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use gpinn::autodiff::{check_grad, Graph, Node, Primitive};
use gpinn::optimize::{rar_refine, train, OptimizerKind, RarConfig, RunOptions, RunResult, TrainConfig};
use gpinn::problems::{Expr, Networks, ProblemKind, ProblemOptions, ProblemSpec};
use gpinn_cli::config::{ExperimentConfig, Method};
use gpinn_cli::presets::preset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tier {
    Reduced,
    Half,
    Full,
}

impl Tier {
    fn from_env() -> Tier {
        match std::env::var("GPINN_ACCEPTANCE").as_deref() {
            Ok("full") => Tier::Full,
            Ok("half") => Tier::Half,
            Ok("reduced") | Err(_) => Tier::Reduced,
            Ok(other) => panic!("GPINN_ACCEPTANCE must be reduced, half or full, got {other:?}"),
        }
    }

    fn pick<T>(self, reduced: T, half: T, full: T) -> T {
        match self {
            Tier::Reduced => reduced,
            Tier::Half => half,
            Tier::Full => full,
        }
    }
}

const SEEDS: u64 = 5;

// Tolerances.
const AD_TOL: [f64; 3] = [1e-7, 1e-5, 1e-4];
const AD_COMPOSITIONS: usize = 50;
const EXACT_F_TOL: f64 = 1e-8;
const EXACT_DF_TOL: f64 = 1e-7;
const FAST_SECONDS: f64 = 10.0;
const ORDER: f64 = 3.0;
const GNN_MAX: f64 = 0.03;
const POISSON_PINN_BAND: (f64, f64) = (1e-3, 2e-2);
const POISSON_DERIVATIVE_GAP: f64 = 10.0;
const POISSON_W_BAND: (f64, f64) = (1e-3, 1e-1);
const DR_GPINN_MAX: f64 = 0.03;
const BRINKMAN_NU_MAX: f64 = 0.10;
const BRINKMAN_K_MAX: f64 = 0.10;
const BRINKMAN_NOISY_NU_MAX: f64 = 0.30;
const REACT_K_MAX: f64 = 0.10;
const BURGERS_RAR_MAX: f64 = 0.01;
const BURGERS_NEAR_SHOCK: (f64, f64) = (0.2, 0.6);
const ALLEN_CAHN_RAR_MAX: f64 = 0.02;
const ALLEN_CAHN_RAR_POINTS: usize = 900;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(checks: Vec<(bool, String)>) -> Outcome {
    Outcome {
        pass: checks.iter().all(|c| c.0),
        detail: checks
            .into_iter()
            .map(|(ok, s)| format!("{}{s}", if ok { "" } else { "[x] " }))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn pct(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

fn cache_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-cache")
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Preset training config for `method`, with budget overrides applied.
struct Job {
    spec: ProblemSpec,
    cfg: TrainConfig,
    rar: Option<RarConfig>,
}

fn job(name: &str, method: Method, w: f64, n_residual: usize, adjust: impl Fn(&mut TrainConfig)) -> Job {
    let p = preset(name).expect("preset exists");
    let spec = ProblemSpec::new(p.problem, &p.options).unwrap();
    let mut cfg = p.train.clone();
    cfg.weights = method.weights(spec.dim(), w);
    cfg.n_residual = n_residual;
    adjust(&mut cfg);
    // Only the start and the end are evaluated on the test grid.
    cfg.snapshot_every = cfg.iterations.max(1);
    cfg.log_every = (cfg.iterations / 10).max(1);
    Job { spec, cfg, rar: None }
}

fn budget(iterations: u64, lr: Option<f64>) -> impl Fn(&mut TrainConfig) {
    move |c: &mut TrainConfig| {
        c.iterations = iterations;
        if let Some(lr) = lr {
            c.lr = lr;
        }
    }
}

/// Runs every (job, seed) pair on all cores; results are grouped per job.
fn run_jobs(jobs: &[Job], seeds: u64) -> Vec<Vec<RunResult>> {
    let work: Vec<(usize, u64)> = (0..jobs.len()).flat_map(|j| (0..seeds).map(move |s| (j, s))).collect();
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<RunResult>>> = Mutex::new(vec![None; work.len()]);
    let opts = RunOptions {
        cache: Some(cache_dir()),
        ..Default::default()
    };
    std::thread::scope(|s| {
        for _ in 0..threads().min(work.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(j, seed)) = work.get(i) else { break };
                let job = &jobs[j];
                let mut cfg = job.cfg.clone();
                cfg.seed = seed;
                let r = match &job.rar {
                    Some(rar) => rar_refine(&job.spec, &cfg, rar, &opts),
                    None => train(&job.spec, &cfg, &opts),
                }
                .unwrap_or_else(|e| panic!("{} seed {seed}: {e}", job.spec.name()));
                out.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut flat = out.into_inner().unwrap().into_iter().map(Option::unwrap);
    (0..jobs.len()).map(|_| (&mut flat).take(seeds as usize).collect()).collect()
}

fn last(r: &RunResult) -> &gpinn::optimize::Snapshot {
    r.final_snapshot().expect("runs end with a snapshot")
}

fn med(runs: &[RunResult], f: impl Fn(&RunResult) -> f64) -> f64 {
    median(&runs.iter().map(f).collect::<Vec<_>>())
}

fn u_err(r: &RunResult) -> f64 {
    last(r).metrics.u_error
}

fn du_err(r: &RunResult) -> f64 {
    last(r).metrics.du_errors[0].expect("closed-form derivative")
}

fn lambda_err(r: &RunResult, name: &str, spec: &ProblemSpec) -> f64 {
    let i = spec.inverse.iter().position(|p| p.name == name).expect("inverse parameter");
    last(r).lambda_errors[i]
}

// 1

#[derive(Debug)]
enum Ex {
    X,
    Affine(f64, f64, Box<Ex>),
    Add(Box<Ex>, Box<Ex>),
    Mul(Box<Ex>, Box<Ex>),
    DivCosh(Box<Ex>, Box<Ex>),
    Pow(u32, Box<Ex>),
    Sin(Box<Ex>),
    Cos(Box<Ex>),
    ExpTanh(Box<Ex>),
    Tanh(Box<Ex>),
    Neg(Box<Ex>),
}

impl Ex {
    fn random(rng: &mut ChaCha8Rng, depth: u32) -> Ex {
        if depth == 0 {
            return Ex::Affine(rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0), Box::new(Ex::X));
        }
        let choice = rng.gen_range(0..10);
        let a = Box::new(Ex::random(rng, depth - 1));
        match choice {
            0 => Ex::Add(a, Box::new(Ex::random(rng, depth - 1))),
            1 => Ex::Mul(a, Box::new(Ex::random(rng, depth - 1))),
            2 => Ex::DivCosh(a, Box::new(Ex::random(rng, depth - 1))),
            3 => Ex::Pow(rng.gen_range(1..4), Box::new(Ex::Tanh(a))),
            4 => Ex::Sin(a),
            5 => Ex::Cos(a),
            6 => Ex::ExpTanh(a),
            7 => Ex::Tanh(a),
            8 => Ex::Neg(a),
            _ => Ex::Affine(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), a),
        }
    }

    fn build(&self, x: &Node) -> Node {
        match self {
            Ex::X => x.clone(),
            Ex::Affine(a, b, e) => &(&e.build(x) * *a) + *b,
            Ex::Add(a, b) => a.build(x) + b.build(x),
            Ex::Mul(a, b) => a.build(x) * b.build(x),
            Ex::DivCosh(a, b) => a.build(x) / b.build(x).cosh(),
            Ex::Pow(k, a) => a.build(x).powi(*k),
            Ex::Sin(a) => a.build(x).sin(),
            Ex::Cos(a) => a.build(x).cos(),
            Ex::ExpTanh(a) => a.build(x).tanh().exp(),
            Ex::Tanh(a) => a.build(x).tanh(),
            Ex::Neg(a) => -a.build(x),
        }
    }
}

fn ad_correctness(_: Tier) -> Outcome {
    let start = Instant::now();
    let unary = |p: Primitive| move |x: &Node| x.graph().apply(p, &[x]).unwrap();
    let prims: Vec<(&str, Box<dyn Fn(&Node) -> Node>, f64)> = vec![
        ("sin", Box::new(unary(Primitive::Sin)), 3.0),
        ("cos", Box::new(unary(Primitive::Cos)), 3.0),
        ("exp", Box::new(unary(Primitive::Exp)), 2.0),
        ("tanh", Box::new(unary(Primitive::Tanh)), 3.0),
        ("cosh", Box::new(unary(Primitive::Cosh)), 2.0),
        ("neg", Box::new(unary(Primitive::Neg)), 2.0),
        ("powi3", Box::new(unary(Primitive::PowInt(3))), 2.0),
        ("add", Box::new(|x: &Node| x + &x.sin()), 2.0),
        ("sub", Box::new(|x: &Node| x - &x.cos()), 2.0),
        ("mul", Box::new(|x: &Node| x * &x.exp()), 2.0),
        ("div", Box::new(|x: &Node| x.sin() / (&x.square() + 1.0)), 2.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 3];
    let mut record = |f: &dyn Fn(&Node) -> Node, at: f64| {
        for order in 1..=3u32 {
            let d = check_grad(f, at, order);
            let k = order as usize - 1;
            worst[k] = worst[k].max(d / AD_TOL[k]);
        }
    };
    for (_, f, r) in &prims {
        for _ in 0..20 {
            let at = rng.gen_range(-*r..*r);
            record(f.as_ref(), at);
        }
    }
    for _ in 0..AD_COMPOSITIONS {
        let e = Ex::random(&mut rng, 3);
        let at = rng.gen_range(-1.0..1.0);
        record(&|x: &Node| e.build(x), at);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(vec![
        (
            worst.iter().all(|w| *w < 1.0),
            format!(
                "{} primitives + {AD_COMPOSITIONS} compositions, worst discrepancy / tolerance = {:.2}, {:.2}, {:.2} (orders 1, 2, 3)",
                prims.len(),
                worst[0],
                worst[1],
                worst[2]
            ),
        ),
        (secs < FAST_SECONDS, format!("{secs:.1}s < {FAST_SECONDS}s")),
    ])
}

// 2

fn exact_residuals(_: Tier) -> Outcome {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for kind in [ProblemKind::Poisson1d, ProblemKind::DiffReactFwd, ProblemKind::Brinkman] {
        let s = ProblemSpec::new(kind, &ProblemOptions::default()).unwrap();
        let g = Graph::new();
        let sc = s.clone();
        let field = Expr(move |c: &[Node]| sc.exact_expression(c).unwrap());
        let nets = Networks::new(&g, &field).direct();
        let axes: Vec<usize> = (0..s.dim()).collect();
        let (mut fmax, mut gmax) = (0.0f64, 0.0f64);
        for _ in 0..200 {
            let p: Vec<f64> = (0..s.dim()).map(|k| rng.gen_range(s.domain.lower[k]..s.domain.upper[k])).collect();
            let coords = s.coordinate_inputs(&nets, &p).unwrap();
            let (f, df) = s.residual_and_gradient_at(&nets, &coords, &axes).unwrap();
            fmax = fmax.max(f.value().abs());
            gmax = df.iter().fold(gmax, |m, d| m.max(d.value().abs()));
        }
        checks.push((fmax < EXACT_F_TOL && gmax < EXACT_DF_TOL, format!("{kind}: max|f| {fmax:.1e}, max|df| {gmax:.1e}")));
    }
    let secs = start.elapsed().as_secs_f64();
    checks.push((secs < FAST_SECONDS, format!("{secs:.1}s")));
    outcome(checks)
}

// 3

fn function_approximation(tier: Tier) -> Outcome {
    let iters = 10_000;
    let seeds = tier.pick(SEEDS, SEEDS, 10);
    let jobs = [job("3.1", Method::Nn, 0.0, 15, budget(iters, None)), job("3.1", Method::Gnn, 1.0, 15, budget(iters, None))];
    let r = run_jobs(&jobs, seeds);
    let (nn, gnn) = (med(&r[0], u_err), med(&r[1], u_err));
    let (dnn, dgnn) = (med(&r[0], du_err), med(&r[1], du_err));
    outcome(vec![
        (gnn <= GNN_MAX, format!("gNN u {} <= {}", pct(gnn), pct(GNN_MAX))),
        (nn >= ORDER * gnn, format!("NN u {} >= {ORDER} x gNN", pct(nn))),
        (dgnn < dnn, format!("u' gNN {} < NN {}", pct(dgnn), pct(dnn))),
    ])
}

// 4

fn poisson(tier: Tier) -> Outcome {
    let iters = 20_000;
    let seeds = tier.pick(SEEDS, SEEDS, 10);
    let ws = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
    let mut jobs = vec![job("3.2.1", Method::Pinn, 0.0, 20, budget(iters, None))];
    jobs.extend(ws.iter().map(|&w| job("3.2.1", Method::Gpinn, w, 20, budget(iters, None))));
    let r = run_jobs(&jobs, seeds);
    let pinn = med(&r[0], u_err);
    let sweep: Vec<f64> = r[1..].iter().map(|runs| med(runs, u_err)).collect();
    let g = sweep[2];
    let (dp, dg) = (med(&r[0], du_err), med(&r[3], du_err));
    let best = ws[sweep.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
    outcome(vec![
        (
            (POISSON_PINN_BAND.0..=POISSON_PINN_BAND.1).contains(&pinn),
            format!("PINN u {} in [{}, {}]", pct(pinn), pct(POISSON_PINN_BAND.0), pct(POISSON_PINN_BAND.1)),
        ),
        (g <= pinn / ORDER, format!("gPINN(w=0.01) u {} <= PINN/{ORDER}", pct(g))),
        (dp >= POISSON_DERIVATIVE_GAP * dg, format!("u' PINN {} vs gPINN {} (gap {:.1}x)", pct(dp), pct(dg), dp / dg)),
        (
            (POISSON_W_BAND.0..=POISSON_W_BAND.1).contains(&best),
            format!(
                "w sweep {} -> best w={best:e}",
                ws.iter().zip(&sweep).map(|(w, e)| format!("{w:e}:{}", pct(*e))).collect::<Vec<_>>().join(" ")
            ),
        ),
    ])
}

// 5

fn diffusion_reaction(tier: Tier) -> Outcome {
    let b = || tier.pick(budget(20_000, Some(1e-3)), budget(50_000, None), budget(100_000, None));
    let jobs = [
        job("3.2.2", Method::Pinn, 0.0, 40, b()),
        job("3.2.2", Method::Gpinn, 0.01, 40, b()),
        job("3.2.2", Method::Gpinn, 0.1, 40, b()),
        job("3.2.2", Method::Gpinn, 1.0, 40, b()),
    ];
    let r = run_jobs(&jobs, SEEDS);
    let e: Vec<f64> = r.iter().map(|runs| med(runs, u_err)).collect();
    let (lo, hi) = (e[1..].iter().cloned().fold(f64::MAX, f64::min), e[1..].iter().cloned().fold(0.0, f64::max));
    outcome(vec![
        (e[2] <= DR_GPINN_MAX, format!("gPINN(w=0.1) u {} <= {}", pct(e[2]), pct(DR_GPINN_MAX))),
        (e[0] >= ORDER * e[2], format!("PINN u {} >= {ORDER} x gPINN", pct(e[0]))),
        (
            hi <= 10.0 * lo,
            format!("w = 0.01, 0.1, 1: {}, {}, {} (spread {:.1}x <= 10x)", pct(e[1]), pct(e[2]), pct(e[3]), hi / lo),
        ),
    ])
}

// 6

fn brinkman(tier: Tier) -> Outcome {
    let b = || tier.pick(budget(20_000, None), budget(25_000, None), budget(50_000, None));
    let jobs = [
        job("3.3.1", Method::Pinn, 0.0, 10, b()),
        job("3.3.1", Method::Gpinn, 0.1, 10, b()),
        job("3.3.1-k", Method::Pinn, 0.0, 10, b()),
        job("3.3.1-k", Method::Gpinn, 0.1, 10, b()),
        job("3.3.1-noisy", Method::Pinn, 0.0, 15, b()),
        job("3.3.1-noisy", Method::Gpinn, 0.1, 15, b()),
        job("3.3.1-noisy", Method::Pinn, 0.0, 30, b()),
    ];
    let r = run_jobs(&jobs, SEEDS);
    let nu = |i: usize| med(&r[i], |x| lambda_err(x, "nu_e", &jobs[i].spec));
    let k = |i: usize| med(&r[i], |x| lambda_err(x, "K", &jobs[i].spec));
    let (p, g) = (nu(0), nu(1));
    let (pk, gk) = (k(2), k(3));
    let (pkn, gkn) = (nu(2), nu(3));
    let (np, ng, n2) = (nu(4), nu(5), nu(6));
    outcome(vec![
        (g <= BRINKMAN_NU_MAX, format!("nu_e gPINN {} <= {}", pct(g), pct(BRINKMAN_NU_MAX))),
        (p > g, format!("nu_e PINN {} > gPINN", pct(p))),
        (pk <= BRINKMAN_K_MAX && gk <= BRINKMAN_K_MAX, format!("K PINN {} gPINN {} <= {}", pct(pk), pct(gk), pct(BRINKMAN_K_MAX))),
        (gkn < pkn, format!("two-parameter nu_e gPINN {} < PINN {}", pct(gkn), pct(pkn))),
        (ng <= BRINKMAN_NOISY_NU_MAX, format!("noisy nu_e gPINN {} <= {}", pct(ng), pct(BRINKMAN_NOISY_NU_MAX))),
        (
            (np - n2) >= 0.5 * (np - ng) && np > ng,
            format!("noisy nu_e PINN {} -> PINN 2x {} closes most of the gap to gPINN", pct(np), pct(n2)),
        ),
    ])
}

// 7

fn reaction_rate(tier: Tier) -> Outcome {
    let b = || tier.pick(budget(50_000, Some(1e-3)), budget(100_000, None), budget(200_000, None));
    let jobs = [job("3.3.2", Method::Pinn, 0.0, 10, b()), job("3.3.2", Method::Gpinn, 0.01, 10, b())];
    let r = run_jobs(&jobs, SEEDS);
    let k = |runs: &[RunResult]| med(runs, |x| last(x).metrics.k_error.expect("rate error"));
    let (p, g) = (k(&r[0]), k(&r[1]));
    outcome(vec![
        (g < p, format!("k gPINN {} < PINN {}", pct(g), pct(p))),
        (g <= REACT_K_MAX, format!("k gPINN {} <= {}", pct(g), pct(REACT_K_MAX))),
    ])
}

// 8

fn refinement(rounds: usize, m: usize, per_round: u64, polish: usize) -> RarConfig {
    RarConfig {
        m,
        rounds,
        threshold: 0.0,
        candidates: 100_000,
        iterations_per_round: per_round,
        polish_iterations: polish,
    }
}

fn with_lbfgs(iterations: u64, lbfgs: usize) -> impl Fn(&mut TrainConfig) {
    move |c: &mut TrainConfig| {
        c.iterations = iterations;
        c.optimizer = OptimizerKind::AdamThenLbfgs;
        c.lbfgs.max_iterations = lbfgs;
    }
}

fn burgers(tier: Tier) -> Outcome {
    let (adam, lbfgs) = tier.pick((1_000, 250), (10_000, 2_500), (20_000, 5_000));
    let (per_round, polish) = tier.pick((100, 25), (1_000, 250), (2_000, 500));
    let rounds = tier.pick(10, 40, 40);
    let seeds = tier.pick(3, SEEDS, SEEDS);
    let w = gpinn_cli::presets::BURGERS_W;
    let mut rar = job("3.4.1", Method::Pinn, 0.0, 1500, with_lbfgs(adam, lbfgs));
    rar.rar = Some(refinement(rounds, 10, per_round, polish));
    let jobs = [
        job("3.4.1", Method::Pinn, 0.0, 1900, with_lbfgs(adam, lbfgs)),
        job("3.4.1", Method::Gpinn, w, 1900, with_lbfgs(adam, lbfgs)),
        rar,
    ];
    let r = run_jobs(&jobs, seeds);
    let (p, g, pr) = (med(&r[0], u_err), med(&r[1], u_err), med(&r[2], u_err));
    let near = med(&r[2], |x| {
        let first: Vec<_> = x.points.iter().filter(|p| (1..=10).contains(&p.round)).collect();
        first.iter().filter(|p| p.coords[0].abs() < BURGERS_NEAR_SHOCK.0).count() as f64 / first.len() as f64
    });
    let total = r[2][0].points.len();
    outcome(vec![
        (g <= p / ORDER, format!("1900 points: gPINN u {} <= PINN {} / {ORDER}", pct(g), pct(p))),
        (pr <= BURGERS_RAR_MAX && total == 1900, format!("PINN+RAR ({total} points) u {} <= {}", pct(pr), pct(BURGERS_RAR_MAX))),
        (
            near >= BURGERS_NEAR_SHOCK.1,
            format!("{:.0}% of the first 100 added points in |x| < {}", 100.0 * near, BURGERS_NEAR_SHOCK.0),
        ),
        (true, format!("{seeds} seeds, {adam} Adam + {lbfgs} L-BFGS, {rounds} rounds of {per_round} + {polish}")),
    ])
}

// 9

fn allen_cahn(tier: Tier) -> Outcome {
    let (adam, lbfgs) = tier.pick((300, 50), (10_000, 2_500), (20_000, 5_000));
    let (per_round, polish) = tier.pick((30, 10), (1_000, 250), (2_000, 500));
    let seeds = tier.pick(1, SEEDS, SEEDS);
    let w = gpinn_cli::presets::ALLEN_CAHN_W;
    let rounds = (ALLEN_CAHN_RAR_POINTS - 500) / 30;
    let mut rar = job("3.4.2", Method::Gpinn, w, 500, with_lbfgs(adam, lbfgs));
    rar.rar = Some(refinement(rounds, 30, per_round, polish));
    let jobs = [
        rar,
        job("3.4.2", Method::Pinn, 0.0, 1000, with_lbfgs(adam, lbfgs)),
        job("3.4.2", Method::Gpinn, w, 1000, with_lbfgs(adam, lbfgs)),
        job("3.4.2", Method::Pinn, 0.0, 2000, with_lbfgs(adam, lbfgs)),
        job("3.4.2", Method::Gpinn, w, 2000, with_lbfgs(adam, lbfgs)),
    ];
    let r = run_jobs(&jobs, seeds);
    let gr = med(&r[0], u_err);
    let total = r[0][0].points.len();
    let e: Vec<f64> = r[1..].iter().map(|runs| med(runs, u_err)).collect();
    outcome(vec![
        (
            gr <= ALLEN_CAHN_RAR_MAX && total <= ALLEN_CAHN_RAR_POINTS,
            format!("gPINN+RAR ({total} points) u {} <= {}", pct(gr), pct(ALLEN_CAHN_RAR_MAX)),
        ),
        (e[1] < e[0], format!("1000 points: gPINN {} < PINN {}", pct(e[1]), pct(e[0]))),
        (e[3] < e[2], format!("2000 points: gPINN {} < PINN {}", pct(e[3]), pct(e[2]))),
        (true, format!("{seeds} seeds, {adam} Adam + {lbfgs} L-BFGS, rounds {per_round} + {polish}")),
    ])
}

// 10

fn plumbing(_: Tier) -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        "name = \"tiny\"\npreset = \"3.2.1\"\n[train]\niterations = 200\nsnapshot_every = 50\nlog_every = 10\n",
    )
    .unwrap();
    let metrics: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("out{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_gpinn"))
                .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", "7"])
                .output()
                .unwrap();
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            std::fs::read(out.join("tiny/gpinn-n20-w0.01/7/metrics.csv")).unwrap()
        })
        .collect();
    let identical = !metrics[0].is_empty() && metrics[0] == metrics[1];

    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut round_trips = 0;
    let mut round_trip_ok = true;
    for e in std::fs::read_dir(&configs).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let c = ExperimentConfig::load(&p).unwrap();
            round_trip_ok &= ExperimentConfig::from_toml(&c.to_toml()).unwrap() == c;
            round_trips += 1;
        }
    }

    let spec = ProblemSpec::new(ProblemKind::Burgers, &ProblemOptions::default()).unwrap();
    let mut j = job("3.4.1", Method::Pinn, 0.0, 30, |c| {
        c.depth = 2;
        c.width = 8;
        c.iterations = 20;
        c.optimizer = OptimizerKind::Adam;
    });
    j.cfg.n_boundary = 8;
    j.cfg.n_initial = 8;
    let rar = refinement(4, 7, 10, 0);
    let opts = RunOptions {
        grid: Some([101, 21]),
        ..Default::default()
    };
    let r = rar_refine(&spec, &j.cfg, &rar, &opts).unwrap();
    let per_round: Vec<usize> = (0..=4).map(|k| r.points.iter().filter(|p| p.round == k).count()).collect();
    let counts_ok = r.points.len() == 30 + 4 * 7 && per_round == [30, 7, 7, 7, 7];
    let presets_ok = [("3.4.1", 1900), ("3.4.2", 3500)].iter().all(|(n, total)| {
        let p = preset(n).unwrap();
        let rar = p.rar.unwrap();
        p.train.n_residual + rar.m * rar.rounds == *total
    });
    let secs = start.elapsed().as_secs_f64();
    outcome(vec![
        (identical, "metrics.csv byte-identical across reruns".into()),
        (round_trip_ok, format!("{round_trips} shipped configs round-trip")),
        (counts_ok && presets_ok, format!("RAR point counts {per_round:?}, presets 1900/3500")),
        (secs < 60.0, format!("{secs:.1}s")),
    ])
}

type Criterion = fn(Tier) -> Outcome;

fn main() {
    let tier = Tier::from_env();
    let only: Option<Vec<usize>> = std::env::var("GPINN_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("GPINN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(&str, Criterion); 10] = [
        ("automatic differentiation", ad_correctness),
        ("exact-solution residuals", exact_residuals),
        ("function approximation", function_approximation),
        ("Poisson", poisson),
        ("diffusion-reaction", diffusion_reaction),
        ("Brinkman inverse", brinkman),
        ("reaction-rate inverse", reaction_rate),
        ("Burgers", burgers),
        ("Allen-Cahn", allen_cahn),
        ("determinism and plumbing", plumbing),
    ];
    println!("acceptance tier: {tier:?}, {} thread(s)", threads());
    let (mut run, mut passed) = (0, 0);
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let o = f(tier);
        run += 1;
        passed += o.pass as usize;
        println!(
            "criterion {n:>2} {} {name} ({:.0}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {passed}/{run} criteria passed");
    if strict && passed < run {
        std::process::exit(1);
    }
}
