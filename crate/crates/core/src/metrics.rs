//! Point sampling and the accuracy metrics reported during training.
//!
//! Errors are discrete L² relative errors over a dense equispaced test grid:
//! 10,001 points on 1D domains, 201 x 201 on space-time domains.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdError, Graph, Program};
use crate::loss::compiled::symbolic_point;
use crate::loss::LossError;
use crate::model::ModelParams;
use crate::network::NetworkError;
use crate::problems::reference::SpaceTimeGrid;
use crate::problems::{self, Domain, Field, Networks, ProblemError, ProblemKind, ProblemSpec};
use crate::rng::{stream, Stream};
use crate::sum::tree_sum;

pub const TEST_POINTS_1D: usize = 10_001;
pub const TEST_POINTS_2D: usize = 201;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("equispaced sampling needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("the point set is empty")]
    Empty,
    #[error("prediction has {pred} values, reference has {reference}")]
    LengthMismatch { pred: usize, reference: usize },
    #[error("reference has zero norm")]
    ZeroReference,
    #[error("no reference {0} is available")]
    MissingReference(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Graph(#[from] AdError),
}

/// `n` i.i.d. uniform points in `domain`, drawn from the seed's residual-point stream.
pub fn sample_uniform(domain: &Domain, n: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_uniform_with(domain, n, &mut stream(seed, Stream::ResidualPoints))
}

pub fn sample_uniform_with(domain: &Domain, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(&a, &b)| a + (b - a) * rng.gen::<f64>())
                .collect()
        })
        .collect()
}

/// Hammersley set of `n` points: the first axis is `(i + 1/2) / n`, later
/// axes are radical inverses of `i + 1` in bases 2, 3, 5, ...
pub fn sample_hammersley(domain: &Domain, n: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let radical = |mut i: u64, b: u64| {
        let (mut r, mut f) = (0.0, 1.0 / b as f64);
        while i > 0 {
            r += f * (i % b) as f64;
            i /= b;
            f /= b as f64;
        }
        r
    };
    (0..n)
        .map(|i| {
            (0..domain.dim())
                .map(|k| {
                    let u = if k == 0 { (i as f64 + 0.5) / n as f64 } else { radical(i as u64 + 1, PRIMES[k - 1]) };
                    domain.lower[k] + (domain.upper[k] - domain.lower[k]) * u
                })
                .collect()
        })
        .collect()
}

/// `n >= 2` equispaced points on `[a, b]`, endpoints included.
pub fn sample_equispaced(a: f64, b: f64, n: usize) -> Result<Vec<f64>, MetricsError> {
    if n < 2 {
        return Err(MetricsError::TooFewPoints(n));
    }
    Ok(problems::equispaced(a, b, n))
}

/// `||pred - reference|| / ||reference||` in the discrete 2-norm.
pub fn l2_relative_error(pred: &[f64], reference: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != reference.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            reference: reference.len(),
        });
    }
    let diff: Vec<f64> = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).collect();
    let norm: Vec<f64> = reference.iter().map(|r| r * r).collect();
    let den = tree_sum(&norm).sqrt();
    if den == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok(tree_sum(&diff).sqrt() / den)
}

/// Mean of `|f|` over `points`.
pub fn mean_abs_residual(spec: &ProblemSpec, nets: &Networks, points: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::Empty);
    }
    let abs: Vec<f64> = points
        .iter()
        .map(|p| Ok(problems::residual(spec, nets, p)?.value().abs()))
        .collect::<Result<_, MetricsError>>()?;
    Ok(tree_sum(&abs) / points.len() as f64)
}

/// L² relative error of `d u_hat / d x_axis` on `grid`.
pub fn derivative_error(spec: &ProblemSpec, nets: &Networks, grid: &TestGrid, axis: usize) -> Result<f64, MetricsError> {
    let reference = grid
        .du
        .get(axis)
        .and_then(|d| d.as_ref())
        .ok_or_else(|| MetricsError::MissingReference(format!("derivative along axis {axis}")))?;
    let mut pred = Vec::with_capacity(grid.len());
    for p in grid.points() {
        let coords = spec.coordinate_inputs(nets, p)?;
        let u = spec.surrogate(nets, &coords)?;
        pred.push(nets.graph.grad(&u, &coords[axis..=axis])?[0].value());
    }
    l2_relative_error(&pred, reference)
}

/// Dense evaluation grid with reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestGrid {
    pub dim: usize,
    /// `[n]` or `[nx, nt]`.
    pub shape: Vec<usize>,
    /// Point-major coordinates; space-time grids are x-major.
    pub coords: Vec<f64>,
    pub u: Vec<f64>,
    /// Reference derivative per axis, where available.
    pub du: Vec<Option<Vec<f64>>>,
    /// Reference rate for problems with an unknown rate field.
    pub k: Option<Vec<f64>>,
}

impl TestGrid {
    pub fn new(spec: &ProblemSpec, cache: Option<&Path>) -> Result<Self, MetricsError> {
        Self::with_resolution(spec, TEST_POINTS_1D, TEST_POINTS_2D, cache)
    }

    /// A grid of `n1` points (1D) or `n2 x n2` points (space-time).
    pub fn with_resolution(spec: &ProblemSpec, n1: usize, n2: usize, cache: Option<&Path>) -> Result<Self, MetricsError> {
        let d = &spec.domain;
        if spec.dim() == 1 {
            let xs = sample_equispaced(d.lower[0], d.upper[0], n1)?;
            let (u, du, k) = if spec.kind == ProblemKind::ReactRateInv {
                let (u, du) = problems::react_rate_solution(n1 - 1);
                let k = xs.iter().map(|&x| problems::exact_rate(x)).collect();
                (u, du, Some(k))
            } else {
                let u = xs.iter().map(|&x| spec.exact_solution(&[x])).collect::<Result<_, _>>()?;
                let du = xs.iter().map(|&x| spec.exact_derivative(&[x], 0)).collect::<Result<_, _>>()?;
                (u, du, None)
            };
            return Ok(TestGrid {
                dim: 1,
                shape: vec![n1],
                coords: xs,
                u,
                du: vec![Some(du)],
                k,
            });
        }
        let grid = SpaceTimeGrid {
            x: [d.lower[0], d.upper[0]],
            t: [d.lower[1], d.upper[1]],
            nx: n2,
            nt: n2,
        };
        if n2 < 3 {
            return Err(MetricsError::TooFewPoints(n2));
        }
        let coords: Vec<f64> = grid.points().into_iter().flatten().collect();
        let (u, du) = match spec.kind {
            ProblemKind::Burgers | ProblemKind::AllenCahn => {
                let u = spec.reference_solution(&grid, cache)?;
                let du = fd_gradient(&u, &grid);
                (u, du)
            }
            _ => {
                let pts: Vec<&[f64]> = coords.chunks(2).collect();
                let u = pts.iter().map(|p| spec.exact_solution(p)).collect::<Result<_, _>>()?;
                let du = (0..2)
                    .map(|a| pts.iter().map(|p| spec.exact_derivative(p, a)).collect::<Result<_, _>>())
                    .collect::<Result<Vec<Vec<f64>>, _>>()?;
                (u, du)
            }
        };
        Ok(TestGrid {
            dim: 2,
            shape: vec![n2, n2],
            coords,
            u,
            du: du.into_iter().map(Some).collect(),
            k: None,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }
}

/// Second-order finite differences of an x-major field along x and t.
fn fd_gradient(u: &[f64], grid: &SpaceTimeGrid) -> Vec<Vec<f64>> {
    let (nx, nt) = (grid.nx, grid.nt);
    let hx = (grid.x[1] - grid.x[0]) / (nx - 1) as f64;
    let ht = (grid.t[1] - grid.t[0]) / (nt - 1) as f64;
    let mut dx = vec![0.0; u.len()];
    let mut dt = vec![0.0; u.len()];
    for it in 0..nt {
        let col: Vec<f64> = (0..nx).map(|ix| u[ix * nt + it]).collect();
        for (ix, v) in problems::fd_derivative(&col, hx).into_iter().enumerate() {
            dx[ix * nt + it] = v;
        }
    }
    for ix in 0..nx {
        let row = &u[ix * nt..(ix + 1) * nt];
        dt[ix * nt..(ix + 1) * nt].copy_from_slice(&problems::fd_derivative(row, ht));
    }
    vec![dx, dt]
}

/// Metric values at one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetrics {
    pub u_error: f64,
    /// Per axis; `None` without a reference derivative.
    pub du_errors: Vec<Option<f64>>,
    pub k_error: Option<f64>,
    pub mean_abs_residual: f64,
}

/// Compiled evaluation of a model on a [`TestGrid`].
pub struct Evaluator {
    grid: TestGrid,
    field: Probe,
    residual: Probe,
}

impl Evaluator {
    pub fn new(spec: &ProblemSpec, params: &ModelParams, grid: TestGrid) -> Result<Self, MetricsError> {
        Ok(Evaluator {
            field: Probe::field(spec, params)?,
            residual: Probe::residual(spec, params)?,
            grid,
        })
    }

    pub fn grid(&self) -> &TestGrid {
        &self.grid
    }

    /// Surrogate, its coordinate derivatives and the rate at every grid point,
    /// point-major.
    pub fn field_values(&self, theta: &[f64]) -> Vec<f64> {
        self.field.eval(theta, &self.grid.coords)
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<GridMetrics, MetricsError> {
        let g = &self.grid;
        let vals = self.field_values(theta);
        let width = self.field.n_outputs();
        let column = |j: usize| -> Vec<f64> { vals.chunks(width).map(|c| c[j]).collect() };
        let u_error = l2_relative_error(&column(0), &g.u)?;
        let du_errors = g
            .du
            .iter()
            .enumerate()
            .map(|(a, r)| r.as_ref().map(|r| l2_relative_error(&column(1 + a), r)).transpose())
            .collect::<Result<_, _>>()?;
        let k_error = match (&g.k, self.field.has_rate) {
            (Some(k), true) => Some(l2_relative_error(&column(1 + g.dim), k)?),
            _ => None,
        };
        let f = self.residual.eval(theta, &g.coords);
        let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        Ok(GridMetrics {
            u_error,
            du_errors,
            k_error,
            mean_abs_residual: tree_sum(&abs) / abs.len() as f64,
        })
    }
}

/// A compiled per-point quantity of the model with the flattened parameters
/// as uniform inputs and the coordinates as lane inputs.
pub struct Probe {
    program: Program,
    dim: usize,
    has_rate: bool,
}

impl Probe {
    /// Outputs `[u_hat, d u_hat / d x_0, ..., k_hat]` (the rate only when the
    /// problem has a rate network).
    pub fn field(spec: &ProblemSpec, params: &ModelParams) -> Result<Self, MetricsError> {
        let g = Graph::new();
        let model = params.bind(&g)?;
        let nets = model.networks();
        let coords = symbolic_point(&g, spec)?;
        let u = spec.surrogate(&nets, &coords)?;
        let mut outs = vec![u.clone()];
        outs.extend(g.grad(&u, &coords)?);
        let has_rate = model.k.is_some();
        if let Some(k) = &model.k {
            outs.push(k.eval(&coords)?);
        }
        let program = Program::compile(&g, &coords, &model.inputs(), &outs)?;
        Ok(Probe {
            program,
            dim: spec.dim(),
            has_rate,
        })
    }

    /// Outputs `[f]`.
    pub fn residual(spec: &ProblemSpec, params: &ModelParams) -> Result<Self, MetricsError> {
        let g = Graph::new();
        let model = params.bind(&g)?;
        let nets = model.networks();
        let coords = symbolic_point(&g, spec)?;
        let f = spec.residual_at(&nets, &coords)?;
        let program = Program::compile(&g, &coords, &model.inputs(), &[f])?;
        Ok(Probe {
            program,
            dim: spec.dim(),
            has_rate: model.k.is_some(),
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.program.num_outputs()
    }

    /// Point-major outputs at the points in `coords` (point-major, `dim` values each).
    pub fn eval(&self, theta: &[f64], coords: &[f64]) -> Vec<f64> {
        self.program.eval_points(theta, coords, coords.len() / self.dim)
    }
}
