//! The training loss and its parameter gradient, compiled once per run.
//!
//! One graph is built for a symbolic point (coordinates as inputs) and lowered
//! to a [`Program`] whose uniform inputs are the flattened model parameters.
//! Per point it emits the squared terms followed by the parameter gradient of
//! that point's weighted contribution; summing over points with the
//! deterministic tree and dividing by the set size gives every mean.

use crate::autodiff::{Graph, Node, Program};
use crate::model::ModelParams;
use crate::problems::ProblemSpec;

use super::{LossError, LossWeights, PointSets};

/// Loss value, its terms and the gradient with respect to the flattened parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub total: f64,
    pub terms: LossTerms,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    pub f: f64,
    /// Per axis; `None` where the gradient weight is zero (the term is not built).
    pub g: Vec<Option<f64>>,
    pub b: Option<f64>,
    pub data: Option<f64>,
}

/// Point sets laid out as program lanes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PackedSets {
    dim: usize,
    residual: Vec<f64>,
    boundary: Vec<f64>,
    data: Vec<f64>,
}

impl PackedSets {
    pub fn new(dim: usize, sets: &PointSets) -> Self {
        let mut p = PackedSets {
            dim,
            ..Default::default()
        };
        for x in &sets.residual {
            p.push_residual(x);
        }
        for b in &sets.boundary {
            p.boundary.extend_from_slice(&b.coords);
            p.boundary.push(b.target);
        }
        for o in &sets.observations {
            p.data.extend_from_slice(&o.coords);
            p.data.push(o.value);
        }
        p
    }

    pub fn push_residual(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "point dimension");
        self.residual.extend_from_slice(x);
    }

    pub fn n_residual(&self) -> usize {
        self.residual.len() / self.dim.max(1)
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len() / (self.dim + 1)
    }

    pub fn n_data(&self) -> usize {
        self.data.len() / (self.dim + 1)
    }

    pub fn residual_lanes(&self) -> &[f64] {
        &self.residual
    }
}

struct Term {
    program: Program,
    n_values: usize,
}

pub struct CompiledLoss {
    weights: LossWeights,
    axes: Vec<usize>,
    n_params: usize,
    dim: usize,
    residual: Term,
    boundary: Option<Term>,
    data: Option<Term>,
}

impl CompiledLoss {
    pub fn new(spec: &ProblemSpec, params: &ModelParams, weights: &LossWeights) -> Result<Self, LossError> {
        weights.validate(spec.dim())?;
        let axes = weights.active_axes();
        let d = spec.dim();
        let g = Graph::new();
        let model = params.bind(&g)?;
        let nets = model.networks();
        let theta = model.inputs();
        let coords = symbolic_point(&g, spec)?;

        let (f, df) = spec.residual_and_gradient_at(&nets, &coords, &axes)?;
        let mut values = vec![f.square()];
        let mut ell = &values[0] * weights.w_f;
        for (a, dfa) in axes.iter().zip(&df) {
            let sq = dfa.square();
            ell = &ell + &(&sq * weights.w_g[*a]);
            values.push(sq);
        }
        let residual = term(&g, &coords, &theta, values, &ell)?;

        let with_extra = || -> Result<Option<Term>, LossError> {
            let extra = g.input(0.0)?;
            let u = spec.surrogate(&nets, &coords)?;
            let sq = (&u - &extra).square();
            let mut lanes = coords.clone();
            lanes.push(extra);
            Ok(Some(term(&g, &lanes, &theta, vec![sq.clone()], &sq)?))
        };
        let boundary = if spec.uses_boundary_loss() && !spec.ansatz.is_hard_constraint() {
            with_extra()?
        } else {
            None
        };
        let data = if spec.is_inverse() { with_extra()? } else { None };
        Ok(CompiledLoss {
            weights: weights.clone(),
            axes,
            n_params: theta.len(),
            dim: d,
            residual,
            boundary,
            data,
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    /// Loss and gradient at flattened parameters `theta`.
    pub fn evaluate(&self, theta: &[f64], sets: &PackedSets) -> Result<LossEval, LossError> {
        assert_eq!(theta.len(), self.n_params, "parameter vector length");
        assert_eq!(sets.dim, self.dim, "point dimension");
        let n_f = sets.n_residual();
        if n_f == 0 {
            return Err(LossError::Empty("residual"));
        }
        let mut grad = vec![0.0; self.n_params];
        let sums = self.residual.program.eval_sums(theta, &sets.residual, n_f);
        let nf = n_f as f64;
        let f = sums[0] / nf;
        let mut g_terms = vec![None; self.dim];
        for (k, a) in self.axes.iter().enumerate() {
            g_terms[*a] = Some(sums[1 + k] / nf);
        }
        for (gi, s) in grad.iter_mut().zip(&sums[self.residual.n_values..]) {
            *gi = s / nf;
        }
        let mut total = f * self.weights.w_f;
        let mut side = |t: &Option<Term>, lanes: &[f64], n: usize, w: f64, which: &'static str| -> Result<Option<f64>, LossError> {
            let Some(t) = t else { return Ok(None) };
            if n == 0 {
                return Err(LossError::Empty(which));
            }
            let sums = t.program.eval_sums(theta, lanes, n);
            let m = sums[0] / n as f64;
            for (gi, s) in grad.iter_mut().zip(&sums[1..]) {
                *gi += w * (s / n as f64);
            }
            total = total + m * w;
            Ok(Some(m))
        };
        let b = side(&self.boundary, &sets.boundary, sets.n_boundary(), self.weights.w_b, "boundary")?;
        let data = side(&self.data, &sets.data, sets.n_data(), self.weights.w_i, "observation")?;
        for a in &self.axes {
            total = total + g_terms[*a].expect("active axis") * self.weights.w_g[*a];
        }
        Ok(LossEval {
            total,
            terms: LossTerms { f, g: g_terms, b, data },
            grad,
        })
    }
}

/// Coordinate inputs for a symbolic point (primal values at the domain centre).
pub(crate) fn symbolic_point(g: &Graph, spec: &ProblemSpec) -> Result<Vec<Node>, LossError> {
    Ok(spec
        .domain
        .lower
        .iter()
        .zip(&spec.domain.upper)
        .map(|(a, b)| g.input(0.5 * (a + b)))
        .collect::<Result<_, _>>()?)
}

fn term(g: &Graph, lanes: &[Node], theta: &[Node], mut values: Vec<Node>, ell: &Node) -> Result<Term, LossError> {
    let n_values = values.len();
    values.extend(g.grad(ell, theta)?);
    let program = Program::compile(g, lanes, theta, &values)?;
    Ok(Term { program, n_values })
}
