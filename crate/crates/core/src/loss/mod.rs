//! Composite PINN / gPINN / gNN losses.
//!
//! `L = w_f L_f + w_b L_b + w_i L_i + sum_i w_g[i] L_g[i]`, each term a mean of
//! squares over its point set. Means are reduced with [`crate::sum`]'s fixed
//! tree so the graph route here and the compiled route in [`compiled`] agree.

pub mod compiled;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdError, Node};
use crate::network::NetworkError;
use crate::problems::{BoundaryPoint, Networks, Observation, ProblemError, ProblemSpec};
use crate::sum::tree_reduce;

pub use compiled::{CompiledLoss, LossEval, LossTerms};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("the {0} point set is empty")]
    Empty(&'static str),
    #[error("weight {name} must be finite and non-negative, got {value}")]
    NegativeWeight { name: String, value: f64 },
    #[error("w_g has {got} entries, the problem has {expected} axes")]
    WeightCount { expected: usize, got: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Graph(#[from] AdError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_f: f64,
    pub w_b: f64,
    pub w_i: f64,
    /// One weight per input axis.
    pub w_g: Vec<f64>,
}

impl LossWeights {
    /// Plain PINN weights: every gradient weight zero.
    pub fn pinn(dim: usize) -> Self {
        LossWeights {
            w_f: 1.0,
            w_b: 1.0,
            w_i: 1.0,
            w_g: vec![0.0; dim],
        }
    }

    /// The same gradient weight `w` on every axis.
    pub fn gpinn(dim: usize, w: f64) -> Self {
        LossWeights {
            w_g: vec![w; dim],
            ..Self::pinn(dim)
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), LossError> {
        if self.w_g.len() != dim {
            return Err(LossError::WeightCount {
                expected: dim,
                got: self.w_g.len(),
            });
        }
        let named = [("w_f", self.w_f), ("w_b", self.w_b), ("w_i", self.w_i)];
        for (name, value) in named
            .into_iter()
            .map(|(n, v)| (n.to_string(), v))
            .chain(self.w_g.iter().enumerate().map(|(i, &v)| (format!("w_g[{i}]"), v)))
        {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(LossError::NegativeWeight { name, value });
            }
        }
        Ok(())
    }

    /// Axes whose gradient loss carries a positive weight.
    pub fn active_axes(&self) -> Vec<usize> {
        self.w_g.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, _)| i).collect()
    }
}

/// Training points. The gradient points `T_g` are the residual points `T_f`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSets {
    pub residual: Vec<Vec<f64>>,
    pub boundary: Vec<BoundaryPoint>,
    pub observations: Vec<Observation>,
}

impl PointSets {
    pub fn gradient_points(&self) -> &[Vec<f64>] {
        &self.residual
    }
}

fn mean(terms: Vec<Node>, which: &'static str) -> Result<Node, LossError> {
    let n = terms.len();
    let sum = tree_reduce(&terms, &|a: &Node, b: &Node| a + b).ok_or(LossError::Empty(which))?;
    Ok(&sum / n as f64)
}

/// Mean squared residual over `t_f`.
pub fn loss_f(spec: &ProblemSpec, nets: &Networks, t_f: &[Vec<f64>]) -> Result<Node, LossError> {
    let mut sq = Vec::with_capacity(t_f.len());
    for p in t_f {
        let coords = spec.coordinate_inputs(nets, p)?;
        sq.push(spec.residual_at(nets, &coords)?.square());
    }
    mean(sq, "residual")
}

/// Mean squared residual derivative along `axis` over `t_f`.
pub fn loss_g(spec: &ProblemSpec, nets: &Networks, t_f: &[Vec<f64>], axis: usize) -> Result<Node, LossError> {
    if axis >= spec.dim() {
        return Err(ProblemError::AxisOutOfRange { axis, dim: spec.dim() }.into());
    }
    let mut sq = Vec::with_capacity(t_f.len());
    for p in t_f {
        let coords = spec.coordinate_inputs(nets, p)?;
        let (_, df) = spec.residual_and_gradient_at(nets, &coords, &[axis])?;
        sq.push(df[0].square());
    }
    mean(sq, "residual")
}

/// Mean squared boundary/initial-condition violation.
pub fn loss_b(spec: &ProblemSpec, nets: &Networks, t_b: &[BoundaryPoint]) -> Result<Node, LossError> {
    if spec.ansatz.is_hard_constraint() {
        return Err(ProblemError::HardConstraint { problem: spec.kind }.into());
    }
    let mut sq = Vec::with_capacity(t_b.len());
    for bp in t_b {
        let coords = spec.coordinate_inputs(nets, &bp.coords)?;
        let target = nets.graph.constant(bp.target)?;
        sq.push(spec.boundary_violation_at(nets, &coords, &target)?.square());
    }
    mean(sq, "boundary")
}

/// Mean squared misfit of the surrogate against observations.
pub fn loss_data(spec: &ProblemSpec, nets: &Networks, t_i: &[Observation]) -> Result<Node, LossError> {
    let mut sq = Vec::with_capacity(t_i.len());
    for o in t_i {
        let coords = spec.coordinate_inputs(nets, &o.coords)?;
        let u = spec.surrogate(nets, &coords)?;
        sq.push((&u - o.value).square());
    }
    mean(sq, "observation")
}

fn weighted(w: f64, term: Node) -> Node {
    &term * w
}

/// The weighted sum of every term the problem uses, as one differentiable node.
///
/// Zero-weight gradient terms are not built, so all-zero `w_g` gives the PINN
/// loss `w_f L_f + w_b L_b + w_i L_i` exactly. Boundary terms are omitted for
/// hard-constraint problems and the data term when there are no observations.
pub fn total_loss(spec: &ProblemSpec, nets: &Networks, sets: &PointSets, w: &LossWeights) -> Result<Node, LossError> {
    w.validate(spec.dim())?;
    let axes = w.active_axes();
    let mut fsq = Vec::with_capacity(sets.residual.len());
    let mut gsq: Vec<Vec<Node>> = vec![Vec::new(); axes.len()];
    for p in &sets.residual {
        let coords = spec.coordinate_inputs(nets, p)?;
        let (f, df) = spec.residual_and_gradient_at(nets, &coords, &axes)?;
        fsq.push(f.square());
        for (acc, d) in gsq.iter_mut().zip(df) {
            acc.push(d.square());
        }
    }
    let mut total = weighted(w.w_f, mean(fsq, "residual")?);
    if spec.uses_boundary_loss() && !spec.ansatz.is_hard_constraint() {
        total = &total + &weighted(w.w_b, loss_b(spec, nets, &sets.boundary)?);
    }
    if spec.is_inverse() {
        total = &total + &weighted(w.w_i, loss_data(spec, nets, &sets.observations)?);
    }
    for (axis, sq) in axes.iter().zip(gsq) {
        total = &total + &weighted(w.w_g[*axis], mean(sq, "residual")?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
