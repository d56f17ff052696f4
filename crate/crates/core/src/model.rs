//! The trainable state of a run: the u-network, the optional rate network
//! and the stored inverse parameters, with one flattened view for optimisers.
//!
//! Flattened order: u-network parameters, rate-network parameters, then the
//! stored inverse parameters (log-values for positive ones).

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Node};
use crate::network::{init_mlp, BoundMlp, MlpParams, NetworkError};
use crate::problems::{Networks, ProblemSpec};
use crate::rng::{derived_seed, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub u: MlpParams,
    pub k: Option<MlpParams>,
    /// Stored inverse parameters in the order of `ProblemSpec::inverse`.
    pub lambda: Vec<f64>,
}

/// Layer sizes `[d, width x depth-1, 1]` for a network of the given depth
/// (number of weight layers) and width.
pub fn layer_sizes(input_dim: usize, depth: usize, width: usize) -> Vec<usize> {
    let mut sizes = vec![input_dim];
    sizes.extend(std::iter::repeat(width).take(depth.saturating_sub(1)));
    sizes.push(1);
    sizes
}

impl ModelParams {
    /// Seeded initialisation. The u-network depends on the seed alone, so runs
    /// that differ only in loss weights start from identical parameters.
    pub fn init(spec: &ProblemSpec, u_sizes: &[usize], k_sizes: &[usize], seed: u64) -> Result<Self, NetworkError> {
        let u = init_mlp(u_sizes, derived_seed(seed, Stream::Network))?;
        let k = if spec.needs_rate_network() {
            Some(init_mlp(k_sizes, derived_seed(seed, Stream::RateNetwork))?)
        } else {
            None
        };
        let lambda = spec.inverse.iter().map(|p| p.to_storage(p.initial)).collect();
        Ok(ModelParams { u, k, lambda })
    }

    pub fn len(&self) -> usize {
        self.u.len() + self.k.as_ref().map_or(0, |k| k.len()) + self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(self.u.flat());
        if let Some(k) = &self.k {
            out.extend_from_slice(k.flat());
        }
        out.extend_from_slice(&self.lambda);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NetworkError> {
        if flat.len() != self.len() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.len(),
                got: flat.len(),
            });
        }
        let nu = self.u.len();
        self.u.flat_mut().copy_from_slice(&flat[..nu]);
        let mut off = nu;
        if let Some(k) = &mut self.k {
            let nk = k.len();
            k.flat_mut().copy_from_slice(&flat[off..off + nk]);
            off += nk;
        }
        self.lambda.copy_from_slice(&flat[off..]);
        Ok(())
    }

    /// Physical values of the inverse parameters.
    pub fn lambda_values(&self, spec: &ProblemSpec) -> Vec<f64> {
        spec.inverse.iter().zip(&self.lambda).map(|(p, &s)| p.from_storage(s)).collect()
    }

    pub fn bind(&self, g: &Graph) -> Result<BoundModel, NetworkError> {
        Ok(BoundModel {
            graph: g.clone(),
            u: self.u.bind(g)?,
            k: self.k.as_ref().map(|k| k.bind(g)).transpose()?,
            lambda: self.lambda.iter().map(|&v| g.input(v)).collect::<Result<_, _>>()?,
        })
    }
}

/// [`ModelParams`] as graph inputs.
pub struct BoundModel {
    pub graph: Graph,
    pub u: BoundMlp,
    pub k: Option<BoundMlp>,
    pub lambda: Vec<Node>,
}

impl BoundModel {
    pub fn networks(&self) -> Networks<'_> {
        let mut nets = Networks::new(&self.graph, &self.u).with_lambda(self.lambda.clone());
        if let Some(k) = &self.k {
            nets = nets.with_rate(k);
        }
        nets
    }

    /// Input nodes in flattened order.
    pub fn inputs(&self) -> Vec<Node> {
        self.networks().parameters()
    }
}
