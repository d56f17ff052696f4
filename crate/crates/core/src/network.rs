//! Fully-connected tanh networks and hard-constraint output transforms.
//!
//! Parameter layout (the flattened view, and the checkpoint payload): layers
//! in order; per layer the weight matrix of shape `fan_in x fan_out` in
//! row-major order (element `(i, j)` connects input `i` to output `j`),
//! followed by the `fan_out` biases.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdError, Graph, Node};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("layer sizes must have at least two entries, all positive (got {0:?})")]
    BadSizes(Vec<usize>),
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ansatz {ansatz:?} needs {needs} coordinate(s), got {got}")]
    IncompatibleAnsatz { ansatz: Ansatz, needs: usize, got: usize },
    #[error("malformed parameter checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Graph(#[from] AdError),
}

/// Weights and biases of a tanh MLP with a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    sizes: Vec<usize>,
    flat: Vec<f64>,
}

/// Number of parameters of an MLP with the given layer sizes.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<(), NetworkError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(NetworkError::BadSizes(sizes.to_vec()));
    }
    Ok(())
}

/// Glorot-uniform weights (bound `sqrt(6 / (fan_in + fan_out))`), zero biases.
pub fn init_mlp(sizes: &[usize], seed: u64) -> Result<MlpParams, NetworkError> {
    check_sizes(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(param_count(sizes));
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        flat.extend((0..fan_in * fan_out).map(|_| dist.sample(&mut rng)));
        flat.extend(std::iter::repeat(0.0).take(fan_out));
    }
    Ok(MlpParams {
        sizes: sizes.to_vec(),
        flat,
    })
}

impl MlpParams {
    pub fn from_flat(sizes: &[usize], flat: Vec<f64>) -> Result<Self, NetworkError> {
        check_sizes(sizes)?;
        let expected = param_count(sizes);
        if flat.len() != expected {
            return Err(NetworkError::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        Ok(MlpParams {
            sizes: sizes.to_vec(),
            flat,
        })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, NetworkError> {
        Self::from_flat(sizes, vec![0.0; param_count(sizes)])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated sizes")
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }

    /// Weight matrix (row-major `fan_in x fan_out`) and biases of `layer`.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let nw = w[0] * w[1];
            if l == layer {
                return (&self.flat[off..off + nw], &self.flat[off + nw..off + nw + w[1]]);
            }
            off += nw + w[1];
        }
        panic!("layer {layer} out of range");
    }

    /// Registers every parameter as an input of `g`, in flattened order.
    pub fn bind(&self, g: &Graph) -> Result<BoundMlp, NetworkError> {
        let nodes = self
            .flat
            .iter()
            .map(|&v| g.input(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BoundMlp {
            sizes: self.sizes.clone(),
            params: nodes,
        })
    }

    /// Plain `f64` forward pass, for evaluation without a graph.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim());
        let mut h = x.to_vec();
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (w, b) = self.layer(l);
            let fan_out = self.sizes[l + 1];
            let mut z = b.to_vec();
            for (i, hi) in h.iter().enumerate() {
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj += hi * w[i * fan_out + j];
                }
            }
            if l + 1 < n_layers {
                for zj in &mut z {
                    *zj = zj.tanh();
                }
            }
            h = z;
        }
        h
    }

    /// Little-endian checkpoint: `b"GPNN"`, `u32` version (1), `u32` layer
    /// count, one `u32` per layer size, `u64` parameter count, then the
    /// flattened parameters as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.sizes.len() + 8 * self.flat.len());
        out.extend_from_slice(b"GPNN");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.flat.len() as u64).to_le_bytes());
        for v in &self.flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetworkError> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != b"GPNN" {
            return Err(NetworkError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != 1 {
            return Err(NetworkError::Format(format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let sizes = (0..n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>, _>>()?;
        let count = r.u64()? as usize;
        let flat = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        if !r.is_done() {
            return Err(NetworkError::Format("trailing bytes".into()));
        }
        Self::from_flat(&sizes, flat)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], NetworkError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(NetworkError::Format("truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, NetworkError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, NetworkError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, NetworkError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// An MLP whose parameters are input nodes of one graph.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    sizes: Vec<usize>,
    params: Vec<Node>,
}

impl BoundMlp {
    /// Parameter nodes in flattened order.
    pub fn params(&self) -> &[Node] {
        &self.params
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// All network outputs at `inputs`.
    pub fn forward_all(&self, inputs: &[Node]) -> Result<Vec<Node>, NetworkError> {
        if inputs.len() != self.sizes[0] {
            return Err(NetworkError::DimensionMismatch {
                expected: self.sizes[0],
                got: inputs.len(),
            });
        }
        if let Some(p) = self.params.first() {
            if inputs.iter().any(|x| !x.same_graph(p)) {
                return Err(AdError::CrossGraph.into());
            }
        }
        let n_layers = self.sizes.len() - 1;
        let mut h: Vec<Node> = inputs.to_vec();
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            off += fan_in * fan_out + fan_out;
            let mut z = Vec::with_capacity(fan_out);
            for j in 0..fan_out {
                let mut acc = b[j].clone();
                for (i, hi) in h.iter().enumerate() {
                    acc = &acc + &(hi * &w[i * fan_out + j]);
                }
                z.push(if l + 1 < n_layers { acc.tanh() } else { acc });
            }
            h = z;
        }
        Ok(h)
    }

    /// Scalar network output; the network must have one output.
    pub fn forward(&self, inputs: &[Node]) -> Result<Node, NetworkError> {
        let out_dim = *self.sizes.last().expect("validated sizes");
        if out_dim != 1 {
            return Err(NetworkError::DimensionMismatch {
                expected: 1,
                got: out_dim,
            });
        }
        Ok(self.forward_all(inputs)?.remove(0))
    }
}

/// Binds `p` into `g` and evaluates it at `inputs`.
pub fn forward(p: &MlpParams, g: &Graph, inputs: &[Node]) -> Result<Node, NetworkError> {
    p.bind(g)?.forward(inputs)
}

/// Output transform from raw network output to the solution surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ansatz {
    /// Raw output, no boundary handling needed.
    Identity,
    /// `x (pi - x) N(x) + x`: exact `u(0) = 0`, `u(pi) = pi`.
    DirichletPoisson1d,
    /// `(x^2 - pi^2)(1 - exp(-t)) N(x, t) + u0(x)`: exact initial and boundary values.
    DiffReact,
    /// Raw output; boundary and initial conditions enter through the loss.
    NoneSoftBc,
}

impl Ansatz {
    pub fn is_hard_constraint(self) -> bool {
        matches!(self, Ansatz::DirichletPoisson1d | Ansatz::DiffReact)
    }

    fn coords_needed(self) -> Option<usize> {
        match self {
            Ansatz::DirichletPoisson1d => Some(1),
            Ansatz::DiffReact => Some(2),
            Ansatz::Identity | Ansatz::NoneSoftBc => None,
        }
    }
}

/// `sum_{i=1}^{4} sin(i x) / i + sin(8 x) / 8`, the sine series shared by the
/// Poisson solution and the diffusion-reaction initial condition.
pub fn sine_series(x: &Node) -> Node {
    let mut acc = x.sin();
    for i in 2..=4 {
        let fi = i as f64;
        acc = &acc + &((x * fi).sin() / fi);
    }
    &acc + &((x * 8.0).sin() / 8.0)
}

/// Plain `f64` version of [`sine_series`].
pub fn sine_series_f64(x: f64) -> f64 {
    (1..=4).map(|i| (i as f64 * x).sin() / i as f64).sum::<f64>() + (8.0 * x).sin() / 8.0
}

/// Applies the ansatz to a raw network output at `coords`.
pub fn apply_ansatz(a: Ansatz, raw: &Node, coords: &[Node]) -> Result<Node, NetworkError> {
    if let Some(needs) = a.coords_needed() {
        if coords.len() != needs {
            return Err(NetworkError::IncompatibleAnsatz {
                ansatz: a,
                needs,
                got: coords.len(),
            });
        }
    }
    Ok(match a {
        Ansatz::Identity | Ansatz::NoneSoftBc => raw.clone(),
        Ansatz::DirichletPoisson1d => {
            let x = &coords[0];
            let factor = x * &(PI - x);
            &(&factor * raw) + x
        }
        Ansatz::DiffReact => {
            let (x, t) = (&coords[0], &coords[1]);
            let space = &x.square() - PI * PI;
            let time = 1.0 - &(-t).exp();
            &(&(&space * &time) * raw) + &sine_series(x)
        }
    })
}
