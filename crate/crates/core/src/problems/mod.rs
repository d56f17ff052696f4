//! The seven benchmark problems.
//!
//! Every problem exposes its residual operator as a graph builder over the
//! surrogate `u_hat`, its coordinate derivatives and the inverse parameters, so
//! the loss, the compiled training programs and the metrics share one definition.

pub mod reference;

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdError, Graph, Node};
use crate::network::{apply_ansatz, sine_series, sine_series_f64, Ansatz, BoundMlp, NetworkError};
use crate::rng::{stream, Stream};

pub use reference::{ReferenceError, SpaceTimeGrid};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("point {point:?} lies outside the domain of {problem}")]
    OutsideDomain { problem: ProblemKind, point: Vec<f64> },
    #[error("{problem} points have {expected} coordinate(s), got {got}")]
    Dimension { problem: ProblemKind, expected: usize, got: usize },
    #[error("{problem} needs a {which} network")]
    MissingNetwork { problem: ProblemKind, which: &'static str },
    #[error("axis {axis} out of range for a {dim}-dimensional problem")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("{0} has no closed-form solution; use the reference solution")]
    NoClosedForm(ProblemKind),
    #[error("{0} is a forward problem without observations")]
    NotInverse(ProblemKind),
    #[error("{problem} has {expected} inverse parameter(s), got {got} values")]
    LambdaCount { problem: ProblemKind, expected: usize, got: usize },
    #[error("{problem} enforces its boundary conditions through the ansatz")]
    HardConstraint { problem: ProblemKind },
    #[error("invalid problem option: {0}")]
    Option(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Graph(#[from] AdError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    FuncApprox,
    #[serde(rename = "poisson-1d")]
    Poisson1d,
    DiffReactFwd,
    Brinkman,
    ReactRateInv,
    Burgers,
    AllenCahn,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 7] = [
        ProblemKind::FuncApprox,
        ProblemKind::Poisson1d,
        ProblemKind::DiffReactFwd,
        ProblemKind::Brinkman,
        ProblemKind::ReactRateInv,
        ProblemKind::Burgers,
        ProblemKind::AllenCahn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::FuncApprox => "func-approx",
            ProblemKind::Poisson1d => "poisson-1d",
            ProblemKind::DiffReactFwd => "diff-react-fwd",
            ProblemKind::Brinkman => "brinkman",
            ProblemKind::ReactRateInv => "react-rate-inv",
            ProblemKind::Burgers => "burgers",
            ProblemKind::AllenCahn => "allen-cahn",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))
    }
}

/// Axis-aligned box; axis 0 is `x`, axis 1 (if present) is `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Domain { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Closed-box membership with a relative slack of `1e-12` per axis.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&a, &b))| {
                let slack = 1e-12 * (b - a).abs().max(1.0);
                v >= a - slack && v <= b + slack
            })
    }
}

/// Unknown scalar coefficient of an inverse problem.
///
/// With `positive` set the optimiser sees `ln(value)`, so every update keeps
/// the coefficient strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseParam {
    pub name: String,
    pub true_value: f64,
    pub initial: f64,
    pub positive: bool,
}

impl InverseParam {
    pub fn to_storage(&self, value: f64) -> f64 {
        if self.positive {
            value.ln()
        } else {
            value
        }
    }

    pub fn from_storage(&self, stored: f64) -> f64 {
        if self.positive {
            stored.exp()
        } else {
            stored
        }
    }

    pub fn value_node(&self, stored: &Node) -> Node {
        if self.positive {
            stored.exp()
        } else {
            stored.clone()
        }
    }

    pub fn relative_error(&self, value: f64) -> f64 {
        ((value - self.true_value) / self.true_value).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRule {
    /// Sensors sit at `j / (count + 1)`, `j = 1..=count`, on `[0, 1]`.
    pub count: usize,
    /// Standard deviation of additive Gaussian noise; zero for exact data.
    pub noise_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    /// Spatial boundary: the coordinate on `axis` is fixed at the lower or upper bound.
    Dirichlet,
    /// `t = 0`.
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub kind: SegmentKind,
    pub axis: usize,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub coords: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub coords: Vec<f64>,
    pub value: f64,
}

/// Per-run choices that alter a problem's setup (only inverse problems use them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOptions {
    /// Brinkman: infer the permeability `K` alongside the effective viscosity.
    pub infer_permeability: bool,
    /// Number of sensors (defaults: 5 for brinkman, 8 for react-rate-inv).
    pub observations: Option<usize>,
    pub noise_std: f64,
    /// Starting value of every scalar unknown.
    pub initial_guess: f64,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions {
            infer_permeability: false,
            observations: None,
            noise_std: 0.0,
            initial_guess: 1e-2,
        }
    }
}

pub mod consts {
    pub const BRINKMAN_NU: f64 = 1e-3;
    pub const BRINKMAN_NU_E: f64 = 1e-3;
    pub const BRINKMAN_K: f64 = 1e-3;
    pub const BRINKMAN_EPS: f64 = 0.4;
    pub const BRINKMAN_G: f64 = 1.0;
    pub const BRINKMAN_H: f64 = 1.0;
    pub const REACT_LAMBDA: f64 = 0.01;
    pub const BURGERS_NU: f64 = super::reference::BURGERS_NU;
    pub const ALLEN_CAHN_D: f64 = super::reference::ALLEN_CAHN_D;
}
use consts::*;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub domain: Domain,
    pub ansatz: Ansatz,
    pub inverse: Vec<InverseParam>,
    pub observation: Option<ObservationRule>,
    pub boundary: Vec<BoundarySegment>,
}

/// A differentiable scalar field over the problem coordinates.
pub trait Field {
    fn eval(&self, coords: &[Node]) -> Result<Node, ProblemError>;

    /// Trainable input nodes, in flattened order.
    fn parameters(&self) -> Vec<Node> {
        Vec::new()
    }
}

impl Field for BoundMlp {
    fn eval(&self, coords: &[Node]) -> Result<Node, ProblemError> {
        Ok(self.forward(coords)?)
    }

    fn parameters(&self) -> Vec<Node> {
        self.params().to_vec()
    }
}

/// A field given by a closure, e.g. a closed-form solution.
pub struct Expr<F>(pub F);

impl<F: Fn(&[Node]) -> Node> Field for Expr<F> {
    fn eval(&self, coords: &[Node]) -> Result<Node, ProblemError> {
        Ok((self.0)(coords))
    }
}

/// The learned quantities a residual is built from.
pub struct Networks<'a> {
    pub graph: Graph,
    pub u: &'a dyn Field,
    pub k: Option<&'a dyn Field>,
    /// Stored (log-space when positive) inverse parameters as graph inputs, in
    /// the order of [`ProblemSpec::inverse`]. Empty means "use the true values".
    pub lambda: Vec<Node>,
    /// When false, `u` is taken as the surrogate itself and the ansatz is skipped.
    pub use_ansatz: bool,
}

impl<'a> Networks<'a> {
    pub fn new(graph: &Graph, u: &'a dyn Field) -> Self {
        Networks {
            graph: graph.clone(),
            u,
            k: None,
            lambda: Vec::new(),
            use_ansatz: true,
        }
    }

    pub fn with_rate(mut self, k: &'a dyn Field) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_lambda(mut self, stored: Vec<Node>) -> Self {
        self.lambda = stored;
        self
    }

    /// Treat `u` as the surrogate itself (no output transform).
    pub fn direct(mut self) -> Self {
        self.use_ansatz = false;
        self
    }

    /// Every trainable input node: u-network, rate network, inverse parameters.
    pub fn parameters(&self) -> Vec<Node> {
        let mut out = self.u.parameters();
        if let Some(k) = self.k {
            out.extend(k.parameters());
        }
        out.extend(self.lambda.iter().cloned());
        out
    }
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, opts: &ProblemOptions) -> Result<Self, ProblemError> {
        if !(opts.noise_std >= 0.0 && opts.noise_std.is_finite()) {
            return Err(ProblemError::Option(format!("noise_std must be >= 0, got {}", opts.noise_std)));
        }
        if !(opts.initial_guess > 0.0 && opts.initial_guess.is_finite()) {
            return Err(ProblemError::Option(format!(
                "initial_guess must be positive, got {}",
                opts.initial_guess
            )));
        }
        if opts.observations == Some(0) {
            return Err(ProblemError::Option("observations must be at least 1".into()));
        }
        let d1 = |a: f64, b: f64| Domain::new(vec![a], vec![b]);
        let d2 = |a: f64, b: f64| Domain::new(vec![a, 0.0], vec![b, 1.0]);
        let ends = |a: f64, b: f64| {
            vec![
                BoundarySegment { kind: SegmentKind::Dirichlet, axis: 0, at: a },
                BoundarySegment { kind: SegmentKind::Dirichlet, axis: 0, at: b },
            ]
        };
        let with_initial = |mut v: Vec<BoundarySegment>| {
            v.push(BoundarySegment { kind: SegmentKind::Initial, axis: 1, at: 0.0 });
            v
        };
        let forward = |domain, ansatz, boundary| ProblemSpec {
            kind,
            domain,
            ansatz,
            inverse: Vec::new(),
            observation: None,
            boundary,
        };
        Ok(match kind {
            ProblemKind::FuncApprox => forward(d1(0.0, 1.0), Ansatz::Identity, Vec::new()),
            ProblemKind::Poisson1d => forward(d1(0.0, PI), Ansatz::DirichletPoisson1d, Vec::new()),
            ProblemKind::DiffReactFwd => forward(d2(-PI, PI), Ansatz::DiffReact, Vec::new()),
            ProblemKind::Burgers => forward(d2(-1.0, 1.0), Ansatz::NoneSoftBc, with_initial(ends(-1.0, 1.0))),
            ProblemKind::AllenCahn => forward(d2(-1.0, 1.0), Ansatz::NoneSoftBc, with_initial(ends(-1.0, 1.0))),
            ProblemKind::Brinkman => {
                let mut inverse = vec![InverseParam {
                    name: "nu_e".into(),
                    true_value: BRINKMAN_NU_E,
                    initial: opts.initial_guess,
                    positive: true,
                }];
                if opts.infer_permeability {
                    inverse.push(InverseParam {
                        name: "K".into(),
                        true_value: BRINKMAN_K,
                        initial: opts.initial_guess,
                        positive: true,
                    });
                }
                ProblemSpec {
                    kind,
                    domain: d1(0.0, BRINKMAN_H),
                    ansatz: Ansatz::NoneSoftBc,
                    inverse,
                    observation: Some(ObservationRule {
                        count: opts.observations.unwrap_or(5),
                        noise_std: opts.noise_std,
                    }),
                    boundary: ends(0.0, BRINKMAN_H),
                }
            }
            ProblemKind::ReactRateInv => ProblemSpec {
                kind,
                domain: d1(0.0, 1.0),
                ansatz: Ansatz::NoneSoftBc,
                inverse: Vec::new(),
                observation: Some(ObservationRule {
                    count: opts.observations.unwrap_or(8),
                    noise_std: opts.noise_std,
                }),
                boundary: ends(0.0, 1.0),
            },
        })
    }

    pub fn by_name(name: &str, opts: &ProblemOptions) -> Result<Self, ProblemError> {
        Self::new(name.parse()?, opts)
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.dim() == 2
    }

    pub fn needs_rate_network(&self) -> bool {
        self.kind == ProblemKind::ReactRateInv
    }

    pub fn is_inverse(&self) -> bool {
        self.observation.is_some()
    }

    pub fn uses_boundary_loss(&self) -> bool {
        !self.boundary.is_empty()
    }

    fn check_point(&self, p: &[f64]) -> Result<(), ProblemError> {
        if p.len() != self.dim() {
            return Err(ProblemError::Dimension {
                problem: self.kind,
                expected: self.dim(),
                got: p.len(),
            });
        }
        if !self.domain.contains(p) {
            return Err(ProblemError::OutsideDomain {
                problem: self.kind,
                point: p.to_vec(),
            });
        }
        Ok(())
    }

    fn check_coords(&self, coords: &[Node]) -> Result<(), ProblemError> {
        if coords.len() != self.dim() {
            return Err(ProblemError::Dimension {
                problem: self.kind,
                expected: self.dim(),
                got: coords.len(),
            });
        }
        Ok(())
    }

    fn check_axis(&self, axis: usize) -> Result<(), ProblemError> {
        if axis >= self.dim() {
            return Err(ProblemError::AxisOutOfRange { axis, dim: self.dim() });
        }
        Ok(())
    }

    /// Coordinate input nodes for `point` in the networks' graph.
    pub fn coordinate_inputs(&self, nets: &Networks, point: &[f64]) -> Result<Vec<Node>, ProblemError> {
        self.check_point(point)?;
        Ok(point.iter().map(|&v| nets.graph.input(v)).collect::<Result<_, _>>()?)
    }

    /// `u_hat` at `coords`: the u-field passed through the problem's ansatz.
    pub fn surrogate(&self, nets: &Networks, coords: &[Node]) -> Result<Node, ProblemError> {
        self.check_coords(coords)?;
        let raw = nets.u.eval(coords)?;
        if nets.use_ansatz {
            Ok(apply_ansatz(self.ansatz, &raw, coords)?)
        } else {
            Ok(raw)
        }
    }

    fn lambda_values(&self, nets: &Networks) -> Result<Vec<Node>, ProblemError> {
        if nets.lambda.is_empty() {
            return Ok(self.inverse.iter().map(|p| nets.graph.constant(p.true_value)).collect::<Result<_, _>>()?);
        }
        if nets.lambda.len() != self.inverse.len() {
            return Err(ProblemError::LambdaCount {
                problem: self.kind,
                expected: self.inverse.len(),
                got: nets.lambda.len(),
            });
        }
        Ok(self.inverse.iter().zip(&nets.lambda).map(|(p, s)| p.value_node(s)).collect())
    }

    /// The residual `f` at symbolic coordinates.
    pub fn residual_at(&self, nets: &Networks, coords: &[Node]) -> Result<Node, ProblemError> {
        let u = self.surrogate(nets, coords)?;
        let x = &coords[0];
        let g = &nets.graph;
        let first = |u: &Node| -> Result<Vec<Node>, ProblemError> { Ok(g.grad(u, coords)?) };
        let second_x = |ux: &Node| -> Result<Node, ProblemError> { Ok(g.grad(ux, std::slice::from_ref(x))?.remove(0)) };
        Ok(match self.kind {
            ProblemKind::FuncApprox => &u - &func_approx_expr(x),
            ProblemKind::Poisson1d => {
                let uxx = second_x(&first(&u)?[0])?;
                let mut src = (x * 8.0).sin() * 8.0;
                for i in 1..=4 {
                    let fi = i as f64;
                    src = &src + &((x * fi).sin() * fi);
                }
                &(-&uxx) - &src
            }
            ProblemKind::DiffReactFwd => {
                let d = first(&u)?;
                let uxx = second_x(&d[0])?;
                &(&d[1] - &uxx) - &diff_react_source(x, &coords[1])
            }
            ProblemKind::Brinkman => {
                let lam = self.lambda_values(nets)?;
                let nu_e = &lam[0];
                let k = if lam.len() > 1 { lam[1].clone() } else { x.constant(BRINKMAN_K) };
                let uxx = second_x(&first(&u)?[0])?;
                let visc = &(nu_e * &uxx) / BRINKMAN_EPS;
                let drag = &(&u * BRINKMAN_NU) / &k;
                &(&drag - &visc) - BRINKMAN_G
            }
            ProblemKind::ReactRateInv => {
                let kf = nets.k.ok_or(ProblemError::MissingNetwork {
                    problem: self.kind,
                    which: "rate",
                })?;
                let k = kf.eval(coords)?;
                let uxx = second_x(&first(&u)?[0])?;
                let src = (x * (2.0 * PI)).sin();
                &(&(&uxx * REACT_LAMBDA) - &(&k * &u)) - &src
            }
            ProblemKind::Burgers => {
                let d = first(&u)?;
                let uxx = second_x(&d[0])?;
                &(&d[1] + &(&u * &d[0])) - &(&uxx * BURGERS_NU)
            }
            ProblemKind::AllenCahn => {
                let d = first(&u)?;
                let uxx = second_x(&d[0])?;
                let react = &(&u - &u.powi(3)) * 5.0;
                &(&d[1] - &(&uxx * ALLEN_CAHN_D)) - &react
            }
        })
    }

    /// The residual and its derivatives along `axes` at symbolic coordinates.
    pub fn residual_and_gradient_at(
        &self,
        nets: &Networks,
        coords: &[Node],
        axes: &[usize],
    ) -> Result<(Node, Vec<Node>), ProblemError> {
        for &a in axes {
            self.check_axis(a)?;
        }
        let f = self.residual_at(nets, coords)?;
        if axes.is_empty() {
            return Ok((f, Vec::new()));
        }
        let wrt: Vec<Node> = axes.iter().map(|&a| coords[a].clone()).collect();
        let df = nets.graph.grad(&f, &wrt)?;
        Ok((f, df))
    }

    /// Boundary or initial value prescribed at a point of a boundary segment.
    pub fn boundary_target(&self, seg: &BoundarySegment, p: &[f64]) -> f64 {
        match (self.kind, seg.kind) {
            (ProblemKind::Burgers, SegmentKind::Initial) => -(PI * p[0]).sin(),
            (ProblemKind::AllenCahn, SegmentKind::Initial) => p[0] * p[0] * (PI * p[0]).cos(),
            (ProblemKind::AllenCahn, SegmentKind::Dirichlet) => -1.0,
            _ => 0.0,
        }
    }

    /// Equispaced points on each boundary segment. Point boundaries of 1D
    /// problems contribute one point each; for space-time problems the
    /// `n_boundary` points are split evenly across the two spatial walls and
    /// `n_initial` points cover `t = 0`.
    pub fn boundary_points(&self, n_boundary: usize, n_initial: usize) -> Vec<BoundaryPoint> {
        let mut out = Vec::new();
        let walls = self.boundary.iter().filter(|s| s.kind == SegmentKind::Dirichlet).count().max(1);
        for seg in &self.boundary {
            let pts: Vec<Vec<f64>> = match (self.dim(), seg.kind) {
                (1, _) => vec![vec![seg.at]],
                (_, SegmentKind::Dirichlet) => {
                    let (t0, t1) = (self.domain.lower[1], self.domain.upper[1]);
                    equispaced(t0, t1, n_boundary / walls).into_iter().map(|t| vec![seg.at, t]).collect()
                }
                (_, SegmentKind::Initial) => {
                    let (a, b) = (self.domain.lower[0], self.domain.upper[0]);
                    equispaced(a, b, n_initial).into_iter().map(|x| vec![x, seg.at]).collect()
                }
            };
            for coords in pts {
                let target = self.boundary_target(seg, &coords);
                out.push(BoundaryPoint { coords, target });
            }
        }
        out
    }

    /// `u_hat - target` at a boundary point.
    pub fn boundary_violation_at(&self, nets: &Networks, coords: &[Node], target: &Node) -> Result<Node, ProblemError> {
        if self.ansatz.is_hard_constraint() {
            return Err(ProblemError::HardConstraint { problem: self.kind });
        }
        Ok(&self.surrogate(nets, coords)? - target)
    }

    /// Closed-form solution as a graph expression with the true parameters.
    pub fn exact_expression(&self, coords: &[Node]) -> Option<Node> {
        let x = coords.first()?;
        match self.kind {
            ProblemKind::FuncApprox => Some(func_approx_expr(x)),
            ProblemKind::Poisson1d => Some(x + &sine_series(x)),
            ProblemKind::DiffReactFwd => Some(&(-&coords[1]).exp() * &sine_series(x)),
            ProblemKind::Brinkman => {
                let r = brinkman_r();
                let c = BRINKMAN_G * BRINKMAN_K / BRINKMAN_NU;
                let shape = (&(x - BRINKMAN_H / 2.0) * r).cosh() / (r * BRINKMAN_H / 2.0).cosh();
                Some(&(1.0 - &shape) * c)
            }
            _ => None,
        }
    }

    /// Closed-form reference: `u` for func-approx, poisson-1d, diff-react-fwd
    /// and brinkman; the exact rate `k(x)` for react-rate-inv.
    pub fn exact_solution(&self, point: &[f64]) -> Result<f64, ProblemError> {
        self.closed_form(point, None)
    }

    /// Derivative of [`exact_solution`](Self::exact_solution) along `axis`.
    pub fn exact_derivative(&self, point: &[f64], axis: usize) -> Result<f64, ProblemError> {
        self.check_axis(axis)?;
        self.closed_form(point, Some(axis))
    }

    fn closed_form(&self, p: &[f64], axis: Option<usize>) -> Result<f64, ProblemError> {
        self.check_point(p)?;
        let x = p[0];
        Ok(match (self.kind, axis) {
            (ProblemKind::FuncApprox, None) => -(1.4 - 3.0 * x) * (18.0 * x).sin(),
            (ProblemKind::FuncApprox, Some(_)) => 3.0 * (18.0 * x).sin() - 18.0 * (1.4 - 3.0 * x) * (18.0 * x).cos(),
            (ProblemKind::Poisson1d, None) => x + sine_series_f64(x),
            (ProblemKind::Poisson1d, Some(_)) => 1.0 + sine_series_derivative(x),
            (ProblemKind::DiffReactFwd, None) => (-p[1]).exp() * sine_series_f64(x),
            (ProblemKind::DiffReactFwd, Some(0)) => (-p[1]).exp() * sine_series_derivative(x),
            (ProblemKind::DiffReactFwd, Some(_)) => -(-p[1]).exp() * sine_series_f64(x),
            (ProblemKind::Brinkman, a) => {
                let r = brinkman_r();
                let c = BRINKMAN_G * BRINKMAN_K / BRINKMAN_NU;
                let s = r * (x - BRINKMAN_H / 2.0);
                let denom = (r * BRINKMAN_H / 2.0).cosh();
                match a {
                    None => c * (1.0 - s.cosh() / denom),
                    Some(_) => -c * r * s.sinh() / denom,
                }
            }
            (ProblemKind::ReactRateInv, None) => exact_rate(x),
            (ProblemKind::ReactRateInv, Some(_)) => {
                let z = (x - 0.5) / (0.15 * 0.15);
                -z * (exact_rate(x) - 0.1)
            }
            (ProblemKind::Burgers | ProblemKind::AllenCahn, _) => return Err(ProblemError::NoClosedForm(self.kind)),
        })
    }

    /// Reference `u` on a space-time grid for burgers and allen-cahn, cached
    /// under `cache` when given.
    pub fn reference_solution(&self, grid: &SpaceTimeGrid, cache: Option<&Path>) -> Result<Vec<f64>, ProblemError> {
        let field = match self.kind {
            ProblemKind::Burgers => reference::CachedField::Burgers,
            ProblemKind::AllenCahn => reference::CachedField::AllenCahn,
            _ => {
                return Err(ProblemError::Option(format!(
                    "{} has a closed form; reference_solution covers burgers and allen-cahn",
                    self.kind
                )))
            }
        };
        let ok = grid.x == [self.domain.lower[0], self.domain.upper[0]] && grid.t[0] >= 0.0 && grid.t[1] <= 1.0;
        if !ok {
            return Err(ReferenceError::Grid {
                nx: grid.nx,
                nt: grid.nt,
                reason: "grid must lie within [-1, 1] x [0, 1] and span x".into(),
            }
            .into());
        }
        Ok(reference::cached_field(field, grid, cache)?)
    }

    /// Sensor locations of an inverse problem.
    pub fn sensor_points(&self) -> Result<Vec<f64>, ProblemError> {
        let rule = self.observation.ok_or(ProblemError::NotInverse(self.kind))?;
        let (a, b) = (self.domain.lower[0], self.domain.upper[0]);
        Ok((1..=rule.count).map(|j| a + (b - a) * j as f64 / (rule.count + 1) as f64).collect())
    }

    /// Sensor data: the reference `u` at [`sensor_points`](Self::sensor_points)
    /// plus Gaussian noise drawn from the seed's observation stream.
    pub fn observations(&self, seed: u64) -> Result<Vec<Observation>, ProblemError> {
        let rule = self.observation.ok_or(ProblemError::NotInverse(self.kind))?;
        let xs = self.sensor_points()?;
        let clean: Vec<f64> = match self.kind {
            ProblemKind::Brinkman => xs.iter().map(|&x| self.exact_solution(&[x])).collect::<Result<_, _>>()?,
            ProblemKind::ReactRateInv => {
                let per = REACT_RATE_INTERVALS.div_ceil(rule.count + 1);
                let (u, _) = react_rate_solution(per * (rule.count + 1));
                (1..=rule.count).map(|j| u[j * per]).collect()
            }
            _ => return Err(ProblemError::NotInverse(self.kind)),
        };
        let mut rng = stream(seed, Stream::Observations);
        let noise = Normal::new(0.0, rule.noise_std.max(0.0)).expect("finite std");
        Ok(xs
            .into_iter()
            .zip(clean)
            .map(|(x, v)| {
                let eps = if rule.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                Observation { coords: vec![x], value: v + eps }
            })
            .collect())
    }
}

/// Residual at a concrete point, built in the networks' graph.
pub fn residual(spec: &ProblemSpec, nets: &Networks, point: &[f64]) -> Result<Node, ProblemError> {
    let coords = spec.coordinate_inputs(nets, point)?;
    spec.residual_at(nets, &coords)
}

/// Derivative of the residual along coordinate `axis` at a concrete point.
pub fn residual_gradient(spec: &ProblemSpec, nets: &Networks, point: &[f64], axis: usize) -> Result<Node, ProblemError> {
    spec.check_axis(axis)?;
    let coords = spec.coordinate_inputs(nets, point)?;
    Ok(spec.residual_and_gradient_at(nets, &coords, &[axis])?.1.remove(0))
}

pub fn exact_solution(spec: &ProblemSpec, point: &[f64]) -> Result<f64, ProblemError> {
    spec.exact_solution(point)
}

pub fn observations(spec: &ProblemSpec, seed: u64) -> Result<Vec<Observation>, ProblemError> {
    spec.observations(seed)
}

fn func_approx_expr(x: &Node) -> Node {
    -&(&(1.4 - &(x * 3.0)) * &(x * 18.0).sin())
}

fn diff_react_source(x: &Node, t: &Node) -> Node {
    let terms = [(2.0, 1.5), (3.0, 8.0 / 3.0), (4.0, 15.0 / 4.0), (8.0, 63.0 / 8.0)];
    let mut acc: Option<Node> = None;
    for (freq, amp) in terms {
        let term = (x * freq).sin() * amp;
        acc = Some(match acc {
            None => term,
            Some(a) => &a + &term,
        });
    }
    &(-t).exp() * &acc.expect("four terms")
}

fn sine_series_derivative(x: f64) -> f64 {
    (1..=4).map(|i| (i as f64 * x).cos()).sum::<f64>() + (8.0 * x).cos()
}

fn brinkman_r() -> f64 {
    (BRINKMAN_NU * BRINKMAN_EPS / (BRINKMAN_NU_E * BRINKMAN_K)).sqrt()
}

/// `k(x) = 0.1 + exp(-0.5 (x - 0.5)^2 / 0.15^2)`.
pub fn exact_rate(x: f64) -> f64 {
    0.1 + (-0.5 * (x - 0.5) * (x - 0.5) / (0.15 * 0.15)).exp()
}

/// Intervals of the finite-difference solve behind the react-rate-inv reference.
pub const REACT_RATE_INTERVALS: usize = 8192;

/// Reference `u` of react-rate-inv at points of `[0, 1]`, from a
/// finite-difference solve whose grid contains every requested point when the
/// points are multiples of a common spacing; other points are interpolated
/// with cubic Hermite splines.
pub fn react_rate_u_at(xs: &[f64]) -> Vec<f64> {
    let (u, du) = react_rate_solution(REACT_RATE_INTERVALS);
    xs.iter().map(|&x| hermite_sample(&u, &du, x)).collect()
}

/// Nodal values and central-difference derivatives of the react-rate-inv
/// solution on `n` intervals.
pub fn react_rate_solution(n: usize) -> (Vec<f64>, Vec<f64>) {
    let u = reference::solve_bvp(REACT_LAMBDA, exact_rate, |x| (2.0 * PI * x).sin(), n);
    let du = fd_derivative(&u, 1.0 / n as f64);
    (u, du)
}

/// Second-order derivative estimate of equispaced samples (one-sided at the ends).
pub fn fd_derivative(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    assert!(n >= 3, "need at least three samples");
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d
}

fn hermite_sample(u: &[f64], du: &[f64], x: f64) -> f64 {
    let n = u.len() - 1;
    let h = 1.0 / n as f64;
    let s = (x.clamp(0.0, 1.0) * n as f64).min(n as f64);
    let i = (s.floor() as usize).min(n - 1);
    let tau = s - i as f64;
    if tau == 0.0 {
        return u[i];
    }
    let (t2, t3) = (tau * tau, tau * tau * tau);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + tau;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * u[i] + h10 * h * du[i] + h01 * u[i + 1] + h11 * h * du[i + 1]
}

/// `n >= 2` equispaced values on `[a, b]` with both endpoints; `n == 1` gives `a`.
pub(crate) fn equispaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[cfg(test)]
mod tests;
