//! Scalar reverse-mode automatic differentiation over an explicit expression graph.
//!
//! Every [`Node`] lives in an append-only [`Graph`]. Taking a gradient does not
//! accumulate numbers on a tape; it appends the adjoint expressions as new
//! nodes. The returned derivative nodes are ordinary graph nodes, so they can be
//! differentiated again (third derivatives of a network output, and parameter
//! gradients of losses built from those derivatives, come from repeated `grad`).
//!
//! Construction folds constants, applies exact algebraic identities
//! (`x + 0`, `x * 1`, `x * 0`, `-(-x)`, ...) and hash-conses structurally equal
//! nodes, which keeps nested derivative graphs small.
//!
//! Graphs are single-threaded (`Rc`). For repeated numeric evaluation of the
//! same graph at many points, compile it into a [`Program`].

mod check;
mod ops;
mod program;

pub use check::{ad_derivative, check_grad, fd_derivative, fd_step};
pub use program::{Program, ProgramStats};

use std::cell::{Ref, RefCell, RefMut};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// Errors raised while building or compiling graphs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("non-finite value {0} cannot be used as a constant or input")]
    NonFinite(f64),
    #[error("{op:?} takes {expected} operand(s), got {got}")]
    Arity {
        op: Primitive,
        expected: usize,
        got: usize,
    },
    #[error("{0:?} is a leaf; create it with Graph::constant or Graph::input")]
    Leaf(Primitive),
    #[error("operands belong to different graphs")]
    CrossGraph,
    #[error("node {0} is an input that was not declared when compiling")]
    UndeclaredInput(u32),
    #[error("node {0} declared as a program input is not an input node")]
    NotAnInput(u32),
}

/// Primitive operations. Each has a symbolic derivative written with other primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    /// Integer power with a non-negative exponent.
    PowInt(u32),
    Sin,
    Cos,
    Exp,
    Tanh,
    Cosh,
    Constant,
    Input,
}

impl Primitive {
    pub fn arity(self) -> usize {
        match self {
            Primitive::Constant | Primitive::Input => 0,
            Primitive::Neg
            | Primitive::PowInt(_)
            | Primitive::Sin
            | Primitive::Cos
            | Primitive::Exp
            | Primitive::Tanh
            | Primitive::Cosh => 1,
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => 2,
        }
    }

    #[inline]
    pub(crate) fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            Primitive::Add => a + b,
            Primitive::Sub => a - b,
            Primitive::Mul => a * b,
            Primitive::Div => a / b,
            Primitive::Neg => -a,
            Primitive::PowInt(k) => powi(a, k),
            Primitive::Sin => a.sin(),
            Primitive::Cos => a.cos(),
            Primitive::Exp => a.exp(),
            Primitive::Tanh => a.tanh(),
            Primitive::Cosh => a.cosh(),
            Primitive::Constant | Primitive::Input => unreachable!("leaves are not evaluated"),
        }
    }
}

#[inline]
pub(crate) fn powi(a: f64, k: u32) -> f64 {
    match k {
        0 => 1.0,
        1 => a,
        2 => a * a,
        3 => a * a * a,
        _ => a.powi(k as i32),
    }
}

/// Sentinel operand index for unused operand slots.
pub(crate) const NO_OPERAND: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Record {
    pub op: Primitive,
    pub a: u32,
    pub b: u32,
    pub value: f64,
}

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Index-level graph storage; the public API wraps it in [`Graph`] and [`Node`].
pub(crate) struct Tape {
    id: u64,
    pub(crate) nodes: Vec<Record>,
    memo: HashMap<(Primitive, u32, u32), u32>,
    constants: HashMap<u64, u32>,
}

impl Tape {
    fn new() -> Self {
        Tape {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            memo: HashMap::new(),
            constants: HashMap::new(),
        }
    }

    #[inline]
    pub(crate) fn value(&self, i: u32) -> f64 {
        self.nodes[i as usize].value
    }

    #[inline]
    fn const_value(&self, i: u32) -> Option<f64> {
        let r = &self.nodes[i as usize];
        (r.op == Primitive::Constant).then_some(r.value)
    }

    fn push(&mut self, op: Primitive, a: u32, b: u32, value: f64) -> u32 {
        let idx = u32::try_from(self.nodes.len()).expect("graph exceeds u32::MAX nodes");
        self.nodes.push(Record { op, a, b, value });
        idx
    }

    /// Interned constant. Callers guarantee finiteness except when folding.
    pub(crate) fn constant(&mut self, v: f64) -> u32 {
        // -0.0 and 0.0 share a node; both behave as zero in the identities below.
        let key = if v == 0.0 { 0 } else { v.to_bits() };
        if let Some(&i) = self.constants.get(&key) {
            return i;
        }
        let i = self.push(Primitive::Constant, NO_OPERAND, NO_OPERAND, if v == 0.0 { 0.0 } else { v });
        self.constants.insert(key, i);
        i
    }

    pub(crate) fn input(&mut self, v: f64) -> u32 {
        self.push(Primitive::Input, NO_OPERAND, NO_OPERAND, v)
    }

    fn memoized(&mut self, op: Primitive, a: u32, b: u32) -> u32 {
        if let Some(&i) = self.memo.get(&(op, a, b)) {
            return i;
        }
        let av = self.value(a);
        let bv = if b == NO_OPERAND { 0.0 } else { self.value(b) };
        let i = self.push(op, a, b, op.eval(av, bv));
        self.memo.insert((op, a, b), i);
        i
    }

    pub(crate) fn unary(&mut self, op: Primitive, a: u32) -> u32 {
        if let Some(av) = self.const_value(a) {
            return self.constant(op.eval(av, 0.0));
        }
        match op {
            Primitive::Neg => {
                let r = self.nodes[a as usize];
                if r.op == Primitive::Neg {
                    return r.a;
                }
            }
            Primitive::PowInt(0) => return self.constant(1.0),
            Primitive::PowInt(1) => return a,
            _ => {}
        }
        self.memoized(op, a, NO_OPERAND)
    }

    pub(crate) fn binary(&mut self, op: Primitive, a: u32, b: u32) -> u32 {
        let ca = self.const_value(a);
        let cb = self.const_value(b);
        if let (Some(x), Some(y)) = (ca, cb) {
            return self.constant(op.eval(x, y));
        }
        match op {
            Primitive::Add => {
                if ca == Some(0.0) {
                    return b;
                }
                if cb == Some(0.0) {
                    return a;
                }
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                self.memoized(op, a, b)
            }
            Primitive::Sub => {
                if cb == Some(0.0) {
                    return a;
                }
                if ca == Some(0.0) {
                    return self.unary(Primitive::Neg, b);
                }
                if a == b {
                    return self.constant(0.0);
                }
                self.memoized(op, a, b)
            }
            Primitive::Mul => {
                if ca == Some(0.0) || cb == Some(0.0) {
                    return self.constant(0.0);
                }
                if ca == Some(1.0) {
                    return b;
                }
                if cb == Some(1.0) {
                    return a;
                }
                if ca == Some(-1.0) {
                    return self.unary(Primitive::Neg, b);
                }
                if cb == Some(-1.0) {
                    return self.unary(Primitive::Neg, a);
                }
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                self.memoized(op, a, b)
            }
            Primitive::Div => {
                if cb == Some(1.0) {
                    return a;
                }
                if ca == Some(0.0) {
                    return self.constant(0.0);
                }
                self.memoized(op, a, b)
            }
            _ => unreachable!("{op:?} is not binary"),
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, a: u32, b: u32) -> u32 {
        self.binary(Primitive::Add, a, b)
    }
    #[inline]
    pub(crate) fn sub(&mut self, a: u32, b: u32) -> u32 {
        self.binary(Primitive::Sub, a, b)
    }
    #[inline]
    pub(crate) fn mul(&mut self, a: u32, b: u32) -> u32 {
        self.binary(Primitive::Mul, a, b)
    }
    #[inline]
    pub(crate) fn div(&mut self, a: u32, b: u32) -> u32 {
        self.binary(Primitive::Div, a, b)
    }
    #[inline]
    pub(crate) fn neg(&mut self, a: u32) -> u32 {
        self.unary(Primitive::Neg, a)
    }

    /// Appends adjoint expressions of `out` and returns one node per `wrt` entry.
    ///
    /// Only nodes lying on a path from some `wrt` node to `out` receive adjoints.
    pub(crate) fn grad(&mut self, out: u32, wrt: &[u32]) -> Vec<u32> {
        let Some(&lo) = wrt.iter().min() else {
            return Vec::new();
        };
        if lo > out {
            let zero = self.constant(0.0);
            return vec![zero; wrt.len()];
        }
        let span = (out - lo + 1) as usize;
        let mut live = vec![false; span];
        for &w in wrt {
            if w <= out {
                live[(w - lo) as usize] = true;
            }
        }
        let is_live = |live: &[bool], i: u32| i != NO_OPERAND && i >= lo && live[(i - lo) as usize];
        for i in lo..=out {
            let r = self.nodes[i as usize];
            if r.op.arity() > 0 && (is_live(&live, r.a) || is_live(&live, r.b)) {
                live[(i - lo) as usize] = true;
            }
        }

        let mut adj = vec![NO_OPERAND; span];
        adj[(out - lo) as usize] = self.constant(1.0);

        for i in (lo..=out).rev() {
            let g = adj[(i - lo) as usize];
            if g == NO_OPERAND || !live[(i - lo) as usize] {
                continue;
            }
            let r = self.nodes[i as usize];
            let (a, b) = (r.a, r.b);
            let la = is_live(&live, a);
            let lb = is_live(&live, b);
            match r.op {
                Primitive::Constant | Primitive::Input => {}
                Primitive::Add => {
                    if la {
                        self.accumulate(&mut adj, lo, a, g, false);
                    }
                    if lb {
                        self.accumulate(&mut adj, lo, b, g, false);
                    }
                }
                Primitive::Sub => {
                    if la {
                        self.accumulate(&mut adj, lo, a, g, false);
                    }
                    if lb {
                        self.accumulate(&mut adj, lo, b, g, true);
                    }
                }
                Primitive::Mul => {
                    if la {
                        let c = self.mul(g, b);
                        self.accumulate(&mut adj, lo, a, c, false);
                    }
                    if lb {
                        let c = self.mul(g, a);
                        self.accumulate(&mut adj, lo, b, c, false);
                    }
                }
                Primitive::Div => {
                    if la {
                        let c = self.div(g, b);
                        self.accumulate(&mut adj, lo, a, c, false);
                    }
                    if lb {
                        // d(a/b)/db = -(a/b)/b
                        let q = self.div(i, b);
                        let c = self.mul(g, q);
                        self.accumulate(&mut adj, lo, b, c, true);
                    }
                }
                Primitive::Neg => self.accumulate(&mut adj, lo, a, g, true),
                Primitive::PowInt(k) => {
                    let k_node = self.constant(f64::from(k));
                    let p = self.unary(Primitive::PowInt(k - 1), a);
                    let d = self.mul(k_node, p);
                    let c = self.mul(g, d);
                    self.accumulate(&mut adj, lo, a, c, false);
                }
                Primitive::Sin => {
                    let d = self.unary(Primitive::Cos, a);
                    let c = self.mul(g, d);
                    self.accumulate(&mut adj, lo, a, c, false);
                }
                Primitive::Cos => {
                    let d = self.unary(Primitive::Sin, a);
                    let c = self.mul(g, d);
                    self.accumulate(&mut adj, lo, a, c, true);
                }
                Primitive::Exp => {
                    let c = self.mul(g, i);
                    self.accumulate(&mut adj, lo, a, c, false);
                }
                Primitive::Tanh => {
                    let one = self.constant(1.0);
                    let sq = self.mul(i, i);
                    let d = self.sub(one, sq);
                    let c = self.mul(g, d);
                    self.accumulate(&mut adj, lo, a, c, false);
                }
                Primitive::Cosh => {
                    // sinh(a) = tanh(a) * cosh(a)
                    let t = self.unary(Primitive::Tanh, a);
                    let d = self.mul(t, i);
                    let c = self.mul(g, d);
                    self.accumulate(&mut adj, lo, a, c, false);
                }
            }
        }

        let zero = self.constant(0.0);
        wrt.iter()
            .map(|&w| {
                if w > out {
                    zero
                } else {
                    let g = adj[(w - lo) as usize];
                    if g == NO_OPERAND {
                        zero
                    } else {
                        g
                    }
                }
            })
            .collect()
    }

    #[inline]
    fn accumulate(&mut self, adj: &mut [u32], lo: u32, target: u32, contrib: u32, negate: bool) {
        let slot = &mut adj[(target - lo) as usize];
        let cur = *slot;
        *slot = match (cur == NO_OPERAND, negate) {
            (true, false) => contrib,
            (true, true) => self.neg(contrib),
            (false, false) => self.add(cur, contrib),
            (false, true) => self.sub(cur, contrib),
        };
    }
}

/// An append-only computation graph. Cloning shares the same graph.
#[derive(Clone)]
pub struct Graph {
    tape: Rc<RefCell<Tape>>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.tape.borrow();
        f.debug_struct("Graph")
            .field("id", &t.id)
            .field("nodes", &t.nodes.len())
            .finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            tape: Rc::new(RefCell::new(Tape::new())),
        }
    }

    pub(crate) fn tape(&self) -> Ref<'_, Tape> {
        self.tape.borrow()
    }

    pub(crate) fn tape_mut(&self) -> RefMut<'_, Tape> {
        self.tape.borrow_mut()
    }

    pub fn id(&self) -> u64 {
        self.tape.borrow().id
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.tape.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn wrap(&self, index: u32) -> Node {
        let value = self.tape.borrow().value(index);
        Node {
            graph: self.clone(),
            index,
            value,
        }
    }

    pub fn constant(&self, v: f64) -> Result<Node, AdError> {
        if !v.is_finite() {
            return Err(AdError::NonFinite(v));
        }
        let i = self.tape_mut().constant(v);
        Ok(self.wrap(i))
    }

    /// A differentiable leaf.
    pub fn input(&self, v: f64) -> Result<Node, AdError> {
        if !v.is_finite() {
            return Err(AdError::NonFinite(v));
        }
        let i = self.tape_mut().input(v);
        Ok(self.wrap(i))
    }

    fn owns(&self, n: &Node) -> bool {
        Rc::ptr_eq(&self.tape, &n.graph.tape)
    }

    pub fn apply(&self, p: Primitive, operands: &[&Node]) -> Result<Node, AdError> {
        let expected = p.arity();
        if expected == 0 {
            return Err(AdError::Leaf(p));
        }
        if operands.len() != expected {
            return Err(AdError::Arity {
                op: p,
                expected,
                got: operands.len(),
            });
        }
        if operands.iter().any(|n| !self.owns(n)) {
            return Err(AdError::CrossGraph);
        }
        let i = {
            let mut t = self.tape_mut();
            if expected == 1 {
                t.unary(p, operands[0].index)
            } else {
                t.binary(p, operands[0].index, operands[1].index)
            }
        };
        Ok(self.wrap(i))
    }

    /// Derivatives of `output` with respect to each node in `wrt`, as new graph nodes.
    pub fn grad(&self, output: &Node, wrt: &[Node]) -> Result<Vec<Node>, AdError> {
        if !self.owns(output) || wrt.iter().any(|n| !self.owns(n)) {
            return Err(AdError::CrossGraph);
        }
        let ids: Vec<u32> = wrt.iter().map(|n| n.index).collect();
        let out = self.tape_mut().grad(output.index, &ids);
        Ok(out.into_iter().map(|i| self.wrap(i)).collect())
    }
}

/// Derivatives of `output` with respect to `wrt`; see [`Graph::grad`].
pub fn grad(output: &Node, wrt: &[Node]) -> Result<Vec<Node>, AdError> {
    output.graph.grad(output, wrt)
}

/// A value in a [`Graph`]. Cheap to clone; holds a handle to its graph.
#[derive(Clone)]
pub struct Node {
    graph: Graph,
    index: u32,
    value: f64,
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Node#{}({})", self.index, self.value)
    }
}

impl Node {
    /// Primal value.
    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn primitive(&self) -> Primitive {
        self.graph.tape().nodes[self.index as usize].op
    }

    pub fn same_graph(&self, other: &Node) -> bool {
        Rc::ptr_eq(&self.graph.tape, &other.graph.tape)
    }

    fn unary(&self, p: Primitive) -> Node {
        let i = self.graph.tape_mut().unary(p, self.index);
        self.graph.wrap(i)
    }

    pub fn sin(&self) -> Node {
        self.unary(Primitive::Sin)
    }
    pub fn cos(&self) -> Node {
        self.unary(Primitive::Cos)
    }
    pub fn exp(&self) -> Node {
        self.unary(Primitive::Exp)
    }
    pub fn tanh(&self) -> Node {
        self.unary(Primitive::Tanh)
    }
    pub fn cosh(&self) -> Node {
        self.unary(Primitive::Cosh)
    }
    pub fn powi(&self, k: u32) -> Node {
        self.unary(Primitive::PowInt(k))
    }
    pub fn square(&self) -> Node {
        self.powi(2)
    }

    /// A constant in this node's graph.
    pub fn constant(&self, v: f64) -> Node {
        let i = self.graph.tape_mut().constant(v);
        self.graph.wrap(i)
    }

    /// Binary operation with another node, panicking if the graphs differ.
    pub(crate) fn binary(&self, p: Primitive, rhs: &Node) -> Node {
        assert!(
            self.same_graph(rhs),
            "arithmetic between nodes of different graphs; use Graph::apply for a checked variant"
        );
        let i = self.graph.tape_mut().binary(p, self.index, rhs.index);
        self.graph.wrap(i)
    }

    pub(crate) fn binary_scalar(&self, p: Primitive, rhs: f64, scalar_left: bool) -> Node {
        let mut t = self.graph.tape_mut();
        let c = t.constant(rhs);
        let i = if scalar_left {
            t.binary(p, c, self.index)
        } else {
            t.binary(p, self.index, c)
        };
        drop(t);
        self.graph.wrap(i)
    }
}
