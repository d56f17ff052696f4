//! Compiled, batched evaluation of a fixed graph.
//!
//! A graph built once for a symbolic point (coordinates as inputs) is lowered to
//! straight-line code and re-evaluated for many points and many parameter
//! values without rebuilding it. Nodes are split into two classes:
//!
//! * *uniform* nodes depend only on constants and uniform inputs (network
//!   parameters); they are computed once per evaluation;
//! * *varying* nodes depend on a lane input (a per-point coordinate or datum);
//!   they are computed for a chunk of points at a time, one instruction over all
//!   lanes of the chunk.
//!
//! Varying values live in a register file whose slots are recycled after each
//! value's last use. Outputs are either returned per point or reduced over
//! points with the fixed tree of [`crate::sum`].

use super::{powi, AdError, Graph, Node, Primitive, NO_OPERAND};
use crate::sum;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Src {
    Uniform(u32),
    Varying(u32),
}

#[derive(Clone, Copy, Debug)]
enum VOp {
    AddVV,
    AddVU,
    SubVV,
    SubVU,
    SubUV,
    MulVV,
    MulVU,
    DivVV,
    DivVU,
    DivUV,
    /// `a + b * c`
    MulAddVVU,
    MulAddVVV,
    MulAddUVU,
    MulAddUVV,
    /// `a - b * c`
    MulSubVVU,
    MulSubVVV,
    MulSubUVU,
    MulSubUVV,
    Neg,
    Pow(u32),
    Sin,
    Cos,
    Exp,
    Tanh,
    Cosh,
}

#[derive(Clone, Copy, Debug)]
struct VInstr {
    op: VOp,
    dst: u32,
    a: u32,
    b: u32,
    c: u32,
}

#[derive(Clone, Copy, Debug)]
struct UInstr {
    op: Primitive,
    dst: u32,
    a: u32,
    b: u32,
}

/// Size summary of a compiled program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramStats {
    pub uniform_instructions: usize,
    pub varying_instructions: usize,
    pub varying_slots: usize,
}

/// Straight-line code for a set of graph outputs; see the module docs.
#[derive(Debug, Clone)]
pub struct Program {
    n_uniform_slots: usize,
    constants: Vec<(u32, f64)>,
    uniform_inputs: Vec<Option<u32>>,
    uniform_code: Vec<UInstr>,
    lane_inputs: Vec<Option<u32>>,
    varying_code: Vec<VInstr>,
    n_varying_slots: usize,
    outputs: Vec<Src>,
}

const UNASSIGNED: u32 = u32::MAX;

impl Program {
    /// Lowers `outputs` of `graph`.
    ///
    /// `lane_inputs` are per-point inputs, `uniform_inputs` are shared by all
    /// points. Every input node reachable from an output must be declared in
    /// exactly one of the two lists.
    pub fn compile(
        graph: &Graph,
        lane_inputs: &[Node],
        uniform_inputs: &[Node],
        outputs: &[Node],
    ) -> Result<Program, AdError> {
        for n in lane_inputs.iter().chain(uniform_inputs).chain(outputs) {
            if n.graph().id() != graph.id() {
                return Err(AdError::CrossGraph);
            }
        }
        let tape = graph.tape();
        let nodes = &tape.nodes;
        for n in lane_inputs.iter().chain(uniform_inputs) {
            if nodes[n.index() as usize].op != Primitive::Input {
                return Err(AdError::NotAnInput(n.index()));
            }
        }
        let top = outputs.iter().map(|n| n.index() as usize + 1).max().unwrap_or(0);
        let top = top.max(
            lane_inputs
                .iter()
                .chain(uniform_inputs)
                .map(|n| n.index() as usize + 1)
                .max()
                .unwrap_or(0),
        );

        let mut reach = vec![false; top];
        for n in outputs {
            reach[n.index() as usize] = true;
        }
        for i in (0..top).rev() {
            if !reach[i] {
                continue;
            }
            let r = nodes[i];
            if r.a != NO_OPERAND {
                reach[r.a as usize] = true;
            }
            if r.b != NO_OPERAND {
                reach[r.b as usize] = true;
            }
        }

        // Classification: varying iff it depends on a lane input.
        const UNIFORM_INPUT: u8 = 1;
        const LANE_INPUT: u8 = 2;
        let mut declared = vec![0u8; top];
        for n in uniform_inputs {
            declared[n.index() as usize] = UNIFORM_INPUT;
        }
        for n in lane_inputs {
            declared[n.index() as usize] = LANE_INPUT;
        }
        let mut varying = vec![false; top];
        for i in 0..top {
            if !reach[i] {
                continue;
            }
            let r = nodes[i];
            varying[i] = match r.op {
                Primitive::Input => match declared[i] {
                    LANE_INPUT => true,
                    UNIFORM_INPUT => false,
                    _ => return Err(AdError::UndeclaredInput(i as u32)),
                },
                Primitive::Constant => false,
                _ => {
                    (r.a != NO_OPERAND && varying[r.a as usize])
                        || (r.b != NO_OPERAND && varying[r.b as usize])
                }
            };
        }

        // Uniform slots: no reuse, uniform code is small.
        let mut uslot = vec![UNASSIGNED; top];
        let mut n_uniform_slots = 0u32;
        let mut constants = Vec::new();
        let mut uniform_code = Vec::new();
        for n in uniform_inputs {
            let i = n.index() as usize;
            if reach[i] && uslot[i] == UNASSIGNED {
                uslot[i] = n_uniform_slots;
                n_uniform_slots += 1;
            }
        }
        for i in 0..top {
            if !reach[i] || varying[i] || uslot[i] != UNASSIGNED {
                continue;
            }
            let r = nodes[i];
            uslot[i] = n_uniform_slots;
            n_uniform_slots += 1;
            match r.op {
                Primitive::Constant => constants.push((uslot[i], r.value)),
                Primitive::Input => unreachable!("uniform inputs were assigned above"),
                op => uniform_code.push(UInstr {
                    op,
                    dst: uslot[i],
                    a: uslot[r.a as usize],
                    b: if r.b == NO_OPERAND { NO_OPERAND } else { uslot[r.b as usize] },
                }),
            }
        }
        let uniform_inputs_slots = uniform_inputs
            .iter()
            .map(|n| {
                let s = uslot[n.index() as usize];
                (s != UNASSIGNED).then_some(s)
            })
            .collect();

        // Fuse `x + y * z` and `x - y * z` when the product has no other use.
        let mut uses = vec![0u32; top];
        for i in 0..top {
            if reach[i] && varying[i] {
                let r = nodes[i];
                for o in [r.a, r.b] {
                    if o != NO_OPERAND {
                        uses[o as usize] += 1;
                    }
                }
            }
        }
        for n in outputs {
            uses[n.index() as usize] += 1;
        }
        let fusable = |m: u32| {
            let m = m as usize;
            varying[m] && nodes[m].op == Primitive::Mul && uses[m] == 1
        };
        let mut absorbed = vec![false; top];
        // (accumulator, product) per fused node
        let mut fused: Vec<Option<(u32, u32)>> = vec![None; top];
        for i in 0..top {
            if !reach[i] || !varying[i] {
                continue;
            }
            let r = nodes[i];
            let pick = match r.op {
                Primitive::Add if r.a != r.b && fusable(r.b) => Some((r.a, r.b)),
                Primitive::Add if r.a != r.b && fusable(r.a) => Some((r.b, r.a)),
                Primitive::Sub if r.a != r.b && fusable(r.b) => Some((r.a, r.b)),
                _ => None,
            };
            if let Some((acc, m)) = pick {
                if !absorbed[acc as usize] {
                    absorbed[m as usize] = true;
                    fused[i] = Some((acc, m));
                }
            }
        }
        let emitted_operands = |i: usize| -> [u32; 3] {
            match fused[i] {
                Some((acc, m)) => {
                    let mr = nodes[m as usize];
                    [acc, mr.a, mr.b]
                }
                None => [nodes[i].a, nodes[i].b, NO_OPERAND],
            }
        };

        // Varying register allocation by last use.
        let mut last_use = vec![0u32; top];
        for i in 0..top {
            if !reach[i] || !varying[i] || absorbed[i] {
                continue;
            }
            for o in emitted_operands(i) {
                if o != NO_OPERAND && varying[o as usize] {
                    last_use[o as usize] = i as u32;
                }
            }
        }
        for n in outputs {
            last_use[n.index() as usize] = u32::MAX;
        }

        let mut vslot = vec![UNASSIGNED; top];
        let mut free: Vec<u32> = Vec::new();
        let mut n_varying_slots = 0u32;
        let mut lane_slots = Vec::with_capacity(lane_inputs.len());
        for n in lane_inputs {
            let i = n.index() as usize;
            if reach[i] {
                if vslot[i] == UNASSIGNED {
                    vslot[i] = n_varying_slots;
                    n_varying_slots += 1;
                }
                lane_slots.push(Some(vslot[i]));
            } else {
                lane_slots.push(None);
            }
        }
        let mut varying_code = Vec::new();
        for i in 0..top {
            if !reach[i] || !varying[i] || absorbed[i] || nodes[i].op == Primitive::Input {
                continue;
            }
            let r = nodes[i];
            let src = |o: u32| -> Src {
                if varying[o as usize] {
                    Src::Varying(vslot[o as usize])
                } else {
                    Src::Uniform(uslot[o as usize])
                }
            };
            let ops = emitted_operands(i);
            let srcs: Vec<Option<Src>> = ops
                .iter()
                .map(|&o| (o != NO_OPERAND).then(|| src(o)))
                .collect();

            // Release operands whose last use is this node; the result may reuse them.
            for k in 0..3 {
                let o = ops[k];
                if o != NO_OPERAND
                    && !ops[..k].contains(&o)
                    && varying[o as usize]
                    && last_use[o as usize] == i as u32
                {
                    free.push(vslot[o as usize]);
                }
            }
            let dst = free.pop().unwrap_or_else(|| {
                n_varying_slots += 1;
                n_varying_slots - 1
            });
            vslot[i] = dst;

            use Src::{Uniform as U, Varying as V};
            let (op, a, b, c) = if fused[i].is_some() {
                let sub = r.op == Primitive::Sub;
                // order the product so a varying factor comes first
                let (y, z) = match (srcs[1].unwrap(), srcs[2].unwrap()) {
                    (U(y), V(z)) => (V(z), U(y)),
                    other => other,
                };
                match (srcs[0].unwrap(), y, z, sub) {
                    (V(a), V(b), U(c), false) => (VOp::MulAddVVU, a, b, c),
                    (V(a), V(b), V(c), false) => (VOp::MulAddVVV, a, b, c),
                    (U(a), V(b), U(c), false) => (VOp::MulAddUVU, a, b, c),
                    (U(a), V(b), V(c), false) => (VOp::MulAddUVV, a, b, c),
                    (V(a), V(b), U(c), true) => (VOp::MulSubVVU, a, b, c),
                    (V(a), V(b), V(c), true) => (VOp::MulSubVVV, a, b, c),
                    (U(a), V(b), U(c), true) => (VOp::MulSubUVU, a, b, c),
                    (U(a), V(b), V(c), true) => (VOp::MulSubUVV, a, b, c),
                    other => unreachable!("unsupported fused operand kinds {other:?}"),
                }
            } else {
                let (sa, sb) = (srcs[0].expect("operand"), srcs[1]);
                let (op, a, b) = match (r.op, sa, sb) {
                    (Primitive::Add, V(a), Some(V(b))) => (VOp::AddVV, a, b),
                    (Primitive::Add, V(a), Some(U(b))) | (Primitive::Add, U(b), Some(V(a))) => (VOp::AddVU, a, b),
                    (Primitive::Sub, V(a), Some(V(b))) => (VOp::SubVV, a, b),
                    (Primitive::Sub, V(a), Some(U(b))) => (VOp::SubVU, a, b),
                    (Primitive::Sub, U(a), Some(V(b))) => (VOp::SubUV, a, b),
                    (Primitive::Mul, V(a), Some(V(b))) => (VOp::MulVV, a, b),
                    (Primitive::Mul, V(a), Some(U(b))) | (Primitive::Mul, U(b), Some(V(a))) => (VOp::MulVU, a, b),
                    (Primitive::Div, V(a), Some(V(b))) => (VOp::DivVV, a, b),
                    (Primitive::Div, V(a), Some(U(b))) => (VOp::DivVU, a, b),
                    (Primitive::Div, U(a), Some(V(b))) => (VOp::DivUV, a, b),
                    (Primitive::Neg, V(a), None) => (VOp::Neg, a, 0),
                    (Primitive::PowInt(k), V(a), None) => (VOp::Pow(k), a, 0),
                    (Primitive::Sin, V(a), None) => (VOp::Sin, a, 0),
                    (Primitive::Cos, V(a), None) => (VOp::Cos, a, 0),
                    (Primitive::Exp, V(a), None) => (VOp::Exp, a, 0),
                    (Primitive::Tanh, V(a), None) => (VOp::Tanh, a, 0),
                    (Primitive::Cosh, V(a), None) => (VOp::Cosh, a, 0),
                    other => unreachable!("inconsistent varying classification: {other:?}"),
                };
                (op, a, b, 0)
            };
            varying_code.push(VInstr { op, dst, a, b, c });
        }

        let outputs = outputs
            .iter()
            .map(|n| {
                let i = n.index() as usize;
                if varying[i] {
                    Src::Varying(vslot[i])
                } else {
                    Src::Uniform(uslot[i])
                }
            })
            .collect();

        Ok(Program {
            n_uniform_slots: n_uniform_slots as usize,
            constants,
            uniform_inputs: uniform_inputs_slots,
            uniform_code,
            lane_inputs: lane_slots,
            varying_code,
            n_varying_slots: n_varying_slots as usize,
            outputs,
        })
    }

    pub fn stats(&self) -> ProgramStats {
        ProgramStats {
            uniform_instructions: self.uniform_code.len(),
            varying_instructions: self.varying_code.len(),
            varying_slots: self.n_varying_slots,
        }
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn num_lane_inputs(&self) -> usize {
        self.lane_inputs.len()
    }

    pub fn num_uniform_inputs(&self) -> usize {
        self.uniform_inputs.len()
    }

    fn eval_uniform(&self, uniform: &[f64]) -> Vec<f64> {
        assert_eq!(uniform.len(), self.uniform_inputs.len(), "uniform input count");
        let mut u = vec![0.0; self.n_uniform_slots];
        for (&slot, &v) in self.uniform_inputs.iter().zip(uniform) {
            if let Some(s) = slot {
                u[s as usize] = v;
            }
        }
        for &(s, v) in &self.constants {
            u[s as usize] = v;
        }
        for ins in &self.uniform_code {
            let a = u[ins.a as usize];
            let b = if ins.b == NO_OPERAND { 0.0 } else { u[ins.b as usize] };
            u[ins.dst as usize] = ins.op.eval(a, b);
        }
        u
    }

    /// Evaluates every output at every point. `lanes` is point-major with
    /// [`num_lane_inputs`](Self::num_lane_inputs) values per point; the result
    /// is point-major with [`num_outputs`](Self::num_outputs) values per point.
    pub fn eval_points(&self, uniform: &[f64], lanes: &[f64], n_points: usize) -> Vec<f64> {
        let n_out = self.outputs.len();
        let mut out = vec![0.0; n_points * n_out];
        self.drive(uniform, lanes, n_points, |base, valid, lane_width, regs, u| {
            for (j, src) in self.outputs.iter().enumerate() {
                for k in 0..valid {
                    out[(base + k) * n_out + j] = read(src, regs, u, lane_width, k);
                }
            }
        });
        out
    }

    /// Evaluates and sums every output over the points with the fixed tree of
    /// [`crate::sum`]; bitwise equal to `tree_sum` over [`eval_points`](Self::eval_points).
    pub fn eval_sums(&self, uniform: &[f64], lanes: &[f64], n_points: usize) -> Vec<f64> {
        let n_out = self.outputs.len();
        let mut partials: Vec<Vec<f64>> = vec![Vec::new(); n_out];
        let mut scratch = Vec::new();
        self.drive(uniform, lanes, n_points, |_, valid, lane_width, regs, u| {
            for (j, src) in self.outputs.iter().enumerate() {
                scratch.clear();
                scratch.extend((0..valid).map(|k| read(src, regs, u, lane_width, k)));
                partials[j].push(sum::tree_sum(&scratch));
            }
        });
        partials.iter().map(|p| sum::pairwise_sum(p)).collect()
    }

    fn lane_width(n_points: usize) -> usize {
        match n_points {
            0..=8 => 8,
            9..=16 => 16,
            _ => 32,
        }
    }

    fn drive<F>(&self, uniform: &[f64], lanes: &[f64], n_points: usize, mut sink: F)
    where
        F: FnMut(usize, usize, usize, &[f64], &[f64]),
    {
        let n_in = self.lane_inputs.len();
        assert_eq!(lanes.len(), n_points * n_in, "lane data length");
        if n_points == 0 {
            return;
        }
        let u = self.eval_uniform(uniform);
        match Self::lane_width(n_points) {
            8 => self.drive_width::<8, F>(&u, lanes, n_points, &mut sink),
            16 => self.drive_width::<16, F>(&u, lanes, n_points, &mut sink),
            _ => self.drive_width::<32, F>(&u, lanes, n_points, &mut sink),
        }
    }

    fn drive_width<const L: usize, F>(&self, u: &[f64], lanes: &[f64], n_points: usize, sink: &mut F)
    where
        F: FnMut(usize, usize, usize, &[f64], &[f64]),
    {
        let n_in = self.lane_inputs.len();
        let mut regs = vec![0.0f64; self.n_varying_slots.max(1) * L];
        let mut base = 0;
        while base < n_points {
            let valid = (n_points - base).min(L);
            for (j, slot) in self.lane_inputs.iter().enumerate() {
                if let Some(s) = slot {
                    let s = *s as usize * L;
                    for k in 0..L {
                        let p = base + k.min(valid - 1);
                        regs[s + k] = lanes[p * n_in + j];
                    }
                }
            }
            run::<L>(&self.varying_code, &mut regs, u);
            sink(base, valid, L, &regs, u);
            base += L;
        }
    }
}

#[inline]
fn read(src: &Src, regs: &[f64], u: &[f64], lane_width: usize, k: usize) -> f64 {
    match *src {
        Src::Uniform(s) => u[s as usize],
        Src::Varying(s) => regs[s as usize * lane_width + k],
    }
}

fn run<const L: usize>(code: &[VInstr], regs: &mut [f64], u: &[f64]) {
    let r = regs.as_mut_ptr();
    let n_regs = regs.len();
    for ins in code {
        debug_assert!((ins.dst as usize + 1) * L <= n_regs);
        // SAFETY: compile() only emits varying slot indices below n_varying_slots and
        // uniform slot indices below n_uniform_slots; the register file holds
        // n_varying_slots * L values. Destination and sources may alias; every
        // lane is read before it is written.
        unsafe {
            let d = r.add(ins.dst as usize * L);
            let va = || r.add(ins.a as usize * L) as *const f64;
            let vb = || r.add(ins.b as usize * L) as *const f64;
            let vc = || r.add(ins.c as usize * L) as *const f64;
            let ua = || *u.get_unchecked(ins.a as usize);
            let ub = || *u.get_unchecked(ins.b as usize);
            let uc = || *u.get_unchecked(ins.c as usize);
            macro_rules! lanes {
                (|$k:ident| $e:expr) => {
                    for $k in 0..L {
                        *d.add($k) = $e;
                    }
                };
            }
            match ins.op {
                VOp::AddVV => {
                    let (a, b) = (va(), vb());
                    lanes!(|k| *a.add(k) + *b.add(k))
                }
                VOp::AddVU => {
                    let (a, c) = (va(), ub());
                    lanes!(|k| *a.add(k) + c)
                }
                VOp::SubVV => {
                    let (a, b) = (va(), vb());
                    lanes!(|k| *a.add(k) - *b.add(k))
                }
                VOp::SubVU => {
                    let (a, c) = (va(), ub());
                    lanes!(|k| *a.add(k) - c)
                }
                VOp::SubUV => {
                    let (c, b) = (ua(), vb());
                    lanes!(|k| c - *b.add(k))
                }
                VOp::MulVV => {
                    let (a, b) = (va(), vb());
                    lanes!(|k| *a.add(k) * *b.add(k))
                }
                VOp::MulVU => {
                    let (a, c) = (va(), ub());
                    lanes!(|k| *a.add(k) * c)
                }
                VOp::DivVV => {
                    let (a, b) = (va(), vb());
                    lanes!(|k| *a.add(k) / *b.add(k))
                }
                VOp::DivVU => {
                    let (a, c) = (va(), ub());
                    lanes!(|k| *a.add(k) / c)
                }
                VOp::DivUV => {
                    let (c, b) = (ua(), vb());
                    lanes!(|k| c / *b.add(k))
                }
                VOp::MulAddVVU => {
                    let (a, b, c) = (va(), vb(), uc());
                    lanes!(|k| *a.add(k) + *b.add(k) * c)
                }
                VOp::MulAddVVV => {
                    let (a, b, c) = (va(), vb(), vc());
                    lanes!(|k| *a.add(k) + *b.add(k) * *c.add(k))
                }
                VOp::MulAddUVU => {
                    let (a, b, c) = (ua(), vb(), uc());
                    lanes!(|k| a + *b.add(k) * c)
                }
                VOp::MulAddUVV => {
                    let (a, b, c) = (ua(), vb(), vc());
                    lanes!(|k| a + *b.add(k) * *c.add(k))
                }
                VOp::MulSubVVU => {
                    let (a, b, c) = (va(), vb(), uc());
                    lanes!(|k| *a.add(k) - *b.add(k) * c)
                }
                VOp::MulSubVVV => {
                    let (a, b, c) = (va(), vb(), vc());
                    lanes!(|k| *a.add(k) - *b.add(k) * *c.add(k))
                }
                VOp::MulSubUVU => {
                    let (a, b, c) = (ua(), vb(), uc());
                    lanes!(|k| a - *b.add(k) * c)
                }
                VOp::MulSubUVV => {
                    let (a, b, c) = (ua(), vb(), vc());
                    lanes!(|k| a - *b.add(k) * *c.add(k))
                }
                VOp::Neg => {
                    let a = va();
                    lanes!(|k| -*a.add(k))
                }
                VOp::Pow(p) => {
                    let a = va();
                    lanes!(|k| powi(*a.add(k), p))
                }
                VOp::Sin => {
                    let a = va();
                    lanes!(|k| (*a.add(k)).sin())
                }
                VOp::Cos => {
                    let a = va();
                    lanes!(|k| (*a.add(k)).cos())
                }
                VOp::Exp => {
                    let a = va();
                    lanes!(|k| (*a.add(k)).exp())
                }
                VOp::Tanh => {
                    let a = va();
                    lanes!(|k| (*a.add(k)).tanh())
                }
                VOp::Cosh => {
                    let a = va();
                    lanes!(|k| (*a.add(k)).cosh())
                }
            }
        }
    }
}
