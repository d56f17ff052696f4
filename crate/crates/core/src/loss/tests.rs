use std::f64::consts::PI;

use super::compiled::PackedSets;
use super::*;
use crate::autodiff::Graph;
use crate::model::{layer_sizes, ModelParams};
use crate::problems::{Expr, ProblemKind, ProblemOptions};

fn spec(kind: ProblemKind) -> ProblemSpec {
    ProblemSpec::new(kind, &ProblemOptions::default()).unwrap()
}

fn interior(spec: &ProblemSpec, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            spec.domain
                .lower
                .iter()
                .zip(&spec.domain.upper)
                .enumerate()
                .map(|(k, (a, b))| {
                    let s = ((i * (7 + 5 * k) + 3 * k + 1) % (n + 1)) as f64 / (n + 1) as f64;
                    a + (b - a) * (0.05 + 0.9 * s)
                })
                .collect()
        })
        .collect()
}

fn sets_for(spec: &ProblemSpec, n: usize) -> PointSets {
    PointSets {
        residual: interior(spec, n),
        boundary: if spec.uses_boundary_loss() { spec.boundary_points(8, 8) } else { Vec::new() },
        observations: if spec.is_inverse() { spec.observations(1).unwrap() } else { Vec::new() },
    }
}

#[test]
fn exact_surrogate_gives_vanishing_losses() {
    for kind in [ProblemKind::Poisson1d, ProblemKind::DiffReactFwd, ProblemKind::Brinkman] {
        let s = spec(kind);
        let g = Graph::new();
        let sc = s.clone();
        let f = Expr(move |c: &[crate::autodiff::Node]| sc.exact_expression(c).unwrap());
        let nets = Networks::new(&g, &f).direct();
        let pts = interior(&s, 30);
        assert!(loss_f(&s, &nets, &pts).unwrap().value() < 1e-16);
        for axis in 0..s.dim() {
            assert!(loss_g(&s, &nets, &pts, axis).unwrap().value() < 1e-14);
        }
    }
}

#[test]
fn hand_computed_examples() {
    let g = Graph::new();
    let zero = Expr(|c: &[crate::autodiff::Node]| c[0].constant(0.0));
    let nets = Networks::new(&g, &zero);
    let b = spec(ProblemKind::Brinkman);
    assert_eq!(loss_f(&b, &nets, &interior(&b, 13)).unwrap().value(), 1.0);

    let p = spec(ProblemKind::Poisson1d);
    let ident = Expr(|c: &[crate::autodiff::Node]| c[0].clone());
    let raw = Networks::new(&g, &ident).direct();
    assert!((loss_g(&p, &raw, &[vec![0.0]], 0).unwrap().value() - 8836.0).abs() < 1e-9);
    let x = vec![1.3];
    let f1 = crate::problems::residual(&p, &raw, &x).unwrap().value();
    assert_eq!(loss_f(&p, &raw, &[x]).unwrap().value(), f1 * f1);

    let bu = spec(ProblemKind::Burgers);
    let walls: Vec<_> = bu.boundary_points(20, 10).into_iter().filter(|p| p.coords[0].abs() == 1.0).collect();
    assert!(loss_b(&bu, &nets, &walls).unwrap().value() < 1e-30);
    let one = [crate::problems::BoundaryPoint { coords: vec![0.5, 0.0], target: -(PI * 0.5).sin() }];
    assert_eq!(loss_b(&bu, &nets, &one).unwrap().value(), 1.0);

    let ac = spec(ProblemKind::AllenCahn);
    let minus_one = Expr(|c: &[crate::autodiff::Node]| c[0].constant(-1.0));
    let n1 = Networks::new(&g, &minus_one);
    let walls: Vec<_> = ac.boundary_points(20, 10).into_iter().filter(|p| p.coords[0].abs() == 1.0).collect();
    assert!(loss_b(&ac, &n1, &walls).unwrap().value() < 1e-30);

    let obs = [crate::problems::Observation { coords: vec![0.3], value: 0.1 }];
    let d = loss_data(&b, &nets, &obs).unwrap().value();
    assert!((d - 0.01).abs() < 1e-17);

    // a residual that does not depend on x has zero gradient loss
    let fa = spec(ProblemKind::FuncApprox);
    let sc = fa.clone();
    let plus_c = Expr(move |c: &[crate::autodiff::Node]| &sc.exact_expression(c).unwrap() + 0.25);
    let nc = Networks::new(&g, &plus_c).direct();
    assert!(loss_g(&fa, &nc, &interior(&fa, 9), 0).unwrap().value() < 1e-24);
    assert!((loss_f(&fa, &nc, &interior(&fa, 9)).unwrap().value() - 0.0625).abs() < 1e-15);
}

#[test]
fn errors() {
    let g = Graph::new();
    let zero = Expr(|c: &[crate::autodiff::Node]| c[0].constant(0.0));
    let nets = Networks::new(&g, &zero);
    let p = spec(ProblemKind::Poisson1d);
    assert!(matches!(loss_f(&p, &nets, &[]), Err(LossError::Empty(_))));
    assert!(matches!(loss_g(&p, &nets, &[vec![1.0]], 1), Err(LossError::Problem(_))));
    assert!(loss_b(&p, &nets, &[]).is_err());
    let mut w = LossWeights::gpinn(1, 0.1);
    w.w_b = -1.0;
    assert!(matches!(total_loss(&p, &nets, &sets_for(&p, 3), &w), Err(LossError::NegativeWeight { .. })));
    assert!(matches!(
        total_loss(&p, &nets, &sets_for(&p, 3), &LossWeights::gpinn(2, 0.1)),
        Err(LossError::WeightCount { .. })
    ));
}

fn bound_random(spec: &ProblemSpec, seed: u64) -> (Graph, ModelParams) {
    let m = ModelParams::init(spec, &layer_sizes(spec.dim(), 3, 6), &layer_sizes(1, 2, 5), seed).unwrap();
    (Graph::new(), m)
}

#[test]
fn pinn_total_is_the_plain_sum_bitwise() {
    for kind in ProblemKind::ALL {
        let s = spec(kind);
        let (g, m) = bound_random(&s, 4);
        let b = m.bind(&g).unwrap();
        let nets = b.networks();
        let sets = sets_for(&s, 12);
        let total = total_loss(&s, &nets, &sets, &LossWeights::pinn(s.dim())).unwrap().value();
        let mut plain = loss_f(&s, &nets, &sets.residual).unwrap().value();
        if s.uses_boundary_loss() {
            plain += loss_b(&s, &nets, &sets.boundary).unwrap().value();
        }
        if s.is_inverse() {
            plain += loss_data(&s, &nets, &sets.observations).unwrap().value();
        }
        assert_eq!(total.to_bits(), plain.to_bits(), "{kind}");
    }
}

#[test]
fn gpinn_total_adds_weighted_gradient_terms() {
    let s = spec(ProblemKind::DiffReactFwd);
    let (g, m) = bound_random(&s, 5);
    let b = m.bind(&g).unwrap();
    let nets = b.networks();
    let sets = sets_for(&s, 10);
    let lf = loss_f(&s, &nets, &sets.residual).unwrap().value();
    let gx = loss_g(&s, &nets, &sets.residual, 0).unwrap().value();
    let gt = loss_g(&s, &nets, &sets.residual, 1).unwrap().value();
    let w = 0.1;
    let total = total_loss(&s, &nets, &sets, &LossWeights::gpinn(2, w)).unwrap().value();
    assert_eq!(total.to_bits(), (lf + gx * w + gt * w).to_bits());
    // affine in each weight: doubling w doubles the gradient contribution
    let t2 = total_loss(&s, &nets, &sets, &LossWeights::gpinn(2, 2.0 * w)).unwrap().value();
    assert!(((t2 - lf) - 2.0 * (total - lf)).abs() < 1e-12 * total);
}

#[test]
fn permutation_changes_loss_only_by_rounding() {
    let s = spec(ProblemKind::Burgers);
    let (g, m) = bound_random(&s, 6);
    let b = m.bind(&g).unwrap();
    let nets = b.networks();
    let mut sets = sets_for(&s, 40);
    let w = LossWeights::gpinn(2, 0.1);
    let a = total_loss(&s, &nets, &sets, &w).unwrap().value();
    sets.residual.reverse();
    sets.boundary.reverse();
    let r = total_loss(&s, &nets, &sets, &w).unwrap().value();
    assert!((a - r).abs() <= 1e-12 * a.abs());
}

#[test]
fn compiled_loss_matches_graph_loss_bitwise() {
    for kind in ProblemKind::ALL {
        let s = spec(kind);
        let (g, m) = bound_random(&s, 8);
        let sets = sets_for(&s, 21);
        for w in [LossWeights::pinn(s.dim()), LossWeights::gpinn(s.dim(), 0.3)] {
            let cl = CompiledLoss::new(&s, &m, &w).unwrap();
            let packed = PackedSets::new(s.dim(), &sets);
            let theta = m.flatten();
            let eval = cl.evaluate(&theta, &packed).unwrap();

            let b = m.bind(&g).unwrap();
            let nets = b.networks();
            let node = total_loss(&s, &nets, &sets, &w).unwrap();
            assert_eq!(eval.total.to_bits(), node.value().to_bits(), "{kind} total");
            let inputs = b.inputs();
            let grads = g.grad(&node, &inputs).unwrap();
            for (i, (a, gn)) in eval.grad.iter().zip(&grads).enumerate() {
                let want = gn.value();
                assert!((a - want).abs() <= 1e-12 * want.abs().max(1e-3), "{kind} grad[{i}]: {a} vs {want}");
            }
        }
    }
}

#[test]
fn parameter_gradient_matches_finite_differences() {
    for kind in [ProblemKind::Poisson1d, ProblemKind::Brinkman, ProblemKind::ReactRateInv, ProblemKind::AllenCahn] {
        let s = spec(kind);
        let (_, m) = bound_random(&s, 13);
        let sets = sets_for(&s, 20);
        let w = LossWeights::gpinn(s.dim(), 0.5);
        let cl = CompiledLoss::new(&s, &m, &w).unwrap();
        let packed = PackedSets::new(s.dim(), &sets);
        let theta = m.flatten();
        let eval = cl.evaluate(&theta, &packed).unwrap();
        let h = 1e-6;
        for i in (0..theta.len()).step_by(7).chain([theta.len() - 1]) {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += h;
            tm[i] -= h;
            let fd = (cl.evaluate(&tp, &packed).unwrap().total - cl.evaluate(&tm, &packed).unwrap().total) / (2.0 * h);
            let rel = (eval.grad[i] - fd).abs() / fd.abs().max(1e-2);
            assert!(rel < 1e-4, "{kind} param {i}: ad {} fd {fd}", eval.grad[i]);
        }
    }
}
