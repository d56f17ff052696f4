use super::*;
use crate::network::init_mlp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(kind: ProblemKind) -> ProblemSpec {
    ProblemSpec::new(kind, &ProblemOptions::default()).unwrap()
}

fn random_interior(spec: &ProblemSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            spec.domain
                .lower
                .iter()
                .zip(&spec.domain.upper)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect()
        })
        .collect()
}

#[test]
fn exact_solutions_zero_the_residual_and_its_gradient() {
    for kind in [ProblemKind::Poisson1d, ProblemKind::DiffReactFwd, ProblemKind::Brinkman] {
        let s = spec(kind);
        let g = Graph::new();
        let sc = s.clone();
        let field = Expr(move |c: &[Node]| sc.exact_expression(c).unwrap());
        let nets = Networks::new(&g, &field).direct();
        let axes: Vec<usize> = (0..s.dim()).collect();
        let (mut fmax, mut gmax) = (0.0f64, 0.0f64);
        for p in random_interior(&s, 200, 7) {
            let coords = s.coordinate_inputs(&nets, &p).unwrap();
            let (f, df) = s.residual_and_gradient_at(&nets, &coords, &axes).unwrap();
            fmax = fmax.max(f.value().abs());
            for d in df {
                gmax = gmax.max(d.value().abs());
            }
        }
        assert!(fmax < 1e-8, "{kind}: max |f| = {fmax:e}");
        assert!(gmax < 1e-7, "{kind}: max |grad f| = {gmax:e}");
    }
}

#[test]
fn zero_surrogate_residuals() {
    let g = Graph::new();
    let zero = Expr(|c: &[Node]| c[0].constant(0.0));
    let nets = Networks::new(&g, &zero);
    let f = residual(&spec(ProblemKind::Burgers), &nets, &[0.3, 0.5]).unwrap();
    assert_eq!(f.value(), 0.0);
    let f = residual(&spec(ProblemKind::Brinkman), &nets, &[0.37]).unwrap();
    assert_eq!(f.value(), -1.0);
}

#[test]
fn poisson_identity_surrogate_gradient() {
    let s = spec(ProblemKind::Poisson1d);
    let g = Graph::new();
    let ident = Expr(|c: &[Node]| c[0].clone());
    let nets = Networks::new(&g, &ident).direct();
    let d = residual_gradient(&s, &nets, &[0.0], 0).unwrap();
    assert!((d.value() + 94.0).abs() < 1e-12, "{}", d.value());
    for &x in &[0.3, 1.1, 2.9] {
        let d = residual_gradient(&s, &nets, &[x], 0).unwrap().value();
        let want = -((1..=4).map(|i| (i * i) as f64 * (i as f64 * x).cos()).sum::<f64>() + 64.0 * (8.0 * x).cos());
        assert!((d - want).abs() < 1e-11);
    }
}

#[test]
fn closed_form_values() {
    assert_eq!(spec(ProblemKind::Poisson1d).exact_solution(&[0.0]).unwrap(), 0.0);
    let v = spec(ProblemKind::DiffReactFwd).exact_solution(&[PI / 2.0, 0.0]).unwrap();
    assert!((v - 2.0 / 3.0).abs() < 1e-15);
    let v = spec(ProblemKind::Brinkman).exact_solution(&[0.5]).unwrap();
    assert!((v - (1.0 - 1.0 / 10f64.cosh())).abs() < 1e-15);
    let b = spec(ProblemKind::Brinkman);
    assert!(b.exact_solution(&[0.0]).unwrap().abs() < 1e-15);
    assert!(b.exact_solution(&[1.0]).unwrap().abs() < 1e-15);
    let d = spec(ProblemKind::Poisson1d).exact_derivative(&[0.0], 0).unwrap();
    assert_eq!(d, 6.0);
    assert!(matches!(
        spec(ProblemKind::Burgers).exact_solution(&[0.0, 0.5]),
        Err(ProblemError::NoClosedForm(_))
    ));
}

#[test]
fn closed_form_derivatives_match_ad_of_expression() {
    for kind in [ProblemKind::FuncApprox, ProblemKind::Poisson1d, ProblemKind::DiffReactFwd, ProblemKind::Brinkman] {
        let s = spec(kind);
        for p in random_interior(&s, 20, 3) {
            let g = Graph::new();
            let coords: Vec<Node> = p.iter().map(|&v| g.input(v).unwrap()).collect();
            let u = s.exact_expression(&coords).unwrap();
            assert!((u.value() - s.exact_solution(&p).unwrap()).abs() < 1e-13);
            let du = g.grad(&u, &coords).unwrap();
            for (axis, d) in du.iter().enumerate() {
                let want = s.exact_derivative(&p, axis).unwrap();
                assert!((d.value() - want).abs() < 1e-11 * want.abs().max(1.0), "{kind} axis {axis}");
            }
        }
    }
    // du/dt = -u for the diffusion-reaction solution
    let s = spec(ProblemKind::DiffReactFwd);
    for p in random_interior(&s, 10, 9) {
        let dt = s.exact_derivative(&p, 1).unwrap();
        assert!((dt + s.exact_solution(&p).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn exact_rate_extremes() {
    let s = spec(ProblemKind::ReactRateInv);
    assert!((s.exact_solution(&[0.5]).unwrap() - 1.1).abs() < 1e-15);
    let mut lo = f64::INFINITY;
    for i in 0..=1000 {
        let k = exact_rate(i as f64 / 1000.0);
        lo = lo.min(k);
        assert!(k <= 1.1 + 1e-15);
    }
    assert!(lo > 0.1 && lo < 0.1 + 1e-2);
}

#[test]
fn residual_errors() {
    let s = spec(ProblemKind::Poisson1d);
    let g = Graph::new();
    let ident = Expr(|c: &[Node]| c[0].clone());
    let nets = Networks::new(&g, &ident);
    assert!(matches!(residual(&s, &nets, &[4.0]), Err(ProblemError::OutsideDomain { .. })));
    assert!(matches!(residual(&s, &nets, &[1.0, 0.0]), Err(ProblemError::Dimension { .. })));
    assert!(matches!(
        residual_gradient(&s, &nets, &[1.0], 1),
        Err(ProblemError::AxisOutOfRange { .. })
    ));
    let r = spec(ProblemKind::ReactRateInv);
    assert!(matches!(
        residual(&r, &nets, &[0.5]),
        Err(ProblemError::MissingNetwork { .. })
    ));
    assert!(matches!(s.observations(1), Err(ProblemError::NotInverse(_))));
    assert!("heat".parse::<ProblemKind>().is_err());
    let gb = Graph::new();
    let z = Expr(|c: &[Node]| c[0].constant(0.0));
    let nb = Networks::new(&gb, &z);
    let c = [gb.input(0.0).unwrap()];
    assert!(matches!(
        s.boundary_violation_at(&nb, &c, &gb.constant(0.0).unwrap()),
        Err(ProblemError::HardConstraint { .. })
    ));
}

#[test]
fn residual_gradient_matches_finite_differences_for_random_networks() {
    let h = 1e-5;
    for kind in ProblemKind::ALL {
        let s = spec(kind);
        let d = s.dim();
        let u = init_mlp(&[d, 6, 6, 1], 11).unwrap();
        let k = init_mlp(&[1, 5, 1], 12).unwrap();
        let g = Graph::new();
        let ub = u.bind(&g).unwrap();
        let kb = k.bind(&g).unwrap();
        let mut nets = Networks::new(&g, &ub);
        if s.needs_rate_network() {
            nets = nets.with_rate(&kb);
        }
        let f_at = |p: &[f64]| residual(&s, &nets, p).unwrap().value();
        for p in random_interior(&s, 5, 21) {
            let p: Vec<f64> = p
                .iter()
                .zip(s.domain.lower.iter().zip(&s.domain.upper))
                .map(|(v, (a, b))| v.clamp(a + 2.0 * h, b - 2.0 * h))
                .collect();
            for axis in 0..d {
                let ad = residual_gradient(&s, &nets, &p, axis).unwrap().value();
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[axis] += h;
                pm[axis] -= h;
                let fd = (f_at(&pp) - f_at(&pm)) / (2.0 * h);
                let rel = (ad - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-5, "{kind} axis {axis}: ad {ad} fd {fd}");
            }
        }
    }
}

#[test]
fn inverse_parameters_enter_the_residual() {
    let s = ProblemSpec::new(
        ProblemKind::Brinkman,
        &ProblemOptions {
            infer_permeability: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(s.inverse.len(), 2);
    let g = Graph::new();
    let sc = s.clone();
    let field = Expr(move |c: &[Node]| sc.exact_expression(c).unwrap());
    let truth: Vec<Node> = s.inverse.iter().map(|p| g.input(p.to_storage(p.true_value)).unwrap()).collect();
    let nets = Networks::new(&g, &field).direct().with_lambda(truth);
    assert!(residual(&s, &nets, &[0.3]).unwrap().value().abs() < 1e-9);
    let wrong: Vec<Node> = s.inverse.iter().map(|p| g.input(p.to_storage(2.0 * p.true_value)).unwrap()).collect();
    let nets = Networks::new(&g, &field).direct().with_lambda(wrong);
    assert!(residual(&s, &nets, &[0.3]).unwrap().value().abs() > 1e-3);
    let p = &s.inverse[0];
    for v in [1e-8, 1e-3, 5.0] {
        assert!((p.from_storage(p.to_storage(v)) - v).abs() <= 1e-15 * v.max(1.0));
    }
}

#[test]
fn brinkman_observations() {
    let s = spec(ProblemKind::Brinkman);
    let obs = s.observations(3).unwrap();
    assert_eq!(obs.len(), 5);
    for (j, o) in obs.iter().enumerate() {
        assert!((o.coords[0] - (j + 1) as f64 / 6.0).abs() < 1e-15);
        assert_eq!(o.value, s.exact_solution(&o.coords).unwrap());
    }
    let noisy = ProblemSpec::new(
        ProblemKind::Brinkman,
        &ProblemOptions {
            infer_permeability: true,
            observations: Some(12),
            noise_std: 0.05,
            ..Default::default()
        },
    )
    .unwrap();
    let a = noisy.observations(5).unwrap();
    assert_eq!(a, noisy.observations(5).unwrap());
    assert_ne!(a, noisy.observations(6).unwrap());
    assert_eq!(a.len(), 12);
    let resid: f64 = a.iter().map(|o| (o.value - s.exact_solution(&o.coords).unwrap()).abs()).sum();
    assert!(resid > 0.0 && resid / 12.0 < 0.2);
}

/// Shooting oracle for `lambda u'' = k u + sin(2 pi x)`, `u(0) = u(1) = 0`:
/// RK4 on the two initial value problems `u'(0) = 0` and `u'(0) = 1`.
fn shooting_oracle(xs: &[f64]) -> Vec<f64> {
    let steps = 200_000;
    let h = 1.0 / steps as f64;
    let run = |slope: f64, with_source: bool| -> Vec<f64> {
        let rhs = |x: f64, u: f64| (exact_rate(x) * u + if with_source { (2.0 * PI * x).sin() } else { 0.0 }) / 0.01;
        let (mut u, mut v) = (0.0f64, slope);
        let mut out = vec![0.0; steps + 1];
        for i in 0..steps {
            let x = i as f64 * h;
            let (k1u, k1v) = (v, rhs(x, u));
            let (k2u, k2v) = (v + 0.5 * h * k1v, rhs(x + 0.5 * h, u + 0.5 * h * k1u));
            let (k3u, k3v) = (v + 0.5 * h * k2v, rhs(x + 0.5 * h, u + 0.5 * h * k2u));
            let (k4u, k4v) = (v + h * k3v, rhs(x + h, u + h * k3u));
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            out[i + 1] = u;
        }
        out
    };
    let particular = run(0.0, true);
    let homogeneous = run(1.0, false);
    let c = -particular[steps] / homogeneous[steps];
    xs.iter()
        .map(|&x| {
            let i = (x * steps as f64).round() as usize;
            particular[i] + c * homogeneous[i]
        })
        .collect()
}

#[test]
fn react_rate_observations_match_shooting_oracle() {
    let s = spec(ProblemKind::ReactRateInv);
    let obs = s.observations(0).unwrap();
    assert_eq!(obs.len(), 8);
    assert!(obs.iter().all(|o| o.coords[0] > 0.0 && o.coords[0] < 1.0 && o.value.is_finite()));
    // 1/9 is not on the shooting grid; compare at grid multiples instead
    let xs: Vec<f64> = obs.iter().map(|o| (o.coords[0] * 200_000.0).round() / 200_000.0).collect();
    let want = shooting_oracle(&xs);
    let got = react_rate_u_at(&xs);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-7 * b.abs().max(1e-2), "{a} vs {b}");
    }
    let exact = react_rate_u_at(&obs.iter().map(|o| o.coords[0]).collect::<Vec<_>>());
    for (o, e) in obs.iter().zip(exact) {
        assert!((o.value - e).abs() < 1e-9);
    }
}

/// Dense composite-trapezoid oracle for the Cole-Hopf integrals with
/// log-sum-exp scaling, over `eta` in `[-L, L]`.
fn cole_hopf_dense(x: f64, t: f64) -> f64 {
    let nu = 0.01 / PI;
    let half = 12.0 * (4.0 * nu * t).sqrt();
    let n = 200_000;
    let h = 2.0 * half / n as f64;
    let log_w = |eta: f64| -(PI * (x - eta)).cos() / (2.0 * PI * nu) - eta * eta / (4.0 * nu * t);
    let mut lmax = f64::NEG_INFINITY;
    for i in 0..=n {
        lmax = lmax.max(log_w(-half + h * i as f64));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let eta = -half + h * i as f64;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let e = w * (log_w(eta) - lmax).exp();
        num += (PI * (x - eta)).sin() * e;
        den += e;
    }
    -num / den
}

#[test]
fn burgers_reference_matches_dense_quadrature() {
    let ch = reference::ColeHopf::new(reference::GAUSS_HERMITE_NODES).unwrap();
    for &(x, t) in &[(0.01, 1.0), (-0.05, 0.9), (0.003, 0.6), (0.4, 0.3), (-0.8, 0.05), (0.02, 0.3)] {
        let a = ch.eval(x, t);
        let b = cole_hopf_dense(x, t);
        assert!((a - b).abs() < 1e-9, "({x}, {t}): {a} vs {b}");
    }
    for &x in &[-0.7, 0.2, 0.9] {
        assert_eq!(ch.eval(x, 0.0), -(PI * x).sin());
    }
    for &t in &[0.1, 0.5, 1.0] {
        assert!(ch.eval(0.0, t).abs() < 1e-14);
        assert!(ch.eval(1.0, t).abs() < 1e-12);
    }
}

#[test]
fn allen_cahn_reference_holds_boundary_values() {
    let s = spec(ProblemKind::AllenCahn);
    let grid = SpaceTimeGrid { x: [-1.0, 1.0], t: [0.0, 1.0], nx: 9, nt: 3 };
    let dir = tempfile::tempdir().unwrap();
    let u = s.reference_solution(&grid, Some(dir.path())).unwrap();
    for j in 0..grid.nt {
        assert!((u[j] + 1.0).abs() < 1e-6);
        assert!((u[(grid.nx - 1) * grid.nt + j] + 1.0).abs() < 1e-6);
    }
    for i in 0..grid.nx {
        let x = grid.x_at(i);
        assert!((u[i * grid.nt] - x * x * (PI * x).cos()).abs() < 1e-12 || i == 0 || i + 1 == grid.nx);
    }
    let again = s.reference_solution(&grid, Some(dir.path())).unwrap();
    assert_eq!(u, again);
    let bad = SpaceTimeGrid { nx: 7, ..grid };
    assert!(s.reference_solution(&bad, None).is_err());
}

#[test]
fn boundary_point_sets() {
    let b = spec(ProblemKind::Burgers).boundary_points(80, 160);
    assert_eq!(b.len(), 240);
    assert!(b.iter().filter(|p| p.coords[1] == 0.0 && p.coords[0].abs() < 1.0).all(|p| p.target == -(PI * p.coords[0]).sin()));
    assert!(b.iter().filter(|p| p.coords[0].abs() == 1.0).all(|p| p.target.abs() < 1e-15));
    let a = spec(ProblemKind::AllenCahn).boundary_points(80, 160);
    assert!(a.iter().filter(|p| p.coords[0].abs() == 1.0).all(|p| (p.target + 1.0).abs() < 1e-15));
    let r = spec(ProblemKind::Brinkman).boundary_points(80, 160);
    assert_eq!(r.iter().map(|p| p.coords[0]).collect::<Vec<_>>(), vec![0.0, 1.0]);
}
