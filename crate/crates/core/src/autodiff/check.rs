use super::{Graph, Node};

/// Central-difference step used by [`check_grad`] for derivative order 1, 2 or 3.
pub fn fd_step(order: u32) -> f64 {
    match order {
        1 => 1e-5,
        2 => 1e-4,
        3 => 1e-3,
        _ => panic!("finite-difference checks support orders 1..=3, got {order}"),
    }
}

fn primal<F: Fn(&Node) -> Node>(f: &F, x: f64) -> f64 {
    let g = Graph::new();
    let xn = g.input(x).expect("finite probe point");
    f(&xn).value()
}

/// Derivative of `f` of the given order at `at`, by repeated symbolic `grad`.
pub fn ad_derivative<F: Fn(&Node) -> Node>(f: &F, at: f64, order: u32) -> f64 {
    let g = Graph::new();
    let x = g.input(at).expect("finite probe point");
    let mut y = f(&x);
    for _ in 0..order {
        y = g.grad(&y, std::slice::from_ref(&x)).expect("same graph").remove(0);
    }
    y.value()
}

/// Central finite-difference estimate of the `order`-th derivative of `f` at `at`.
pub fn fd_derivative<F: Fn(&Node) -> Node>(f: &F, at: f64, order: u32) -> f64 {
    let h = fd_step(order);
    match order {
        1 => (primal(f, at + h) - primal(f, at - h)) / (2.0 * h),
        2 => (primal(f, at + h) - 2.0 * primal(f, at) + primal(f, at - h)) / (h * h),
        3 => {
            (primal(f, at + 2.0 * h) - 2.0 * primal(f, at + h) + 2.0 * primal(f, at - h)
                - primal(f, at - 2.0 * h))
                / (2.0 * h * h * h)
        }
        _ => unreachable!(),
    }
}

/// Discrepancy between the AD derivative of `f` of order `order` (1..=3) at `at`
/// and a central finite difference with step [`fd_step`].
///
/// The discrepancy is `|ad - fd| / max(1, |fd|)`: relative for derivatives of
/// magnitude above one, absolute below.
pub fn check_grad<F: Fn(&Node) -> Node>(f: F, at: f64, order: u32) -> f64 {
    let ad = ad_derivative(&f, at, order);
    let fd = fd_derivative(&f, at, order);
    (ad - fd).abs() / fd.abs().max(1.0)
}
