use serde::{Deserialize, Serialize};

use super::OptimizeError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Steps taken so far.
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One update of `params` in place. A non-finite gradient entry leaves
    /// both the parameters and the moments untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<(), OptimizeError> {
        assert_eq!(params.len(), self.m.len(), "parameter count");
        assert_eq!(grad.len(), self.m.len(), "gradient length");
        if let Some((index, &value)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(OptimizeError::NonFiniteGradient { index, value });
        }
        self.t += 1;
        let t = self.t as f64;
        let c1 = 1.0 - BETA1.powf(t);
        let c2 = 1.0 - BETA2.powf(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
        Ok(())
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_step(state: &mut Adam, params: &mut [f64], grad: &[f64]) -> Result<(), OptimizeError> {
    state.step(params, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_has_magnitude_lr() {
        for g in [1e-6, 0.3, -20.0, 5e4] {
            let mut a = Adam::new(1, 1e-3);
            let mut p = [0.7];
            a.step(&mut p, &[g]).unwrap();
            // m_hat = g, v_hat = g^2
            let want = 0.7 - 1e-3 * g / (g.abs() + EPSILON);
            assert!((p[0] - want).abs() < 1e-15, "{g}");
            assert!(((0.7 - p[0]).abs() - 1e-3).abs() < 1e-3 * 1e-2);
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut a = Adam::new(3, 0.1);
        let mut p = [1.0, -2.0, 3.0];
        for _ in 0..5 {
            a.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn identical_runs_agree() {
        let run = || {
            let mut a = Adam::new(2, 0.05);
            let mut p = [1.0, 1.0];
            for _ in 0..200 {
                let g = [2.0 * p[0], 20.0 * p[1]];
                a.step(&mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
        let p = run();
        assert!(p[0].abs() < 0.1 && p[1].abs() < 0.1);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut a = Adam::new(2, 0.1);
        let mut p = [1.0, 2.0];
        let err = a.step(&mut p, &[0.5, f64::NAN]).unwrap_err();
        assert!(matches!(err, OptimizeError::NonFiniteGradient { index: 1, .. }));
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(a.t, 0);
    }
}
