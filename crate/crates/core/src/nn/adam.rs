use serde::{Deserialize, Serialize};

use super::Params;
use crate::{Error, Result};

/// Bias-corrected Adam with a per-epoch exponential learning-rate decay:
/// the step size during epoch `e` is `lr · decay^e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub decay: f64,
    pub step: u64,
    epoch: u32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, decay: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay,
            step: 0,
            epoch: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn set_epoch(&mut self, epoch: u32) {
        self.epoch = epoch;
    }

    pub fn effective_lr(&self) -> f64 {
        self.lr * self.decay.powi(self.epoch as i32)
    }

    /// Applies one update. Fails without touching anything if a gradient
    /// entry is non-finite or the shapes of `params` and `grads` disagree.
    pub fn step(&mut self, params: &mut dyn Params, grads: &dyn Params) -> Result<()> {
        let mut flat = Vec::new();
        let mut bad = None;
        grads.visit(&mut |name, _, g| {
            if bad.is_none() && g.iter().any(|x| !x.is_finite()) {
                bad = Some(name.to_string());
            }
            flat.push(g.to_vec());
        });
        if let Some(name) = bad {
            return Err(Error::NonFiniteGradient(name));
        }

        let mut sizes = Vec::new();
        params.visit(&mut |_, _, v| sizes.push(v.len()));
        if sizes.len() != flat.len() || sizes.iter().zip(&flat).any(|(n, g)| *n != g.len()) {
            return Err(Error::Shape("parameter and gradient layouts differ".into()));
        }
        if self.m.is_empty() {
            self.m = sizes.iter().map(|&n| vec![0.0; n]).collect();
            self.v = sizes.iter().map(|&n| vec![0.0; n]).collect();
        } else if self.m.iter().map(Vec::len).ne(sizes.iter().copied()) {
            return Err(Error::Shape("optimizer moments do not match parameters".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let lr = self.effective_lr();
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut k = 0;
        params.visit_mut(&mut |_, theta| {
            let (m, v, g) = (&mut ms[k], &mut vs[k], &flat[k]);
            for j in 0..theta.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            k += 1;
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);

    impl Params for Scalar {
        fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
            f("theta", &[self.0.len()], &self.0);
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
            f("theta", &mut self.0);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Scalar(vec![1.5, -2.0]);
        let mut adam = AdamState::new(0.001, 0.9);
        for _ in 0..10 {
            adam.step(&mut p, &Scalar(vec![0.0, 0.0])).unwrap();
        }
        assert_eq!(p.0, vec![1.5, -2.0]);
    }

    #[test]
    fn single_step_closed_form() {
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1; θ -= lr / (1 + eps)
        let mut p = Scalar(vec![0.25]);
        let mut adam = AdamState::new(0.001, 0.9);
        adam.step(&mut p, &Scalar(vec![1.0])).unwrap();
        let expected = 0.25 - 0.001 * 1.0 / (1.0 + 1e-8);
        assert!((p.0[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut p = Scalar(vec![5.0]);
        let mut adam = AdamState::new(0.1, 1.0);
        let mut steps = 0;
        while p.0[0].abs() >= 0.1 && steps < 2000 {
            let g = Scalar(vec![2.0 * p.0[0]]);
            adam.step(&mut p, &g).unwrap();
            steps += 1;
        }
        assert!(p.0[0].abs() < 0.1, "theta = {} after {steps} steps", p.0[0]);
    }

    #[test]
    fn decay_is_per_epoch() {
        let mut adam = AdamState::new(0.001, 0.9);
        adam.set_epoch(3);
        assert!((adam.effective_lr() - 0.001 * 0.729).abs() < 1e-18);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = Scalar(vec![1.0]);
        let mut adam = AdamState::new(0.001, 0.9);
        let err = adam.step(&mut p, &Scalar(vec![f64::NAN])).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "theta"));
        assert_eq!(p.0, vec![1.0]);
        assert_eq!(adam.step, 0);
    }
}
