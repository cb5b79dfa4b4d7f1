use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{xavier_uniform, Matrix, Params};
use crate::{Error, Result};

/// Checked affine map `W·h + b`.
pub fn dense_forward(w: &Matrix, b: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if w.cols != h.len() || w.rows != b.len() {
        return Err(Error::Shape(format!(
            "W is {}x{}, b has {}, h has {}",
            w.rows,
            w.cols,
            b.len(),
            h.len()
        )));
    }
    let mut out = w.matvec(h);
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    Ok(out)
}

/// Fully connected layer `y = W·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn new<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Dense {
            w: xavier_uniform(output, input, input, output, rng),
            b: vec![0.0; output],
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Matrix::zeros(output, input),
            b: vec![0.0; output],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size(), self.output_size())
    }

    pub fn input_size(&self) -> usize {
        self.w.cols
    }

    pub fn output_size(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        y
    }

    /// Accumulates parameter gradients into `grads`, returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut Dense) -> Vec<f64> {
        grads.w.add_outer(dy, x);
        for (g, d) in grads.b.iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; x.len()];
        self.w.matvec_t_acc(dy, &mut dx);
        dx
    }
}

impl Params for Dense {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f("w", &self.w.shape(), &self.w.data);
        f("b", &[self.b.len()], &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("w", &mut self.w.data);
        f("b", &mut self.b);
    }
}

/// Label scoring layer: either a single affine map, or affine → tanh → affine
/// when a hidden layer is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub hidden: Option<Dense>,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct ScorerCache {
    input: Vec<f64>,
    activation: Option<Vec<f64>>,
}

impl Scorer {
    pub fn new<R: Rng>(input: usize, hidden: Option<usize>, labels: usize, rng: &mut R) -> Self {
        match hidden {
            Some(h) => Scorer {
                hidden: Some(Dense::new(input, h, rng)),
                out: Dense::new(h, labels, rng),
            },
            None => Scorer {
                hidden: None,
                out: Dense::new(input, labels, rng),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        Scorer {
            hidden: self.hidden.as_ref().map(Dense::zeros_like),
            out: self.out.zeros_like(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.hidden.as_ref().unwrap_or(&self.out).input_size()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, ScorerCache) {
        match &self.hidden {
            Some(hidden) => {
                let a: Vec<f64> = hidden.forward(x).into_iter().map(f64::tanh).collect();
                let s = self.out.forward(&a);
                (
                    s,
                    ScorerCache {
                        input: x.to_vec(),
                        activation: Some(a),
                    },
                )
            }
            None => (
                self.out.forward(x),
                ScorerCache {
                    input: x.to_vec(),
                    activation: None,
                },
            ),
        }
    }

    pub fn backward(&self, cache: &ScorerCache, ds: &[f64], grads: &mut Scorer) -> Vec<f64> {
        match (&self.hidden, &cache.activation, &mut grads.hidden) {
            (Some(hidden), Some(a), Some(g_hidden)) => {
                let da = self.out.backward(a, ds, &mut grads.out);
                let dz: Vec<f64> = da.iter().zip(a).map(|(d, ai)| d * (1.0 - ai * ai)).collect();
                hidden.backward(&cache.input, &dz, g_hidden)
            }
            _ => self.out.backward(&cache.input, ds, &mut grads.out),
        }
    }
}

impl Params for Scorer {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        if let Some(h) = &self.hidden {
            h.visit(&mut |n, s, v| f(&format!("hidden.{n}"), s, v));
        }
        self.out.visit(&mut |n, s, v| f(&format!("out.{n}"), s, v));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        if let Some(h) = &mut self.hidden {
            h.visit_mut(&mut |n, v| f(&format!("hidden.{n}"), v));
        }
        self.out.visit_mut(&mut |n, v| f(&format!("out.{n}"), v));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_layer_gives_zero() {
        let s = dense_forward(&Matrix::zeros(10, 4), &[0.0; 10], &[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(s, vec![0.0; 10]);
    }

    #[test]
    fn hand_two_by_two() {
        // [[1, 0], [0, 2]] · [3, 4] + [0.5, -1] = [3.5, 7]
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(dense_forward(&w, &[0.5, -1.0], &[3.0, 4.0]).unwrap(), vec![3.5, 7.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let w = Matrix::zeros(10, 4);
        assert!(dense_forward(&w, &[0.0; 10], &[1.0; 3]).is_err());
        assert!(dense_forward(&w, &[0.0; 9], &[1.0; 4]).is_err());
    }

    #[test]
    fn scorer_param_names() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = Scorer::new(6, Some(4), 10, &mut rng);
        let mut names = Vec::new();
        s.visit(&mut |n, shape, _| names.push(format!("{n}{shape:?}")));
        assert_eq!(names, ["hidden.w[4, 6]", "hidden.b[4]", "out.w[10, 4]", "out.b[10]"]);
    }
}
