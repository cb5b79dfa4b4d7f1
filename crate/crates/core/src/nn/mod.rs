//! Small neural-network toolkit with hand-written backward passes.
//!
//! Every parameterized unit has a params struct that doubles as its own
//! gradient accumulator (`zeros_like`), and implements [`Params`] so the
//! optimizer, gradient clipping and checkpointing can walk named arrays in a
//! fixed order.

mod adam;
pub mod checkpoint;
mod dense;
mod dropout;
mod init;
mod lstm;
pub(crate) mod matrix;

pub use adam::AdamState;
pub use checkpoint::{Archive, NamedArray, FORMAT_VERSION};
pub use dense::{dense_forward, Dense, Scorer, ScorerCache};
pub use dropout::{dropout, dropout_backward, DropoutMode};
pub use init::{uniform, xavier_uniform};
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_backward, lstm_forward, BiLstm, BiLstmCache, LstmCache,
    LstmParams,
};
pub use matrix::{sigmoid, Matrix};

/// A collection of named, flat parameter arrays visited in a stable order.
pub trait Params {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, v| n += v.len());
        n
    }

    /// Flattened copies of every array, in visit order.
    fn flatten(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        self.visit(&mut |_, _, v| out.push(v.to_vec()));
        out
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut(&mut |_, v| v.fill(value));
    }

    /// `self += scale * other`, arrays paired by visit order.
    fn add_scaled(&mut self, other: &dyn Params, scale: f64) {
        let flat = other.flatten();
        let mut k = 0;
        self.visit_mut(&mut |_, v| {
            for (a, b) in v.iter_mut().zip(&flat[k]) {
                *a += scale * b;
            }
            k += 1;
        });
    }

    fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |_, v| v.iter_mut().for_each(|x| *x *= factor));
    }

    fn l2_norm(&self) -> f64 {
        let mut sum = 0.0;
        self.visit(&mut |_, _, v| sum += v.iter().map(|x| x * x).sum::<f64>());
        sum.sqrt()
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, _, v| ok &= v.iter().all(|x| x.is_finite()));
        ok
    }

    fn to_arrays(&self) -> Vec<NamedArray> {
        let mut out = Vec::new();
        self.visit(&mut |name, shape, v| {
            out.push(NamedArray {
                name: name.to_string(),
                shape: shape.to_vec(),
                data: v.to_vec(),
            })
        });
        out
    }
}

/// Rescales gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut dyn Params, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}
