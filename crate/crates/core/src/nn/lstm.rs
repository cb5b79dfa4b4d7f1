use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::axpy;
use super::{sigmoid, xavier_uniform, Matrix, Params};

/// One LSTM direction.
///
/// Gate weights are stacked row-wise in the order input, forget, output,
/// candidate: `w` is `4h × (d + h)` acting on `[x_t; h_{t-1}]`, and `b` is
/// `4h`. No peepholes; initial hidden and cell states are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w: Matrix,
    pub b: Vec<f64>,
}

pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;

impl LstmParams {
    /// Xavier-uniform weights per gate, zero biases except forget gate = 1.
    pub fn new<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let h = hidden_size;
        let w = xavier_uniform(4 * h, input_size + h, input_size + h, h, rng);
        let mut b = vec![0.0; 4 * h];
        b[GATE_FORGET * h..(GATE_FORGET + 1) * h].fill(1.0);
        LstmParams {
            input_size,
            hidden_size,
            w,
            b,
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmParams {
            input_size,
            hidden_size,
            w: Matrix::zeros(4 * hidden_size, input_size + hidden_size),
            b: vec![0.0; 4 * hidden_size],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size, self.hidden_size)
    }

    /// Rows of `w` belonging to one gate (`h × (d + h)`).
    pub fn gate_weights(&self, gate: usize) -> &[f64] {
        let n = self.hidden_size * self.w.cols;
        &self.w.data[gate * n..(gate + 1) * n]
    }

    pub fn gate_bias(&self, gate: usize) -> &[f64] {
        &self.b[gate * self.hidden_size..(gate + 1) * self.hidden_size]
    }
}

impl Params for LstmParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f("w", &self.w.shape(), &self.w.data);
        f("b", &[self.b.len()], &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("w", &mut self.w.data);
        f("b", &mut self.b);
    }
}

#[derive(Debug, Clone)]
struct Step {
    // [x_t; h_{t-1}]
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    steps: Vec<Step>,
}

/// Runs the recurrence over `inputs`, returning every hidden state.
pub fn lstm_forward(p: &LstmParams, inputs: &[Vec<f64>]) -> (Vec<Vec<f64>>, LstmCache) {
    let h = p.hidden_size;
    let d = p.input_size;
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut steps = Vec::with_capacity(inputs.len());
    let mut z = vec![0.0; 4 * h];

    for x in inputs {
        assert_eq!(x.len(), d, "LSTM input dimension");
        let mut xh = Vec::with_capacity(d + h);
        xh.extend_from_slice(x);
        xh.extend_from_slice(&h_prev);
        p.w.matvec_into(&xh, &mut z);

        let mut i = vec![0.0; h];
        let mut f = vec![0.0; h];
        let mut o = vec![0.0; h];
        let mut g = vec![0.0; h];
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_new = vec![0.0; h];
        for k in 0..h {
            i[k] = sigmoid(z[GATE_INPUT * h + k] + p.b[GATE_INPUT * h + k]);
            f[k] = sigmoid(z[GATE_FORGET * h + k] + p.b[GATE_FORGET * h + k]);
            o[k] = sigmoid(z[GATE_OUTPUT * h + k] + p.b[GATE_OUTPUT * h + k]);
            g[k] = (z[GATE_CANDIDATE * h + k] + p.b[GATE_CANDIDATE * h + k]).tanh();
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            tanh_c[k] = c[k].tanh();
            h_new[k] = o[k] * tanh_c[k];
        }
        outputs.push(h_new.clone());
        steps.push(Step {
            xh,
            c_prev: std::mem::replace(&mut c_prev, c),
            i,
            f,
            o,
            g,
            tanh_c,
        });
        h_prev = h_new;
    }
    (outputs, LstmCache { steps })
}

/// Backpropagation through time. `d_hidden[t]` is the loss gradient arriving
/// at hidden state `t` from above. Parameter gradients accumulate into
/// `grads`; the return value holds `dL/dx_t` for each input.
pub fn lstm_backward(
    p: &LstmParams,
    cache: &LstmCache,
    d_hidden: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let h = p.hidden_size;
    let d = p.input_size;
    let n = cache.steps.len();
    assert_eq!(d_hidden.len(), n, "one hidden gradient per step");

    let mut dx = vec![Vec::new(); n];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let mut dxh = vec![0.0; d + h];

    for t in (0..n).rev() {
        let s = &cache.steps[t];
        for k in 0..h {
            let dh = d_hidden[t][k] + dh_next[k];
            let d_o = dh * s.tanh_c[k];
            let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let di = dc * s.g[k];
            let dg = dc * s.i[k];
            let df = dc * s.c_prev[k];
            dc_next[k] = dc * s.f[k];
            dz[GATE_INPUT * h + k] = di * s.i[k] * (1.0 - s.i[k]);
            dz[GATE_FORGET * h + k] = df * s.f[k] * (1.0 - s.f[k]);
            dz[GATE_OUTPUT * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            dz[GATE_CANDIDATE * h + k] = dg * (1.0 - s.g[k] * s.g[k]);
        }
        grads.w.add_outer(&dz, &s.xh);
        axpy(1.0, &dz, &mut grads.b);
        dxh.fill(0.0);
        p.w.matvec_t_acc(&dz, &mut dxh);
        dx[t] = dxh[..d].to_vec();
        dh_next.copy_from_slice(&dxh[d..]);
    }
    dx
}

/// Forward and backward LSTMs over the same sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstm {
    pub fn new<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        BiLstm {
            fwd: LstmParams::new(input_size, hidden_size, rng),
            bwd: LstmParams::new(input_size, hidden_size, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        BiLstm {
            fwd: self.fwd.zeros_like(),
            bwd: self.bwd.zeros_like(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.fwd.input_size
    }

    pub fn output_size(&self) -> usize {
        self.fwd.hidden_size + self.bwd.hidden_size
    }
}

impl Params for BiLstm {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.fwd.visit(&mut |n, s, v| f(&format!("fwd.{n}"), s, v));
        self.bwd.visit(&mut |n, s, v| f(&format!("bwd.{n}"), s, v));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.fwd.visit_mut(&mut |n, v| f(&format!("fwd.{n}"), v));
        self.bwd.visit_mut(&mut |n, v| f(&format!("bwd.{n}"), v));
    }
}

#[derive(Debug, Clone, Default)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

/// Position `j` of the output is `[fwd_j ; bwd_j]`, where the backward LSTM
/// reads the sequence reversed and its states are re-reversed to align.
pub fn bilstm_forward(
    fwd: &LstmParams,
    bwd: &LstmParams,
    inputs: &[Vec<f64>],
) -> (Vec<Vec<f64>>, BiLstmCache) {
    let (hf, cf) = lstm_forward(fwd, inputs);
    let reversed: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
    let (mut hb, cb) = lstm_forward(bwd, &reversed);
    hb.reverse();
    let out = hf
        .into_iter()
        .zip(hb)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect();
    (out, BiLstmCache { fwd: cf, bwd: cb })
}

pub fn bilstm_backward(
    fwd: &LstmParams,
    bwd: &LstmParams,
    cache: &BiLstmCache,
    d_out: &[Vec<f64>],
    g_fwd: &mut LstmParams,
    g_bwd: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let hf = fwd.hidden_size;
    let d_f: Vec<Vec<f64>> = d_out.iter().map(|d| d[..hf].to_vec()).collect();
    let d_b: Vec<Vec<f64>> = d_out.iter().rev().map(|d| d[hf..].to_vec()).collect();
    let mut dx = lstm_backward(fwd, &cache.fwd, &d_f, g_fwd);
    let dx_b = lstm_backward(bwd, &cache.bwd, &d_b, g_bwd);
    for (a, b) in dx.iter_mut().zip(dx_b.iter().rev()) {
        axpy(1.0, b, a);
    }
    dx
}
