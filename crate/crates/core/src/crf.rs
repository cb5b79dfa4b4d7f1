//! Linear-chain CRF over per-position label scores.
//!
//! For emissions `s` (one row per position, one column per label) and a
//! label sequence `y` of the same length `m`, the sequence score is
//!
//! ```text
//! Q(y) = begin[y_1] + Σ_t s_t[y_t] + Σ_{t<m} T[y_t, y_{t+1}] + end[y_m]
//! ```
//!
//! and `P(y) = exp(Q(y) - log Z)`. All dynamic programs run in log space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::matrix::log_sum_exp;
use crate::nn::{Matrix, Params};
use crate::{Error, Result};

/// Per-position label scores, `m × L`.
pub type EmissionScores = Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfParams {
    /// `transitions[i][j]`: score of label `i` followed by `j`.
    pub transitions: Matrix,
    pub begin: Vec<f64>,
    pub end: Vec<f64>,
}

impl CrfParams {
    pub fn zeros(num_labels: usize) -> Self {
        CrfParams {
            transitions: Matrix::zeros(num_labels, num_labels),
            begin: vec![0.0; num_labels],
            end: vec![0.0; num_labels],
        }
    }

    pub fn random<R: Rng>(num_labels: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(num_labels);
        p.visit_mut(&mut |_, v| {
            for x in v {
                *x = rng.gen_range(-scale..=scale);
            }
        });
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.num_labels())
    }

    pub fn num_labels(&self) -> usize {
        self.begin.len()
    }

    fn check(&self, s: &EmissionScores) -> Result<()> {
        if s.rows == 0 {
            return Err(Error::EmptyDocument);
        }
        if s.cols != self.num_labels() {
            return Err(Error::Shape(format!(
                "emissions have {} labels, CRF has {}",
                s.cols,
                self.num_labels()
            )));
        }
        Ok(())
    }
}

impl Params for CrfParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f("transitions", &self.transitions.shape(), &self.transitions.data);
        f("begin", &[self.begin.len()], &self.begin);
        f("end", &[self.end.len()], &self.end);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("transitions", &mut self.transitions.data);
        f("begin", &mut self.begin);
        f("end", &mut self.end);
    }
}

/// Global score `Q(y)` of one labeling.
pub fn sequence_score(crf: &CrfParams, s: &EmissionScores, y: &[usize]) -> Result<f64> {
    crf.check(s)?;
    if y.len() != s.rows {
        return Err(Error::LengthMismatch {
            scores: s.rows,
            labels: y.len(),
        });
    }
    let mut q = crf.begin[y[0]];
    for (t, &label) in y.iter().enumerate() {
        q += s.get(t, label);
    }
    for pair in y.windows(2) {
        q += crf.transitions.get(pair[0], pair[1]);
    }
    q += crf.end[y[y.len() - 1]];
    Ok(q)
}

fn lse(xs: &[f64]) -> f64 {
    log_sum_exp(xs.iter().copied())
}

/// Forward log-potentials: `alpha[t][y]` = log-sum over prefixes ending in `y` at `t`.
fn forward_table(crf: &CrfParams, s: &EmissionScores) -> Matrix {
    let (m, l) = (s.rows, s.cols);
    let mut alpha = Matrix::zeros(m, l);
    for y in 0..l {
        alpha.set(0, y, crf.begin[y] + s.get(0, y));
    }
    let mut buf = vec![0.0; l];
    for t in 1..m {
        for y in 0..l {
            for (yp, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(t - 1, yp) + crf.transitions.get(yp, y);
            }
            alpha.set(t, y, s.get(t, y) + lse(&buf));
        }
    }
    alpha
}

/// Backward log-potentials: `beta[t][y]` = log-sum over suffixes after `t`
/// given `y` at `t`, including the end score.
fn backward_table(crf: &CrfParams, s: &EmissionScores) -> Matrix {
    let (m, l) = (s.rows, s.cols);
    let mut beta = Matrix::zeros(m, l);
    for y in 0..l {
        beta.set(m - 1, y, crf.end[y]);
    }
    let mut buf = vec![0.0; l];
    for t in (0..m - 1).rev() {
        for y in 0..l {
            for (yn, b) in buf.iter_mut().enumerate() {
                *b = crf.transitions.get(y, yn) + s.get(t + 1, yn) + beta.get(t + 1, yn);
            }
            beta.set(t, y, lse(&buf));
        }
    }
    beta
}

fn log_z_from_alpha(crf: &CrfParams, alpha: &Matrix) -> f64 {
    let last = alpha.rows - 1;
    let terms: Vec<f64> = (0..alpha.cols)
        .map(|y| alpha.get(last, y) + crf.end[y])
        .collect();
    lse(&terms)
}

/// `log Σ_y exp(Q(y))` by the forward recursion.
pub fn log_partition(crf: &CrfParams, s: &EmissionScores) -> Result<f64> {
    crf.check(s)?;
    Ok(log_z_from_alpha(crf, &forward_table(crf, s)))
}

/// Per-position label marginals `P(y_t = y)`, `m × L`.
pub fn marginals(crf: &CrfParams, s: &EmissionScores) -> Result<Matrix> {
    crf.check(s)?;
    let alpha = forward_table(crf, s);
    let beta = backward_table(crf, s);
    let log_z = log_z_from_alpha(crf, &alpha);
    let mut p = Matrix::zeros(s.rows, s.cols);
    for (o, (a, b)) in p.data.iter_mut().zip(alpha.data.iter().zip(&beta.data)) {
        *o = (a + b - log_z).exp();
    }
    Ok(p)
}

/// Negative log-likelihood of one labeling and its gradients.
#[derive(Debug, Clone)]
pub struct CrfLoss {
    pub loss: f64,
    pub log_z: f64,
    /// `dL/ds`, `m × L`.
    pub d_emissions: Matrix,
    /// `dL/d(transitions, begin, end)`.
    pub grads: CrfParams,
}

/// `log Z - Q(y_true)` with gradients from forward-backward marginals.
pub fn sequence_nll(crf: &CrfParams, s: &EmissionScores, y_true: &[usize]) -> Result<CrfLoss> {
    let q = sequence_score(crf, s, y_true)?;
    let (m, l) = (s.rows, s.cols);
    if let Some(&bad) = y_true.iter().find(|&&y| y >= l) {
        return Err(Error::Shape(format!("label {bad} out of range for {l} labels")));
    }
    let alpha = forward_table(crf, s);
    let beta = backward_table(crf, s);
    let log_z = log_z_from_alpha(crf, &alpha);

    let mut d_emissions = Matrix::zeros(m, l);
    for t in 0..m {
        for y in 0..l {
            d_emissions.set(t, y, (alpha.get(t, y) + beta.get(t, y) - log_z).exp());
        }
    }
    let mut grads = crf.zeros_like();
    for y in 0..l {
        grads.begin[y] = d_emissions.get(0, y);
        grads.end[y] = d_emissions.get(m - 1, y);
    }
    for t in 0..m - 1 {
        for i in 0..l {
            let a = alpha.get(t, i);
            let row = grads.transitions.row_mut(i);
            for (j, g) in row.iter_mut().enumerate() {
                *g += (a + crf.transitions.get(i, j) + s.get(t + 1, j) + beta.get(t + 1, j) - log_z)
                    .exp();
            }
        }
    }

    // subtract the empirical counts of y_true
    grads.begin[y_true[0]] -= 1.0;
    grads.end[y_true[m - 1]] -= 1.0;
    for (t, &y) in y_true.iter().enumerate() {
        let v = d_emissions.get(t, y);
        d_emissions.set(t, y, v - 1.0);
    }
    for pair in y_true.windows(2) {
        let v = grads.transitions.get(pair[0], pair[1]);
        grads.transitions.set(pair[0], pair[1], v - 1.0);
    }

    Ok(CrfLoss {
        // tiny negative values are rounding noise
        loss: (log_z - q).max(0.0),
        log_z,
        d_emissions,
        grads,
    })
}

/// Highest-scoring labeling and its score.
///
/// Among equally scoring sequences the lexicographically smallest wins: the
/// decoder runs a max-product pass from the end, then picks labels left to
/// right taking the smallest id that still attains the optimum. The returned
/// score is recomputed with [`sequence_score`].
pub fn viterbi(crf: &CrfParams, s: &EmissionScores) -> Result<(Vec<usize>, f64)> {
    crf.check(s)?;
    let (m, l) = (s.rows, s.cols);
    // best[t][y]: best score of positions t..m given y at t (emission at t included)
    let mut best = Matrix::zeros(m, l);
    for y in 0..l {
        best.set(m - 1, y, s.get(m - 1, y) + crf.end[y]);
    }
    for t in (0..m - 1).rev() {
        for y in 0..l {
            let tail = (0..l)
                .map(|yn| crf.transitions.get(y, yn) + best.get(t + 1, yn))
                .fold(f64::NEG_INFINITY, f64::max);
            best.set(t, y, s.get(t, y) + tail);
        }
    }

    let argmax_first = |scores: &mut dyn Iterator<Item = f64>| -> usize {
        let mut arg = 0;
        let mut top = f64::NEG_INFINITY;
        for (y, v) in scores.enumerate() {
            if v > top {
                top = v;
                arg = y;
            }
        }
        arg
    };

    let mut path = Vec::with_capacity(m);
    path.push(argmax_first(&mut (0..l).map(|y| crf.begin[y] + best.get(0, y))));
    for t in 1..m {
        let prev = path[t - 1];
        path.push(argmax_first(
            &mut (0..l).map(|y| crf.transitions.get(prev, y) + best.get(t, y)),
        ));
    }
    let score = sequence_score(crf, s, &path)?;
    Ok((path, score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// All `l^m` label sequences, in lexicographic order.
    pub(crate) fn all_sequences(m: usize, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..m {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..l).map(move |y| {
                        let mut q = p.clone();
                        q.push(y);
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn random_instance(rng: &mut ChaCha8Rng, m: usize, l: usize) -> (CrfParams, Matrix) {
        let crf = CrfParams::random(l, 2.0, rng);
        let s = Matrix::from_vec(m, l, (0..m * l).map(|_| rng.gen_range(-3.0..3.0)).collect());
        (crf, s)
    }

    #[test]
    fn single_position_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (crf, s) = random_instance(&mut rng, 1, 3);
        for y in 0..3 {
            let q = sequence_score(&crf, &s, &[y]).unwrap();
            assert_eq!(q, crf.begin[y] + s.get(0, y) + crf.end[y]);
        }
    }

    #[test]
    fn two_position_hand_fixture() {
        // begin = [1, 2], end = [3, 4], T = [[5, 6], [7, 8]]
        // s = [[10, 20], [30, 40]]
        // Q([0, 1]) = 1 + 10 + 40 + 6 + 4 = 61
        // Q([1, 0]) = 2 + 20 + 30 + 7 + 3 = 62
        let crf = CrfParams {
            transitions: Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]),
            begin: vec![1.0, 2.0],
            end: vec![3.0, 4.0],
        };
        let s = Matrix::from_rows(&[vec![10.0, 20.0], vec![30.0, 40.0]]);
        assert_eq!(sequence_score(&crf, &s, &[0, 1]).unwrap(), 61.0);
        assert_eq!(sequence_score(&crf, &s, &[1, 0]).unwrap(), 62.0);
        // Q([1, 1]) = 2 + 20 + 40 + 8 + 4 = 74 is the maximum
        assert_eq!(viterbi(&crf, &s).unwrap(), (vec![1, 1], 74.0));
    }

    #[test]
    fn all_zero_scores() {
        let crf = CrfParams::zeros(4);
        let s = Matrix::zeros(3, 4);
        for y in all_sequences(3, 4) {
            assert_eq!(sequence_score(&crf, &s, &y).unwrap(), 0.0);
        }
        let one = Matrix::zeros(1, 4);
        assert!((log_partition(&crf, &one).unwrap() - 4f64.ln()).abs() < 1e-15);
        let nll = sequence_nll(&crf, &s, &[0, 1, 2]).unwrap();
        assert!((nll.loss - 3.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let crf = CrfParams::zeros(2);
        let s = Matrix::zeros(3, 2);
        assert!(matches!(
            sequence_score(&crf, &s, &[0, 1]),
            Err(Error::LengthMismatch { scores: 3, labels: 2 })
        ));
        assert!(matches!(log_partition(&crf, &Matrix::zeros(0, 2)), Err(Error::EmptyDocument)));
    }

    #[test]
    fn log_partition_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let m = rng.gen_range(1..=5);
            let l = rng.gen_range(1..=4);
            let (crf, s) = random_instance(&mut rng, m, l);
            let scores: Vec<f64> = all_sequences(m, l)
                .iter()
                .map(|y| sequence_score(&crf, &s, y).unwrap())
                .collect();
            let brute = lse(&scores);
            assert!((log_partition(&crf, &s).unwrap() - brute).abs() < 1e-8);
        }
    }

    #[test]
    fn emission_shift_adds_m_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (crf, s) = random_instance(&mut rng, 5, 4);
        let mut shifted = s.clone();
        shifted.data.iter_mut().for_each(|x| *x += 1.75);
        let a = log_partition(&crf, &s).unwrap();
        let b = log_partition(&crf, &shifted).unwrap();
        assert!((b - a - 5.0 * 1.75).abs() < 1e-10);
        assert_eq!(viterbi(&crf, &s).unwrap().0, viterbi(&crf, &shifted).unwrap().0);
    }

    #[test]
    fn saturated_emissions_have_near_zero_loss() {
        let crf = CrfParams::zeros(4);
        let y = [2, 0, 3, 3, 1];
        let mut s = Matrix::zeros(5, 4);
        for (t, &label) in y.iter().enumerate() {
            s.set(t, label, 50.0);
        }
        assert!(sequence_nll(&crf, &s, &y).unwrap().loss < 1e-6);
    }

    #[test]
    fn marginals_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (crf, s) = random_instance(&mut rng, 7, 5);
        let p = marginals(&crf, &s).unwrap();
        for t in 0..7 {
            let sum: f64 = p.row(t).iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn one_hot_emissions_decode_per_position() {
        let crf = CrfParams::zeros(4);
        let y = [3, 1, 1, 0, 2];
        let mut s = Matrix::zeros(5, 4);
        for (t, &label) in y.iter().enumerate() {
            s.set(t, label, 1.0);
        }
        assert_eq!(viterbi(&crf, &s).unwrap().0, y.to_vec());
    }

    #[test]
    fn ties_pick_smallest_labels() {
        let crf = CrfParams::zeros(3);
        let s = Matrix::zeros(4, 3);
        assert_eq!(viterbi(&crf, &s).unwrap(), (vec![0, 0, 0, 0], 0.0));
    }

    #[test]
    fn self_transition_penalty_prevents_repeats() {
        let mut crf = CrfParams::zeros(3);
        for i in 0..3 {
            crf.transitions.set(i, i, -100.0);
        }
        let s = Matrix::zeros(8, 3);
        let (path, _) = viterbi(&crf, &s).unwrap();
        assert!(path.windows(2).all(|w| w[0] != w[1]), "{path:?}");
        assert_eq!(path, vec![0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn viterbi_beats_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (crf, s) = random_instance(&mut rng, 12, 10);
        let (_, best) = viterbi(&crf, &s).unwrap();
        for _ in 0..100 {
            let y: Vec<usize> = (0..12).map(|_| rng.gen_range(0..10)).collect();
            assert!(sequence_score(&crf, &s, &y).unwrap() <= best);
        }
    }
}
