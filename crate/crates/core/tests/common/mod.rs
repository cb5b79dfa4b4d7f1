//! Finite-difference gradient checks shared by the gradient tests and the
//! acceptance suite.

#![allow(dead_code)]

use dischargesum::corpus::{Label, LabeledDocument, NUM_LABELS};
use dischargesum::crf::{self, CrfParams};
use dischargesum::nn::{
    bilstm_backward, bilstm_forward, lstm_backward, lstm_forward, BiLstm, Dense, LstmParams, Matrix,
    Params, Scorer,
};
use dischargesum::tagger::{build_model, DropoutConfig, ModelConfig, WordEmbeddingMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest relative error between `analytic` (arrays in visit order) and a
/// central difference of `loss` at every coordinate of `params`.
pub fn max_rel_error<P: Params + Clone>(params: &P, analytic: &[Vec<f64>], loss: impl Fn(&P) -> f64) -> f64 {
    let sizes: Vec<usize> = analytic.iter().map(Vec::len).collect();
    let mut worst = 0.0f64;
    for (array, &n) in sizes.iter().enumerate() {
        for k in 0..n {
            let eval = |delta: f64| {
                let mut p = params.clone();
                let mut idx = 0;
                p.visit_mut(&mut |_, v| {
                    if idx == array {
                        v[k] += delta;
                    }
                    idx += 1;
                });
                loss(&p)
            };
            let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            worst = worst.max(rel_err(analytic[array][k], numeric, 1e-6));
        }
    }
    worst
}

fn random_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(rows, cols, random_vec(rows * cols, scale, rng))
}

/// Parameters plus inputs, so inputs get checked alongside weights.
#[derive(Clone)]
struct WithInputs<P> {
    params: P,
    inputs: Vec<Vec<f64>>,
}

impl<P: Params> Params for WithInputs<P> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.params.visit(f);
        for x in &self.inputs {
            f("x", &[x.len()], x);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.params.visit_mut(f);
        for x in &mut self.inputs {
            f("x", x);
        }
    }
}

#[derive(Clone)]
struct CrfInstance {
    crf: CrfParams,
    emissions: Matrix,
}

impl Params for CrfInstance {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.crf.visit(f);
        f("emissions", &self.emissions.shape(), &self.emissions.data);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.crf.visit_mut(f);
        f("emissions", &mut self.emissions.data);
    }
}

/// Outcome of one unit's gradient check.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub unit: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

fn dot_all(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum()
}

pub fn check_crf(instances: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let m = rng.gen_range(1..=6);
        let l = rng.gen_range(2..=4);
        let inst = CrfInstance {
            crf: CrfParams::random(l, 1.0, &mut rng),
            emissions: random_matrix(m, l, 2.0, &mut rng),
        };
        let y: Vec<usize> = (0..m).map(|_| rng.gen_range(0..l)).collect();
        let out = crf::sequence_nll(&inst.crf, &inst.emissions, &y).unwrap();
        let mut analytic = out.grads.flatten();
        analytic.push(out.d_emissions.data.clone());
        let err = max_rel_error(&inst, &analytic, |p| {
            crf::sequence_nll(&p.crf, &p.emissions, &y).unwrap().loss
        });
        worst = worst.max(err);
    }
    GradReport {
        unit: "crf sequence_nll",
        instances,
        max_rel_error: worst,
        tolerance: 1e-4,
    }
}

pub fn check_dense(instances: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (din, dout) = (rng.gen_range(1..=6), rng.gen_range(1..=5));
        let inst = WithInputs {
            params: Dense::new(din, dout, &mut rng),
            inputs: vec![random_vec(din, 1.0, &mut rng)],
        };
        let r = random_vec(dout, 1.0, &mut rng);
        let mut g = inst.params.zeros_like();
        let dx = inst.params.backward(&inst.inputs[0], &r, &mut g);
        let mut analytic = g.flatten();
        analytic.push(dx);
        let loss = |p: &WithInputs<Dense>| dot_all(&[p.params.forward(&p.inputs[0])], &[r.clone()]);
        worst = worst.max(max_rel_error(&inst, &analytic, loss));
    }
    GradReport {
        unit: "dense layer",
        instances,
        max_rel_error: worst,
        tolerance: 1e-4,
    }
}

pub fn check_scorer(instances: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let din = rng.gen_range(1..=6);
        let hidden = if i % 2 == 0 { Some(rng.gen_range(1..=5)) } else { None };
        let inst = WithInputs {
            params: Scorer::new(din, hidden, NUM_LABELS, &mut rng),
            inputs: vec![random_vec(din, 1.0, &mut rng)],
        };
        let r = random_vec(NUM_LABELS, 1.0, &mut rng);
        let (_, cache) = inst.params.forward(&inst.inputs[0]);
        let mut g = inst.params.zeros_like();
        let dx = inst.params.backward(&cache, &r, &mut g);
        let mut analytic = g.flatten();
        analytic.push(dx);
        let loss = |p: &WithInputs<Scorer>| dot_all(&[p.params.forward(&p.inputs[0]).0], &[r.clone()]);
        worst = worst.max(max_rel_error(&inst, &analytic, loss));
    }
    GradReport {
        unit: "label scorer",
        instances,
        max_rel_error: worst,
        tolerance: 1e-4,
    }
}

pub fn check_lstm(instances: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (d, h, t) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=5));
        let inst = WithInputs {
            params: LstmParams::new(d, h, &mut rng),
            inputs: (0..t).map(|_| random_vec(d, 1.0, &mut rng)).collect(),
        };
        let r: Vec<Vec<f64>> = (0..t).map(|_| random_vec(h, 1.0, &mut rng)).collect();
        let (_, cache) = lstm_forward(&inst.params, &inst.inputs);
        let mut g = inst.params.zeros_like();
        let dx = lstm_backward(&inst.params, &cache, &r, &mut g);
        let mut analytic = g.flatten();
        analytic.extend(dx);
        let loss = |p: &WithInputs<LstmParams>| dot_all(&lstm_forward(&p.params, &p.inputs).0, &r);
        worst = worst.max(max_rel_error(&inst, &analytic, loss));
    }
    GradReport {
        unit: "lstm",
        instances,
        max_rel_error: worst,
        tolerance: 1e-4,
    }
}

pub fn check_bilstm(instances: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (d, h, t) = (rng.gen_range(1..=4), rng.gen_range(1..=3), rng.gen_range(1..=5));
        let inst = WithInputs {
            params: BiLstm::new(d, h, &mut rng),
            inputs: (0..t).map(|_| random_vec(d, 1.0, &mut rng)).collect(),
        };
        let r: Vec<Vec<f64>> = (0..t).map(|_| random_vec(2 * h, 1.0, &mut rng)).collect();
        let p = &inst.params;
        let (_, cache) = bilstm_forward(&p.fwd, &p.bwd, &inst.inputs);
        let mut g = p.zeros_like();
        let dx = bilstm_backward(&p.fwd, &p.bwd, &cache, &r, &mut g.fwd, &mut g.bwd);
        let mut analytic = g.flatten();
        analytic.extend(dx);
        let loss = |q: &WithInputs<BiLstm>| {
            dot_all(&bilstm_forward(&q.params.fwd, &q.params.bwd, &q.inputs).0, &r)
        };
        worst = worst.max(max_rel_error(&inst, &analytic, loss));
    }
    GradReport {
        unit: "bilstm",
        instances,
        max_rel_error: worst,
        tolerance: 1e-4,
    }
}

const WORDS: [&str; 8] = ["fever", "Cough", "x", "aspirin", "pt", "denies", "BP", "a"];

/// Full tagger on a 4-token document, dropout active with a fixed mask seed.
pub fn check_end_to_end(instances: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let words: Vec<(&str, Label)> = (0..4)
            .map(|_| (WORDS[rng.gen_range(0..WORDS.len())], Label::ALL[rng.gen_range(0..NUM_LABELS)]))
            .collect();
        let doc = LabeledDocument::from_words("g", &words);
        let config = ModelConfig {
            word_dim: 3,
            char_dim: 2,
            char_hidden: 2,
            use_chars: i % 4 != 3,
            context_hidden: 3,
            scorer_hidden: if i % 2 == 0 { Some(3) } else { None },
            word_mode: WordEmbeddingMode::Learned,
            lowercase: true,
        };
        let (mut model, _) = build_model(config, std::slice::from_ref(&doc), None, rng.gen()).unwrap();
        model.params.net.crf = CrfParams::random(NUM_LABELS, 0.5, &mut rng);
        let enc = model.encode_document(&doc);
        let labels: Vec<usize> = doc.labels.iter().map(|l| l.id()).collect();
        let drop = if i % 3 == 0 {
            DropoutConfig::NONE
        } else {
            DropoutConfig {
                rate: 0.3,
                embeddings: true,
                hidden: true,
            }
        };
        let mask_seed: u64 = rng.gen();
        let g = model
            .loss_and_gradient(&enc, &labels, drop, &mut ChaCha8Rng::seed_from_u64(mask_seed))
            .unwrap();
        let mut total = model.params.zeros_like();
        g.accumulate_into(&mut total);
        let analytic = total.flatten();
        let base = model.clone();
        let err = max_rel_error(&model.params, &analytic, |p| {
            let mut m = base.clone();
            m.params = p.clone();
            m.loss(&enc, &labels, drop, &mut ChaCha8Rng::seed_from_u64(mask_seed)).unwrap()
        });
        worst = worst.max(err);
    }
    GradReport {
        unit: "end-to-end tagger",
        instances,
        max_rel_error: worst,
        tolerance: 1e-3,
    }
}

pub fn all_gradient_checks(instances: usize, seed: u64) -> Vec<GradReport> {
    vec![
        check_crf(instances, seed),
        check_lstm(instances, seed + 1),
        check_bilstm(instances, seed + 2),
        check_dense(instances, seed + 3),
        check_scorer(instances, seed + 4),
        check_end_to_end(instances, seed + 5),
    ]
}
