use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and the multiplicative mask (each
/// entry 0 or `1/(1-rate)`), which [`dropout_backward`] reuses.
/// In eval mode, or with rate 0, the input passes through unchanged and the
/// mask is all ones.
pub fn dropout<R: Rng>(x: &[f64], rate: f64, mode: DropoutMode, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if mode == DropoutMode::Eval || rate == 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let out = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
    (out, mask)
}

pub fn dropout_backward(dy: &[f64], mask: &[f64]) -> Vec<f64> {
    dy.iter().zip(mask).map(|(d, m)| d * m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rate_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [1.0, -2.0, 3.5];
        for mode in [DropoutMode::Train, DropoutMode::Eval] {
            assert_eq!(dropout(&x, 0.0, mode, &mut rng).0, x.to_vec());
        }
    }

    #[test]
    fn eval_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [1.0, -2.0, 3.5];
        assert_eq!(dropout(&x, 0.9, DropoutMode::Eval, &mut rng).0, x.to_vec());
    }

    #[test]
    fn train_mode_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = [1.0, -2.0, 0.5, 4.0];
        let n = 100_000;
        let mut sums = [0.0; 4];
        for _ in 0..n {
            let (y, _) = dropout(&x, 0.5, DropoutMode::Train, &mut rng);
            for (s, v) in sums.iter_mut().zip(y) {
                *s += v;
            }
        }
        for (s, xi) in sums.iter().zip(x) {
            let mean = s / n as f64;
            assert!((mean - xi).abs() <= 0.02 * xi.abs(), "mean {mean} vs {xi}");
        }
    }

    #[test]
    fn seeded_masks_repeat() {
        let x = vec![1.0; 32];
        let a = dropout(&x, 0.5, DropoutMode::Train, &mut ChaCha8Rng::seed_from_u64(3));
        let b = dropout(&x, 0.5, DropoutMode::Train, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(a.1.iter().all(|&m| m == 0.0 || m == 2.0));
    }
}
