use rand::Rng;

use crate::error::{invalid, Result};
use crate::scalar::{softmax, Real};

const U_MIN: f64 = 1e-12;

/// Relaxed one-hot weights together with the Gumbel noise that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelDraw<T> {
    pub weights: Vec<T>,
    pub gumbels: Vec<T>,
}

/// Standard Gumbel(0, 1) draw via `-ln(-ln u)` with `u` clamped away from 0 and 1.
pub fn sample_gumbel<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let u: f64 = rng.gen::<f64>().clamp(U_MIN, 1.0 - U_MIN);
    T::lit(-(-u.ln()).ln())
}

/// Deterministic Gumbel-Softmax map `softmax((ℓ + g) / τ)`.
pub fn gumbel_softmax_weights<T: Real>(logits: &[T], gumbels: &[T], temperature: T) -> Vec<T> {
    let scaled: Vec<T> = logits.iter().zip(gumbels).map(|(&l, &g)| (l + g) / temperature).collect();
    softmax(&scaled)
}

/// Draws a relaxed categorical sample on the simplex.
pub fn sample_gumbel_softmax<T: Real, R: Rng + ?Sized>(
    logits: &[T],
    temperature: T,
    rng: &mut R,
) -> Result<GumbelDraw<T>> {
    if logits.is_empty() {
        return Err(invalid("Gumbel-Softmax needs at least one logit"));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(invalid("non-finite logits"));
    }
    if !(temperature > T::zero()) {
        return Err(invalid("temperature must be positive"));
    }
    let gumbels: Vec<T> = (0..logits.len()).map(|_| sample_gumbel(rng)).collect();
    let weights = gumbel_softmax_weights(logits, &gumbels, temperature);
    Ok(GumbelDraw { weights, gumbels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_component_is_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &tau in &[1e-3, 1.0, 50.0] {
            let d = sample_gumbel_softmax(&[3.7_f64], tau, &mut rng).unwrap();
            assert_eq!(d.weights, vec![1.0]);
        }
    }

    #[test]
    fn vanishing_temperature_is_one_hot_at_argmax() {
        let w = gumbel_softmax_weights(&[0.0_f64, 0.0], &[1.0, 0.0], 1e-4);
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1] < 1e-12);
    }

    #[test]
    fn non_finite_logits_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_gumbel_softmax(&[0.0_f64, f64::NAN], 1.0, &mut rng).is_err());
        assert!(sample_gumbel_softmax(&[0.0_f64], 0.0, &mut rng).is_err());
    }

    #[test]
    fn argmax_frequencies_match_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let logits = [2.0_f64, 0.0, 0.0];
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let d = sample_gumbel_softmax(&logits, 1.0, &mut rng).unwrap();
            let k = (0..3).max_by(|&a, &b| d.weights[a].total_cmp(&d.weights[b])).unwrap();
            counts[k] += 1;
        }
        let target = [0.7870, 0.1065, 0.1065];
        for (c, t) in counts.iter().zip(&target) {
            assert!((*c as f64 / n as f64 - t).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn low_temperature_mean_approaches_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let logits = [2.0_f64, 0.0, 0.0];
        let n = 100_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            let d = sample_gumbel_softmax(&logits, 0.05, &mut rng).unwrap();
            for (a, w) in acc.iter_mut().zip(&d.weights) {
                *a += w / n as f64;
            }
        }
        for (a, t) in acc.iter().zip(&[0.7870, 0.1065, 0.1065]) {
            assert!((a - t).abs() < 0.01, "{acc:?}");
        }
    }
}
