use super::{BeliefGrad, BeliefParams};
use crate::scalar::Real;

/// Closed-form differential entropy of a diagonal Gaussian with the given log standard deviations.
pub fn gaussian_entropy<T: Real>(log_stds: &[T]) -> T {
    let d = T::lit(log_stds.len() as f64);
    let c = T::lit(0.5) * (T::one() + (T::lit(2.0) * T::PI()).ln());
    d * c + log_stds.iter().copied().sum::<T>()
}

/// Upper bound `H(π) + Σ_k π_k H(N_k)` on the entropy of the mixture.
pub fn belief_entropy_bound<T: Real>(params: &BeliefParams<T>) -> T {
    let pi = params.weights();
    let mut h = T::zero();
    for (k, &p) in pi.iter().enumerate() {
        if p > T::zero() {
            h -= p * p.ln();
        }
        h += p * gaussian_entropy(&params.log_stds[k]);
    }
    h
}

/// Gradient of [`belief_entropy_bound`] with respect to logits, means and log standard deviations.
pub fn belief_entropy_bound_grad<T: Real>(params: &BeliefParams<T>) -> BeliefGrad<T> {
    let k = params.num_components();
    let d = params.dim();
    let pi = params.weights();
    let comp: Vec<T> = params.log_stds.iter().map(|s| gaussian_entropy(s)).collect();
    let cat: T = pi.iter().filter(|&&p| p > T::zero()).map(|&p| -p * p.ln()).sum();
    let avg: T = pi.iter().zip(&comp).map(|(&p, &e)| p * e).sum();
    let mut grad = BeliefGrad::zeros(k, d);
    for j in 0..k {
        let ln_p = if pi[j] > T::zero() { pi[j].ln() } else { T::zero() };
        grad.logits[j] = pi[j] * (-ln_p - cat + comp[j] - avg);
        for g in grad.log_stds[j].iter_mut() {
            *g = pi[j];
        }
    }
    grad
}
