use rand::Rng;
use rand_distr::StandardNormal;

use super::gumbel::{gumbel_softmax_weights, sample_gumbel};
use super::BeliefParams;
use crate::error::{invalid, Result, VnbError};
use crate::scalar::Real;

/// One relaxed mixture sample together with the noise that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamSample<T> {
    pub value: Vec<T>,
    pub weights: Vec<T>,
    pub noises: Vec<Vec<T>>,
    pub gumbels: Vec<T>,
}

/// Gradient of a scalar with respect to every belief parameter, laid out like [`BeliefParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrad<T> {
    pub logits: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub log_stds: Vec<Vec<T>>,
}

impl<T: Real> BeliefGrad<T> {
    pub fn zeros(k: usize, d: usize) -> Self {
        Self { logits: vec![T::zero(); k], means: vec![vec![T::zero(); d]; k], log_stds: vec![vec![T::zero(); d]; k] }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, &b) in self.logits.iter_mut().zip(&other.logits) {
            *a += scale * b;
        }
        for (ra, rb) in self.means.iter_mut().zip(&other.means) {
            for (a, &b) in ra.iter_mut().zip(rb) {
                *a += scale * b;
            }
        }
        for (ra, rb) in self.log_stds.iter_mut().zip(&other.log_stds) {
            for (a, &b) in ra.iter_mut().zip(rb) {
                *a += scale * b;
            }
        }
    }

    /// Same ordering as [`BeliefParams::to_flat`].
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = self.logits.clone();
        out.extend(self.means.iter().flatten().copied());
        out.extend(self.log_stds.iter().flatten().copied());
        out
    }
}

/// Evaluates `θ = Σ_k ζ_k (μ_k + σ_k ⊙ ε_k)` for fixed noise, returning `(θ, ζ)`.
pub fn reparam_value<T: Real>(params: &BeliefParams<T>, noises: &[Vec<T>], gumbels: &[T]) -> (Vec<T>, Vec<T>) {
    let zeta = gumbel_softmax_weights(&params.logits, gumbels, params.temperature);
    let mut value = vec![T::zero(); params.dim()];
    for (k, &z) in zeta.iter().enumerate() {
        for (j, v) in value.iter_mut().enumerate() {
            *v += z * (params.means[k][j] + params.log_stds[k][j].exp() * noises[k][j]);
        }
    }
    (value, zeta)
}

impl<T: Real> ReparamSample<T> {
    /// Pulls an upstream gradient `∂L/∂θ` back to the belief parameters along this sample's path.
    pub fn backward(&self, params: &BeliefParams<T>, upstream: &[T]) -> Result<BeliefGrad<T>> {
        let (k, d) = (params.num_components(), params.dim());
        if upstream.len() != d {
            return Err(VnbError::ShapeMismatch { expected: d, got: upstream.len() });
        }
        let mut grad = BeliefGrad::zeros(k, d);
        let mut dzeta = vec![T::zero(); k];
        for c in 0..k {
            let z = self.weights[c];
            for j in 0..d {
                let sigma = params.log_stds[c][j].exp();
                let eps = self.noises[c][j];
                grad.means[c][j] = z * upstream[j];
                grad.log_stds[c][j] = z * sigma * eps * upstream[j];
                dzeta[c] += upstream[j] * (params.means[c][j] + sigma * eps);
            }
        }
        let inner: T = self.weights.iter().zip(&dzeta).map(|(&z, &g)| z * g).sum();
        for c in 0..k {
            grad.logits[c] = self.weights[c] * (dzeta[c] - inner) / params.temperature;
        }
        Ok(grad)
    }
}

fn normal_vec<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    (0..d).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
}

/// Draws `n` pathwise-differentiable samples from the mixture.
pub fn sample_belief<T: Real, R: Rng + ?Sized>(
    params: &BeliefParams<T>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ReparamSample<T>>> {
    params.validate()?;
    if n == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let (k, d) = (params.num_components(), params.dim());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let gumbels: Vec<T> = (0..k).map(|_| sample_gumbel(rng)).collect();
        let noises: Vec<Vec<T>> = (0..k).map(|_| normal_vec(d, rng)).collect();
        let (value, weights) = reparam_value(params, &noises, &gumbels);
        out.push(ReparamSample { value, weights, noises, gumbels });
    }
    Ok(out)
}

/// Draws `n` standard-normal noise vectors for component `k` and returns `(μ_k + σ_k ⊙ ε, ε)` pairs.
pub fn sample_component<T: Real, R: Rng + ?Sized>(
    params: &BeliefParams<T>,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Vec<(Vec<T>, Vec<T>)> {
    let sigma = params.stds(k);
    (0..n)
        .map(|_| {
            let eps: Vec<T> = normal_vec(params.dim(), rng);
            let x = params.means[k].iter().zip(&sigma).zip(&eps).map(|((&m, &s), &e)| m + s * e).collect();
            (x, eps)
        })
        .collect()
}
