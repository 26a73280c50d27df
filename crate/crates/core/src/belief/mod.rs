//! Gaussian-mixture beliefs with pathwise-differentiable sampling.
//!
//! A belief is a mixture of `K` diagonal Gaussians over the latent vector. Samples are
//! drawn with a Gumbel-Softmax relaxation of the component choice combined with the
//! location-scale transform, so every sample is a smooth function of the mixture
//! logits, means and log standard deviations for fixed noise draws. The draws are kept
//! on each [`ReparamSample`] so gradients can be replayed later.

mod entropy;
mod gumbel;
mod reparam;
mod siren;

pub use entropy::{belief_entropy_bound, belief_entropy_bound_grad, gaussian_entropy};
pub use gumbel::{gumbel_softmax_weights, sample_gumbel, sample_gumbel_softmax, GumbelDraw};
pub use reparam::{reparam_value, sample_belief, sample_component, BeliefGrad, ReparamSample};
pub use siren::{langevin_chains, langevin_sample, siren_log_density, siren_score, DenseLayer, SirenBelief};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VnbError};
use crate::scalar::{softmax, Real};

/// Version tag written into serialized beliefs.
pub const BELIEF_FORMAT: &str = "vnb-belief/1";

/// Parameters of a `K`-component diagonal Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct BeliefParams<T> {
    pub logits: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub log_stds: Vec<Vec<T>>,
    /// Gumbel-Softmax temperature.
    pub temperature: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
struct BeliefDocument<T> {
    version: String,
    #[serde(flatten)]
    params: BeliefParams<T>,
}

impl<T: Real> BeliefParams<T> {
    pub fn new(logits: Vec<T>, means: Vec<Vec<T>>, log_stds: Vec<Vec<T>>, temperature: T) -> Result<Self> {
        let params = Self { logits, means, log_stds, temperature };
        params.validate()?;
        Ok(params)
    }

    /// Single Gaussian with the given mean and per-dimension log standard deviation.
    pub fn gaussian(mean: Vec<T>, log_std: Vec<T>, temperature: T) -> Result<Self> {
        Self::new(vec![T::zero()], vec![mean], vec![log_std], temperature)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.logits.len();
        if k == 0 {
            return Err(invalid("belief needs at least one component"));
        }
        if self.means.len() != k {
            return Err(VnbError::ShapeMismatch { expected: k, got: self.means.len() });
        }
        if self.log_stds.len() != k {
            return Err(VnbError::ShapeMismatch { expected: k, got: self.log_stds.len() });
        }
        let d = self.means[0].len();
        if d == 0 {
            return Err(invalid("belief dimension must be positive"));
        }
        for (m, s) in self.means.iter().zip(&self.log_stds) {
            if m.len() != d {
                return Err(VnbError::ShapeMismatch { expected: d, got: m.len() });
            }
            if s.len() != d {
                return Err(VnbError::ShapeMismatch { expected: d, got: s.len() });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(invalid("component mean is not finite"));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(invalid("log standard deviation is not finite"));
            }
        }
        if self.logits.iter().any(|x| !x.is_finite()) {
            return Err(invalid("mixture logits are not finite"));
        }
        if !(self.temperature > T::zero()) || !self.temperature.is_finite() {
            return Err(invalid("temperature must be positive"));
        }
        Ok(())
    }

    pub fn num_components(&self) -> usize {
        self.logits.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Mixture weights `softmax(logits)`.
    pub fn weights(&self) -> Vec<T> {
        softmax(&self.logits)
    }

    pub fn stds(&self, k: usize) -> Vec<T> {
        self.log_stds[k].iter().map(|s| s.exp()).collect()
    }

    /// The `k`-th component as a standalone single-Gaussian belief.
    pub fn component(&self, k: usize) -> Self {
        Self {
            logits: vec![T::zero()],
            means: vec![self.means[k].clone()],
            log_stds: vec![self.log_stds[k].clone()],
            temperature: self.temperature,
        }
    }

    /// Mixture mean `Σ π_k μ_k`.
    pub fn mean(&self) -> Vec<T> {
        let w = self.weights();
        let mut out = vec![T::zero(); self.dim()];
        for (wk, mk) in w.iter().zip(&self.means) {
            for (o, &m) in out.iter_mut().zip(mk) {
                *o += *wk * m;
            }
        }
        out
    }

    /// Flattens into `[logits | means (row-major) | log_stds (row-major)]`.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = self.logits.clone();
        out.extend(self.means.iter().flatten().copied());
        out.extend(self.log_stds.iter().flatten().copied());
        out
    }

    /// Inverse of [`BeliefParams::to_flat`] for `k` components of dimension `d`.
    pub fn from_flat(flat: &[T], k: usize, d: usize, temperature: T) -> Result<Self> {
        let expected = k * (2 * d + 1);
        if flat.len() != expected {
            return Err(VnbError::ShapeMismatch { expected, got: flat.len() });
        }
        let logits = flat[..k].to_vec();
        let means = flat[k..k + k * d].chunks(d).map(<[T]>::to_vec).collect();
        let log_stds = flat[k + k * d..].chunks(d).map(<[T]>::to_vec).collect();
        Self::new(logits, means, log_stds, temperature)
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        let doc = BeliefDocument { version: BELIEF_FORMAT.to_string(), params: self.clone() };
        serde_json::to_string(&doc).map_err(|e| VnbError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let doc: BeliefDocument<T> =
            serde_json::from_str(text).map_err(|e| VnbError::Serialization(e.to_string()))?;
        if doc.version != BELIEF_FORMAT {
            return Err(VnbError::Serialization(format!("unsupported belief version {:?}", doc.version)));
        }
        doc.params.validate()?;
        Ok(doc.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BeliefParams<f64> {
        BeliefParams::new(
            vec![0.3, -1.2],
            vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]],
            vec![vec![0.1, -0.2, 0.0], vec![-1.0, 0.0, 0.4]],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(BeliefParams::<f64>::new(vec![], vec![], vec![], 1.0).is_err());
        assert!(BeliefParams::new(vec![0.0], vec![vec![0.0]], vec![vec![f64::INFINITY]], 1.0).is_err());
        assert!(BeliefParams::new(vec![0.0], vec![vec![0.0]], vec![vec![0.0]], 0.0).is_err());
        assert!(BeliefParams::new(vec![0.0, 1.0], vec![vec![0.0]], vec![vec![0.0]], 1.0).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        let w = toy().weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_carries_version() {
        let p = toy();
        let text = p.to_json().unwrap();
        assert!(text.contains("\"version\":\"vnb-belief/1\""));
        assert_eq!(BeliefParams::<f64>::from_json(&text).unwrap(), p);
        let bad = text.replace("vnb-belief/1", "vnb-belief/0");
        assert!(BeliefParams::<f64>::from_json(&bad).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let p = toy();
        let back = BeliefParams::from_flat(&p.to_flat(), 2, 3, 0.5).unwrap();
        assert_eq!(back, p);
    }
}
