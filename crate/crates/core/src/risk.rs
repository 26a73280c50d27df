//! Conditional value-at-risk of sampled costs, its softplus surrogate and pathwise
//! gradient, and failure-probability estimators.
//!
//! The hard CVaR is the exact empirical value `min_η η + E[(C − η)₊]/(1 − β)`, whose
//! minimizer is the order statistic returned by [`empirical_quantile`]. When `(1 − β)N`
//! is an integer this is the mean of the `(1 − β)N` largest costs; otherwise the
//! boundary sample enters with fractional weight.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VnbError};
use crate::scalar::{log1p_exp, logistic, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig<T> {
    pub beta: T,
    pub kappa_rho: T,
    pub kappa_f: T,
    pub tau_f: T,
    pub lambda_c: T,
}

impl<T: Real> Default for RiskConfig<T> {
    fn default() -> Self {
        Self { beta: T::lit(0.9), kappa_rho: T::lit(5.0), kappa_f: T::lit(100.0), tau_f: T::lit(5.8), lambda_c: T::one() }
    }
}

impl<T: Real> RiskConfig<T> {
    pub fn with_beta(beta: T) -> Self {
        Self { beta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return Err(invalid("beta must lie in (0, 1)"));
        }
        if !(self.kappa_rho > T::zero() && self.kappa_f > T::zero()) {
            return Err(invalid("sharpness parameters must be positive"));
        }
        if !(self.lambda_c >= T::zero() && self.lambda_c <= T::one()) {
            return Err(invalid("lambda_c must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Sampled costs with the index of the belief sample each one came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSamples<T> {
    pub values: Vec<T>,
    pub sample_refs: Vec<usize>,
}

impl<T: Real> CostSamples<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        check(&values)?;
        let sample_refs = (0..values.len()).collect();
        Ok(Self { values, sample_refs })
    }
}

fn check<T: Real>(values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid("cost sample set is empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("cost samples must be finite"));
    }
    Ok(())
}

fn sorted<T: Real>(values: &[T]) -> Vec<T> {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    s
}

/// Index (0-based, ascending order) of the empirical β-quantile: the `⌈βN⌉`-th order statistic.
fn quantile_index(n: usize, beta: f64) -> usize {
    let rank = (beta * n as f64 - 1e-9).ceil() as i64;
    (rank.clamp(1, n as i64) - 1) as usize
}

/// Lower empirical β-quantile `η̂`.
pub fn empirical_quantile<T: Real>(values: &[T], beta: T) -> Result<T> {
    check(values)?;
    let s = sorted(values);
    Ok(s[quantile_index(s.len(), beta.as_f64())])
}

/// Rockafellar–Uryasev objective `η + Σ (C_i − η)₊ / ((1 − β)N)`.
fn ru_objective<T: Real>(values: &[T], eta: T, beta: T) -> T {
    let m = (T::one() - beta) * T::lit(values.len() as f64);
    eta + values.iter().map(|&c| (c - eta).max(T::zero())).sum::<T>() / m
}

/// Exact empirical CVaR at level `beta`.
pub fn hard_cvar<T: Real>(values: &[T], beta: T) -> Result<T> {
    check(values)?;
    if !(beta >= T::zero() && beta < T::one()) {
        return Err(invalid("beta must lie in [0, 1)"));
    }
    let eta = empirical_quantile(values, beta)?;
    Ok(ru_objective(values, eta, beta))
}

/// `softplus(x; κ) = ln(1 + e^{κx}) / κ`.
#[inline]
pub fn softplus_sharp<T: Real>(x: T, kappa: T) -> T {
    log1p_exp(kappa * x) / kappa
}

/// Softplus surrogate evaluated at a given threshold `eta`.
pub fn soft_cvar_at<T: Real>(values: &[T], eta: T, cfg: &RiskConfig<T>) -> Result<T> {
    check(values)?;
    cfg.validate()?;
    let m = (T::one() - cfg.beta) * T::lit(values.len() as f64);
    Ok(eta + values.iter().map(|&c| softplus_sharp(c - eta, cfg.kappa_rho)).sum::<T>() / m)
}

/// Smooth CVaR with `η̂` set to the empirical β-quantile of the samples.
pub fn soft_cvar<T: Real>(values: &[T], cfg: &RiskConfig<T>) -> Result<T> {
    let eta = empirical_quantile(values, cfg.beta)?;
    soft_cvar_at(values, eta, cfg)
}

/// Per-sample weights `σ_κ(C_i − η̂) / ((1 − β)N)` of the surrogate gradient, with `η̂` held fixed.
pub fn soft_cvar_weights<T: Real>(values: &[T], cfg: &RiskConfig<T>) -> Result<Vec<T>> {
    cfg.validate()?;
    let eta = empirical_quantile(values, cfg.beta)?;
    let m = (T::one() - cfg.beta) * T::lit(values.len() as f64);
    Ok(values.iter().map(|&c| logistic(cfg.kappa_rho * (c - eta)) / m).collect())
}

/// Pathwise gradient `Σ_i σ_κ(C_i − η̂) ∇C_i / ((1 − β)N)`.
pub fn soft_cvar_grad<T: Real>(values: &[T], cost_grads: &[Vec<T>], cfg: &RiskConfig<T>) -> Result<Vec<T>> {
    if cost_grads.len() != values.len() {
        return Err(VnbError::ShapeMismatch { expected: values.len(), got: cost_grads.len() });
    }
    let w = soft_cvar_weights(values, cfg)?;
    let dim = cost_grads[0].len();
    let mut out = vec![T::zero(); dim];
    for (wi, g) in w.iter().zip(cost_grads) {
        if g.len() != dim {
            return Err(VnbError::ShapeMismatch { expected: dim, got: g.len() });
        }
        for (o, &gi) in out.iter_mut().zip(g) {
            *o += *wi * gi;
        }
    }
    Ok(out)
}

pub fn sample_mean<T: Real>(values: &[T]) -> Result<T> {
    check(values)?;
    Ok(values.iter().copied().sum::<T>() / T::lit(values.len() as f64))
}

/// Fraction of samples whose cost exceeds `tau_f`.
pub fn failure_prob_hard<T: Real>(values: &[T], tau_f: T) -> Result<T> {
    check(values)?;
    let n = values.iter().filter(|&&c| c > tau_f).count();
    Ok(T::lit(n as f64 / values.len() as f64))
}

/// Sigmoid-smoothed failure probability `mean σ(κ_f (C_i − τ_f))`.
pub fn failure_prob_soft<T: Real>(values: &[T], cfg: &RiskConfig<T>) -> Result<T> {
    check(values)?;
    let s: T = values.iter().map(|&c| logistic(cfg.kappa_f * (c - cfg.tau_f))).sum();
    Ok(s / T::lit(values.len() as f64))
}

/// Per-sample derivative of [`failure_prob_soft`] with respect to each cost.
pub fn failure_prob_soft_weights<T: Real>(values: &[T], cfg: &RiskConfig<T>) -> Vec<T> {
    let n = T::lit(values.len() as f64);
    values
        .iter()
        .map(|&c| {
            let s = logistic(cfg.kappa_f * (c - cfg.tau_f));
            cfg.kappa_f * s * (T::one() - s) / n
        })
        .collect()
}

/// Absolute gap between predicted and observed failure probability.
pub fn calibration_error<T: Real>(p_belief: T, p_empirical: T) -> T {
    (p_belief - p_empirical).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(beta: f64, kappa: f64) -> RiskConfig<f64> {
        RiskConfig { beta, kappa_rho: kappa, ..RiskConfig::default() }
    }

    #[test]
    fn hard_cvar_examples() {
        assert_eq!(hard_cvar(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 3.5);
        assert_eq!(hard_cvar(&[2.5; 7], 0.9).unwrap(), 2.5);
        let v = [1.0, 5.0, 2.0, 8.0];
        assert!((hard_cvar(&v, 1e-9_f64).unwrap() - 4.0).abs() < 1e-8);
        assert!(hard_cvar::<f64>(&[], 0.5).is_err());
    }

    #[test]
    fn fractional_tail_weight() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((hard_cvar(&v, 0.75).unwrap() - (10.0 + 9.0 + 0.5 * 8.0) / 2.5).abs() < 1e-12);
    }

    #[test]
    fn soft_cvar_examples() {
        let c = soft_cvar(&[3.0; 10], &cfg(0.5, 5.0)).unwrap();
        assert!((c - 3.0 - 2f64.ln() / 2.5).abs() < 1e-12);
        let s = soft_cvar(&[1.0, 2.0, 3.0, 4.0], &cfg(0.5, 1e4)).unwrap();
        assert!((s - 3.5).abs() < 1e-3);
    }

    #[test]
    fn gradient_examples() {
        let c = cfg(0.9, 5.0);
        let vals: Vec<f64> = (0..10).map(|i| if i == 0 { 0.0 } else { 100.0 }).collect();
        let grads: Vec<Vec<f64>> = (0..10).map(|i| if i == 0 { vec![1.0] } else { vec![0.0] }).collect();
        let g = soft_cvar_grad(&vals, &grads, &c).unwrap();
        assert!(g[0].abs() < 1e-10);
        let single = soft_cvar_grad(&[7.0], &[vec![2.0, -4.0]], &c).unwrap();
        assert!((single[0] - 0.5 * 2.0 / 0.1).abs() < 1e-12 && (single[1] + 0.5 * 4.0 / 0.1).abs() < 1e-12);
        assert!(soft_cvar_grad(&[1.0, 2.0], &[vec![1.0]], &c).is_err());
    }

    #[test]
    fn failure_probabilities() {
        let c = RiskConfig::<f64>::default();
        assert_eq!(failure_prob_hard(&[4.8; 5], 5.8).unwrap(), 0.0);
        assert_eq!(failure_prob_hard(&[6.8; 5], 5.8).unwrap(), 1.0);
        assert_eq!(failure_prob_hard(&[5.0, 6.0, 5.9, 5.5], 5.8).unwrap(), 0.5);
        assert!((failure_prob_soft(&[5.8; 3], &c).unwrap() - 0.5).abs() < 1e-15);
        let v = [5.0, 6.0, 5.9, 5.5, 5.7];
        assert!((failure_prob_soft(&v, &c).unwrap() - failure_prob_hard(&v, 5.8).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn calibration_examples() {
        assert!((calibration_error(0.18_f64, 0.27) - 0.09).abs() < 1e-12);
        assert_eq!(calibration_error(0.4, 0.4), 0.0);
        assert!((calibration_error(1.0_f64, 0.42) - 0.58).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let s = soft_cvar(&[1.0_f32, 2.0, 3.0, 4.0], &RiskConfig { beta: 0.5, kappa_rho: 1e4, ..Default::default() });
        assert!((s.unwrap() - 3.5).abs() < 1e-3);
    }
}
