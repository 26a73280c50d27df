use serde::{Deserialize, Serialize};

use super::hand::{HandModel, ACTION_DIM};
use super::latent::{LatentState, LATENT_DIM};
use super::{norm, sub};
use crate::error::{Result, VnbError};
use crate::observation::Observation;
use crate::scalar::{log1p_exp, logistic, Real};

const MU_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights<T> {
    pub alpha_s: T,
    pub alpha_g: T,
    pub alpha_r: T,
    pub alpha_n: T,
    pub omega_pose: T,
    pub omega_occ: T,
    pub omega_seg: T,
    pub lambda_v: T,
}

impl<T: Real> Default for CostWeights<T> {
    fn default() -> Self {
        Self {
            alpha_s: T::one(),
            alpha_g: T::lit(0.5),
            alpha_r: T::lit(2.0),
            alpha_n: T::lit(0.1),
            omega_pose: T::one(),
            omega_occ: T::one(),
            omega_seg: T::one(),
            lambda_v: T::zero(),
        }
    }
}

impl<T: Real> CostWeights<T> {
    /// Cost of having no active contact: each term of the contact-stability cost at zero parameters.
    pub fn empty_contact_penalty() -> T {
        T::lit(3.0) * (T::one() + T::LN_2())
    }
}

fn mean_rate<T: Real>(action: &[T]) -> T {
    action.iter().copied().sum::<T>() / T::lit(ACTION_DIM as f64)
}

/// Index of the active contact with the largest clamped friction (the minimizer of `μ⁻¹`).
fn best_friction<T: Real>(theta: &[T], hand: &HandModel<T>) -> Option<usize> {
    (0..hand.fingers())
        .filter(|&i| hand.active[i])
        .max_by(|&a, &b| {
            let ma = theta[LatentState::<T>::contact_offset(a)];
            let mb = theta[LatentState::<T>::contact_offset(b)];
            ma.partial_cmp(&mb).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
        })
}

fn check_shapes<T: Real>(theta: &[T], action: &[T]) -> Result<()> {
    if theta.len() != LATENT_DIM {
        return Err(VnbError::ShapeMismatch { expected: LATENT_DIM, got: theta.len() });
    }
    if action.len() != ACTION_DIM {
        return Err(VnbError::ShapeMismatch { expected: ACTION_DIM, got: action.len() });
    }
    Ok(())
}

/// Grasp cost evaluated directly on a latent vector.
pub fn grasp_cost_vec<T: Real>(theta: &[T], action: &[T], hand: &HandModel<T>, w: &CostWeights<T>) -> Result<T> {
    check_shapes(theta, action)?;
    let a_bar = mean_rate(action);
    let center = [theta[0], theta[1], theta[2]];
    let g_close: T = -hand.fingertips(action).into_iter().map(|p| norm(sub(p, center))).sum::<T>();
    let c_str = -w.alpha_s * a_bar - w.alpha_g * g_close;

    let c_rho = match best_friction(theta, hand) {
        Some(i) => {
            let mu = theta[LatentState::<T>::contact_offset(i)].max(T::lit(MU_FLOOR));
            -w.alpha_r * (w.alpha_n * a_bar - mu.recip()).max(T::zero())
        }
        None => T::zero(),
    };

    let n_c = hand.num_active();
    let c_ctc = if n_c == 0 {
        CostWeights::<T>::empty_contact_penalty()
    } else {
        let mut s = T::zero();
        for i in (0..hand.fingers()).filter(|&i| hand.active[i]) {
            let o = LatentState::<T>::contact_offset(i);
            s += (-theta[o]).exp() + (-theta[o + 1]).exp() + log1p_exp(theta[o + 3]);
        }
        s / T::lit(n_c as f64)
    };
    Ok(c_str + c_rho + c_ctc)
}

/// Grasp cost `C(θ, a) = C_str + C_ρ + C_ctc`.
pub fn grasp_cost<T: Real>(theta: &LatentState<T>, action: &[T], hand: &HandModel<T>, w: &CostWeights<T>) -> Result<T> {
    grasp_cost_vec(&theta.to_vector(), action, hand, w)
}

/// Gradient of the grasp cost with respect to the action.
pub fn grasp_cost_grad<T: Real>(theta: &[T], action: &[T], hand: &HandModel<T>, w: &CostWeights<T>) -> Result<Vec<T>> {
    check_shapes(theta, action)?;
    let n = T::lit(ACTION_DIM as f64);
    let a_bar = mean_rate(action);
    let mut g = vec![-w.alpha_s / n; ACTION_DIM];
    let center = [theta[0], theta[1], theta[2]];
    for i in 0..hand.fingers() {
        let diff = sub(hand.fingertip(i, action), center);
        let d = norm(diff);
        if d > T::zero() {
            for (r, row) in hand.jacobians[i].iter().enumerate() {
                let coef = w.alpha_g * diff[r] / d;
                for (gj, &jj) in g.iter_mut().zip(row) {
                    *gj += coef * jj;
                }
            }
        }
    }
    if let Some(i) = best_friction(theta, hand) {
        let mu = theta[LatentState::<T>::contact_offset(i)].max(T::lit(MU_FLOOR));
        if w.alpha_n * a_bar - mu.recip() > T::zero() {
            for gj in g.iter_mut() {
                *gj -= w.alpha_r * w.alpha_n / n;
            }
        }
    }
    Ok(g)
}

/// Gradient of the grasp cost with respect to the latent vector.
pub fn grasp_cost_grad_theta<T: Real>(
    theta: &[T],
    action: &[T],
    hand: &HandModel<T>,
    w: &CostWeights<T>,
) -> Result<Vec<T>> {
    check_shapes(theta, action)?;
    let mut g = vec![T::zero(); LATENT_DIM];
    let center = [theta[0], theta[1], theta[2]];
    for p in hand.fingertips(action) {
        let diff = sub(p, center);
        let d = norm(diff);
        if d > T::zero() {
            for r in 0..3 {
                g[r] -= w.alpha_g * diff[r] / d;
            }
        }
    }
    let a_bar = mean_rate(action);
    if let Some(i) = best_friction(theta, hand) {
        let o = LatentState::<T>::contact_offset(i);
        let mu = theta[o];
        if mu > T::lit(MU_FLOOR) && w.alpha_n * a_bar - mu.recip() > T::zero() {
            g[o] -= w.alpha_r / (mu * mu);
        }
    }
    let n_c = hand.num_active();
    if n_c > 0 {
        let inv = T::lit(n_c as f64).recip();
        for i in (0..hand.fingers()).filter(|&i| hand.active[i]) {
            let o = LatentState::<T>::contact_offset(i);
            g[o] -= (-theta[o]).exp() * inv;
            g[o + 1] -= (-theta[o + 1]).exp() * inv;
            g[o + 3] += logistic(theta[o + 3]) * inv;
        }
    }
    Ok(g)
}

/// Perception cost `ω_pose tr(Σ) + ω_occ softplus(ô) + ω_seg (1 − ĉ)`.
pub fn visual_cost<T: Real>(obs: &Observation<T>, w: &CostWeights<T>) -> T {
    w.omega_pose * obs.pose_cov_trace() + w.omega_occ * log1p_exp(obs.occlusion()) + w.omega_seg * (T::one() - obs.segmentation())
}
