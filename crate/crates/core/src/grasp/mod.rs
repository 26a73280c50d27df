//! Grasp model: latent contact state, the grasp and perception costs, contact frames,
//! grasp wrench spaces and the Ferrari–Canny quality metric.

mod cost;
mod hand;
mod hull;
mod latent;
mod minnorm;
mod quality;
mod resist;
mod tactile;
mod wrench;

pub use cost::{grasp_cost, grasp_cost_grad, grasp_cost_grad_theta, grasp_cost_vec, visual_cost, CostWeights};
pub use hand::{HandModel, ACTION_DIM};
pub use hull::{convex_hull, Facet, Hull};
pub use latent::{ContactParams, LatentState, CONTACT_PARAMS, LATENT_DIM, MAX_CONTACTS, POSE_DIM};
pub use minnorm::min_norm_point;
pub use quality::{ferrari_canny_eps, tactile_quality_proxy, PROXY_MU};
pub use resist::{force_closure_certificate, resists_wrench};
pub use tactile::{tactile_force, K_FINGER, K_THUMB, TAXELS};
pub use wrench::{build_wrench_space, contact_frame, Contact, ContactFrame, WrenchSpace, DEFAULT_EDGES};

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

/// Rotates `v` by the axis-angle vector `r` (Rodrigues' formula).
pub fn rotate<T: Real>(r: Vec3<T>, v: Vec3<T>) -> Vec3<T> {
    let angle = norm(r);
    if angle < T::lit(1e-15) {
        return v;
    }
    let k = scale(r, T::one() / angle);
    let (s, c) = angle.sin_cos();
    add(add(scale(v, c), scale(cross(k, v), s)), scale(k, dot(k, v) * (T::one() - c)))
}
