use super::hull::convex_hull;
use super::minnorm::min_norm_point;
use super::wrench::{build_wrench_space, Contact, WrenchSpace, DEFAULT_EDGES};
use super::Vec3;
use crate::error::{invalid, Result};
use crate::linalg::rank;
use crate::scalar::Real;

/// Friction coefficient assumed by the tactile quality proxy.
pub const PROXY_MU: f64 = 0.5;

const REL_TOL: f64 = 1e-10;

/// Signed Ferrari–Canny quality: the radius of the largest origin-centered ball inside the
/// convex hull of the wrenches, or minus the origin's distance to the hull when it lies outside.
/// Rank-deficient wrench sets containing the origin score 0.
pub fn ferrari_canny_eps<T: Real>(ws: &WrenchSpace<T>) -> Result<T> {
    if ws.is_empty() {
        return Err(invalid("wrench space is empty"));
    }
    let pts: Vec<Vec<f64>> = ws.wrenches.iter().map(|w| w.iter().map(|x| x.as_f64()).collect()).collect();
    let scale = pts.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(T::zero());
    }
    let (closest, _) = min_norm_point(&pts);
    let dist = closest.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dist > 1e-9 * scale {
        return Ok(T::lit(-dist));
    }
    if rank(&pts, REL_TOL) < 6 {
        return Ok(T::zero());
    }
    let hull = match convex_hull(&pts, REL_TOL) {
        Some(h) => h,
        None => return Ok(T::zero()),
    };
    let eps = hull.facets.iter().map(|f| f.offset).fold(f64::INFINITY, f64::min);
    Ok(T::lit(eps.max(0.0)))
}

/// Quality proxy from inferred fingertip positions: contacts with normals toward `center`,
/// friction 0.5 and unit normal force. Fewer than two contacts score 0.
pub fn tactile_quality_proxy<T: Real>(fingertips: &[Vec3<T>], center: Vec3<T>) -> Result<T> {
    if fingertips.len() < 2 {
        return Ok(T::zero());
    }
    let contacts: Vec<Contact<T>> = fingertips
        .iter()
        .map(|&p| Contact::toward(p, center, T::lit(PROXY_MU), T::one()))
        .collect::<Result<_>>()?;
    ferrari_canny_eps(&build_wrench_space(&contacts, center, DEFAULT_EDGES)?)
}
