use crate::error::{invalid, Result, VnbError};
use crate::scalar::Real;

/// Taxels per fingertip pad (6 × 12).
pub const TAXELS: usize = 72;
pub const K_THUMB: f64 = 25.5;
pub const K_FINGER: f64 = 204.0;

/// Normal-force proxy `Σ p_uv / k` in newtons from one pad's row-major taxel readings.
pub fn tactile_force<T: Real>(taxels: &[i64], k: T) -> Result<T> {
    if taxels.len() != TAXELS {
        return Err(VnbError::ShapeMismatch { expected: TAXELS, got: taxels.len() });
    }
    if !(k > T::zero()) {
        return Err(invalid("calibration constant must be positive"));
    }
    if let Some(p) = taxels.iter().find(|&&p| !(0..=255).contains(&p)) {
        return Err(invalid(format!("taxel value {p} outside [0, 255]")));
    }
    Ok(T::lit(taxels.iter().sum::<i64>() as f64) / k)
}
