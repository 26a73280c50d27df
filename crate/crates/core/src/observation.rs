//! Fixed 41-value observation vector.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VnbError};
use crate::scalar::Real;

pub const OBS_DIM: usize = 41;
pub const POSE: std::ops::Range<usize> = 0..6;
pub const POSE_COV_TRACE: usize = 6;
pub const TACTILE: std::ops::Range<usize> = 7..12;
pub const CONTACTS: std::ops::Range<usize> = 12..17;
pub const JOINT_POS: std::ops::Range<usize> = 17..28;
pub const JOINT_VEL: std::ops::Range<usize> = 28..39;
pub const OCCLUSION: usize = 39;
pub const SEGMENTATION: usize = 40;

/// Estimated pose, pose covariance trace, tactile forces (N), binary contacts,
/// joint positions (rad) and velocities (rad/s), and occlusion/segmentation scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation<T> {
    data: Vec<T>,
}

impl<T: Real> Observation<T> {
    pub fn zeros() -> Self {
        Self { data: vec![T::zero(); OBS_DIM] }
    }

    pub fn from_vec(data: Vec<T>) -> Result<Self> {
        if data.len() != OBS_DIM {
            return Err(VnbError::ShapeMismatch { expected: OBS_DIM, got: data.len() });
        }
        let obs = Self { data };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observation contains non-finite values"));
        }
        if self.contacts().iter().any(|&c| c != T::zero() && c != T::one()) {
            return Err(invalid("contact indicators must be 0 or 1"));
        }
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.occlusion()) || !unit(self.segmentation()) {
            return Err(invalid("visual scores must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn pose(&self) -> &[T] {
        &self.data[POSE]
    }

    pub fn pose_cov_trace(&self) -> T {
        self.data[POSE_COV_TRACE]
    }

    pub fn tactile(&self) -> &[T] {
        &self.data[TACTILE]
    }

    pub fn contacts(&self) -> &[T] {
        &self.data[CONTACTS]
    }

    pub fn joint_positions(&self) -> &[T] {
        &self.data[JOINT_POS]
    }

    pub fn joint_velocities(&self) -> &[T] {
        &self.data[JOINT_VEL]
    }

    pub fn occlusion(&self) -> T {
        self.data[OCCLUSION]
    }

    pub fn segmentation(&self) -> T {
        self.data[SEGMENTATION]
    }

    pub fn set_visual(&mut self, occlusion: T, segmentation: T) {
        self.data[OCCLUSION] = occlusion;
        self.data[SEGMENTATION] = segmentation;
    }

    pub fn active_contacts(&self) -> Vec<bool> {
        self.contacts().iter().map(|&c| c > T::lit(0.5)).collect()
    }
}
