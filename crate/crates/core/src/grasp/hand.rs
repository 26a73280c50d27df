use serde::{Deserialize, Serialize};

use super::latent::MAX_CONTACTS;
use super::Vec3;
use crate::error::{Result, VnbError};
use crate::scalar::Real;

/// Number of actuated joints driven by an action.
pub const ACTION_DIM: usize = 6;

/// Linearized fingertip kinematics `p_i(a) = base_i + J_i a` around the current configuration,
/// plus the set of fingertips currently in contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel<T> {
    pub base: Vec<Vec3<T>>,
    /// Per-fingertip `3 × 6` Jacobian, row-major.
    pub jacobians: Vec<[[T; ACTION_DIM]; 3]>,
    pub active: Vec<bool>,
}

impl<T: Real> HandModel<T> {
    pub fn new(base: Vec<Vec3<T>>, jacobians: Vec<[[T; ACTION_DIM]; 3]>, active: Vec<bool>) -> Result<Self> {
        if jacobians.len() != base.len() {
            return Err(VnbError::ShapeMismatch { expected: base.len(), got: jacobians.len() });
        }
        if active.len() != base.len() {
            return Err(VnbError::ShapeMismatch { expected: base.len(), got: active.len() });
        }
        if base.len() > MAX_CONTACTS {
            return Err(VnbError::ShapeMismatch { expected: MAX_CONTACTS, got: base.len() });
        }
        Ok(Self { base, jacobians, active })
    }

    pub fn fingers(&self) -> usize {
        self.base.len()
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn fingertip(&self, i: usize, action: &[T]) -> Vec3<T> {
        let mut p = self.base[i];
        for (r, row) in self.jacobians[i].iter().enumerate() {
            for (&j, &a) in row.iter().zip(action) {
                p[r] += j * a;
            }
        }
        p
    }

    pub fn fingertips(&self, action: &[T]) -> Vec<Vec3<T>> {
        (0..self.fingers()).map(|i| self.fingertip(i, action)).collect()
    }
}
