use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VnbError};
use crate::scalar::Real;

pub const POSE_DIM: usize = 6;
pub const MAX_CONTACTS: usize = 5;
pub const CONTACT_PARAMS: usize = 4;
pub const LATENT_DIM: usize = POSE_DIM + MAX_CONTACTS * CONTACT_PARAMS;

/// Per-contact physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactParams<T> {
    pub mu: T,
    /// Stiffness in N/m.
    pub kappa: T,
    /// Damping in N·s/m.
    pub damping: T,
    /// Slip speed magnitude in mm/s.
    pub slip: T,
}

/// Object pose (position in meters, axis-angle rotation) plus per-contact parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState<T> {
    pub pose: [T; POSE_DIM],
    pub contacts: Vec<ContactParams<T>>,
}

impl<T: Real> LatentState<T> {
    pub fn new(pose: [T; POSE_DIM], contacts: Vec<ContactParams<T>>) -> Result<Self> {
        let s = Self { pose, contacts };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pose.iter().any(|p| !p.is_finite()) {
            return Err(invalid("pose must be finite"));
        }
        if self.contacts.len() > MAX_CONTACTS {
            return Err(invalid(format!("at most {MAX_CONTACTS} contacts, got {}", self.contacts.len())));
        }
        for c in &self.contacts {
            if !(c.mu >= T::zero() && c.kappa >= T::zero() && c.slip >= T::zero()) {
                return Err(invalid("contact friction, stiffness and slip must be non-negative"));
            }
        }
        Ok(())
    }

    /// Object center (pose translation).
    pub fn center(&self) -> [T; 3] {
        [self.pose[0], self.pose[1], self.pose[2]]
    }

    /// Flattens to the fixed-length latent vector; missing contact slots are zero.
    pub fn to_vector(&self) -> Vec<T> {
        let mut v = vec![T::zero(); LATENT_DIM];
        v[..POSE_DIM].copy_from_slice(&self.pose);
        for (i, c) in self.contacts.iter().enumerate() {
            let o = Self::contact_offset(i);
            v[o] = c.mu;
            v[o + 1] = c.kappa;
            v[o + 2] = c.damping;
            v[o + 3] = c.slip;
        }
        v
    }

    /// Reads all contact slots from a latent vector without enforcing sign constraints.
    pub fn from_vector(v: &[T]) -> Result<Self> {
        if v.len() != LATENT_DIM {
            return Err(VnbError::ShapeMismatch { expected: LATENT_DIM, got: v.len() });
        }
        let mut pose = [T::zero(); POSE_DIM];
        pose.copy_from_slice(&v[..POSE_DIM]);
        let contacts = (0..MAX_CONTACTS)
            .map(|i| {
                let o = Self::contact_offset(i);
                ContactParams { mu: v[o], kappa: v[o + 1], damping: v[o + 2], slip: v[o + 3] }
            })
            .collect();
        Ok(Self { pose, contacts })
    }

    /// Index of contact `i`'s friction coefficient in the latent vector.
    pub const fn contact_offset(i: usize) -> usize {
        POSE_DIM + CONTACT_PARAMS * i
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_dimension_is_26() {
        assert_eq!(LATENT_DIM, 26);
        let s = LatentState::<f64>::new([0.0; 6], vec![ContactParams::default(); 2]).unwrap();
        assert_eq!(s.to_vector().len(), 26);
    }

    #[test]
    fn vector_round_trip() {
        let v: Vec<f64> = (0..26).map(|i| i as f64 * 0.5).collect();
        assert_eq!(LatentState::from_vector(&v).unwrap().to_vector(), v);
        assert!(LatentState::<f64>::from_vector(&v[..20]).is_err());
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(LatentState::<f64>::new([0.0; 6], vec![ContactParams::default(); 6]).is_err());
        let bad = ContactParams { mu: -0.1, ..Default::default() };
        assert!(LatentState::<f64>::new([0.0; 6], vec![bad]).is_err());
        assert!(LatentState::<f64>::new([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0], vec![]).is_err());
    }
}
