use serde::{Deserialize, Serialize};

use super::{add, cross, dot, norm, scale, sub, Vec3};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Friction-cone edges per contact used unless stated otherwise.
pub const DEFAULT_EDGES: usize = 8;

/// Right-handed contact frame `(n̂, t̂₁, t̂₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactFrame<T> {
    pub normal: Vec3<T>,
    pub t1: Vec3<T>,
    pub t2: Vec3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact<T> {
    pub position: Vec3<T>,
    pub normal: Vec3<T>,
    pub mu: T,
    pub normal_force: T,
    pub frame: ContactFrame<T>,
}

impl<T: Real> Contact<T> {
    /// Contact at `position` with its normal pointing to `center` and the default reference axis.
    pub fn toward(position: Vec3<T>, center: Vec3<T>, mu: T, normal_force: T) -> Result<Self> {
        let frame = contact_frame(position, center, [T::zero(), T::zero(), T::one()])?;
        Ok(Self { position, normal: frame.normal, mu, normal_force, frame })
    }

    /// Contact with an explicit inward normal.
    pub fn with_normal(position: Vec3<T>, normal: Vec3<T>, mu: T, normal_force: T) -> Result<Self> {
        let frame = frame_from_normal(normal, [T::zero(), T::zero(), T::one()])?;
        Ok(Self { position, normal: frame.normal, mu, normal_force, frame })
    }
}

fn normalize<T: Real>(v: Vec3<T>) -> Option<Vec3<T>> {
    let n = norm(v);
    (n > T::zero() && n.is_finite()).then(|| scale(v, n.recip()))
}

fn frame_from_normal<T: Real>(normal: Vec3<T>, reference: Vec3<T>) -> Result<ContactFrame<T>> {
    let n = normalize(normal).ok_or_else(|| invalid("contact normal has zero length"))?;
    let e = normalize(reference).ok_or_else(|| invalid("reference axis has zero length"))?;
    let e = if dot(n, e).abs() > T::one() - T::lit(1e-6) {
        let z = [T::zero(), T::zero(), T::one()];
        if dot(n, z).abs() > T::one() - T::lit(1e-6) {
            [T::one(), T::zero(), T::zero()]
        } else {
            z
        }
    } else {
        e
    };
    let t1 = normalize(cross(n, e)).ok_or_else(|| invalid("degenerate tangent"))?;
    let t2 = cross(n, t1);
    Ok(ContactFrame { normal: n, t1, t2 })
}

/// Contact frame at `fingertip` with the normal toward `center`; falls back to another
/// reference axis when `reference` is parallel to the normal.
pub fn contact_frame<T: Real>(fingertip: Vec3<T>, center: Vec3<T>, reference: Vec3<T>) -> Result<ContactFrame<T>> {
    let d = sub(center, fingertip);
    if norm(d) == T::zero() {
        return Err(invalid("fingertip coincides with the object center"));
    }
    frame_from_normal(d, reference)
}

/// Primitive wrenches `[f; (p − c) × f]` of all linearized friction-cone edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchSpace<T> {
    pub wrenches: Vec<[T; 6]>,
    pub cone_edges: Vec<Vec<Vec3<T>>>,
}

impl<T: Real> WrenchSpace<T> {
    pub fn is_empty(&self) -> bool {
        self.wrenches.is_empty()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            wrenches: self.wrenches.iter().map(|w| w.map(|x| x * s)).collect(),
            cone_edges: self.cone_edges.iter().map(|c| c.iter().map(|&f| scale(f, s)).collect()).collect(),
        }
    }
}

/// Builds the grasp wrench space. Each cone edge has normal component `f̂` and tangential
/// component `μ f̂` along `cos φ t̂₁ + sin φ t̂₂`; torques are taken about `center`.
pub fn build_wrench_space<T: Real>(contacts: &[Contact<T>], center: Vec3<T>, edges: usize) -> Result<WrenchSpace<T>> {
    if edges < 3 {
        return Err(invalid("friction cones need at least 3 edges"));
    }
    let mut wrenches = Vec::with_capacity(contacts.len() * edges);
    let mut cone_edges = Vec::with_capacity(contacts.len());
    for c in contacts {
        let fr = &c.frame;
        let lever = sub(c.position, center);
        let mut cone = Vec::with_capacity(edges);
        for e in 0..edges {
            let phi = T::lit(2.0 * std::f64::consts::PI * e as f64 / edges as f64);
            let (s, co) = phi.sin_cos();
            let tangent = add(scale(fr.t1, co), scale(fr.t2, s));
            let f = scale(add(fr.normal, scale(tangent, c.mu)), c.normal_force);
            let tau = cross(lever, f);
            wrenches.push([f[0], f[1], f[2], tau[0], tau[1], tau[2]]);
            cone.push(f);
        }
        cone_edges.push(cone);
    }
    Ok(WrenchSpace { wrenches, cone_edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_orthonormal(f: &ContactFrame<f64>) -> bool {
        let ok = |x: f64, y: f64| (x - y).abs() < 1e-12;
        ok(norm(f.normal), 1.0)
            && ok(norm(f.t1), 1.0)
            && ok(norm(f.t2), 1.0)
            && ok(dot(f.normal, f.t1), 0.0)
            && ok(dot(f.normal, f.t2), 0.0)
            && ok(dot(f.t1, f.t2), 0.0)
            && cross(f.normal, f.t1).iter().zip(&f.t2).all(|(a, b)| ok(*a, *b))
    }

    #[test]
    fn frame_on_x_axis() {
        let f = contact_frame([1.0_f64, 0.0, 0.0], [0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.normal, [-1.0, 0.0, 0.0]);
        assert!((f.t1[1] - 1.0).abs() < 1e-12);
        assert!(is_orthonormal(&f));
    }

    #[test]
    fn frame_falls_back_when_parallel() {
        let f = contact_frame([0.0, 0.0, 2.0], [0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        assert!(is_orthonormal(&f));
        assert!(contact_frame([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn frictionless_cone_collapses() {
        let c = Contact::toward([1.0, 0.0, 0.0], [0.0; 3], 0.0, 1.0).unwrap();
        let ws = build_wrench_space(&[c], [0.0; 3], 8).unwrap();
        assert!(ws.wrenches.iter().all(|w| *w == ws.wrenches[0]));
        assert_eq!(ws.wrenches[0], [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn antipodal_pair_is_symmetric() {
        let a = Contact::toward([1.0, 0.0, 0.0], [0.0; 3], 0.5, 1.0).unwrap();
        let b = Contact::toward([-1.0, 0.0, 0.0], [0.0; 3], 0.5, 1.0).unwrap();
        let ws = build_wrench_space(&[a, b], [0.0; 3], 8).unwrap();
        assert_eq!(ws.wrenches.len(), 16);
        let mirror = |w: &[f64; 6]| [-w[0], w[1], w[2], w[3], -w[4], -w[5]];
        for w in &ws.wrenches {
            let m = mirror(w);
            assert!(ws.wrenches.iter().any(|v| v.iter().zip(&m).all(|(x, y)| (x - y).abs() < 1e-12)));
        }
    }

    #[test]
    fn torque_is_orthogonal_to_lever() {
        let c = Contact::toward([0.3, -0.2, 0.5], [0.1, 0.0, 0.0], 0.8, 2.0).unwrap();
        let ws = build_wrench_space(&[c], [0.1, 0.0, 0.0], 8).unwrap();
        let lever: [f64; 3] = [0.2, -0.2, 0.5];
        for w in &ws.wrenches {
            assert!(dot([w[3], w[4], w[5]], lever).abs() < 1e-12);
        }
    }
}
