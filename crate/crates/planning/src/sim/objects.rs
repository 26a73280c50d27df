use serde::{Deserialize, Serialize};

use vnb_core::grasp::{norm, scale, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    /// Axis-aligned box given by its half extents in the object frame.
    Box { half: [f64; 3] },
    /// Cylinder with its axis along the object-frame z axis.
    Cylinder { radius: f64, half_height: f64 },
}

impl Shape {
    /// Signed distance from an object-frame point to the surface (negative inside).
    pub fn sdf(&self, p: Vec3<f64>) -> f64 {
        match *self {
            Shape::Sphere { radius } => norm(p) - radius,
            Shape::Box { half } => {
                let q = [p[0].abs() - half[0], p[1].abs() - half[1], p[2].abs() - half[2]];
                let outside = norm([q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)]);
                outside + q[0].max(q[1]).max(q[2]).min(0.0)
            }
            Shape::Cylinder { radius, half_height } => {
                let dr = (p[0] * p[0] + p[1] * p[1]).sqrt() - radius;
                let dz = p[2].abs() - half_height;
                dr.max(dz).min(0.0) + (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt()
            }
        }
    }

    /// Outward unit surface normal at (or near) `p`, from central differences of the distance.
    pub fn outward_normal(&self, p: Vec3<f64>) -> Vec3<f64> {
        const H: f64 = 1e-6;
        let mut g = [0.0; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut a = p;
            let mut b = p;
            a[i] += H;
            b[i] -= H;
            *gi = (self.sdf(a) - self.sdf(b)) / (2.0 * H);
        }
        let n = norm(g);
        if n > 0.0 {
            scale(g, 1.0 / n)
        } else {
            [1.0, 0.0, 0.0]
        }
    }

    /// Largest distance from the object origin to any surface point.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Box { half } => norm(half),
            Shape::Cylinder { radius, half_height } => (radius * radius + half_height * half_height).sqrt(),
        }
    }
}

/// Parametric stand-in for one benchmark object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub shape: Shape,
    /// Nominal mass in kg; episodes perturb it by up to ±20%.
    pub mass: f64,
    /// Dry-contact friction range and nominal value of the surface material.
    pub mu_range: (f64, f64),
    pub mu_nominal: f64,
    /// Mean and standard deviation of the contact stiffness prior, N/m.
    pub stiffness: (f64, f64),
}

impl ObjectSpec {
    fn new(name: &str, shape: Shape, mass: f64, mu_range: (f64, f64), mu_nominal: f64) -> Self {
        Self { name: name.to_string(), shape, mass, mu_range, mu_nominal, stiffness: (1000.0, 250.0) }
    }
}

/// The seven benchmark objects: spheres, boxes and cylinders at two sizes each plus an elongated box.
pub fn object_catalog() -> Vec<ObjectSpec> {
    vec![
        ObjectSpec::new("sphere_small", Shape::Sphere { radius: 0.03 }, 0.08, (0.30, 0.50), 0.40),
        ObjectSpec::new("sphere_large", Shape::Sphere { radius: 0.04 }, 0.058, (0.50, 0.80), 0.65),
        ObjectSpec::new("box_small", Shape::Box { half: [0.025, 0.025, 0.025] }, 0.10, (0.30, 0.50), 0.40),
        ObjectSpec::new("box_large", Shape::Box { half: [0.03, 0.03, 0.04] }, 0.18, (0.30, 0.50), 0.40),
        ObjectSpec::new("cylinder_small", Shape::Cylinder { radius: 0.03, half_height: 0.05 }, 0.15, (0.20, 0.35), 0.25),
        ObjectSpec::new("cylinder_large", Shape::Cylinder { radius: 0.035, half_height: 0.06 }, 0.20, (0.25, 0.45), 0.35),
        ObjectSpec::new("box_elongated", Shape::Box { half: [0.02, 0.055, 0.025] }, 0.12, (0.30, 0.50), 0.40),
    ]
}

/// Looks up a catalog object by name.
pub fn object_by_name(name: &str) -> Option<ObjectSpec> {
    object_catalog().into_iter().find(|o| o.name == name)
}
