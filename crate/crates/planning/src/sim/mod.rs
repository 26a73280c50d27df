//! Quasi-static grasp environment: parametric objects, friction regimes, fingertip
//! kinematics with penalty contacts, synthetic observations, and the stress protocol.

mod env;
mod objects;
mod regime;
mod stress;

pub use env::*;
pub use objects::{object_by_name, object_catalog, ObjectSpec, Shape};
pub use regime::{effective_friction, FrictionRegime, FINGER_FRICTION};
pub use stress::{stress_test, Perturbation, PerturbationOutcome, PerturbationSuite, StressReport, FORCE_CAP, GRAVITY};
