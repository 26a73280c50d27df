use serde::{Deserialize, Serialize};

use vnb_core::grasp::{build_wrench_space, ferrari_canny_eps, resists_wrench, DEFAULT_EDGES};
use vnb_core::{Contact, WrenchSpace};

use super::env::GraspState;

pub const GRAVITY: f64 = 9.81;
/// Per-fingertip normal-force limit, N.
pub const FORCE_CAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Lateral force impulse on the object, N.
    Lateral { force: f64, direction: [f64; 3], duration: f64 },
    /// Torque impulse about a body axis, N·m.
    Torque { torque: f64, axis: [f64; 3], duration: f64 },
    /// Contact friction dropped to `mu` while holding the object.
    FrictionDrop { mu: f64 },
}

impl Perturbation {
    pub fn label(&self) -> String {
        let axis = |v: &[f64; 3]| {
            let names = ["x", "y", "z"];
            let i = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
            format!("{}{}", if v[i] < 0.0 { "-" } else { "+" }, names[i])
        };
        match self {
            Perturbation::Lateral { force, direction, .. } => format!("lateral_{force}N_{}", axis(direction)),
            Perturbation::Torque { torque, axis: a, .. } => format!("torque_{torque}Nm_{}", axis(a)),
            Perturbation::FrictionDrop { mu } => format!("friction_drop_{mu}"),
        }
    }
}

/// Lift, shear and robustness perturbation protocol with its judging thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSuite {
    pub lift_height: f64,
    pub lift_duration: f64,
    pub shear_pulses: Vec<f64>,
    pub shear_direction: [f64; 3],
    pub lateral_forces: Vec<f64>,
    pub lateral_directions: Vec<[f64; 3]>,
    pub lateral_duration: f64,
    pub torques: Vec<f64>,
    pub torque_axes: Vec<[f64; 3]>,
    pub torque_duration: f64,
    pub friction_drops: Vec<f64>,
    pub nominal_tolerance: f64,
    pub displacement_threshold: f64,
    pub drop_threshold: f64,
    pub rotation_threshold: f64,
    pub force_cap: f64,
}

impl Default for PerturbationSuite {
    fn default() -> Self {
        Self {
            lift_height: 0.05,
            lift_duration: 1.0,
            shear_pulses: vec![3.0, 5.0, 8.0, 12.0],
            shear_direction: [0.0, 1.0, 0.0],
            lateral_forces: vec![3.0, 5.0, 8.0, 12.0],
            lateral_directions: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]],
            lateral_duration: 0.15,
            torques: vec![0.3, 0.6, 1.0],
            torque_axes: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            torque_duration: 0.2,
            friction_drops: vec![0.05, 0.10, 0.15],
            nominal_tolerance: 0.01,
            displacement_threshold: 0.04,
            drop_threshold: 0.015,
            rotation_threshold: 0.3,
            force_cap: FORCE_CAP,
        }
    }
}

impl PerturbationSuite {
    /// Robustness perturbations in order: lateral (magnitude-major), torque, friction drop.
    pub fn perturbations(&self) -> Vec<Perturbation> {
        let mut out = Vec::new();
        for &force in &self.lateral_forces {
            for &direction in &self.lateral_directions {
                out.push(Perturbation::Lateral { force, direction, duration: self.lateral_duration });
            }
        }
        for &torque in &self.torques {
            for &axis in &self.torque_axes {
                out.push(Perturbation::Torque { torque, axis, duration: self.torque_duration });
            }
        }
        for &mu in &self.friction_drops {
            out.push(Perturbation::FrictionDrop { mu });
        }
        out
    }

    /// Peak vertical acceleration of a smooth lift of the configured height and duration.
    pub fn lift_acceleration(&self) -> f64 {
        4.0 * self.lift_height / (self.lift_duration * self.lift_duration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub label: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub eps: f64,
    pub lift_ok: bool,
    pub shear_ok: Vec<bool>,
    pub nominal_success: bool,
    pub outcomes: Vec<PerturbationOutcome>,
    pub survival: f64,
}

impl StressReport {
    pub fn survived(&self) -> usize {
        self.outcomes.iter().filter(|o| o.passed).count()
    }
}

struct Judge {
    ws: Option<WrenchSpace>,
    closed: bool,
    caps: Vec<f64>,
}

impl Judge {
    fn new(contacts: &[Contact], grasp: &GraspState, mu: f64, cap: f64) -> Self {
        let contacts: Vec<Contact> = contacts
            .iter()
            .filter_map(|c| Contact::with_normal(c.position, c.normal, mu, 1.0).ok())
            .collect();
        let ws = (!contacts.is_empty()).then(|| build_wrench_space(&contacts, grasp.center, DEFAULT_EDGES).ok()).flatten();
        let closed = ws.as_ref().and_then(|w| ferrari_canny_eps(w).ok()).is_some_and(|e| e > 0.0);
        Self { ws, closed, caps: vec![cap; contacts.len()] }
    }

    /// Whether the contacts can apply the wrench cancelling `external` on the object.
    fn holds(&self, external: [f64; 6]) -> bool {
        let Some(ws) = &self.ws else { return false };
        if !self.closed {
            return false;
        }
        let target = external.map(|v| -v);
        resists_wrench(ws, DEFAULT_EDGES, Some(&self.caps), &target)
    }
}

/// Quasi-static stress test: a load passes when the grasp is force-closed at the current
/// friction and the contacts can cancel the load with at most `force_cap` newtons each.
pub fn stress_test(grasp: &GraspState, suite: &PerturbationSuite) -> StressReport {
    let judge = Judge::new(&grasp.contacts, grasp, grasp.mu, suite.force_cap);
    let eps = judge.ws.as_ref().and_then(|w| ferrari_canny_eps(w).ok()).unwrap_or(0.0);
    let weight = grasp.mass * GRAVITY;
    let gravity = [0.0, 0.0, -weight, 0.0, 0.0, 0.0];
    let lifted = [0.0, 0.0, -grasp.mass * (GRAVITY + suite.lift_acceleration()), 0.0, 0.0, 0.0];
    let lift_ok = judge.holds(lifted);
    let shear_ok: Vec<bool> = suite
        .shear_pulses
        .iter()
        .map(|&f| {
            let d = suite.shear_direction;
            judge.holds([f * d[0], f * d[1], f * d[2] - weight, 0.0, 0.0, 0.0])
        })
        .collect();
    let nominal_success = lift_ok && shear_ok.iter().all(|&ok| ok);

    let mut outcomes = Vec::new();
    for p in suite.perturbations() {
        let passed = match p {
            Perturbation::Lateral { force, direction, .. } => {
                judge.holds([force * direction[0], force * direction[1], force * direction[2] - weight, 0.0, 0.0, 0.0])
            }
            Perturbation::Torque { torque, axis, .. } => {
                judge.holds([0.0, 0.0, -weight, torque * axis[0], torque * axis[1], torque * axis[2]])
            }
            Perturbation::FrictionDrop { mu } => Judge::new(&grasp.contacts, grasp, mu, suite.force_cap).holds(gravity),
        };
        outcomes.push(PerturbationOutcome { label: p.label(), passed });
    }
    let survival = if outcomes.is_empty() { 0.0 } else { outcomes.iter().filter(|o| o.passed).count() as f64 / outcomes.len() as f64 };
    StressReport { eps, lift_ok, shear_ok, nominal_success, outcomes, survival }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tripod(mu: f64, mass: f64) -> GraspState {
        let r = 0.03;
        let contacts = (0..3)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
                let z = 0.004 * (i as f64 - 1.0);
                Contact::toward([r * a.cos(), r * a.sin(), z], [0.0; 3], mu, 1.0).unwrap()
            })
            .collect();
        GraspState { contacts, center: [0.0; 3], mass, mu }
    }

    #[test]
    fn suite_has_twenty_eight_tests() {
        let s = PerturbationSuite::default();
        let p = s.perturbations();
        assert_eq!(p.len(), 28);
        assert_eq!(p.iter().filter(|x| matches!(x, Perturbation::Lateral { .. })).count(), 16);
        assert_eq!(p.iter().filter(|x| matches!(x, Perturbation::Torque { .. })).count(), 9);
        assert_eq!(p.iter().filter(|x| matches!(x, Perturbation::FrictionDrop { .. })).count(), 3);
    }

    #[test]
    fn single_contact_fails_lift() {
        let c = Contact::toward([0.03, 0.0, 0.0], [0.0; 3], 1.0, 1.0).unwrap();
        let g = GraspState { contacts: vec![c], center: [0.0; 3], mass: 0.1, mu: 1.0 };
        let r = stress_test(&g, &PerturbationSuite::default());
        assert!(!r.lift_ok && !r.nominal_success);
        assert_eq!(r.survival, 0.0);
    }

    #[test]
    fn labels_are_unique() {
        let labels: std::collections::BTreeSet<String> = PerturbationSuite::default().perturbations().iter().map(|p| p.label()).collect();
        assert_eq!(labels.len(), 28);
    }

    #[test]
    fn light_tripod_passes_lift() {
        let r = stress_test(&tripod(1.0, 0.05), &PerturbationSuite::default());
        assert!(r.eps > 0.0);
        assert!(r.lift_ok);
    }
}
