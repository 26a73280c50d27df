use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use vnb_core::grasp::{
    add, build_wrench_space, dot, ferrari_canny_eps, norm, rotate, scale, sub, Vec3, ACTION_DIM, DEFAULT_EDGES,
    LATENT_DIM, MAX_CONTACTS,
};
use vnb_core::observation::{CONTACTS, JOINT_POS, JOINT_VEL, OBS_DIM, OCCLUSION, POSE, POSE_COV_TRACE, SEGMENTATION, TACTILE};
use vnb_core::{Contact, ContactParams, HandModel, LatentState, Observation};

use super::objects::{ObjectSpec, Shape};
use super::regime::{effective_friction, FrictionRegime, FINGER_FRICTION};
use crate::error::{PlanningError, Result};

/// Control period of one planning step, s.
pub const DT: f64 = 0.05;
/// Fingertip travel per radian of joint motion, m/rad.
pub const TRAVEL_GAIN: f64 = 0.5;
/// Upper bound on commanded joint rates, rad/s.
pub const MAX_RATE: f64 = 0.25;
pub const START_RADIUS: f64 = 0.10;
pub const MAX_TRAVEL: f64 = 0.095;
pub const CONTACT_TOL: f64 = 1e-3;
pub const RELEASE_TOL: f64 = 2e-3;
/// Normal force at which a pressing finger stalls, N.
pub const STALL_FORCE: f64 = 4.0;
pub const SUBSTEPS: usize = 6;
/// Slip speed at contact formation is `SLIP_GAIN · max(0, 1 − μ_eff / SLIP_REF_MU)` plus noise, mm/s.
pub const SLIP_GAIN: f64 = 15.0;
pub const SLIP_REF_MU: f64 = 0.6;
pub const SLIP_HALF_LIFE: f64 = 0.5;
/// Distal joint velocity induced per mm/s of contact slip, rad/s.
pub const SLIP_VELOCITY_GAIN: f64 = 0.002;
pub const SIGMA_BASE: f64 = 0.005;
pub const OCCLUSION_RADIUS: f64 = 0.05;
pub const TRACE_CAP: f64 = 0.01;
pub const CAMERA: Vec3<f64> = [0.0, -0.45, 0.25];
const DISTAL_COUPLING: f64 = 0.8;

/// Joint-to-finger coupling: the thumb follows the mean of joints 0 and 1, each other finger one joint.
pub const COUPLING: [[f64; ACTION_DIM]; MAX_CONTACTS] = [
    [0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
];

/// Start point and unit approach direction of each fingertip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerRay {
    pub start: Vec3<f64>,
    pub dir: Vec3<f64>,
}

pub fn finger_rays() -> [FingerRay; MAX_CONTACTS] {
    let spec = [(180.0_f64, 0.0), (-60.0, 0.012), (-20.0, 0.004), (20.0, -0.004), (60.0, -0.012)];
    spec.map(|(deg, z): (f64, f64)| {
        let (s, c) = deg.to_radians().sin_cos();
        FingerRay { start: [START_RADIUS * c, START_RADIUS * s, z], dir: [-c, -s, 0.0] }
    })
}

/// Fingertip travel along its ray for the given actuated joint positions.
pub fn finger_travel(finger: usize, joints: &[f64]) -> f64 {
    TRAVEL_GAIN * COUPLING[finger].iter().zip(joints).map(|(c, q)| c * q).sum::<f64>()
}

pub fn fingertip_position(rays: &[FingerRay; MAX_CONTACTS], finger: usize, travel: f64) -> Vec3<f64> {
    add(rays[finger].start, scale(rays[finger].dir, travel))
}

/// Signed distance from a world point to an object at `pose`, with the outward world normal.
pub fn surface_query(shape: &Shape, pose: &[f64], p: Vec3<f64>) -> (f64, Vec3<f64>) {
    let c = [pose[0], pose[1], pose[2]];
    let r = [pose[3], pose[4], pose[5]];
    let local = rotate([-r[0], -r[1], -r[2]], sub(p, c));
    (shape.sdf(local), rotate(r, shape.outward_normal(local)))
}

/// Linearized fingertip kinematics the planner uses, built from observed joint positions.
pub fn hand_model_from_obs(obs: &Observation) -> Result<HandModel> {
    let rays = finger_rays();
    let jp = obs.joint_positions();
    let joints = [jp[0], jp[1], jp[3], jp[5], jp[7], jp[9]];
    let active = obs.active_contacts();
    let mut base = Vec::with_capacity(MAX_CONTACTS);
    let mut jac = Vec::with_capacity(MAX_CONTACTS);
    for i in 0..MAX_CONTACTS {
        base.push(fingertip_position(&rays, i, finger_travel(i, &joints)));
        let mut j = [[0.0; ACTION_DIM]; 3];
        for (r, row) in j.iter_mut().enumerate() {
            for (a, v) in row.iter_mut().enumerate() {
                *v = rays[i].dir[r] * TRAVEL_GAIN * COUPLING[i][a] * DT;
            }
        }
        jac.push(j);
    }
    Ok(HandModel::new(base, jac, active)?)
}

/// Clamps an action to the admissible joint-rate box.
pub fn clamp_action(a: &mut [f64]) {
    for v in a.iter_mut() {
        *v = if v.is_finite() { v.clamp(0.0, MAX_RATE) } else { 0.0 };
    }
}

/// Noise and randomization settings for an environment instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvOptions {
    pub mu_f: f64,
    /// Maximum object position offset from the nominal center in x and y, m.
    pub position_jitter: f64,
    /// Maximum object yaw offset, rad.
    pub yaw_jitter: f64,
    pub mass_jitter: f64,
    /// Scales every observation noise source; 0 gives exact observations.
    pub noise_scale: f64,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self { mu_f: FINGER_FRICTION, position_jitter: 0.008, yaw_jitter: 0.2, mass_jitter: 0.2, noise_scale: 1.0 }
    }
}

impl EnvOptions {
    /// Deterministic setting: centered object, nominal mass, exact observations.
    pub fn noiseless() -> Self {
        Self { position_jitter: 0.0, yaw_jitter: 0.0, mass_jitter: 0.0, noise_scale: 0.0, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub in_contact: bool,
    pub penetration: f64,
    /// Slip speed at contact formation, mm/s.
    pub slip0: f64,
    pub contact_time: f64,
}

/// Contact geometry and load of an established grasp, as consumed by the stress test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspState {
    pub contacts: Vec<Contact>,
    pub center: Vec3<f64>,
    pub mass: f64,
    pub mu: f64,
}

/// Quasi-static five-finger grasp environment around one object.
#[derive(Debug, Clone)]
pub struct GraspEnv {
    pub object: ObjectSpec,
    pub regime: FrictionRegime,
    pub options: EnvOptions,
    pub mu_o: f64,
    pub mu_eff: f64,
    pub mass: f64,
    pub pose: [f64; 6],
    pub joints: [f64; ACTION_DIM],
    pub joint_rates: [f64; ACTION_DIM],
    pub fingers: [FingerState; MAX_CONTACTS],
    pub stiffness: [f64; MAX_CONTACTS],
    pub damping: [f64; MAX_CONTACTS],
    pub time: f64,
    pub steps: usize,
    rays: [FingerRay; MAX_CONTACTS],
    rng: ChaCha8Rng,
}

impl GraspEnv {
    pub fn new(object: ObjectSpec, regime: FrictionRegime, options: EnvOptions, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu_o = regime.sample_mu_o(&mut rng);
        Self::with_friction(object, regime, options, mu_o, &mut rng)
    }

    /// Builds an environment with a fixed object friction coefficient.
    pub fn with_friction(object: ObjectSpec, regime: FrictionRegime, options: EnvOptions, mu_o: f64, seed_rng: &mut ChaCha8Rng) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_rng.gen());
        let jitter = |rng: &mut ChaCha8Rng, m: f64| if m > 0.0 { rng.gen_range(-m..m) } else { 0.0 };
        let mass = object.mass * (1.0 + jitter(&mut rng, options.mass_jitter));
        let pose = [
            jitter(&mut rng, options.position_jitter),
            jitter(&mut rng, options.position_jitter),
            0.0,
            0.0,
            0.0,
            jitter(&mut rng, options.yaw_jitter),
        ];
        let (k_mean, k_std) = object.stiffness;
        let k_dist = Normal::new(k_mean, k_std).expect("valid stiffness prior");
        let stiffness = [(); MAX_CONTACTS].map(|_| k_dist.sample(&mut rng).max(0.2 * k_mean));
        let damping = [(); MAX_CONTACTS].map(|_| rng.gen_range(0.5..2.0));
        Self {
            mu_eff: effective_friction(options.mu_f, mu_o),
            object,
            regime,
            options,
            mu_o,
            mass,
            pose,
            joints: [0.0; ACTION_DIM],
            joint_rates: [0.0; ACTION_DIM],
            fingers: [FingerState { in_contact: false, penetration: 0.0, slip0: 0.0, contact_time: 0.0 }; MAX_CONTACTS],
            stiffness,
            damping,
            time: 0.0,
            steps: 0,
            rays: finger_rays(),
            rng,
        }
    }

    pub fn rays(&self) -> &[FingerRay; MAX_CONTACTS] {
        &self.rays
    }

    pub fn center(&self) -> Vec3<f64> {
        [self.pose[0], self.pose[1], self.pose[2]]
    }

    pub fn fingertip(&self, i: usize) -> Vec3<f64> {
        fingertip_position(&self.rays, i, finger_travel(i, &self.joints))
    }

    pub fn num_contacts(&self) -> usize {
        self.fingers.iter().filter(|f| f.in_contact).count()
    }

    /// Current slip speed of finger `i`, mm/s (0 when not in contact).
    pub fn slip(&self, i: usize) -> f64 {
        let f = &self.fingers[i];
        if !f.in_contact {
            return 0.0;
        }
        f.slip0 * 0.5f64.powf((self.time - f.contact_time) / SLIP_HALF_LIFE)
    }

    /// Ground-truth latent vector: object pose followed by `(μ, κ, d, s)` for every finger slot.
    pub fn true_latent(&self) -> Vec<f64> {
        let contacts = (0..MAX_CONTACTS)
            .map(|i| ContactParams { mu: self.mu_eff, kappa: self.stiffness[i], damping: self.damping[i], slip: self.slip(i) })
            .collect();
        let v = LatentState { pose: self.pose, contacts }.to_vector();
        debug_assert_eq!(v.len(), LATENT_DIM);
        v
    }

    /// Applies joint rates for one control period and returns the resulting observation.
    pub fn step(&mut self, action: &[f64]) -> Result<Observation> {
        if action.len() != ACTION_DIM {
            return Err(PlanningError::SimulationFault(format!("action has {} entries, expected {ACTION_DIM}", action.len())));
        }
        let mut rates = [0.0; ACTION_DIM];
        rates.copy_from_slice(action);
        clamp_action(&mut rates);
        let before = self.joints;
        let h = DT / SUBSTEPS as f64;
        for sub in 0..SUBSTEPS {
            let t = self.time + h * (sub + 1) as f64;
            for i in 0..MAX_CONTACTS {
                let mut q = self.joints;
                for (j, qj) in q.iter_mut().enumerate() {
                    if COUPLING[i][j] > 0.0 {
                        *qj = (*qj + rates[j] * h).min(MAX_TRAVEL / TRAVEL_GAIN);
                    }
                }
                let p = fingertip_position(&self.rays, i, finger_travel(i, &q));
                let (sd, _) = surface_query(&self.object.shape, &self.pose, p);
                if (-sd).max(0.0) * self.stiffness[i] > STALL_FORCE {
                    continue;
                }
                for j in 0..ACTION_DIM {
                    if COUPLING[i][j] > 0.0 {
                        self.joints[j] = q[j];
                    }
                }
                self.update_contact(i, sd, t);
            }
        }
        self.time += DT;
        self.steps += 1;
        for j in 0..ACTION_DIM {
            self.joint_rates[j] = (self.joints[j] - before[j]) / DT;
        }
        if self.joints.iter().chain(self.pose.iter()).any(|v| !v.is_finite()) {
            return Err(PlanningError::SimulationFault(format!("non-finite state at step {}", self.steps)));
        }
        Ok(self.observe())
    }

    fn update_contact(&mut self, i: usize, sd: f64, t: f64) {
        let f = &mut self.fingers[i];
        f.penetration = (-sd).max(0.0);
        if !f.in_contact && sd <= CONTACT_TOL {
            let base = SLIP_GAIN * (1.0 - self.mu_eff / SLIP_REF_MU).max(0.0);
            let noise: f64 = self.rng.sample(StandardNormal);
            f.in_contact = true;
            f.slip0 = base + (0.5 * noise).abs();
            f.contact_time = t;
        } else if f.in_contact && sd > RELEASE_TOL {
            f.in_contact = false;
            f.slip0 = 0.0;
        }
    }

    /// Fraction of fingertips lying between the virtual camera and the object center.
    pub fn occlusion(&self) -> f64 {
        let c = self.center();
        let seg = sub(c, CAMERA);
        let len2 = dot(seg, seg);
        let count = (0..MAX_CONTACTS)
            .filter(|&i| {
                let p = self.fingertip(i);
                let t = dot(sub(p, CAMERA), seg) / len2;
                t > 0.0 && t < 1.0 && norm(sub(p, add(CAMERA, scale(seg, t)))) < OCCLUSION_RADIUS
            })
            .count();
        count as f64 / MAX_CONTACTS as f64
    }

    /// Samples an observation of the current state.
    pub fn observe(&mut self) -> Observation {
        let ns = self.options.noise_scale;
        let occ = self.occlusion();
        let sigma_pos = SIGMA_BASE * (1.0 + occ);
        let sigma_rot = 4.0 * sigma_pos;
        let trace = 3.0 * sigma_pos * sigma_pos + 3.0 * sigma_rot * sigma_rot;
        let mut o = vec![0.0; OBS_DIM];
        for (k, idx) in POSE.enumerate() {
            let s = if k < 3 { sigma_pos } else { sigma_rot };
            o[idx] = self.pose[k] + ns * s * self.gauss();
        }
        o[POSE_COV_TRACE] = trace;
        for i in 0..MAX_CONTACTS {
            let f = self.fingers[i];
            if f.in_contact {
                o[TACTILE.start + i] = (self.stiffness[i] * f.penetration + ns * 0.05 * self.gauss()).max(0.0);
                o[CONTACTS.start + i] = 1.0;
            }
        }
        let q = self.joints;
        let qd = self.joint_rates;
        let proximal = [(q[0], qd[0]), (q[1], qd[1])];
        let mut jp = vec![proximal[0].0, proximal[1].0, DISTAL_COUPLING * 0.5 * (q[0] + q[1])];
        let mut jv = vec![proximal[0].1, proximal[1].1, DISTAL_COUPLING * 0.5 * (qd[0] + qd[1]) + SLIP_VELOCITY_GAIN * self.slip(0)];
        for i in 1..MAX_CONTACTS {
            jp.push(q[i + 1]);
            jp.push(DISTAL_COUPLING * q[i + 1]);
            jv.push(qd[i + 1]);
            jv.push(DISTAL_COUPLING * qd[i + 1] + SLIP_VELOCITY_GAIN * self.slip(i));
        }
        for (k, idx) in JOINT_POS.enumerate() {
            o[idx] = jp[k] + ns * 0.002 * self.gauss();
        }
        for (k, idx) in JOINT_VEL.enumerate() {
            o[idx] = jv[k] + ns * 0.01 * self.gauss();
        }
        o[OCCLUSION] = occ;
        o[SEGMENTATION] = 1.0 - (trace / TRACE_CAP).clamp(0.0, 1.0);
        Observation::from_vec(o).expect("observation layout")
    }

    fn gauss(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Contacts currently established, located on the surface with inward normals.
    pub fn contacts(&self, mu: f64) -> Vec<Contact> {
        (0..MAX_CONTACTS)
            .filter(|&i| self.fingers[i].in_contact)
            .filter_map(|i| {
                let p = self.fingertip(i);
                let (sd, n) = surface_query(&self.object.shape, &self.pose, p);
                let surface = sub(p, scale(n, sd));
                Contact::with_normal(surface, scale(n, -1.0), mu, 1.0).ok()
            })
            .collect()
    }

    pub fn grasp_state(&self) -> GraspState {
        GraspState { contacts: self.contacts(self.mu_eff), center: self.center(), mass: self.mass, mu: self.mu_eff }
    }

    /// Ferrari–Canny quality of the current contacts at unit normal force; 0 without contacts.
    pub fn epsilon(&self) -> f64 {
        let contacts = self.contacts(self.mu_eff);
        if contacts.is_empty() {
            return 0.0;
        }
        build_wrench_space(&contacts, self.center(), DEFAULT_EDGES).and_then(|ws| ferrari_canny_eps(&ws)).unwrap_or(0.0)
    }
}
