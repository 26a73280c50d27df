//! Comparison planners: a particle-filter belief with sampled candidate actions, the
//! cross-entropy method, and single-Gaussian variants of the mixture planner.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use vnb_core::grasp::{grasp_cost_vec, ACTION_DIM, MAX_CONTACTS, POSE_DIM, CONTACT_PARAMS};
use vnb_core::risk::hard_cvar;
use vnb_core::{CostWeights, HandModel, Observation, VnbError};

use crate::error::Result;
use crate::planner::{plan_step, MpcConfig, PlanContext, PlanStepResult};
use crate::sim::{
    effective_friction, finger_rays, finger_travel, fingertip_position, surface_query, FingerRay, FrictionRegime, Shape, CONTACT_TOL, COUPLING, DT,
    MAX_RATE, MAX_TRAVEL, SIGMA_BASE, SLIP_GAIN, SLIP_HALF_LIFE, SLIP_REF_MU, SLIP_VELOCITY_GAIN, STALL_FORCE, SUBSTEPS, TRAVEL_GAIN,
};

/// Weighted particle approximation of the belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleBelief {
    pub particles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ParticleBelief {
    pub fn uniform(particles: Vec<Vec<f64>>) -> Result<Self> {
        if particles.is_empty() {
            return Err(VnbError::InvalidInput("particle set is empty".into()).into());
        }
        let n = particles.len();
        Ok(Self { particles, weights: vec![1.0 / n as f64; n] })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.particles[0].len();
        let mut m = vec![0.0; d];
        for (p, w) in self.particles.iter().zip(&self.weights) {
            m.iter_mut().zip(p).for_each(|(mi, pi)| *mi += w * pi);
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let s: f64 = self.weights.iter().sum();
        if self.weights.len() != self.particles.len() || self.weights.iter().any(|w| !(*w >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(VnbError::InvalidInput("particle weights must be a probability vector".into()).into());
        }
        Ok(())
    }
}

/// Transition and observation model of a particle filter.
pub trait ParticleModel {
    type Obs: ?Sized;
    fn propagate(&self, x: &mut [f64], action: &[f64], rng: &mut dyn RngCore);
    fn log_likelihood(&self, x: &[f64], obs: &Self::Obs) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfUpdate {
    pub belief: ParticleBelief,
    pub ess: f64,
    pub resampled: bool,
    pub degenerate: bool,
}

/// Multiplies weights by `exp(log_liks)` and renormalizes; falls back to uniform weights
/// (and reports degeneracy) when every likelihood vanishes.
pub fn pf_reweight(belief: &ParticleBelief, log_liks: &[f64]) -> (ParticleBelief, bool) {
    let logw: Vec<f64> = belief.weights.iter().zip(log_liks).map(|(w, l)| w.ln() + l).collect();
    let max = logw.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    let n = belief.len();
    if !max.is_finite() {
        return (ParticleBelief { particles: belief.particles.clone(), weights: vec![1.0 / n as f64; n] }, true);
    }
    let raw: Vec<f64> = logw.iter().map(|v| if v.is_nan() { 0.0 } else { (v - max).exp() }).collect();
    let s: f64 = raw.iter().sum();
    (ParticleBelief { particles: belief.particles.clone(), weights: raw.iter().map(|w| w / s).collect() }, false)
}

/// Low-variance resampling: indices selected by the comb `(u0 + i) / N`, `u0 ∈ [0, 1)`.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let u = (u0 + i as f64) / n as f64;
        while u >= cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

/// Propagate, reweight and (when the effective sample size drops below half) resample.
pub fn pf_update<M: ParticleModel, R: Rng + ?Sized>(belief: &ParticleBelief, action: &[f64], obs: &M::Obs, model: &M, rng: &mut R) -> PfUpdate {
    let mut moved = belief.clone();
    let mut r = ChaCha8Rng::seed_from_u64(rng.gen());
    for p in moved.particles.iter_mut() {
        model.propagate(p, action, &mut r);
    }
    let ll: Vec<f64> = moved.particles.iter().map(|p| model.log_likelihood(p, obs)).collect();
    let (mut out, degenerate) = pf_reweight(&moved, &ll);
    let ess = out.ess();
    let n = out.len();
    let resampled = ess < n as f64 / 2.0;
    if resampled {
        let idx = systematic_resample(&out.weights, rng.gen::<f64>());
        out = ParticleBelief { particles: idx.iter().map(|&i| out.particles[i].clone()).collect(), weights: vec![1.0 / n as f64; n] };
    }
    PfUpdate { belief: out, ess, resampled, degenerate }
}

/// Weighted CVaR: mean of the largest costs carrying the top `1 − β` of the weight, with
/// the boundary particle counted fractionally.
pub fn pf_cvar(belief: &ParticleBelief, costs: &[f64], beta: f64) -> Result<f64> {
    if costs.len() != belief.len() {
        return Err(VnbError::ShapeMismatch { expected: belief.len(), got: costs.len() }.into());
    }
    if belief.weights.iter().all(|&w| w == belief.weights[0]) {
        return Ok(hard_cvar(costs, beta)?);
    }
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut cum = 0.0;
    let mut eta = costs[order[costs.len() - 1]];
    for &i in &order {
        cum += belief.weights[i];
        if cum >= beta - 1e-12 {
            eta = costs[i];
            break;
        }
    }
    let tail: f64 = belief.weights.iter().zip(costs).map(|(w, c)| w * (c - eta).max(0.0)).sum();
    Ok(eta + tail / (1.0 - beta))
}

/// Candidate closing patterns scaled by each closing rate; five patterns per rate.
pub fn candidate_actions(close_rates: &[f64]) -> Vec<Vec<f64>> {
    let patterns: [[f64; ACTION_DIM]; 5] = [
        [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 0.5, 0.5, 0.5, 0.5],
        [0.5, 0.5, 1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0, 1.0, 0.25, 0.25],
        [1.0, 1.0, 0.25, 0.25, 1.0, 1.0],
    ];
    close_rates.iter().flat_map(|&r| patterns.iter().map(move |p| p.iter().map(|v| (v * r).min(MAX_RATE)).collect())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PfConfig {
    pub particles: usize,
    pub close_rates: Vec<f64>,
    /// Steps each candidate is rolled forward through the model before scoring.
    pub rollout_steps: usize,
    pub process_fraction: f64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self { particles: 100, close_rates: vec![0.05, 0.10, 0.15, 0.20], rollout_steps: 10, process_fraction: 0.01 }
    }
}

/// Particle model of the grasp environment: object geometry is known, the latent
/// pose and contact parameters are not.
#[derive(Debug, Clone)]
pub struct GraspParticleModel {
    pub shape: Shape,
    pub regime: FrictionRegime,
    pub mu_f: f64,
    pub position_jitter: f64,
    pub yaw_jitter: f64,
    pub stiffness: (f64, f64),
    pub process_std: Vec<f64>,
    /// Fingers whose contact was first observed in the pending update.
    pub new_contacts: [bool; MAX_CONTACTS],
    rays: [FingerRay; MAX_CONTACTS],
}

const fn slot(i: usize) -> usize {
    POSE_DIM + CONTACT_PARAMS * i
}

fn gauss_ll(r: f64, s: f64) -> f64 {
    -0.5 * (r / s).powi(2) - s.ln()
}

fn expected_slip(mu: f64) -> f64 {
    SLIP_GAIN * (1.0 - mu / SLIP_REF_MU).max(0.0) + 0.5 * (2.0 / std::f64::consts::PI).sqrt()
}

impl GraspParticleModel {
    pub fn new(shape: Shape, regime: FrictionRegime, mu_f: f64, position_jitter: f64, yaw_jitter: f64, stiffness: (f64, f64), process_fraction: f64) -> Self {
        let (lo, hi) = regime.mu_o_span();
        let mu_range = effective_friction(mu_f, hi) - effective_friction(mu_f, lo);
        let pose_range = [2.0 * position_jitter, 2.0 * position_jitter, 0.01, 0.1, 0.1, 2.0 * yaw_jitter.max(0.05)];
        let contact_range = [mu_range, 4.0 * stiffness.1, 1.5, SLIP_GAIN];
        let mut process_std: Vec<f64> = pose_range.iter().map(|r| r * process_fraction).collect();
        for _ in 0..MAX_CONTACTS {
            process_std.extend(contact_range.iter().map(|r| r * process_fraction));
        }
        Self { shape, regime, mu_f, position_jitter, yaw_jitter, stiffness, process_std, new_contacts: [false; MAX_CONTACTS], rays: finger_rays() }
    }

    /// Draws particles from the environment's prior over pose and contact parameters.
    pub fn prior<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let k = Normal::new(self.stiffness.0, self.stiffness.1).expect("valid stiffness prior");
        (0..n)
            .map(|_| {
                let j = |rng: &mut R, m: f64| if m > 0.0 { rng.gen_range(-m..m) } else { 0.0 };
                let mut x = vec![j(rng, self.position_jitter), j(rng, self.position_jitter), 0.0, 0.0, 0.0, j(rng, self.yaw_jitter)];
                let mu = effective_friction(self.mu_f, self.regime.sample_mu_o(rng));
                for _ in 0..MAX_CONTACTS {
                    x.extend([mu, k.sample(rng).max(0.2 * self.stiffness.0), rng.gen_range(0.5..2.0), 0.0]);
                }
                x
            })
            .collect()
    }

    /// Rolls joint positions forward under a constant action with the particle's geometry,
    /// returning final fingertips, contact flags and steps until each contact formed.
    pub fn rollout(&self, x: &[f64], joints: &[f64; ACTION_DIM], action: &[f64], steps: usize) -> ([[f64; 3]; MAX_CONTACTS], [Option<usize>; MAX_CONTACTS]) {
        let mut q = *joints;
        let mut formed = [None; MAX_CONTACTS];
        let h = DT / SUBSTEPS as f64;
        let qmax = MAX_TRAVEL / TRAVEL_GAIN;
        for t in 0..steps {
            for _ in 0..SUBSTEPS {
                for i in 0..MAX_CONTACTS {
                    let mut qi = q;
                    for (j, v) in qi.iter_mut().enumerate() {
                        if COUPLING[i][j] > 0.0 {
                            *v = (*v + action[j] * h).min(qmax);
                        }
                    }
                    let p = fingertip_position(&self.rays, i, finger_travel(i, &qi));
                    let (sd, _) = surface_query(&self.shape, x, p);
                    let kappa = x[slot(i) + 1].max(1.0);
                    if (-sd).max(0.0) * kappa > STALL_FORCE {
                        continue;
                    }
                    for j in 0..ACTION_DIM {
                        if COUPLING[i][j] > 0.0 {
                            q[j] = qi[j];
                        }
                    }
                    if formed[i].is_none() && sd <= CONTACT_TOL {
                        formed[i] = Some(t);
                    }
                }
            }
        }
        let tips = [0, 1, 2, 3, 4].map(|i| fingertip_position(&self.rays, i, finger_travel(i, &q)));
        (tips, formed)
    }
}

fn observed_joints(obs: &Observation) -> [f64; ACTION_DIM] {
    let jp = obs.joint_positions();
    [jp[0], jp[1], jp[3], jp[5], jp[7], jp[9]]
}

impl ParticleModel for GraspParticleModel {
    type Obs = Observation;

    fn propagate(&self, x: &mut [f64], _action: &[f64], rng: &mut dyn RngCore) {
        let decay = 0.5f64.powf(DT / SLIP_HALF_LIFE);
        for i in 0..MAX_CONTACTS {
            let o = slot(i);
            x[o + 3] *= decay;
            if self.new_contacts[i] {
                let n: f64 = StandardNormal.sample(rng);
                x[o + 3] = SLIP_GAIN * (1.0 - x[o] / SLIP_REF_MU).max(0.0) + (0.5 * n).abs();
            }
        }
        for (v, s) in x.iter_mut().zip(&self.process_std) {
            let n: f64 = StandardNormal.sample(rng);
            *v += s * n;
        }
        for i in 0..MAX_CONTACTS {
            let o = slot(i);
            for v in &mut x[o..o + 4] {
                *v = v.max(0.0);
            }
        }
    }

    fn log_likelihood(&self, x: &[f64], obs: &Observation) -> f64 {
        let sp = SIGMA_BASE * (1.0 + obs.occlusion());
        let mut ll = 0.0;
        for (k, (&o, &p)) in obs.pose().iter().zip(x).enumerate() {
            ll += gauss_ll(o - p, if k < 3 { sp } else { 4.0 * sp });
        }
        let joints = observed_joints(obs);
        let contacts = obs.active_contacts();
        let tactile = obs.tactile();
        let jv = obs.joint_velocities();
        for i in 0..MAX_CONTACTS {
            let p = fingertip_position(&self.rays, i, finger_travel(i, &joints));
            let (sd, _) = surface_query(&self.shape, x, p);
            let pc = 1.0 / (1.0 + ((sd - CONTACT_TOL) / 0.002).exp());
            let o = slot(i);
            if contacts[i] {
                ll += pc.max(1e-6).ln();
                ll += gauss_ll(tactile[i] - x[o + 1] * (-sd).max(0.0), 1.0);
                let (prox, distal) = if i == 0 { (0.5 * (jv[0] + jv[1]), jv[2]) } else { (jv[2 * i + 1], jv[2 * i + 2]) };
                ll += gauss_ll(distal - 0.8 * prox - SLIP_VELOCITY_GAIN * x[o + 3], 0.013);
            } else {
                ll += (1.0 - pc).max(1e-6).ln();
            }
        }
        ll
    }
}

/// Scores every candidate by the weighted CVaR of the grasp cost at the end of a model
/// rollout from each particle, returning the candidate scores.
pub fn pf_candidate_scores(
    belief: &ParticleBelief,
    model: &GraspParticleModel,
    obs: &Observation,
    candidates: &[Vec<f64>],
    weights: &CostWeights,
    cfg: &PfConfig,
    beta: f64,
) -> Result<Vec<f64>> {
    let joints = observed_joints(obs);
    let observed = obs.active_contacts();
    let decay = |steps: usize| 0.5f64.powf(steps as f64 * DT / SLIP_HALF_LIFE);
    let jac = crate::sim::hand_model_from_obs(obs)?.jacobians;
    candidates
        .iter()
        .map(|a| {
            let costs = belief
                .particles
                .iter()
                .map(|x| {
                    let (tips, formed) = model.rollout(x, &joints, a, cfg.rollout_steps);
                    let mut theta = x.clone();
                    let mut active = vec![false; MAX_CONTACTS];
                    for i in 0..MAX_CONTACTS {
                        let o = slot(i);
                        if observed[i] {
                            active[i] = true;
                            theta[o + 3] *= decay(cfg.rollout_steps);
                        } else if let Some(t) = formed[i] {
                            active[i] = true;
                            theta[o + 3] = expected_slip(x[o]) * decay(cfg.rollout_steps - t);
                        }
                    }
                    let hand = HandModel { base: tips.to_vec(), jacobians: jac.clone(), active };
                    Ok(grasp_cost_vec(&theta, a, &hand, weights)?)
                })
                .collect::<Result<Vec<f64>>>()?;
            pf_cvar(belief, &costs, beta)
        })
        .collect()
}

/// Weighted soft failure probability of an action under the particle belief.
pub fn pf_failure_prob(belief: &ParticleBelief, action: &[f64], hand: &HandModel, weights: &CostWeights, cfg: &MpcConfig) -> Result<f64> {
    let risk = cfg.risk();
    let mut p = 0.0;
    for (x, w) in belief.particles.iter().zip(&belief.weights) {
        let c = grasp_cost_vec(x, action, hand, weights)?;
        p += w / (1.0 + (-risk.kappa_f * (c - risk.tau_f)).exp());
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CemConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub candidates: usize,
    pub close_rates: Vec<f64>,
    pub init_std: f64,
    pub lambda_c: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self { population: 64, elite_fraction: 0.2, iterations: 3, candidates: 20, close_rates: vec![0.05, 0.10, 0.15, 0.20], init_std: 0.05, lambda_c: 0.0 }
    }
}

impl CemConfig {
    pub fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemResult {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Mean after each iteration.
    pub history: Vec<Vec<f64>>,
    pub best_score: f64,
}

/// Cross-entropy method over a diagonal Gaussian on actions, clamped to `bounds`.
pub fn cem_plan<R: Rng + ?Sized>(
    mean0: &[f64],
    std0: &[f64],
    cfg: &CemConfig,
    bounds: (f64, f64),
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    rng: &mut R,
) -> Result<CemResult> {
    let mut mean = mean0.to_vec();
    let mut std = std0.to_vec();
    let mut history = Vec::with_capacity(cfg.iterations);
    let elites = cfg.elite_count().min(cfg.population);
    let mut best_score = f64::INFINITY;
    for _ in 0..cfg.iterations {
        let mut scored = Vec::with_capacity(cfg.population);
        for _ in 0..cfg.population {
            let a: Vec<f64> = mean
                .iter()
                .zip(&std)
                .map(|(m, s)| {
                    let n: f64 = rng.sample(StandardNormal);
                    (m + s * n).clamp(bounds.0, bounds.1)
                })
                .collect();
            let score = objective(&a)?;
            scored.push((if score.is_nan() { f64::INFINITY } else { score }, a));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        best_score = best_score.min(scored[0].0);
        let elite = &scored[..elites];
        let d = mean.len();
        let m: Vec<f64> = (0..d).map(|j| elite.iter().map(|(_, a)| a[j]).sum::<f64>() / elites as f64).collect();
        std = (0..d).map(|j| (elite.iter().map(|(_, a)| (a[j] - m[j]).powi(2)).sum::<f64>() / elites as f64).sqrt()).collect();
        mean = m;
        history.push(mean.clone());
    }
    Ok(CemResult { mean, std, history, best_score })
}

/// Mixture planner with the expected-cost objective; intended for a one-component belief.
pub fn gauss_mpc_step<R: Rng + ?Sized>(ctx: &PlanContext<'_>, cfg: &MpcConfig, rng: &mut R) -> Result<PlanStepResult> {
    plan_step(ctx, &MpcConfig { lambda_c: 0.0, ..cfg.clone() }, rng)
}

/// Mixture planner with an even blend of CVaR and expected cost; intended for a one-component belief.
pub fn gauss_cvar_mpc_step<R: Rng + ?Sized>(ctx: &PlanContext<'_>, cfg: &MpcConfig, rng: &mut R) -> Result<PlanStepResult> {
    plan_step(ctx, &MpcConfig { lambda_c: 0.5, ..cfg.clone() }, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elite_count_is_ceiling() {
        assert_eq!(CemConfig::default().elite_count(), 13);
        assert_eq!(CemConfig { population: 10, elite_fraction: 0.2, ..CemConfig::default() }.elite_count(), 2);
    }

    #[test]
    fn twenty_candidates() {
        let c = candidate_actions(&CemConfig::default().close_rates);
        assert_eq!(c.len(), 20);
        assert!(c.iter().flatten().all(|&v| (0.0..=MAX_RATE).contains(&v)));
    }

    #[test]
    fn resample_keeps_heavy_particle() {
        let idx = systematic_resample(&[0.0, 1.0, 0.0], 0.5);
        assert_eq!(idx, vec![1, 1, 1]);
    }

    #[test]
    fn all_zero_likelihood_is_degenerate() {
        let b = ParticleBelief::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let (out, deg) = pf_reweight(&b, &[f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert!(deg);
        assert_eq!(out.weights, vec![0.5, 0.5]);
    }
}
