//! Closed-loop grasp episodes: a controller plans and updates its belief while the
//! environment steps, then the final grasp goes through the stress protocol.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use vnb_core::grasp::ACTION_DIM;
use vnb_core::{BeliefParams, CostWeights, Observation};

use crate::baselines::{
    candidate_actions, cem_plan, pf_candidate_scores, pf_failure_prob, pf_update, CemConfig, GraspParticleModel, ParticleBelief, PfConfig,
};
use crate::error::Result;
use crate::nets::{neural_belief_update, BeliefNets, HIDDEN_DIM};
use crate::planner::{belief_failure_prob, blended_risk, plan_step, GraspSequenceCost, MpcConfig, PlanContext, PlanStepResult, SequenceCost};
use crate::sim::{hand_model_from_obs, stress_test, GraspEnv, PerturbationSuite, StressReport, MAX_RATE};

/// Belief bookkeeping reported by a controller after an update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateInfo {
    /// Whether every blended parameter lies between its previous and decoded values.
    pub ema_convex: Option<bool>,
    pub ess: Option<f64>,
    pub degenerate: bool,
}

/// A belief-space controller driven by [`run_episode`].
pub trait Controller {
    fn plan(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<PlanStepResult>;
    fn update(&mut self, action: &[f64], obs: &Observation, env: &GraspEnv, rng: &mut ChaCha8Rng) -> Result<UpdateInfo>;
    /// Predicted failure probability of having executed `action` given `obs`.
    fn failure_estimate(&self, action: &[f64], obs: &Observation, rng: &mut ChaCha8Rng) -> Result<f64>;
}

fn within(prev: f64, new: f64, target: f64) -> bool {
    let (lo, hi) = if prev <= target { (prev, target) } else { (target, prev) };
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    new >= lo - tol && new <= hi + tol
}

/// Whether `blended` lies componentwise between `prev` and `decoded`.
pub fn ema_is_convex(prev: &BeliefParams, decoded: &BeliefParams, blended: &BeliefParams) -> bool {
    let flat = |p: &BeliefParams| p.to_flat();
    let (a, b, c) = (flat(prev), flat(decoded), flat(blended));
    a.len() == c.len() && a.iter().zip(&b).zip(&c).all(|((&p, &d), &n)| within(p, n, d))
}

/// Mixture-belief controller: VNB with a learned mixture, the single-Gaussian variants,
/// and an oracle that plans on the true latent.
pub struct MixtureController<'a> {
    pub nets: Option<&'a BeliefNets>,
    pub hidden: Vec<f64>,
    pub belief: BeliefParams,
    pub cfg: MpcConfig,
    pub weights: CostWeights,
    pub ema: f64,
    pub fail_samples: usize,
    pub oracle: bool,
}

impl<'a> MixtureController<'a> {
    pub fn learned(nets: &'a BeliefNets, cfg: MpcConfig, weights: CostWeights, ema: f64) -> Self {
        Self { belief: nets.initial_belief(), nets: Some(nets), hidden: vec![0.0; HIDDEN_DIM], cfg, weights, ema, fail_samples: 512, oracle: false }
    }

    /// Point-mass belief on the true latent, refreshed from the environment every step.
    pub fn oracle(env: &GraspEnv, cfg: MpcConfig, weights: CostWeights) -> Self {
        Self { nets: None, hidden: Vec::new(), belief: point_belief(&env.true_latent()), cfg, weights, ema: 1.0, fail_samples: 512, oracle: true }
    }
}

fn point_belief(theta: &[f64]) -> BeliefParams {
    BeliefParams { logits: vec![0.0], means: vec![theta.to_vec()], log_stds: vec![vec![-30.0; theta.len()]], temperature: 0.1 }
}

impl Controller for MixtureController<'_> {
    fn plan(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<PlanStepResult> {
        let cost = GraspSequenceCost::new(hand_model_from_obs(obs)?, self.weights);
        let ctx = PlanContext {
            belief: &self.belief,
            nets: self.nets,
            hidden: self.nets.map(|_| self.hidden.as_slice()),
            obs,
            cost: &cost,
            weights: &self.weights,
        };
        plan_step(&ctx, &self.cfg, rng)
    }

    fn update(&mut self, action: &[f64], obs: &Observation, env: &GraspEnv, _rng: &mut ChaCha8Rng) -> Result<UpdateInfo> {
        if self.oracle {
            self.belief = point_belief(&env.true_latent());
            return Ok(UpdateInfo::default());
        }
        let nets = self.nets.expect("learned controller has networks");
        let (h, phi) = neural_belief_update(&self.hidden, &self.belief, action, obs, nets, self.ema)?;
        let convex = ema_is_convex(&self.belief, &nets.decode(&h), &phi);
        self.hidden = h;
        self.belief = phi;
        Ok(UpdateInfo { ema_convex: Some(convex), ..UpdateInfo::default() })
    }

    fn failure_estimate(&self, action: &[f64], obs: &Observation, rng: &mut ChaCha8Rng) -> Result<f64> {
        let cost = GraspSequenceCost::new(hand_model_from_obs(obs)?, self.weights);
        belief_failure_prob(&self.belief, action, &cost, &self.cfg, self.fail_samples, rng)
    }
}

/// Cross-entropy-method controller over a learned (typically one-component) belief.
pub struct CemController<'a> {
    pub inner: MixtureController<'a>,
    pub cem: CemConfig,
}

impl Controller for CemController<'_> {
    fn plan(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<PlanStepResult> {
        let cost = GraspSequenceCost::new(hand_model_from_obs(obs)?, self.inner.weights);
        let mpc = MpcConfig { lambda_c: self.cem.lambda_c, ..self.inner.cfg.clone() };
        let risk = mpc.risk();
        let samples = vnb_core::belief::sample_belief(&self.inner.belief, mpc.samples, rng)?;
        let thetas: Vec<Vec<f64>> = samples.into_iter().map(|s| s.value).collect();
        let mut objective = |a: &[f64]| -> Result<f64> {
            let seq = [a.to_vec()];
            let values = thetas.iter().map(|t| cost.cost(t, &seq)).collect::<Result<Vec<_>>>()?;
            blended_risk(&values, &risk)
        };
        let grid = candidate_actions(&self.cem.close_rates);
        let scores = grid.iter().take(self.cem.candidates).map(|a| objective(a)).collect::<Result<Vec<_>>>()?;
        let best = (0..scores.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap_or(0);
        let std0 = vec![self.cem.init_std; ACTION_DIM];
        let res = cem_plan(&grid[best], &std0, &self.cem, (0.0, MAX_RATE), &mut objective, rng)?;
        let final_score = objective(&res.mean)?;
        let (action, score) = if final_score <= scores[best] { (res.mean, final_score) } else { (grid[best].clone(), scores[best]) };
        Ok(PlanStepResult { chosen: 0, action: action.clone(), sequence: vec![action], objectives: vec![score], fail_probs: vec![f64::NAN], flagged: false, aborted: 0 })
    }

    fn update(&mut self, action: &[f64], obs: &Observation, env: &GraspEnv, rng: &mut ChaCha8Rng) -> Result<UpdateInfo> {
        self.inner.update(action, obs, env, rng)
    }

    fn failure_estimate(&self, action: &[f64], obs: &Observation, rng: &mut ChaCha8Rng) -> Result<f64> {
        self.inner.failure_estimate(action, obs, rng)
    }
}

/// Particle-filter controller choosing among discrete closing actions by weighted CVaR.
pub struct PfController {
    pub belief: ParticleBelief,
    pub model: GraspParticleModel,
    pub cfg: PfConfig,
    pub mpc: MpcConfig,
    pub weights: CostWeights,
    prev_contacts: Vec<bool>,
}

impl PfController {
    pub fn new(env: &GraspEnv, cfg: PfConfig, mpc: MpcConfig, weights: CostWeights, rng: &mut ChaCha8Rng) -> Result<Self> {
        let o = &env.options;
        let model = GraspParticleModel::new(env.object.shape.clone(), env.regime, o.mu_f, o.position_jitter, o.yaw_jitter, env.object.stiffness, cfg.process_fraction);
        let belief = ParticleBelief::uniform(model.prior(cfg.particles, rng))?;
        Ok(Self { belief, model, cfg, mpc, weights, prev_contacts: vec![false; vnb_core::grasp::MAX_CONTACTS] })
    }
}

impl Controller for PfController {
    fn plan(&mut self, obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<PlanStepResult> {
        let candidates = candidate_actions(&self.cfg.close_rates);
        let scores = pf_candidate_scores(&self.belief, &self.model, obs, &candidates, &self.weights, &self.cfg, self.mpc.beta)?;
        let best = (0..scores.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap_or(0);
        let action = candidates[best].clone();
        Ok(PlanStepResult { chosen: best, action: action.clone(), sequence: vec![action], fail_probs: vec![f64::NAN; scores.len()], objectives: scores, flagged: false, aborted: 0 })
    }

    fn update(&mut self, action: &[f64], obs: &Observation, _env: &GraspEnv, rng: &mut ChaCha8Rng) -> Result<UpdateInfo> {
        let now = obs.active_contacts();
        for (i, flag) in self.model.new_contacts.iter_mut().enumerate() {
            *flag = now[i] && !self.prev_contacts[i];
        }
        let up = pf_update(&self.belief, action, obs, &self.model, rng);
        self.belief = up.belief;
        self.prev_contacts = now;
        Ok(UpdateInfo { ema_convex: None, ess: Some(up.ess), degenerate: up.degenerate })
    }

    fn failure_estimate(&self, action: &[f64], obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<f64> {
        pf_failure_prob(&self.belief, action, &hand_model_from_obs(obs)?, &self.weights, &self.mpc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub eps_des: f64,
    pub t_max: usize,
    /// Record wall-clock planning time; when off all times are reported as zero.
    pub timing: bool,
    pub suite: PerturbationSuite,
}

impl EpisodeConfig {
    pub fn from_mpc(cfg: &MpcConfig, timing: bool) -> Self {
        Self { eps_des: cfg.eps_des, t_max: cfg.t_max, timing, suite: PerturbationSuite::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action: Vec<f64>,
    pub chosen: usize,
    /// Per-candidate objective and failure probability; `None` where not evaluated.
    pub objectives: Vec<Option<f64>>,
    pub fail_probs: Vec<Option<f64>>,
    pub flagged: bool,
    pub eps: f64,
    pub contacts: usize,
    pub p_fail_bel: f64,
    pub plan_us: u64,
    pub update_us: u64,
    pub ema_convex: Option<bool>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub method: String,
    pub regime: String,
    pub object: String,
    pub beta: f64,
    pub episode: usize,
    pub seed: u64,
    pub mu_eff: f64,
    pub steps: Vec<StepRecord>,
    pub terminated_by_quality: bool,
    pub final_eps: f64,
    pub contacts: usize,
    /// Step whose update fixed the final contact set.
    pub grasp_step: Option<usize>,
    pub p_fail_bel: f64,
    pub nominal_success: bool,
    pub lift_ok: bool,
    pub shear_ok: Vec<bool>,
    pub n_surv: usize,
    pub n_test: usize,
    pub survival: f64,
    pub robust: bool,
    pub failure_mode: String,
    /// Largest slip speed across contacts at the end of the episode, mm/s.
    pub peak_slip: f64,
    pub flagged_steps: usize,
    pub planning_time_s: f64,
}

impl EpisodeRecord {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn finite(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|x| x.is_finite().then_some(*x)).collect()
}

/// Classifies the outcome of a stress report.
pub fn failure_mode(contacts: usize, report: &StressReport) -> &'static str {
    if contacts == 0 {
        "no_contact"
    } else if !report.lift_ok {
        "lift"
    } else if report.shear_ok.iter().any(|ok| !ok) {
        "slip"
    } else if report.survival < 0.5 {
        "perturbation"
    } else {
        "none"
    }
}

/// Labels identifying an episode in its record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMeta {
    pub method: String,
    pub beta: f64,
    pub episode: usize,
    pub seed: u64,
}

/// Runs the closed loop until the grasp quality target or the step limit, then stress-tests.
pub fn run_episode(ctrl: &mut dyn Controller, env: &mut GraspEnv, cfg: &EpisodeConfig, meta: &EpisodeMeta, rng: &mut ChaCha8Rng) -> Result<EpisodeRecord> {
    let mut obs = env.observe();
    let mut eps = env.epsilon();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut prev_contacts = env.num_contacts();
    let mut grasp_step = None;
    let mut total_us = 0u64;
    let micros = |start: Instant| if cfg.timing { start.elapsed().as_micros() as u64 } else { 0 };
    while eps < cfg.eps_des && steps.len() < cfg.t_max {
        let t = steps.len();
        let start = Instant::now();
        let plan = ctrl.plan(&obs, rng)?;
        let plan_us = micros(start);
        obs = env.step(&plan.action)?;
        let start = Instant::now();
        let info = ctrl.update(&plan.action, &obs, env, rng)?;
        let update_us = micros(start);
        total_us += plan_us + update_us;
        eps = env.epsilon();
        let mut est_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let p_fail_bel = ctrl.failure_estimate(&plan.action, &obs, &mut est_rng)?;
        let contacts = env.num_contacts();
        if contacts != prev_contacts {
            grasp_step = Some(t);
            prev_contacts = contacts;
        }
        steps.push(StepRecord {
            t,
            action: plan.action,
            chosen: plan.chosen,
            objectives: finite(&plan.objectives),
            fail_probs: finite(&plan.fail_probs),
            flagged: plan.flagged,
            eps,
            contacts,
            p_fail_bel,
            plan_us,
            update_us,
            ema_convex: info.ema_convex,
            degenerate: info.degenerate,
        });
    }
    let p_fail_bel = match (grasp_step, steps.last()) {
        (Some(g), _) => steps[g].p_fail_bel,
        (None, Some(last)) => last.p_fail_bel,
        (None, None) => ctrl.failure_estimate(&[0.0; ACTION_DIM], &obs, &mut ChaCha8Rng::seed_from_u64(rng.gen()))?,
    };
    let report = stress_test(&env.grasp_state(), &cfg.suite);
    let contacts = env.num_contacts();
    let n_test = report.outcomes.len();
    let n_surv = report.survived();
    let robust = report.nominal_success && report.survival >= 0.5;
    Ok(EpisodeRecord {
        method: meta.method.clone(),
        regime: env.regime.as_str().to_string(),
        object: env.object.name.clone(),
        beta: meta.beta,
        episode: meta.episode,
        seed: meta.seed,
        mu_eff: env.mu_eff,
        flagged_steps: steps.iter().filter(|s| s.flagged).count(),
        terminated_by_quality: eps >= cfg.eps_des,
        final_eps: eps,
        contacts,
        grasp_step,
        p_fail_bel,
        nominal_success: report.nominal_success,
        lift_ok: report.lift_ok,
        failure_mode: failure_mode(contacts, &report).to_string(),
        shear_ok: report.shear_ok,
        n_surv,
        n_test,
        survival: report.survival,
        robust,
        peak_slip: (0..vnb_core::grasp::MAX_CONTACTS).map(|i| env.slip(i)).fold(0.0, f64::max),
        planning_time_s: total_us as f64 * 1e-6,
        steps,
    })
}
