//! Risk-aware model-predictive control over a mixture belief.
//!
//! Each mixture component gets its own projected-gradient optimization of the action
//! sequence on a fixed set of reparameterized samples. Components are then scored by the
//! composite objective and gated by their predicted failure probability.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use vnb_core::belief::{belief_entropy_bound, sample_belief, sample_component};
use vnb_core::grasp::{grasp_cost_grad, grasp_cost_vec, visual_cost, ACTION_DIM, POSE_DIM};
use vnb_core::risk::{failure_prob_soft, sample_mean, soft_cvar, soft_cvar_weights};
use vnb_core::{BeliefParams, CostWeights, HandModel, Observation, RiskConfig, VnbError};

use crate::error::{PlanningError, Result};
use crate::nets::BeliefNets;
use crate::sim::MAX_RATE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub beta: f64,
    pub kappa_rho: f64,
    pub kappa_f: f64,
    pub tau_f: f64,
    /// Failure-probability bound for the component gate.
    pub delta: f64,
    pub eps_des: f64,
    pub horizon: usize,
    pub grad_steps: usize,
    pub step_size: f64,
    pub max_halvings: usize,
    pub samples: usize,
    pub t_max: usize,
    pub lambda_c: f64,
    pub lambda_v: f64,
    pub gamma: f64,
    pub multistart: Vec<f64>,
    /// Components whose mixture weight falls below this are not planned for.
    pub min_weight: f64,
    pub action_bounds: (f64, f64),
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            kappa_rho: 5.0,
            kappa_f: 100.0,
            tau_f: 5.8,
            delta: 0.3,
            eps_des: 0.005,
            horizon: 1,
            grad_steps: 25,
            step_size: 0.05,
            max_halvings: 4,
            samples: 256,
            t_max: 80,
            lambda_c: 1.0,
            lambda_v: 0.0,
            gamma: 0.01,
            multistart: vec![0.05, 0.10, 0.15],
            min_weight: 0.01,
            action_bounds: (0.0, MAX_RATE),
        }
    }
}

impl MpcConfig {
    pub fn risk(&self) -> RiskConfig {
        RiskConfig { beta: self.beta, kappa_rho: self.kappa_rho, kappa_f: self.kappa_f, tau_f: self.tau_f, lambda_c: self.lambda_c }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PlanningError::InvalidConfig(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.grad_steps == 0 {
            return bad("grad_steps must be at least 1");
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad("delta must lie in [0, 1]");
        }
        if self.t_max == 0 {
            return bad("t_max must be at least 1");
        }
        if self.samples == 0 {
            return bad("samples must be positive");
        }
        if !(self.eps_des > 0.0) {
            return bad("eps_des must be positive");
        }
        if self.multistart.is_empty() {
            return bad("multistart needs at least one magnitude");
        }
        if !(self.lambda_v >= 0.0 && self.gamma.is_finite()) {
            return bad("lambda_v must be non-negative and gamma finite");
        }
        if !(self.action_bounds.0 <= self.action_bounds.1) {
            return bad("action bounds are reversed");
        }
        self.risk().validate().map_err(|e| PlanningError::InvalidConfig(e.to_string()))
    }
}

/// Cost of an action sequence under one latent sample, with its gradient.
pub trait SequenceCost: Sync {
    fn cost(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<f64>;
    fn grad(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

/// Grasp cost averaged over a sequence, advancing the linearized fingertips by each action.
#[derive(Debug, Clone)]
pub struct GraspSequenceCost {
    pub hand: HandModel,
    pub weights: CostWeights,
}

impl GraspSequenceCost {
    pub fn new(hand: HandModel, weights: CostWeights) -> Self {
        Self { hand, weights }
    }

    fn shifted(&self, offset: &[f64]) -> HandModel {
        let mut hand = self.hand.clone();
        for (i, b) in hand.base.iter_mut().enumerate() {
            *b = self.hand.fingertip(i, offset);
        }
        hand
    }

    fn frozen(hand: &HandModel) -> HandModel {
        HandModel { base: hand.base.clone(), jacobians: vec![[[0.0; ACTION_DIM]; 3]; hand.fingers()], active: hand.active.clone() }
    }
}

/// Latent sample with contact parameters clamped to their physical (non-negative) domain.
pub fn physical_latent(theta: &[f64]) -> Cow<'_, [f64]> {
    if theta.iter().skip(POSE_DIM).all(|v| *v >= 0.0) {
        return Cow::Borrowed(theta);
    }
    let mut x = theta.to_vec();
    for v in x.iter_mut().skip(POSE_DIM) {
        *v = v.max(0.0);
    }
    Cow::Owned(x)
}

impl SequenceCost for GraspSequenceCost {
    fn cost(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<f64> {
        let theta = &*physical_latent(theta);
        if let [a] = seq {
            return Ok(grasp_cost_vec(theta, a, &self.hand, &self.weights)?);
        }
        let mut offset = vec![0.0; ACTION_DIM];
        let mut total = 0.0;
        for a in seq {
            total += grasp_cost_vec(theta, a, &self.shifted(&offset), &self.weights)?;
            offset.iter_mut().zip(a).for_each(|(o, v)| *o += v);
        }
        Ok(total / seq.len() as f64)
    }

    fn grad(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let theta = &*physical_latent(theta);
        if let [a] = seq {
            return Ok(vec![grasp_cost_grad(theta, a, &self.hand, &self.weights)?]);
        }
        let h = seq.len() as f64;
        let mut out = vec![vec![0.0; ACTION_DIM]; seq.len()];
        let mut offset = vec![0.0; ACTION_DIM];
        for (t, a) in seq.iter().enumerate() {
            let hand = self.shifted(&offset);
            let full = grasp_cost_grad(theta, a, &hand, &self.weights)?;
            let rate = grasp_cost_grad(theta, a, &Self::frozen(&hand), &self.weights)?;
            for j in 0..ACTION_DIM {
                out[t][j] += full[j] / h;
                for earlier in out.iter_mut().take(t) {
                    earlier[j] += (full[j] - rate[j]) / h;
                }
            }
            offset.iter_mut().zip(a).for_each(|(o, v)| *o += v);
        }
        Ok(out)
    }
}

/// `λ_c · softCVaR + (1 − λ_c) · mean` of sampled costs.
pub fn blended_risk(values: &[f64], risk: &RiskConfig) -> Result<f64> {
    let l = risk.lambda_c;
    Ok(if l == 1.0 {
        soft_cvar(values, risk)?
    } else if l == 0.0 {
        sample_mean(values)?
    } else {
        l * soft_cvar(values, risk)? + (1.0 - l) * sample_mean(values)?
    })
}

/// Per-sample gradient weights of [`blended_risk`] with the quantile held fixed.
pub fn blended_weights(values: &[f64], risk: &RiskConfig) -> Result<Vec<f64>> {
    let l = risk.lambda_c;
    let mean_w = (1.0 - l) / values.len() as f64;
    if l == 0.0 {
        return Ok(vec![mean_w; values.len()]);
    }
    Ok(soft_cvar_weights(values, risk)?.into_iter().map(|w| l * w + mean_w).collect())
}

/// Outcome of optimizing one component's action sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPlan {
    pub actions: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Risk objective after each accepted step, starting from the initial sequence.
    pub trace: Vec<f64>,
    pub aborted: Option<String>,
}

fn project(seq: &mut [Vec<f64>], bounds: (f64, f64)) {
    for v in seq.iter_mut().flatten() {
        *v = v.clamp(bounds.0, bounds.1);
    }
}

fn evaluate(samples: &[Vec<f64>], seq: &[Vec<f64>], cost: &dyn SequenceCost, risk: &RiskConfig) -> Result<(Vec<f64>, f64)> {
    let values = samples.iter().map(|th| cost.cost(th, seq)).collect::<Result<Vec<_>>>()?;
    let obj = blended_risk(&values, risk)?;
    Ok((values, obj))
}

/// Projected gradient descent with backtracking on a fixed sample set.
pub fn optimize_on_samples(samples: &[Vec<f64>], a_init: &[Vec<f64>], cfg: &MpcConfig, cost: &dyn SequenceCost) -> Result<ComponentPlan> {
    let risk = cfg.risk();
    let (init_values, init_obj) = evaluate(samples, a_init, cost, &risk)?;
    let mut a = a_init.to_vec();
    let (mut values, mut obj) = (init_values.clone(), init_obj);
    let mut trace = vec![obj];
    for step in 0..cfg.grad_steps {
        let w = blended_weights(&values, &risk)?;
        let mut g = vec![vec![0.0; ACTION_DIM]; a.len()];
        for (wi, th) in w.iter().zip(samples) {
            if *wi == 0.0 {
                continue;
            }
            for (gr, gi) in g.iter_mut().zip(cost.grad(th, &a)?) {
                gr.iter_mut().zip(gi).for_each(|(x, y)| *x += wi * y);
            }
        }
        if g.iter().flatten().any(|v| !v.is_finite()) {
            let msg = format!("non-finite gradient at inner step {step}");
            return Ok(ComponentPlan { actions: a_init.to_vec(), values: init_values, objective: init_obj, trace, aborted: Some(msg) });
        }
        let mut alpha = cfg.step_size;
        let mut moved = false;
        for _ in 0..=cfg.max_halvings {
            let mut cand: Vec<Vec<f64>> = a.iter().zip(&g).map(|(x, gx)| x.iter().zip(gx).map(|(v, d)| v - alpha * d).collect()).collect();
            project(&mut cand, cfg.action_bounds);
            if cand == a {
                break;
            }
            let (v, o) = evaluate(samples, &cand, cost, &risk)?;
            if o <= obj {
                a = cand;
                values = v;
                obj = o;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
        trace.push(obj);
    }
    Ok(ComponentPlan { actions: a, values, objective: obj, trace, aborted: None })
}

/// Optimizes an action sequence for a single-Gaussian belief on `cfg.samples` draws from it.
pub fn optimize_action_for_component<R: Rng + ?Sized>(
    phi_k: &BeliefParams,
    a_init: &[Vec<f64>],
    cfg: &MpcConfig,
    cost: &dyn SequenceCost,
    rng: &mut R,
) -> Result<ComponentPlan> {
    if phi_k.num_components() != 1 {
        return Err(VnbError::InvalidInput(format!("expected one component, got {}", phi_k.num_components())).into());
    }
    if a_init.iter().flatten().any(|v| !v.is_finite()) {
        return Err(VnbError::InvalidInput("initial actions must be finite".into()).into());
    }
    let samples: Vec<Vec<f64>> = sample_component(phi_k, 0, cfg.samples, rng).into_iter().map(|(x, _)| x).collect();
    optimize_on_samples(&samples, a_init, cfg, cost)
}

/// Belief predicted `H` steps ahead by the transition network alone, decoded.
pub fn predicted_terminal_belief(nets: &BeliefNets, hidden: &[f64], seq: &[Vec<f64>]) -> BeliefParams {
    let mut h = hidden.to_vec();
    for a in seq {
        h = nets.predict(&h, a);
    }
    nets.decode(&h)
}

/// Composite objective from already-sampled costs, observation and predicted terminal belief.
pub fn composite_objective(values: &[f64], obs: &Observation, terminal: &BeliefParams, weights: &CostWeights, cfg: &MpcConfig) -> Result<f64> {
    let mut j = blended_risk(values, &cfg.risk())?;
    if cfg.lambda_v != 0.0 {
        j += cfg.lambda_v * visual_cost(obs, weights);
    }
    if cfg.gamma != 0.0 {
        j += cfg.gamma * belief_entropy_bound(terminal);
    }
    Ok(j)
}

/// Composite objective of an action sequence under a full mixture belief, using `phi`
/// itself as the terminal belief.
pub fn mpc_objective<R: Rng + ?Sized>(
    phi: &BeliefParams,
    actions: &[Vec<f64>],
    obs: &Observation,
    cost: &dyn SequenceCost,
    weights: &CostWeights,
    cfg: &MpcConfig,
    rng: &mut R,
) -> Result<f64> {
    let samples = sample_belief(phi, cfg.samples, rng)?;
    let values = samples.iter().map(|s| cost.cost(&s.value, actions)).collect::<Result<Vec<_>>>()?;
    composite_objective(&values, obs, phi, weights, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStepResult {
    pub chosen: usize,
    pub action: Vec<f64>,
    pub sequence: Vec<Vec<f64>>,
    /// Composite objective per candidate; `NaN` for skipped components.
    pub objectives: Vec<f64>,
    pub fail_probs: Vec<f64>,
    /// Set when no candidate met the failure bound and the lowest-risk one was executed.
    pub flagged: bool,
    pub aborted: usize,
}

/// Index minimizing `objectives` among entries with `fail_probs ≤ delta`, or the minimum
/// failure probability with the flag raised when none qualifies.
pub fn gate(objectives: &[f64], fail_probs: &[f64], delta: f64) -> Option<(usize, bool)> {
    let argmin = |it: &mut dyn Iterator<Item = (usize, f64)>| {
        it.filter(|(_, v)| !v.is_nan()).fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
    };
    let feasible = argmin(&mut objectives.iter().copied().enumerate().filter(|&(i, _)| fail_probs[i] <= delta));
    if let Some((i, _)) = feasible {
        return Some((i, false));
    }
    argmin(&mut fail_probs.iter().copied().enumerate().filter(|&(i, _)| !objectives[i].is_nan())).map(|(i, _)| (i, true))
}

/// Inputs of one planning step.
pub struct PlanContext<'a> {
    pub belief: &'a BeliefParams,
    pub nets: Option<&'a BeliefNets>,
    pub hidden: Option<&'a [f64]>,
    pub obs: &'a Observation,
    pub cost: &'a dyn SequenceCost,
    pub weights: &'a CostWeights,
}

/// One receding-horizon step: optimize every component from each start, score, gate.
pub fn plan_step<R: Rng + ?Sized>(ctx: &PlanContext<'_>, cfg: &MpcConfig, rng: &mut R) -> Result<PlanStepResult> {
    let phi = ctx.belief;
    let k = phi.num_components();
    let weights = phi.weights();
    let seeds: Vec<u64> = (0..k).map(|_| rng.gen()).collect();
    let risk = cfg.risk();
    let mut objectives = vec![f64::NAN; k];
    let mut fail_probs = vec![f64::NAN; k];
    let mut sequences = vec![Vec::new(); k];
    let mut aborted = 0;
    let top = (0..k).max_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a))).unwrap_or(0);
    for c in 0..k {
        if weights[c] < cfg.min_weight && c != top {
            continue;
        }
        let mut crng = ChaCha8Rng::seed_from_u64(seeds[c]);
        let samples: Vec<Vec<f64>> = sample_component(phi, c, cfg.samples, &mut crng).into_iter().map(|(x, _)| x).collect();
        let mut best: Option<ComponentPlan> = None;
        for &m in &cfg.multistart {
            let init = vec![vec![m.clamp(cfg.action_bounds.0, cfg.action_bounds.1); ACTION_DIM]; cfg.horizon];
            let plan = optimize_on_samples(&samples, &init, cfg, ctx.cost)?;
            aborted += plan.aborted.is_some() as usize;
            if best.as_ref().map_or(true, |b| plan.objective < b.objective) {
                best = Some(plan);
            }
        }
        let best = best.expect("at least one start");
        let terminal = match (ctx.nets, ctx.hidden) {
            (Some(n), Some(h)) if cfg.gamma != 0.0 => predicted_terminal_belief(n, h, &best.actions),
            _ => phi.clone(),
        };
        objectives[c] = composite_objective(&best.values, ctx.obs, &terminal, ctx.weights, cfg)?;
        fail_probs[c] = failure_prob_soft(&best.values, &risk)?;
        sequences[c] = best.actions;
    }
    let (chosen, flagged) = gate(&objectives, &fail_probs, cfg.delta).ok_or_else(|| PlanningError::SimulationFault("no component produced a plan".into()))?;
    let sequence = std::mem::take(&mut sequences[chosen]);
    Ok(PlanStepResult { chosen, action: sequence[0].clone(), sequence, objectives, fail_probs, flagged, aborted })
}

/// Soft failure probability of executing `action` under a mixture belief.
pub fn belief_failure_prob<R: Rng + ?Sized>(phi: &BeliefParams, action: &[f64], cost: &dyn SequenceCost, cfg: &MpcConfig, n: usize, rng: &mut R) -> Result<f64> {
    let seq = [action.to_vec()];
    let samples = sample_belief(phi, n, rng)?;
    let values = samples.iter().map(|s| cost.cost(&s.value, &seq)).collect::<Result<Vec<_>>>()?;
    Ok(failure_prob_soft(&values, &cfg.risk())?)
}
