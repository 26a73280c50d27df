//! Maximum-likelihood training of the belief networks on simulator trajectories with
//! ground-truth latents, by backpropagation through time and Adam.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use vnb_core::grasp::{ACTION_DIM, LATENT_DIM};
use vnb_core::observation::OBS_DIM;
use vnb_core::scalar::log_sum_exp;

use crate::error::{PlanningError, Result};
use crate::nets::{BeliefNets, MlpTrace, Normalizer, HIDDEN_DIM, LOG_STD_MAX, LOG_STD_MIN};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    /// Action applied before this observation.
    pub action: Vec<f64>,
    pub obs: Vec<f64>,
    /// Ground-truth latent after the action.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(default)]
    pub object: String,
    #[serde(default)]
    pub regime: String,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        for (t, s) in self.steps.iter().enumerate() {
            if s.action.len() != ACTION_DIM || s.obs.len() != OBS_DIM || s.theta.len() != LATENT_DIM {
                return Err(PlanningError::Dataset(format!("step {t} has wrong action/observation/latent sizes")));
            }
            if s.action.iter().chain(&s.obs).chain(&s.theta).any(|v| !v.is_finite()) {
                return Err(PlanningError::Dataset(format!("step {t} contains non-finite values")));
            }
        }
        Ok(())
    }
}

/// Writes one trajectory per line.
pub fn write_dataset<W: Write>(mut w: W, data: &[Trajectory]) -> Result<()> {
    for t in data {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trajectory = serde_json::from_str(&line).map_err(|e| PlanningError::Dataset(format!("line {}: {e}", i + 1)))?;
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub components: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub ema_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            components: 8,
            learning_rate: 3e-4,
            batch_size: 64,
            epochs: 500,
            tau_start: 1.0,
            tau_end: 0.1,
            ema_rate: 0.3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.components == 0 {
            return Err(PlanningError::InvalidConfig("learning rate, batch size and components must be positive".into()));
        }
        if !(self.tau_start > 0.0 && self.tau_end > 0.0) {
            return Err(PlanningError::InvalidConfig("temperatures must be positive".into()));
        }
        Ok(())
    }

    /// Cosine-annealed Gumbel-Softmax temperature at `epoch`.
    pub fn temperature(&self, epoch: usize) -> f64 {
        let frac = if self.epochs <= 1 { 1.0 } else { epoch as f64 / (self.epochs - 1) as f64 };
        self.tau_end + 0.5 * (self.tau_start - self.tau_end) * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-step NLL over the dataset before the first update.
    pub initial_nll: f64,
    /// Mean per-step NLL over each epoch's minibatches.
    pub epoch_losses: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub final_nll: f64,
}

/// Negative log-likelihood of a latent under the mixture encoded by a raw decoder output,
/// and its gradient with respect to that output.
pub fn gmm_nll(nets: &BeliefNets, raw: &[f64], theta: &[f64]) -> (f64, Vec<f64>) {
    let (k, d) = (nets.components, LATENT_DIM);
    let norm = &nets.latent_norm;
    let z = norm.apply(theta);
    let log_norm: f64 = norm.scale.iter().map(|s| s.ln()).sum();
    let logits = &raw[..k];
    let lse_logits = log_sum_exp(logits);
    let mut log_joint = vec![0.0; k];
    for c in 0..k {
        let mut lp = logits[c] - lse_logits;
        for j in 0..d {
            let m = raw[k + c * d + j];
            let ls = raw[k + k * d + c * d + j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let u = (z[j] - m) * (-ls).exp();
            lp -= HALF_LN_2PI + ls + 0.5 * u * u;
        }
        log_joint[c] = lp;
    }
    let lse = log_sum_exp(&log_joint);
    let nll = -lse + log_norm;
    let mut grad = vec![0.0; raw.len()];
    for c in 0..k {
        let resp = (log_joint[c] - lse).exp();
        grad[c] = (logits[c] - lse_logits).exp() - resp;
        for j in 0..d {
            let m = raw[k + c * d + j];
            let raw_ls = raw[k + k * d + c * d + j];
            let ls = raw_ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let inv_var = (-2.0 * ls).exp();
            let diff = z[j] - m;
            grad[k + c * d + j] = -resp * diff * inv_var;
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_ls) {
                grad[k + k * d + c * d + j] = resp * (1.0 - diff * diff * inv_var);
            }
        }
    }
    (nll, grad)
}

struct StepTrace {
    trans: MlpTrace,
    obs: MlpTrace,
    dec: MlpTrace,
    grad_raw: Vec<f64>,
}

/// Summed NLL over a trajectory, accumulating parameter gradients into `grads`.
fn trajectory_loss(nets: &BeliefNets, traj: &Trajectory, grads: Option<&mut BeliefNets>) -> f64 {
    let mut h = vec![0.0; HIDDEN_DIM];
    let mut traces = Vec::with_capacity(traj.steps.len());
    let mut total = 0.0;
    for s in &traj.steps {
        let trans = nets.trans.trace(&[h.as_slice(), &s.action].concat());
        let predicted = trans.acts.last().expect("non-empty trace").clone();
        let obs = nets.obs.trace(&[predicted.as_slice(), &nets.obs_norm.apply(&s.obs)].concat());
        h = obs.acts.last().expect("non-empty trace").clone();
        let dec = nets.decoder.trace(&h);
        let (nll, grad_raw) = gmm_nll(nets, dec.acts.last().expect("non-empty trace"), &s.theta);
        total += nll;
        traces.push(StepTrace { trans, obs, dec, grad_raw });
    }
    if let Some(grads) = grads {
        let mut gh_next = vec![0.0; HIDDEN_DIM];
        for tr in traces.iter().rev() {
            let mut gh = nets.decoder.backward(&tr.dec, &tr.grad_raw, &mut grads.decoder);
            for (a, b) in gh.iter_mut().zip(&gh_next) {
                *a += b;
            }
            let gy = nets.obs.backward(&tr.obs, &gh, &mut grads.obs);
            let gx = nets.trans.backward(&tr.trans, &gy[..HIDDEN_DIM], &mut grads.trans);
            gh_next = gx[..HIDDEN_DIM].to_vec();
        }
    }
    total
}

/// Mean per-step NLL of a batch and its gradient with respect to the flat parameters.
pub fn batch_loss_and_grad(nets: &BeliefNets, batch: &[&Trajectory]) -> (f64, Vec<f64>) {
    let mut grads = nets.zeros_like();
    let steps: usize = batch.iter().map(|t| t.steps.len()).sum::<usize>().max(1);
    let total: f64 = batch.iter().map(|t| trajectory_loss(nets, t, Some(&mut grads))).sum();
    let inv = 1.0 / steps as f64;
    (total * inv, grads.flat_params().into_iter().map(|g| g * inv).collect())
}

/// Mean per-step NLL over a dataset.
pub fn dataset_nll(nets: &BeliefNets, data: &[Trajectory]) -> f64 {
    let steps: usize = data.iter().map(|t| t.steps.len()).sum::<usize>().max(1);
    data.iter().map(|t| trajectory_loss(nets, t, None)).sum::<f64>() / steps as f64
}

/// Fits observation and latent normalization on the dataset.
pub fn fit_normalizers(nets: &mut BeliefNets, data: &[Trajectory]) {
    let steps = || data.iter().flat_map(|t| t.steps.iter());
    nets.obs_norm = Normalizer::fit(steps().map(|s| s.obs.as_slice()), OBS_DIM);
    nets.latent_norm = Normalizer::fit(steps().map(|s| s.theta.as_slice()), LATENT_DIM);
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.adam_beta1.powi(self.t);
        let c2 = 1.0 - cfg.adam_beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.adam_beta1 * self.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
            self.v[i] = cfg.adam_beta2 * self.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
            params[i] -= cfg.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.adam_eps);
        }
    }
}

/// Trains belief networks by minimizing the per-step mixture NLL of the ground-truth latents.
pub fn train_belief_nets<R: Rng + ?Sized>(data: &[Trajectory], cfg: &TrainConfig, rng: &mut R) -> Result<(BeliefNets, TrainReport)> {
    cfg.validate()?;
    if data.iter().all(|t| t.steps.is_empty()) {
        return Err(PlanningError::Dataset("dataset has no steps".into()));
    }
    for t in data {
        t.validate()?;
    }
    let mut nets = BeliefNets::new(cfg.components, rng);
    fit_normalizers(&mut nets, data);
    let initial_nll = dataset_nll(&nets, data);
    let mut params = nets.flat_params();
    let mut adam = Adam { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut temperatures = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Trajectory> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = batch_loss_and_grad(&nets, &batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PlanningError::TrainingDivergence { epoch, loss });
            }
            let n: usize = batch.iter().map(|t| t.steps.len()).sum();
            sum += loss * n as f64;
            count += n;
            adam.step(&mut params, &grad, cfg);
            nets.set_flat_params(&params)?;
        }
        epoch_losses.push(sum / count.max(1) as f64);
        temperatures.push(cfg.temperature(epoch));
    }
    nets.temperature = crate::nets::PLANNING_TEMPERATURE;
    let final_nll = dataset_nll(&nets, data);
    if !final_nll.is_finite() {
        return Err(PlanningError::TrainingDivergence { epoch: cfg.epochs, loss: final_nll });
    }
    Ok((nets, TrainReport { initial_nll, epoch_losses, temperatures, final_nll }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Trajectory> {
        (0..n)
            .map(|_| Trajectory {
                object: "toy".into(),
                regime: "nominal".into(),
                steps: (0..len)
                    .map(|_| {
                        let obs: Vec<f64> = (0..OBS_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let theta: Vec<f64> = (0..LATENT_DIM).map(|j| obs[j % OBS_DIM] * 0.5 + rng.gen_range(-0.1..0.1)).collect();
                        TrajectoryStep { action: vec![0.1; ACTION_DIM], obs, theta }
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert!((cfg.temperature(0) - 1.0).abs() < 1e-12);
        assert!((cfg.temperature(499) - 0.1).abs() < 1e-12);
        assert!(cfg.temperature(100) > cfg.temperature(200));
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = toy_dataset(&mut rng, 2, 3);
        let mut nets = BeliefNets::new(3, &mut rng);
        fit_normalizers(&mut nets, &data);
        let batch: Vec<&Trajectory> = data.iter().collect();
        let (_, grad) = batch_loss_and_grad(&nets, &batch);
        let base = nets.flat_params();
        let n = base.len();
        let idx: Vec<usize> = (0..10).map(|i| (i * 9973 + 17) % n).collect();
        for &i in &idx {
            let h = 1e-5;
            let mut p = base.clone();
            p[i] += h;
            nets.set_flat_params(&p).unwrap();
            let up = batch_loss_and_grad(&nets, &batch).0;
            p[i] -= 2.0 * h;
            nets.set_flat_params(&p).unwrap();
            let down = batch_loss_and_grad(&nets, &batch).0;
            nets.set_flat_params(&base).unwrap();
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(err < 1e-3, "param {i}: fd {fd} vs analytic {}", grad[i]);
        }
    }

    #[test]
    fn dataset_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data = toy_dataset(&mut rng, 3, 2);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);
        assert!(read_dataset(&b"{\"steps\":[{\"action\":[1],\"obs\":[],\"theta\":[]}]}\n"[..]).is_err());
    }

    #[test]
    fn training_is_deterministic_and_reduces_nll() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let data = toy_dataset(&mut rng, 16, 1);
        let cfg = TrainConfig { components: 1, epochs: 40, batch_size: 4, learning_rate: 1e-3, ..TrainConfig::default() };
        let (a, ra) = train_belief_nets(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let (b, _) = train_belief_nets(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
        assert!(ra.final_nll < ra.initial_nll);
    }
}
