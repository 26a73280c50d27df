//! Benchmark orchestration: episode enumeration with per-episode seed derivation, a
//! bounded worker pool, regime-level aggregation, the synthetic calibration study and
//! scripted data collection for training.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use vnb_core::belief::sample_belief;
use vnb_core::grasp::{grasp_cost_vec, ACTION_DIM, CONTACT_PARAMS, LATENT_DIM, MAX_CONTACTS, POSE_DIM};
use vnb_core::risk::failure_prob_soft;
use vnb_core::{BeliefParams, CostWeights, HandModel};

use crate::baselines::{candidate_actions, CemConfig, PfConfig};
use crate::episode::{run_episode, CemController, Controller, EpisodeConfig, EpisodeMeta, EpisodeRecord, MixtureController, PfController};
use crate::error::{PlanningError, Result};
use crate::nets::BeliefNets;
use crate::planner::{physical_latent, MpcConfig};
use crate::sim::{object_by_name, object_catalog, EnvOptions, FrictionRegime, GraspEnv, MAX_RATE};
use crate::training::{Trajectory, TrajectoryStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Vnb,
    Gauss,
    GaussCvar,
    Pf,
    Cem,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Vnb, Method::Gauss, Method::GaussCvar, Method::Pf, Method::Cem, Method::Oracle];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Vnb => "vnb",
            Method::Gauss => "gauss",
            Method::GaussCvar => "gauss-cvar",
            Method::Pf => "pf",
            Method::Cem => "cem",
            Method::Oracle => "oracle",
        }
    }

    /// Whether the method needs the multi-component belief networks.
    pub fn needs_mixture(&self) -> bool {
        matches!(self, Method::Vnb)
    }

    /// Whether the method needs the single-component belief networks.
    pub fn needs_gaussian(&self) -> bool {
        matches!(self, Method::Gauss | Method::GaussCvar | Method::Cem)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL.iter().copied().find(|m| m.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown method '{s}' (valid: {})", valid.join(", "))
        })
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a hash of a label, used to fold names into seeds.
pub fn label_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed derived from a master seed and a sequence of keys.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |h, &k| splitmix64(h ^ k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub regimes: Vec<FrictionRegime>,
    pub objects: Vec<String>,
    pub betas: Vec<f64>,
    pub seeds: usize,
    pub master_seed: u64,
    pub mpc: MpcConfig,
    pub cem: CemConfig,
    pub pf: PfConfig,
    pub weights: CostWeights,
    pub env: EnvOptions,
    pub ema: f64,
    pub timing: bool,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Vnb],
            regimes: vec![FrictionRegime::Nominal],
            objects: object_catalog().into_iter().map(|o| o.name).collect(),
            betas: vec![0.5, 0.9, 0.95, 0.99],
            seeds: 3,
            master_seed: 0,
            mpc: MpcConfig::default(),
            cem: CemConfig::default(),
            pf: PfConfig::default(),
            weights: CostWeights::default(),
            env: EnvOptions::default(),
            ema: 0.3,
            timing: true,
            threads: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PlanningError::InvalidConfig(m));
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.methods.is_empty() || self.regimes.is_empty() || self.objects.is_empty() || self.betas.is_empty() {
            return bad("methods, regimes, objects and betas must be non-empty".into());
        }
        for o in &self.objects {
            if object_by_name(o).is_none() {
                let valid: Vec<String> = object_catalog().into_iter().map(|o| o.name).collect();
                return bad(format!("unknown object '{o}' (valid: {})", valid.join(", ")));
            }
        }
        if !(0.0..=1.0).contains(&self.ema) {
            return bad("ema must lie in [0, 1]".into());
        }
        for &b in &self.betas {
            MpcConfig { beta: b, ..self.mpc.clone() }.validate()?;
        }
        Ok(())
    }
}

/// Trained networks available to the benchmark.
#[derive(Debug, Clone, Default)]
pub struct BenchNets {
    pub mixture: Option<BeliefNets>,
    pub gaussian: Option<BeliefNets>,
}

/// One cell of the benchmark cross-product.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub index: usize,
    pub method: Method,
    pub regime: FrictionRegime,
    pub object: String,
    pub beta: f64,
    pub seed: usize,
    /// Environment seed; shared across methods so every method faces the same instances.
    pub env_seed: u64,
    pub planner_seed: u64,
}

/// Enumerates episodes method-major, then regime, object, beta and seed.
pub fn enumerate_episodes(cfg: &BenchConfig) -> Vec<EpisodeSpec> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for &regime in &cfg.regimes {
            for object in &cfg.objects {
                for &beta in &cfg.betas {
                    for seed in 0..cfg.seeds {
                        let index = out.len();
                        let env_seed = derive_seed(cfg.master_seed, &[label_hash(regime.as_str()), label_hash(object), beta.to_bits(), seed as u64]);
                        let planner_seed = derive_seed(env_seed, &[label_hash(method.as_str())]);
                        out.push(EpisodeSpec { index, method, regime, object: object.clone(), beta, seed, env_seed, planner_seed });
                    }
                }
            }
        }
    }
    out
}

fn missing(what: &str, method: Method) -> PlanningError {
    PlanningError::InvalidConfig(format!("method '{method}' needs {what} belief weights"))
}

/// Runs one episode of the cross-product.
pub fn run_single(spec: &EpisodeSpec, cfg: &BenchConfig, nets: &BenchNets) -> Result<EpisodeRecord> {
    run_single_with_env(spec, cfg, nets).map(|(record, _)| record)
}

/// Runs one episode and also returns the environment in its final state.
pub fn run_single_with_env(spec: &EpisodeSpec, cfg: &BenchConfig, nets: &BenchNets) -> Result<(EpisodeRecord, GraspEnv)> {
    let object = object_by_name(&spec.object).ok_or_else(|| PlanningError::InvalidConfig(format!("unknown object '{}'", spec.object)))?;
    let mut env = GraspEnv::new(object, spec.regime, cfg.env, spec.env_seed);
    let mpc = MpcConfig { beta: spec.beta, ..cfg.mpc.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.planner_seed);
    let gaussian = || nets.gaussian.as_ref().ok_or_else(|| missing("single-component", spec.method));
    let mut ctrl: Box<dyn Controller + '_> = match spec.method {
        Method::Vnb => {
            let n = nets.mixture.as_ref().ok_or_else(|| missing("mixture", spec.method))?;
            Box::new(MixtureController::learned(n, mpc.clone(), cfg.weights, cfg.ema))
        }
        Method::Gauss => Box::new(MixtureController::learned(gaussian()?, MpcConfig { lambda_c: 0.0, ..mpc.clone() }, cfg.weights, cfg.ema)),
        Method::GaussCvar => Box::new(MixtureController::learned(gaussian()?, MpcConfig { lambda_c: 0.5, ..mpc.clone() }, cfg.weights, cfg.ema)),
        Method::Cem => Box::new(CemController { inner: MixtureController::learned(gaussian()?, mpc.clone(), cfg.weights, cfg.ema), cem: cfg.cem.clone() }),
        Method::Pf => Box::new(PfController::new(&env, cfg.pf.clone(), mpc.clone(), cfg.weights, &mut rng)?),
        Method::Oracle => Box::new(MixtureController::oracle(&env, mpc.clone(), cfg.weights)),
    };
    let meta = EpisodeMeta { method: spec.method.as_str().to_string(), beta: spec.beta, episode: spec.index, seed: spec.env_seed };
    let record = run_episode(ctrl.as_mut(), &mut env, &EpisodeConfig::from_mpc(&mpc, cfg.timing), &meta, &mut rng)?;
    drop(ctrl);
    Ok((record, env))
}

/// Worker count from the configuration, capped by `VNB_THREADS` when set.
pub fn worker_count(requested: usize) -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut n = if requested == 0 { avail } else { requested };
    if let Some(cap) = std::env::var("VNB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if cap > 0 {
            n = n.min(cap);
        }
    }
    n.max(1)
}

/// Runs `f` over `items` on a bounded pool, returning results in input order.
pub fn parallel_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.min(items.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every item processed")).collect()
}

/// Runs the full cross-product and returns episode records in enumeration order.
pub fn run_benchmark(cfg: &BenchConfig, nets: &BenchNets) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    for m in &cfg.methods {
        if m.needs_mixture() && nets.mixture.is_none() {
            return Err(missing("mixture", *m));
        }
        if m.needs_gaussian() && nets.gaussian.is_none() {
            return Err(missing("single-component", *m));
        }
    }
    let specs = enumerate_episodes(cfg);
    parallel_map(&specs, worker_count(cfg.threads), |s| run_single(s, cfg, nets)).into_iter().collect()
}

/// Aggregate metrics of one method in one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMetrics {
    pub method: String,
    pub regime: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub robust_rate: f64,
    pub pert_survival: f64,
    pub mean_eps: f64,
    /// Fraction of episodes ending with `ε > 0`.
    pub quality: f64,
    pub p_fail_bel: f64,
    pub p_fail_emp: f64,
    pub abs_dp: f64,
    pub n_surv: usize,
    pub n_test: usize,
    pub mean_time_s: f64,
}

/// Groups records by (method, regime) in order of first appearance and aggregates them.
pub fn aggregate(records: &[EpisodeRecord]) -> Vec<RegimeMetrics> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in records {
        let k = (r.method.clone(), r.regime.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, regime)| {
            let group: Vec<&EpisodeRecord> = records.iter().filter(|r| r.method == method && r.regime == regime).collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            let n_surv: usize = group.iter().map(|r| r.n_surv).sum();
            let n_test: usize = group.iter().map(|r| r.n_test).sum();
            let p_fail_emp = if n_test == 0 { 1.0 } else { 1.0 - n_surv as f64 / n_test as f64 };
            let p_fail_bel = mean(&|r| r.p_fail_bel);
            RegimeMetrics {
                episodes: group.len(),
                success_rate: mean(&|r| r.nominal_success as u8 as f64),
                robust_rate: mean(&|r| r.robust as u8 as f64),
                pert_survival: mean(&|r| r.survival),
                mean_eps: mean(&|r| r.final_eps),
                quality: mean(&|r| (r.final_eps > 0.0) as u8 as f64),
                p_fail_bel,
                p_fail_emp,
                abs_dp: (p_fail_bel - p_fail_emp).abs(),
                n_surv,
                n_test,
                mean_time_s: mean(&|r| r.planning_time_s),
                method,
                regime,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCase {
    pub p_bel: f64,
    pub p_emp: f64,
    pub gap: f64,
    /// Half-width of the 95% interval of the gap from both estimators' binomial errors.
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub trials: usize,
    pub belief_samples: usize,
    pub cases: Vec<CalibrationCase>,
    pub max_gap: f64,
}

/// Random mixture over the latent whose failure probability under the grasp cost is non-trivial.
pub fn random_calibration_belief<R: Rng + ?Sized>(rng: &mut R) -> BeliefParams {
    let k = rng.gen_range(2..=4);
    let mut means = Vec::new();
    let mut log_stds = Vec::new();
    for _ in 0..k {
        let mut m = vec![0.0; LATENT_DIM];
        let mut s = vec![(0.005f64).ln(); LATENT_DIM];
        let slip = rng.gen_range(0.0..12.0);
        let mu = rng.gen_range(0.1..0.8);
        for i in 0..MAX_CONTACTS {
            let o = POSE_DIM + CONTACT_PARAMS * i;
            m[o] = mu;
            s[o] = (0.05f64).ln();
            m[o + 1] = rng.gen_range(0.0..3.0);
            s[o + 1] = 0.0;
            m[o + 2] = 1.0;
            m[o + 3] = slip;
            s[o + 3] = rng.gen_range(0.5f64..3.0).ln();
        }
        means.push(m);
        log_stds.push(s);
    }
    let logits = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    BeliefParams { logits, means, log_stds, temperature: 0.1 }
}

/// Hand with every fingertip in contact around the origin.
pub fn calibration_hand() -> HandModel {
    let env = GraspEnv::new(object_by_name("sphere_small").expect("catalog object"), FrictionRegime::Nominal, EnvOptions::noiseless(), 0);
    let base = (0..MAX_CONTACTS).map(|i| env.rays()[i].dir.map(|d| -0.03 * d)).collect();
    HandModel { base, jacobians: vec![[[0.0; ACTION_DIM]; 3]; MAX_CONTACTS], active: vec![true; MAX_CONTACTS] }
}

/// Synthetic calibration study: the true latent is drawn from the same mixture the belief
/// holds, a trial fails when the realized cost exceeds `τ_f`, and the belief's soft failure
/// probability is compared with the observed failure frequency.
pub fn calibration_experiment(cases: usize, trials: usize, belief_samples: usize, cfg: &MpcConfig, seed: u64) -> Result<CalibrationReport> {
    let hand = calibration_hand();
    let w = CostWeights::default();
    let risk = cfg.risk();
    let mut out = Vec::with_capacity(cases);
    for c in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
        let phi = random_calibration_belief(&mut rng);
        let action: Vec<f64> = (0..ACTION_DIM).map(|_| rng.gen_range(0.0..MAX_RATE)).collect();
        let cost = |theta: &[f64]| grasp_cost_vec(&physical_latent(theta), &action, &hand, &w);
        let bel = sample_belief(&phi, belief_samples, &mut rng)?.iter().map(|s| cost(&s.value)).collect::<std::result::Result<Vec<_>, _>>()?;
        let p_bel = failure_prob_soft(&bel, &risk)?;
        let truth = sample_belief(&phi, trials, &mut rng)?;
        let fails = truth.iter().map(|s| cost(&s.value).map(|v| v > risk.tau_f)).collect::<std::result::Result<Vec<_>, _>>()?;
        let p_emp = fails.iter().filter(|&&f| f).count() as f64 / trials as f64;
        let var = p_bel * (1.0 - p_bel) / belief_samples as f64 + p_emp * (1.0 - p_emp) / trials as f64;
        out.push(CalibrationCase { p_bel, p_emp, gap: (p_bel - p_emp).abs(), ci95: 1.96 * var.sqrt() });
    }
    let max_gap = out.iter().map(|c| c.gap).fold(0.0, f64::max);
    Ok(CalibrationReport { trials, belief_samples, cases: out, max_gap })
}

/// Scripted closing trajectories with ground-truth latents for belief training.
pub fn generate_dataset(objects: &[String], regimes: &[FrictionRegime], episodes: usize, steps: usize, env: EnvOptions, seed: u64) -> Result<Vec<Trajectory>> {
    let patterns = candidate_actions(&[1.0]);
    let mut out = Vec::new();
    for regime in regimes {
        for name in objects {
            let object = object_by_name(name).ok_or_else(|| PlanningError::InvalidConfig(format!("unknown object '{name}'")))?;
            for e in 0..episodes {
                let s = derive_seed(seed, &[label_hash(regime.as_str()), label_hash(name), e as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(s));
                let mut sim = GraspEnv::new(object.clone(), *regime, env, s);
                let rate = rng.gen_range(0.05..0.2);
                let mut pattern = rng.gen_range(0..patterns.len());
                let mut traj = Trajectory { object: name.clone(), regime: regime.as_str().to_string(), steps: Vec::with_capacity(steps) };
                for _ in 0..steps {
                    if rng.gen_bool(0.1) {
                        pattern = rng.gen_range(0..patterns.len());
                    }
                    let action: Vec<f64> = patterns[pattern]
                        .iter()
                        .map(|p| {
                            let n: f64 = rng.sample(StandardNormal);
                            (p * rate + 0.02 * n).clamp(0.0, MAX_RATE)
                        })
                        .collect();
                    let obs = sim.step(&action)?;
                    traj.steps.push(TrajectoryStep { action, obs: obs.as_slice().to_vec(), theta: sim.true_latent() });
                }
                out.push(traj);
            }
        }
    }
    Ok(out)
}
