use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vnb_core::belief::{sample_belief, sample_component};
use vnb_core::grasp::{ACTION_DIM, LATENT_DIM};
use vnb_core::risk::{sample_mean, soft_cvar, soft_cvar_grad};
use vnb_core::{BeliefParams, CostWeights, Observation};
use vnb_planning::planner::{
    gate, mpc_objective, optimize_action_for_component, optimize_on_samples, plan_step, MpcConfig, PlanContext, SequenceCost,
};
use vnb_planning::Result;

/// `offset + Σ_j w_j (a_j − θ_j)² + s·sin(Σ_j θ_j a_j)` on the first action of the sequence.
struct QuadCost {
    w: [f64; ACTION_DIM],
    wiggle: f64,
    offset: f64,
}

impl QuadCost {
    fn plain() -> Self {
        Self { w: [1.0; ACTION_DIM], wiggle: 0.0, offset: 0.0 }
    }
}

impl SequenceCost for QuadCost {
    fn cost(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<f64> {
        let a = &seq[0];
        let dot: f64 = (0..ACTION_DIM).map(|j| theta[j] * a[j]).sum();
        Ok(self.offset + (0..ACTION_DIM).map(|j| self.w[j] * (a[j] - theta[j]).powi(2)).sum::<f64>() + self.wiggle * dot.sin())
    }

    fn grad(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let a = &seq[0];
        let dot: f64 = (0..ACTION_DIM).map(|j| theta[j] * a[j]).sum();
        let mut out = vec![vec![0.0; ACTION_DIM]; seq.len()];
        for j in 0..ACTION_DIM {
            out[0][j] = 2.0 * self.w[j] * (a[j] - theta[j]) + self.wiggle * dot.cos() * theta[j];
        }
        Ok(out)
    }
}

fn gaussian(mean: Vec<f64>, log_std: f64) -> BeliefParams {
    let d = mean.len();
    BeliefParams::gaussian(mean, vec![log_std; d], 1.0).unwrap()
}

fn latent_with_action_target(target: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; LATENT_DIM];
    m[..ACTION_DIM].copy_from_slice(target);
    m
}

#[test]
fn point_component_converges_to_quadratic_minimizer() {
    let target = [0.12, 0.2, 0.03, 0.18, 0.07, 0.1];
    let phi = gaussian(latent_with_action_target(&target), -30.0);
    let cfg = MpcConfig::default();
    let init = vec![vec![0.05; ACTION_DIM]];
    let dist = |a: &[f64]| a.iter().zip(&target).map(|(x, t)| (x - t).powi(2)).sum::<f64>().sqrt();
    let plan = optimize_action_for_component(&phi, &init, &cfg, &QuadCost::plain(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    // Identical samples make the risk objective an increasing function of the distance.
    for w in plan.trace.windows(2) {
        assert!(w[1] < w[0], "{:?}", plan.trace);
    }
    assert!(dist(&plan.actions[0]) < 1e-3 * dist(&init[0]), "{}", dist(&plan.actions[0]));
}

#[test]
fn single_step_matches_risk_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phi = gaussian(latent_with_action_target(&[0.1; ACTION_DIM]), -3.0);
    let samples: Vec<Vec<f64>> = sample_component(&phi, 0, 256, &mut rng).into_iter().map(|(x, _)| x).collect();
    let cost = QuadCost { w: [1.0, 2.0, 0.5, 1.5, 1.0, 0.8], wiggle: 0.3, offset: 0.0 };
    let cfg = MpcConfig { grad_steps: 1, step_size: 0.01, ..MpcConfig::default() };
    let init = vec![vec![0.15, 0.12, 0.14, 0.13, 0.16, 0.11]];
    let plan = optimize_on_samples(&samples, &init, &cfg, &cost).unwrap();
    let values: Vec<f64> = samples.iter().map(|s| cost.cost(s, &init).unwrap()).collect();
    let grads: Vec<Vec<f64>> = samples.iter().map(|s| cost.grad(s, &init).unwrap().remove(0)).collect();
    let g = soft_cvar_grad(&values, &grads, &cfg.risk()).unwrap();
    for j in 0..ACTION_DIM {
        assert!((plan.actions[0][j] - (init[0][j] - 0.01 * g[j])).abs() < 1e-12);
    }
}

#[test]
fn zero_step_size_returns_the_initial_sequence() {
    let phi = gaussian(latent_with_action_target(&[0.2; ACTION_DIM]), -2.0);
    let cfg = MpcConfig { step_size: 0.0, ..MpcConfig::default() };
    let init = vec![vec![0.07; ACTION_DIM]];
    let plan = optimize_action_for_component(&phi, &init, &cfg, &QuadCost::plain(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(plan.actions, init);
}

#[test]
fn non_finite_gradient_aborts_with_initial_sequence() {
    struct Bad;
    impl SequenceCost for Bad {
        fn cost(&self, _: &[f64], _: &[Vec<f64>]) -> Result<f64> {
            Ok(1.0)
        }
        fn grad(&self, _: &[f64], seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
            Ok(vec![vec![f64::NAN; ACTION_DIM]; seq.len()])
        }
    }
    let phi = gaussian(vec![0.0; LATENT_DIM], -1.0);
    let init = vec![vec![0.1; ACTION_DIM]];
    let plan = optimize_action_for_component(&phi, &init, &MpcConfig::default(), &Bad, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(plan.actions, init);
    assert!(plan.aborted.is_some());
}

#[test]
fn objective_blends() {
    let phi = gaussian(latent_with_action_target(&[0.1; ACTION_DIM]), -2.0);
    let obs = Observation::zeros();
    let cost = QuadCost { w: [1.0; ACTION_DIM], wiggle: 0.0, offset: 0.0 };
    let seq = vec![vec![0.2; ACTION_DIM]];
    let w = CostWeights::default();
    let base = MpcConfig { gamma: 0.0, lambda_v: 0.0, ..MpcConfig::default() };
    let eval = |lambda_c: f64| {
        let cfg = MpcConfig { lambda_c, ..base.clone() };
        mpc_objective(&phi, &seq, &obs, &cost, &w, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    };
    let samples = sample_belief(&phi, base.samples, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let values: Vec<f64> = samples.iter().map(|s| cost.cost(&s.value, &seq).unwrap()).collect();
    let mean = sample_mean(&values).unwrap();
    let cvar = soft_cvar(&values, &base.risk()).unwrap();
    assert!((eval(0.0) - mean).abs() < 1e-12);
    assert!((eval(1.0) - cvar).abs() < 1e-12);
    assert!((eval(0.5) - 0.5 * (mean + cvar)).abs() < 1e-12);
    assert!(eval(1.0) >= eval(0.0));
}

fn mixture(rng: &mut ChaCha8Rng, k: usize) -> BeliefParams {
    let logits = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let means = (0..k).map(|_| (0..LATENT_DIM).map(|_| rng.gen_range(0.0..0.25)).collect()).collect();
    let log_stds = (0..k).map(|_| (0..LATENT_DIM).map(|_| rng.gen_range(-4.0..-2.0)).collect()).collect();
    BeliefParams::new(logits, means, log_stds, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn descent_on_fixed_samples(seed in any::<u64>(), wiggle in 0.0f64..2.0, step in 0.005f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = mixture(&mut rng, 1);
        let samples: Vec<Vec<f64>> = sample_component(&phi, 0, 64, &mut rng).into_iter().map(|(x, _)| x).collect();
        let cost = QuadCost { w: std::array::from_fn(|_| rng.gen_range(0.2..3.0)), wiggle, offset: 0.0 };
        let cfg = MpcConfig { step_size: step, samples: 64, ..MpcConfig::default() };
        let init = vec![(0..ACTION_DIM).map(|_| rng.gen_range(0.0..0.25)).collect::<Vec<f64>>()];
        let plan = optimize_on_samples(&samples, &init, &cfg, &cost).unwrap();
        for w in plan.trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(plan.objective <= plan.trace[0]);
        prop_assert!(plan.actions[0].iter().all(|&a| (0.0..=0.25).contains(&a)));
    }

    #[test]
    fn argmin_ignores_constant_cost_shift(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = mixture(&mut rng, 3);
        let obs = Observation::zeros();
        let w = CostWeights::default();
        let cfg = MpcConfig { samples: 64, grad_steps: 5, delta: 1.0, tau_f: 1e6, ..MpcConfig::default() };
        let run = |offset: f64| {
            let cost = QuadCost { w: [1.0; ACTION_DIM], wiggle: 0.5, offset };
            let ctx = PlanContext { belief: &phi, nets: None, hidden: None, obs: &obs, cost: &cost, weights: &w };
            plan_step(&ctx, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        };
        let (a, b) = (run(0.0), run(shift));
        prop_assert_eq!(a.chosen, b.chosen);
    }

    #[test]
    fn gate_is_sound(obj in prop::collection::vec(-10.0f64..10.0, 1..8), p in prop::collection::vec(0.0f64..1.0, 8), delta in 0.0f64..1.0) {
        let p = &p[..obj.len()];
        let (k, flagged) = gate(&obj, p, delta).unwrap();
        if p.iter().any(|&x| x <= delta) {
            prop_assert!(!flagged);
            prop_assert!(p[k] <= delta);
            for i in 0..obj.len() {
                if p[i] <= delta {
                    prop_assert!(obj[k] <= obj[i]);
                }
            }
        } else {
            prop_assert!(flagged);
            prop_assert!(p.iter().all(|&x| p[k] <= x));
        }
    }
}

#[test]
fn chosen_objective_dominates_every_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let phi = mixture(&mut rng, 1);
    let obs = Observation::zeros();
    let w = CostWeights::default();
    let cfg = MpcConfig { samples: 64, gamma: 0.0, delta: 1.0, ..MpcConfig::default() };
    let cost = QuadCost { w: [1.0; ACTION_DIM], wiggle: 1.0, offset: 0.0 };
    let ctx = PlanContext { belief: &phi, nets: None, hidden: None, obs: &obs, cost: &cost, weights: &w };
    let mut plan_rng = ChaCha8Rng::seed_from_u64(10);
    let mut replay = plan_rng.clone();
    let res = plan_step(&ctx, &cfg, &mut plan_rng).unwrap();
    let mut crng = ChaCha8Rng::seed_from_u64(replay.gen());
    let samples: Vec<Vec<f64>> = sample_component(&phi, 0, cfg.samples, &mut crng).into_iter().map(|(x, _)| x).collect();
    for &m in &cfg.multistart {
        let start = optimize_on_samples(&samples, &[vec![m; ACTION_DIM]], &cfg, &cost).unwrap();
        assert!(res.objectives[0] <= start.objective + 1e-12);
    }
}
