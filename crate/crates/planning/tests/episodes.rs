use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vnb_core::{BeliefParams, CostWeights};
use vnb_planning::baselines::{gauss_cvar_mpc_step, gauss_mpc_step};
use vnb_planning::bench::{enumerate_episodes, run_single, BenchConfig, BenchNets, Method};
use vnb_planning::episode::{run_episode, EpisodeConfig, EpisodeMeta, MixtureController};
use vnb_planning::planner::{GraspSequenceCost, MpcConfig, PlanContext};
use vnb_planning::sim::{hand_model_from_obs, object_by_name, EnvOptions, FrictionRegime, GraspEnv, MAX_RATE};

fn meta() -> EpisodeMeta {
    EpisodeMeta { method: "oracle".into(), beta: 0.9, episode: 0, seed: 0 }
}

fn sphere_env() -> GraspEnv {
    GraspEnv::new(object_by_name("sphere_small").unwrap(), FrictionRegime::Nominal, EnvOptions::noiseless(), 17)
}

#[test]
fn toy_episode_reaches_force_closure() {
    let mut env = sphere_env();
    let cfg = MpcConfig::default();
    let mut ctrl = MixtureController::oracle(&env, cfg.clone(), CostWeights::default());
    let rec = run_episode(&mut ctrl, &mut env, &EpisodeConfig::from_mpc(&cfg, false), &meta(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(rec.steps.len() <= 30, "{} steps", rec.steps.len());
    assert!(rec.final_eps > 0.0);
    assert!(rec.terminated_by_quality);
}

#[test]
fn step_limit_of_one_plans_once() {
    let mut env = sphere_env();
    let cfg = MpcConfig { t_max: 1, ..MpcConfig::default() };
    let mut ctrl = MixtureController::oracle(&env, cfg.clone(), CostWeights::default());
    let rec = run_episode(&mut ctrl, &mut env, &EpisodeConfig::from_mpc(&cfg, false), &meta(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(rec.steps.len(), 1);
}

#[test]
fn closed_grasp_executes_nothing() {
    let mut env = sphere_env();
    let cfg = MpcConfig::default();
    for _ in 0..200 {
        if env.epsilon() >= cfg.eps_des {
            break;
        }
        env.step(&[MAX_RATE; 6]).unwrap();
    }
    assert!(env.epsilon() >= cfg.eps_des);
    let mut ctrl = MixtureController::oracle(&env, cfg.clone(), CostWeights::default());
    let rec = run_episode(&mut ctrl, &mut env, &EpisodeConfig::from_mpc(&cfg, false), &meta(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert!(rec.steps.is_empty());
    assert!(rec.terminated_by_quality);
}

#[test]
fn untimed_episodes_are_reproducible() {
    let cfg = BenchConfig {
        methods: vec![Method::Oracle, Method::Pf],
        objects: vec!["box_small".into()],
        betas: vec![0.9],
        seeds: 1,
        timing: false,
        mpc: MpcConfig { t_max: 8, ..MpcConfig::default() },
        ..BenchConfig::default()
    };
    let nets = BenchNets::default();
    for spec in enumerate_episodes(&cfg) {
        let a = run_single(&spec, &cfg, &nets).unwrap();
        let b = run_single(&spec, &cfg, &nets).unwrap();
        assert_eq!(a.to_json_line().unwrap(), b.to_json_line().unwrap());
        assert!(a.steps.iter().all(|s| s.plan_us == 0 && s.update_us == 0));
    }
}

#[test]
fn gauss_and_gauss_cvar_mostly_agree() {
    let mut env = GraspEnv::new(object_by_name("cylinder_small").unwrap(), FrictionRegime::Nominal, EnvOptions::default(), 23);
    let cfg = MpcConfig { samples: 128, ..MpcConfig::default() };
    let w = CostWeights::default();
    let (mut same, mut total) = (0, 0);
    let mut obs = env.observe();
    for t in 0..20 {
        let theta = env.true_latent();
        let belief = BeliefParams::gaussian(theta.clone(), vec![-2.5; theta.len()], 1.0).unwrap();
        let cost = GraspSequenceCost::new(hand_model_from_obs(&obs).unwrap(), w);
        let ctx = PlanContext { belief: &belief, nets: None, hidden: None, obs: &obs, cost: &cost, weights: &w };
        let a = gauss_mpc_step(&ctx, &cfg, &mut ChaCha8Rng::seed_from_u64(t)).unwrap();
        let b = gauss_cvar_mpc_step(&ctx, &cfg, &mut ChaCha8Rng::seed_from_u64(t)).unwrap();
        total += 1;
        same += a.action.iter().zip(&b.action).all(|(x, y)| (x - y).abs() < 1e-6) as usize;
        obs = env.step(&a.action).unwrap();
        if env.epsilon() >= cfg.eps_des {
            break;
        }
    }
    assert!(same as f64 >= 0.8 * total as f64, "{same}/{total}");
}
