use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnb_core::grasp::{grasp_cost_grad, grasp_cost_grad_theta, grasp_cost_vec, visual_cost};
use vnb_core::{CostWeights, HandModel, LatentState, Observation};

fn random_hand(rng: &mut ChaCha8Rng) -> HandModel {
    let base = (0..5).map(|_| std::array::from_fn(|_| rng.gen_range(-0.12..0.12))).collect();
    let jac = (0..5).map(|_| std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-0.02..0.02)))).collect();
    let active = (0..5).map(|_| rng.gen_bool(0.6)).collect();
    HandModel::new(base, jac, active).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..26).map(|_| rng.gen_range(-0.05..0.05)).collect();
    for i in 0..5 {
        let o = LatentState::contact_offset(i);
        v[o] = rng.gen_range(0.05..1.5);
        v[o + 1] = rng.gen_range(0.0..3.0);
        v[o + 2] = rng.gen_range(0.0..2.0);
        v[o + 3] = rng.gen_range(0.0..20.0);
    }
    v
}

/// Direct transcription of the cost for cross-checking.
fn reference_cost(theta: &[f64], a: &[f64], hand: &HandModel) -> f64 {
    let a_bar = a.iter().sum::<f64>() / 6.0;
    let mut g_close = 0.0;
    for i in 0..5 {
        let mut p = hand.base[i];
        for r in 0..3 {
            for j in 0..6 {
                p[r] += hand.jacobians[i][r][j] * a[j];
            }
        }
        g_close -= ((p[0] - theta[0]).powi(2) + (p[1] - theta[1]).powi(2) + (p[2] - theta[2]).powi(2)).sqrt();
    }
    let active: Vec<usize> = (0..5).filter(|&i| hand.active[i]).collect();
    let mut c = -a_bar - 0.5 * g_close;
    if !active.is_empty() {
        let min_inv = active.iter().map(|&i| 1.0 / theta[6 + 4 * i].max(1e-3)).fold(f64::INFINITY, f64::min);
        c += -2.0 * (0.1 * a_bar - min_inv).max(0.0);
        let mut ctc = 0.0;
        for &i in &active {
            let o = 6 + 4 * i;
            ctc += (-theta[o]).exp() + (-theta[o + 1]).exp() + (1.0 + theta[o + 3].exp()).ln();
        }
        c += ctc / active.len() as f64;
    } else {
        c += 3.0 * (1.0 + 2f64.ln());
    }
    c
}

#[test]
fn thousand_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let w = CostWeights::default();
    for _ in 0..1000 {
        let hand = random_hand(&mut rng);
        let theta = random_theta(&mut rng);
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let c = grasp_cost_vec(&theta, &a, &hand, &w).unwrap();
        assert!((c - reference_cost(&theta, &a, &hand)).abs() < 1e-12);
        let ga = grasp_cost_grad(&theta, &a, &hand, &w).unwrap();
        for j in 0..6 {
            let (mut u, mut d) = (a.clone(), a.clone());
            u[j] += 1e-5;
            d[j] -= 1e-5;
            let fd = (grasp_cost_vec(&theta, &u, &hand, &w).unwrap() - grasp_cost_vec(&theta, &d, &hand, &w).unwrap()) / 2e-5;
            assert!((fd - ga[j]).abs() <= 1e-4 * fd.abs().max(1e-2), "{fd} vs {}", ga[j]);
        }
        let gt = grasp_cost_grad_theta(&theta, &a, &hand, &w).unwrap();
        for j in 0..26 {
            let (mut u, mut d) = (theta.clone(), theta.clone());
            u[j] += 1e-5;
            d[j] -= 1e-5;
            let fd = (grasp_cost_vec(&u, &a, &hand, &w).unwrap() - grasp_cost_vec(&d, &a, &hand, &w).unwrap()) / 2e-5;
            assert!((fd - gt[j]).abs() <= 1e-4 * fd.abs().max(1e-2), "theta {j}: {fd} vs {}", gt[j]);
        }
    }
}

#[test]
fn gradient_is_a_descent_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let w = CostWeights::default();
    for _ in 0..100 {
        let hand = random_hand(&mut rng);
        let theta = random_theta(&mut rng);
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let g = grasp_cost_grad(&theta, &a, &hand, &w).unwrap();
        let stepped: Vec<f64> = a.iter().zip(&g).map(|(x, gi)| x - 1e-4 * gi).collect();
        assert!(grasp_cost_vec(&theta, &stepped, &hand, &w).unwrap() < grasp_cost_vec(&theta, &a, &hand, &w).unwrap());
    }
}

#[test]
fn doubling_friction_lowers_contact_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let w = CostWeights::default();
    let hand = HandModel::new(vec![[0.1, 0.0, 0.0]; 5], vec![[[0.0; 6]; 3]; 5], vec![true; 5]).unwrap();
    let theta = random_theta(&mut rng);
    let mut doubled = theta.clone();
    for i in 0..5 {
        doubled[LatentState::contact_offset(i)] *= 2.0;
    }
    let a = [0.0; 6];
    assert!(grasp_cost_vec(&doubled, &a, &hand, &w).unwrap() < grasp_cost_vec(&theta, &a, &hand, &w).unwrap());
}

proptest! {
    #[test]
    fn visual_cost_matches_reference(tr in 0.0f64..0.5, occ in 0.0f64..1.0, seg in 0.0f64..1.0) {
        let mut v = vec![0.0; 41];
        v[6] = tr;
        v[39] = occ;
        v[40] = seg;
        let obs = Observation::from_vec(v).unwrap();
        let expected = tr + (1.0 + occ.exp()).ln() + (1.0 - seg);
        prop_assert!((visual_cost(&obs, &CostWeights::default()) - expected).abs() < 1e-12);
    }
}
