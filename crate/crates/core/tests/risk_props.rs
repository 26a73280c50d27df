use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnb_core::risk::{hard_cvar, sample_mean, soft_cvar, soft_cvar_at, soft_cvar_grad, empirical_quantile};
use vnb_core::RiskConfig;

fn cfg(beta: f64, kappa: f64) -> RiskConfig {
    RiskConfig { beta, kappa_rho: kappa, ..RiskConfig::default() }
}

#[test]
fn bias_bound_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..100 {
        let scale = rng.gen_range(1.5..5.0);
        let v: Vec<f64> = (0..256).map(|_| scale * rng.gen_range(-3.0f64..3.0).powi(3) / 9.0 + rng.gen::<f64>()).collect();
        let beta = [0.5, 0.9, 0.95][rng.gen_range(0..3)];
        let c = cfg(beta, 5.0);
        let gap = (soft_cvar(&v, &c).unwrap() - hard_cvar(&v, beta).unwrap()).abs();
        assert!(gap <= 2f64.ln() / 5.0 + 0.02, "{gap}");
    }
}

#[test]
fn quadratic_action_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 256;
    let centers: Vec<[f64; 6]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let cost = |a: &[f64], i: usize| weights[i] * a.iter().zip(&centers[i]).map(|(x, c)| (x - c).powi(2)).sum::<f64>();
    let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let c = cfg(0.9, 5.0);
    let vals: Vec<f64> = (0..n).map(|i| cost(&a, i)).collect();
    let grads: Vec<Vec<f64>> =
        (0..n).map(|i| a.iter().zip(&centers[i]).map(|(x, ci)| 2.0 * weights[i] * (x - ci)).collect()).collect();
    let g = soft_cvar_grad(&vals, &grads, &c).unwrap();
    let eta = empirical_quantile(&vals, 0.9).unwrap();
    for j in 0..6 {
        let (mut up, mut dn) = (a.clone(), a.clone());
        up[j] += 1e-5;
        dn[j] -= 1e-5;
        let fu = soft_cvar_at(&(0..n).map(|i| cost(&up, i)).collect::<Vec<_>>(), eta, &c).unwrap();
        let fd = soft_cvar_at(&(0..n).map(|i| cost(&dn, i)).collect::<Vec<_>>(), eta, &c).unwrap();
        let num = (fu - fd) / 2e-5;
        assert!((num - g[j]).abs() <= 1e-4 * num.abs().max(1e-3), "{num} vs {}", g[j]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coherence_and_equivariance(v in prop::collection::vec(-50.0f64..50.0, 1..80), shift in -10.0f64..10.0,
                                  lam in 0.1f64..10.0) {
        let mean = sample_mean(&v).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for &b in &[0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99] {
            let h = hard_cvar(&v, b).unwrap();
            prop_assert!(h >= prev - 1e-9);
            prop_assert!(h >= mean - 1e-9);
            prev = h;
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            prop_assert!((hard_cvar(&shifted, b).unwrap() - h - shift).abs() < 1e-9);
            let scaled: Vec<f64> = v.iter().map(|x| x * lam).collect();
            prop_assert!((hard_cvar(&scaled, b).unwrap() - lam * h).abs() < 1e-9 * lam.max(1.0) * h.abs().max(1.0));
            if b > 0.0 {
                let c = cfg(b, 5.0);
                let s = soft_cvar(&v, &c).unwrap();
                prop_assert!((soft_cvar(&shifted, &c).unwrap() - s - shift).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn surrogate_converges_in_kappa(v in prop::collection::vec(-5.0f64..5.0, 2..200), bi in 0usize..4) {
        let beta = [0.5, 0.9, 0.95, 0.99][bi];
        let h = hard_cvar(&v, beta).unwrap();
        let mut prev = f64::INFINITY;
        for &k in &[5.0, 50.0, 500.0, 5000.0] {
            let gap = (soft_cvar(&v, &cfg(beta, k)).unwrap() - h).abs();
            prop_assert!(gap <= prev + 1e-12);
            prev = gap;
        }
    }
}
