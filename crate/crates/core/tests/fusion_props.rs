use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnb_core::fusion::{cholesky, covariance_intersect, icp_score, spd_inverse, IcpScoreInputs, Mat6};
use vnb_core::PoseHypothesis;

fn random_spd(rng: &mut ChaCha8Rng) -> Mat6<f64> {
    let a: Mat6<f64> = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
    let mut m = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            m[i][j] = (0..6).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
        }
    }
    m
}

fn hyp(rng: &mut ChaCha8Rng) -> PoseHypothesis {
    PoseHypothesis { pose: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)), covariance: random_spd(rng) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fused_precision_is_the_convex_combination(seed in any::<u64>(), omega in 0.01f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (hyp(&mut rng), hyp(&mut rng));
        let f = covariance_intersect(&a, &b, omega).unwrap();
        prop_assert!(cholesky(&f.covariance).is_ok());
        let pf = spd_inverse(&f.covariance).unwrap();
        let pa = spd_inverse(&a.covariance).unwrap();
        let pb = spd_inverse(&b.covariance).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expected = omega * pa[i][j] + (1.0 - omega) * pb[i][j];
                prop_assert!((pf[i][j] - expected).abs() < 1e-10 * expected.abs().max(1.0));
            }
        }
        let g = covariance_intersect(&b, &a, 1.0 - omega).unwrap();
        for i in 0..6 {
            prop_assert!((f.pose[i] - g.pose[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn icp_score_monotone(fit in 0.0f64..0.9, rmse in 0.0f64..1.0, d in 0.001f64..0.1) {
        let base = icp_score(&IcpScoreInputs::new(fit, rmse)).unwrap();
        prop_assert!(icp_score(&IcpScoreInputs::new(fit + d, rmse)).unwrap() > base);
        prop_assert!(icp_score(&IcpScoreInputs::new(fit, rmse + d)).unwrap() < base);
    }
}
