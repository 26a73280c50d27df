use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnb_core::Contact;
use vnb_core::grasp::{
    build_wrench_space, contact_frame, ferrari_canny_eps, force_closure_certificate, rotate, tactile_quality_proxy,
    ContactFrame, DEFAULT_EDGES,
};
use vnb_core::oracles::sampled_eps;

fn random_contacts(rng: &mut ChaCha8Rng, n: usize, mu: f64) -> Vec<Contact> {
    (0..n)
        .map(|_| {
            let mut p = [0.0_f64; 3];
            for v in p.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let p = p.map(|v| v / norm);
            Contact::toward(p, [0.0; 3], mu, 1.0).unwrap()
        })
        .collect()
}

#[test]
fn antipodal_pair_matches_sampling_oracle() {
    let a = Contact::toward([1.0, 0.0, 0.0], [0.0; 3], 0.5, 1.0).unwrap();
    let b = Contact::toward([-1.0, 0.0, 0.0], [0.0; 3], 0.5, 1.0).unwrap();
    let ws = build_wrench_space(&[a, b], [0.0; 3], 8).unwrap();
    let eps = ferrari_canny_eps(&ws).unwrap();
    let oracle = sampled_eps(&ws.wrenches, 100_000, &mut ChaCha8Rng::seed_from_u64(1));
    assert!((eps - oracle).abs() < 1e-3, "{eps} vs {oracle}");
}

#[test]
fn three_finger_proxy_matches_oracle() {
    let tips: Vec<[f64; 3]> = (0..3)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
            [a.cos(), a.sin(), 0.0]
        })
        .collect();
    let eps = tactile_quality_proxy(&tips, [0.0; 3]).unwrap();
    let contacts: Vec<Contact> = tips.iter().map(|&p| Contact::toward(p, [0.0; 3], 0.5, 1.0).unwrap()).collect();
    let ws = build_wrench_space(&contacts, [0.0; 3], DEFAULT_EDGES).unwrap();
    let oracle = sampled_eps(&ws.wrenches, 100_000, &mut ChaCha8Rng::seed_from_u64(2));
    assert!(eps > 0.0);
    assert!((eps - oracle).abs() < 1e-3, "{eps} vs {oracle}");
}

#[test]
fn random_configurations_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..10 {
        let n = 2 + trial % 3;
        let mu = rng.gen_range(0.2..1.0);
        let contacts = random_contacts(&mut rng, n, mu);
        let ws = build_wrench_space(&contacts, [0.0; 3], 8).unwrap();
        let eps = ferrari_canny_eps(&ws).unwrap();
        let oracle = sampled_eps(&ws.wrenches, 20_000, &mut rng);
        assert!((eps - oracle).abs() < 1e-3, "trial {trial}: {eps} vs {oracle}");
        assert_eq!(eps > 1e-9, oracle > 1e-9, "trial {trial}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_invariance(seed in any::<u64>(), axis in prop::array::uniform3(-2.0f64..2.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..5);
        let contacts = random_contacts(&mut rng, n, 0.6);
        let eps: f64 = ferrari_canny_eps(&build_wrench_space(&contacts, [0.0; 3], 8).unwrap()).unwrap();
        let rotated: Vec<Contact> = contacts
            .iter()
            .map(|c| {
                let frame = ContactFrame {
                    normal: rotate(axis, c.frame.normal),
                    t1: rotate(axis, c.frame.t1),
                    t2: rotate(axis, c.frame.t2),
                };
                Contact { position: rotate(axis, c.position), normal: frame.normal, frame, ..*c }
            })
            .collect();
        let eps_r = ferrari_canny_eps(&build_wrench_space(&rotated, [0.0; 3], 8).unwrap()).unwrap();
        prop_assert!((eps - eps_r).abs() < 1e-9, "{} vs {}", eps, eps_r);
    }

    #[test]
    fn friction_monotonicity(seed in any::<u64>(), mu in 0.05f64..1.0, extra in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..5);
        let base = random_contacts(&mut rng, n, mu);
        let wider: Vec<Contact> = base.iter().map(|c| Contact { mu: c.mu + extra, ..*c }).collect();
        let e0 = ferrari_canny_eps(&build_wrench_space(&base, [0.0; 3], 8).unwrap()).unwrap();
        let e1 = ferrari_canny_eps(&build_wrench_space(&wider, [0.0; 3], 8).unwrap()).unwrap();
        prop_assert!(e1 >= e0 - 1e-9, "{} -> {}", e0, e1);
    }

    #[test]
    fn closure_has_certificate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..5);
        let contacts = random_contacts(&mut rng, n, 0.8);
        let ws = build_wrench_space(&contacts, [0.0; 3], 8).unwrap();
        if ferrari_canny_eps(&ws).unwrap() > 1e-9 {
            prop_assert!(force_closure_certificate(&ws));
        }
    }

    #[test]
    fn frames_are_orthonormal(p in prop::array::uniform3(-3.0f64..3.0)) {
        prop_assume!(p.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let f = contact_frame(p, [0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        let d = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        prop_assert!((d(f.normal, f.normal) - 1.0).abs() < 1e-12);
        prop_assert!(d(f.normal, f.t1).abs() < 1e-12 && d(f.normal, f.t2).abs() < 1e-12 && d(f.t1, f.t2).abs() < 1e-12);
    }
}
