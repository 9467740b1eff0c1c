//! Property tests for the layout bijection, mixing algebra, and
//! reconciliation soundness.

use fibqkd::montecarlo::{reconcile, RngStream, TrialSampler};
use fibqkd::{
    delta, disturbance, joint_prob_no_eve, joint_prob_with_eve, mix,
    outcome_from_index, outcome_index, EveModel, ProtocolConfig,
};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = ProtocolConfig> {
    (2u32..12, 2u32..8, 0u32..4).prop_map(|(n, m0, extra)| {
        let mut cfg = ProtocolConfig::new(n, m0);
        cfg.pump_hi += extra;
        cfg
    })
}

proptest! {
    #[test]
    fn outcome_index_roundtrips(cfg in arb_config()) {
        cfg.validate().unwrap();
        for i in 1..=cfg.outcome_count() {
            let o = outcome_from_index(i, &cfg).unwrap();
            prop_assert_eq!(outcome_index(o, &cfg).unwrap(), i);
        }
    }

    #[test]
    fn mix_preserves_mass_and_interpolates(eta in 0f64..=1.0) {
        let cfg = ProtocolConfig::new(8, 2);
        let p0 = joint_prob_no_eve(&cfg).unwrap();
        let pe = joint_prob_with_eve(&cfg, &EveModel::default()).unwrap();
        let p = mix(&p0, &pe, eta).unwrap();
        prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        for ((v, a), b) in p.data().iter().zip(p0.data()).zip(pe.data()) {
            prop_assert!(*v >= a.min(*b) - 1e-15 && *v <= a.max(*b) + 1e-15);
        }
    }

    #[test]
    fn disturbance_scales_linearly(eta in 0f64..=1.0) {
        let cfg = ProtocolConfig::new(8, 2);
        let p0 = joint_prob_no_eve(&cfg).unwrap();
        let pe = joint_prob_with_eve(&cfg, &EveModel::default()).unwrap();
        let d1 = disturbance(&delta(&pe, &p0).unwrap());
        let d = disturbance(&delta(&mix(&p0, &pe, eta).unwrap(), &p0).unwrap());
        prop_assert!((d - eta * d1).abs() <= 1e-9);
    }

    /// Reconciliation never decodes a wrong key without an eavesdropper:
    /// every retained trial either agrees exactly or fails openly.
    #[test]
    fn reconciliation_is_sound_without_eve(seed in any::<u64>()) {
        let cfg = ProtocolConfig::new(8, 2);
        let sampler = TrialSampler::new(&cfg).unwrap();
        let mut rng = RngStream { seed, stream_id: 0 }.rng();
        for _ in 0..200 {
            let t = sampler.sample_trial(&mut rng);
            if !t.retained {
                continue;
            }
            let r = reconcile(&t, &cfg).unwrap();
            match (r.alice_key, r.bob_key) {
                (Some(a), Some(b)) => prop_assert_eq!(a, b),
                (None, None) => {} // open failure is acceptable
                other => prop_assert!(false, "half-reconciled trial: {:?}", other),
            }
        }
    }

    /// Larger alphabets keep the code-distance properties that make
    /// decoding unambiguous.
    #[test]
    fn code_distance_properties_hold_everywhere(cfg in arb_config()) {
        use fibqkd::montecarlo::{dd_code, ld_code, ll_bit};
        let lo = cfg.m0.saturating_sub(4).max(1);
        let hi = cfg.m0 + cfg.n + 3;
        for m in lo..=hi {
            prop_assert_ne!(ll_bit(m), ll_bit(m + 2));
            if m >= cfg.m0 {
                prop_assert_ne!(ld_code(m, cfg.m0), ld_code(m + 2, cfg.m0));
                prop_assert_ne!(ld_code(m, cfg.m0), ld_code(m + 4, cfg.m0));
                prop_assert_ne!(ld_code(m + 2, cfg.m0), ld_code(m + 4, cfg.m0));
            }
            let q = [dd_code(m), dd_code(m + 2), dd_code(m + 4), dd_code(m + 6)];
            for i in 0..4 {
                for j in i + 1..4 {
                    prop_assert_ne!(q[i], q[j]);
                }
            }
        }
    }
}
