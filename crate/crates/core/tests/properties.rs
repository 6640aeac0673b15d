use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventbench::control::{
    argmax_reward, blend_first_actions, mppi_weights, sample_sequences, ActionSequence,
};
use ventbench::env::{reward_action, reward_marker, ActionBounds};
use ventbench::protocols::repair_action;
use ventbench::sim::{self, PatientProfile, Sex, SimParams, VentilatorAction};

fn raw_action() -> impl Strategy<Value = [f64; 6]> {
    (
        0.0..1.0f64,
        1.0..30.0f64,
        0.1..3.0f64,
        1.0..30.0f64,
        1.0..25.0f64,
        0.0..1.0f64,
    )
        .prop_map(|(a, b, c, d, e, f)| [a, b, c, d, e, f])
}

fn action() -> impl Strategy<Value = VentilatorAction> {
    raw_action().prop_map(|r| repair_action(&r).unwrap())
}

fn profile() -> impl Strategy<Value = PatientProfile> {
    (any::<bool>(), 18u32..=65, 140.0..200.0f64, 0.0..=1.0f64).prop_map(|(male, age, h, sev)| {
        let sex = if male { Sex::Male } else { Sex::Female };
        PatientProfile::new(sex, age, h, sev).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn step_preserves_physiological_invariants(
        p in profile(),
        actions in prop::collection::vec(action(), 1..6),
        dt in 1.0..60.0f64,
    ) {
        let params = SimParams::default();
        let mut s = sim::derive_physiology(&p, &params).unwrap();
        for a in &actions {
            s = sim::step(&params, &s, a, dt);
            let m = &s.last_mech;
            prop_assert!(a.peep <= m.pplat + 1e-12);
            prop_assert!(m.pplat <= a.pinsp + 1e-12);
            prop_assert!(m.vt >= 0.0);
            let spo2 = sim::severinghaus(s.pao2).unwrap();
            prop_assert!(spo2 > 0.0 && spo2 < 1.0);
            prop_assert!((0.0..=1.0).contains(&s.severity));
            prop_assert!(sim::observe(&params, &s, a).is_finite());
            prop_assert_eq!(m.minute_vent, m.vt * a.rr / 1000.0);
        }
    }

    #[test]
    fn severinghaus_is_strictly_increasing(a in 0.1..800.0f64, b in 0.1..800.0f64) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(sim::severinghaus(lo).unwrap() < sim::severinghaus(hi).unwrap());
    }

    #[test]
    fn ph_falls_as_paco2_rises(a in 10.0..85.0f64, b in 10.0..85.0f64, hco3 in 15.0..35.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p = SimParams { ph_min: 0.0, ph_max: 14.0, ..SimParams::default() };
        prop_assert!(sim::blood_ph(&p, hi, hco3) < sim::blood_ph(&p, lo, hco3));
    }

    #[test]
    fn tidal_volume_grows_with_driving_pressure(
        peep in 1.0..10.0f64,
        d1 in 0.0..20.0f64,
        d2 in 0.0..20.0f64,
        tinsp in 0.1..2.0f64,
        c in 10.0..100.0f64,
        r in 5.0..20.0f64,
    ) {
        let params = SimParams::default();
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let mk = |d: f64| VentilatorAction { fio2: 0.5, pinsp: peep + d, tinsp, rr: 10.0, peep, slope: 0.5 };
        let v_lo = sim::lung_mechanics(&mk(lo), c, r, 70.0, &params).vt;
        let v_hi = sim::lung_mechanics(&mk(hi), c, r, 70.0, &params).vt;
        prop_assert!(v_lo <= v_hi);
    }

    #[test]
    fn marker_reward_is_continuous_and_peaks_inside(
        lb in -10.0..10.0f64,
        width in 0.01..10.0f64,
        r_in in 0.01..2.0f64,
        r_out in 0.0..5.0f64,
        d1 in 0.0..5.0f64,
        d2 in 0.0..5.0f64,
    ) {
        let ub = lb + width;
        let f = |x: f64| reward_marker(x, r_in, r_out, lb, ub);
        let eps = 1e-9;
        prop_assert!((f(lb - eps) - f(lb)).abs() <= r_out * eps + 1e-12);
        prop_assert!((f(ub + eps) - f(ub)).abs() <= r_out * eps + 1e-12);
        let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(f(lb - far) <= f(lb - near));
        prop_assert!(f(ub + far) <= f(ub + near));
        prop_assert!(f(lb - near) <= r_in && f(ub + near) <= r_in);
    }

    #[test]
    fn action_penalty_is_bounded(a in action(), w in prop::array::uniform6(0.0..2.0f64)) {
        let b = ActionBounds { weights: w, ..ActionBounds::default() };
        let r = reward_action(&a, &b);
        prop_assert!(r <= 0.0);
        prop_assert!(r >= -w.iter().sum::<f64>() - 1e-12);
    }

    #[test]
    fn repair_is_idempotent_and_valid(raw in prop::array::uniform6(-50.0..50.0f64)) {
        let a = repair_action(&raw).unwrap();
        prop_assert_eq!(repair_action(&a.to_array()).unwrap(), a);
        prop_assert!(a.peep < a.pinsp);
        prop_assert!(a.tinsp < 60.0 / a.rr);
        let b = ActionBounds::default();
        for (i, v) in a.to_array().iter().enumerate() {
            prop_assert!(*v >= b.lb[i] && *v <= b.ub[i]);
        }
    }

    #[test]
    fn mppi_weights_normalize_and_ignore_shifts(
        rewards in prop::collection::vec(-50.0..50.0f64, 1..40),
        lambda in 0.0..20.0f64,
        shift in -1e3..1e3f64,
    ) {
        let w = mppi_weights(&rewards, lambda).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = rewards.iter().map(|r| r + shift).collect();
        let ws = mppi_weights(&shifted, lambda).unwrap();
        for (x, y) in w.iter().zip(&ws) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn mppi_tends_to_argmax(seed in any::<u64>(), k in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seqs: Vec<ActionSequence> = sample_sequences(k, 1, &mut rng);
        let rewards: Vec<f64> = (0..k).map(|i| (i as f64 * 0.37 + seed as f64 * 1e-3).sin() * 10.0).collect();
        let best = argmax_reward(&rewards).unwrap();
        let target = seqs[best].first().to_array();
        let spread = seqs
            .iter()
            .map(|q| q.first().to_array().iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let mut prev_best_weight = 0.0;
        for lambda in [1.0, 10.0, 100.0, 1e6] {
            let w = mppi_weights(&rewards, lambda).unwrap();
            let blend = blend_first_actions(&seqs, &w);
            let dist = blend.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            // The distance is bounded by the weight left off the best sample,
            // and that weight only shrinks as lambda grows.
            prop_assert!(w[best] >= prev_best_weight);
            prop_assert!(dist <= (1.0 - w[best]) * spread + 1e-9);
            prev_best_weight = w[best];
            // Blending stays inside the box spanned by the sampled first actions.
            for i in 0..6 {
                let lo = seqs.iter().map(|q| q.first().to_array()[i]).fold(f64::INFINITY, f64::min);
                let hi = seqs.iter().map(|q| q.first().to_array()[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(blend[i] >= lo - 1e-9 && blend[i] <= hi + 1e-9);
            }
        }
    }
}
