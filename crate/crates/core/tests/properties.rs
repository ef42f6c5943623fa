mod common;

use common::{apply_random_locals, nearby};
use mbqc_core::criteria::{
    check_approx_stoch, decide, descriptor, stability_frontier, Accuracy, Decision,
};
use mbqc_core::epsilon::{
    eps_geo_closed_form, eps_geo_star_lower, eps_geo_variational, DistanceKind,
};
use mbqc_core::monotones::{
    entropic_entanglement_width, geometric_measure, product_overlap, product_overlap_seeded,
    schmidt_rank_width, Family, Measure, OptimizerSettings, DEFAULT_RANK_TOL,
};
use mbqc_core::qstate::{
    density_matrix, fidelity, trace_distance, trace_distance_dense, Ensemble, PureState, C64,
};
use mbqc_core::rng::stream;
use proptest::prelude::*;
use rand::Rng;

fn random_ensemble(n: usize, k: usize, seed: u64) -> Ensemble {
    let mut rng = stream(seed, 17);
    let terms = (0..k)
        .map(|_| {
            (
                rng.random::<f64>() + 1e-3,
                PureState::random(n, &mut rng).unwrap(),
            )
        })
        .collect();
    Ensemble::from_weights(terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pure_distance_matches_fidelity(n in 1usize..5, seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let a = PureState::random(n, &mut rng).unwrap();
        let b = PureState::random(n, &mut rng).unwrap();
        let d = trace_distance(&a, &b).unwrap();
        prop_assert!((d - (1.0 - a.overlap(&b)).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn distance_is_a_metric(n in 1usize..4, seed in any::<u64>()) {
        let a = random_ensemble(n, 3, seed);
        let b = random_ensemble(n, 2, seed ^ 1);
        let c = random_ensemble(n, 4, seed ^ 2);
        let ab = trace_distance(&a, &b).unwrap();
        let ba = trace_distance(&b, &a).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-7);
    }

    #[test]
    fn span_distance_matches_dense(n in 1usize..4, seed in any::<u64>()) {
        let a = random_ensemble(n, 3, seed);
        let b = random_ensemble(n, 3, seed.wrapping_add(9));
        let span = trace_distance(&a, &b).unwrap();
        let dense = trace_distance_dense(&density_matrix(&a).unwrap(), &density_matrix(&b).unwrap()).unwrap();
        prop_assert!((span - dense).abs() < 1e-9);
    }

    #[test]
    fn distance_bounds_fidelity(n in 1usize..4, seed in any::<u64>()) {
        let rho = random_ensemble(n, 3, seed);
        let psi = PureState::random(n, &mut stream(seed, 3)).unwrap();
        let f = fidelity(&rho, &psi).unwrap();
        let d = trace_distance(&rho, &psi).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        // D ≤ ε against a pure reference implies F ≥ 1 − ε
        prop_assert!(f >= 1.0 - d - 1e-10);
    }

    #[test]
    fn geometric_measure_lu_invariant(n in 2usize..5, seed in any::<u64>()) {
        let s = OptimizerSettings::default();
        let mut rng = stream(seed, 4);
        let psi = PureState::random(n, &mut rng).unwrap();
        let a = geometric_measure(&psi, &s).unwrap().value;
        let b = geometric_measure(&apply_random_locals(&psi, &mut rng), &s).unwrap().value;
        prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
    }

    #[test]
    fn overlap_dominates_supplied_witness(n in 1usize..5, seed in any::<u64>()) {
        let mut rng = stream(seed, 5);
        let psi = PureState::random(n, &mut rng).unwrap();
        let witness: Vec<[C64; 2]> = (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(0.0..3.2);
                [C64::new(t.cos(), 0.0), C64::from_polar(t.sin(), rng.random_range(0.0..6.3))]
            })
            .collect();
        let w_val = psi.overlap(&PureState::product(&witness).unwrap());
        let r = product_overlap_seeded(&psi, &OptimizerSettings { restarts: 2, ..Default::default() }, &[witness]).unwrap();
        prop_assert!(r.value >= w_val - 1e-12);
        prop_assert!(r.value <= 1.0 + 1e-12);
        prop_assert!(product_overlap(&psi, &OptimizerSettings::default()).unwrap().value <= 1.0 + 1e-12);
    }

    #[test]
    fn rank_width_bounds_entropic_width(n in 3usize..7, seed in any::<u64>()) {
        let psi = PureState::random(n, &mut stream(seed, 6)).unwrap();
        let chi = schmidt_rank_width(&psi, DEFAULT_RANK_TOL).unwrap().value;
        let ewd = entropic_entanglement_width(&psi).unwrap().value;
        prop_assert!(chi >= ewd);
    }

    #[test]
    fn extend_with_zeros_keeps_measures(n in 2usize..5, k in 1usize..3, seed in any::<u64>()) {
        let psi = PureState::random(n, &mut stream(seed, 7)).unwrap();
        let ext = psi.extend_with_zeros(k);
        let s = OptimizerSettings::default();
        prop_assert!((geometric_measure(&psi, &s).unwrap().value - geometric_measure(&ext, &s).unwrap().value).abs() < 1e-8);
        prop_assert_eq!(
            schmidt_rank_width(&psi, DEFAULT_RANK_TOL).unwrap().value,
            schmidt_rank_width(&ext, DEFAULT_RANK_TOL).unwrap().value
        );
    }

    #[test]
    fn variational_dominates_closed_form(eg in 0.01f64..=1.0, log_eta in -12.0f64..-0.36) {
        let eta = 10f64.powf(log_eta);
        let v = eps_geo_variational(eg, eta).unwrap();
        let c = eps_geo_closed_form(eg, eta).unwrap();
        prop_assert!(v.value >= c.value - 1e-12);
        prop_assert!(v.value <= eg);
        prop_assert!(v.warning.is_none());
    }

    #[test]
    fn star_bound_decreasing(a in 1e-9f64..0.2, b in 1e-9f64..0.2) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(eps_geo_star_lower(lo).unwrap().value >= eps_geo_star_lower(hi).unwrap().value);
    }

    #[test]
    fn raising_family_value_never_rules_out(f in 0.0f64..2.0, bump in 0.0f64..1.0, r in 0.0f64..2.0) {
        if decide(f, r) == Decision::NotRuledOut {
            prop_assert_eq!(decide(f + bump, r), Decision::NotRuledOut);
        }
        if decide(f, r) == Decision::RuledOut {
            prop_assert_eq!(decide(f - bump, r), Decision::RuledOut);
        }
    }

    #[test]
    fn larger_delta_never_rules_out(log_eta in -6.0f64..-0.4, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
        let eta = 10f64.powf(log_eta);
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        for family in [Family::W, Family::Ghz, Family::Product, Family::Cluster2d] {
            let d = descriptor(family);
            let a = check_approx_stoch(&d, Accuracy::Eta(eta), lo, Measure::Geometric).unwrap();
            let b = check_approx_stoch(&d, Accuracy::Eta(eta), hi, Measure::Geometric).unwrap();
            if a.decision == Decision::NotRuledOut {
                prop_assert_eq!(b.decision, Decision::NotRuledOut);
            }
            prop_assert_eq!(a.decision == Decision::RuledOut, a.family_value < a.required_value);
        }
    }

    #[test]
    fn frontier_is_non_increasing(eps in 0.0f64..0.3, delta in 0.0f64..0.3, mu in 0.0f64..0.3, bures in any::<bool>()) {
        let kind = if bures { DistanceKind::Bures } else { DistanceKind::Trace };
        let f = stability_frontier(eps, delta, mu, kind, 40).unwrap();
        prop_assert!(f.points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15 && w[1].0 >= w[0].0));
        if !bures {
            for &(e, d) in &f.points {
                if d < 1.0 {
                    prop_assert!((e * d - (eps + delta + mu)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn json_round_trip(n in 1usize..5, seed in any::<u64>()) {
        let psi = PureState::random(n, &mut stream(seed, 8)).unwrap();
        let back = PureState::from_json(&psi.to_json().unwrap()).unwrap();
        prop_assert_eq!(psi, back);
    }

    #[test]
    fn nearby_states_have_close_measures(n in 2usize..4, t in 1e-4f64..0.3, seed in any::<u64>()) {
        let mut rng = stream(seed, 10);
        let psi = PureState::random(n, &mut rng).unwrap();
        let tilde = nearby(&psi, t, &mut rng);
        let r = mbqc_core::epsilon::lemma_lipschitz_check(&psi, &tilde, &OptimizerSettings::default()).unwrap();
        prop_assert!(r.holds);
    }
}
