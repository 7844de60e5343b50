use lbgame_markov::{
    build_transition, evaluate, scenario_sweep, ChainPolicy, Preset, ScenarioRow, ScenarioSetup,
};
use proptest::prelude::*;

fn metric(rows: &[ScenarioRow], policy: ChainPolicy, preset: Preset) -> f64 {
    rows.iter()
        .find(|r| r.policy == policy && r.preset == preset)
        .unwrap()
        .weighted_service_duration
}

#[test]
fn ideal_preset_ranks_sed_and_wcmp_first() {
    let rows = scenario_sweep(&ScenarioSetup::default(), &Preset::ALL).unwrap();
    assert_eq!(rows.len(), 16);
    let mut ideal: Vec<(f64, ChainPolicy)> = ChainPolicy::ALL
        .iter()
        .map(|&p| (metric(&rows, p, Preset::Ideal), p))
        .collect();
    ideal.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best: Vec<ChainPolicy> = ideal.iter().take(2).map(|x| x.1).collect();
    assert!(best.contains(&ChainPolicy::Sed) && best.contains(&ChainPolicy::Wcmp), "{ideal:?}");

    for p in ChainPolicy::ALL {
        let a = metric(&rows, p, Preset::Ideal);
        let b = metric(&rows, p, Preset::HalfObserved);
        let c = metric(&rows, p, Preset::ThirdObserved);
        assert!(a <= b + 1e-12 && b <= c + 1e-12, "{p:?}: {a} {b} {c}");
    }
    assert!(
        metric(&rows, ChainPolicy::Wcmp, Preset::Misconfigured) > metric(&rows, ChainPolicy::Wcmp, Preset::Ideal)
    );
}

#[test]
fn truncation_audit() {
    for q in [20usize, 30] {
        let small = ScenarioSetup { queue_cap: q, ..Default::default() };
        let large = ScenarioSetup { queue_cap: q + 10, ..Default::default() };
        for policy in ChainPolicy::ALL {
            for preset in Preset::ALL {
                let a = evaluate(&small.config::<f64>(policy, preset), 1e-12).unwrap();
                let b = evaluate(&large.config::<f64>(policy, preset), 1e-12).unwrap();
                assert!((a - b).abs() <= 1e-3 * b, "{policy:?}/{preset:?} Q={q}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn swap_symmetry() {
    // Relabelling the servers (speeds and weights together) leaves the metric unchanged.
    let setup = ScenarioSetup { queue_cap: 12, ..Default::default() };
    for policy in ChainPolicy::ALL {
        for preset in Preset::ALL {
            let cfg = setup.config::<f64>(policy, preset);
            let mut swapped = cfg.clone();
            swapped.service_rates.swap(0, 1);
            swapped.weights.swap(0, 1);
            let a = evaluate(&cfg, 1e-13).unwrap();
            let b = evaluate(&swapped, 1e-13).unwrap();
            assert!((a - b).abs() < 1e-9 * a.max(1.0), "{policy:?}/{preset:?}: {a} vs {b}");
        }
    }
}

proptest! {
    #[test]
    fn rows_are_stochastic_and_mass_is_conserved(
        lambda in 0.0f64..0.3, gamma in 0.0f64..0.2, v1 in 0.0f64..0.25, v2 in 0.0f64..0.25,
        w1 in 0.1f64..4.0, w2 in 0.1f64..4.0, q in 1usize..8, pol in 0usize..4,
    ) {
        let cfg = lbgame_markov::ChainConfig {
            queue_cap: q,
            observed_rate: lambda,
            unobserved_rate: gamma,
            service_rates: [v1, v2],
            policy: ChainPolicy::ALL[pol],
            weights: [w1, w2],
        };
        let op = build_transition(&cfg).unwrap();
        for s in 0..op.states() {
            prop_assert!((op.row_sum(s) - 1.0).abs() < 1e-12);
            prop_assert!(op.row(s).iter().all(|(_, p)| *p >= 0.0));
        }
        let mut dist = vec![1.0 / op.states() as f64; op.states()];
        let mut next = vec![0.0; op.states()];
        for _ in 0..50 {
            op.apply(&dist, &mut next);
            std::mem::swap(&mut dist, &mut next);
            prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
