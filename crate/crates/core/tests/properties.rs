mod common;

use common::{random_spec, Limits, SMALL};
use deadline_mdp::bundled::fig6;
use deadline_mdp::sim::truncate::{truncate_link, truncate_peak, Proposal, LIMIT_SLACK};
use deadline_mdp::{
    evaluate, occupation_measure, parse_spec, run_sim, solve_packet_dp, PolicyImpl, PolicyKind, PolicyTable,
    PriceVector, ProblemSpec,
};
use proptest::prelude::*;

const MID: Limits = Limits {
    max_nodes: 5,
    max_flows: 3,
    max_tau: 4,
    max_options: 2,
    link_caps: true,
};

fn greedy_table(spec: &ProblemSpec, price: f64) -> PolicyTable {
    let pv = PriceVector::nodal(vec![price; spec.num_nodes]);
    PolicyTable {
        flows: (0..spec.flows.len())
            .map(|f| solve_packet_dp(spec, f, &pv).unwrap().greedy_policy())
            .collect(),
    }
}

fn proposal_strategy() -> impl Strategy<Value = Vec<Proposal>> {
    prop::collection::vec((0usize..3, 0usize..4, 1u32..6, 0.1f64..2.0, 0.1f64..3.0), 0..25).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(k, (node, link, ttg, size, energy))| Proposal {
                uid: k as u64,
                node,
                link,
                option: 0,
                ttg,
                size,
                energy,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packet_mass_is_conserved(seed in 0u64..10_000, price in 0.0f64..2.0) {
        let spec = random_spec(seed, &MID);
        let table = greedy_table(&spec, price);
        for f in 0..spec.flows.len() {
            let occ = occupation_measure(&spec, f, &table).unwrap();
            let total = occ.total_delivered() + occ.dropped;
            prop_assert!((total - 1.0).abs() < 1e-12, "{}", total);
            prop_assert!(occ.q.iter().flatten().all(|&x| (-1e-15..=1.0 + 1e-12).contains(&x)));
        }
    }

    #[test]
    fn performance_is_linear_in_rates(seed in 0u64..10_000, c in 0.1f64..3.0) {
        let spec = random_spec(seed, &MID);
        let table = greedy_table(&spec, 0.2);
        let base = evaluate(&spec, &table).unwrap();
        let mut scaled = spec.clone();
        for f in &mut scaled.flows {
            f.rate *= c;
        }
        let s = evaluate(&scaled, &table).unwrap();
        prop_assert!((s.objective - c * base.objective).abs() < 1e-9 * (1.0 + s.objective.abs()));
        for (a, b) in s.node_power.iter().zip(&base.node_power) {
            prop_assert!((a - c * b).abs() < 1e-9 * (1.0 + a.abs()));
        }
        for (a, b) in s.link_packets.iter().zip(&base.link_packets) {
            prop_assert!((a - c * b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn dp_values_decrease_with_prices(seed in 0u64..10_000, lo in 0.0f64..1.0, extra in 0.0f64..1.0) {
        let spec = random_spec(seed, &SMALL);
        let a = PriceVector::nodal(vec![lo; spec.num_nodes]);
        let b = PriceVector::nodal(vec![lo + extra; spec.num_nodes]);
        for f in 0..spec.flows.len() {
            let va = solve_packet_dp(&spec, f, &a).unwrap();
            let vb = solve_packet_dp(&spec, f, &b).unwrap();
            for i in 0..spec.num_nodes {
                for s in 0..=va.deadline {
                    prop_assert!(vb.value(i, s) <= va.value(i, s) + 1e-12);
                    prop_assert!(va.value(i, s) <= spec.flows[f].weight + 1e-12);
                }
            }
        }
    }

    #[test]
    fn spec_json_round_trips(seed in 0u64..10_000) {
        let spec = random_spec(seed, &MID);
        let back = parse_spec(&spec.to_json()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn link_truncation_respects_caps(props in proposal_strategy(), caps in prop::collection::vec(prop::option::of(0.0f64..4.0), 4)) {
        let (kept, dropped) = truncate_link(&props, &caps);
        let mut all: Vec<usize> = kept.iter().chain(&dropped).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..props.len()).collect::<Vec<_>>());
        for (l, cap) in caps.iter().enumerate() {
            let used: f64 = kept.iter().filter(|&&k| props[k].link == l).map(|&k| props[k].size).sum();
            if let Some(c) = cap {
                prop_assert!(used <= c + LIMIT_SLACK * props.len() as f64);
            } else {
                prop_assert!(dropped.iter().all(|&k| props[k].link != l));
            }
        }
        // a rejected proposal never has a strictly earlier deadline than a
        // kept one of at least its size on the same link
        for &r in &dropped {
            for &k in &kept {
                if props[k].link == props[r].link && props[k].size >= props[r].size {
                    prop_assert!(props[k].ttg <= props[r].ttg);
                }
            }
        }
    }

    #[test]
    fn peak_truncation_respects_peaks(props in proposal_strategy(), peaks in prop::collection::vec(prop::option::of(0.0f64..5.0), 3)) {
        let (kept, dropped) = truncate_peak(&props, &peaks);
        prop_assert_eq!(kept.len() + dropped.len(), props.len());
        for (i, peak) in peaks.iter().enumerate() {
            let used: f64 = kept.iter().filter(|&&k| props[k].node == i).map(|&k| props[k].energy).sum();
            match peak {
                Some(p) => prop_assert!(used <= p + LIMIT_SLACK * props.len() as f64),
                None => prop_assert!(dropped.iter().all(|&k| props[k].node != i)),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), which in 0usize..5) {
        let spec = fig6();
        let kind = PolicyKind::ALL[which];
        let p = PolicyImpl::for_spec(kind, &spec).unwrap();
        let a = run_sim(&spec, &p, 300, seed).unwrap();
        let b = run_sim(&spec, &p, 300, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
