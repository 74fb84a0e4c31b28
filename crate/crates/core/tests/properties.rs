use std::f64::consts::FRAC_PI_2;

use num_complex::Complex;
use proptest::prelude::*;

use hwknit::circuit::{Circuit, Gate, GateKind};
use hwknit::cost::{count_cuts, total_cost, GedEffort, Partition};
use hwknit::cutter::{cut_circuit, CutterConfig, Iterations};
use hwknit::knit::{knit_partition, oracle_values, ContractionOrder, Observable};
use hwknit::qasm::{emit_qasm, parse_qasm};
use hwknit::qpd::{lower_to_cz, reassemble, split_circuit};
use hwknit::router::{route, LayoutMode};
use hwknit::sim::simulate;
use hwknit::topo::{topology, InteractionGraph};
use hwknit::State;

fn single_qubit_gate(n: usize) -> impl Strategy<Value = Gate> {
    let kinds = prop::sample::select(vec![
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::U3,
    ]);
    (kinds, 0..n, prop::collection::vec(-4.0f64..4.0, 3))
        .prop_map(|(k, q, ps)| Gate::new(k, &[q], &ps[..k.num_params()]))
}

/// Two-qubit gates the cutter can cut: cx, cz and rzz(+-pi/2).
fn cuttable_pair_gate(n: usize) -> impl Strategy<Value = Gate> {
    (0..3usize, 0..n, 1..n, any::<bool>()).prop_map(move |(k, a, d, sign)| {
        let b = (a + d) % n;
        match k {
            0 => Gate::new(GateKind::Cx, &[a, b], &[]),
            1 => Gate::new(GateKind::Cz, &[a, b], &[]),
            _ => Gate::new(
                GateKind::Rzz,
                &[a, b],
                &[if sign { FRAC_PI_2 } else { -FRAC_PI_2 }],
            ),
        }
    })
}

fn circuit(
    n_range: std::ops::RangeInclusive<usize>,
    max_gates: usize,
) -> impl Strategy<Value = Circuit> {
    n_range.prop_flat_map(move |n| {
        let gate = if n >= 2 {
            prop_oneof![single_qubit_gate(n), cuttable_pair_gate(n)].boxed()
        } else {
            single_qubit_gate(n).boxed()
        };
        prop::collection::vec(gate, 1..=max_gates).prop_map(move |gates| {
            let mut c = Circuit::new(n);
            for g in gates {
                c.push(g);
            }
            c
        })
    })
}

fn with_partition(c: Circuit, blocks: usize) -> impl Strategy<Value = (Circuit, Partition)> {
    let n = c.num_qubits;
    prop::collection::vec(0..blocks, n).prop_filter_map("needs two blocks", move |assignment| {
        let p = Partition::new(assignment).ok()?;
        (p.num_blocks() >= 2).then(|| (c.clone(), p))
    })
}

fn crossing(c: &Circuit, p: &Partition) -> Vec<usize> {
    c.gates
        .iter()
        .enumerate()
        .filter(|(_, g)| g.is_two_qubit() && p.block_of(g.qubits[0]) != p.block_of(g.qubits[1]))
        .map(|(i, _)| i)
        .collect()
}

fn fidelity(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex<f64>>()
        .norm()
}

fn state(c: &Circuit) -> State {
    simulate::<f64>(c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qasm_round_trip(c in circuit(1..=8, 30)) {
        let back = parse_qasm(&emit_qasm(&c)).unwrap();
        prop_assert_eq!(back.num_qubits, c.num_qubits);
        prop_assert_eq!(back.gates, c.gates);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_qasm(&text);
    }

    #[test]
    fn parser_survives_token_soup(tokens in prop::collection::vec(prop::sample::select(vec![
        "OPENQASM", "2.0", ";", "qreg", "creg", "q", "[", "]", "3", "0", "1", "h", "cx", "rz", "(", ")",
        "pi", "/", "-", "*", ",", "measure", "->", "barrier", "gate", "{", "}", "include", "\"qelib1.inc\"",
    ]), 0..60)) {
        let _ = parse_qasm(&tokens.join(" "));
    }

    #[test]
    fn unitaries_preserve_norm(c in circuit(1..=7, 40)) {
        let s = state(&c);
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projectors_are_complete(c in circuit(1..=6, 20), q in 0usize..6) {
        let s = state(&c);
        let q = q % c.num_qubits;
        let (mut plus, mut minus) = (s.clone(), s.clone());
        plus.apply_projector(q, 1);
        minus.apply_projector(q, -1);
        for ((a, b), x) in plus.amplitudes().iter().zip(minus.amplitudes()).zip(s.amplitudes()) {
            prop_assert!((a + b - x).norm() < 1e-15);
        }
        let mut twice = plus.clone();
        twice.apply_projector(q, 1);
        prop_assert_eq!(twice.amplitudes(), plus.amplitudes());
        prop_assert!((plus.norm_sqr() + minus.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lowering_preserves_state(c in circuit(2..=6, 25)) {
        let idx: Vec<usize> = (0..c.gates.len()).filter(|&i| c.gates[i].is_two_qubit()).collect();
        let (lowered, _) = lower_to_cz(&c, &idx).unwrap();
        prop_assert!(lowered.gates.iter().filter(|g| g.is_two_qubit()).all(|g| g.kind == GateKind::Cz));
        let f = fidelity(state(&c).amplitudes(), state(&lowered).amplitudes());
        prop_assert!((f - 1.0).abs() < 1e-10, "fidelity {}", f);
    }

    #[test]
    fn split_then_reassemble_is_identity((c, p) in circuit(2..=7, 25).prop_flat_map(|c| with_partition(c, 3))) {
        let (lowered, _) = lower_to_cz(&c, &crossing(&c, &p)).unwrap();
        let (progs, cuts) = split_circuit(&lowered, &p).unwrap();
        prop_assert_eq!(cuts.len(), crossing(&c, &p).len());
        prop_assert_eq!(progs.iter().map(|pr| pr.slots.len()).sum::<usize>(), 2 * cuts.len());
        prop_assert_eq!(progs.len(), p.num_blocks());
        let back = reassemble(&progs, &cuts, c.num_qubits);
        let f = fidelity(state(&lowered).amplitudes(), state(&back).amplitudes());
        prop_assert!((f - 1.0).abs() < 1e-10, "fidelity {}", f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn knitting_matches_oracle_in_any_order(
        (c, p) in circuit(2..=6, 14).prop_flat_map(|c| with_partition(c, 3)),
        z in prop::collection::vec(any::<bool>(), 6),
    ) {
        prop_assume!(crossing(&c, &p).len() <= 3);
        let zs: Vec<usize> = (0..c.num_qubits).filter(|&q| z[q]).collect();
        for obs in [Observable::ZString(zs), Observable::Distribution] {
            let oracle = oracle_values::<f64>(&c, &obs).unwrap();
            let greedy = knit_partition::<f64>(&c, &p, &obs, ContractionOrder::Greedy).unwrap();
            let seq = knit_partition::<f64>(&c, &p, &obs, ContractionOrder::Sequential).unwrap();
            for ((g, s), o) in greedy.values.iter().zip(&seq.values).zip(&oracle) {
                prop_assert!((g - o).abs() < 1e-9);
                prop_assert!((g - s).abs() < 1e-10);
            }
            for m in &greedy.stats.merges {
                prop_assert_eq!(m.pairings, 4usize.pow(m.shared_cuts as u32));
            }
        }
    }

    #[test]
    fn routing_is_legal_and_equivalent(c in circuit(2..=6, 30), seed in any::<u64>(), topo in prop::sample::select(vec!["lagos", "line(6)", "grid(2,3)"])) {
        let t = topology(topo).unwrap();
        for mode in [LayoutMode::SabreLayout, LayoutMode::identity(c.num_qubits)] {
            let r = route(&c, &t, seed, &mode).unwrap();
            for g in &r.physical_circuit.gates {
                if g.is_two_qubit() {
                    prop_assert!(t.is_coupled(g.qubits[0], g.qubits[1]), "{:?} not coupled", g.qubits);
                }
            }
            prop_assert_eq!(r.physical_circuit.gates.iter().filter(|g| g.kind == GateKind::Swap).count(), r.swap_count);
            let logical = state(&c);
            let physical = state(&r.physical_circuit.with_swaps_lowered());
            let mut expected = vec![Complex::new(0.0, 0.0); 1 << t.num_qubits()];
            for (i, a) in logical.amplitudes().iter().enumerate() {
                let j = (0..c.num_qubits).fold(0, |acc, q| acc | (((i >> q) & 1) << r.final_layout[q]));
                expected[j] = *a;
            }
            let f = fidelity(&expected, physical.amplitudes());
            prop_assert!((f - 1.0).abs() < 1e-10, "fidelity {}", f);
        }
    }
}

fn random_graph_circuit(n: usize, edges: &[(usize, usize)]) -> Circuit {
    let mut c = Circuit::new(n);
    for i in 0..n {
        c.cx(i, (i + 1) % n);
    }
    for &(a, b) in edges {
        if a % n != b % n {
            c.cz(a % n, b % n);
        }
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cutter_is_feasible_and_sound(
        n in 3usize..=14,
        edges in prop::collection::vec((0usize..14, 0usize..14), 0..20),
        max in 2usize..=7,
        alpha in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let c = random_graph_circuit(n, &edges);
        let t = topology("lagos").unwrap();
        let cfg = CutterConfig::new(alpha, max).with_seed(seed).with_iterations(Iterations::Fixed(4));
        let sol = cut_circuit(&c, &t, &cfg).unwrap();
        prop_assert!(sol.partition.max_block_size() <= max);
        let g = InteractionGraph::from_circuit(&c);
        prop_assert_eq!(count_cuts(&g, &sol.partition), sol.cost.num_cuts);
        prop_assert_eq!(sol.cut_gates.len() as u64, sol.cost.num_cuts);
        let (re, _) = total_cost(&g, &sol.partition, &t, alpha, GedEffort::default(), seed).unwrap();
        prop_assert!((re.total - sol.cost.total).abs() < 1e-9);
        prop_assert!((sol.cost.total - (sol.cost.num_cuts as f64 + alpha * sol.cost.ged_sum())).abs() < 1e-9);
        for pl in &sol.placements {
            prop_assert!(pl.is_injective_within(t.num_qubits()));
        }
    }

    #[test]
    fn more_trials_never_cost_more(
        n in 4usize..=12,
        edges in prop::collection::vec((0usize..12, 0usize..12), 0..16),
        r in 1usize..=6,
        seed in any::<u64>(),
    ) {
        let c = random_graph_circuit(n, &edges);
        let t = topology("lagos").unwrap();
        let cost = |trials: usize| {
            let cfg = CutterConfig::new(0.1, 5).with_seed(seed).with_iterations(Iterations::Fixed(trials));
            cut_circuit(&c, &t, &cfg).unwrap().cost.total
        };
        prop_assert!(cost(2 * r) <= cost(r) + 1e-12);
    }
}
