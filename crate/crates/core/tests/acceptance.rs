//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::time::Instant;

use hwknit::bench::{
    gen_aqft, gen_ising, gen_qaoa, gen_supremacy, median, run_alpha_sweep, run_correlation,
    run_planted, run_scale, BenchKind,
};
use hwknit::circuit::Circuit;
use hwknit::cost::{count_cuts, Partition};
use hwknit::cutter::{search_partition, CutterConfig};
use hwknit::knit::{knit_partition, mc_estimate, oracle_values, ContractionOrder, Observable};
use hwknit::qpd::{cz_terms, gamma, raw_l1, RAW_TERMS};
use hwknit::seed;
use hwknit::topo::{topology, InteractionGraph};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Partitions into two blocks, or three contiguous blocks, whose cut count is within 1..=3.
fn small_cut_partitions(c: &Circuit) -> Vec<Partition> {
    let n = c.num_qubits;
    let g = InteractionGraph::from_circuit(c);
    let mut out = Vec::new();
    for mask in 1..(1u32 << (n - 1)) {
        let a: Vec<usize> = (0..n).map(|q| ((mask >> q) & 1) as usize).collect();
        let p = Partition::new(a).unwrap();
        if (1..=3).contains(&count_cuts(&g, &p)) {
            out.push(p);
        }
    }
    for i in 1..n {
        for j in i + 1..n {
            let a: Vec<usize> = (0..n)
                .map(|q| (q >= i) as usize + (q >= j) as usize)
                .collect();
            let p = Partition::new(a).unwrap();
            if (1..=3).contains(&count_cuts(&g, &p)) {
                out.push(p);
            }
        }
    }
    out
}

fn exactness_circuit(i: usize) -> Circuit {
    let n = 4 + i % 9;
    let s = 1000 + i as u64;
    match i % 4 {
        0 => gen_aqft(n, 1).unwrap(),
        1 => {
            let m = if n >= 6 { 2 } else { 1 };
            let mut c = gen_supremacy(m, n / m, 4, s).unwrap();
            c.num_qubits = m * (n / m);
            c
        }
        2 => gen_qaoa(n, 1, s).unwrap(),
        _ => gen_ising(n, 1 + i % 3, s).unwrap(),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut cut_hist = [0usize; 4];
    for i in 0..50 {
        let c = exactness_circuit(i);
        let parts = small_cut_partitions(&c);
        if parts.is_empty() {
            return outcome(false, format!("circuit {i} has no partition with 1-3 cuts"));
        }
        let mut rng = seed::rng(i as u64);
        let p = parts.choose(&mut rng).unwrap();
        let g = InteractionGraph::from_circuit(&c);
        cut_hist[count_cuts(&g, p) as usize] += 1;
        let mut zs: Vec<usize> = (0..c.num_qubits).filter(|_| rng.gen_bool(0.5)).collect();
        if zs.is_empty() {
            zs.push(rng.gen_range(0..c.num_qubits));
        }
        for obs in [Observable::ZString(zs), Observable::Distribution] {
            let exact = oracle_values::<f64>(&c, &obs).unwrap();
            let k = knit_partition::<f64>(&c, p, &obs, ContractionOrder::Greedy).unwrap();
            for (x, y) in exact.iter().zip(&k.values) {
                worst = worst.max((x - y).abs());
            }
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && secs < 300.0,
        format!(
            "{checked} reconstructions over 50 circuits (cuts 1/2/3: {}/{}/{}), max deviation {worst:.2e} (tol 1e-9), {secs:.1}s (limit 300s)",
            cut_hist[1], cut_hist[2], cut_hist[3]
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let terms = cz_terms();
    let coeffs: Vec<f64> = terms.iter().map(|t| t.coefficient).collect();
    let resid = common::choi_residual(&terms, &coeffs);
    let g = gamma();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        terms.len() == RAW_TERMS && resid < 1e-10 && (g - 3.0).abs() < 1e-9 && secs < 1.0,
        format!(
            "{} raw terms, Choi residual {resid:.2e} (tol 1e-10), gamma over executed variants {g} (target 3 +- 1e-9; raw ten-term L1 {}), {secs:.3}s",
            terms.len(),
            raw_l1()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut merges = 0;
    let mut bad = Vec::new();
    for i in [0usize, 3, 6, 11, 15, 22] {
        let c = exactness_circuit(i);
        let parts = small_cut_partitions(&c);
        let p = &parts[parts.len() / 2];
        let k = knit_partition::<f64>(
            &c,
            p,
            &Observable::ZString(vec![0]),
            ContractionOrder::Greedy,
        )
        .unwrap();
        for m in &k.stats.merges {
            merges += 1;
            if m.pairings != 4usize.pow(m.shared_cuts as u32)
                || (m.shared_cuts == 1 && m.kron_products % 4 != 0)
            {
                bad.push((i, *m));
            }
        }
    }
    let mut c = Circuit::new(2);
    c.h(0).cx(0, 1);
    let k = knit_partition::<f64>(
        &c,
        &Partition::new(vec![0, 1]).unwrap(),
        &Observable::ZString(vec![0, 1]),
        ContractionOrder::Greedy,
    )
    .unwrap();
    let single = k.stats.merges.len() == 1
        && k.stats.merges[0].pairings == 4
        && k.stats.kron_products() == 4;
    outcome(
        bad.is_empty() && single,
        format!("{merges} merges, each with 4 pairings per shared cut; single-cut merge: 4 pairings, 4 Kronecker products; violations {}", bad.len()),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let res = run_correlation(200, 2024).unwrap();
    let r = res.r.unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r >= 0.5 && secs < 600.0,
        format!(
            "Pearson r = {r:.3} over {} AQFT_16 subcircuits on lagos (need >= 0.5), {secs:.1}s",
            res.samples.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let t = topology("lagos").unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for bench in [BenchKind::Aqft, BenchKind::Ising] {
        let rows = run_alpha_sweep(bench, 16, &t, &[0.0, 0.5], &seeds).unwrap();
        let pick = |f: f64, m: &dyn Fn(&hwknit::bench::SweepRow) -> f64| {
            median(rows.iter().filter(|r| r.alpha_factor == f).map(m).collect())
        };
        let (d0, d5) = (
            pick(0.0, &|r| r.depth_post as f64),
            pick(0.5, &|r| r.depth_post as f64),
        );
        let (c0, c5) = (
            pick(0.0, &|r| r.num_cuts as f64),
            pick(0.5, &|r| r.num_cuts as f64),
        );
        let ratio = c5 / c0.max(1.0);
        pass &= d5 < d0 && ratio <= 1.5;
        parts.push(format!(
            "{}: median depth {d0} -> {d5}, median cuts {c0} -> {c5} (ratio {ratio:.2}, limit 1.5)",
            bench.name()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for variant in 1..=3 {
        let mut hits = 0;
        let mut swaps = 0;
        let mut planted = 0;
        for s in 0..20u64 {
            let r = run_planted(variant, 4, s, 0.2).unwrap();
            planted = r.planted_cuts;
            hits += (r.found_cuts == r.planted_cuts) as usize;
            swaps += r.planted_swaps;
        }
        pass &= hits >= 18 && swaps == 0;
        parts.push(format!(
            "instance {variant}: optimum {planted} found {hits}/20, planted-layout swaps {swaps}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn peak_rss_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

fn criterion_7() -> Outcome {
    let t = topology("brisbane").unwrap();
    let row = run_scale(BenchKind::Ising, 1000, &t, 0.2, 7).unwrap();
    let mem = peak_rss_mb();
    let mem_ok = mem.is_none_or(|m| m < 2048.0);
    outcome(
        row.wall_seconds < 600.0 && mem_ok && row.max_subcircuit <= 127,
        format!(
            "1000-qubit Ising on brisbane: {} iterations, {} cuts, {} subcircuits, {:.1}s (limit 600s), peak RSS {} MB (limit 2048)",
            row.iterations,
            row.num_cuts,
            row.num_subcircuits,
            row.wall_seconds,
            mem.map_or("n/a".to_string(), |m| format!("{m:.0}"))
        ),
    )
}

/// Minimum cut over all partitions of `n` nodes into blocks of at most `max` nodes.
fn brute_force_min_cut(g: &InteractionGraph, max: usize) -> u64 {
    fn rec(
        v: usize,
        assign: &mut Vec<usize>,
        sizes: &mut Vec<usize>,
        g: &InteractionGraph,
        max: usize,
        best: &mut u64,
    ) {
        let n = g.node_count();
        if v == n {
            let p = Partition::new(assign.clone()).unwrap();
            *best = (*best).min(count_cuts(g, &p));
            return;
        }
        for b in 0..=sizes.len() {
            if b == sizes.len() {
                sizes.push(0);
            }
            if sizes[b] < max {
                sizes[b] += 1;
                assign.push(b);
                rec(v + 1, assign, sizes, g, max, best);
                assign.pop();
                sizes[b] -= 1;
            }
            if sizes[b] == 0 {
                sizes.pop();
            }
        }
    }
    let mut best = u64::MAX;
    rec(0, &mut Vec::new(), &mut Vec::new(), g, max, &mut best);
    best
}

fn criterion_8() -> Outcome {
    let t = topology("line(4)").unwrap();
    let (mut equal, mut below) = (0, 0);
    for run in 0..100u64 {
        let mut rng = seed::rng(seed::derive(88, run));
        let mut edges = Vec::new();
        for a in 0..8 {
            for b in a + 1..8 {
                if rng.gen_bool(0.4) {
                    edges.push((a, b, rng.gen_range(1..=3)));
                }
            }
        }
        let g = InteractionGraph::from_edges(8, &edges);
        let opt = brute_force_min_cut(&g, 4);
        let (_, cost, _) =
            search_partition(&g, &t, &CutterConfig::new(0.0, 4).with_seed(run)).unwrap();
        equal += (cost.num_cuts == opt) as usize;
        below += (cost.num_cuts < opt) as usize;
    }
    outcome(
        equal >= 90 && below == 0,
        format!("optimum matched in {equal}/100 random 8-node graphs (need 90), below optimum {below} times"),
    )
}

fn criterion_9() -> Outcome {
    let mut c = Circuit::new(2);
    c.h(0).cx(0, 1).rx(0.5, 1);
    let p = Partition::new(vec![0, 1]).unwrap();
    let exact = knit_partition::<f64>(
        &c,
        &p,
        &Observable::ZString(vec![0, 1]),
        ContractionOrder::Greedy,
    )
    .unwrap()
    .values[0];
    let est = mc_estimate(&c, &p, &[0, 1], 100_000, 9).unwrap();
    let z = (est.mean - exact).abs() / est.std_error;
    outcome(
        z <= 5.0 && (est.mean_weight_sq - gamma().powi(2)).abs() < 1e-9,
        format!(
            "estimate {:.4} +- {:.4} vs exact {exact:.4} ({z:.2} standard errors, limit 5); mean weight^2 {} (gamma^2 = 9), mean |weight| {}",
            est.mean, est.std_error, est.mean_weight_sq, est.mean_abs_weight
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("reconstruction exactness", criterion_1),
        ("QPD soundness", criterion_2),
        ("folding economy", criterion_3),
        ("GED/SWAP correlation", criterion_4),
        ("trade-off direction", criterion_5),
        ("planted optimality", criterion_6),
        ("scaling", criterion_7),
        ("small-instance min cut", criterion_8),
        ("Monte-Carlo consistency", criterion_9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {id} [{name}]: {} - {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
