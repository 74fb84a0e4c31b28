//! Benchmark circuits, planted-optimum instances and experiment drivers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::cost::{count_cuts, gate_density, ged_cost, CostError, GedEffort, Partition, Placement};
use crate::cutter::{cut_circuit, CutError, CutterConfig, Iterations};
use crate::qpd::{lower_to_cz, sampling_overhead, split_circuit, QpdError};
use crate::router::{route, LayoutMode, RouteError};
use crate::seed;
use crate::topo::{HardwareTopology, InteractionGraph, TopoError};

/// Controlled-phase reach of the standard AQFT benchmark, `ceil(log2 n)`.
pub fn aqft_degree(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad benchmark parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Qpd(#[from] QpdError),
    #[error(transparent)]
    Topo(#[from] TopoError),
}

fn need(ok: bool, msg: impl FnOnce() -> String) -> Result<(), BenchError> {
    if ok {
        Ok(())
    } else {
        Err(BenchError::BadParams(msg()))
    }
}

/// Controlled phase `diag(1, 1, 1, e^{i theta})` with two cx.
fn cphase(c: &mut Circuit, theta: f64, a: usize, b: usize) {
    c.rz(theta / 2.0, a)
        .cx(a, b)
        .rz(-theta / 2.0, b)
        .cx(a, b)
        .rz(theta / 2.0, b);
}

/// Approximate QFT keeping controlled phases between qubits at most `degree` apart.
pub fn gen_aqft(n: usize, degree: usize) -> Result<Circuit, BenchError> {
    need(n >= 2, || format!("aqft needs n >= 2, got {n}"))?;
    need(degree >= 1, || "aqft degree must be at least 1".into())?;
    let mut c = Circuit::new(n);
    for j in 0..n {
        c.h(j);
        for k in 1..=degree {
            if j + k < n {
                cphase(&mut c, PI / (1u64 << k) as f64, j + k, j);
            }
        }
    }
    Ok(c)
}

/// Random grid circuit: cz layers cycling through four coupler patterns, random
/// `sqrt(X)`/`sqrt(Y)`/`T` gates in between.
pub fn gen_supremacy(m: usize, k: usize, depth: usize, seed_: u64) -> Result<Circuit, BenchError> {
    need(m * k >= 2, || format!("supremacy grid {m}x{k} too small"))?;
    let n = m * k;
    let mut rng = seed::rng(seed_);
    let mut c = Circuit::new(n);
    for q in 0..n {
        c.h(q);
    }
    let id = |r: usize, col: usize| r * k + col;
    for layer in 0..depth {
        let pattern = layer % 4;
        for r in 0..m {
            for col in 0..k {
                let (horizontal, parity) = (pattern < 2, pattern % 2);
                if horizontal && col % 2 == parity && col + 1 < k {
                    c.cz(id(r, col), id(r, col + 1));
                }
                if !horizontal && r % 2 == parity && r + 1 < m {
                    c.cz(id(r, col), id(r + 1, col));
                }
            }
        }
        for q in 0..n {
            match rng.gen_range(0..3) {
                0 => c.rx(FRAC_PI_2, q),
                1 => c.ry(FRAC_PI_2, q),
                _ => c.t(q),
            };
        }
    }
    Ok(c)
}

/// Hardware-efficient ansatz: per layer rz and rx on every qubit, then a ring of cz.
pub fn gen_qaoa(n: usize, layers: usize, seed_: u64) -> Result<Circuit, BenchError> {
    need(n >= 2, || format!("qaoa needs n >= 2, got {n}"))?;
    let mut rng = seed::rng(seed_);
    let mut c = Circuit::new(n);
    for q in 0..n {
        c.h(q);
    }
    for _ in 0..layers {
        for q in 0..n {
            c.rz(rng.gen_range(0.0..PI), q)
                .rx(rng.gen_range(0.0..PI), q);
        }
        let ring = if n == 2 { 1 } else { n };
        for i in 0..ring {
            c.cz(i, (i + 1) % n);
        }
    }
    Ok(c)
}

/// Trotterized transverse-field Ising chain. The ZZ term of each step is `rzz(pi/2)`, written
/// as cz plus rz on both qubits; the field angle is drawn per step.
pub fn gen_ising(n: usize, steps: usize, seed_: u64) -> Result<Circuit, BenchError> {
    need(n >= 2, || format!("ising needs n >= 2, got {n}"))?;
    let mut rng = seed::rng(seed_);
    let mut c = Circuit::new(n);
    for q in 0..n {
        c.h(q);
    }
    for _ in 0..steps {
        for i in 0..n - 1 {
            c.cz(i, i + 1).rz(FRAC_PI_2, i).rz(FRAC_PI_2, i + 1);
        }
        let field = rng.gen_range(0.1..1.0);
        for q in 0..n {
            c.rx(field, q);
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Aqft,
    Supremacy,
    Qaoa,
    Ising,
}

impl BenchKind {
    pub const ALL: [BenchKind; 4] = [
        BenchKind::Aqft,
        BenchKind::Supremacy,
        BenchKind::Qaoa,
        BenchKind::Ising,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchKind::Aqft => "aqft",
            BenchKind::Supremacy => "supremacy",
            BenchKind::Qaoa => "qaoa",
            BenchKind::Ising => "ising",
        }
    }

    /// Standard `n`-qubit instance: AQFT of degree [`aqft_degree`], a near-square supremacy grid
    /// of depth 8, a two-layer ansatz and a two-step Ising chain.
    pub fn generate(self, n: usize, seed_: u64) -> Result<Circuit, BenchError> {
        match self {
            BenchKind::Aqft => gen_aqft(n, aqft_degree(n)),
            BenchKind::Supremacy => {
                let m = (1..=n)
                    .rev()
                    .find(|&m| m * m <= n && n.is_multiple_of(m))
                    .unwrap_or(1);
                gen_supremacy(m, n / m, 8, seed_)
            }
            BenchKind::Qaoa => gen_qaoa(n, 2, seed_),
            BenchKind::Ising => gen_ising(n, 2, seed_),
        }
    }
}

impl FromStr for BenchKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchKind::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BenchError::BadParams(format!("unknown benchmark '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub circuit: Circuit,
    pub optimal_partition: Partition,
    pub optimal_cuts: u64,
    /// Per block of `optimal_partition`, the lagos qubit of each member (ascending logical order).
    pub optimal_layout: Vec<Placement>,
    pub topology: HardwareTopology,
    /// Topology each subcircuit is mapped onto.
    pub chip: HardwareTopology,
}

/// Planted instance number `variant` (1, 2 or 3):
/// 1. two chips joined by one bridge gate, optimum 1;
/// 2. three chips with one gate on each bridge, optimum 2;
/// 3. two chips with two bridge gates and every intra-chip coupling used at least twice, optimum 2.
///
/// Gates lie only on couplings of the multi-chip device, whose coupling graph is a tree, so every
/// partition into chip-sized blocks cuts at least as much as the chip boundaries.
pub fn gen_planted(
    variant: usize,
    depth: usize,
    seed_: u64,
) -> Result<PlantedInstance, BenchError> {
    let (chips, per_bridge, min_use) = match variant {
        1 => (2, 1, 1),
        2 => (3, 1, 1),
        3 => (2, 2, 2),
        _ => {
            return Err(BenchError::BadParams(format!(
                "planted variant must be 1, 2 or 3, got {variant}"
            )))
        }
    };
    let chip = HardwareTopology::lagos();
    let topo = HardwareTopology::multi_chip(chips)?;
    let per_chip = chip.num_qubits();
    let n = topo.num_qubits();
    let mut rng = seed::rng(seed_);

    let mut intra: Vec<(usize, usize)> = Vec::new();
    let mut bridges: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in topo.couplings() {
        if a / per_chip == b / per_chip {
            intra.push((a, b));
        } else {
            bridges.push((a, b));
        }
    }
    let mut two_q: Vec<(usize, usize)> = Vec::new();
    for _ in 0..min_use {
        two_q.extend(&intra);
    }
    let extra = depth.saturating_sub(min_use) * intra.len() / 2;
    for _ in 0..extra {
        two_q.push(*intra.choose(&mut rng).unwrap());
    }
    for &b in &bridges {
        for _ in 0..per_bridge {
            two_q.push(b);
        }
    }
    two_q.shuffle(&mut rng);

    // physical qubit p carries logical qubit relabel[p]
    let mut relabel: Vec<usize> = (0..n).collect();
    relabel.shuffle(&mut rng);
    let mut c = Circuit::new(n);
    for q in 0..n {
        c.h(relabel[q]);
    }
    for (a, b) in two_q {
        if rng.gen_bool(0.5) {
            c.cx(relabel[a], relabel[b]);
        } else {
            c.cz(relabel[a], relabel[b]);
        }
        let q = relabel[if rng.gen_bool(0.5) { a } else { b }];
        c.rz(rng.gen_range(0.0..PI), q);
    }

    let mut assignment = vec![0; n];
    for p in 0..n {
        assignment[relabel[p]] = p / per_chip;
    }
    let optimal_partition = Partition::new(assignment)?;
    let optimal_layout = optimal_partition
        .blocks()
        .iter()
        .map(|blk| {
            Placement(
                blk.iter()
                    .map(|&l| relabel.iter().position(|&x| x == l).unwrap() % per_chip)
                    .collect(),
            )
        })
        .collect();
    let optimal_cuts = count_cuts(&InteractionGraph::from_circuit(&c), &optimal_partition);
    Ok(PlantedInstance {
        circuit: c,
        optimal_partition,
        optimal_cuts,
        optimal_layout,
        topology: topo,
        chip,
    })
}

/// Subcircuits of `c` (gates inside each block, local qubit order) for routing.
pub fn subcircuits(c: &Circuit, p: &Partition) -> Result<Vec<Circuit>, BenchError> {
    let crossing: Vec<usize> = c
        .gates
        .iter()
        .enumerate()
        .filter(|(_, g)| {
            g.qubits
                .iter()
                .any(|&q| p.block_of(q) != p.block_of(g.qubits[0]))
        })
        .map(|(i, _)| i)
        .collect();
    let (lowered, _) = lower_to_cz(c, &crossing)?;
    let (progs, _) = split_circuit(&lowered, p)?;
    Ok(progs.iter().map(|pr| pr.depth_circuit()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedReport {
    pub variant: usize,
    pub seed: u64,
    pub planted_cuts: u64,
    pub found_cuts: u64,
    pub planted_swaps: usize,
    /// Routed over unrouted depth under the planted layout, minus one.
    pub added_depth: f64,
}

/// Runs the cutter on a planted instance with `alpha = alpha_factor * d2` and routes the planted
/// solution under its own layout.
pub fn run_planted(
    variant: usize,
    depth: usize,
    seed_: u64,
    alpha_factor: f64,
) -> Result<PlantedReport, BenchError> {
    let inst = gen_planted(variant, depth, seed_)?;
    let alpha = alpha_factor * gate_density(&inst.circuit)?;
    let cfg = CutterConfig::new(alpha, inst.chip.num_qubits()).with_seed(seed_);
    let sol = cut_circuit(&inst.circuit, &inst.chip, &cfg)?;
    let subs = subcircuits(&inst.circuit, &inst.optimal_partition)?;
    let (mut swaps, mut before, mut after) = (0, 0, 0);
    for (sub, layout) in subs.iter().zip(&inst.optimal_layout) {
        let r = route(sub, &inst.chip, seed_, &LayoutMode::Fixed(layout.0.clone()))?;
        swaps += r.swap_count;
        before += sub.depth();
        after += r.depth;
    }
    Ok(PlantedReport {
        variant,
        seed: seed_,
        planted_cuts: inst.optimal_cuts,
        found_cuts: sol.cost.num_cuts,
        planted_swaps: swaps,
        added_depth: after as f64 / before.max(1) as f64 - 1.0,
    })
}

/// Pearson correlation, `None` when either sample has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSample {
    pub qubits: Vec<usize>,
    pub ged_cost: u64,
    pub swap_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub samples: Vec<CorrelationSample>,
    pub r: Option<f64>,
}

/// Samples connected qubit subsets of AQFT_16 (3 to 7 qubits), computes the edit-distance cost of
/// each induced subcircuit against lagos and routes it there.
pub fn run_correlation(n_samples: usize, seed_: u64) -> Result<CorrelationResult, BenchError> {
    need(n_samples >= 30, || {
        format!("need at least 30 samples, got {n_samples}")
    })?;
    let c = gen_aqft(16, aqft_degree(16))?;
    let g = InteractionGraph::from_circuit(&c);
    let t = HardwareTopology::lagos();
    let samples: Vec<CorrelationSample> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive(seed_, i as u64);
            let mut rng = seed::rng(s);
            let size = rng.gen_range(3..=t.num_qubits());
            let mut qubits = vec![rng.gen_range(0..16)];
            while qubits.len() < size {
                let frontier: Vec<usize> = qubits
                    .iter()
                    .flat_map(|&q| g.neighbors(q).map(|(v, _)| v))
                    .filter(|v| !qubits.contains(v))
                    .collect();
                qubits.push(*frontier.choose(&mut rng).expect("aqft graph is connected"));
            }
            qubits.sort_unstable();
            let mut sub = Circuit::new(qubits.len());
            for gate in &c.gates {
                if gate.qubits.iter().all(|q| qubits.contains(q)) {
                    sub.push(gate.remapped(|q| qubits.iter().position(|&x| x == q).unwrap()));
                }
            }
            let (ged, _) = ged_cost(&g.induced(&qubits), &t, GedEffort::default(), s)?;
            let routed = route(&sub, &t, s, &LayoutMode::SabreLayout)?;
            Ok(CorrelationSample {
                qubits,
                ged_cost: ged,
                swap_count: routed.swap_count,
            })
        })
        .collect::<Result<_, BenchError>>()?;
    let xs: Vec<f64> = samples.iter().map(|s| s.ged_cost as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.swap_count as f64).collect();
    let r = pearson(&xs, &ys);
    Ok(CorrelationResult { samples, r })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bench: BenchKind,
    pub alpha_factor: f64,
    pub alpha: f64,
    pub seed: u64,
    pub num_cuts: u64,
    pub num_subcircuits: usize,
    pub ged_sum: f64,
    pub depth_pre: usize,
    pub depth_post: usize,
    pub swaps: usize,
    pub sampling_overhead: f64,
}

/// Cuts and routes one benchmark instance for every `(alpha_factor, seed)` cell.
pub fn run_alpha_sweep(
    bench: BenchKind,
    n: usize,
    t: &HardwareTopology,
    alpha_factors: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>, BenchError> {
    let c = bench.generate(n, 0)?;
    let d2 = gate_density(&c)?;
    let cells: Vec<(f64, u64)> = alpha_factors
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(factor, s)| {
            let cfg = CutterConfig::new(factor * d2, t.num_qubits()).with_seed(s);
            let sol = cut_circuit(&c, t, &cfg)?;
            let subs = subcircuits(&c, &sol.partition)?;
            let (mut pre, mut post, mut swaps) = (0, 0, 0);
            for (i, sub) in subs.iter().enumerate() {
                let r = route(sub, t, seed::derive(s, i as u64), &LayoutMode::SabreLayout)?;
                pre += sub.depth();
                post += r.depth;
                swaps += r.swap_count;
            }
            Ok(SweepRow {
                bench,
                alpha_factor: factor,
                alpha: factor * d2,
                seed: s,
                num_cuts: sol.cost.num_cuts,
                num_subcircuits: sol.partition.num_blocks(),
                ged_sum: sol.cost.ged_sum(),
                depth_pre: pre,
                depth_post: post,
                swaps,
                sampling_overhead: sampling_overhead(sol.cost.num_cuts as usize),
            })
        })
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub alpha_factor: f64,
    pub median_cuts: f64,
    pub median_depth_post: f64,
    pub median_swaps: f64,
}

/// Medians per alpha factor, in first-appearance order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut factors: Vec<f64> = Vec::new();
    for r in rows {
        if !factors.contains(&r.alpha_factor) {
            factors.push(r.alpha_factor);
        }
    }
    factors
        .into_iter()
        .map(|f| {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.alpha_factor == f).collect();
            SweepSummary {
                alpha_factor: f,
                median_cuts: median(sel.iter().map(|r| r.num_cuts as f64).collect()),
                median_depth_post: median(sel.iter().map(|r| r.depth_post as f64).collect()),
                median_swaps: median(sel.iter().map(|r| r.swaps as f64).collect()),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub bench: BenchKind,
    pub num_qubits: usize,
    pub iterations: usize,
    pub num_cuts: u64,
    pub num_subcircuits: usize,
    pub max_subcircuit: usize,
    pub total_cost: f64,
    pub wall_seconds: f64,
}

/// Cut-only run on a generated `n`-qubit circuit.
pub fn run_scale(
    bench: BenchKind,
    n: usize,
    t: &HardwareTopology,
    alpha_factor: f64,
    seed_: u64,
) -> Result<ScaleRow, BenchError> {
    let c = bench.generate(n, seed_)?;
    let start = Instant::now();
    let alpha = alpha_factor * gate_density(&c)?;
    let cfg = CutterConfig::new(alpha, t.num_qubits())
        .with_seed(seed_)
        .with_iterations(Iterations::Auto);
    let sol = cut_circuit(&c, t, &cfg)?;
    Ok(ScaleRow {
        bench,
        num_qubits: n,
        iterations: crate::cutter::auto_iterations(n),
        num_cuts: sol.cost.num_cuts,
        num_subcircuits: sol.partition.num_blocks(),
        max_subcircuit: sol.partition.max_block_size(),
        total_cost: sol.cost.total,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
