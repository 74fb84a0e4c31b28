//! SABRE-style layout and SWAP routing.
//!
//! Front-layer routing scores candidate swaps by the mean distance of front-layer gates plus a
//! weighted mean over a lookahead window, scaled by a per-qubit decay that discourages swapping
//! the same qubits repeatedly. Layout search alternates forward and backward passes from random
//! starts.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::seed;
use crate::topo::HardwareTopology;

const EXTENDED_SET: usize = 20;
const EXTENDED_WEIGHT: f64 = 0.5;
const DECAY_STEP: f64 = 0.001;
const DECAY_RESET: usize = 5;
const LAYOUT_PASSES: usize = 3;
const LAYOUT_TRIALS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("circuit uses {logical} qubits but the topology has {physical}")]
    TooManyQubits { logical: usize, physical: usize },
    #[error("invalid layout: {0}")]
    BadLayout(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutMode {
    /// Forward/backward layout search from random starts.
    SabreLayout,
    /// Route from the given logical -> physical layout.
    Fixed(Vec<usize>),
}

impl LayoutMode {
    pub fn identity(n: usize) -> Self {
        LayoutMode::Fixed((0..n).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedCircuit {
    pub physical_circuit: Circuit,
    pub initial_layout: Vec<usize>,
    pub final_layout: Vec<usize>,
    pub swap_count: usize,
    /// Layers of the physical circuit, a swap counting as one.
    pub depth: usize,
}

impl RoutedCircuit {
    /// Depth with every swap expanded into three cx.
    pub fn depth_swaps_as_3cx(&self) -> usize {
        self.physical_circuit.with_swaps_lowered().depth()
    }
}

struct Dag {
    succ: Vec<Vec<usize>>,
    npred: Vec<usize>,
}

impl Dag {
    fn new(gates: &[Gate], n: usize) -> Dag {
        let mut last: Vec<Option<usize>> = vec![None; n];
        let mut succ = vec![Vec::new(); gates.len()];
        let mut npred = vec![0; gates.len()];
        for (i, g) in gates.iter().enumerate() {
            let mut preds: Vec<usize> = g.qubits.iter().filter_map(|&q| last[q]).collect();
            preds.sort_unstable();
            preds.dedup();
            for p in preds {
                succ[p].push(i);
                npred[i] += 1;
            }
            for &q in &g.qubits {
                last[q] = Some(i);
            }
        }
        Dag { succ, npred }
    }
}

struct Pass<'a> {
    t: &'a HardwareTopology,
    l2p: Vec<usize>,
    p2l: Vec<Option<usize>>,
    decay: Vec<f64>,
    out: Vec<Gate>,
    swaps: usize,
}

impl<'a> Pass<'a> {
    fn new(t: &'a HardwareTopology, layout: &[usize]) -> Self {
        let mut p2l = vec![None; t.num_qubits()];
        for (l, &p) in layout.iter().enumerate() {
            p2l[p] = Some(l);
        }
        Pass {
            t,
            l2p: layout.to_vec(),
            p2l,
            decay: vec![1.0; t.num_qubits()],
            out: Vec::new(),
            swaps: 0,
        }
    }

    fn gate_dist(&self, g: &Gate) -> u32 {
        self.t.dist(self.l2p[g.qubits[0]], self.l2p[g.qubits[1]])
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.out.push(Gate::new(GateKind::Swap, &[a, b], &[]));
        let (la, lb) = (self.p2l[a], self.p2l[b]);
        self.p2l[a] = lb;
        self.p2l[b] = la;
        if let Some(l) = la {
            self.l2p[l] = b;
        }
        if let Some(l) = lb {
            self.l2p[l] = a;
        }
        self.swaps += 1;
    }

    fn run(&mut self, gates: &[Gate], rng: &mut ChaCha8Rng) {
        let dag = Dag::new(gates, self.l2p.len());
        let mut npred = dag.npred.clone();
        let mut front: Vec<usize> = (0..gates.len()).filter(|&i| npred[i] == 0).collect();
        let mut since_progress = 0usize;
        let valve = 10 * self.t.num_qubits().max(4);
        while !front.is_empty() {
            let mut progressed = false;
            let mut next_front = Vec::new();
            for &gi in &front {
                let g = &gates[gi];
                if !g.is_two_qubit() || self.gate_dist(g) == 1 {
                    self.out.push(g.remapped(|q| self.l2p[q]));
                    progressed = true;
                    for &s in &dag.succ[gi] {
                        npred[s] -= 1;
                        if npred[s] == 0 {
                            next_front.push(s);
                        }
                    }
                } else {
                    next_front.push(gi);
                }
            }
            next_front.sort_unstable();
            front = next_front;
            if progressed {
                since_progress = 0;
                self.decay.iter_mut().for_each(|d| *d = 1.0);
                continue;
            }
            if since_progress >= valve {
                let gi = *front
                    .iter()
                    .min_by_key(|&&gi| (self.gate_dist(&gates[gi]), gi))
                    .unwrap();
                self.force_route(&gates[gi]);
                since_progress = 0;
                continue;
            }
            let (a, b) = self.choose_swap(gates, &front, &dag, &npred, rng);
            self.swap(a, b);
            self.decay[a] += DECAY_STEP;
            self.decay[b] += DECAY_STEP;
            since_progress += 1;
            if self.swaps.is_multiple_of(DECAY_RESET) {
                self.decay.iter_mut().for_each(|d| *d = 1.0);
            }
        }
    }

    fn force_route(&mut self, g: &Gate) {
        let (mut pa, pb) = (self.l2p[g.qubits[0]], self.l2p[g.qubits[1]]);
        while self.t.dist(pa, pb) > 1 {
            let d = self.t.dist(pa, pb);
            let step = *self
                .t
                .neighbors(pa)
                .iter()
                .find(|&&n| self.t.dist(n, pb) < d)
                .expect("connected topology");
            self.swap(pa, step);
            pa = step;
        }
    }

    fn extended_set(
        &self,
        gates: &[Gate],
        front: &[usize],
        dag: &Dag,
        npred: &[usize],
    ) -> Vec<usize> {
        let mut left = npred.to_vec();
        let mut queue: VecDeque<usize> = front.iter().copied().collect();
        let mut ext = Vec::new();
        while let Some(gi) = queue.pop_front() {
            for &s in &dag.succ[gi] {
                left[s] -= 1;
                if left[s] == 0 {
                    if gates[s].is_two_qubit() {
                        ext.push(s);
                        if ext.len() >= EXTENDED_SET {
                            return ext;
                        }
                    }
                    queue.push_back(s);
                }
            }
        }
        ext
    }

    fn choose_swap(
        &mut self,
        gates: &[Gate],
        front: &[usize],
        dag: &Dag,
        npred: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> (usize, usize) {
        let ext = self.extended_set(gates, front, dag, npred);
        let mut cands: Vec<(usize, usize)> = Vec::new();
        for &gi in front {
            for &q in &gates[gi].qubits {
                let p = self.l2p[q];
                for &n in self.t.neighbors(p) {
                    cands.push((p.min(n), p.max(n)));
                }
            }
        }
        cands.sort_unstable();
        cands.dedup();
        let mut best: Vec<(usize, usize)> = Vec::new();
        let mut best_score = f64::INFINITY;
        for &(a, b) in &cands {
            let moved = |p: usize| {
                if p == a {
                    b
                } else if p == b {
                    a
                } else {
                    p
                }
            };
            let d = |gi: usize| {
                let g = &gates[gi];
                self.t
                    .dist(moved(self.l2p[g.qubits[0]]), moved(self.l2p[g.qubits[1]]))
                    as f64
            };
            let f: f64 = front.iter().map(|&gi| d(gi)).sum::<f64>() / front.len() as f64;
            let e: f64 = if ext.is_empty() {
                0.0
            } else {
                ext.iter().map(|&gi| d(gi)).sum::<f64>() / ext.len() as f64
            };
            let score = self.decay[a].max(self.decay[b]) * (f + EXTENDED_WEIGHT * e);
            if score < best_score - 1e-12 {
                best_score = score;
                best.clear();
                best.push((a, b));
            } else if (score - best_score).abs() <= 1e-12 {
                best.push((a, b));
            }
        }
        best[rng.gen_range(0..best.len())]
    }
}

fn reversed(c: &Circuit) -> Vec<Gate> {
    c.gates.iter().rev().cloned().collect()
}

fn check_layout(layout: &[usize], n: usize, physical: usize) -> Result<(), RouteError> {
    if layout.len() != n {
        return Err(RouteError::BadLayout(format!(
            "{} entries for {n} qubits",
            layout.len()
        )));
    }
    let mut seen = vec![false; physical];
    for &p in layout {
        if p >= physical || std::mem::replace(&mut seen[p], true) {
            return Err(RouteError::BadLayout(format!(
                "physical qubit {p} out of range or repeated"
            )));
        }
    }
    Ok(())
}

fn finish(
    c: &Circuit,
    t: &HardwareTopology,
    layout: &[usize],
    rng: &mut ChaCha8Rng,
) -> RoutedCircuit {
    let mut pass = Pass::new(t, layout);
    pass.run(&c.gates, rng);
    let mut physical_circuit = Circuit::new(t.num_qubits());
    physical_circuit.gates = pass.out;
    physical_circuit.measured_qubits = c.measured_qubits.iter().map(|&q| pass.l2p[q]).collect();
    let depth = physical_circuit.depth();
    RoutedCircuit {
        physical_circuit,
        initial_layout: layout.to_vec(),
        final_layout: pass.l2p,
        swap_count: pass.swaps,
        depth,
    }
}

/// Maps `c` onto `t`, inserting swaps so every two-qubit gate acts on a coupling.
pub fn route(
    c: &Circuit,
    t: &HardwareTopology,
    seed_: u64,
    mode: &LayoutMode,
) -> Result<RoutedCircuit, RouteError> {
    let (n, np) = (c.num_qubits, t.num_qubits());
    if n > np {
        return Err(RouteError::TooManyQubits {
            logical: n,
            physical: np,
        });
    }
    match mode {
        LayoutMode::Fixed(layout) => {
            check_layout(layout, n, np)?;
            Ok(finish(c, t, layout, &mut seed::rng(seed_)))
        }
        LayoutMode::SabreLayout => {
            let back = reversed(c);
            let mut best: Option<RoutedCircuit> = None;
            for trial in 0..LAYOUT_TRIALS {
                let mut rng = seed::rng(seed::derive(seed_, trial as u64));
                let mut phys: Vec<usize> = (0..np).collect();
                phys.shuffle(&mut rng);
                let mut layout: Vec<usize> = phys[..n].to_vec();
                for _ in 0..LAYOUT_PASSES {
                    let mut fwd = Pass::new(t, &layout);
                    fwd.run(&c.gates, &mut rng);
                    let mut bwd = Pass::new(t, &fwd.l2p);
                    bwd.run(&back, &mut rng);
                    layout = bwd.l2p;
                }
                let r = finish(c, t, &layout, &mut rng);
                if best
                    .as_ref()
                    .is_none_or(|b| (r.swap_count, r.depth) < (b.swap_count, b.depth))
                {
                    best = Some(r);
                }
            }
            Ok(best.expect("at least one layout trial"))
        }
    }
}

/// Sum of routed depths.
pub fn sum_subcircuit_depth(routed: &[RoutedCircuit]) -> usize {
    routed.iter().map(|r| r.depth).sum()
}
