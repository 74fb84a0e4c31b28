//! Cut-count objective, edit-distance routing proxy, and the combined cutting cost.
//!
//! The edit distance only charges for couplings that have to be added to the hardware graph:
//! an interaction edge whose endpoints land on non-adjacent physical qubits costs
//! `weight * dist`. Removing unused couplings or qubits is free. The node-to-qubit
//! correspondence is not part of the metric itself, so [`ged_cost`] searches for a good
//! [`Placement`] and reports the cost under the best one it finds.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::seed;
use crate::topo::{HardwareTopology, InteractionGraph};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("subgraph has {nodes} nodes but the topology only {physical} qubits")]
    TooManyNodes { nodes: usize, physical: usize },
    #[error("circuit has no gates")]
    EmptyCircuit,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// Assignment of interaction-graph nodes to subcircuits `0..num_blocks`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    num_blocks: usize,
}

impl Partition {
    /// Validates that labels are `0..K` with every label used.
    pub fn new(assignment: Vec<usize>) -> Result<Self, CostError> {
        let num_blocks = assignment.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; num_blocks];
        for &b in &assignment {
            used[b] = true;
        }
        if let Some(b) = used.iter().position(|u| !u) {
            return Err(CostError::InvalidPartition(format!(
                "subcircuit {b} is empty"
            )));
        }
        Ok(Partition {
            assignment,
            num_blocks,
        })
    }

    /// Builds a partition from explicit blocks, relabelled canonically.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self, CostError> {
        let mut assignment = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            for &v in block {
                if v >= n || assignment[v] != usize::MAX {
                    return Err(CostError::InvalidPartition(format!(
                        "node {v} assigned twice or out of range"
                    )));
                }
                assignment[v] = b;
            }
        }
        if assignment.contains(&usize::MAX) {
            return Err(CostError::InvalidPartition(
                "not every node is assigned".into(),
            ));
        }
        Ok(Self::new(assignment)?.canonical())
    }

    /// Everything in one subcircuit.
    pub fn single(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            num_blocks: usize::from(n > 0),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks];
        for (v, &b) in self.assignment.iter().enumerate() {
            blocks[b].push(v);
        }
        blocks
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks().iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Relabels blocks in order of their smallest member.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.num_blocks];
        let mut next = 0;
        let assignment = self
            .assignment
            .iter()
            .map(|&b| {
                if map[b] == usize::MAX {
                    map[b] = next;
                    next += 1;
                }
                map[b]
            })
            .collect();
        Partition {
            assignment,
            num_blocks: self.num_blocks,
        }
    }
}

/// Node-to-physical-qubit injection for one subgraph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement(pub Vec<usize>);

impl Placement {
    pub fn physical(&self, node: usize) -> usize {
        self.0[node]
    }

    pub fn is_injective_within(&self, num_physical: usize) -> bool {
        let mut seen = vec![false; num_physical];
        self.0
            .iter()
            .all(|&p| p < num_physical && !std::mem::replace(&mut seen[p], true))
    }
}

/// Terms of the combined cost `num_cuts + alpha * sum(ged)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub num_cuts: u64,
    pub ged_per_subcircuit: Vec<f64>,
    pub alpha: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(num_cuts: u64, ged_per_subcircuit: Vec<f64>, alpha: f64) -> Self {
        let total = combine(num_cuts, &ged_per_subcircuit, alpha);
        CostBreakdown {
            num_cuts,
            ged_per_subcircuit,
            alpha,
            total,
        }
    }

    pub fn ged_sum(&self) -> f64 {
        self.ged_per_subcircuit.iter().sum()
    }
}

pub(crate) fn combine(num_cuts: u64, ged: &[f64], alpha: f64) -> f64 {
    num_cuts as f64 + alpha * ged.iter().sum::<f64>()
}

/// Search budget for [`ged_cost`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GedEffort {
    /// Greedy seeding plus this many randomized restarts, each polished by local search.
    Restarts(u32),
    /// Branch and bound over every injection; exponential, meant for small devices.
    Exhaustive,
}

impl Default for GedEffort {
    fn default() -> Self {
        GedEffort::Restarts(16)
    }
}

/// Sum of weights of edges crossing between different subcircuits.
pub fn count_cuts(g: &InteractionGraph, p: &Partition) -> u64 {
    g.edges()
        .iter()
        .filter(|&&(a, b, _)| p.block_of(a) != p.block_of(b))
        .map(|e| e.2)
        .sum()
}

#[inline]
fn edge_cost(w: u64, d: u32) -> (u64, u64) {
    let d = u64::from(d);
    (if d >= 2 { w * d } else { 0 }, w * d)
}

/// Edit-distance cost of `g_sub` under an explicit placement.
pub fn placement_cost(
    g_sub: &InteractionGraph,
    t: &HardwareTopology,
    placement: &Placement,
) -> u64 {
    g_sub
        .edges()
        .iter()
        .map(|&(a, b, w)| edge_cost(w, t.dist(placement.0[a], placement.0[b])).0)
        .sum()
}

struct Placer<'a> {
    t: &'a HardwareTopology,
    nbrs: Vec<Vec<(usize, u64)>>,
    wdeg: Vec<u64>,
}

impl<'a> Placer<'a> {
    fn new(g: &InteractionGraph, t: &'a HardwareTopology) -> Self {
        let n = g.node_count();
        Placer {
            t,
            nbrs: (0..n).map(|u| g.neighbors(u).collect()).collect(),
            wdeg: (0..n).map(|u| g.weighted_degree(u)).collect(),
        }
    }

    fn n(&self) -> usize {
        self.nbrs.len()
    }

    fn total(&self, pos: &[usize]) -> (u64, u64) {
        let mut acc = (0, 0);
        for (u, ns) in self.nbrs.iter().enumerate() {
            for &(v, w) in ns {
                if u < v {
                    let c = edge_cost(w, self.t.dist(pos[u], pos[v]));
                    acc.0 += c.0;
                    acc.1 += c.1;
                }
            }
        }
        acc
    }

    /// Cost of `u`'s edges if `u` sat on `p`, skipping neighbor `skip`.
    fn local(&self, u: usize, p: usize, pos: &[usize], skip: usize) -> (u64, u64) {
        let mut acc = (0, 0);
        for &(v, w) in &self.nbrs[u] {
            if v != skip && pos[v] != usize::MAX {
                let c = edge_cost(w, self.t.dist(p, pos[v]));
                acc.0 += c.0;
                acc.1 += c.1;
            }
        }
        acc
    }

    /// Greedy construction; `rng` randomizes the anchors and tie-breaks.
    fn greedy(&self, mut rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
        let n = self.n();
        let np = self.t.num_qubits();
        let mut pos = vec![usize::MAX; n];
        let mut used = vec![false; np];
        let mut attach = vec![0u64; n];
        for step in 0..n {
            let u = if step == 0 {
                match rng.as_deref_mut() {
                    Some(r) => {
                        let top = *self.wdeg.iter().max().unwrap();
                        let cands: Vec<usize> =
                            (0..n).filter(|&v| self.wdeg[v] * 2 >= top).collect();
                        *cands.choose(r).unwrap()
                    }
                    None => (0..n)
                        .max_by_key(|&v| (self.wdeg[v], std::cmp::Reverse(v)))
                        .unwrap(),
                }
            } else {
                let best = (0..n)
                    .filter(|&v| pos[v] == usize::MAX)
                    .map(|v| (attach[v], self.wdeg[v]))
                    .max()
                    .unwrap();
                let cands: Vec<usize> = (0..n)
                    .filter(|&v| pos[v] == usize::MAX && (attach[v], self.wdeg[v]) == best)
                    .collect();
                match rng.as_deref_mut() {
                    Some(r) => *cands.choose(r).unwrap(),
                    None => cands[0],
                }
            };
            let p = if step == 0 {
                match rng.as_deref_mut() {
                    Some(r) => r.gen_range(0..np),
                    None => (0..np)
                        .max_by_key(|&p| (self.t.degree(p), std::cmp::Reverse(p)))
                        .unwrap(),
                }
            } else {
                let placed_nbrs = attach[u] > 0;
                let mut best_key = None;
                let mut cands = Vec::new();
                for p in (0..np).filter(|&p| !used[p]) {
                    let key = if placed_nbrs {
                        let (eq, raw) = self.local(u, p, &pos, usize::MAX);
                        (eq, raw, 0)
                    } else {
                        // disconnected from everything placed so far: stay close to the cluster
                        let near = pos
                            .iter()
                            .filter(|&&q| q != usize::MAX)
                            .map(|&q| u64::from(self.t.dist(p, q)))
                            .min()
                            .unwrap_or(0);
                        (0, near, 0)
                    };
                    let free_deg = self.t.neighbors(p).iter().filter(|&&q| !used[q]).count();
                    let key = (key.0, key.1, usize::MAX - free_deg);
                    match best_key {
                        Some(b) if key > b => {}
                        Some(b) if key == b => cands.push(p),
                        _ => {
                            best_key = Some(key);
                            cands.clear();
                            cands.push(p);
                        }
                    }
                }
                match rng.as_deref_mut() {
                    Some(r) => *cands.choose(r).unwrap(),
                    None => cands[0],
                }
            };
            pos[u] = p;
            used[p] = true;
            for &(v, w) in &self.nbrs[u] {
                attach[v] += w;
            }
        }
        pos
    }

    /// First-improvement relocation and swap moves until a local optimum (bounded passes).
    fn polish(&self, pos: &mut [usize]) {
        let np = self.t.num_qubits();
        let mut owner = vec![usize::MAX; np];
        for (u, &p) in pos.iter().enumerate() {
            owner[p] = u;
        }
        let add = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1 + b.1);
        for _ in 0..8 {
            let mut improved = false;
            for u in 0..self.n() {
                let pu = pos[u];
                let cur_u = self.local(u, pu, pos, usize::MAX);
                for p in 0..np {
                    if p == pu {
                        continue;
                    }
                    let x = owner[p];
                    let (before, after) = if x == usize::MAX {
                        (cur_u, self.local(u, p, pos, usize::MAX))
                    } else {
                        let cur_x = self.local(x, p, pos, u);
                        let cur_u_wo = self.local(u, pu, pos, x);
                        // the u-x edge (if any) keeps its length under a swap
                        (
                            add(cur_u_wo, cur_x),
                            add(self.local(u, p, pos, x), self.local(x, pu, pos, u)),
                        )
                    };
                    if after < before {
                        pos[u] = p;
                        owner[p] = u;
                        owner[pu] = x;
                        if x != usize::MAX {
                            pos[x] = pu;
                        }
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    fn exhaustive(&self, incumbent: (u64, Vec<usize>)) -> (u64, Vec<usize>) {
        let n = self.n();
        // place heavy, well-connected nodes first for early pruning
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut inorder = vec![false; n];
        while order.len() < n {
            let next = (0..n)
                .filter(|&v| !inorder[v])
                .max_by_key(|&v| {
                    let att: u64 = self.nbrs[v]
                        .iter()
                        .filter(|(x, _)| inorder[*x])
                        .map(|e| e.1)
                        .sum();
                    (att, self.wdeg[v], std::cmp::Reverse(v))
                })
                .unwrap();
            inorder[next] = true;
            order.push(next);
        }
        let mut best = incumbent;
        let mut pos = vec![usize::MAX; n];
        let mut used = vec![false; self.t.num_qubits()];
        self.branch(&order, 0, 0, &mut pos, &mut used, &mut best);
        best
    }

    fn branch(
        &self,
        order: &[usize],
        k: usize,
        acc: u64,
        pos: &mut [usize],
        used: &mut [bool],
        best: &mut (u64, Vec<usize>),
    ) {
        if acc >= best.0 {
            return;
        }
        if k == order.len() {
            *best = (acc, pos.to_vec());
            return;
        }
        let u = order[k];
        for p in 0..self.t.num_qubits() {
            if used[p] {
                continue;
            }
            let inc = self.local(u, p, pos, usize::MAX).0;
            pos[u] = p;
            used[p] = true;
            self.branch(order, k + 1, acc + inc, pos, used, best);
            pos[u] = usize::MAX;
            used[p] = false;
        }
    }
}

/// Edit distance from `t` to `g_sub`, with the placement that achieves it.
///
/// Restart 0 is the deterministic greedy layout; restart `i >= 1` draws from substream `i`
/// of `seed`. The best placement so far is kept, so more effort never increases the cost.
pub fn ged_cost(
    g_sub: &InteractionGraph,
    t: &HardwareTopology,
    effort: GedEffort,
    seed: u64,
) -> Result<(u64, Placement), CostError> {
    let n = g_sub.node_count();
    if n > t.num_qubits() {
        return Err(CostError::TooManyNodes {
            nodes: n,
            physical: t.num_qubits(),
        });
    }
    if n == 0 {
        return Ok((0, Placement(Vec::new())));
    }
    let placer = Placer::new(g_sub, t);
    let restarts = match effort {
        GedEffort::Restarts(r) => r,
        GedEffort::Exhaustive => 16,
    };
    let mut best_pos = placer.greedy(None);
    placer.polish(&mut best_pos);
    let mut best = placer.total(&best_pos);
    for i in 1..=u64::from(restarts) {
        if best.0 == 0 {
            break;
        }
        let mut rng = seed::rng(seed::derive(seed, i));
        let mut pos = placer.greedy(Some(&mut rng));
        placer.polish(&mut pos);
        let c = placer.total(&pos);
        if c < best {
            best = c;
            best_pos = pos;
        }
    }
    let (cost, pos) = match effort {
        GedEffort::Exhaustive if best.0 > 0 => placer.exhaustive((best.0, best_pos)),
        _ => (best.0, best_pos),
    };
    Ok((cost, Placement(pos)))
}

/// Seed used for the edit-distance search of the block holding `members`.
pub fn block_seed(seed: u64, members: &[usize]) -> u64 {
    members
        .iter()
        .fold(seed::mix(seed), |h, &m| seed::derive(h, m as u64))
}

/// Two-qubit gate density `2 * M2 / (N * l)` with `l` the circuit depth.
pub fn gate_density(c: &Circuit) -> Result<f64, CostError> {
    if c.is_empty() || c.num_qubits == 0 {
        return Err(CostError::EmptyCircuit);
    }
    let m2 = c.two_qubit_count() as f64;
    Ok(2.0 * m2 / (c.num_qubits as f64 * c.depth() as f64))
}

/// Evaluates the combined cost of partition `p` of `g` on topology `t`.
///
/// Returns the breakdown together with the placement found for each subcircuit.
pub fn total_cost(
    g: &InteractionGraph,
    p: &Partition,
    t: &HardwareTopology,
    alpha: f64,
    effort: GedEffort,
    seed: u64,
) -> Result<(CostBreakdown, Vec<Placement>), CostError> {
    if p.len() != g.node_count() {
        return Err(CostError::InvalidPartition(format!(
            "partition covers {} nodes, graph has {}",
            p.len(),
            g.node_count()
        )));
    }
    let mut geds = Vec::with_capacity(p.num_blocks());
    let mut placements = Vec::with_capacity(p.num_blocks());
    for block in p.blocks() {
        let sub = g.induced(&block);
        let members: Vec<usize> = {
            let mut m: Vec<usize> = block
                .iter()
                .flat_map(|&v| g.members(v).iter().copied())
                .collect();
            m.sort_unstable();
            m
        };
        let (c, pl) = ged_cost(&sub, t, effort, block_seed(seed, &members))?;
        geds.push(c as f64);
        placements.push(pl);
    }
    Ok((
        CostBreakdown::new(count_cuts(g, p), geds, alpha),
        placements,
    ))
}
