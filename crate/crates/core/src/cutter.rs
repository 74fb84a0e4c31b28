//! Randomized recursive edge contraction over the interaction graph.
//!
//! Each trial contracts randomly drawn edges (weight-proportional, i.e. uniform over the
//! underlying two-qubit gates) whose merge keeps the node within the subcircuit size bound,
//! down to `ceil(sqrt(n))` nodes, then splits into two independent continuations and keeps the
//! cheaper one. A branch ends when no contractible edge is left and is scored with
//! `cuts + alpha * sum(edit distance)`. The best of `r` trials wins.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::cost::{
    block_seed, ged_cost, total_cost, CostBreakdown, CostError, GedEffort, Partition, Placement,
};
use crate::seed;
use crate::topo::{HardwareTopology, InteractionGraph};

/// Graphs at or below this size finish both branches by plain contraction.
const SMALL_GRAPH: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum CutError {
    #[error(
        "no partition satisfies the size bound of {max} qubits (a node already holds {largest})"
    )]
    Infeasible { max: usize, largest: usize },
    #[error("subcircuit bound {max} exceeds the {physical}-qubit topology")]
    BoundExceedsDevice { max: usize, physical: usize },
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Iterations {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutterConfig {
    pub alpha: f64,
    pub max_subcircuit_qubits: usize,
    pub iterations: Iterations,
    pub seed: u64,
    pub ged_effort: GedEffort,
}

impl CutterConfig {
    pub fn new(alpha: f64, max_subcircuit_qubits: usize) -> Self {
        CutterConfig {
            alpha,
            max_subcircuit_qubits,
            iterations: Iterations::Auto,
            seed: 0,
            ged_effort: GedEffort::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: Iterations) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_effort(mut self, effort: GedEffort) -> Self {
        self.ged_effort = effort;
        self
    }

    fn resolve_iterations(&self, n: usize) -> Result<usize, CutError> {
        match self.iterations {
            Iterations::Auto => Ok(auto_iterations(n.max(2))),
            Iterations::Fixed(0) => Err(CutError::NoIterations),
            Iterations::Fixed(r) => Ok(r),
        }
    }
}

/// Trial count `ceil(3 * log2(n)^2)`.
pub fn auto_iterations(n_qubits: usize) -> usize {
    let l = (n_qubits.max(2) as f64).log2();
    (3.0 * l * l - 1e-9).ceil() as usize
}

#[derive(Clone, Debug)]
pub struct CutSolution {
    pub partition: Partition,
    pub cost: CostBreakdown,
    /// `(gate index, qubit pair)` of every two-qubit gate crossing subcircuits.
    pub cut_gates: Vec<(usize, (usize, usize))>,
    pub subcircuit_graphs: Vec<InteractionGraph>,
    pub placements: Vec<Placement>,
}

/// Contractible multigraph used inside one trial.
#[derive(Clone)]
struct Work {
    alive: Vec<bool>,
    live: usize,
    size: Vec<usize>,
    members: Vec<Vec<usize>>,
    adj: Vec<BTreeMap<usize, u64>>,
}

impl Work {
    fn new(g: &InteractionGraph) -> Self {
        let n = g.node_count();
        Work {
            alive: vec![true; n],
            live: n,
            size: (0..n).map(|v| g.node_size(v)).collect(),
            members: (0..n).map(|v| vec![v]).collect(),
            adj: (0..n).map(|v| g.neighbors(v).collect()).collect(),
        }
    }

    fn constrained(&self, max: usize) -> (Vec<(usize, usize, u64)>, u64) {
        let mut out = Vec::new();
        let mut total = 0;
        for u in (0..self.alive.len()).filter(|&u| self.alive[u]) {
            for (&v, &w) in self.adj[u].range(u + 1..) {
                if self.size[u] + self.size[v] <= max {
                    out.push((u, v, w));
                    total += w;
                }
            }
        }
        (out, total)
    }

    fn sample(&self, max: usize, rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
        let (edges, total) = self.constrained(max);
        if total == 0 {
            return None;
        }
        let mut r = rng.gen_range(0..total);
        for (u, v, w) in edges {
            if r < w {
                return Some((u, v));
            }
            r -= w;
        }
        unreachable!("weighted draw within total")
    }

    fn has_contractible(&self, max: usize) -> bool {
        (0..self.alive.len()).filter(|&u| self.alive[u]).any(|u| {
            self.adj[u]
                .keys()
                .any(|&v| self.size[u] + self.size[v] <= max)
        })
    }

    fn contract(&mut self, a: usize, b: usize) {
        let (keep, gone) = if self.adj[a].len() >= self.adj[b].len() {
            (a, b)
        } else {
            (b, a)
        };
        let moved = std::mem::take(&mut self.adj[gone]);
        for (v, w) in moved {
            self.adj[v].remove(&gone);
            if v != keep {
                *self.adj[keep].entry(v).or_insert(0) += w;
                *self.adj[v].entry(keep).or_insert(0) += w;
            }
        }
        self.adj[keep].remove(&gone);
        let m = std::mem::take(&mut self.members[gone]);
        self.members[keep].extend(m);
        self.size[keep] += self.size[gone];
        self.alive[gone] = false;
        self.live -= 1;
    }

    fn cut_weight(&self) -> u64 {
        (0..self.alive.len())
            .filter(|&u| self.alive[u])
            .flat_map(|u| self.adj[u].range(u + 1..).map(|(_, &w)| w))
            .sum()
    }

    /// Blocks sorted by smallest member, members ascending.
    fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = (0..self.alive.len())
            .filter(|&u| self.alive[u])
            .map(|u| {
                let mut m = self.members[u].clone();
                m.sort_unstable();
                m
            })
            .collect();
        blocks.sort_unstable_by_key(|b| b[0]);
        blocks
    }
}

#[derive(Clone, Debug)]
struct Leaf {
    total: f64,
    assignment: Vec<usize>,
    num_blocks: usize,
}

impl Leaf {
    fn better_than(&self, other: &Leaf) -> bool {
        self.total
            .total_cmp(&other.total)
            .then(self.num_blocks.cmp(&other.num_blocks))
            .then_with(|| self.assignment.cmp(&other.assignment))
            .is_lt()
    }
}

fn pick(a: Leaf, b: Leaf) -> Leaf {
    if b.better_than(&a) {
        b
    } else {
        a
    }
}

struct Search<'a> {
    g: &'a InteractionGraph,
    t: &'a HardwareTopology,
    cfg: &'a CutterConfig,
    ged_cache: Mutex<HashMap<Vec<usize>, u64>>,
}

impl Search<'_> {
    fn ged_of(&self, block: &[usize]) -> Result<u64, CostError> {
        let mut key: Vec<usize> = block
            .iter()
            .flat_map(|&v| self.g.members(v).iter().copied())
            .collect();
        key.sort_unstable();
        if let Some(&c) = self.ged_cache.lock().unwrap().get(&key) {
            return Ok(c);
        }
        let sub = self.g.induced(block);
        let (c, _) = ged_cost(
            &sub,
            self.t,
            self.cfg.ged_effort,
            block_seed(self.cfg.seed, &key),
        )?;
        self.ged_cache.lock().unwrap().insert(key, c);
        Ok(c)
    }

    fn score(&self, w: &Work) -> Result<Leaf, CostError> {
        let blocks = w.blocks();
        let mut ged = 0u64;
        if self.cfg.alpha != 0.0 {
            for b in &blocks {
                ged += self.ged_of(b)?;
            }
        }
        let mut assignment = vec![0; w.alive.len()];
        for (i, b) in blocks.iter().enumerate() {
            for &v in b {
                assignment[v] = i;
            }
        }
        Ok(Leaf {
            total: w.cut_weight() as f64 + self.cfg.alpha * ged as f64,
            assignment,
            num_blocks: blocks.len(),
        })
    }

    fn contract_to_end(&self, mut w: Work, stream: u64) -> Result<Leaf, CostError> {
        let mut rng = seed::rng(stream);
        while let Some((u, v)) = w.sample(self.cfg.max_subcircuit_qubits, &mut rng) {
            w.contract(u, v);
        }
        self.score(&w)
    }

    fn merge_nodes(&self, mut w: Work, stream: u64) -> Result<Leaf, CostError> {
        let max = self.cfg.max_subcircuit_qubits;
        if !w.has_contractible(max) {
            return self.score(&w);
        }
        let n = w.live;
        if n <= SMALL_GRAPH {
            let a = self.contract_to_end(w.clone(), seed::derive(stream, 1))?;
            let b = self.contract_to_end(w, seed::derive(stream, 2))?;
            return Ok(pick(a, b));
        }
        let target = (n as f64).sqrt().ceil() as usize;
        let mut rng = seed::rng(stream);
        while w.live > target {
            match w.sample(max, &mut rng) {
                Some((u, v)) => w.contract(u, v),
                None => return self.score(&w),
            }
        }
        let a = self.merge_nodes(w.clone(), seed::derive(stream, 1))?;
        let b = self.merge_nodes(w, seed::derive(stream, 2))?;
        Ok(pick(a, b))
    }

    fn run(&self, trials: usize, stream: u64) -> Result<Leaf, CostError> {
        let start = Work::new(self.g);
        let leaves: Vec<Leaf> = (0..trials)
            .into_par_iter()
            .map(|i| self.merge_nodes(start.clone(), seed::derive(stream, i as u64)))
            .collect::<Result<_, _>>()?;
        Ok(leaves.into_iter().reduce(pick).expect("at least one trial"))
    }
}

/// Searches for a low-cost partition of `g0`; disconnected components are solved separately.
pub fn search_partition(
    g0: &InteractionGraph,
    t: &HardwareTopology,
    cfg: &CutterConfig,
) -> Result<(Partition, CostBreakdown, Vec<Placement>), CutError> {
    let max = cfg.max_subcircuit_qubits;
    if max > t.num_qubits() {
        return Err(CutError::BoundExceedsDevice {
            max,
            physical: t.num_qubits(),
        });
    }
    let largest = (0..g0.node_count())
        .map(|v| g0.node_size(v))
        .max()
        .unwrap_or(0);
    if max == 0 || largest > max {
        return Err(CutError::Infeasible { max, largest });
    }
    cfg.resolve_iterations(2)?;

    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (ci, comp) in g0.components().into_iter().enumerate() {
        if comp.len() == 1 {
            blocks.push(comp);
            continue;
        }
        let sub = g0.induced(&comp);
        let search = Search {
            g: &sub,
            t,
            cfg,
            ged_cache: Mutex::new(HashMap::new()),
        };
        let trials = cfg.resolve_iterations(comp.len())?;
        let leaf = search.run(trials, seed::derive(cfg.seed, ci as u64))?;
        let mut local = vec![Vec::new(); leaf.num_blocks];
        for (i, &b) in leaf.assignment.iter().enumerate() {
            local[b].push(comp[i]);
        }
        blocks.extend(local);
    }
    let partition = Partition::from_blocks(g0.node_count(), &blocks)?;
    let (cost, placements) = total_cost(g0, &partition, t, cfg.alpha, cfg.ged_effort, cfg.seed)?;
    Ok((partition, cost, placements))
}

/// Cuts a circuit for topology `t`.
pub fn cut_circuit(
    c: &Circuit,
    t: &HardwareTopology,
    cfg: &CutterConfig,
) -> Result<CutSolution, CutError> {
    let g0 = InteractionGraph::from_circuit(c);
    let (partition, cost, placements) = search_partition(&g0, t, cfg)?;
    let cut_gates = c
        .gates
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.pair().map(|p| (i, p)))
        .filter(|&(_, (a, b))| partition.block_of(a) != partition.block_of(b))
        .collect();
    let subcircuit_graphs = partition.blocks().iter().map(|b| g0.induced(b)).collect();
    Ok(CutSolution {
        partition,
        cost,
        cut_gates,
        subcircuit_graphs,
        placements,
    })
}
