//! Qubit interaction graphs and hardware coupling maps.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;

#[derive(Debug, Error)]
pub enum TopoError {
    #[error("unknown topology '{0}'")]
    UnknownTopology(String),
    #[error("topology '{0}' is not connected")]
    Disconnected(String),
    #[error("invalid coupling ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("({0}, {1}) is not an edge of the graph")]
    NoSuchEdge(usize, usize),
    #[error("malformed topology file: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Weighted logical-qubit interaction graph.
///
/// Each node stands for one or more original qubits (`members`); edge weights count the
/// two-qubit gates between the groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionGraph {
    adj: Vec<BTreeMap<usize, u64>>,
    members: Vec<Vec<usize>>,
}

impl InteractionGraph {
    /// `n` isolated single-qubit nodes.
    pub fn with_nodes(n: usize) -> Self {
        InteractionGraph {
            adj: vec![BTreeMap::new(); n],
            members: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn from_circuit(c: &Circuit) -> Self {
        let mut g = Self::with_nodes(c.num_qubits);
        for gate in &c.gates {
            if let Some((a, b)) = gate.pair() {
                g.add_weight(a, b, 1);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, u64)]) -> Self {
        let mut g = Self::with_nodes(n);
        for &(a, b, w) in edges {
            g.add_weight(a, b, w);
        }
        g
    }

    pub fn add_weight(&mut self, a: usize, b: usize, w: u64) {
        assert!(a != b, "self-loop on node {a}");
        if w == 0 {
            return;
        }
        *self.adj[a].entry(b).or_insert(0) += w;
        *self.adj[b].entry(a).or_insert(0) += w;
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|m| m.len()).sum::<usize>() / 2
    }

    /// Edges as `(a, b, weight)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for (a, m) in self.adj.iter().enumerate() {
            for (&b, &w) in m.range(a + 1..) {
                out.push((a, b, w));
            }
        }
        out
    }

    pub fn weight(&self, a: usize, b: usize) -> u64 {
        self.adj[a].get(&b).copied().unwrap_or(0)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges().iter().map(|e| e.2).sum()
    }

    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.adj[a].iter().map(|(&b, &w)| (b, w))
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adj[a].len()
    }

    pub fn weighted_degree(&self, a: usize) -> u64 {
        self.adj[a].values().sum()
    }

    pub fn node_size(&self, a: usize) -> usize {
        self.members[a].len()
    }

    /// Original qubits merged into node `a`, ascending.
    pub fn members(&self, a: usize) -> &[usize] {
        &self.members[a]
    }

    /// Merges the endpoints of edge `(a, b)`; the merged node keeps index `min(a, b)` and later
    /// nodes shift down by one.
    pub fn contract_edge(&self, a: usize, b: usize) -> Result<InteractionGraph, TopoError> {
        if a == b
            || a >= self.node_count()
            || b >= self.node_count()
            || !self.adj[a].contains_key(&b)
        {
            return Err(TopoError::NoSuchEdge(a, b));
        }
        let (keep, gone) = (a.min(b), a.max(b));
        let relabel = |v: usize| {
            if v == gone {
                keep
            } else if v > gone {
                v - 1
            } else {
                v
            }
        };
        let n = self.node_count() - 1;
        let mut adj = vec![BTreeMap::new(); n];
        for (u, m) in self.adj.iter().enumerate() {
            let nu = relabel(u);
            for (&v, &w) in m {
                let nv = relabel(v);
                if nu != nv {
                    *adj[nu].entry(nv).or_insert(0) += w;
                }
            }
        }
        let mut members: Vec<Vec<usize>> = Vec::with_capacity(n);
        for (u, m) in self.members.iter().enumerate() {
            if u == gone {
                continue;
            }
            let mut m = m.clone();
            if u == keep {
                m.extend_from_slice(&self.members[gone]);
                m.sort_unstable();
            }
            members.push(m);
        }
        Ok(InteractionGraph { adj, members })
    }

    /// Subgraph induced by `nodes`, renumbered in the given order.
    pub fn induced(&self, nodes: &[usize]) -> InteractionGraph {
        let mut index = BTreeMap::new();
        for (i, &v) in nodes.iter().enumerate() {
            index.insert(v, i);
        }
        let mut adj = vec![BTreeMap::new(); nodes.len()];
        for (i, &v) in nodes.iter().enumerate() {
            for (u, w) in self.neighbors(v) {
                if let Some(&j) = index.get(&u) {
                    adj[i].insert(j, w);
                }
            }
        }
        InteractionGraph {
            adj,
            members: nodes.iter().map(|&v| self.members[v].clone()).collect(),
        }
    }

    /// Connected components, each sorted, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

#[derive(Serialize, Deserialize)]
struct TopologyFile {
    name: String,
    num_qubits: usize,
    edges: Vec<[usize; 2]>,
}

/// Undirected hardware coupling graph with its hop-distance matrix.
#[derive(Clone, Debug)]
pub struct HardwareTopology {
    name: String,
    num_qubits: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    dist: Vec<u32>,
}

impl PartialEq for HardwareTopology {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.num_qubits == other.num_qubits && self.edges == other.edges
    }
}

const LAGOS: &str = include_str!("../fixtures/topologies/lagos.json");
const GUADALUPE: &str = include_str!("../fixtures/topologies/guadalupe.json");
const TOKYO: &str = include_str!("../fixtures/topologies/tokyo.json");
const MUMBAI: &str = include_str!("../fixtures/topologies/mumbai.json");
const BRISBANE: &str = include_str!("../fixtures/topologies/brisbane.json");

/// Lagos qubit that links to the next chip in [`HardwareTopology::multi_chip`].
pub const CHIP_EXIT_QUBIT: usize = 6;
/// Lagos qubit that receives the link from the previous chip.
pub const CHIP_ENTRY_QUBIT: usize = 0;

impl HardwareTopology {
    pub fn new(
        name: impl Into<String>,
        num_qubits: usize,
        couplings: &[(usize, usize)],
    ) -> Result<Self, TopoError> {
        let name = name.into();
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(couplings.len());
        for &(a, b) in couplings {
            if a == b || a >= num_qubits || b >= num_qubits {
                return Err(TopoError::InvalidEdge(a, b));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut adj = vec![Vec::new(); num_qubits];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let dist = all_pairs_bfs(&adj);
        if num_qubits == 0 || dist.contains(&u32::MAX) {
            return Err(TopoError::Disconnected(name));
        }
        Ok(HardwareTopology {
            name,
            num_qubits,
            edges,
            adj,
            dist,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TopoError> {
        let f: TopologyFile = serde_json::from_str(text)?;
        let couplings: Vec<(usize, usize)> = f.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(f.name, f.num_qubits, &couplings)
    }

    pub fn to_json(&self) -> String {
        let f = TopologyFile {
            name: self.name.clone(),
            num_qubits: self.num_qubits,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        };
        serde_json::to_string_pretty(&f).expect("topology serializes")
    }

    pub fn load(path: &Path) -> Result<Self, TopoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn line(n: usize) -> Result<Self, TopoError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(format!("line({n})"), n, &edges)
    }

    pub fn grid(rows: usize, cols: usize) -> Result<Self, TopoError> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let q = r * cols + c;
                if c + 1 < cols {
                    edges.push((q, q + 1));
                }
                if r + 1 < rows {
                    edges.push((q, q + cols));
                }
            }
        }
        Self::new(format!("grid({rows},{cols})"), rows * cols, &edges)
    }

    /// `k` Lagos chips in a chain; chip `c` occupies qubits `7c..7c+7` and its qubit
    /// [`CHIP_EXIT_QUBIT`] is coupled to qubit [`CHIP_ENTRY_QUBIT`] of chip `c + 1`.
    pub fn multi_chip(k: usize) -> Result<Self, TopoError> {
        let lagos = Self::lagos();
        let n = lagos.num_qubits;
        let mut edges = Vec::new();
        for c in 0..k {
            edges.extend(lagos.edges.iter().map(|&(a, b)| (a + c * n, b + c * n)));
            if c + 1 < k {
                edges.push((c * n + CHIP_EXIT_QUBIT, (c + 1) * n + CHIP_ENTRY_QUBIT));
            }
        }
        Self::new(format!("multi_chip({k})"), k * n, &edges)
    }

    pub fn lagos() -> Self {
        Self::from_json(LAGOS).expect("lagos fixture")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn couplings(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, p: usize) -> &[usize] {
        &self.adj[p]
    }

    pub fn degree(&self, p: usize) -> usize {
        self.adj[p].len()
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> u32 {
        self.dist[a * self.num_qubits + b]
    }

    pub fn is_coupled(&self, a: usize, b: usize) -> bool {
        self.dist(a, b) == 1
    }

    /// Distance matrix as nested rows.
    pub fn distance_matrix(&self) -> Vec<Vec<u32>> {
        self.dist
            .chunks(self.num_qubits)
            .map(|r| r.to_vec())
            .collect()
    }
}

fn all_pairs_bfs(adj: &[Vec<usize>]) -> Vec<u32> {
    let n = adj.len();
    let mut dist = vec![u32::MAX; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        row[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if row[v] == u32::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    dist
}

fn parse_args(spec: &str, prefix: &str) -> Option<Vec<usize>> {
    let rest = spec.strip_prefix(prefix)?;
    let inner = if let Some(r) = rest.strip_prefix('(') {
        r.strip_suffix(')')?
    } else {
        rest.strip_prefix(':')?
    };
    inner.split(',').map(|s| s.trim().parse().ok()).collect()
}

/// Resolves a topology by name: `lagos`, `guadalupe`, `tokyo`, `mumbai`, `brisbane`,
/// `line(n)`, `grid(m,n)`, `multi_chip(k)` (also `line:n` style), or a path to a JSON fixture.
pub fn topology(spec: &str) -> Result<HardwareTopology, TopoError> {
    let spec = spec.trim();
    let builtin = match spec.to_ascii_lowercase().as_str() {
        "lagos" => Some(LAGOS),
        "guadalupe" => Some(GUADALUPE),
        "tokyo" => Some(TOKYO),
        "mumbai" => Some(MUMBAI),
        "brisbane" => Some(BRISBANE),
        _ => None,
    };
    if let Some(text) = builtin {
        return HardwareTopology::from_json(text);
    }
    let unknown = || TopoError::UnknownTopology(spec.to_string());
    if let Some(a) = parse_args(spec, "line") {
        return match a[..] {
            [n] if n >= 1 => HardwareTopology::line(n),
            _ => Err(unknown()),
        };
    }
    if let Some(a) = parse_args(spec, "grid") {
        return match a[..] {
            [r, c] if r >= 1 && c >= 1 => HardwareTopology::grid(r, c),
            _ => Err(unknown()),
        };
    }
    if let Some(a) = parse_args(spec, "multi_chip") {
        return match a[..] {
            [k] if k >= 1 => HardwareTopology::multi_chip(k),
            _ => Err(unknown()),
        };
    }
    if spec.ends_with(".json") {
        return HardwareTopology::load(Path::new(spec));
    }
    Err(unknown())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floyd_warshall(t: &HardwareTopology) -> Vec<Vec<u32>> {
        let n = t.num_qubits();
        let inf = u32::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for &(a, b) in t.couplings() {
            d[a][b] = 1;
            d[b][a] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn interaction_graph_counts_two_qubit_gates() {
        let mut c = Circuit::new(3);
        c.cx(0, 1).h(2).cx(1, 0).cz(1, 2);
        let g = InteractionGraph::from_circuit(&c);
        assert_eq!(g.edges(), vec![(0, 1, 2), (1, 2, 1)]);
        let mut only1q = Circuit::new(4);
        only1q.h(0).h(3);
        let g = InteractionGraph::from_circuit(&only1q);
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn contraction_sums_parallel_weights() {
        let tri = InteractionGraph::from_edges(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]);
        let g = tri.contract_edge(0, 1).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), vec![(0, 1, 2)]);
        assert_eq!(g.node_size(0), 2);
        assert_eq!(g.members(0), &[0, 1]);

        let path = InteractionGraph::from_edges(3, &[(0, 1, 1), (1, 2, 1)]);
        let g = path.contract_edge(1, 0).unwrap();
        assert_eq!(g.edges(), vec![(0, 1, 1)]);
        assert!(path.contract_edge(0, 2).is_err());
    }

    #[test]
    fn line_distances() {
        let t = topology("line(5)").unwrap();
        assert_eq!(t.couplings(), &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(t.dist(0, 4), 4);
        assert_eq!(topology("line:5").unwrap(), t);
    }

    #[test]
    fn lagos_fixture() {
        let t = topology("lagos").unwrap();
        assert_eq!(t.num_qubits(), 7);
        assert_eq!(t.couplings().len(), 6);
        // H shape: two degree-3 hubs joined through qubit 3
        let hubs: Vec<_> = (0..7).filter(|&p| t.degree(p) == 3).collect();
        assert_eq!(hubs, vec![1, 5]);
        assert_eq!(t.dist(1, 5), 2);
    }

    #[test]
    fn multi_chip_bridge() {
        let t = topology("multi_chip(2)").unwrap();
        assert_eq!(t.num_qubits(), 14);
        assert_eq!(t.couplings().len(), 13);
        assert!(t.is_coupled(CHIP_EXIT_QUBIT, 7 + CHIP_ENTRY_QUBIT));
    }

    #[test]
    fn builtin_sizes() {
        for (name, n, e) in [
            ("guadalupe", 16, 16),
            ("tokyo", 20, 35),
            ("mumbai", 27, 28),
            ("brisbane", 127, 144),
        ] {
            let t = topology(name).unwrap();
            assert_eq!((t.num_qubits(), t.couplings().len()), (n, e), "{name}");
        }
        assert!(matches!(
            topology("nowhere"),
            Err(TopoError::UnknownTopology(_))
        ));
        assert!(matches!(
            topology("line(0)"),
            Err(TopoError::UnknownTopology(_))
        ));
        assert!(matches!(
            HardwareTopology::line(0),
            Err(TopoError::Disconnected(_))
        ));
    }

    #[test]
    fn bfs_matches_floyd_warshall_and_metric_axioms() {
        let names = [
            "lagos",
            "guadalupe",
            "tokyo",
            "mumbai",
            "brisbane",
            "line(9)",
            "grid(3,4)",
            "multi_chip(3)",
        ];
        for name in names {
            let t = topology(name).unwrap();
            let fw = floyd_warshall(&t);
            assert_eq!(t.distance_matrix(), fw, "{name}");
            let n = t.num_qubits();
            for a in 0..n {
                assert_eq!(t.dist(a, a), 0);
                for b in 0..n {
                    assert_eq!(t.dist(a, b), t.dist(b, a));
                    assert_eq!(
                        t.dist(a, b) == 1,
                        t.couplings().contains(&(a.min(b), a.max(b)))
                    );
                    if n <= 30 {
                        for c in 0..n {
                            assert!(t.dist(a, c) <= t.dist(a, b) + t.dist(b, c));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let t = topology("tokyo").unwrap();
        let back = HardwareTopology::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(
            HardwareTopology::from_json(r#"{"name":"x","num_qubits":3,"edges":[[0,1]]}"#).is_err()
        );
    }
}
