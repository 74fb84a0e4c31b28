//! JSON cut plans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::cost::{count_cuts, total_cost, CostBreakdown, CostError, GedEffort, Partition};
use crate::cutter::{CutSolution, CutterConfig};
use crate::qpd::{lower_to_cz, sampling_overhead, split_circuit, CutPoint, QpdError};
use crate::topo::{HardwareTopology, InteractionGraph};

pub const PLAN_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("unsupported plan version {0}")]
    Version(u32),
    #[error("plan is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Qpd(#[from] QpdError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSubcircuit {
    /// Original qubit of each local qubit.
    pub qubits: Vec<usize>,
    pub qasm: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub num_cuts: u64,
    pub sampling_overhead: f64,
    pub ged_per_subcircuit: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutPlan {
    pub version: u32,
    pub topology: String,
    pub alpha: f64,
    pub seed: u64,
    pub max_subcircuit_qubits: usize,
    pub ged_effort: GedEffort,
    pub num_qubits: usize,
    /// Interaction graph as `[a, b, weight]`.
    pub interaction_edges: Vec<[u64; 3]>,
    pub partition: Partition,
    pub cost: CostBreakdown,
    pub cut_points: Vec<CutPoint>,
    pub subcircuits: Vec<PlanSubcircuit>,
    pub metrics: PlanMetrics,
}

impl CutPlan {
    pub fn new(
        c: &Circuit,
        t: &HardwareTopology,
        cfg: &CutterConfig,
        sol: &CutSolution,
    ) -> Result<Self, PlanError> {
        let cut_idx: Vec<usize> = sol.cut_gates.iter().map(|&(i, _)| i).collect();
        let (lowered, _) = lower_to_cz(c, &cut_idx)?;
        let (progs, cut_points) = split_circuit(&lowered, &sol.partition)?;
        let g = InteractionGraph::from_circuit(c);
        Ok(CutPlan {
            version: PLAN_VERSION,
            topology: t.name().to_string(),
            alpha: cfg.alpha,
            seed: cfg.seed,
            max_subcircuit_qubits: cfg.max_subcircuit_qubits,
            ged_effort: cfg.ged_effort,
            num_qubits: c.num_qubits,
            interaction_edges: g
                .edges()
                .iter()
                .map(|&(a, b, w)| [a as u64, b as u64, w])
                .collect(),
            partition: sol.partition.clone(),
            cost: sol.cost.clone(),
            cut_points,
            subcircuits: progs
                .iter()
                .map(|p| PlanSubcircuit {
                    qubits: p.qubit_map.clone(),
                    qasm: p.to_qasm(),
                })
                .collect(),
            metrics: PlanMetrics {
                num_cuts: sol.cost.num_cuts,
                sampling_overhead: sampling_overhead(sol.cost.num_cuts as usize),
                ged_per_subcircuit: sol.cost.ged_per_subcircuit.clone(),
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let plan: CutPlan = serde_json::from_str(text)?;
        if plan.version != PLAN_VERSION {
            return Err(PlanError::Version(plan.version));
        }
        Ok(plan)
    }

    pub fn interaction_graph(&self) -> InteractionGraph {
        let edges: Vec<(usize, usize, u64)> = self
            .interaction_edges
            .iter()
            .map(|e| (e[0] as usize, e[1] as usize, e[2]))
            .collect();
        InteractionGraph::from_edges(self.num_qubits, &edges)
    }

    /// Recomputes cut count and combined cost from the stored graph and partition.
    pub fn verify(&self, t: &HardwareTopology) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::Inconsistent(m));
        let g = self.interaction_graph();
        let cuts = count_cuts(&g, &self.partition);
        if cuts != self.cost.num_cuts
            || cuts != self.metrics.num_cuts
            || cuts as usize != self.cut_points.len()
        {
            return bad(format!(
                "stored cut count {} but the partition cuts {cuts}",
                self.cost.num_cuts
            ));
        }
        let (re, _) = total_cost(
            &g,
            &self.partition,
            t,
            self.alpha,
            self.ged_effort,
            self.seed,
        )?;
        if (re.total - self.cost.total).abs() > 1e-9 {
            return bad(format!(
                "stored total {} but recomputed {}",
                self.cost.total, re.total
            ));
        }
        let stored_sum: f64 = self.metrics.ged_per_subcircuit.iter().sum();
        if (stored_sum - re.ged_sum()).abs() > 1e-9 {
            return bad(format!(
                "stored edit distance {stored_sum} but recomputed {}",
                re.ged_sum()
            ));
        }
        if self.subcircuits.len() != self.partition.num_blocks() {
            return bad("subcircuit count differs from the partition".into());
        }
        Ok(())
    }
}
