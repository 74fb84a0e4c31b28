//! Gate-list intermediate representation shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gate kinds understood by the toolchain.
///
/// `Swap` only appears in routed (physical) circuits; the QASM emitter lowers it to three `cx`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    U3,
    Cz,
    Cx,
    Rzz,
    Swap,
}

impl GateKind {
    pub const ALL: [GateKind; 16] = [
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
        GateKind::Cz,
        GateKind::Cx,
        GateKind::Rzz,
        GateKind::Swap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::U3 => "u3",
            GateKind::Cz => "cz",
            GateKind::Cx => "cx",
            GateKind::Rzz => "rzz",
            GateKind::Swap => "swap",
        }
    }

    /// Number of real parameters the kind takes.
    pub fn num_params(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Rzz => 1,
            GateKind::U3 => 3,
            _ => 0,
        }
    }

    pub fn num_qubits(self) -> usize {
        match self {
            GateKind::Cz | GateKind::Cx | GateKind::Rzz | GateKind::Swap => 2,
            _ => 1,
        }
    }

    pub fn is_two_qubit(self) -> bool {
        self.num_qubits() == 2
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: &[usize], params: &[f64]) -> Self {
        Gate {
            kind,
            params: params.to_vec(),
            qubits: qubits.to_vec(),
            tags: Vec::new(),
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.push(tag.into());
        self
    }

    pub fn is_two_qubit(&self) -> bool {
        self.kind.is_two_qubit()
    }

    /// Unordered qubit pair of a two-qubit gate, smaller index first.
    pub fn pair(&self) -> Option<(usize, usize)> {
        if self.is_two_qubit() {
            let (a, b) = (self.qubits[0], self.qubits[1]);
            Some((a.min(b), a.max(b)))
        } else {
            None
        }
    }

    /// Same gate acting on relabelled qubits.
    pub fn remapped(&self, map: impl Fn(usize) -> usize) -> Gate {
        Gate {
            kind: self.kind,
            params: self.params.clone(),
            qubits: self.qubits.iter().map(|&q| map(q)).collect(),
            tags: self.tags.clone(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {kind} expects {expected} qubit(s), got {got}")]
    QubitArity {
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    #[error("gate {kind} expects {expected} parameter(s), got {got}")]
    ParamArity {
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    #[error("qubit index {qubit} out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("gate {0} acts twice on the same qubit")]
    RepeatedQubit(GateKind),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub measured_qubits: Vec<usize>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            gates: Vec::new(),
            measured_qubits: Vec::new(),
        }
    }

    pub fn validate_gate(&self, gate: &Gate) -> Result<(), CircuitError> {
        let kind = gate.kind;
        if gate.qubits.len() != kind.num_qubits() {
            return Err(CircuitError::QubitArity {
                kind,
                expected: kind.num_qubits(),
                got: gate.qubits.len(),
            });
        }
        if gate.params.len() != kind.num_params() {
            return Err(CircuitError::ParamArity {
                kind,
                expected: kind.num_params(),
                got: gate.params.len(),
            });
        }
        if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.num_qubits) {
            return Err(CircuitError::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            });
        }
        if gate.qubits.len() == 2 && gate.qubits[0] == gate.qubits[1] {
            return Err(CircuitError::RepeatedQubit(kind));
        }
        Ok(())
    }

    pub fn try_push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        self.validate_gate(&gate)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends a gate, panicking if it violates the circuit invariants.
    pub fn push(&mut self, gate: Gate) -> &mut Self {
        if let Err(e) = self.try_push(gate) {
            panic!("invalid gate: {e}");
        }
        self
    }

    pub fn gate(&mut self, kind: GateKind, qubits: &[usize], params: &[f64]) -> &mut Self {
        self.push(Gate::new(kind, qubits, params))
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.gate(GateKind::H, &[q], &[])
    }

    pub fn x(&mut self, q: usize) -> &mut Self {
        self.gate(GateKind::X, &[q], &[])
    }

    pub fn z(&mut self, q: usize) -> &mut Self {
        self.gate(GateKind::Z, &[q], &[])
    }

    pub fn t(&mut self, q: usize) -> &mut Self {
        self.gate(GateKind::T, &[q], &[])
    }

    pub fn rx(&mut self, theta: f64, q: usize) -> &mut Self {
        self.gate(GateKind::Rx, &[q], &[theta])
    }

    pub fn ry(&mut self, theta: f64, q: usize) -> &mut Self {
        self.gate(GateKind::Ry, &[q], &[theta])
    }

    pub fn rz(&mut self, theta: f64, q: usize) -> &mut Self {
        self.gate(GateKind::Rz, &[q], &[theta])
    }

    pub fn cz(&mut self, a: usize, b: usize) -> &mut Self {
        self.gate(GateKind::Cz, &[a, b], &[])
    }

    pub fn cx(&mut self, a: usize, b: usize) -> &mut Self {
        self.gate(GateKind::Cx, &[a, b], &[])
    }

    pub fn rzz(&mut self, theta: f64, a: usize, b: usize) -> &mut Self {
        self.gate(GateKind::Rzz, &[a, b], &[theta])
    }

    pub fn measure_all(&mut self) -> &mut Self {
        self.measured_qubits = (0..self.num_qubits).collect();
        self
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    /// Length of the longest dependency chain, every gate counting as one layer.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.num_qubits];
        let mut depth = 0;
        for g in &self.gates {
            let l = g.qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in &g.qubits {
                level[q] = l;
            }
            depth = depth.max(l);
        }
        depth
    }

    /// Qubits whose outcomes are reported: the measured set, or every qubit when none is declared.
    pub fn output_qubits(&self) -> Vec<usize> {
        if self.measured_qubits.is_empty() {
            (0..self.num_qubits).collect()
        } else {
            self.measured_qubits.clone()
        }
    }

    /// Replaces every `swap` by three `cx`.
    pub fn with_swaps_lowered(&self) -> Circuit {
        let mut out = Circuit::new(self.num_qubits);
        out.measured_qubits = self.measured_qubits.clone();
        for g in &self.gates {
            if g.kind == GateKind::Swap {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                out.cx(a, b).cx(b, a).cx(a, b);
            } else {
                out.gates.push(g.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_counts_layers() {
        let mut c = Circuit::new(4);
        c.h(0).cx(0, 1).cx(1, 2).cx(2, 3);
        assert_eq!(c.depth(), 4);
        let mut d = Circuit::new(4);
        d.h(0).h(1).h(2).h(3).cz(0, 1).cz(2, 3);
        assert_eq!(d.depth(), 2);
        assert_eq!(Circuit::new(3).depth(), 0);
    }

    #[test]
    fn rejects_bad_gates() {
        let mut c = Circuit::new(2);
        assert_eq!(
            c.try_push(Gate::new(GateKind::Cz, &[0, 0], &[])),
            Err(CircuitError::RepeatedQubit(GateKind::Cz))
        );
        assert!(matches!(
            c.try_push(Gate::new(GateKind::H, &[2], &[])),
            Err(CircuitError::QubitOutOfRange { .. })
        ));
        assert!(matches!(
            c.try_push(Gate::new(GateKind::Rz, &[0], &[])),
            Err(CircuitError::ParamArity { .. })
        ));
        assert!(c.is_empty());
    }

    #[test]
    fn swap_lowering_triples_cx() {
        let mut c = Circuit::new(2);
        c.gate(GateKind::Swap, &[0, 1], &[]);
        let l = c.with_swaps_lowered();
        assert_eq!(l.len(), 3);
        assert!(l.gates.iter().all(|g| g.kind == GateKind::Cx));
    }
}
