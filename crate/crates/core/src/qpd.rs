//! Gate cuts: lowering crossing gates to CZ, splitting a circuit into subcircuit programs and
//! the quasiprobability terms of the cut CZ.
//!
//! The CZ channel decomposes into ten local terms,
//!
//! ```text
//! CZ = 1/2 [I,I] + 1/2 [Z,Z]
//!    + sum_{a1,a2} a1*a2/2 [P(a1), S(a2)] + sum_{a1,a2} a1*a2/2 [S(a1), P(a2)]
//! ```
//!
//! with `P(a)` the unnormalized projector on Z outcome `a` and `S(a) = rz(a*pi/2)`, every side
//! followed by `rz(-pi/2)`. The two outcomes of one measurement come from a single execution, so
//! only six variants are run per cut and `gamma = 3`.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::cost::Partition;
use crate::qasm::{write_gate, write_header, write_measures};

pub const RAW_TERMS: usize = 10;

/// Singleton-term coefficient and the family prefactor; both equal 1/2.
pub const SINGLETON_COEFF: f64 = 0.5;
pub const FAMILY_COEFF: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum QpdError {
    #[error("gate {index} ({kind}) cannot be cut: only cz, cx and rzz(+-pi/2) are supported")]
    UnsupportedCutGate { index: usize, kind: String },
    #[error("gate index {0} is out of range")]
    NoSuchGate(usize),
    #[error("crossing gate {index} is {kind}, not cz; lower it first")]
    NotLowered { index: usize, kind: GateKind },
    #[error("partition covers {partition} qubits but the circuit has {circuit}")]
    SizeMismatch { partition: usize, circuit: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn letter(self) -> char {
        match self {
            Side::A => 'a',
            Side::B => 'b',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPoint {
    pub id: usize,
    pub gate_index: usize,
    /// `(subcircuit, local qubit)` of the cz's first qubit.
    pub side_a: (usize, usize),
    pub side_b: (usize, usize),
}

impl CutPoint {
    pub fn side(&self, s: Side) -> (usize, usize) {
        match s {
            Side::A => self.side_a,
            Side::B => self.side_b,
        }
    }
}

/// Boundary operation slot of a subcircuit program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub cut: usize,
    pub side: Side,
    pub qubit: usize,
    /// The slot runs after `circuit.gates[..position]`.
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubcircuitProgram {
    pub index: usize,
    pub circuit: Circuit,
    /// Local qubit -> qubit of the original circuit.
    pub qubit_map: Vec<usize>,
    pub slots: Vec<Slot>,
}

impl SubcircuitProgram {
    pub fn incident_cuts(&self) -> Vec<(usize, Side)> {
        self.slots.iter().map(|s| (s.cut, s.side)).collect()
    }

    /// Original-circuit qubits this program reports, in its local output order.
    pub fn global_outputs(&self) -> Vec<usize> {
        self.circuit
            .measured_qubits
            .iter()
            .map(|&q| self.qubit_map[q])
            .collect()
    }

    /// Circuit with every slot filled by `fill(slot)`.
    pub fn instantiate(&self, fill: impl Fn(&Slot) -> Vec<Gate>) -> Circuit {
        let mut out = Circuit::new(self.circuit.num_qubits);
        out.measured_qubits = self.circuit.measured_qubits.clone();
        let mut slots = self.slots.iter().peekable();
        for (i, g) in self.circuit.gates.iter().enumerate() {
            while let Some(s) = slots.next_if(|s| s.position == i) {
                out.gates.extend(fill(s));
            }
            out.gates.push(g.clone());
        }
        for s in slots {
            out.gates.extend(fill(s));
        }
        out
    }

    /// Representative executable circuit: each slot holds the Z-term ops, the longest gate-only
    /// realization.
    pub fn depth_circuit(&self) -> Circuit {
        self.instantiate(|s| {
            side_ops(FoldLabel::Z, 1)
                .iter()
                .filter_map(|op| op.as_gate(s.qubit))
                .collect()
        })
    }

    pub fn to_qasm(&self) -> String {
        let mut out = String::new();
        write_header(&mut out, &self.circuit);
        let mut slots = self.slots.iter().peekable();
        for (i, g) in self.circuit.gates.iter().enumerate() {
            while let Some(s) = slots.next_if(|s| s.position == i) {
                write_slot(&mut out, s);
            }
            write_gate(&mut out, g);
        }
        for s in slots {
            write_slot(&mut out, s);
        }
        write_measures(&mut out, &self.circuit);
        out
    }
}

fn write_slot(out: &mut String, s: &Slot) {
    let _ = writeln!(
        out,
        "// CUT {} SIDE {} q[{}]",
        s.cut,
        s.side.letter(),
        s.qubit
    );
}

/// Per-side label after folding the outcome signs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FoldLabel {
    I,
    Z,
    M,
    R,
}

impl FoldLabel {
    pub const ALL: [FoldLabel; 4] = [FoldLabel::I, FoldLabel::Z, FoldLabel::M, FoldLabel::R];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SideOp {
    Z,
    Rz(f64),
    /// Keep only the branch with Z outcome `alpha`, unnormalized.
    Measure(i8),
}

impl SideOp {
    /// Unitary ops as gates; measurements have no gate form.
    pub fn as_gate(&self, q: usize) -> Option<Gate> {
        match *self {
            SideOp::Z => Some(Gate::new(GateKind::Z, &[q], &[])),
            SideOp::Rz(t) => Some(Gate::new(GateKind::Rz, &[q], &[t])),
            SideOp::Measure(_) => None,
        }
    }
}

/// Ops one side runs for `label` with outcome/rotation sign `alpha` (ignored for I and Z),
/// including the trailing `rz(-pi/2)` compensation.
pub fn side_ops(label: FoldLabel, alpha: i8) -> Vec<SideOp> {
    let mut ops = match label {
        FoldLabel::I => vec![],
        FoldLabel::Z => vec![SideOp::Z],
        FoldLabel::M => vec![SideOp::Measure(alpha)],
        FoldLabel::R => vec![SideOp::Rz(alpha as f64 * FRAC_PI_2)],
    };
    ops.push(SideOp::Rz(-FRAC_PI_2));
    ops
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpdTerm {
    pub raw_index: usize,
    pub side_a_ops: Vec<SideOp>,
    pub side_b_ops: Vec<SideOp>,
    pub coefficient: f64,
    pub fold_label_a: FoldLabel,
    pub fold_label_b: FoldLabel,
    pub alpha_a: i8,
    pub alpha_b: i8,
}

fn term(
    raw_index: usize,
    la: FoldLabel,
    aa: i8,
    lb: FoldLabel,
    ab: i8,
    coefficient: f64,
) -> QpdTerm {
    QpdTerm {
        raw_index,
        side_a_ops: side_ops(la, aa),
        side_b_ops: side_ops(lb, ab),
        coefficient,
        fold_label_a: la,
        fold_label_b: lb,
        alpha_a: aa,
        alpha_b: ab,
    }
}

const ALPHAS: [i8; 2] = [1, -1];

/// The ten raw terms of a cut CZ; identical for every cut.
pub fn enumerate_terms(_cut: &CutPoint) -> Vec<QpdTerm> {
    cz_terms()
}

pub fn cz_terms() -> Vec<QpdTerm> {
    use FoldLabel::*;
    let mut out = vec![
        term(0, I, 1, I, 1, SINGLETON_COEFF),
        term(1, Z, 1, Z, 1, SINGLETON_COEFF),
    ];
    for a1 in ALPHAS {
        for a2 in ALPHAS {
            out.push(term(
                out.len(),
                M,
                a1,
                R,
                a2,
                FAMILY_COEFF * (a1 * a2) as f64,
            ));
        }
    }
    for a1 in ALPHAS {
        for a2 in ALPHAS {
            out.push(term(
                out.len(),
                R,
                a1,
                M,
                a2,
                FAMILY_COEFF * (a1 * a2) as f64,
            ));
        }
    }
    out
}

/// Sum of |coefficient| over the ten raw terms.
pub fn raw_l1() -> f64 {
    cz_terms().iter().map(|t| t.coefficient.abs()).sum()
}

/// A physically executed variant: the measured side (if any) records its outcome `s` and the
/// sample is weighted by `coefficient * s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label_a: FoldLabel,
    pub label_b: FoldLabel,
    /// Sign of the rotated side, 1 when there is none.
    pub rotation: i8,
    pub coefficient: f64,
}

pub fn executable_variants() -> Vec<Variant> {
    use FoldLabel::*;
    let mut v = vec![
        Variant {
            label_a: I,
            label_b: I,
            rotation: 1,
            coefficient: SINGLETON_COEFF,
        },
        Variant {
            label_a: Z,
            label_b: Z,
            rotation: 1,
            coefficient: SINGLETON_COEFF,
        },
    ];
    for (la, lb) in [(M, R), (R, M)] {
        for a in ALPHAS {
            v.push(Variant {
                label_a: la,
                label_b: lb,
                rotation: a,
                coefficient: FAMILY_COEFF * a as f64,
            });
        }
    }
    v
}

/// Sampling overhead factor of one cut: sum of |coefficient| over the executed variants.
pub fn gamma() -> f64 {
    executable_variants()
        .iter()
        .map(|v| v.coefficient.abs())
        .sum()
}

/// Shot multiplier `gamma^(2n)`.
pub fn sampling_overhead(n_cuts: usize) -> f64 {
    gamma().powi(2 * n_cuts as i32)
}

/// Weight of each label pair when contracting folded legs, indexed `[label_a][label_b]`.
pub fn pairing_matrix() -> [[f64; 4]; 4] {
    let mut p = [[0.0; 4]; 4];
    p[FoldLabel::I.index()][FoldLabel::I.index()] = SINGLETON_COEFF;
    p[FoldLabel::Z.index()][FoldLabel::Z.index()] = SINGLETON_COEFF;
    p[FoldLabel::M.index()][FoldLabel::R.index()] = FAMILY_COEFF;
    p[FoldLabel::R.index()][FoldLabel::M.index()] = FAMILY_COEFF;
    p
}

fn angle_is(theta: f64, target: f64) -> bool {
    let d = (theta - target).rem_euclid(std::f64::consts::TAU);
    d < 1e-9 || std::f64::consts::TAU - d < 1e-9
}

/// Rewrites the listed two-qubit gates into cz form. Returns the new circuit and the new index of
/// each listed gate's cz, in input order.
pub fn lower_to_cz(
    c: &Circuit,
    cut_gate_indices: &[usize],
) -> Result<(Circuit, Vec<usize>), QpdError> {
    let mut cut = vec![false; c.gates.len()];
    for &i in cut_gate_indices {
        *cut.get_mut(i).ok_or(QpdError::NoSuchGate(i))? = true;
    }
    let mut out = Circuit::new(c.num_qubits);
    out.measured_qubits = c.measured_qubits.clone();
    let mut new_index = vec![usize::MAX; c.gates.len()];
    for (i, g) in c.gates.iter().enumerate() {
        if !cut[i] {
            out.gates.push(g.clone());
            continue;
        }
        let (a, b) = (g.qubits.first().copied(), g.qubits.get(1).copied());
        let unsupported = || QpdError::UnsupportedCutGate {
            index: i,
            kind: g.kind.name().to_string(),
        };
        let (a, b) = match (a, b) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(unsupported()),
        };
        match g.kind {
            GateKind::Cz => {
                new_index[i] = out.gates.len();
                out.cz(a, b);
            }
            GateKind::Cx => {
                out.h(b);
                new_index[i] = out.gates.len();
                out.cz(a, b).h(b);
            }
            GateKind::Rzz => {
                let theta = g.params[0];
                let phi = if angle_is(theta, FRAC_PI_2) {
                    FRAC_PI_2
                } else if angle_is(theta, -FRAC_PI_2) {
                    -FRAC_PI_2
                } else {
                    return Err(unsupported());
                };
                new_index[i] = out.gates.len();
                out.cz(a, b).rz(phi, a).rz(phi, b);
            }
            _ => return Err(unsupported()),
        }
    }
    Ok((
        out,
        cut_gate_indices.iter().map(|&i| new_index[i]).collect(),
    ))
}

/// Splits a lowered circuit along `p`; every crossing gate must be cz.
pub fn split_circuit(
    c: &Circuit,
    p: &Partition,
) -> Result<(Vec<SubcircuitProgram>, Vec<CutPoint>), QpdError> {
    if p.len() != c.num_qubits {
        return Err(QpdError::SizeMismatch {
            partition: p.len(),
            circuit: c.num_qubits,
        });
    }
    let blocks = p.blocks();
    let mut local = vec![0usize; c.num_qubits];
    for b in &blocks {
        for (i, &q) in b.iter().enumerate() {
            local[q] = i;
        }
    }
    let mut progs: Vec<SubcircuitProgram> = blocks
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let mut circuit = Circuit::new(b.len());
            circuit.measured_qubits = c
                .measured_qubits
                .iter()
                .filter(|&&q| p.block_of(q) == index)
                .map(|&q| local[q])
                .collect();
            SubcircuitProgram {
                index,
                circuit,
                qubit_map: b.clone(),
                slots: Vec::new(),
            }
        })
        .collect();
    let mut cuts = Vec::new();
    for (gi, g) in c.gates.iter().enumerate() {
        let blk = p.block_of(g.qubits[0]);
        if g.qubits.iter().all(|&q| p.block_of(q) == blk) {
            progs[blk].circuit.gates.push(g.remapped(|q| local[q]));
            continue;
        }
        if g.kind != GateKind::Cz {
            return Err(QpdError::NotLowered {
                index: gi,
                kind: g.kind,
            });
        }
        let (qa, qb) = (g.qubits[0], g.qubits[1]);
        let cut = CutPoint {
            id: cuts.len(),
            gate_index: gi,
            side_a: (p.block_of(qa), local[qa]),
            side_b: (p.block_of(qb), local[qb]),
        };
        for side in [Side::A, Side::B] {
            let (blk, qubit) = cut.side(side);
            let position = progs[blk].circuit.gates.len();
            progs[blk].slots.push(Slot {
                cut: cut.id,
                side,
                qubit,
                position,
            });
        }
        cuts.push(cut);
    }
    Ok((progs, cuts))
}

/// Puts the cut cz gates back, giving a circuit equal to the lowered original.
pub fn reassemble(progs: &[SubcircuitProgram], cuts: &[CutPoint], num_qubits: usize) -> Circuit {
    let mut out = Circuit::new(num_qubits);
    let mut cursor = vec![0usize; progs.len()];
    let mut emit_until = |out: &mut Circuit, blk: usize, pos: usize| {
        let pr = &progs[blk];
        for g in &pr.circuit.gates[cursor[blk]..pos] {
            out.gates.push(g.remapped(|q| pr.qubit_map[q]));
        }
        cursor[blk] = cursor[blk].max(pos);
    };
    for cut in cuts {
        let mut qs = [0; 2];
        for (k, side) in [Side::A, Side::B].into_iter().enumerate() {
            let (blk, q) = cut.side(side);
            let slot = progs[blk]
                .slots
                .iter()
                .find(|s| s.cut == cut.id && s.side == side)
                .expect("slot per side");
            emit_until(&mut out, blk, slot.position);
            qs[k] = progs[blk].qubit_map[q];
        }
        out.cz(qs[0], qs[1]);
    }
    for blk in 0..progs.len() {
        emit_until(&mut out, blk, progs[blk].circuit.gates.len());
    }
    out
}
