//! Dense statevector simulator with unnormalized projections. Qubit `q` is bit `q` of the
//! amplitude index.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::qpd::FoldLabel;
use crate::qpd::{side_ops, SideOp, SubcircuitProgram, Variant};
use crate::Real;

pub const MAX_QUBITS: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("{0} qubits exceed the simulator limit of {MAX_QUBITS}")]
    TooLarge(usize),
    #[error("{settings} slot settings given for {slots} slots")]
    SlotMismatch { settings: usize, slots: usize },
    #[error("observable qubit {0} is not an output qubit")]
    BadObservable(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    amps: Vec<Complex<T>>,
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::from(re).unwrap(), T::from(im).unwrap())
}

impl<T: Real> StateVector<T> {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self, SimError> {
        if n > MAX_QUBITS {
            return Err(SimError::TooLarge(n));
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |s, a| s + a.norm_sqr())
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex<T>; 2]; 2]) {
        let bit = 1 << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn phase(&mut self, q: usize, p0: Complex<T>, p1: Complex<T>) {
        let bit = 1 << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a = *a * if i & bit == 0 { p0 } else { p1 };
        }
    }

    pub fn apply_gate(&mut self, g: &Gate) {
        let q = &g.qubits;
        let p = |k: usize| g.params[k];
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let one = c::<T>(1.0, 0.0);
        let zero = c::<T>(0.0, 0.0);
        match g.kind {
            GateKind::H => {
                self.apply_1q(q[0], [[c(s2, 0.0), c(s2, 0.0)], [c(s2, 0.0), c(-s2, 0.0)]])
            }
            GateKind::X => self.apply_1q(q[0], [[zero, one], [one, zero]]),
            GateKind::Y => self.apply_1q(q[0], [[zero, c(0.0, -1.0)], [c(0.0, 1.0), zero]]),
            GateKind::Z => self.phase(q[0], one, c(-1.0, 0.0)),
            GateKind::S => self.phase(q[0], one, c(0.0, 1.0)),
            GateKind::Sdg => self.phase(q[0], one, c(0.0, -1.0)),
            GateKind::T => self.phase(q[0], one, c(s2, s2)),
            GateKind::Tdg => self.phase(q[0], one, c(s2, -s2)),
            GateKind::Rx => {
                let (co, si) = ((p(0) / 2.0).cos(), (p(0) / 2.0).sin());
                self.apply_1q(q[0], [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]]);
            }
            GateKind::Ry => {
                let (co, si) = ((p(0) / 2.0).cos(), (p(0) / 2.0).sin());
                self.apply_1q(q[0], [[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]]);
            }
            GateKind::Rz => {
                let h = p(0) / 2.0;
                self.phase(q[0], c(h.cos(), -h.sin()), c(h.cos(), h.sin()));
            }
            GateKind::U3 => {
                let (th, ph, la) = (p(0), p(1), p(2));
                let (co, si) = ((th / 2.0).cos(), (th / 2.0).sin());
                self.apply_1q(
                    q[0],
                    [
                        [c(co, 0.0), c(-la.cos() * si, -la.sin() * si)],
                        [
                            c(ph.cos() * si, ph.sin() * si),
                            c((ph + la).cos() * co, (ph + la).sin() * co),
                        ],
                    ],
                );
            }
            GateKind::Cz => {
                let m = (1 << q[0]) | (1 << q[1]);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m == m {
                        *a = -*a;
                    }
                }
            }
            GateKind::Cx => {
                let (cb, tb) = (1 << q[0], 1 << q[1]);
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
            GateKind::Rzz => {
                let h = p(0) / 2.0;
                let (same, diff) = (c::<T>(h.cos(), -h.sin()), c::<T>(h.cos(), h.sin()));
                let (ba, bb) = (1 << q[0], 1 << q[1]);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    let odd = ((i & ba != 0) as u8) ^ ((i & bb != 0) as u8);
                    *a = *a * if odd == 0 { same } else { diff };
                }
            }
            GateKind::Swap => {
                let (ba, bb) = (1 << q[0], 1 << q[1]);
                for i in 0..self.amps.len() {
                    if i & ba != 0 && i & bb == 0 {
                        self.amps.swap(i, (i & !ba) | bb);
                    }
                }
            }
        }
    }

    pub fn apply_circuit(&mut self, circ: &Circuit) {
        for g in &circ.gates {
            self.apply_gate(g);
        }
    }

    /// `s <- (I + alpha Z)/2 s` on qubit `q`, not renormalized.
    pub fn apply_projector(&mut self, q: usize, alpha: i8) {
        let bit = 1 << q;
        let keep_set = alpha < 0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & bit != 0) != keep_set {
                *a = Complex::new(T::zero(), T::zero());
            }
        }
    }

    /// Samples a Z measurement of `q`, collapses and renormalizes. Returns `+1` or `-1`.
    pub fn measure(&mut self, q: usize, rng: &mut ChaCha8Rng) -> i8 {
        let total = self.norm_sqr();
        let mut minus = self.clone();
        minus.apply_projector(q, -1);
        let p1 = (minus.norm_sqr() / total).to_f64().unwrap();
        let outcome = if rng.gen::<f64>() < p1 { -1 } else { 1 };
        self.apply_projector(q, outcome);
        let scale = T::one() / self.norm_sqr().sqrt();
        for a in &mut self.amps {
            *a = *a * scale;
        }
        outcome
    }

    pub fn apply_side_op(&mut self, q: usize, op: &SideOp) {
        match op {
            SideOp::Measure(alpha) => self.apply_projector(q, *alpha),
            other => self.apply_gate(&other.as_gate(q).expect("unitary side op")),
        }
    }

    /// Unnormalized `<psi| Z_{q1} ... Z_{qk} |psi>`.
    pub fn expectation_z(&self, qubits: &[usize]) -> T {
        let mask = qubits.iter().fold(0usize, |m, &q| m | (1 << q));
        self.amps.iter().enumerate().fold(T::zero(), |s, (i, a)| {
            if (i & mask).count_ones() % 2 == 0 {
                s + a.norm_sqr()
            } else {
                s - a.norm_sqr()
            }
        })
    }

    /// Unnormalized marginal over `qubits`; bit `k` of the result index is `qubits[k]`.
    pub fn probabilities(&self, qubits: &[usize]) -> Vec<T> {
        let mut out = vec![T::zero(); 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let idx = qubits
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &q)| acc | (((i >> q) & 1) << k));
            out[idx] = out[idx] + a.norm_sqr();
        }
        out
    }
}

pub fn simulate<T: Real>(circ: &Circuit) -> Result<StateVector<T>, SimError> {
    let mut s = StateVector::zero(circ.num_qubits)?;
    s.apply_circuit(circ);
    Ok(s)
}

/// Observable on local qubits of a program.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalObservable {
    /// Product of Z on these qubits (empty: the trace).
    ZString(Vec<usize>),
    /// Outcome distribution over these qubits.
    Distribution(Vec<usize>),
}

impl LocalObservable {
    pub fn value_len(&self) -> usize {
        match self {
            LocalObservable::ZString(_) => 1,
            LocalObservable::Distribution(q) => 1 << q.len(),
        }
    }

    pub fn read<T: Real>(&self, s: &StateVector<T>) -> Vec<T> {
        match self {
            LocalObservable::ZString(q) => vec![s.expectation_z(q)],
            LocalObservable::Distribution(q) => s.probabilities(q),
        }
    }
}

/// Label and outcome/rotation sign for one boundary slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotSetting {
    pub label: FoldLabel,
    pub alpha: i8,
}

/// Subnormalized result of one term program.
#[derive(Clone, Debug, PartialEq)]
pub struct TermOutcome<T> {
    pub values: Vec<T>,
}

/// Runs `prog` with each slot filled according to `settings`.
pub fn evaluate_term<T: Real>(
    prog: &SubcircuitProgram,
    settings: &[SlotSetting],
    obs: &LocalObservable,
) -> Result<TermOutcome<T>, SimError> {
    if settings.len() != prog.slots.len() {
        return Err(SimError::SlotMismatch {
            settings: settings.len(),
            slots: prog.slots.len(),
        });
    }
    let mut s = StateVector::<T>::zero(prog.circuit.num_qubits)?;
    let mut next = 0;
    let gates = &prog.circuit.gates;
    for (k, slot) in prog.slots.iter().enumerate() {
        while next < slot.position {
            s.apply_gate(&gates[next]);
            next += 1;
        }
        for op in side_ops(settings[k].label, settings[k].alpha) {
            s.apply_side_op(slot.qubit, &op);
        }
    }
    for g in &gates[next..] {
        s.apply_gate(g);
    }
    Ok(TermOutcome {
        values: obs.read(&s),
    })
}

/// One sampled execution of a program: slots run their variant with measurements sampled,
/// then the Z-string is measured. Returns the product of all recorded signs.
pub fn sample_shot<T: Real>(
    prog: &SubcircuitProgram,
    variants: &[(Variant, bool)],
    zstring: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<i8, SimError> {
    let mut s = StateVector::<T>::zero(prog.circuit.num_qubits)?;
    let mut sign = 1i8;
    let mut next = 0;
    let gates = &prog.circuit.gates;
    for (slot, &(v, is_a)) in prog.slots.iter().zip(variants) {
        while next < slot.position {
            s.apply_gate(&gates[next]);
            next += 1;
        }
        let label = if is_a { v.label_a } else { v.label_b };
        for op in side_ops(label, v.rotation) {
            match op {
                SideOp::Measure(_) => sign *= s.measure(slot.qubit, rng),
                other => s.apply_side_op(slot.qubit, &other),
            }
        }
    }
    for g in &gates[next..] {
        s.apply_gate(g);
    }
    for &q in zstring {
        sign *= s.measure(q, rng);
    }
    Ok(sign)
}
