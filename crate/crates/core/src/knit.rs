//! Classical recombination: per-subcircuit result tensors over folded I/Z/M/R legs, contracted
//! pairwise through the per-cut pairing matrix.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::cost::Partition;
use crate::cutter::{cut_circuit, CutError, CutterConfig};
use crate::qpd::{
    executable_variants, gamma, lower_to_cz, pairing_matrix, sampling_overhead, side_ops,
    split_circuit, CutPoint, FoldLabel, QpdError, Side, SubcircuitProgram, Variant,
};
use crate::seed;
use crate::sim::{sample_shot, simulate, LocalObservable, SimError, StateVector};
use crate::topo::HardwareTopology;
use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum KnitError {
    #[error("raw outcomes missing for slot settings {0:?}")]
    IncompleteOutcomes(Vec<(FoldLabel, i8)>),
    #[error("tensor legs do not match the cuts: {0}")]
    LegMismatch(String),
    #[error("invalid observable: {0}")]
    BadObservable(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Qpd(#[from] QpdError),
    #[error(transparent)]
    Cut(#[from] CutError),
}

/// Observable over the original circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    /// Product of Z on these qubits.
    ZString(Vec<usize>),
    /// Full distribution over the circuit's output qubits; bit `k` of an index is output qubit `k`.
    Distribution,
}

impl Observable {
    /// `"dist"`, or a string over `{I, Z}` whose `i`-th character acts on qubit `i`.
    pub fn parse(spec: &str, num_qubits: usize) -> Result<Self, KnitError> {
        let s = spec.trim();
        if s.eq_ignore_ascii_case("dist") {
            return Ok(Observable::Distribution);
        }
        if s.len() != num_qubits {
            return Err(KnitError::BadObservable(format!(
                "'{s}' has {} characters for {num_qubits} qubits",
                s.len()
            )));
        }
        let mut qs = Vec::new();
        for (i, ch) in s.chars().enumerate() {
            match ch.to_ascii_uppercase() {
                'Z' => qs.push(i),
                'I' => {}
                other => return Err(KnitError::BadObservable(format!("unexpected '{other}'"))),
            }
        }
        Ok(Observable::ZString(qs))
    }

    fn check(&self, c: &Circuit) -> Result<(), KnitError> {
        if let Observable::ZString(qs) = self {
            let outs = c.output_qubits();
            if let Some(q) = qs.iter().find(|q| !outs.contains(q)) {
                return Err(KnitError::BadObservable(format!(
                    "qubit {q} is not measured"
                )));
            }
        }
        Ok(())
    }

    /// Local observable of `prog` and the original qubits of its value leg.
    fn localize(&self, c: &Circuit, prog: &SubcircuitProgram) -> (LocalObservable, Vec<usize>) {
        let local_of = |g: usize| prog.qubit_map.iter().position(|&q| q == g);
        match self {
            Observable::ZString(qs) => (
                LocalObservable::ZString(qs.iter().filter_map(|&g| local_of(g)).collect()),
                Vec::new(),
            ),
            Observable::Distribution => {
                let globals: Vec<usize> = c
                    .output_qubits()
                    .into_iter()
                    .filter(|&g| local_of(g).is_some())
                    .collect();
                let locals = globals.iter().map(|&g| local_of(g).unwrap()).collect();
                (LocalObservable::Distribution(locals), globals)
            }
        }
    }
}

/// Slot settings evaluated per boundary slot.
pub const SETTINGS: [(FoldLabel, i8); 6] = [
    (FoldLabel::I, 1),
    (FoldLabel::Z, 1),
    (FoldLabel::M, 1),
    (FoldLabel::M, -1),
    (FoldLabel::R, 1),
    (FoldLabel::R, -1),
];

/// Term-program outputs keyed by per-slot settings.
#[derive(Clone, Debug, Default)]
pub struct RawOutcomes<T> {
    pub outcomes: HashMap<Vec<(FoldLabel, i8)>, Vec<T>>,
}

/// Evaluates every slot-setting combination of `prog`, sharing simulated prefixes.
pub fn raw_outcomes<T: Real>(
    prog: &SubcircuitProgram,
    obs: &LocalObservable,
) -> Result<RawOutcomes<T>, KnitError> {
    fn walk<T: Real>(
        prog: &SubcircuitProgram,
        obs: &LocalObservable,
        mut s: StateVector<T>,
        mut next: usize,
        key: &mut Vec<(FoldLabel, i8)>,
        out: &mut HashMap<Vec<(FoldLabel, i8)>, Vec<T>>,
    ) {
        let gates = &prog.circuit.gates;
        let k = key.len();
        let stop = prog.slots.get(k).map_or(gates.len(), |sl| sl.position);
        while next < stop {
            s.apply_gate(&gates[next]);
            next += 1;
        }
        let Some(slot) = prog.slots.get(k) else {
            out.insert(key.clone(), obs.read(&s));
            return;
        };
        for (label, alpha) in SETTINGS {
            let mut branch = s.clone();
            for op in side_ops(label, alpha) {
                branch.apply_side_op(slot.qubit, &op);
            }
            key.push((label, alpha));
            walk(prog, obs, branch, next, key, out);
            key.pop();
        }
    }
    let s = StateVector::zero(prog.circuit.num_qubits)?;
    let mut out = HashMap::new();
    walk(prog, obs, s, 0, &mut Vec::new(), &mut out);
    Ok(RawOutcomes { outcomes: out })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTensor<T> {
    pub subcircuit: usize,
    /// Cut id of each 4-dimensional leg.
    pub legs: Vec<usize>,
    /// Original qubits of the value leg (distribution mode), low bit first.
    pub value_qubits: Vec<usize>,
    pub value_len: usize,
    /// Leg `k` has stride `4^k * value_len`; the value index is fastest.
    pub data: Vec<T>,
}

impl<T: Real> ResultTensor<T> {
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![4; self.legs.len()];
        s.push(self.value_len);
        s
    }

    fn offset(labels: &[usize], value_len: usize) -> usize {
        labels.iter().rev().fold(0, |acc, &l| acc * 4 + l) * value_len
    }

    pub fn values_at(&self, labels: &[FoldLabel]) -> &[T] {
        let idx: Vec<usize> = labels.iter().map(|l| l.index()).collect();
        let o = Self::offset(&idx, self.value_len);
        &self.data[o..o + self.value_len]
    }
}

/// Folds raw outcomes: `M = sum_a a * out(M, a)`, `R = sum_a a * out(R, a)`, I and Z copied.
pub fn fold_terms<T: Real>(
    prog: &SubcircuitProgram,
    raw: &RawOutcomes<T>,
    value_qubits: Vec<usize>,
) -> Result<ResultTensor<T>, KnitError> {
    let s = prog.slots.len();
    let combos = 6usize.pow(s as u32);
    let value_len = raw.outcomes.values().next().map_or(1, |v| v.len());
    let mut data = vec![T::zero(); 4usize.pow(s as u32) * value_len];
    let mut key = Vec::with_capacity(s);
    for mut code in 0..combos {
        key.clear();
        for _ in 0..s {
            key.push(SETTINGS[code % 6]);
            code /= 6;
        }
        let vals = raw
            .outcomes
            .get(&key)
            .ok_or_else(|| KnitError::IncompleteOutcomes(key.clone()))?;
        let sign: i8 = key
            .iter()
            .map(|&(l, a)| {
                if matches!(l, FoldLabel::M | FoldLabel::R) {
                    a
                } else {
                    1
                }
            })
            .product();
        let labels: Vec<usize> = key.iter().map(|(l, _)| l.index()).collect();
        let o = ResultTensor::<T>::offset(&labels, value_len);
        let sg = T::from(sign).unwrap();
        for (d, &v) in data[o..o + value_len].iter_mut().zip(vals) {
            *d = *d + sg * v;
        }
    }
    Ok(ResultTensor {
        subcircuit: prog.index,
        legs: prog.slots.iter().map(|sl| sl.cut).collect(),
        value_qubits,
        value_len,
        data,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractionOrder {
    /// Merge the pair with the smallest result first.
    #[default]
    Greedy,
    /// Fold tensors into the first one in index order.
    Sequential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    pub shared_cuts: usize,
    /// Nonzero label pairings used, `4^shared_cuts`.
    pub pairings: usize,
    pub kron_products: usize,
    pub scalar_mults: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionStats {
    pub merges: Vec<MergeStats>,
}

impl ContractionStats {
    pub fn kron_products(&self) -> usize {
        self.merges.iter().map(|m| m.kron_products).sum()
    }

    pub fn scalar_mults(&self) -> usize {
        self.merges.iter().map(|m| m.scalar_mults).sum()
    }
}

/// Nonzero pairing entries as `(label_a, label_b, weight)`.
fn pairing_entries<T: Real>() -> Vec<(usize, usize, T)> {
    let p = pairing_matrix();
    let mut out = Vec::new();
    for (i, row) in p.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                out.push((i, j, T::from(w).unwrap()));
            }
        }
    }
    out
}

fn merge<T: Real>(
    a: &ResultTensor<T>,
    b: &ResultTensor<T>,
    sides: &HashMap<usize, Side>,
    pairs: &[(usize, usize, T)],
) -> (ResultTensor<T>, MergeStats) {
    let shared: Vec<usize> = a
        .legs
        .iter()
        .copied()
        .filter(|l| b.legs.contains(l))
        .collect();
    let free_a: Vec<usize> = a
        .legs
        .iter()
        .copied()
        .filter(|l| !shared.contains(l))
        .collect();
    let free_b: Vec<usize> = b
        .legs
        .iter()
        .copied()
        .filter(|l| !shared.contains(l))
        .collect();
    let (va, vb) = (a.value_len, b.value_len);
    let value_len = va * vb;
    let legs: Vec<usize> = free_a.iter().chain(&free_b).copied().collect();
    let mut data = vec![T::zero(); 4usize.pow(legs.len() as u32) * value_len];

    // Each shared-cut combination: labels of the first tensor's side per cut, labels of the
    // second, and the product of pairing weights (indexed by the cut's a/b orientation).
    let mut combos: Vec<(Vec<usize>, Vec<usize>, T)> = vec![(vec![], vec![], T::one())];
    for cut in &shared {
        let a_is_side_a = sides.get(&(a.subcircuit << 32 | cut)) == Some(&Side::A);
        let mut next = Vec::with_capacity(combos.len() * pairs.len());
        for (la, lb, w) in &combos {
            for &(pa, pb, pw) in pairs {
                let (x, y) = if a_is_side_a { (pa, pb) } else { (pb, pa) };
                let mut la2 = la.clone();
                la2.push(x);
                let mut lb2 = lb.clone();
                lb2.push(y);
                next.push((la2, lb2, *w * pw));
            }
        }
        combos = next;
    }

    let labels_of = |legs: &[usize], free: &[usize], fl: &[usize], sl: &[usize]| -> Vec<usize> {
        legs.iter()
            .map(|l| match free.iter().position(|f| f == l) {
                Some(i) => fl[i],
                None => sl[shared.iter().position(|s| s == l).unwrap()],
            })
            .collect()
    };
    let decode = |mut code: usize, n: usize| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let l = code % 4;
                code /= 4;
                l
            })
            .collect()
    };

    let mut stats = MergeStats {
        shared_cuts: shared.len(),
        pairings: combos.len(),
        ..Default::default()
    };
    for fa in 0..4usize.pow(free_a.len() as u32) {
        let fla = decode(fa, free_a.len());
        for fb in 0..4usize.pow(free_b.len() as u32) {
            let flb = decode(fb, free_b.len());
            let mut out_labels = fla.clone();
            out_labels.extend(&flb);
            let o = ResultTensor::<T>::offset(&out_labels, value_len);
            for (sa, sb, w) in &combos {
                let oa = ResultTensor::<T>::offset(&labels_of(&a.legs, &free_a, &fla, sa), va);
                let ob = ResultTensor::<T>::offset(&labels_of(&b.legs, &free_b, &flb, sb), vb);
                let (xa, xb) = (&a.data[oa..oa + va], &b.data[ob..ob + vb]);
                for (j, &y) in xb.iter().enumerate() {
                    let wy = *w * y;
                    for (i, &x) in xa.iter().enumerate() {
                        data[o + i + va * j] = data[o + i + va * j] + wy * x;
                    }
                }
                stats.kron_products += 1;
                stats.scalar_mults += va * vb;
            }
        }
    }
    let mut value_qubits = a.value_qubits.clone();
    value_qubits.extend(&b.value_qubits);
    (
        ResultTensor {
            subcircuit: a.subcircuit,
            legs,
            value_qubits,
            value_len,
            data,
        },
        stats,
    )
}

/// Contracts all tensors over their cuts. Returns the value leg in `value_qubits` order (low bit
/// first) of the final tensor together with that order.
pub fn contract<T: Real>(
    tensors: Vec<ResultTensor<T>>,
    cuts: &[CutPoint],
    order: ContractionOrder,
) -> Result<(Vec<T>, Vec<usize>, ContractionStats), KnitError> {
    if tensors.is_empty() {
        return Err(KnitError::LegMismatch("no tensors".into()));
    }
    let mut sides = HashMap::new();
    for cut in cuts {
        for side in [Side::A, Side::B] {
            let (blk, _) = cut.side(side);
            let holders: Vec<_> = tensors
                .iter()
                .filter(|t| t.subcircuit == blk && t.legs.contains(&cut.id))
                .collect();
            if holders.len() != 1 {
                return Err(KnitError::LegMismatch(format!(
                    "cut {} side {:?}",
                    cut.id, side
                )));
            }
            sides.insert(blk << 32 | cut.id, side);
        }
    }
    let total_legs: usize = tensors.iter().map(|t| t.legs.len()).sum();
    if total_legs != 2 * cuts.len() {
        return Err(KnitError::LegMismatch(format!(
            "{total_legs} legs for {} cuts",
            cuts.len()
        )));
    }
    // After merging, a tensor keeps the first operand's subcircuit index; remember the side of
    // every surviving leg under that index.
    let pairs = pairing_entries::<T>();
    let mut stats = ContractionStats::default();
    let mut pool = tensors;
    while pool.len() > 1 {
        let (i, j) = match order {
            ContractionOrder::Greedy => greedy_pair(&pool),
            ContractionOrder::Sequential => {
                let j = (1..pool.len())
                    .find(|&j| pool[j].legs.iter().any(|l| pool[0].legs.contains(l)))
                    .unwrap_or(1);
                (0, j)
            }
        };
        let b = pool.remove(j);
        let a = pool.remove(i);
        let (m, s) = merge(&a, &b, &sides, &pairs);
        for &leg in &b.legs {
            if let Some(&side) = sides.get(&(b.subcircuit << 32 | leg)) {
                sides.insert(a.subcircuit << 32 | leg, side);
            }
        }
        stats.merges.push(s);
        pool.insert(i, m);
    }
    let t = pool.pop().unwrap();
    Ok((t.data, t.value_qubits, stats))
}

fn greedy_pair<T: Real>(pool: &[ResultTensor<T>]) -> (usize, usize) {
    let mut best: Option<(bool, usize, usize, usize)> = None;
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            let shared = pool[i]
                .legs
                .iter()
                .filter(|l| pool[j].legs.contains(l))
                .count();
            let legs = pool[i].legs.len() + pool[j].legs.len() - 2 * shared;
            let size = 4usize.pow(legs as u32) * pool[i].value_len * pool[j].value_len;
            let key = (shared == 0, size, i, j);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    let (_, _, i, j) = best.unwrap();
    (i, j)
}

/// Reorders a value vector whose bit `k` is `from[k]` into one whose bit `k` is `to[k]`.
pub fn permute_bits<T: Real>(values: &[T], from: &[usize], to: &[usize]) -> Vec<T> {
    let pos: Vec<usize> = from
        .iter()
        .map(|q| to.iter().position(|t| t == q).unwrap())
        .collect();
    let mut out = vec![T::zero(); values.len()];
    for (i, &v) in values.iter().enumerate() {
        let j = pos
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &p)| acc | (((i >> k) & 1) << p));
        out[j] = v;
    }
    out
}

/// Exact uncut value of `obs`.
pub fn oracle_values<T: Real>(c: &Circuit, obs: &Observable) -> Result<Vec<T>, KnitError> {
    obs.check(c)?;
    let s = simulate::<T>(c)?;
    Ok(match obs {
        Observable::ZString(qs) => vec![s.expectation_z(qs)],
        Observable::Distribution => s.probabilities(&c.output_qubits()),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Knitted<T> {
    pub values: Vec<T>,
    pub num_cuts: usize,
    pub num_subcircuits: usize,
    pub term_evaluations: usize,
    pub stats: ContractionStats,
}

/// Lowers the crossing gates of `p`, evaluates all subcircuit terms and contracts them.
pub fn knit_partition<T: Real>(
    c: &Circuit,
    p: &Partition,
    obs: &Observable,
    order: ContractionOrder,
) -> Result<Knitted<T>, KnitError> {
    obs.check(c)?;
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
    let (progs, cuts) = split_circuit(&lowered, p)?;
    let tensors: Vec<ResultTensor<T>> = progs
        .par_iter()
        .map(|prog| {
            let (local, value_qubits) = obs.localize(c, prog);
            let raw = raw_outcomes::<T>(prog, &local)?;
            fold_terms(prog, &raw, value_qubits)
        })
        .collect::<Result<_, _>>()?;
    let term_evaluations = progs
        .iter()
        .map(|pr| 6usize.pow(pr.slots.len() as u32))
        .sum();
    let (values, value_qubits, stats) = contract(tensors, &cuts, order)?;
    let values = match obs {
        Observable::ZString(_) => values,
        Observable::Distribution => permute_bits(&values, &value_qubits, &c.output_qubits()),
    };
    Ok(Knitted {
        values,
        num_cuts: cuts.len(),
        num_subcircuits: progs.len(),
        term_evaluations,
        stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnitReport {
    pub num_cuts: usize,
    pub num_subcircuits: usize,
    pub sampling_overhead: f64,
    pub term_evaluations: usize,
    pub scalar_mults: usize,
    pub reconstructed: Vec<f64>,
    pub oracle: Option<Vec<f64>>,
    pub deviation: Option<f64>,
}

fn report(
    c: &Circuit,
    k: Knitted<f64>,
    obs: &Observable,
    verify: bool,
) -> Result<KnitReport, KnitError> {
    let oracle = if verify {
        Some(oracle_values::<f64>(c, obs)?)
    } else {
        None
    };
    let deviation = oracle.as_ref().map(|o| {
        o.iter()
            .zip(&k.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    });
    Ok(KnitReport {
        num_cuts: k.num_cuts,
        num_subcircuits: k.num_subcircuits,
        sampling_overhead: sampling_overhead(k.num_cuts),
        term_evaluations: k.term_evaluations,
        scalar_mults: k.stats.scalar_mults(),
        reconstructed: k.values,
        oracle,
        deviation,
    })
}

pub fn reconstruct_with_partition(
    c: &Circuit,
    p: &Partition,
    obs: &Observable,
    verify: bool,
) -> Result<KnitReport, KnitError> {
    if verify && c.num_qubits > crate::sim::MAX_QUBITS {
        return Err(SimError::TooLarge(c.num_qubits).into());
    }
    let k = knit_partition::<f64>(c, p, obs, ContractionOrder::Greedy)?;
    report(c, k, obs, verify)
}

/// Cut, split, evaluate, fold and contract; with `verify`, also simulate the uncut circuit.
pub fn reconstruct(
    c: &Circuit,
    t: &HardwareTopology,
    cutter: &CutterConfig,
    obs: &Observable,
    verify: bool,
) -> Result<(KnitReport, Partition), KnitError> {
    if verify && c.num_qubits > crate::sim::MAX_QUBITS {
        return Err(SimError::TooLarge(c.num_qubits).into());
    }
    obs.check(c)?;
    let sol = cut_circuit(c, t, cutter)?;
    let rep = reconstruct_with_partition(c, &sol.partition, obs, verify)?;
    Ok((rep, sol.partition))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub shots: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Mean of |weight| over shots (`gamma^n`).
    pub mean_abs_weight: f64,
    /// Mean of weight^2 over shots (`gamma^(2n)`).
    pub mean_weight_sq: f64,
}

/// Quasiprobability sampling estimate of a Z-string: each shot draws one variant per cut with
/// probability `|c|/gamma`, runs every subcircuit once and weights the product of measured signs
/// by `prod sign(c) * gamma`.
pub fn mc_estimate(
    c: &Circuit,
    p: &Partition,
    zstring: &[usize],
    shots: usize,
    seed_: u64,
) -> Result<McEstimate, KnitError> {
    let obs = Observable::ZString(zstring.to_vec());
    obs.check(c)?;
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
    let (progs, cuts) = split_circuit(&lowered, p)?;
    let variants: Vec<Variant> = executable_variants();
    let g = gamma();
    let locals: Vec<Vec<usize>> = progs
        .iter()
        .map(|prog| match obs.localize(c, prog).0 {
            LocalObservable::ZString(q) => q,
            LocalObservable::Distribution(_) => unreachable!(),
        })
        .collect();
    let mut rng = seed::rng(seed_);
    let (mut sum, mut sum_sq, mut w_abs, mut w_sq) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..shots {
        let mut chosen = Vec::with_capacity(cuts.len());
        let mut weight = 1.0;
        for _ in &cuts {
            let mut r = rng.gen::<f64>() * g;
            let mut pick = variants[variants.len() - 1];
            for v in &variants {
                if r < v.coefficient.abs() {
                    pick = *v;
                    break;
                }
                r -= v.coefficient.abs();
            }
            weight *= pick.coefficient.signum() * g;
            chosen.push(pick);
        }
        let mut sign = 1i8;
        for (prog, zq) in progs.iter().zip(&locals) {
            let vs: Vec<(Variant, bool)> = prog
                .slots
                .iter()
                .map(|s| (chosen[s.cut], s.side == Side::A))
                .collect();
            sign *= sample_shot::<f64>(prog, &vs, zq, &mut rng)?;
        }
        let x = weight * sign as f64;
        sum += x;
        sum_sq += x * x;
        w_abs += weight.abs();
        w_sq += weight * weight;
    }
    let n = shots as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(McEstimate {
        shots,
        mean,
        std_error: (var / n).sqrt(),
        mean_abs_weight: w_abs / n,
        mean_weight_sq: w_sq / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> Circuit {
        let mut c = Circuit::new(2);
        c.h(0).cx(0, 1);
        c
    }

    fn split_pair() -> Partition {
        Partition::new(vec![0, 1]).unwrap()
    }

    #[test]
    fn observable_parsing() {
        assert_eq!(
            Observable::parse("dist", 3).unwrap(),
            Observable::Distribution
        );
        assert_eq!(
            Observable::parse("ZIZ", 3).unwrap(),
            Observable::ZString(vec![0, 2])
        );
        assert!(Observable::parse("ZX", 2).is_err());
        assert!(Observable::parse("Z", 2).is_err());
    }

    #[test]
    fn bell_zz_from_one_cut() {
        let k = knit_partition::<f64>(
            &bell(),
            &split_pair(),
            &Observable::ZString(vec![0, 1]),
            ContractionOrder::Greedy,
        )
        .unwrap();
        assert_eq!(k.num_cuts, 1);
        assert!((k.values[0] - 1.0).abs() < 1e-9);
        assert_eq!(k.stats.merges.len(), 1);
        assert_eq!(k.stats.merges[0].pairings, 4);
        assert_eq!(k.stats.kron_products(), 4);
    }

    #[test]
    fn tensor_shapes_and_identity_entry() {
        let mut c = Circuit::new(3);
        c.h(0).cz(0, 1).ry(0.4, 1).cz(1, 2).h(2);
        let (progs, _) = split_circuit(&c, &Partition::new(vec![0, 1, 2]).unwrap()).unwrap();
        let z = LocalObservable::ZString(vec![0]);
        let t0 = fold_terms(
            &progs[0],
            &raw_outcomes::<f64>(&progs[0], &z).unwrap(),
            vec![],
        )
        .unwrap();
        assert_eq!(t0.shape(), vec![4, 1]);
        let t1 = fold_terms(
            &progs[1],
            &raw_outcomes::<f64>(&progs[1], &z).unwrap(),
            vec![],
        )
        .unwrap();
        assert_eq!(t1.shape(), vec![4, 4, 1]);
        assert_eq!(t1.data.len(), 16);
    }

    #[test]
    fn m_entry_on_zero_state() {
        let c = Circuit::new(2);
        let mut c2 = c.clone();
        c2.cz(0, 1);
        let (progs, _) = split_circuit(&c2, &split_pair()).unwrap();
        let raw = raw_outcomes::<f64>(&progs[0], &LocalObservable::ZString(vec![0])).unwrap();
        let t = fold_terms(&progs[0], &raw, vec![]).unwrap();
        assert!((t.values_at(&[FoldLabel::M])[0] - 1.0).abs() < 1e-12);
        assert!((t.values_at(&[FoldLabel::I])[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_outcomes_rejected() {
        let mut c = Circuit::new(2);
        c.cz(0, 1);
        let (progs, _) = split_circuit(&c, &split_pair()).unwrap();
        let mut raw = raw_outcomes::<f64>(&progs[0], &LocalObservable::ZString(vec![])).unwrap();
        raw.outcomes.remove(&vec![(FoldLabel::R, -1)]);
        assert!(matches!(
            fold_terms(&progs[0], &raw, vec![]),
            Err(KnitError::IncompleteOutcomes(_))
        ));
    }

    #[test]
    fn zero_cuts_returns_value_leg() {
        let mut c = Circuit::new(2);
        c.h(0).ry(0.3, 1);
        let k = knit_partition::<f64>(
            &c,
            &Partition::single(2),
            &Observable::Distribution,
            ContractionOrder::Greedy,
        )
        .unwrap();
        let o = oracle_values::<f64>(&c, &Observable::Distribution).unwrap();
        assert!(k.stats.merges.is_empty());
        assert_eq!(k.values, o);
    }

    #[test]
    fn distribution_matches_oracle_and_orders_agree() {
        let mut c = Circuit::new(4);
        c.h(0)
            .cx(0, 1)
            .ry(0.9, 2)
            .cx(1, 2)
            .t(2)
            .cx(2, 3)
            .h(3)
            .cz(3, 0);
        let p = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let o = oracle_values::<f64>(&c, &Observable::Distribution).unwrap();
        for order in [ContractionOrder::Greedy, ContractionOrder::Sequential] {
            let k = knit_partition::<f64>(&c, &p, &Observable::Distribution, order).unwrap();
            assert_eq!(k.num_cuts, 2);
            for (x, y) in k.values.iter().zip(&o) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scalar_mult_count_formula() {
        let mut c = Circuit::new(5);
        c.h(0).cz(0, 1).h(1).cz(1, 2).h(2).cz(2, 3).cz(3, 4);
        let p = Partition::new(vec![0, 0, 1, 1, 1]).unwrap();
        let k = knit_partition::<f64>(&c, &p, &Observable::Distribution, ContractionOrder::Greedy)
            .unwrap();
        assert_eq!(k.num_cuts, 1);
        assert_eq!(k.stats.scalar_mults(), 4 * (1 << 2) * (1 << 3));
    }

    #[test]
    fn mc_is_deterministic_per_seed() {
        let a = mc_estimate(&bell(), &split_pair(), &[0, 1], 2000, 5).unwrap();
        let b = mc_estimate(&bell(), &split_pair(), &[0, 1], 2000, 5).unwrap();
        assert_eq!(a, b);
        assert!((a.mean_abs_weight - 3.0).abs() < 1e-12);
        assert!((a.mean_weight_sq - 9.0).abs() < 1e-12);
    }
}
