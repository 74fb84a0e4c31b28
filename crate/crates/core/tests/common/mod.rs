//! Independent superoperator / Choi oracle for the cut-CZ decomposition, built on nalgebra.
#![allow(dead_code)]

use hwknit::qpd::{QpdTerm, SideOp};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

pub type M = DMatrix<C>;

fn re(x: f64) -> C {
    C::new(x, 0.0)
}

pub fn diag(v: &[C]) -> M {
    M::from_diagonal(&DVector::from_column_slice(v))
}

pub fn op_matrix(op: &SideOp) -> M {
    match *op {
        SideOp::Z => diag(&[re(1.0), re(-1.0)]),
        SideOp::Rz(t) => diag(&[C::from_polar(1.0, -t / 2.0), C::from_polar(1.0, t / 2.0)]),
        SideOp::Measure(a) if a > 0 => diag(&[re(1.0), re(0.0)]),
        SideOp::Measure(_) => diag(&[re(0.0), re(1.0)]),
    }
}

/// Product of side ops applied in order.
pub fn side_matrix(ops: &[SideOp]) -> M {
    ops.iter()
        .fold(M::identity(2, 2), |acc, op| op_matrix(op) * acc)
}

pub fn cz() -> M {
    diag(&[re(1.0), re(1.0), re(1.0), re(-1.0)])
}

pub fn term_kraus(t: &QpdTerm) -> M {
    side_matrix(&t.side_a_ops).kronecker(&side_matrix(&t.side_b_ops))
}

/// Choi matrix `sum_ij |i><j| (x) E(|i><j|)` of a weighted sum of single-Kraus channels.
pub fn choi(channels: &[(f64, M)]) -> M {
    let d = 4;
    let mut j = M::zeros(d * d, d * d);
    for i in 0..d {
        for k in 0..d {
            let mut e = M::zeros(d, d);
            e[(i, k)] = re(1.0);
            let mut out = M::zeros(d, d);
            for (w, kr) in channels {
                out += (kr * &e * kr.adjoint()) * re(*w);
            }
            for a in 0..d {
                for b in 0..d {
                    j[(i * d + a, k * d + b)] = out[(a, b)];
                }
            }
        }
    }
    j
}

/// Row-stacked superoperator `K (x) conj(K)`.
pub fn superop(k: &M) -> M {
    k.kronecker(&k.conjugate())
}

/// Max-abs Choi deviation between the weighted terms and the CZ channel.
pub fn choi_residual(terms: &[QpdTerm], coeffs: &[f64]) -> f64 {
    let chans: Vec<(f64, M)> = terms
        .iter()
        .zip(coeffs)
        .map(|(t, &c)| (c, term_kraus(t)))
        .collect();
    let diff = choi(&chans) - choi(&[(1.0, cz())]);
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Minimum-norm least-squares coefficients reproducing the CZ superoperator, and the residual.
pub fn solve_coefficients(terms: &[QpdTerm]) -> (Vec<f64>, f64) {
    let cols: Vec<DVector<C>> = terms
        .iter()
        .map(|t| {
            let s = superop(&term_kraus(t));
            DVector::from_iterator(256, s.iter().copied())
        })
        .collect();
    let a = M::from_columns(&cols);
    let target = superop(&cz());
    let b = DVector::from_iterator(256, target.iter().copied());
    let pinv = a.clone().pseudo_inverse(1e-10).expect("pseudo-inverse");
    let x = &pinv * &b;
    let resid = (&a * &x - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (x.iter().map(|z| z.re).collect(), resid)
}
