mod common;

use hwknit::qpd::{cz_terms, executable_variants, gamma, pairing_matrix, FoldLabel, RAW_TERMS};

#[test]
fn frozen_coefficients_reproduce_cz_channel() {
    let terms = cz_terms();
    let coeffs: Vec<f64> = terms.iter().map(|t| t.coefficient).collect();
    assert!(common::choi_residual(&terms, &coeffs) < 1e-10);
}

#[test]
fn least_squares_regenerates_frozen_coefficients() {
    let terms = cz_terms();
    let (solved, resid) = common::solve_coefficients(&terms);
    assert!(resid < 1e-10, "residual {resid}");
    for (t, s) in terms.iter().zip(&solved) {
        assert!(
            (t.coefficient - s).abs() < 1e-9,
            "term {}: frozen {} solved {s}",
            t.raw_index,
            t.coefficient
        );
    }
}

#[test]
fn dropping_any_term_breaks_equality() {
    let terms = cz_terms();
    for k in 0..RAW_TERMS {
        let coeffs: Vec<f64> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| if i == k { 0.0 } else { t.coefficient })
            .collect();
        assert!(common::choi_residual(&terms, &coeffs) > 1e-3);
    }
}

#[test]
fn executed_variants_match_pairing_matrix() {
    let p = pairing_matrix();
    for v in executable_variants() {
        assert!((v.coefficient.abs() - p[v.label_a.index()][v.label_b.index()]).abs() < 1e-15);
    }
    let measured = executable_variants()
        .iter()
        .filter(|v| v.label_a == FoldLabel::M || v.label_b == FoldLabel::M)
        .count();
    assert_eq!(measured, 4);
    assert!((gamma() - 3.0).abs() < 1e-12);
}
