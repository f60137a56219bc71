use npmle::constructions::{
    build_sinusoid, level_crossing_check, logconcave_decomposition, truncation_check, verify_sinusoid_modes,
};
use npmle::special::norm_cdf;
use npmle::Error;

#[test]
fn worked_acceptance_example() {
    let c = build_sinusoid(20.0, 5.0).unwrap();
    assert!((c.condition_lhs - (-12.5f64).exp()).abs() < 1e-18);
    assert!((c.condition_rhs - 4.0 * norm_cdf(-10.0)).abs() < 1e-30);
    assert_eq!(c.guaranteed_modes, 15);
    let v = verify_sinusoid_modes(&c, 16_384).unwrap();
    assert!(v.satisfied && v.counted >= 15);
}

#[test]
fn failing_condition_is_rejected_with_both_sides() {
    match build_sinusoid(2.0, 10.0) {
        Err(Error::ConstructionRejected { lhs, rhs }) => {
            assert!((lhs - (-50f64).exp()).abs() < 1e-30);
            assert!((rhs - 4.0 * norm_cdf(-1.0)).abs() < 1e-12 && lhs < rhs);
        }
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn quarter_frequency_floors() {
    for (a, modes) in [(10.0, 3), (20.0, 15), (30.0, 35), (40.0, 63)] {
        let c = build_sinusoid(a, a / 4.0).unwrap();
        let want = (a * a / (8.0 * std::f64::consts::PI)).floor() as u64;
        assert_eq!(c.guaranteed_modes, want);
        assert_eq!(c.guaranteed_modes, modes);
    }
}

#[test]
fn vanishing_frequency_is_trivially_satisfied() {
    let c = build_sinusoid(10.0, 0.01).unwrap();
    assert_eq!(c.guaranteed_modes, 0);
    let v = verify_sinusoid_modes(&c, 4096).unwrap();
    assert!(v.satisfied && v.counted <= 1, "{}", v.counted);
}

#[test]
fn proof_inequalities_hold_numerically() {
    let c = build_sinusoid(12.0, 3.0).unwrap();
    let t = truncation_check(&c, 2001, 1e-10).unwrap();
    assert!(t.holds, "excess {}", t.max_excess);
    let l = level_crossing_check(&c);
    assert!(l.maxima_checked > 0 && l.minima_checked > 0);
    assert!(l.maxima_above && l.minima_below);
}

#[test]
fn small_logconcave_decomposition() {
    let d = logconcave_decomposition(5.0, 2048).unwrap();
    assert_eq!(d.pieces.len(), 20);
    assert!(d.verified && d.min_margin >= 0.7);
    assert!(d.pieces.iter().all(|p| p.normalization_error <= 1e-8));
    let total: f64 = d.pieces.iter().map(|p| p.weight).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn logconcave_needs_integer_piece_count() {
    assert!(logconcave_decomposition(5.1, 2048).is_err());
    assert!(logconcave_decomposition(-1.0, 2048).is_err());
}
