mod common;

#[test]
fn matches_textbook_filter_for_100_steps() {
    let gap = common::kf_max_gap();
    assert!(gap <= 1e-10, "largest gap {gap:.2e}");
}

#[test]
fn steady_state_error_variance_below_measurement_variance() {
    let s = common::kf_steady_state();
    assert!(s.variance <= s.r, "steady-state error variance {:.3e} exceeds R = {:.1e}", s.variance, s.r);
    assert!(s.seconds < 5.0);
}
