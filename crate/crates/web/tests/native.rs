use naming_lab_web::{abm_run, steady_curve, trajectory};

#[test]
fn two_opinion_curve_jumps_near_the_known_threshold() {
    let out = steady_curve(2, 0.0, 0.08, 0.12, 5).unwrap();
    assert_eq!(out.len(), 20);
    // P_A = 0.08 stays with B, P_A = 0.11 flips to A.
    assert!(out[1] < 0.2 && out[2] > 0.7);
    assert!(out[13] > 0.9);
}

#[test]
fn trajectory_rows_carry_time_and_every_opinion() {
    let out = trajectory(vec![0.12, 0.0, 0.09, 0.09], 10.0, 11).unwrap();
    assert_eq!(out.len(), 11 * 5);
    assert_eq!(out[0], 0.0);
    assert!((out[1] - 0.12).abs() < 1e-12);
    assert!((out[55 - 5] - 10.0).abs() < 1e-9);
}

#[test]
fn abm_run_is_reproducible() {
    let a = abm_run(200, 6.0, 3, 0.1, 0.05, 20, 7).unwrap();
    let b = abm_run(200, 6.0, 3, 0.1, 0.05, 20, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 21 * 3);
}
