use aoi_core::metrics::{average_aoi, moment, performance_gain, sweep, Component, SweepOptions};
use aoi_core::{solve, Agent, AoiError, NetworkParams, Policy, SolverConfig};

fn np(p: f64, q: f64) -> NetworkParams {
    NetworkParams::new(p, q).unwrap()
}

fn avg(policy: &Policy, p: f64, q: f64) -> f64 {
    average_aoi(&solve(policy, &np(p, q), &SolverConfig::with_size(1024)).unwrap()).unwrap().value
}

#[test]
fn swapping_labels_preserves_the_average() {
    let ties_second = Policy::MaxWeight { ties: Agent::Second };
    for (p, q) in [(0.6, 0.2), (0.3, 0.7), (0.9, 0.1), (0.45, 0.8)] {
        let a = avg(&Policy::max_weight(), p, q);
        let b = avg(&ties_second, q, p);
        assert!((a - b).abs() <= 1e-9, "({p}, {q}): {a} vs {b}");
    }
}

#[test]
fn component_moments_add_up() {
    let d = solve(&Policy::max_weight(), &np(0.7, 0.3), &SolverConfig::with_size(1024)).unwrap();
    let x = moment(&d, 1, Component::First).unwrap();
    let y = moment(&d, 1, Component::Second).unwrap();
    let total = average_aoi(&d).unwrap();
    assert!((x + y - total.value).abs() < 1e-12);
    assert!(total.truncation_bound >= 0.0 && total.truncation_bound < 1e-6);
    assert!(moment(&d, 2, Component::Total).unwrap() > total.value * total.value);
}

#[test]
fn gain_between_identical_and_mismatched_inputs() {
    let d = solve(&Policy::max_weight(), &np(0.5, 0.5), &SolverConfig::with_size(256)).unwrap();
    assert_eq!(performance_gain(&d, &d).unwrap(), 0.0);
    let other = solve(&Policy::max_weight(), &np(0.5, 0.4), &SolverConfig::with_size(256)).unwrap();
    assert!(matches!(performance_gain(&d, &other), Err(AoiError::ParamsMismatch(_))));
}

#[test]
fn sweep_gain_is_non_negative_and_vanishes_on_the_diagonal() {
    let values = [0.2, 0.5, 0.8];
    let opts = SweepOptions { n_trunc: 128, ..SweepOptions::default() };
    let table = sweep(&values, &values, &opts).unwrap();
    assert_eq!(table.rows.len(), 9);
    assert_eq!(table.errors().count(), 0);
    for r in &table.rows {
        assert!(r.gain_percent >= -0.5, "({}, {}) {}", r.p, r.q, r.gain_percent);
        if r.p == r.q {
            assert!(r.gain_percent.abs() <= 0.5);
        }
        assert!((r.gain_percent - 100.0 * (r.avg_mw - r.avg_op) / r.avg_mw).abs() < 1e-12);
    }
    let order: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.p, r.q)).collect();
    let expected: Vec<(f64, f64)> = values.iter().flat_map(|&p| values.iter().map(move |&q| (p, q))).collect();
    assert_eq!(order, expected);
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let p = [0.3, 0.6, 0.9];
    let q = [0.1, 0.4];
    let one = sweep(&p, &q, &SweepOptions { n_trunc: 64, threads: 1, ..SweepOptions::default() }).unwrap();
    let four = sweep(&p, &q, &SweepOptions { n_trunc: 64, threads: 4, ..SweepOptions::default() }).unwrap();
    assert_eq!(one.to_csv(), four.to_csv());
    assert_eq!(one.to_surface_grid(), four.to_surface_grid());
}

#[test]
fn max_weight_average_rises_between_p_094_and_095() {
    let mw = Policy::max_weight();
    let a = avg(&mw, 0.94, 0.1);
    let b = avg(&mw, 0.95, 0.1);
    assert!(b > a, "{b} vs {a}");
}
