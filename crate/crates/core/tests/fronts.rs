use std::sync::OnceLock;

use lattice_fronts::env::{CoefficientSet, Medium};
use lattice_fronts::fronts::{
    construct_front, front_positions, profile_limits, stationarity_check, Component, FrontOptions,
    FrontRun,
};
use lattice_fronts::Error;

fn canonical() -> Medium {
    Medium::constant(CoefficientSet::CANONICAL).unwrap()
}

fn short_front() -> &'static FrontRun {
    static RUN: OnceLock<FrontRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut o = FrontOptions::default();
        o.pullback.eval_times = (0..=20).map(|k| k as f64).collect();
        construct_front(&canonical(), &o, None).unwrap()
    })
}

#[test]
fn profile_saturates_behind_and_vanishes_ahead() {
    let run = short_front();
    let r = profile_limits(&run.profile, &run.ansatz, 40.0).unwrap();
    assert!(r.left_deviation_u < 1e-3 && r.left_deviation_v < 1e-3, "{r:?}");
    assert!(r.right_value_u < 1e-3 && r.right_value_v < 1e-3, "{r:?}");
    assert!((r.tail_ratio_u - 1.0).abs() < 0.1, "{r:?}");
}

#[test]
fn front_positions_order_by_level_and_advance_at_gamma() {
    let run = short_front();
    let eq = &run.ansatz.equilibria;
    for which in [Component::U, Component::V] {
        let low = front_positions(&run.profile, eq, 0.25, which).unwrap();
        let mid = front_positions(&run.profile, eq, 0.5, which).unwrap();
        let high = front_positions(&run.profile, eq, 0.75, which).unwrap();
        for k in 0..mid.len() {
            assert!(low[k].1 >= mid[k].1 && mid[k].1 >= high[k].1);
        }
        let (a, b) = (mid[5], mid[mid.len() - 1]);
        let speed = (b.1 - a.1) / (b.0 - a.0);
        assert!((speed - 2.0).abs() / 2.0 < 0.02, "speed {speed}");
    }
}

#[test]
fn profile_is_monotone_and_within_the_equilibria() {
    let run = short_front();
    let eq = &run.ansatz.equilibria;
    assert!(run.profile.converged);
    assert!(run.profile.max_uptick() <= 1e-9);
    for s in &run.profile.slices {
        let (us, vs) = (eq.u_star.eval(s.t), eq.v_star.eval(s.t));
        assert!(s.phi.iter().all(|&p| p >= 0.0 && p <= us + 1e-9));
        assert!(s.psi.iter().all(|&p| p >= 0.0 && p <= vs + 1e-9));
    }
}

#[test]
fn constant_medium_front_is_stationary() {
    let o = FrontOptions::default();
    let r = stationarity_check(&canonical(), 7.3, &o).unwrap();
    assert!(r.residual < 2.0 * o.pullback.tol_pb, "{r:?}");
    let zero = stationarity_check(&canonical(), 0.0, &o).unwrap();
    assert_eq!(zero.residual, 0.0);
}

#[test]
fn subcritical_front_request_is_refused() {
    let o = FrontOptions { gamma: 1.5, ..Default::default() };
    assert!(matches!(construct_front(&canonical(), &o, None), Err(Error::NoSupercriticalRoot(_))));
}
