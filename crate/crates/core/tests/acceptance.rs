//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL` line with the measured quantities.
//!
//! The three expensive computations (canonical front, periodic front and the
//! spreading run) are shared between criteria through `OnceLock`s.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use lattice_fronts::dispersion::critical_speed;
use lattice_fronts::env::{
    Channel, ChannelSpec, CoefficientSet, Harmonic, Horizon, Medium, MediumSpec,
};
use lattice_fronts::equilibria::{Equilibria, EquilibriumOptions};
use lattice_fronts::fronts::{
    build_ansatz, construct_front, front_positions, least_mean_speed, spreading_speed,
    stationarity_check, AnsatzOptions, Component, FrontOptions, FrontRun, SpreadOptions,
    SpreadReport, Window,
};
use lattice_fronts::oracles::{
    constant_reference, dispersion_scan, fixed_step_trajectory, logistic_closed_form, OracleModel,
};
use lattice_fronts::solver::{
    integrate, order_leq, order_leq_collar, Competition, Cooperative, Frame, Ghosts,
    IntegratorOptions, LatticeState, States,
};
use lattice_fronts::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Collects named checks for one criterion and reports them as one line.
struct Criterion {
    id: u32,
    title: &'static str,
    started: Instant,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, started: Instant::now(), checks: Vec::new() }
    }

    fn check(&mut self, pass: bool, detail: impl Into<String>) {
        self.checks.push((detail.into(), pass));
    }

    fn budget(&mut self, limit: Duration) {
        let spent = self.started.elapsed();
        self.check(spent <= limit, format!("runtime {:.2?} ≤ {:?}", spent, limit));
    }

    /// Writes the verdict straight to stdout (bypassing the test harness'
    /// capture) and fails the test if any check failed.
    fn finish(self) {
        let failed: Vec<&str> =
            self.checks.iter().filter(|(_, ok)| !ok).map(|(d, _)| d.as_str()).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let details: Vec<&str> = self.checks.iter().map(|(d, _)| d.as_str()).collect();
        let line = format!(
            "criterion {:>2}: {verdict} — {} [{}]\n",
            self.id,
            self.title,
            details.join("; ")
        );
        let _ = std::io::stdout().lock().write_all(line.as_bytes());
        assert!(failed.is_empty(), "criterion {} failed: {}", self.id, failed.join("; "));
    }
}

fn canonical_medium() -> Medium {
    Medium::constant(CoefficientSet::CANONICAL).unwrap()
}

fn periodic_medium() -> Medium {
    let spec = MediumSpec::constant(CoefficientSet::CANONICAL).with_channel(
        Channel::A1,
        ChannelSpec::Periodic { mean: 1.0, amplitude: 0.25, frequency: 1.0, phase: 0.0 },
    );
    Medium::new(spec).unwrap()
}

fn quasi_periodic_medium() -> Medium {
    let spec = MediumSpec::constant(CoefficientSet::CANONICAL).with_channel(
        Channel::A1,
        ChannelSpec::QuasiPeriodic {
            mean: 1.0,
            terms: vec![
                Harmonic { amplitude: 0.15, frequency: 1.0, phase: 0.0 },
                Harmonic { amplitude: 0.1, frequency: 2f64.sqrt(), phase: 0.0 },
            ],
        },
    );
    Medium::new(spec).unwrap()
}

// Values frozen from `dispersion_scan` (grid step 1e-6).
const DISPERSION_FIXTURES: [(f64, f64, f64); 4] = [
    (0.25, 0.485_699, 1.010_044_654_937_492_2),
    (0.75, 0.801_819, 1.781_081_826_707_059_4),
    (1.0, 0.907_103, 2.073_444_684_205_478),
    (3.0, 1.394_957, 3.786_958_856_705_100_5),
];

/// Ordering checks allow ten times the default absolute tolerance. Pullback
/// runs integrate with much tighter tolerances so that their accumulated
/// global error stays below this bound.
fn order_tolerance() -> f64 {
    10.0 * IntegratorOptions::default().atol
}

const CANONICAL_T_END: f64 = 200.0;

struct TimedRun<T> {
    value: T,
    elapsed: Duration,
}

fn canonical_front() -> &'static TimedRun<FrontRun> {
    static RUN: OnceLock<TimedRun<FrontRun>> = OnceLock::new();
    RUN.get_or_init(|| {
        let started = Instant::now();
        let mut o = FrontOptions::default();
        o.pullback.stop_when_converged = false;
        o.pullback.eval_times = (0..=CANONICAL_T_END as usize).map(|k| k as f64).collect();
        o.pullback.window = Some(Window { x_start: -1000.0, n_sites: 2000 });
        let value = construct_front(&canonical_medium(), &o, None).expect("canonical front");
        TimedRun { value, elapsed: started.elapsed() }
    })
}

const PERIOD: f64 = 2.0 * PI;

fn periodic_front() -> &'static TimedRun<FrontRun> {
    static RUN: OnceLock<TimedRun<FrontRun>> = OnceLock::new();
    RUN.get_or_init(|| {
        let started = Instant::now();
        let mut o = FrontOptions::default();
        o.pullback.eval_times = (0..=150).map(|k| k as f64).collect();
        let value = construct_front(&periodic_medium(), &o, None).expect("periodic front");
        TimedRun { value, elapsed: started.elapsed() }
    })
}

fn spreading_run() -> &'static TimedRun<SpreadReport> {
    static RUN: OnceLock<TimedRun<SpreadReport>> = OnceLock::new();
    RUN.get_or_init(|| {
        let started = Instant::now();
        let m = canonical_medium();
        let opts = SpreadOptions::default();
        let eq = Equilibria::compute(
            &m,
            Horizon::new(0.0, opts.t_end).unwrap(),
            &EquilibriumOptions::default(),
        )
        .unwrap();
        let value = spreading_speed(&m, &eq, &opts).expect("spreading run");
        TimedRun { value, elapsed: started.elapsed() }
    })
}

fn measured_speed(run: &FrontRun, from: f64, to: f64, r: f64, target: f64) -> f64 {
    let series: Vec<(f64, f64)> =
        front_positions(&run.profile, &run.ansatz.equilibria, 0.5, Component::U)
            .unwrap()
            .into_iter()
            .filter(|&(t, _)| t >= from - 1e-9 && t <= to + 1e-9)
            .collect();
    least_mean_speed(&series, r, target).unwrap().estimate
}

#[test]
fn criterion_01_dispersion_exactness() {
    let mut c = Criterion::new(1, "critical speed matches the μ-grid scan");
    let started = Instant::now();
    let reports: Vec<_> =
        DISPERSION_FIXTURES.iter().map(|&(lambda, _, _)| critical_speed(lambda).unwrap()).collect();
    let spent = started.elapsed();
    for (r, &(lambda, mu_fix, c0_fix)) in reports.iter().zip(&DISPERSION_FIXTURES) {
        let (mu_scan, c0_scan) = dispersion_scan(lambda).unwrap();
        let (dc, dm) = ((r.c0 - c0_scan).abs(), (r.mu_star - mu_scan).abs());
        c.check(
            dc < 1e-8 && dm < 1e-5 && r.foc_residual.abs() < 1e-10,
            format!("λ={lambda}: |Δc0|={dc:.1e} |Δμ*|={dm:.1e} foc={:.1e}", r.foc_residual),
        );
        c.check(
            (c0_scan - c0_fix).abs() < 1e-12 && (mu_scan - mu_fix).abs() < 1e-12,
            format!("λ={lambda}: scan reproduces frozen fixture"),
        );
    }
    c.check(spent < Duration::from_secs(1), format!("solver runtime {spent:.2?} < 1s"));
    c.finish();
}

#[test]
fn criterion_02_canonical_constants() {
    let mut c = Criterion::new(2, "canonical constant instance");
    let m = canonical_medium();
    let eq =
        Equilibria::compute(&m, Horizon::new(-5.0, 5.0).unwrap(), &EquilibriumOptions::default())
            .unwrap();
    let closed = constant_reference(CoefficientSet::CANONICAL).unwrap();
    c.check(eq.report.verdicts.all, "all hypotheses pass");
    let dl = (eq.lambda_least - 0.75).abs();
    c.check(dl < 1e-12, format!("|λ̲ - 0.75| = {dl:.1e}"));
    let dh = [-4.0, 0.0, 2.5, 5.0].iter().map(|&t| (eq.h.eval(t) - 0.4).abs()).fold(0.0, f64::max);
    c.check(dh < 1e-10, format!("|h - 0.4| = {dh:.1e}"));
    let r = critical_speed(eq.lambda_least).unwrap();
    let (_, mu_fix, c0_fix) = DISPERSION_FIXTURES[1];
    let (dc, dm) = ((r.c0 - c0_fix).abs(), (r.mu_star - mu_fix).abs());
    c.check(dc < 1e-8 && dm < 1e-5, format!("c0={:.6} μ*={:.6} vs fixtures", r.c0, r.mu_star));
    c.check(
        (closed.lambda - eq.lambda_least).abs() < 1e-12 && (closed.h - 0.4).abs() < 1e-15,
        "closed forms agree",
    );
    c.budget(Duration::from_secs(1));
    c.finish();
}

#[test]
fn criterion_03_canonical_front() {
    let mut c = Criterion::new(3, "front at γ = 2 in the constant medium");
    let TimedRun { value: run, elapsed } = canonical_front();
    let p = &run.profile;
    let gap = p.gap();
    c.check(gap < 1e-4, format!("gap(τ=100,200) = {gap:.1e}"));
    let uptick = p.max_uptick();
    c.check(uptick <= 1e-9, format!("max uptick = {uptick:.1e}"));
    let tol = order_tolerance();
    let s = p.sandwich(&run.ansatz, 0);
    c.check(
        s.holds(tol),
        format!(
            "sandwich lower {:.1e} upper {:.1e} (≤ {tol:.0e})",
            s.lower_violation, s.upper_violation
        ),
    );
    let speed = measured_speed(run, 50.0, CANONICAL_T_END, 75.0, 2.0);
    let rel = (speed - 2.0).abs() / 2.0;
    c.check(rel < 0.02, format!("speed {speed:.5} (rel err {rel:.2e})"));
    c.check(*elapsed < Duration::from_secs(300), format!("runtime {elapsed:.2?} < 5min"));
    c.finish();
}

#[test]
fn criterion_04_periodic_medium() {
    let mut c = Criterion::new(4, "periodic medium");
    let TimedRun { value: run, elapsed } = periodic_front();
    let a = &run.ansatz;
    let eq = &a.equilibria;
    let mut drift = 0.0f64;
    for k in 0..200 {
        let t = -150.0 + 0.37 * k as f64;
        drift = drift
            .max((eq.u_star.eval(t + PERIOD) - eq.u_star.eval(t)).abs())
            .max((eq.v_star.eval(t + PERIOD) - eq.v_star.eval(t)).abs())
            .max((eq.h.eval(t + PERIOD) - eq.h.eval(t)).abs());
    }
    c.check(drift < 1e-6, format!("u*, v*, h period defect {drift:.1e}"));

    // With the exact least mean the mean-compensated A is periodic; with the
    // estimated one it picks up the linear drift (1-δ)(λ̲_est - λ̲)·t.
    let exact = build_ansatz(
        &a.medium,
        &eq.clone().with_lambda_least(0.75),
        2.0,
        a.horizon,
        &AnsatzOptions::default(),
    )
    .unwrap();
    let mut period_defect = 0.0f64;
    for k in 0..200 {
        let t = -140.0 + 0.61 * k as f64;
        period_defect = period_defect.max((exact.a(t + PERIOD) - exact.a(t)).abs());
    }
    c.check(period_defect < 1e-6, format!("A period defect {period_defect:.1e} (exact λ̲)"));
    c.check(
        exact.a_sup < 0.95 * 0.25 * 2.0 + 1e-6,
        format!("‖A‖ = {:.4} ≤ 0.475 (exact λ̲)", exact.a_sup),
    );
    let slope = (1.0 - a.delta) * (a.equilibria.lambda_least - 0.75);
    let mut detrended = 0.0f64;
    for k in 0..200 {
        let t = -140.0 + 0.61 * k as f64;
        detrended = detrended.max((a.a(t + PERIOD) - a.a(t) - slope * PERIOD).abs());
    }
    c.check(
        detrended < 1e-6 && a.a_sup.is_finite(),
        format!(
            "estimated λ̲ = {:.6}: A periodic after detrending ({detrended:.1e}), ‖A‖ = {:.4}",
            a.equilibria.lambda_least, a.a_sup
        ),
    );
    let speed = measured_speed(run, 0.0, 150.0, 10.0 * PERIOD, 2.0);
    let rel = (speed - 2.0).abs() / 2.0;
    c.check(rel < 0.03, format!("speed {speed:.5} over r = 10 periods (rel err {rel:.2e})"));
    c.check(*elapsed < Duration::from_secs(600), format!("runtime {elapsed:.2?} < 10min"));
    c.finish();
}

#[test]
fn criterion_05_threshold() {
    let mut c = Criterion::new(5, "c0 is the spreading threshold");
    let TimedRun { value: spread, elapsed } = spreading_run();
    c.check(
        spread.relative_error < 0.03,
        format!(
            "spread slope {:.5} ± {:.1e} vs c0 {:.5} (rel err {:.2e})",
            spread.estimate, spread.slope_stderr, spread.c0, spread.relative_error
        ),
    );
    c.check(*elapsed < Duration::from_secs(600), format!("spread runtime {elapsed:.2?}"));

    let c0 = critical_speed(0.75).unwrap().c0;
    let canonical = measured_speed(&canonical_front().value, 50.0, CANONICAL_T_END, 75.0, 2.0);
    let periodic = measured_speed(&periodic_front().value, 0.0, 150.0, 10.0 * PERIOD, 2.0);
    for (name, speed) in [("canonical", canonical), ("periodic", periodic)] {
        c.check(speed >= 0.97 * c0, format!("{name} front speed {speed:.4} ≥ 0.97·c0"));
    }

    let m = canonical_medium();
    let horizon = Horizon::new(-10.0, 10.0).unwrap();
    let eq = Equilibria::compute(&m, horizon, &EquilibriumOptions::default()).unwrap();
    for gamma in [0.5 * c0, c0, c0 + 1e-12] {
        let refused = matches!(
            build_ansatz(&m, &eq, gamma, horizon, &AnsatzOptions::default()),
            Err(Error::NoSupercriticalRoot(_))
        );
        c.check(refused, format!("γ = {gamma:.6} refused"));
    }
    c.finish();
}

fn random_ordered_pair(
    rng: &mut StdRng,
    n: usize,
    bounds: (f64, f64),
    strict: bool,
) -> (LatticeState, LatticeState) {
    let eps = if strict { 1e-3 } else { 0.0 };
    let mut a = LatticeState::zeros(-(n as i64) / 2, 0.0, n, 0.0, Frame::Cooperative);
    let mut b = a.clone();
    for i in 0..n {
        a.u[i] = rng.gen_range(0.0..bounds.0 - eps);
        a.v[i] = rng.gen_range(0.0..bounds.1 - eps);
        b.u[i] = rng.gen_range(a.u[i] + eps..=bounds.0);
        b.v[i] = rng.gen_range(a.v[i] + eps..=bounds.1);
    }
    (a, b)
}

#[test]
fn criterion_06_comparison_principle() {
    let mut c = Criterion::new(6, "comparison principle on random ordered pairs");
    let m = periodic_medium();
    let eq =
        Equilibria::compute(&m, Horizon::new(-1.0, 11.0).unwrap(), &EquilibriumOptions::default())
            .unwrap();
    let bounds = (eq.u_star.min(), eq.v_star.min());
    let sys = Cooperative::new(
        &m,
        States { u_star: &eq.u_star, v_star: &eq.v_star },
        Ghosts::Equilibrium,
    );
    let opts = IntegratorOptions::default();
    let outs: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut worst, mut strict_ok, mut initial_ok) = (0.0f64, true, true);
    for k in 0..100 {
        let strict = k % 2 == 0;
        let (a, b) = random_ordered_pair(&mut rng, 200, bounds, strict);
        initial_ok &= order_leq(&a, &b).unwrap().holds;
        let ta = integrate(&sys, &a, &outs, &opts).unwrap();
        let tb = integrate(&sys, &b, &outs, &opts).unwrap();
        for (sa, sb) in ta.snapshots.iter().zip(&tb.snapshots) {
            let check = order_leq_collar(sa, sb, 2).unwrap();
            worst = worst.max(check.max_violation);
            if strict {
                strict_ok &= check.min_gap > 0.0;
            }
        }
    }
    c.check(initial_ok, "initial pairs ordered");
    c.check(worst <= order_tolerance(), format!("max violation {worst:.1e} ≤ 10·atol"));
    c.check(strict_ok, "strict pairs stay strict away from the collar");
    c.budget(Duration::from_secs(120));
    c.finish();
}

#[test]
fn criterion_07_pullback_monotonicity() {
    let mut c = Criterion::new(7, "pullback profiles non-increasing in τ");
    let p = &canonical_front().value.profile;
    let run_atol = FrontOptions::default().pullback.integrator.atol;
    c.check(p.taus_used.len() == 4, format!("τ schedule {:?}", p.taus_used));
    c.check(
        p.tau_violation <= order_tolerance(),
        format!(
            "max rise {:.1e} ≤ {:.0e} (run atol {run_atol:.0e})",
            p.tau_violation,
            order_tolerance()
        ),
    );
    let gaps = &p.gaps;
    c.check(
        gaps.windows(2).all(|w| w[1] <= w[0]),
        format!(
            "successive gaps {:?}",
            gaps.iter().map(|g| format!("{g:.1e}")).collect::<Vec<_>>()
        ),
    );
    c.finish();
}

fn probe_medium(rng: &mut StdRng) -> Medium {
    let base = MediumSpec::constant(CoefficientSet::CANONICAL).with_seed(rng.gen());
    let spec = match rng.gen_range(0..5) {
        0 => base,
        1 => base.with_channel(
            Channel::A1,
            ChannelSpec::Periodic { mean: 1.0, amplitude: 0.25, frequency: 1.3, phase: 0.2 },
        ),
        2 => quasi_periodic_medium().spec().clone().with_seed(rng.gen()),
        3 => base.with_channel(
            Channel::A2,
            ChannelSpec::SmoothedSwitching { low: 0.8, high: 1.2, rate: 0.4, width: 0.5 },
        ),
        _ => base.with_channel(
            Channel::B2,
            ChannelSpec::BoundedNoise { mean: 1.0, amplitude: 0.3, correlation_time: 1.5 },
        ),
    };
    Medium::new(spec).unwrap()
}

#[test]
fn criterion_08_shift_and_stationarity() {
    let mut c = Criterion::new(8, "shift covariance and front stationarity");
    let mut rng = StdRng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let m = probe_medium(&mut rng);
        let s: f64 = rng.gen_range(-1e3..1e3);
        let t: f64 = rng.gen_range(-1e3..1e3);
        if m.shift(s).coeffs_at(t) != m.coeffs_at(t + s) {
            mismatches += 1;
        }
    }
    c.check(mismatches == 0, format!("{mismatches} of 1000 shift probes differ"));
    let m = quasi_periodic_medium();
    for t in [3.7, 12.1] {
        let r = stationarity_check(&m, t, &FrontOptions::default()).unwrap();
        c.check(r.residual < 5e-4, format!("t = {t}: residual {:.1e}", r.residual));
    }
    c.finish();
}

#[test]
fn criterion_09_integrator_fidelity() {
    let mut c = Criterion::new(9, "adaptive integrator vs references");
    let spec = MediumSpec::constant(CoefficientSet::CANONICAL)
        .with_channel(
            Channel::A1,
            ChannelSpec::Periodic { mean: 1.0, amplitude: 0.25, frequency: 1.0, phase: 0.0 },
        )
        .with_channel(
            Channel::A2,
            ChannelSpec::Periodic { mean: 0.9, amplitude: 0.1, frequency: 0.7, phase: 0.3 },
        );
    let m = Medium::new(spec).unwrap();
    let s0 = LatticeState::from_fn(-25.0, 50, 0.0, Frame::Competition, |x| {
        (0.5 + 0.4 * (0.3 * x).sin(), 0.25 + 0.2 * (0.2 * x).cos())
    });
    let (left, right) = ((0.9, 0.05), (0.05, 0.45));
    let ghosts = move |_t: f64| (left, right);
    let sys = Competition::new(&m, Ghosts::Fixed { left, right });
    let outs = [0.5, 1.0, 1.5, 2.0];
    let fast = integrate(&sys, &s0, &outs, &IntegratorOptions::default()).unwrap();
    let slow =
        fixed_step_trajectory(OracleModel::Competition, &m, &ghosts, &s0, &outs, 1e-5).unwrap();
    let lattice_err = fast
        .snapshots
        .iter()
        .zip(&slow.snapshots)
        .flat_map(|(a, b)| {
            a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max);
    c.check(
        lattice_err < 1e-7,
        format!("50 sites, t ≤ 2: max |adaptive - RK4| = {lattice_err:.1e}"),
    );

    let canonical = canonical_medium();
    let exact = |t: f64| logistic_closed_form(1.0, 1.0, 0.1, t);
    let follow = move |_x: f64, t: f64| (exact(t), 0.0);
    let single = LatticeState::from_fn(0.0, 1, 0.0, Frame::Competition, |_| (0.1, 0.0));
    let times = [1.0, 2.5, 5.0];
    let adaptive = integrate(
        &Competition::new(&canonical, Ghosts::Function(&follow)),
        &single,
        &times,
        &IntegratorOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() },
    )
    .unwrap();
    let follow_t = move |t: f64| ((exact(t), 0.0), (exact(t), 0.0));
    let rk4 = fixed_step_trajectory(
        OracleModel::Competition,
        &canonical,
        &follow_t,
        &single,
        &times,
        1e-5,
    )
    .unwrap();
    let (mut ea, mut er) = (0.0f64, 0.0f64);
    for (k, &t) in times.iter().enumerate() {
        ea = ea.max((adaptive.snapshots[k].u[0] - exact(t)).abs());
        er = er.max((rk4.snapshots[k].u[0] - exact(t)).abs());
    }
    c.check(ea < 1e-9, format!("logistic: adaptive err {ea:.1e}"));
    c.check(er < 1e-9, format!("logistic: RK4 err {er:.1e}"));
    c.finish();
}

#[test]
fn criterion_10_interior_convergence() {
    let mut c = Criterion::new(10, "interior convergence behind the spreading edge");
    let report = &spreading_run().value;
    let i = report.interior;
    let c0 = critical_speed(0.75).unwrap().c0;
    c.check((i.speed - 0.5 * c0).abs() < 1e-9, format!("c = {:.5} = c0/2", i.speed));
    c.check((i.t - 300.0).abs() < 1e-9, format!("t = {}", i.t));
    c.check(i.sup_deviation < 1e-2, format!("sup deviation {:.1e}", i.sup_deviation));
    c.finish();
}
