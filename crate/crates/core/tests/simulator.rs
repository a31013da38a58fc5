use hsps_core::analytic::{empty_window_probability, figures_of_merit, heralding_fidelity};
use hsps_core::domain::{make_scenario, SourceParams};
use hsps_core::simulator::{
    merge_replicas, simulate, simulate_replicas, true_window_distribution, Engine, SimConfig,
};

fn experimental() -> SourceParams {
    make_scenario("paper-experimental").unwrap().params
}

fn assert_within(name: &str, observed: f64, expected: f64, sigma: f64) {
    assert!(
        (observed - expected).abs() <= 3.0 * sigma,
        "{name}: {observed} vs {expected} +- 3*{sigma}"
    );
}

fn binomial_sigma(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

#[test]
fn experimental_run_matches_the_model() {
    let p = experimental();
    let sim = simulate(&SimConfig::new(p, 10.0, 2024)).unwrap();
    let heralds = sim.counts.heralds as f64;
    assert_within("heralds", heralds, 1_243_020.0, 1_243_020f64.sqrt());

    let d = true_window_distribution(&sim.truth).unwrap();
    let f = figures_of_merit(&p).unwrap();
    assert_within("p1", d.p1, f.p1, binomial_sigma(f.p1, heralds));
    assert_within("p2plus", d.p2plus, f.p2, binomial_sigma(f.p2, heralds));
    assert!((d.p1 - 0.388).abs() <= 0.003);
    assert!((d.p2plus - 0.0035).abs() <= 0.0004);

    let empty = empty_window_probability(&p).unwrap();
    let fraction = sim.truth.empty_accidental_fraction().unwrap();
    assert_within("empty", fraction, empty, binomial_sigma(empty, heralds));

    // Detected idlers per gate: the heralded one plus accidental ones.
    let fidelity = heralding_fidelity(p.herald_rate(), p.dark_rate_trigger).unwrap();
    let rate = p.gamma * p.eta_idler * (fidelity + p.mu_delta_t()) * p.herald_rate();
    let singles_rate = sim.counts.singles_rate();
    assert_within("singles", singles_rate, rate, (rate * 10.0).sqrt() / 10.0);
}

#[test]
fn engines_agree() {
    let mut p = experimental();
    p.dark_rate_idler = 2e4;
    let mut a = SimConfig::new(p, 2.0, 8);
    a.replicas = 2;
    let mut b = a.clone();
    b.engine = Engine::FullTimeline;
    let (ra, rb) = (simulate(&a).unwrap(), simulate(&b).unwrap());

    let n = ra.counts.heralds as f64;
    assert_within("heralds", rb.counts.heralds as f64, n, (2.0 * n).sqrt());
    let sa = ra.counts.singles as f64;
    assert_within("singles", rb.counts.singles as f64, sa, (2.0 * sa).sqrt());
    let ca = ra.counts.coincidences as f64;
    assert_within("coincidences", rb.counts.coincidences as f64, ca, (2.0 * ca).sqrt().max(1.0));

    let (da, db) = (
        true_window_distribution(&ra.truth).unwrap(),
        true_window_distribution(&rb.truth).unwrap(),
    );
    let sd = |q: f64| (2.0 * q * (1.0 - q) / n).sqrt();
    assert_within("p1", db.p1, da.p1, sd(da.p1));
    assert_within("p2plus", db.p2plus, da.p2plus, sd(da.p2plus));
}

#[test]
fn engines_agree_with_crowded_gates() {
    let mut p = experimental();
    p.gamma_prep = None;
    p.gamma = 1.0;
    p.mu = 2e7;
    p.eta_trigger = 1.0;
    p.trigger_transmission = 1.0;
    p.delta_t = 10e-9;
    let a = SimConfig::new(p, 0.02, 21);
    let mut b = a.clone();
    b.engine = Engine::FullTimeline;
    let flags = a.validate().unwrap();
    assert!(flags.iter().any(|f| matches!(f, hsps_core::Flag::OverlappingGates { .. })));
    let (ra, rb) = (simulate(&a).unwrap(), simulate(&b).unwrap());
    let n = ra.counts.heralds as f64;
    let (da, db) = (
        true_window_distribution(&ra.truth).unwrap(),
        true_window_distribution(&rb.truth).unwrap(),
    );
    let sd = |q: f64| (2.0 * q * (1.0 - q) / n).sqrt();
    assert_within("p1", db.p1, da.p1, sd(da.p1));
    assert_within("p2plus", db.p2plus, da.p2plus, sd(da.p2plus));
}

#[test]
fn high_rate_breakdown_of_the_first_order_model() {
    let mut p = experimental();
    p.gamma_prep = None;
    p.gamma = 1.0;
    p.eta_trigger = 1.0;
    p.trigger_transmission = 1.0;
    p.dark_rate_trigger = 0.0;
    p.mu = 0.3 / p.delta_t;
    let fom = figures_of_merit(&p).unwrap();
    assert!(fom.flags.iter().any(|f| matches!(f, hsps_core::Flag::ApproximationStretched { .. })));

    let sim = simulate(&SimConfig::new(p, 2e-3, 4)).unwrap();
    let n = sim.counts.heralds as f64;
    let d = true_window_distribution(&sim.truth).unwrap();
    // Own photon always present; more arrive as Poisson(mu dt).
    let exact = 1.0 - (-p.mu_delta_t()).exp();
    assert_within("p2plus", d.p2plus, exact, binomial_sigma(exact, n));
    assert!(fom.p2 - d.p2plus > 10.0 * binomial_sigma(exact, n), "{} vs {}", fom.p2, d.p2plus);
}

#[test]
fn dead_time_suppresses_firings() {
    let mut p = experimental();
    p.dark_rate_idler = 1e5;
    let base = SimConfig::new(p, 0.5, 6);
    let mut dead = base.clone();
    dead.dead_time = 1e-3;
    let (a, b) = (simulate(&base).unwrap(), simulate(&dead).unwrap());
    assert!(b.counts.singles < a.counts.singles / 2);
    // At most one firing per detector per dead time.
    assert!(b.counts.singles as f64 <= 2.0 * (0.5 / 1e-3 + 1.0));
    assert_eq!(a.truth, b.truth);
}

#[test]
fn merged_replicas_match_a_long_run() {
    let p = experimental();
    let (k, piece) = (4u32, 0.01);
    let mut merged = Vec::new();
    let mut single = Vec::new();
    for trial in 0..20u64 {
        let mut c = SimConfig::new(p, piece, 1000 + trial);
        c.replicas = k;
        let runs = simulate_replicas(&c).unwrap();
        let counts: Vec<_> = runs.iter().map(|r| r.0).collect();
        let m = merge_replicas(&counts).unwrap();
        assert!((m.duration - piece * f64::from(k)).abs() < 1e-12);
        merged.push(m);
        single.push(simulate(&SimConfig::new(p, piece * f64::from(k), 5000 + trial)).unwrap().counts);
    }
    let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
    for (name, field) in [
        ("heralds", (|c: &hsps_core::simulator::RawCounts| c.heralds) as fn(&_) -> u64),
        ("singles", |c| c.singles),
    ] {
        let a = mean(merged.iter().map(|c| field(c) as f64).collect());
        let b = mean(single.iter().map(|c| field(c) as f64).collect());
        // Poisson counts: the variance of a 20-trial mean is mean / 20.
        let sigma = (a / 20.0 + b / 20.0).sqrt();
        assert_within(name, a, b, sigma);
    }
}

#[test]
fn replica_results_do_not_depend_on_order() {
    let mut c = SimConfig::new(experimental(), 0.01, 77);
    c.replicas = 5;
    let all = simulate_replicas(&c).unwrap();
    c.replicas = 3;
    let first = simulate_replicas(&c).unwrap();
    assert_eq!(&all[..3], &first[..]);
}
