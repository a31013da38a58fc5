//! Property checks shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

use hsps_core::analytic::{
    collection_efficiency_from_counts, empty_window_probability, figures_of_merit, fit_mu_from_p2,
    g2_zero, heralding_fidelity, p2, poissonian_reference, preparation_efficiency,
    single_detection_rate,
};
use hsps_core::domain::{
    collection_from_preparation, db_to_transmission, make_scenario, SourceParams,
    EFFICIENCY_ROUNDING_TOLERANCE, MU_DT_MAX,
};
use hsps_core::simulator::{simulate, simulate_replicas, true_window_distribution, SimConfig};

pub type Property = (&'static str, fn(u32) -> Result<(), String>);

/// Deterministic runner with `cases` cases.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// Valid parameter sets with `mu * delta_t` in `[1e-4, max_mu_dt]` and a
/// heralding fidelity of at least one half.
pub fn valid_params(max_mu_dt: f64) -> impl Strategy<Value = SourceParams> {
    (
        (1e-4..max_mu_dt, 1e-9..50e-9f64, 0.05..1.0f64, 0.0..3.0f64),
        (0.01..1.0f64, 0.05..1.0f64, 0.0..1.0f64),
        (0.05..1.0f64, 0.0..1e4f64, 0.3..0.7f64),
    )
        .prop_map(|((mu_dt, delta_t, gamma, loss), (eta_t, trans, dark_frac), (eta_i, dark_i, split))| {
            let mu = mu_dt / delta_t;
            SourceParams {
                mu,
                delta_t,
                gamma,
                gamma_prep: None,
                idler_loss_db: loss,
                eta_trigger: eta_t,
                trigger_transmission: trans,
                dark_rate_trigger: dark_frac * mu * eta_t * trans,
                eta_idler: eta_i,
                dark_rate_idler: dark_i,
                splitter_t: split,
                coherence_time: delta_t / 1000.0,
            }
        })
}

fn fidelity(p: &SourceParams) -> f64 {
    heralding_fidelity(p.herald_rate(), p.dark_rate_trigger).unwrap()
}

fn ok(p: &SourceParams) -> Result<hsps_core::FiguresOfMerit, TestCaseError> {
    figures_of_merit(p).map_err(|e| TestCaseError::fail(format!("{e} for {p:?}")))
}

// ---- domain ----

pub fn preparation_round_trip(cases: u32) -> Result<(), String> {
    run(cases, (1e-6..=1.0f64, 0.0..=30.0f64), |(gamma, loss)| {
        // Collection efficiencies reachable through `loss`.
        let gamma_out = gamma * db_to_transmission(loss).unwrap();
        let prep = preparation_efficiency(gamma_out, loss).unwrap();
        let back = collection_from_preparation(prep, loss).unwrap();
        prop_assert!((back - gamma_out).abs() <= 1e-12, "{back} vs {gamma_out}");
        Ok(())
    })
}

pub fn db_strictly_decreasing(cases: u32) -> Result<(), String> {
    run(cases, (0.0..60.0f64, 1e-6..10.0f64), |(a, d)| {
        prop_assert!(db_to_transmission(a + d).unwrap() < db_to_transmission(a).unwrap());
        Ok(())
    })
}

pub fn experimental_rounding(_cases: u32) -> Result<(), String> {
    let p = make_scenario("paper-experimental").map_err(|e| e.to_string())?.params;
    let prep = p.gamma_prep.ok_or("no preparation efficiency")?;
    let mismatch = (p.gamma - prep * db_to_transmission(p.idler_loss_db).unwrap()).abs();
    if mismatch < EFFICIENCY_ROUNDING_TOLERANCE {
        Ok(())
    } else {
        Err(format!("mismatch {mismatch}"))
    }
}

// ---- analytic ----

pub fn g2_consistent_with_p1_p2(cases: u32) -> Result<(), String> {
    run(cases, valid_params(0.05), |p| {
        let f = ok(&p)?;
        let rel = (f.g2 - 2.0 * f.p2 / (f.p1 * f.p1)).abs() / f.g2;
        prop_assert!(rel <= 0.05, "relative gap {rel}");
        Ok(())
    })
}

pub fn p2_increases_in_gamma_mu_delta_t(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.2), 1.01..1.5f64), |(p, k)| {
        let base = p2(&p).unwrap();
        let mut g = p;
        g.gamma = (p.gamma * k).min(1.0);
        if g.gamma > p.gamma {
            prop_assert!(p2(&g).unwrap() > base);
        }
        let mut m = p;
        m.mu *= k;
        prop_assert!(p2(&m).unwrap() > base);
        let mut t = p;
        t.delta_t *= k;
        prop_assert!(p2(&t).unwrap() > base);
        Ok(())
    })
}

pub fn g2_increases_in_mu_delta_t(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.3), 1.01..1.5f64), |(p, k)| {
        let mut q = p;
        q.delta_t *= k;
        q.coherence_time = p.coherence_time;
        prop_assert!(g2_zero(&q).unwrap() > g2_zero(&p).unwrap());
        Ok(())
    })
}

pub fn empty_window_decreases(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.3), 1.01..1.5f64), |(p, k)| {
        let mut q = p;
        q.delta_t *= k;
        prop_assert!(empty_window_probability(&q).unwrap() < empty_window_probability(&p).unwrap());
        let mut g = p;
        g.gamma = (p.gamma * k).min(1.0);
        if g.gamma > p.gamma {
            prop_assert!(empty_window_probability(&g).unwrap() < empty_window_probability(&p).unwrap());
        }
        Ok(())
    })
}

pub fn bounds(cases: u32) -> Result<(), String> {
    run(cases, valid_params(0.45), |p| {
        let f = ok(&p)?;
        let x = p.mu_delta_t();
        prop_assert!(f.p1 <= p.gamma * (fidelity(&p) + x));
        prop_assert!(f.p2 <= p.gamma * p.gamma * x);
        Ok(())
    })
}

pub fn low_rate_limit(cases: u32) -> Result<(), String> {
    run(cases, valid_params(0.05), |mut p| {
        p.dark_rate_trigger = 0.0;
        p.mu = 1e-6 / p.delta_t;
        let f = ok(&p)?;
        prop_assert!((f.p1 - p.gamma).abs() <= 1e-4);
        prop_assert!(f.g2.abs() <= 1e-4);
        Ok(())
    })
}

pub fn inverse_pairs(cases: u32) -> Result<(), String> {
    run(cases, valid_params(0.45), |p| {
        let f = fidelity(&p);
        let mu = fit_mu_from_p2(p2(&p).unwrap(), p.gamma, p.delta_t, f).unwrap();
        prop_assert!((mu - p.mu).abs() <= 1e-9 * p.mu, "{mu} vs {}", p.mu);

        let singles = single_detection_rate(&p).unwrap();
        let gamma =
            collection_efficiency_from_counts(singles, p.eta_idler, p.herald_rate(), p.dark_rate_trigger)
                .unwrap();
        prop_assert!((gamma - p.gamma).abs() <= 1e-9 * p.gamma, "{gamma} vs {}", p.gamma);
        Ok(())
    })
}

pub fn poissonian_g2_is_one(cases: u32) -> Result<(), String> {
    run(cases, 0.0..=1.0f64, |x| {
        prop_assert_eq!(poissonian_reference(x).unwrap().g2, 1.0);
        Ok(())
    })
}

pub fn validity_guards(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.05), MU_DT_MAX..5.0f64, 1.0001..3.0f64), |(p, mu_dt, over)| {
        let mut q = p;
        q.mu = mu_dt / p.delta_t;
        prop_assert!(figures_of_merit(&q).is_err());
        let setters: [fn(&mut SourceParams, f64); 5] = [
            |q: &mut SourceParams, v: f64| q.gamma = v,
            |q: &mut SourceParams, v: f64| q.eta_trigger = v,
            |q: &mut SourceParams, v: f64| q.trigger_transmission = v,
            |q: &mut SourceParams, v: f64| q.eta_idler = v,
            |q: &mut SourceParams, v: f64| q.splitter_t = v,
        ];
        for set in setters {
            let mut r = p;
            set(&mut r, over);
            prop_assert!(r.validate().is_err());
            set(&mut r, -over);
            prop_assert!(r.validate().is_err());
        }
        let mut r = p;
        r.coherence_time = p.delta_t / 100.0 * over;
        prop_assert!(r.validate().is_err());
        Ok(())
    })
}

// ---- simulator ----

/// Gate-restricted runs long enough for about `gates` heralds.
fn config_for(p: SourceParams, gates: f64, seed: u64) -> SimConfig {
    SimConfig::new(p, gates / p.herald_rate(), seed)
}

fn within_3_sigma(name: &str, observed: f64, expected: f64, n: f64) -> Result<(), TestCaseError> {
    let sigma = (expected * (1.0 - expected) / n).sqrt();
    if (observed - expected).abs() <= 3.0 * sigma {
        Ok(())
    } else {
        Err(TestCaseError::fail(format!(
            "{name}: {observed} vs {expected} (3 sigma = {})",
            3.0 * sigma
        )))
    }
}

pub fn monte_carlo_matches_analytic(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.05), any::<u64>()), |(p, seed)| {
        let sim = simulate(&config_for(p, 1e5, seed)).unwrap();
        let n = sim.truth.gates() as f64;
        prop_assert!(n >= 9e4);
        let d = true_window_distribution(&sim.truth).unwrap();
        let f = ok(&p)?;
        within_3_sigma("p1", d.p1, f.p1, n)?;
        within_3_sigma("p2plus", d.p2plus, f.p2, n)?;
        Ok(())
    })
}

pub fn empty_gate_fraction(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.05), any::<u64>()), |(p, seed)| {
        let sim = simulate(&config_for(p, 1e5, seed)).unwrap();
        let n = sim.truth.gates() as f64;
        let empty = sim.truth.empty_accidental_fraction().unwrap();
        within_3_sigma("empty", empty, empty_window_probability(&p).unwrap(), n)
    })
}

pub fn determinism(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.1), any::<u64>(), 1u32..5), |(p, seed, replicas)| {
        let mut c = config_for(p, 2e3, seed);
        c.replicas = replicas;
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| simulate_replicas(&c).unwrap());
        let b = wide.install(|| simulate_replicas(&c).unwrap());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
        Ok(())
    })
}

pub fn tally_invariants(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.3), any::<u64>()), |(p, seed)| {
        let sim = simulate(&config_for(p, 5e3, seed)).unwrap();
        let (c, t) = (&sim.counts, &sim.truth);
        prop_assert_eq!(t.branch_a + t.branch_b, t.surviving_photons());
        prop_assert_eq!(t.gates(), c.gates_opened);
        prop_assert_eq!(c.gates_opened, c.heralds);
        prop_assert!(c.coincidences <= c.gates_with_detection);
        prop_assert!(c.gates_with_detection <= c.singles);
        prop_assert!(c.singles <= 2 * c.gates_opened);
        prop_assert_eq!(c.singles, c.gates_with_detection + c.coincidences);
        Ok(())
    })
}

pub fn dark_only_bench(cases: u32) -> Result<(), String> {
    run(cases, (valid_params(0.05), 1e3..1e5f64, 1e5..1e7f64, any::<u64>()), |(p, dark, dark_i, seed)| {
        let mut q = p;
        q.mu = 0.0;
        q.dark_rate_trigger = dark;
        q.dark_rate_idler = dark_i;
        let duration = 2e4 / dark;
        let sim = simulate(&SimConfig::new(q, duration, seed)).unwrap();
        let heralds = sim.counts.heralds as f64;
        let expected = dark * duration;
        prop_assert!((heralds - expected).abs() <= 3.0 * expected.sqrt(), "{heralds} vs {expected}");
        prop_assert_eq!(sim.truth.surviving_photons(), 0);
        let p_d = dark_i * q.delta_t;
        let singles = sim.counts.singles as f64;
        let mean = 2.0 * p_d * heralds;
        let sd = (2.0 * p_d * (1.0 - p_d) * heralds).sqrt();
        prop_assert!((singles - mean).abs() <= 3.0 * sd.max(1.0), "{singles} vs {mean}");
        Ok(())
    })
}

pub const DOMAIN: &[Property] = &[
    ("preparation round trip", preparation_round_trip),
    ("db_to_transmission strictly decreasing", db_strictly_decreasing),
    ("experimental scenario within rounding tolerance", experimental_rounding),
];

pub const ANALYTIC: &[Property] = &[
    ("g2 consistent with 2 P2 / P1^2", g2_consistent_with_p1_p2),
    ("P2 increases in gamma, mu and delta_t", p2_increases_in_gamma_mu_delta_t),
    ("g2 increases in mu delta_t", g2_increases_in_mu_delta_t),
    ("empty-window probability decreases in gamma mu delta_t", empty_window_decreases),
    ("P1 and P2 bounds", bounds),
    ("low-rate limit", low_rate_limit),
    ("inverse pairs", inverse_pairs),
    ("Poissonian reference g2 = 1", poissonian_g2_is_one),
    ("validity-domain guards", validity_guards),
];

pub const SIMULATOR: &[Property] = &[
    ("Monte Carlo matches the closed form", monte_carlo_matches_analytic),
    ("empty-gate fraction", empty_gate_fraction),
    ("determinism across thread counts", determinism),
    ("tally invariants and splitter conservation", tally_invariants),
    ("dark-count-only bench", dark_only_bench),
];
