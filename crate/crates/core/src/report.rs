//! Reproduction of the published figure tables.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::analytic::{self, FiguresOfMerit};
use crate::config::{Config, SimSettings};
use crate::domain::{
    make_scenario, measured, Published, CALCULATED, EXPERIMENTAL, PAPER_EXPERIMENTAL,
    PAPER_PREDICTED, PREDICTED,
};
use crate::error::{Error, Result};
use crate::estimator::{bootstrap_errors, estimate, BenchParams, BootstrapOptions};
use crate::record::{fmt_f64, Record};
use crate::simulator::{self, RawCounts};

/// Relative tolerance for published values quoted without error bars.
pub const BARE_VALUE_TOLERANCE: f64 = 0.15;
/// Multi-photon suppression quoted for the predicted bench.
pub const PREDICTED_SUPPRESSION: f64 = 200.0;
/// Coincidence efficiency implied by the published experimental P2.
pub const CALIBRATED_KAPPA: f64 = 0.0129;
/// Relative detector-efficiency uncertainty assumed for the experimental error bars.
pub const EXPERIMENTAL_ETA_REL_SIGMA: f64 = crate::config::DEFAULT_ETA_REL_SIGMA;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Calculated,
    Predicted,
    Experimental,
    All,
}

impl FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calculated" => Ok(Which::Calculated),
            "predicted" => Ok(Which::Predicted),
            "experimental" => Ok(Which::Experimental),
            "all" => Ok(Which::All),
            other => Err(Error::Config(format!(
                "unknown column `{other}` (valid: calculated, predicted, experimental, all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Outside tolerance for a documented reason; does not fail the run.
    Flagged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Flagged => "FLAGGED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureCheck {
    pub figure: &'static str,
    pub computed: f64,
    pub sigma: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    pub status: Status,
}

impl FigureCheck {
    pub fn within(&self) -> bool {
        (self.computed - self.expected).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    /// `analytic`, `estimator`, `estimator-calibrated` or `monte-carlo`.
    pub method: String,
    pub figures: FiguresOfMerit,
    pub checks: Vec<FigureCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReport {
    pub column: &'static str,
    pub scenario: String,
    pub results: Vec<MethodResult>,
    pub note: String,
    /// Everything needed to rerun the column: a config and, where counts
    /// were the input, their record.
    pub inputs: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub replicas: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub columns: Vec<ColumnReport>,
    pub metadata: RunMetadata,
}

impl RunReport {
    pub fn checks(&self) -> impl Iterator<Item = (&ColumnReport, &MethodResult, &FigureCheck)> {
        self.columns.iter().flat_map(|c| {
            c.results.iter().flat_map(move |r| r.checks.iter().map(move |k| (c, r, k)))
        })
    }

    pub fn passed(&self) -> bool {
        self.checks().all(|(_, _, k)| k.status != Status::Fail)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            let _ = writeln!(out, "== {} ({}) ==", c.column, c.scenario);
            let _ = writeln!(
                out,
                "{:<22} {:<12} {:>12} {:>12} {:>12} {:>12}  status",
                "method", "figure", "computed", "sigma", "expected", "tolerance"
            );
            for r in &c.results {
                for k in &r.checks {
                    let sigma = k.sigma.map_or("-".to_string(), sig);
                    let _ = writeln!(
                        out,
                        "{:<22} {:<12} {:>12} {:>12} {:>12} {:>12}  {}",
                        r.method,
                        k.figure,
                        sig(k.computed),
                        sigma,
                        sig(k.expected),
                        sig(k.tolerance),
                        k.status.as_str()
                    );
                }
                for f in &r.figures.flags {
                    let _ = writeln!(out, "{:<22} flag: {f}", r.method);
                }
            }
            let _ = writeln!(out, "note: {}", c.note);
            let _ = writeln!(out, "inputs:");
            for line in c.inputs.lines() {
                let _ = writeln!(out, "  {line}");
            }
            out.push('\n');
        }
        self.write_metadata(&mut out, "");
        let _ = writeln!(out, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }

    /// One row per check; column inputs follow as `#` comment lines.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "column", "scenario", "method", "figure", "computed", "sigma", "expected", "tolerance",
            "status",
        ];
        w.write_record(header).expect("in-memory write");
        for (c, r, k) in self.checks() {
            w.write_record([
                c.column.to_string(),
                c.scenario.clone(),
                r.method.clone(),
                k.figure.to_string(),
                fmt_f64(k.computed),
                k.sigma.map(fmt_f64).unwrap_or_default(),
                fmt_f64(k.expected),
                fmt_f64(k.tolerance),
                k.status.as_str().to_string(),
            ])
            .expect("in-memory write");
        }
        let mut out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        for c in &self.columns {
            let _ = writeln!(out, "# inputs {}", c.column);
            for line in c.inputs.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        self.write_metadata(&mut out, "# ");
        out
    }

    fn write_metadata(&self, out: &mut String, prefix: &str) {
        let m = &self.metadata;
        if let (Some(seed), Some(duration), Some(replicas)) = (m.seed, m.duration, m.replicas) {
            let _ = writeln!(
                out,
                "{prefix}monte-carlo: seed={seed} duration={} replicas={replicas}",
                fmt_f64(duration)
            );
        }
    }
}

fn sig(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.4e}")
    } else {
        format!("{x:.6}")
    }
}

/// Checks the columns named by `which`. With `mc`, the two model columns are
/// also simulated and estimated; those rows are informational and flag
/// rather than fail. Failures are reported, never returned as errors.
pub fn run_reproduce(which: Which, mc: Option<&SimSettings>) -> Result<RunReport> {
    let mut columns = Vec::new();
    if matches!(which, Which::Calculated | Which::All) {
        columns.push(calculated_column(mc)?);
    }
    if matches!(which, Which::Predicted | Which::All) {
        columns.push(predicted_column(mc)?);
    }
    if matches!(which, Which::Experimental | Which::All) {
        columns.push(experimental_column()?);
    }
    let metadata = match mc {
        Some(s) => RunMetadata {
            seed: Some(s.seed),
            duration: Some(s.duration),
            replicas: Some(s.replicas),
        },
        None => RunMetadata::default(),
    };
    Ok(RunReport { columns, metadata })
}

/// Tolerances: the published error bar where given, else a relative band.
fn tolerances(p: &Published) -> [f64; 3] {
    [
        p.sigma_p1.unwrap_or(BARE_VALUE_TOLERANCE * p.p1),
        p.sigma_p2.unwrap_or(BARE_VALUE_TOLERANCE * p.p2),
        p.sigma_g2.unwrap_or(BARE_VALUE_TOLERANCE * p.g2),
    ]
}

fn compare(fom: &FiguresOfMerit, expected: &Published, miss: Status) -> Vec<FigureCheck> {
    let tol = tolerances(expected);
    let rows = [
        ("P1", fom.p1, fom.sigma_p1, expected.p1, tol[0]),
        ("P2", fom.p2, fom.sigma_p2, expected.p2, tol[1]),
        ("g2", fom.g2, fom.sigma_g2, expected.g2, tol[2]),
    ];
    rows.into_iter()
        .map(|(figure, computed, sigma, expected, tolerance)| {
            let mut k = FigureCheck {
                figure,
                computed,
                sigma,
                expected,
                tolerance,
                status: Status::Pass,
            };
            if !k.within() {
                k.status = miss;
            }
            k
        })
        .collect()
}

fn monte_carlo(config: &Config, settings: &SimSettings, expected: &Published) -> Result<MethodResult> {
    let mut sim = config.sim_config();
    sim.duration = settings.duration;
    sim.seed = settings.seed;
    sim.replicas = settings.replicas;
    sim.dead_time = settings.dead_time;
    sim.engine = settings.engine;
    let run = simulator::simulate(&sim)?;
    let mut figures = bootstrap_errors(
        &run.counts,
        &config.bench,
        &BootstrapOptions::new(1000, settings.seed),
    )?;
    figures.flags.extend(run.flags);
    Ok(MethodResult {
        method: "monte-carlo".into(),
        checks: compare(&figures, expected, Status::Flagged),
        figures,
    })
}

fn model_column(
    column: &'static str,
    scenario: &str,
    expected: &Published,
    mc: Option<&SimSettings>,
) -> Result<ColumnReport> {
    let s = make_scenario(scenario)?;
    let config = Config::from_scenario(&s);
    let figures = analytic::figures_of_merit(&s.params)?;
    let mut results = vec![MethodResult {
        method: "analytic".into(),
        checks: compare(&figures, expected, Status::Fail),
        figures,
    }];
    if let Some(settings) = mc {
        results.push(monte_carlo(&config, settings, expected)?);
    }
    Ok(ColumnReport {
        column,
        scenario: s.name.clone(),
        results,
        note: s.note.clone(),
        inputs: config.to_toml(),
    })
}

fn calculated_column(mc: Option<&SimSettings>) -> Result<ColumnReport> {
    model_column("calculated", PAPER_EXPERIMENTAL, &CALCULATED, mc)
}

fn predicted_column(mc: Option<&SimSettings>) -> Result<ColumnReport> {
    let mut c = model_column("predicted", PAPER_PREDICTED, &PREDICTED, mc)?;
    let analytic = &mut c.results[0];
    let suppression = analytic::multiphoton_suppression(&analytic.figures)?.value();
    let mut k = FigureCheck {
        figure: "suppression",
        computed: suppression,
        sigma: None,
        expected: PREDICTED_SUPPRESSION,
        tolerance: BARE_VALUE_TOLERANCE * PREDICTED_SUPPRESSION,
        status: Status::Pass,
    };
    if !k.within() {
        k.status = Status::Fail;
    }
    analytic.checks.push(k);
    Ok(c)
}

/// Published raw counts, one second of acquisition.
pub fn measured_counts() -> RawCounts {
    RawCounts::observed(measured::HERALDS, measured::DETECTIONS, measured::COINCIDENCES, 1.0)
}

fn experimental_column() -> Result<ColumnReport> {
    let s = make_scenario(PAPER_EXPERIMENTAL)?;
    let counts = measured_counts();
    let bench = BenchParams::from_source(&s.params);
    let opts = BootstrapOptions {
        eta_rel_sigma: EXPERIMENTAL_ETA_REL_SIGMA,
        ..BootstrapOptions::new(2000, 1)
    };

    let figures = bootstrap_errors(&counts, &bench, &opts)?;
    let default_row = MethodResult {
        method: "estimator".into(),
        checks: compare(&figures, &EXPERIMENTAL, Status::Flagged),
        figures,
    };

    let calibrated = BenchParams { correction_kappa: Some(CALIBRATED_KAPPA), ..bench };
    let figures = bootstrap_errors(&counts, &calibrated, &opts)?;
    let calibrated_row = MethodResult {
        method: "estimator-calibrated".into(),
        checks: compare(&figures, &EXPERIMENTAL, Status::Fail),
        figures,
    };

    let mut config = Config::from_scenario(&s);
    config.eta_rel_sigma = EXPERIMENTAL_ETA_REL_SIGMA;
    let mut rec = Record::new();
    counts.to_record(&mut rec);
    let inputs = format!(
        "{}\n# calibrated row: [bench] correction_kappa = {CALIBRATED_KAPPA}\n{rec}",
        config.to_toml()
    );

    // The surplus of the default-kappa P2 over the published value.
    let expected_kappa = estimate(&counts, &bench)?.p2 * bench.default_kappa() / EXPERIMENTAL.p2;
    Ok(ColumnReport {
        column: "experimental",
        scenario: s.name,
        results: vec![default_row, calibrated_row],
        note: format!(
            "estimated from the published counts. The published P2 needs a coincidence \
             efficiency of about {expected_kappa:.4}, not the beam-splitter value {:.4}; \
             default-kappa misses are flagged and the calibrated row uses kappa = {CALIBRATED_KAPPA}",
            bench.default_kappa()
        ),
        inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_columns_pass() {
        let r = run_reproduce(Which::Calculated, None).unwrap();
        assert!(r.passed(), "{}", r.to_table());
        let r = run_reproduce(Which::Predicted, None).unwrap();
        assert!(r.passed(), "{}", r.to_table());
        assert_eq!(r.columns[0].results[0].checks.len(), 4);
    }

    #[test]
    fn experimental_column_flags_default_kappa() {
        let r = run_reproduce(Which::Experimental, None).unwrap();
        assert!(r.passed(), "{}", r.to_table());
        let c = &r.columns[0];
        let default = &c.results[0];
        assert_eq!(default.checks[0].status, Status::Pass);
        assert_eq!(default.checks[1].status, Status::Flagged);
        let calibrated = &c.results[1];
        assert!(calibrated.checks.iter().all(|k| k.status == Status::Pass), "{}", r.to_table());
    }

    #[test]
    fn inputs_rebuild_the_config() {
        let r = run_reproduce(Which::All, None).unwrap();
        assert_eq!(r.columns.len(), 3);
        for c in &r.columns {
            let cfg = Config::parse(c.inputs.split("\n#").next().unwrap()).unwrap();
            assert_eq!(cfg.scenario, c.scenario);
        }
        let predicted = Config::parse(&r.columns[1].inputs).unwrap();
        assert_eq!(predicted.params, make_scenario(PAPER_PREDICTED).unwrap().params);
    }

    #[test]
    fn csv_is_stable() {
        let a = run_reproduce(Which::All, None).unwrap().to_csv();
        let b = run_reproduce(Which::All, None).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("column,scenario,method,figure,computed"));
    }

    #[test]
    fn which_parses() {
        assert_eq!("all".parse::<Which>().unwrap(), Which::All);
        assert!("everything".parse::<Which>().is_err());
    }
}
