//! One-parameter sweeps with CSV output.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::analytic::{self, multiphoton_suppression, FiguresOfMerit};
use crate::domain::SourceParams;
use crate::error::{Error, Result};
use crate::estimator::{bootstrap_errors, BenchParams, BootstrapOptions};
use crate::simulator::{self, SimConfig};

/// Gate widths a sweep may cover (s).
pub const DELTA_T_RANGE: (f64, f64) = (1e-9, 100e-9);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Mu,
    DeltaT,
    Gamma,
    EtaTrigger,
    DarkRateTrigger,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Mu => "mu",
            SweepParam::DeltaT => "delta_t",
            SweepParam::Gamma => "gamma",
            SweepParam::EtaTrigger => "eta_trigger",
            SweepParam::DarkRateTrigger => "dark_rate_trigger",
        }
    }

    /// Copy of `base` with this parameter set to `v`. Setting `gamma` drops
    /// the preparation efficiency it would otherwise have to agree with.
    pub fn apply(self, base: &SourceParams, v: f64) -> SourceParams {
        let mut p = *base;
        match self {
            SweepParam::Mu => p.mu = v,
            SweepParam::DeltaT => p.delta_t = v,
            SweepParam::Gamma => {
                p.gamma = v;
                p.gamma_prep = None;
            }
            SweepParam::EtaTrigger => p.eta_trigger = v,
            SweepParam::DarkRateTrigger => p.dark_rate_trigger = v,
        }
        p
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(SweepParam::Mu),
            "delta_t" => Ok(SweepParam::DeltaT),
            "gamma" => Ok(SweepParam::Gamma),
            "eta_trigger" => Ok(SweepParam::EtaTrigger),
            "dark_rate_trigger" => Ok(SweepParam::DarkRateTrigger),
            other => Err(Error::Config(format!(
                "cannot sweep `{other}` (valid: mu, delta_t, gamma, eta_trigger, dark_rate_trigger)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    P1,
    P2,
    G2,
    Suppression,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::P1, Figure::P2, Figure::G2, Figure::Suppression];

    pub fn name(self) -> &'static str {
        match self {
            Figure::P1 => "p1",
            Figure::P2 => "p2",
            Figure::G2 => "g2",
            Figure::Suppression => "suppression",
        }
    }

    fn value(self, f: &FiguresOfMerit) -> f64 {
        match self {
            Figure::P1 => f.p1,
            Figure::P2 => f.p2,
            Figure::G2 => f.g2,
            Figure::Suppression => multiphoton_suppression(f).map_or(f64::NAN, |s| s.value()),
        }
    }

    fn sigma(self, f: &FiguresOfMerit) -> Option<f64> {
        match self {
            Figure::P1 => f.sigma_p1,
            Figure::P2 => f.sigma_p2,
            Figure::G2 => f.sigma_g2,
            Figure::Suppression => f.sigma_g2.map(|s| s / (f.g2 * f.g2)),
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure `{s}` (valid: p1, p2, g2, suppression)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub scale: Scale,
    pub figures: Vec<Figure>,
}

impl SweepSpec {
    pub fn new(param: SweepParam, min: f64, max: f64, steps: usize) -> Self {
        SweepSpec {
            param,
            min,
            max,
            steps,
            scale: Scale::Linear,
            figures: Figure::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!("a sweep needs at least 2 steps, got {}", self.steps)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::Config(format!(
                "sweep range needs min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(Error::Config("a log sweep needs min > 0".into()));
        }
        if self.param == SweepParam::DeltaT {
            let (lo, hi) = DELTA_T_RANGE;
            if self.min < lo || self.max > hi {
                return Err(Error::Config(format!(
                    "delta_t sweeps are limited to [{lo:e}, {hi:e}] s"
                )));
            }
        }
        if self.figures.is_empty() {
            return Err(Error::Config("select at least one figure".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == n {
                    return self.max;
                }
                let t = i as f64 / n as f64;
                match self.scale {
                    Scale::Linear => self.min + t * (self.max - self.min),
                    Scale::Log => self.min * (self.max / self.min).powf(t),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Analytic,
    MonteCarlo {
        duration: f64,
        seed: u64,
        replicas: u32,
        n_resamples: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: std::result::Result<FiguresOfMerit, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub spec: SweepSpec,
    pub monte_carlo: bool,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    NonMonotonic,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Increasing => "strictly-increasing",
            Trend::Decreasing => "strictly-decreasing",
            Trend::Constant => "constant",
            Trend::NonMonotonic => "non-monotonic",
        }
    }
}

impl SweepTable {
    pub fn column(&self, figure: Figure) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.result.as_ref().ok().map(|f| figure.value(f)))
            .collect()
    }

    pub fn trend(&self, figure: Figure) -> Trend {
        let v = self.column(figure);
        let pairs = || v.windows(2);
        if pairs().all(|w| w[1] > w[0]) {
            Trend::Increasing
        } else if pairs().all(|w| w[1] < w[0]) {
            Trend::Decreasing
        } else if pairs().all(|w| w[1] == w[0]) {
            Trend::Constant
        } else {
            Trend::NonMonotonic
        }
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec![self.spec.param.name().to_string(), "valid".to_string()];
        for f in &self.spec.figures {
            header.push(f.name().to_string());
            if self.monte_carlo {
                header.push(format!("sigma_{}", f.name()));
            }
        }
        header.push("note".into());

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![num(row.value)];
            match &row.result {
                Ok(f) => {
                    rec.push("true".into());
                    for fig in &self.spec.figures {
                        rec.push(num(fig.value(f)));
                        if self.monte_carlo {
                            rec.push(fig.sigma(f).map(num).unwrap_or_default());
                        }
                    }
                    let flags: Vec<String> = f.flags.iter().map(ToString::to_string).collect();
                    rec.push(flags.join(" "));
                }
                Err(e) => {
                    rec.push("false".into());
                    let width = self.spec.figures.len() * if self.monte_carlo { 2 } else { 1 };
                    rec.extend(std::iter::repeat_n(String::new(), width));
                    rec.push(e.clone());
                }
            }
            w.write_record(&rec).expect("in-memory write");
        }
        let mut out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        for f in &self.spec.figures {
            let _ = writeln!(out, "# {}: {}", f.name(), self.trend(*f).as_str());
        }
        out
    }
}

/// Period decimal separator, scientific notation below 1e-3.
fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Evaluates the spec at every step. Steps outside the validity domain are
/// kept as invalid rows.
pub fn run_sweep(
    spec: &SweepSpec,
    base: &SourceParams,
    bench: &BenchParams,
    method: Method,
) -> Result<SweepTable> {
    spec.validate()?;
    let rows = spec
        .values()
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let p = spec.param.apply(base, value);
            let result = match method {
                Method::Analytic => analytic::figures_of_merit(&p),
                Method::MonteCarlo { duration, seed, replicas, n_resamples } => {
                    monte_carlo_point(&p, bench, duration, seed.wrapping_add(i as u64), replicas, n_resamples)
                }
            };
            SweepRow { value, result: result.map_err(|e| e.to_string()) }
        })
        .collect();
    Ok(SweepTable {
        spec: spec.clone(),
        monte_carlo: matches!(method, Method::MonteCarlo { .. }),
        rows,
    })
}

fn monte_carlo_point(
    p: &SourceParams,
    bench: &BenchParams,
    duration: f64,
    seed: u64,
    replicas: u32,
    n_resamples: usize,
) -> Result<FiguresOfMerit> {
    let mut config = SimConfig::new(*p, duration, seed);
    config.replicas = replicas;
    let run = simulator::simulate(&config)?;
    let b = BenchParams { delta_t: p.delta_t, ..*bench };
    let mut fom = bootstrap_errors(&run.counts, &b, &BootstrapOptions::new(n_resamples, seed))?;
    fom.flags.extend(run.flags);
    Ok(fom)
}
