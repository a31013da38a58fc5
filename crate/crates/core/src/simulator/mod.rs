//! Event-level Monte Carlo of the heralded source and its HBT test bench.
//!
//! Model, per replica:
//!
//! * pairs are created as a homogeneous Poisson process at rate `mu`; signal
//!   and idler are simultaneous;
//! * a pair's signal photon heralds with probability
//!   `eta_trigger * trigger_transmission`; trigger dark counts are an
//!   independent Poisson process at `dark_rate_trigger` and herald too;
//! * every herald at time `h` opens a gate covering idler emission times
//!   `[h - dt/2, h + dt/2)`, so the heralding idler always sits in its own gate;
//! * every idler survives to the source output with probability `gamma`, goes
//!   to detector A with probability `splitter_t` (else B) and is detected with
//!   probability `eta_idler`; each photon's fate is drawn once, even when gates
//!   overlap;
//! * each detector additionally fires from dark counts with probability
//!   `dark_rate_idler * dt` per gate.
//!
//! Counting convention: `singles` is the number of (gate, detector) pairs in
//! which that detector fired, so a gate in which both detectors fire adds two.
//! `coincidences` counts gates in which both fired. `gates_with_detection`
//! counts gates with at least one firing, the other common singles convention.
//!
//! Two engines implement the model. [`Engine::FullTimeline`] walks every pair
//! of the run. [`Engine::GateRestricted`] splits pairs into heralding and
//! non-heralding Poisson processes and draws the latter only inside gate
//! windows, which gives the same distribution at a cost proportional to the
//! number of gates rather than the number of pairs.

mod engine;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Flag, SourceParams};
use crate::error::{Error, Result};
use crate::record::{fmt_f64, Record};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    GateRestricted,
    FullTimeline,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gate-restricted" => Ok(Engine::GateRestricted),
            "full-timeline" => Ok(Engine::FullTimeline),
            other => Err(Error::Config(format!(
                "unknown engine `{other}` (valid: gate-restricted, full-timeline)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: SourceParams,
    /// Simulated acquisition time of each replica (s).
    pub duration: f64,
    pub seed: u64,
    pub replicas: u32,
    /// Per-detector dead time after a firing (s); zero disables it.
    pub dead_time: f64,
    pub engine: Engine,
}

impl SimConfig {
    pub fn new(params: SourceParams, duration: f64, seed: u64) -> Self {
        SimConfig {
            params,
            duration,
            seed,
            replicas: 1,
            dead_time: 0.0,
            engine: Engine::default(),
        }
    }

    pub fn validate(&self) -> Result<Vec<Flag>> {
        let mut flags = self.params.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::domain(format!("duration must be > 0, got {}", self.duration)));
        }
        if self.replicas == 0 {
            return Err(Error::domain("need at least one replica"));
        }
        if !(self.dead_time.is_finite() && self.dead_time >= 0.0) {
            return Err(Error::domain("dead_time must be >= 0"));
        }
        let overlap = self.params.herald_rate() * self.params.delta_t;
        if overlap > 0.1 {
            flags.push(Flag::OverlappingGates { herald_rate_delta_t: overlap });
        }
        let expected = self.params.herald_rate() * self.duration * f64::from(self.replicas);
        if expected < 1000.0 {
            flags.push(Flag::LowStatistics { expected_heralds: expected });
        }
        Ok(flags)
    }
}

/// Tallies of the HBT bench over an acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawCounts {
    pub heralds: u64,
    pub singles: u64,
    pub coincidences: u64,
    pub gates_opened: u64,
    pub gates_with_detection: u64,
    /// Acquisition time (s).
    pub duration: f64,
    /// Fingerprint of the parameters that produced the counts, if simulated.
    pub params_digest: Option<u64>,
}

impl RawCounts {
    /// Counts measured without a gate-level breakdown, e.g. published rates.
    pub fn observed(heralds: u64, singles: u64, coincidences: u64, duration: f64) -> Self {
        RawCounts {
            heralds,
            singles,
            coincidences,
            gates_opened: heralds,
            gates_with_detection: singles.min(heralds),
            duration,
            params_digest: None,
        }
    }

    pub fn herald_rate(&self) -> f64 {
        self.heralds as f64 / self.duration
    }

    pub fn singles_rate(&self) -> f64 {
        self.singles as f64 / self.duration
    }

    pub fn coincidence_rate(&self) -> f64 {
        self.coincidences as f64 / self.duration
    }

    pub fn to_record(&self, rec: &mut Record) {
        let s = rec.section("counts");
        s.push("heralds", self.heralds.to_string());
        s.push("singles", self.singles.to_string());
        s.push("coincidences", self.coincidences.to_string());
        s.push("gates_opened", self.gates_opened.to_string());
        s.push("gates_with_detection", self.gates_with_detection.to_string());
        s.push("duration", fmt_f64(self.duration));
        if let Some(d) = self.params_digest {
            s.push("params_digest", format!("{d:016x}"));
        }
    }

    /// Reads the `[counts]` section, or the unnamed leading section if absent.
    pub fn from_record(rec: &Record) -> Result<Self> {
        let s = rec
            .get("counts")
            .or_else(|| rec.get(""))
            .ok_or_else(|| Error::Parse { line: 0, message: "no [counts] section".into() })?;
        let heralds = s.u64("heralds")?;
        let mut counts = RawCounts {
            heralds,
            singles: s.u64("singles")?,
            coincidences: s.u64("coincidences")?,
            gates_opened: s.opt_u64("gates_opened")?.unwrap_or(heralds),
            gates_with_detection: 0,
            duration: s.f64("duration")?,
            params_digest: match s.value("params_digest") {
                Some(v) => Some(u64::from_str_radix(v, 16).map_err(|e| s.error("params_digest", e))?),
                None => None,
            },
        };
        counts.gates_with_detection = s
            .opt_u64("gates_with_detection")?
            .unwrap_or(counts.singles.min(counts.gates_opened));
        counts.check()?;
        Ok(counts)
    }

    /// Structural invariants of a tally.
    pub fn check(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::domain("counts duration must be > 0"));
        }
        if self.coincidences > self.singles {
            return Err(Error::domain("more coincidences than singles"));
        }
        if self.singles > 2 * self.gates_opened {
            return Err(Error::domain("more singles than two per gate"));
        }
        Ok(())
    }
}

/// Ground-truth photon numbers per gate at the source output.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrueWindowStats {
    /// `histogram[k]`: gates holding exactly `k` surviving idlers.
    pub histogram: Vec<u64>,
    /// Same, counting only idlers other than the gate's own heralded one.
    pub accidental_histogram: Vec<u64>,
    /// Gates opened by a signal photon rather than a trigger dark count.
    pub heralded_gates: u64,
    /// Surviving idlers routed to detector A, summed over gates.
    pub branch_a: u64,
    /// Surviving idlers routed to detector B, summed over gates.
    pub branch_b: u64,
}

impl TrueWindowStats {
    pub fn gates(&self) -> u64 {
        self.histogram.iter().sum()
    }

    /// Total surviving idlers summed over gates.
    pub fn surviving_photons(&self) -> u64 {
        self.histogram.iter().enumerate().map(|(k, &c)| k as u64 * c).sum()
    }

    /// Fraction of gates without any unheralded surviving idler.
    pub fn empty_accidental_fraction(&self) -> Result<f64> {
        let gates = self.gates();
        if gates == 0 {
            return Err(Error::domain("no gates"));
        }
        Ok(self.accidental_histogram.first().copied().unwrap_or(0) as f64 / gates as f64)
    }

    pub fn merge(&mut self, other: &TrueWindowStats) {
        add_histogram(&mut self.histogram, &other.histogram);
        add_histogram(&mut self.accidental_histogram, &other.accidental_histogram);
        self.heralded_gates += other.heralded_gates;
        self.branch_a += other.branch_a;
        self.branch_b += other.branch_b;
    }

    pub fn to_record(&self, rec: &mut Record) {
        let join = |h: &[u64]| h.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let s = rec.section("truth");
        s.push("histogram", join(&self.histogram));
        s.push("accidental_histogram", join(&self.accidental_histogram));
        s.push("heralded_gates", self.heralded_gates.to_string());
        s.push("branch_a", self.branch_a.to_string());
        s.push("branch_b", self.branch_b.to_string());
    }

    pub fn from_record(rec: &Record) -> Result<Self> {
        let s = rec
            .get("truth")
            .ok_or_else(|| Error::Parse { line: 0, message: "no [truth] section".into() })?;
        Ok(TrueWindowStats {
            histogram: s.u64_list("histogram")?,
            accidental_histogram: s.u64_list("accidental_histogram")?,
            heralded_gates: s.u64("heralded_gates")?,
            branch_a: s.u64("branch_a")?,
            branch_b: s.u64("branch_b")?,
        })
    }
}

fn add_histogram(into: &mut Vec<u64>, from: &[u64]) {
    if into.len() < from.len() {
        into.resize(from.len(), 0);
    }
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

/// Normalized photon-number fractions of the opened gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowDistribution {
    pub p0: f64,
    pub p1: f64,
    pub p2plus: f64,
}

pub fn true_window_distribution(stats: &TrueWindowStats) -> Result<WindowDistribution> {
    let gates = stats.gates();
    if gates == 0 {
        return Err(Error::domain("no gates were opened"));
    }
    let n0 = stats.histogram.first().copied().unwrap_or(0);
    let n1 = stats.histogram.get(1).copied().unwrap_or(0);
    let total = gates as f64;
    Ok(WindowDistribution {
        p0: n0 as f64 / total,
        p1: n1 as f64 / total,
        p2plus: (gates - n0 - n1) as f64 / total,
    })
}

/// Output of a (possibly multi-replica) run.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub counts: RawCounts,
    pub truth: TrueWindowStats,
    pub flags: Vec<Flag>,
}

impl Simulation {
    pub fn to_record(&self, rec: &mut Record) {
        self.counts.to_record(rec);
        self.truth.to_record(rec);
    }
}

/// Runs every replica and returns their results in replica order.
pub fn simulate_replicas(config: &SimConfig) -> Result<Vec<(RawCounts, TrueWindowStats)>> {
    config.validate()?;
    let digest = params_digest(&config.params);
    let runs = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, u64::from(r));
            let (mut counts, truth) = engine::run(config, &mut rng);
            counts.params_digest = Some(digest);
            (counts, truth)
        })
        .collect();
    Ok(runs)
}

/// Runs all replicas and merges them into one tally.
pub fn simulate(config: &SimConfig) -> Result<Simulation> {
    let flags = config.validate()?;
    let runs = simulate_replicas(config)?;
    let counts: Vec<RawCounts> = runs.iter().map(|(c, _)| *c).collect();
    let mut truth = TrueWindowStats::default();
    for (_, t) in &runs {
        truth.merge(t);
    }
    Ok(Simulation {
        counts: merge_replicas(&counts)?,
        truth,
        flags,
    })
}

/// Field-wise sum of replica tallies taken with the same parameters and duration.
pub fn merge_replicas(counts: &[RawCounts]) -> Result<RawCounts> {
    let (first, rest) = counts
        .split_first()
        .ok_or_else(|| Error::Merge("no replicas to merge".into()))?;
    let mut merged = *first;
    for c in rest {
        if c.params_digest != first.params_digest {
            return Err(Error::Merge("replicas were produced with different parameters".into()));
        }
        if (c.duration - first.duration).abs() > 1e-12 * first.duration.abs() {
            return Err(Error::Merge(format!(
                "replica durations differ ({} s vs {} s)",
                c.duration, first.duration
            )));
        }
        merged.heralds += c.heralds;
        merged.singles += c.singles;
        merged.coincidences += c.coincidences;
        merged.gates_opened += c.gates_opened;
        merged.gates_with_detection += c.gates_with_detection;
        merged.duration += c.duration;
    }
    Ok(merged)
}

/// FNV-1a over the bit patterns of every parameter.
pub fn params_digest(p: &SourceParams) -> u64 {
    let fields = [
        p.mu,
        p.delta_t,
        p.gamma,
        p.gamma_prep.unwrap_or(-1.0),
        p.idler_loss_db,
        p.eta_trigger,
        p.trigger_transmission,
        p.dark_rate_trigger,
        p.eta_idler,
        p.dark_rate_idler,
        p.splitter_t,
        p.coherence_time,
    ];
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in fields {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
