//! Closed-form figures of merit of a heralded single-photon source.
//!
//! With `x = mu * delta_t` (mean pairs per gate) and heralding fidelity
//! `f = (N_T - D_c) / N_T`, the first-order model is
//!
//! ```text
//! P2 = gamma^2 * x * f
//! P1 = gamma * ( f * (1 - 2 gamma x) + x )
//! g2 = 2 x f / ( x + (1 - 2 gamma x) f )^2
//! ```
//!
//! valid for `x << 1`. Parameters with `x` above [`MU_DT_WARN`] are flagged and
//! rejected from [`MU_DT_MAX`] on.
//!
//! [`MU_DT_WARN`]: crate::domain::MU_DT_WARN
//! [`MU_DT_MAX`]: crate::domain::MU_DT_MAX

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{db_to_transmission, Flag, SourceParams, MU_DT_MAX};
use crate::error::{Error, Result};
use crate::record::{fmt_f64, Record};
use crate::rng;
use crate::stats::{mean_std, truncated_normal};

/// P1, P2 and g2(0) of a source, optionally with one-sigma uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiguresOfMerit {
    pub p1: f64,
    pub p2: f64,
    pub g2: f64,
    pub sigma_p1: Option<f64>,
    pub sigma_p2: Option<f64>,
    pub sigma_g2: Option<f64>,
    #[serde(default)]
    pub flags: Vec<Flag>,
}

impl FiguresOfMerit {
    pub fn new(p1: f64, p2: f64, g2: f64) -> Self {
        FiguresOfMerit {
            p1,
            p2,
            g2,
            sigma_p1: None,
            sigma_p2: None,
            sigma_g2: None,
            flags: Vec::new(),
        }
    }

    pub fn with_sigmas(mut self, p1: f64, p2: f64, g2: f64) -> Self {
        self.sigma_p1 = Some(p1);
        self.sigma_p2 = Some(p2);
        self.sigma_g2 = Some(g2);
        self
    }

    /// Writes a `[name]` section with the figures, present sigmas and flags.
    pub fn to_record(&self, rec: &mut Record, name: &str) {
        let s = rec.section(name);
        s.push("p1", fmt_f64(self.p1));
        s.push("p2", fmt_f64(self.p2));
        s.push("g2", fmt_f64(self.g2));
        for (key, v) in [
            ("sigma_p1", self.sigma_p1),
            ("sigma_p2", self.sigma_p2),
            ("sigma_g2", self.sigma_g2),
        ] {
            if let Some(v) = v {
                s.push(key, fmt_f64(v));
            }
        }
        if !self.flags.is_empty() {
            let flags: Vec<String> = self.flags.iter().map(Flag::to_string).collect();
            s.push("flags", flags.join(" "));
        }
    }

    /// Reads the figures and sigmas written by [`FiguresOfMerit::to_record`].
    /// Flags are informational and not read back.
    pub fn from_record(rec: &Record, name: &str) -> Result<Self> {
        let s = rec
            .get(name)
            .ok_or_else(|| Error::Parse { line: 0, message: format!("no [{name}] section") })?;
        let mut fom = FiguresOfMerit::new(s.f64("p1")?, s.f64("p2")?, s.f64("g2")?);
        fom.sigma_p1 = s.opt_f64("sigma_p1")?;
        fom.sigma_p2 = s.opt_f64("sigma_p2")?;
        fom.sigma_g2 = s.opt_f64("sigma_g2")?;
        Ok(fom)
    }
}

/// Herald rate, trigger dark rate and the fraction of genuine heralds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldStats {
    pub n_t: f64,
    pub dark_rate: f64,
    pub fidelity: f64,
}

impl HeraldStats {
    pub fn new(n_t: f64, dark_rate: f64) -> Result<Self> {
        Ok(HeraldStats {
            n_t,
            dark_rate,
            fidelity: heralding_fidelity(n_t, dark_rate)?,
        })
    }
}

/// `(n_t - dark_rate) / n_t`.
pub fn heralding_fidelity(n_t: f64, dark_rate: f64) -> Result<f64> {
    if !(n_t > 0.0 && dark_rate >= 0.0 && dark_rate <= n_t) {
        return Err(Error::domain(format!(
            "need n_t > 0 and 0 <= dark_rate <= n_t, got n_t={n_t}, dark_rate={dark_rate}"
        )));
    }
    Ok((n_t - dark_rate) / n_t)
}

/// Fidelity of the parameter set's trigger. A noiseless trigger is perfectly
/// faithful even when it never fires.
fn fidelity_of(p: &SourceParams) -> Result<f64> {
    if p.dark_rate_trigger == 0.0 {
        Ok(1.0)
    } else {
        heralding_fidelity(p.herald_rate(), p.dark_rate_trigger)
    }
}

/// Validated inputs shared by the figure formulas.
struct Terms {
    gamma: f64,
    mu_dt: f64,
    fidelity: f64,
}

impl Terms {
    fn of(p: &SourceParams) -> Result<(Self, Vec<Flag>)> {
        let flags = p.validate()?;
        let terms = Terms {
            gamma: p.gamma,
            mu_dt: p.mu_delta_t(),
            fidelity: fidelity_of(p)?,
        };
        Ok((terms, flags))
    }

    fn p2(&self) -> f64 {
        self.gamma * self.gamma * self.mu_dt * self.fidelity
    }

    fn p1(&self) -> f64 {
        let x = self.mu_dt;
        self.gamma * (self.fidelity * (1.0 - 2.0 * self.gamma * x) + x)
    }

    fn g2(&self) -> Result<f64> {
        let x = self.mu_dt;
        let f = self.fidelity;
        let denom = x + (1.0 - 2.0 * self.gamma * x) * f;
        if denom <= 0.0 {
            return Err(Error::domain("g2 undefined: no pairs and no genuine heralds"));
        }
        Ok(2.0 * x * f / (denom * denom))
    }
}

/// Idler detection rate of one HBT detector pair, `gamma * eta * (N_T - D_c)`.
pub fn single_detection_rate(p: &SourceParams) -> Result<f64> {
    p.validate()?;
    Ok(p.gamma * p.eta_idler * (p.herald_rate() - p.dark_rate_trigger))
}

/// Probability that a gate catches no unheralded photon, `exp(-gamma mu dt)`.
pub fn empty_window_probability(p: &SourceParams) -> Result<f64> {
    p.validate()?;
    Ok((-p.gamma * p.mu_delta_t()).exp())
}

/// Probability of two or more photons in an opened gate.
pub fn p2(p: &SourceParams) -> Result<f64> {
    Ok(Terms::of(p)?.0.p2())
}

/// Probability of exactly one photon in an opened gate.
pub fn p1(p: &SourceParams) -> Result<f64> {
    Ok(Terms::of(p)?.0.p1())
}

/// Second-order correlation at zero delay.
pub fn g2_zero(p: &SourceParams) -> Result<f64> {
    Terms::of(p)?.0.g2()
}

/// P1, P2 and g2 together, with any validity flags of `p` attached.
pub fn figures_of_merit(p: &SourceParams) -> Result<FiguresOfMerit> {
    let (t, flags) = Terms::of(p)?;
    let mut fom = FiguresOfMerit::new(t.p1(), t.p2(), t.g2()?);
    fom.flags = flags;
    Ok(fom)
}

/// A Poissonian source at equal P1: `P2 = P1^2 / 2`, `g2 = 1`.
pub fn poissonian_reference(p1: f64) -> Result<FiguresOfMerit> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::domain(format!("p1 must lie in [0, 1], got {p1}")));
    }
    Ok(FiguresOfMerit::new(p1, p1 * p1 / 2.0, 1.0))
}

/// Multi-photon suppression relative to a Poissonian source at equal P1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Suppression {
    Finite(f64),
    /// `g2 = 0`: no multi-photon events at all.
    Infinite,
}

impl Suppression {
    pub fn value(self) -> f64 {
        match self {
            Suppression::Finite(v) => v,
            Suppression::Infinite => f64::INFINITY,
        }
    }
}

/// `1 / g2`.
pub fn multiphoton_suppression(fom: &FiguresOfMerit) -> Result<Suppression> {
    if fom.g2.is_nan() || fom.g2 < 0.0 {
        return Err(Error::domain(format!("g2 must be >= 0, got {}", fom.g2)));
    }
    if fom.g2 == 0.0 {
        Ok(Suppression::Infinite)
    } else {
        Ok(Suppression::Finite(1.0 / fom.g2))
    }
}

/// Inverts the single-detection rate for the collection efficiency.
pub fn collection_efficiency_from_counts(
    singles: f64,
    eta_idler: f64,
    n_t: f64,
    dark_rate: f64,
) -> Result<f64> {
    if singles < 0.0 {
        return Err(Error::domain("singles must be >= 0"));
    }
    let denom = eta_idler * (n_t - dark_rate);
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::domain(format!(
            "eta_idler * (n_t - dark_rate) must be positive, got {denom}"
        )));
    }
    // Counts are integers: anything up to the next whole count above the
    // lossless expectation is the perfect-collection boundary.
    if singles > denom && singles <= denom.ceil() {
        return Ok(1.0);
    }
    let gamma = singles / denom;
    if gamma > 1.0 {
        return Err(Error::inconsistent(format!(
            "counts imply a collection efficiency of {gamma} > 1"
        )));
    }
    Ok(gamma)
}

/// Divides the component loss out of the collection efficiency.
pub fn preparation_efficiency(gamma: f64, loss_db: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let prep = gamma / db_to_transmission(loss_db)?;
    if prep > 1.0 {
        return Err(Error::inconsistent(format!(
            "gamma {gamma} with {loss_db} dB loss implies preparation efficiency {prep} > 1"
        )));
    }
    Ok(prep)
}

/// Pair rate that makes the P2 formula return `p2_target`.
pub fn fit_mu_from_p2(p2_target: f64, gamma: f64, delta_t: f64, fidelity: f64) -> Result<f64> {
    if p2_target < 0.0 {
        return Err(Error::domain("p2 target must be >= 0"));
    }
    if !(gamma > 0.0 && delta_t > 0.0 && fidelity > 0.0) {
        return Err(Error::domain("gamma, delta_t and fidelity must be positive"));
    }
    let mu = p2_target / (gamma * gamma * delta_t * fidelity);
    if mu * delta_t >= MU_DT_MAX {
        return Err(Error::domain(format!(
            "fitted mu*delta_t = {} is outside the validity domain",
            mu * delta_t
        )));
    }
    Ok(mu)
}

/// Relative one-sigma uncertainties of the source parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RelativeSigmas {
    pub mu: f64,
    pub delta_t: f64,
    pub gamma: f64,
    pub eta_trigger: f64,
    pub trigger_transmission: f64,
    pub dark_rate_trigger: f64,
}

impl RelativeSigmas {
    fn is_zero(&self) -> bool {
        [
            self.mu,
            self.delta_t,
            self.gamma,
            self.eta_trigger,
            self.trigger_transmission,
            self.dark_rate_trigger,
        ]
        .iter()
        .all(|&s| s == 0.0)
    }
}

const RESAMPLE_CHUNK: usize = 256;

/// Parametric bootstrap of the figures of merit.
///
/// Each parameter with a non-zero relative sigma is redrawn from a normal
/// distribution truncated to its physical range; draws that leave the model's
/// validity domain are rejected as a whole. Returns the resample means with
/// their standard deviations. Output depends only on `seed`.
pub fn propagate_uncertainty(
    p: &SourceParams,
    sigmas: &RelativeSigmas,
    n_resamples: usize,
    seed: u64,
) -> Result<FiguresOfMerit> {
    if n_resamples < 100 {
        return Err(Error::domain(format!("need at least 100 resamples, got {n_resamples}")));
    }
    let nominal = figures_of_merit(p)?;
    if sigmas.is_zero() {
        return Ok(nominal.with_sigmas(0.0, 0.0, 0.0));
    }
    for s in [
        sigmas.mu,
        sigmas.delta_t,
        sigmas.gamma,
        sigmas.eta_trigger,
        sigmas.trigger_transmission,
        sigmas.dark_rate_trigger,
    ] {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::domain(format!("relative sigma must be >= 0, got {s}")));
        }
    }

    let chunks = n_resamples.div_ceil(RESAMPLE_CHUNK);
    let draws: Vec<Vec<[f64; 3]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c as u64);
            let len = RESAMPLE_CHUNK.min(n_resamples - c * RESAMPLE_CHUNK);
            (0..len)
                .map(|_| resample_figures(p, sigmas, &mut rng))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let flat: Vec<[f64; 3]> = draws.into_iter().flatten().collect();
    let column = |i: usize| mean_std(&flat.iter().map(|d| d[i]).collect::<Vec<_>>());
    let (p1, s1) = column(0);
    let (p2, s2) = column(1);
    let (g2, sg) = column(2);
    let mut fom = FiguresOfMerit::new(p1, p2, g2).with_sigmas(s1, s2, sg);
    fom.flags = nominal.flags;
    Ok(fom)
}

fn resample_figures(
    p: &SourceParams,
    s: &RelativeSigmas,
    rng: &mut rng::StreamRng,
) -> Result<[f64; 3]> {
    const MAX_ATTEMPTS: usize = 1000;
    for _ in 0..MAX_ATTEMPTS {
        let mut q = *p;
        q.gamma_prep = None;
        q.mu = truncated_normal(rng, p.mu, s.mu * p.mu, 0.0, f64::INFINITY)?;
        q.delta_t = truncated_normal(rng, p.delta_t, s.delta_t * p.delta_t, f64::MIN_POSITIVE, f64::INFINITY)?;
        q.gamma = truncated_normal(rng, p.gamma, s.gamma * p.gamma, 0.0, 1.0)?;
        q.eta_trigger = truncated_normal(rng, p.eta_trigger, s.eta_trigger * p.eta_trigger, 0.0, 1.0)?;
        q.trigger_transmission = truncated_normal(
            rng,
            p.trigger_transmission,
            s.trigger_transmission * p.trigger_transmission,
            0.0,
            1.0,
        )?;
        q.dark_rate_trigger = truncated_normal(
            rng,
            p.dark_rate_trigger,
            s.dark_rate_trigger * p.dark_rate_trigger,
            0.0,
            f64::INFINITY,
        )?;
        if let Ok(fom) = figures_of_merit(&q) {
            return Ok([fom.p1, fom.p2, fom.g2]);
        }
    }
    Err(Error::domain(
        "parameter uncertainties push almost every resample outside the validity domain",
    ))
}
