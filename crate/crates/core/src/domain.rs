//! Physical parameters of the heralded-source bench, unit conversions and the
//! built-in scenario catalog.
//!
//! Rates are in events per second, durations in seconds, efficiencies are
//! plain fractions. Decibels appear only in `idler_loss_db`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytic::FiguresOfMerit;
use crate::error::{Error, Result};

/// Above this mean pair number per window the first-order model is flagged.
pub const MU_DT_WARN: f64 = 0.1;
/// At or above this mean pair number per window parameters are rejected.
pub const MU_DT_MAX: f64 = 0.5;
/// Tolerance for `gamma = gamma_prep * 10^(-loss/10)`.
pub const EFFICIENCY_TOLERANCE: f64 = 1e-9;
/// Mismatch absorbed as rounding of published two-digit efficiencies.
pub const EFFICIENCY_ROUNDING_TOLERANCE: f64 = 0.01;

/// Advisory annotations attached to results. None of these abort a computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Flag {
    /// `mu * delta_t` above [`MU_DT_WARN`]; the first-order formulas degrade.
    ApproximationStretched { mu_delta_t: f64 },
    /// `gamma` and `gamma_prep` agree only to quoted-value rounding.
    RoundedEfficiencies { mismatch: f64 },
    /// Herald rate times gate width above 0.1.
    OverlappingGates { herald_rate_delta_t: f64 },
    /// Fewer than 1000 expected heralds in the run.
    LowStatistics { expected_heralds: f64 },
    /// A dark-corrected P1 came out negative and was set to zero.
    ClampedP1,
    /// A dark-corrected P2 came out negative and was set to zero.
    ClampedP2,
    /// Dark-count subtraction overshot the observed counts by more than 3 sigma.
    NoiseModelInconsistent,
    /// No coincidences observed; the P2 uncertainty is an upper bound.
    P2OneSided,
    /// No photon detections; g2 has no estimate.
    G2Undefined,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::ApproximationStretched { mu_delta_t } => {
                write!(f, "approximation-stretched(mu_delta_t={mu_delta_t:.4})")
            }
            Flag::RoundedEfficiencies { mismatch } => {
                write!(f, "rounded-efficiencies(mismatch={mismatch:.2e})")
            }
            Flag::OverlappingGates { herald_rate_delta_t } => {
                write!(f, "overlapping-gates(rate_delta_t={herald_rate_delta_t:.4})")
            }
            Flag::LowStatistics { expected_heralds } => {
                write!(f, "low-statistics(expected_heralds={expected_heralds:.0})")
            }
            Flag::ClampedP1 => f.write_str("clamped-p1"),
            Flag::ClampedP2 => f.write_str("clamped-p2"),
            Flag::NoiseModelInconsistent => f.write_str("noise-model-inconsistent"),
            Flag::P2OneSided => f.write_str("p2-one-sided"),
            Flag::G2Undefined => f.write_str("g2-undefined"),
        }
    }
}

/// Complete parameter set of the source and its measurement bench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Pair rate in the collected fiber mode (1/s).
    pub mu: f64,
    /// Gate width (s).
    pub delta_t: f64,
    /// Overall idler collection efficiency.
    pub gamma: f64,
    /// Preparation efficiency, i.e. `gamma` with the idler component loss divided out.
    pub gamma_prep: Option<f64>,
    /// Idler-arm fiber component loss (dB).
    pub idler_loss_db: f64,
    /// Trigger detector quantum efficiency.
    pub eta_trigger: f64,
    /// Optical transmission of the trigger arm.
    pub trigger_transmission: f64,
    /// Trigger dark-count rate (1/s).
    pub dark_rate_trigger: f64,
    /// Quantum efficiency of each idler detector.
    pub eta_idler: f64,
    /// Dark-count rate of each idler detector (1/s).
    pub dark_rate_idler: f64,
    /// Beam-splitter transmission towards detector A.
    pub splitter_t: f64,
    /// Single-photon coherence time (s).
    pub coherence_time: f64,
}

impl SourceParams {
    /// Raw herald rate `N_T`: trigger dark counts plus detected signal photons.
    pub fn herald_rate(&self) -> f64 {
        self.dark_rate_trigger + self.pair_herald_rate()
    }

    /// Rate of heralds caused by a detected signal photon.
    pub fn pair_herald_rate(&self) -> f64 {
        self.mu * self.herald_probability()
    }

    /// Probability that a pair's signal photon produces a herald.
    pub fn herald_probability(&self) -> f64 {
        self.eta_trigger * self.trigger_transmission
    }

    /// Mean number of pairs emitted in one gate window.
    pub fn mu_delta_t(&self) -> f64 {
        self.mu * self.delta_t
    }

    /// Checks every parameter invariant and returns advisory flags for the
    /// soft limits.
    pub fn validate(&self) -> Result<Vec<Flag>> {
        let fractions = [
            ("gamma", self.gamma),
            ("eta_trigger", self.eta_trigger),
            ("trigger_transmission", self.trigger_transmission),
            ("eta_idler", self.eta_idler),
            ("splitter_t", self.splitter_t),
        ];
        for (name, v) in fractions {
            check_fraction(name, v)?;
        }
        if let Some(g) = self.gamma_prep {
            check_fraction("gamma_prep", g)?;
        }
        let non_negative = [
            ("mu", self.mu),
            ("dark_rate_trigger", self.dark_rate_trigger),
            ("dark_rate_idler", self.dark_rate_idler),
            ("idler_loss_db", self.idler_loss_db),
            ("coherence_time", self.coherence_time),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::domain(format!("delta_t must be > 0, got {}", self.delta_t)));
        }
        if self.coherence_time > self.delta_t / 100.0 {
            return Err(Error::domain(format!(
                "coherence_time {} s exceeds delta_t/100; window photon numbers are not Poissonian",
                self.coherence_time
            )));
        }

        let mut flags = Vec::new();
        let mu_dt = self.mu_delta_t();
        if mu_dt >= MU_DT_MAX {
            return Err(Error::domain(format!(
                "mu*delta_t = {mu_dt} is outside the model's validity domain (< {MU_DT_MAX})"
            )));
        }
        if mu_dt > MU_DT_WARN {
            flags.push(Flag::ApproximationStretched { mu_delta_t: mu_dt });
        }
        if let Some(prep) = self.gamma_prep {
            let expected = prep * db_to_transmission(self.idler_loss_db)?;
            let mismatch = (self.gamma - expected).abs();
            if mismatch > EFFICIENCY_ROUNDING_TOLERANCE {
                return Err(Error::inconsistent(format!(
                    "gamma {} disagrees with gamma_prep {} after {} dB loss ({expected})",
                    self.gamma, prep, self.idler_loss_db
                )));
            }
            if mismatch > EFFICIENCY_TOLERANCE {
                flags.push(Flag::RoundedEfficiencies { mismatch });
            }
        }
        Ok(flags)
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Converts a loss in decibels to a power transmission.
pub fn db_to_transmission(loss_db: f64) -> Result<f64> {
    if !(loss_db.is_finite() && loss_db >= 0.0) {
        return Err(Error::domain(format!("loss must be >= 0 dB, got {loss_db}")));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Collection efficiency from the preparation efficiency and the component loss.
pub fn collection_from_preparation(gamma_prep: f64, loss_db: f64) -> Result<f64> {
    check_fraction("gamma_prep", gamma_prep)?;
    Ok(gamma_prep * db_to_transmission(loss_db)?)
}

/// Recovers the trigger-arm transmission from the observed herald rate.
///
/// `(n_t - dark) / (eta_trigger * mu)`; fails if the result exceeds one.
pub fn derive_trigger_transmission(
    n_t: f64,
    dark_rate_trigger: f64,
    eta_trigger: f64,
    mu: f64,
) -> Result<f64> {
    if !(n_t > dark_rate_trigger && dark_rate_trigger >= 0.0) {
        return Err(Error::domain(format!(
            "herald rate {n_t} must exceed the trigger dark rate {dark_rate_trigger}"
        )));
    }
    if !(eta_trigger > 0.0 && mu > 0.0) {
        return Err(Error::domain("eta_trigger and mu must be positive"));
    }
    let t = (n_t - dark_rate_trigger) / (eta_trigger * mu);
    if t > 1.0 {
        return Err(Error::inconsistent(format!(
            "trigger transmission {t} > 1: herald rate too high for mu and eta_trigger"
        )));
    }
    Ok(t)
}

/// Figures quoted in a published table, with optional symmetric error bars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Published {
    pub p1: f64,
    pub p2: f64,
    pub g2: f64,
    pub sigma_p1: Option<f64>,
    pub sigma_p2: Option<f64>,
    pub sigma_g2: Option<f64>,
}

impl Published {
    pub fn to_figures(self) -> FiguresOfMerit {
        FiguresOfMerit {
            p1: self.p1,
            p2: self.p2,
            g2: self.g2,
            sigma_p1: self.sigma_p1,
            sigma_p2: self.sigma_p2,
            sigma_g2: self.sigma_g2,
            flags: Vec::new(),
        }
    }
}

/// Raw count rates of the heralded source, per second of acquisition.
pub mod measured {
    pub const HERALDS: u64 = 124_302;
    pub const DETECTIONS: u64 = 4_702;
    pub const COINCIDENCES: u64 = 8;
}

/// Measured figures of the heralded source (experimental column).
pub const EXPERIMENTAL: Published = Published {
    p1: 0.37,
    p2: 0.005,
    g2: 0.08,
    sigma_p1: Some(0.02),
    sigma_p2: Some(0.001),
    sigma_g2: Some(0.02),
};

/// Model figures at the experimental operating point.
pub const CALCULATED: Published = Published {
    p1: 0.38,
    p2: 0.003,
    g2: 0.05,
    sigma_p1: Some(0.02),
    sigma_p2: Some(0.001),
    sigma_g2: Some(0.02),
};

/// Projected figures with a pigtailed fiber and a silicon trigger detector.
pub const PREDICTED: Published = Published {
    p1: 0.54,
    p2: 7e-4,
    g2: 0.005,
    sigma_p1: None,
    sigma_p2: None,
    sigma_g2: None,
};

/// Published figures of another single-photon source technology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSps {
    pub name: &'static str,
    pub p1: f64,
    pub p2: f64,
    pub g2: f64,
}

pub const REFERENCE_SOURCES: [ReferenceSps; 4] = [
    ReferenceSps { name: "pdc-bulk", p1: 0.61, p2: 2e-4, g2: 0.002 },
    ReferenceSps { name: "molecule", p1: 0.047, p2: 5e-5, g2: 0.046 },
    ReferenceSps { name: "nv-center", p1: 0.022, p2: 2e-5, g2: 0.07 },
    ReferenceSps { name: "quantum-dot", p1: 0.083, p2: 4e-4, g2: 0.14 },
];

pub const PAPER_EXPERIMENTAL: &str = "paper-experimental";
pub const PAPER_PREDICTED: &str = "paper-predicted";
pub const FAINT_LASER: &str = "faint-laser-equivalent";
pub const CATALOG: [&str; 3] = [PAPER_EXPERIMENTAL, PAPER_PREDICTED, FAINT_LASER];

/// Pair rate of the experimental bench (1/s).
pub const EXPERIMENTAL_MU: f64 = 6.6e6;
/// Pair rate of the predicted bench, fitted to its P2 and frozen (1/s).
pub const PREDICTED_MU: f64 = 7.9e5;
/// Trigger dark-count rate of the Ge avalanche photodiode (1/s).
pub const GE_DARK_RATE: f64 = 2e4;
/// Idler component loss: filter, demultiplexer and fiber spool (dB).
pub const IDLER_LOSS_DB: f64 = 1.1;
/// Mean photon number of the default faint-laser comparator.
pub const FAINT_LASER_DEFAULT_P1: f64 = 0.37;

/// A named parameter set with the figures it is expected to reproduce.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: SourceParams,
    pub expected: Option<FiguresOfMerit>,
    pub note: String,
}

pub fn make_scenario(name: &str) -> Result<Scenario> {
    match name {
        PAPER_EXPERIMENTAL => Ok(paper_experimental()),
        PAPER_PREDICTED => Ok(paper_predicted()),
        FAINT_LASER => faint_laser_equivalent(FAINT_LASER_DEFAULT_P1),
        _ => Err(Error::UnknownScenario {
            name: name.to_string(),
            valid: CATALOG.join(", "),
        }),
    }
}

fn experimental_trigger_transmission() -> f64 {
    derive_trigger_transmission(measured::HERALDS as f64, GE_DARK_RATE, 0.06, EXPERIMENTAL_MU)
        .expect("published herald counts are self-consistent")
}

fn paper_experimental() -> Scenario {
    let params = SourceParams {
        mu: EXPERIMENTAL_MU,
        delta_t: 3e-9,
        gamma: 0.46,
        gamma_prep: Some(0.59),
        idler_loss_db: IDLER_LOSS_DB,
        eta_trigger: 0.06,
        trigger_transmission: experimental_trigger_transmission(),
        dark_rate_trigger: GE_DARK_RATE,
        eta_idler: 0.10,
        dark_rate_idler: 0.0,
        splitter_t: 0.5,
        coherence_time: 1e-12,
    };
    Scenario {
        name: PAPER_EXPERIMENTAL.into(),
        params,
        expected: Some(CALCULATED.to_figures()),
        note: "Ge trigger APD, butt-coupled fiber, 3 ns gates; gamma and gamma_prep are the \
               published rounded values"
            .into(),
    }
}

fn paper_predicted() -> Scenario {
    let gamma_prep = 0.7;
    let params = SourceParams {
        mu: PREDICTED_MU,
        delta_t: 3e-9,
        gamma: collection_from_preparation(gamma_prep, IDLER_LOSS_DB)
            .expect("constant preparation efficiency is a fraction"),
        gamma_prep: Some(gamma_prep),
        idler_loss_db: IDLER_LOSS_DB,
        eta_trigger: 0.6,
        trigger_transmission: experimental_trigger_transmission(),
        dark_rate_trigger: 0.0,
        eta_idler: 0.10,
        dark_rate_idler: 0.0,
        splitter_t: 0.5,
        coherence_time: 1e-12,
    };
    Scenario {
        name: PAPER_PREDICTED.into(),
        params,
        expected: Some(PREDICTED.to_figures()),
        note: "Si trigger APD, pigtailed fiber; mu fitted to the predicted P2 and frozen".into(),
    }
}

/// A Poissonian source with mean photon number `p1` per gate.
///
/// Gates are opened by an uncorrelated clock (modelled as trigger noise at
/// the experimental herald rate) so every window sees unheralded light only.
pub fn faint_laser_equivalent(p1: f64) -> Result<Scenario> {
    if !(p1 > 0.0 && p1 < MU_DT_MAX) {
        return Err(Error::domain(format!(
            "faint-laser mean photon number must lie in (0, {MU_DT_MAX}), got {p1}"
        )));
    }
    let delta_t = 3e-9;
    let params = SourceParams {
        mu: p1 / delta_t,
        delta_t,
        gamma: 1.0,
        gamma_prep: None,
        idler_loss_db: 0.0,
        eta_trigger: 0.0,
        trigger_transmission: 0.0,
        dark_rate_trigger: measured::HERALDS as f64,
        eta_idler: 0.10,
        dark_rate_idler: 0.0,
        splitter_t: 0.5,
        coherence_time: 1e-12,
    };
    Ok(Scenario {
        name: FAINT_LASER.into(),
        params,
        expected: Some(crate::analytic::poissonian_reference(p1)?),
        note: format!("Poissonian comparator with mean photon number {p1} per gate"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn db_examples() {
        assert_eq!(db_to_transmission(0.0).unwrap(), 1.0);
        // 10^(-0.11)
        assert_abs_diff_eq!(db_to_transmission(1.1).unwrap(), 0.776247, epsilon = 1e-6);
        assert_abs_diff_eq!(db_to_transmission(3.0103).unwrap(), 0.5, epsilon = 1e-5);
        assert!(matches!(db_to_transmission(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn collection_examples() {
        assert_eq!(collection_from_preparation(1.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            collection_from_preparation(0.59, 1.1).unwrap(),
            0.59 * 0.776247,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(collection_from_preparation(0.59, 1.1).unwrap(), 0.458, epsilon = 1e-3);
        assert_abs_diff_eq!(collection_from_preparation(0.7, 1.1).unwrap(), 0.543, epsilon = 1e-3);
        assert!(collection_from_preparation(1.2, 1.0).is_err());
        assert!(collection_from_preparation(0.5, -0.1).is_err());
    }

    #[test]
    fn trigger_transmission_examples() {
        let t = derive_trigger_transmission(124302.0, 20000.0, 0.06, 6.6e6).unwrap();
        assert_abs_diff_eq!(t, 104302.0 / (0.06 * 6.6e6), epsilon = 1e-12);
        assert_abs_diff_eq!(t, 0.2634, epsilon = 5e-4);

        let eta = 0.06;
        let mu = 6.6e6;
        let lossless = derive_trigger_transmission(20000.0 + eta * mu, 20000.0, eta, mu).unwrap();
        assert_abs_diff_eq!(lossless, 1.0, epsilon = 1e-12);

        assert!(matches!(
            derive_trigger_transmission(124302.0, 124302.0, 0.06, 6.6e6),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            derive_trigger_transmission(1e6, 0.0, 0.06, 6.6e6),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn experimental_scenario_matches_published_bench() {
        let s = make_scenario("paper-experimental").unwrap();
        let p = s.params;
        assert_eq!(p.mu, 6.6e6);
        assert_eq!(p.delta_t, 3e-9);
        assert_eq!(p.gamma, 0.46);
        assert_eq!(p.gamma_prep, Some(0.59));
        assert_eq!(p.eta_trigger, 0.06);
        assert_eq!(p.dark_rate_trigger, 2e4);
        assert_eq!(p.eta_idler, 0.10);
        assert_eq!(p.splitter_t, 0.5);
        assert_abs_diff_eq!(p.herald_rate(), 124302.0, epsilon = 1e-6);
        // Rounded published efficiencies: tolerated, but flagged.
        assert!((0.46 - 0.59 * db_to_transmission(1.1).unwrap()).abs() < 0.01);
        let flags = p.validate().unwrap();
        assert!(flags.iter().any(|f| matches!(f, Flag::RoundedEfficiencies { .. })));
    }

    #[test]
    fn predicted_scenario() {
        let s = make_scenario("paper-predicted").unwrap();
        let p = s.params;
        assert_eq!(p.mu, 7.9e5);
        assert_eq!(p.eta_trigger, 0.6);
        assert_eq!(p.dark_rate_trigger, 0.0);
        assert_abs_diff_eq!(p.gamma, 0.543, epsilon = 1e-3);
        assert!(p.validate().unwrap().is_empty());
    }

    #[test]
    fn faint_laser_is_unheralded() {
        let s = make_scenario("faint-laser-equivalent").unwrap();
        assert_eq!(s.params.pair_herald_rate(), 0.0);
        assert_abs_diff_eq!(s.params.mu_delta_t(), FAINT_LASER_DEFAULT_P1, epsilon = 1e-12);
        assert_eq!(s.expected.unwrap().g2, 1.0);
        assert!(faint_laser_equivalent(0.0).is_err());
    }

    #[test]
    fn unknown_scenario_lists_catalog() {
        match make_scenario("nonexistent") {
            Err(Error::UnknownScenario { valid, .. }) => {
                for name in CATALOG {
                    assert!(valid.contains(name));
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_guards() {
        let base = make_scenario("paper-experimental").unwrap().params;

        let mut p = base;
        p.mu = 0.51 / p.delta_t;
        assert!(p.validate().is_err());

        let mut p = base;
        p.gamma_prep = None;
        p.mu = 0.2 / p.delta_t;
        let flags = p.validate().unwrap();
        assert!(matches!(flags[0], Flag::ApproximationStretched { .. }));

        let mut p = base;
        p.coherence_time = p.delta_t / 50.0;
        assert!(p.validate().is_err());

        let mut p = base;
        p.gamma = 0.3;
        assert!(matches!(p.validate(), Err(Error::Inconsistent(_))));

        let mut p = base;
        p.delta_t = 0.0;
        assert!(p.validate().is_err());

        let mut p = base;
        p.eta_idler = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn reference_sources_are_stored_verbatim() {
        let qd = REFERENCE_SOURCES.iter().find(|r| r.name == "quantum-dot").unwrap();
        assert_eq!((qd.p1, qd.p2, qd.g2), (0.083, 4e-4, 0.14));
        let mut names: Vec<_> = REFERENCE_SOURCES.iter().map(|r| r.name).collect();
        names.dedup();
        assert_eq!(names.len(), 4);
    }
}
