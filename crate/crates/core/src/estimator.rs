//! Inversion of HBT bench counts to source figures of merit.
//!
//! Per opened gate, each idler detector fires with probability
//! `q = singles / (2 heralds)`. Idler dark counts are removed first: with
//! `p_d = dark_rate_idler * delta_t` the photon-only firing probability is
//! `p_det = (q - p_d) / (1 - p_d)`, the dark singles are
//! `2 p_d (1 - p_det)` per gate and the accidental coincidences
//! `2 p_d p_det + p_d^2` per gate.
//!
//! From the corrected counts `S` and `C` over `H` heralds:
//!
//! ```text
//! m  = S / (eta H)                        mean photon number
//! P2 = C / (kappa H)                      kappa = 2 T (1 - T) eta^2 by default
//! P1 = m - (2 - eta (T^2 + (1-T)^2)) P2   multi-photon correction
//! g2 = 2 P2 / m^2
//! ```
//!
//! The correction term removes the singles that two-photon gates add to `m`.
//! With it disabled `P1 = m` and `g2 = 2 P2 / P1^2`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::FiguresOfMerit;
use crate::domain::{Flag, SourceParams};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::simulator::RawCounts;
use crate::stats::{mean_std, truncated_normal};

/// Idler-arm properties needed to invert counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub eta_idler: f64,
    pub splitter_t: f64,
    pub dark_rate_idler: f64,
    pub delta_t: f64,
    /// Two-photon coincidence efficiency; `None` uses `2 T (1 - T) eta^2`.
    pub correction_kappa: Option<f64>,
    pub multiphoton_correction: bool,
}

impl BenchParams {
    pub fn from_source(p: &SourceParams) -> Self {
        BenchParams {
            eta_idler: p.eta_idler,
            splitter_t: p.splitter_t,
            dark_rate_idler: p.dark_rate_idler,
            delta_t: p.delta_t,
            correction_kappa: None,
            multiphoton_correction: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_idler > 0.0 && self.eta_idler <= 1.0) {
            return Err(Error::domain(format!("eta_idler must lie in (0, 1], got {}", self.eta_idler)));
        }
        if !(0.0..=1.0).contains(&self.splitter_t) {
            return Err(Error::domain(format!("splitter_t must lie in [0, 1], got {}", self.splitter_t)));
        }
        if !(self.dark_rate_idler.is_finite() && self.dark_rate_idler >= 0.0) {
            return Err(Error::domain("dark_rate_idler must be >= 0"));
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::domain("delta_t must be > 0"));
        }
        if let Some(k) = self.correction_kappa {
            if !(k > 0.0 && k <= 1.0) {
                return Err(Error::domain(format!("correction_kappa must lie in (0, 1], got {k}")));
            }
        }
        if self.kappa() <= 0.0 {
            return Err(Error::domain(
                "a one-sided splitter never records coincidences; set correction_kappa",
            ));
        }
        Ok(())
    }

    pub fn default_kappa(&self) -> f64 {
        2.0 * self.splitter_t * (1.0 - self.splitter_t) * self.eta_idler * self.eta_idler
    }

    pub fn kappa(&self) -> f64 {
        self.correction_kappa.unwrap_or_else(|| self.default_kappa())
    }

    fn p_dark(&self) -> f64 {
        (self.dark_rate_idler * self.delta_t).min(1.0)
    }

    /// Expected detector firings per gate per two-photon gate, over `eta`.
    fn two_photon_singles_weight(&self) -> f64 {
        let t = self.splitter_t;
        2.0 - self.eta_idler * (t * t + (1.0 - t) * (1.0 - t))
    }
}

/// Photon-only firing probability of one detector per gate.
fn photon_firing_probability(heralds: f64, singles: f64, p_d: f64) -> f64 {
    if p_d >= 1.0 {
        return 0.0;
    }
    let q = singles / (2.0 * heralds);
    ((q - p_d) / (1.0 - p_d)).max(0.0)
}

pub fn estimate(counts: &RawCounts, bench: &BenchParams) -> Result<FiguresOfMerit> {
    bench.validate()?;
    if counts.heralds == 0 {
        return Err(Error::domain("no heralds: nothing to normalize by"));
    }
    estimate_from(
        counts.heralds as f64,
        counts.singles as f64,
        counts.coincidences as f64,
        bench,
    )
}

fn estimate_from(h: f64, s: f64, c: f64, bench: &BenchParams) -> Result<FiguresOfMerit> {
    let eta = bench.eta_idler;
    let p_d = bench.p_dark();
    let p_det = photon_firing_probability(h, s, p_d);
    let mut flags = Vec::new();

    let dark_singles = h * 2.0 * p_d * (1.0 - p_det);
    let dark_coincidences = h * (2.0 * p_d * p_det + p_d * p_d);
    let s_c = corrected(s, dark_singles, &mut flags);
    let c_c = corrected(c, dark_coincidences, &mut flags);

    let m = s_c / (eta * h);
    let p2 = c_c / (bench.kappa() * h);
    if c_c == 0.0 && c > 0.0 {
        flags.push(Flag::ClampedP2);
    }
    let mut p1 = if bench.multiphoton_correction {
        m - bench.two_photon_singles_weight() * p2
    } else {
        m
    };
    if p1 < 0.0 {
        p1 = 0.0;
        flags.push(Flag::ClampedP1);
    }
    let g2 = if m > 0.0 {
        2.0 * p2 / (m * m)
    } else {
        flags.push(Flag::G2Undefined);
        0.0
    };
    let mut fom = FiguresOfMerit::new(p1, p2, g2);
    fom.flags = flags;
    Ok(fom)
}

/// `observed - expected_dark`, clamped at zero.
fn corrected(observed: f64, expected_dark: f64, flags: &mut Vec<Flag>) -> f64 {
    let v = observed - expected_dark;
    if v >= 0.0 {
        return v;
    }
    if v < -3.0 * expected_dark.max(1.0).sqrt() && !flags.contains(&Flag::NoiseModelInconsistent) {
        flags.push(Flag::NoiseModelInconsistent);
    }
    0.0
}

/// Expected rate of coincidences involving at least one idler dark count (1/s).
pub fn accidental_coincidence_rate(counts: &RawCounts, bench: &BenchParams) -> Result<f64> {
    bench.validate()?;
    if counts.heralds == 0 {
        return Ok(0.0);
    }
    let h = counts.heralds as f64;
    let p_d = bench.p_dark();
    let p_det = photon_firing_probability(h, counts.singles as f64, p_d);
    Ok(counts.herald_rate() * (2.0 * p_d * p_det + p_d * p_d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub seed: u64,
    /// Relative one-sigma uncertainty of `eta_idler`; zero keeps counting
    /// statistics only.
    pub eta_rel_sigma: f64,
}

impl BootstrapOptions {
    pub fn new(n_resamples: usize, seed: u64) -> Self {
        BootstrapOptions { n_resamples, seed, eta_rel_sigma: 0.0 }
    }
}

const BOOTSTRAP_CHUNK: usize = 256;

/// Point estimate with bootstrap standard deviations.
///
/// Heralds, singles and coincidences are redrawn independently from Poisson
/// distributions at their observed values. Output depends only on the seed.
/// Without coincidences the P2 and g2 sigmas are those of a single count and
/// the result carries [`Flag::P2OneSided`].
pub fn bootstrap_errors(
    counts: &RawCounts,
    bench: &BenchParams,
    opts: &BootstrapOptions,
) -> Result<FiguresOfMerit> {
    if opts.n_resamples < 100 {
        return Err(Error::domain(format!("need at least 100 resamples, got {}", opts.n_resamples)));
    }
    if !(opts.eta_rel_sigma.is_finite() && opts.eta_rel_sigma >= 0.0) {
        return Err(Error::domain("eta_rel_sigma must be >= 0"));
    }
    let point = estimate(counts, bench)?;
    let one_sided = counts.coincidences == 0;
    let c_draw = if one_sided { 1.0 } else { counts.coincidences as f64 };
    let draw = |rng: &mut StreamRng| -> Result<[f64; 3]> {
        let mut b = *bench;
        b.eta_idler =
            truncated_normal(rng, bench.eta_idler, opts.eta_rel_sigma * bench.eta_idler, 1e-12, 1.0)?;
        let h = loop {
            let h = poisson(rng, counts.heralds as f64);
            if h > 0.0 {
                break h;
            }
        };
        let s = poisson(rng, counts.singles as f64);
        let c = poisson(rng, c_draw);
        let f = estimate_from(h, s, c, &b)?;
        Ok([f.p1, f.p2, f.g2])
    };

    let chunks = opts.n_resamples.div_ceil(BOOTSTRAP_CHUNK);
    let draws: Vec<Vec<[f64; 3]>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(opts.seed, k as u64);
            let len = BOOTSTRAP_CHUNK.min(opts.n_resamples - k * BOOTSTRAP_CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<[f64; 3]> = draws.into_iter().flatten().collect();
    let sd = |i: usize| mean_std(&flat.iter().map(|d| d[i]).collect::<Vec<_>>()).1;

    let mut fom = point.clone().with_sigmas(sd(0), sd(1), sd(2));
    if one_sided {
        fom.flags.push(Flag::P2OneSided);
    }
    Ok(fom)
}

fn poisson(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_scenario, measured};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn bench() -> BenchParams {
        BenchParams::from_source(&make_scenario("paper-experimental").unwrap().params)
    }

    fn raw(b: BenchParams) -> BenchParams {
        BenchParams { multiphoton_correction: false, ..b }
    }

    fn measured_counts() -> RawCounts {
        RawCounts::observed(measured::HERALDS, measured::DETECTIONS, measured::COINCIDENCES, 1.0)
    }

    #[test]
    fn measured_raw_arithmetic() {
        let f = estimate(&measured_counts(), &raw(bench())).unwrap();
        assert_abs_diff_eq!(f.p1, 4702.0 / (0.1 * 124302.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.p2, 8.0 / (0.005 * 124302.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.p1, 0.378, epsilon = 5e-4);
        assert_abs_diff_eq!(f.p2, 0.0129, epsilon = 5e-5);
        assert_eq!(f.g2, 2.0 * f.p2 / (f.p1 * f.p1));
    }

    #[test]
    fn measured_with_multiphoton_correction() {
        let f = estimate(&measured_counts(), &bench()).unwrap();
        let m = 4702.0 / (0.1 * 124302.0);
        let p2 = 8.0 / (0.005 * 124302.0);
        assert_abs_diff_eq!(f.p2, p2, epsilon = 1e-12);
        assert_abs_diff_eq!(f.p1, m - (2.0 - 0.1 * 0.5) * p2, epsilon = 1e-12);
        assert_abs_diff_eq!(f.g2, 2.0 * p2 / (m * m), epsilon = 1e-12);
    }

    #[test]
    fn calibrated_kappa_reaches_published_p2() {
        let b = BenchParams { correction_kappa: Some(0.0129), ..bench() };
        let f = estimate(&measured_counts(), &b).unwrap();
        assert_abs_diff_eq!(f.p2, 0.005, epsilon = 1e-4);
    }

    #[test]
    fn saturated_ideal_source() {
        let counts = RawCounts::observed(100_000, 10_000, 0, 1.0);
        let f = estimate(&counts, &raw(bench())).unwrap();
        assert_eq!((f.p1, f.p2, f.g2), (1.0, 0.0, 0.0));
    }

    #[test]
    fn no_heralds_rejected() {
        assert!(estimate(&RawCounts::observed(0, 0, 0, 1.0), &bench()).is_err());
        let b = BenchParams { correction_kappa: Some(0.0), ..bench() };
        assert!(estimate(&measured_counts(), &b).is_err());
    }

    #[test]
    fn kappa_override_scales_p2() {
        let b = bench();
        let base = estimate(&measured_counts(), &b).unwrap();
        for c in [0.5, 2.0, 3.7] {
            let k = BenchParams { correction_kappa: Some(c * b.default_kappa()), ..b };
            let f = estimate(&measured_counts(), &k).unwrap();
            assert_relative_eq!(f.p2, base.p2 / c, max_relative = 1e-14);
        }
    }

    #[test]
    fn scale_invariance() {
        let c = measured_counts();
        let base = estimate(&c, &bench()).unwrap();
        let scaled = RawCounts::observed(c.heralds * 8, c.singles * 8, c.coincidences * 8, 8.0);
        assert_eq!(estimate(&scaled, &bench()).unwrap(), base);
    }

    #[test]
    fn dark_counts_are_removed() {
        let mut b = bench();
        b.dark_rate_idler = 1e4;
        let h = 1_000_000u64;
        // Dark-only bench at p_d = 3e-5: 60 expected singles.
        let counts = RawCounts::observed(h, 60, 0, 1.0);
        let f = estimate(&counts, &b).unwrap();
        assert!(f.p1 < 1e-12);
        assert!(!f.flags.contains(&Flag::NoiseModelInconsistent));

        let overshoot = RawCounts::observed(h, 0, 0, 1.0);
        let f = estimate(&overshoot, &b).unwrap();
        assert!(f.flags.contains(&Flag::NoiseModelInconsistent));
        assert!(f.flags.contains(&Flag::G2Undefined));
    }

    #[test]
    fn accidental_rate_examples() {
        let mut b = bench();
        assert_eq!(accidental_coincidence_rate(&measured_counts(), &b).unwrap(), 0.0);
        b.dark_rate_idler = 1e4;
        let p_d = 3e-5;
        let q: f64 = 4702.0 / (2.0 * 124302.0);
        let p_det = (q - p_d) / (1.0 - p_d);
        let oracle = 124302.0 * (2.0 * p_d * p_det + p_d * p_d);
        let r = accidental_coincidence_rate(&measured_counts(), &b).unwrap();
        assert_abs_diff_eq!(r, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.14, epsilon = 0.005);

        let silent = RawCounts::observed(124302, 0, 0, 1.0);
        let floor = accidental_coincidence_rate(&silent, &b).unwrap();
        assert_abs_diff_eq!(floor, 124302.0 * p_d * p_d, epsilon = 1e-15);
    }

    #[test]
    fn bootstrap_measured_counting_only() {
        let opts = BootstrapOptions::new(4000, 11);
        let f = bootstrap_errors(&measured_counts(), &raw(bench()), &opts).unwrap();
        let p1 = 4702.0 / (0.1 * 124302.0);
        let oracle = p1 * (1.0 / 4702.0 + 1.0 / 124302.0f64).sqrt();
        assert_relative_eq!(f.sigma_p1.unwrap(), oracle, max_relative = 0.05);
        assert_abs_diff_eq!(f.sigma_p1.unwrap(), 0.006, epsilon = 0.001);
        assert_abs_diff_eq!(f.sigma_p2.unwrap() / f.p2, 0.35, epsilon = 0.03);
    }

    #[test]
    fn bootstrap_with_eta_systematic() {
        let opts = BootstrapOptions { eta_rel_sigma: 0.05, ..BootstrapOptions::new(4000, 11) };
        let f = bootstrap_errors(&measured_counts(), &raw(bench()), &opts).unwrap();
        assert_abs_diff_eq!(f.sigma_p1.unwrap(), 0.02, epsilon = 0.002);
    }

    #[test]
    fn bootstrap_asymptotics_and_guards() {
        let huge = RawCounts::observed(1_000_000_000_000, 80_000_000_000, 1_000_000_000, 1.0);
        let f = bootstrap_errors(&huge, &bench(), &BootstrapOptions::new(200, 1)).unwrap();
        assert!(f.sigma_p1.unwrap() < 1e-4 * f.p1);
        assert!(f.sigma_p2.unwrap() < 1e-4 * f.p2);

        assert!(bootstrap_errors(&measured_counts(), &bench(), &BootstrapOptions::new(99, 1)).is_err());

        let none = RawCounts::observed(124302, 4702, 0, 1.0);
        let f = bootstrap_errors(&none, &bench(), &BootstrapOptions::new(500, 1)).unwrap();
        assert!(f.flags.contains(&Flag::P2OneSided));
        assert!(f.sigma_p2.unwrap() > 0.0);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let opts = BootstrapOptions::new(600, 5);
        let a = bootstrap_errors(&measured_counts(), &bench(), &opts).unwrap();
        let b = bootstrap_errors(&measured_counts(), &bench(), &opts).unwrap();
        assert_eq!(a, b);
    }
}
