//! C interface to `hsps-core`.
//!
//! Every function returns an [`HspsStatus`]. On failure the message is kept
//! per thread and can be copied out with [`hsps_last_error`]. Configurations
//! are opaque [`HspsConfig`] handles released with [`hsps_config_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hsps_core::analytic::{self, RelativeSigmas};
use hsps_core::config::Config;
use hsps_core::domain::make_scenario;
use hsps_core::estimator::{bootstrap_errors, estimate};
use hsps_core::simulator::{self, true_window_distribution, RawCounts};
use hsps_core::{Error, FiguresOfMerit, Flag};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HspsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Inconsistent = 4,
    UnknownScenario = 5,
    Config = 6,
    Parse = 7,
    Io = 8,
    Merge = 9,
    Panic = 10,
}

/// Parameters reachable through [`hsps_config_get`] and [`hsps_config_set`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HspsParam {
    Mu = 0,
    DeltaT = 1,
    Gamma = 2,
    IdlerLossDb = 3,
    EtaTrigger = 4,
    TriggerTransmission = 5,
    DarkRateTrigger = 6,
    EtaIdler = 7,
    DarkRateIdler = 8,
    SplitterT = 9,
    CoherenceTime = 10,
    EtaRelSigma = 11,
}

pub const HSPS_FLAG_APPROXIMATION_STRETCHED: u32 = 1 << 0;
pub const HSPS_FLAG_ROUNDED_EFFICIENCIES: u32 = 1 << 1;
pub const HSPS_FLAG_OVERLAPPING_GATES: u32 = 1 << 2;
pub const HSPS_FLAG_LOW_STATISTICS: u32 = 1 << 3;
pub const HSPS_FLAG_CLAMPED_P1: u32 = 1 << 4;
pub const HSPS_FLAG_CLAMPED_P2: u32 = 1 << 5;
pub const HSPS_FLAG_NOISE_MODEL_INCONSISTENT: u32 = 1 << 6;
pub const HSPS_FLAG_P2_ONE_SIDED: u32 = 1 << 7;
pub const HSPS_FLAG_G2_UNDEFINED: u32 = 1 << 8;

/// Figures of merit. Absent uncertainties are NaN; `flags` is a bitmask of
/// `HSPS_FLAG_*` values.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HspsFigures {
    pub p1: f64,
    pub p2: f64,
    pub g2: f64,
    pub sigma_p1: f64,
    pub sigma_p2: f64,
    pub sigma_g2: f64,
    pub flags: u32,
}

/// Raw detector counts of one acquisition.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HspsRawCounts {
    pub heralds: u64,
    pub singles: u64,
    pub coincidences: u64,
    pub gates_opened: u64,
    pub gates_with_detection: u64,
    /// Acquisition time (s).
    pub duration: f64,
}

/// Photon-number distribution in heralded gates.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HspsWindowDistribution {
    pub p0: f64,
    pub p1: f64,
    pub p2plus: f64,
}

/// Relative one-sigma uncertainties of the source parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HspsRelativeSigmas {
    pub mu: f64,
    pub delta_t: f64,
    pub gamma: f64,
    pub eta_trigger: f64,
    pub trigger_transmission: f64,
    pub dark_rate_trigger: f64,
}

/// Opaque configuration handle.
pub struct HspsConfig {
    inner: Config,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HspsStatus {
    match e {
        Error::Domain(_) => HspsStatus::Domain,
        Error::Inconsistent(_) => HspsStatus::Inconsistent,
        Error::UnknownScenario { .. } => HspsStatus::UnknownScenario,
        Error::Config(_) => HspsStatus::Config,
        Error::Merge(_) => HspsStatus::Merge,
        Error::Parse { .. } => HspsStatus::Parse,
        Error::Io(_) => HspsStatus::Io,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HspsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            HspsStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            HspsStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(msg);
            HspsStatus::InvalidArgument
        }
        Err(_) => {
            set_last_error("internal panic".into());
            HspsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

unsafe fn string<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::Invalid(format!("{name} is not valid UTF-8")))
}

fn flag_bits(flags: &[Flag]) -> u32 {
    flags.iter().fold(0, |acc, f| {
        acc | match f {
            Flag::ApproximationStretched { .. } => HSPS_FLAG_APPROXIMATION_STRETCHED,
            Flag::RoundedEfficiencies { .. } => HSPS_FLAG_ROUNDED_EFFICIENCIES,
            Flag::OverlappingGates { .. } => HSPS_FLAG_OVERLAPPING_GATES,
            Flag::LowStatistics { .. } => HSPS_FLAG_LOW_STATISTICS,
            Flag::ClampedP1 => HSPS_FLAG_CLAMPED_P1,
            Flag::ClampedP2 => HSPS_FLAG_CLAMPED_P2,
            Flag::NoiseModelInconsistent => HSPS_FLAG_NOISE_MODEL_INCONSISTENT,
            Flag::P2OneSided => HSPS_FLAG_P2_ONE_SIDED,
            Flag::G2Undefined => HSPS_FLAG_G2_UNDEFINED,
        }
    })
}

impl From<&FiguresOfMerit> for HspsFigures {
    fn from(f: &FiguresOfMerit) -> Self {
        HspsFigures {
            p1: f.p1,
            p2: f.p2,
            g2: f.g2,
            sigma_p1: f.sigma_p1.unwrap_or(f64::NAN),
            sigma_p2: f.sigma_p2.unwrap_or(f64::NAN),
            sigma_g2: f.sigma_g2.unwrap_or(f64::NAN),
            flags: flag_bits(&f.flags),
        }
    }
}

impl From<&RawCounts> for HspsRawCounts {
    fn from(c: &RawCounts) -> Self {
        HspsRawCounts {
            heralds: c.heralds,
            singles: c.singles,
            coincidences: c.coincidences,
            gates_opened: c.gates_opened,
            gates_with_detection: c.gates_with_detection,
            duration: c.duration,
        }
    }
}

impl From<&HspsRawCounts> for RawCounts {
    fn from(c: &HspsRawCounts) -> Self {
        RawCounts {
            heralds: c.heralds,
            singles: c.singles,
            coincidences: c.coincidences,
            gates_opened: c.gates_opened,
            gates_with_detection: c.gates_with_detection,
            duration: c.duration,
            params_digest: None,
        }
    }
}

fn store(out: *mut *mut HspsConfig, config: Config) -> Result<(), Failure> {
    let slot = unsafe { deref_mut(out, "out") }?;
    *slot = Box::into_raw(Box::new(HspsConfig { inner: config }));
    Ok(())
}

/// Creates a configuration from a catalog scenario name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_config_from_scenario(name: *const c_char, out: *mut *mut HspsConfig) -> HspsStatus {
    guard(|| {
        let name = unsafe { string(name, "name") }?;
        store(out, Config::from_scenario(&make_scenario(name)?))
    })
}

/// Creates a configuration from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_config_from_toml(text: *const c_char, out: *mut *mut HspsConfig) -> HspsStatus {
    guard(|| {
        let text = unsafe { string(text, "text") }?;
        store(out, Config::parse(text)?)
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hsps_config_free(config: *mut HspsConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Reads one parameter.
///
/// # Safety
/// `config` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_config_get(config: *const HspsConfig, param: HspsParam, value: *mut f64) -> HspsStatus {
    guard(|| {
        let c = &unsafe { deref(config, "config") }?.inner;
        let p = &c.params;
        let v = match param {
            HspsParam::Mu => p.mu,
            HspsParam::DeltaT => p.delta_t,
            HspsParam::Gamma => p.gamma,
            HspsParam::IdlerLossDb => p.idler_loss_db,
            HspsParam::EtaTrigger => p.eta_trigger,
            HspsParam::TriggerTransmission => p.trigger_transmission,
            HspsParam::DarkRateTrigger => p.dark_rate_trigger,
            HspsParam::EtaIdler => p.eta_idler,
            HspsParam::DarkRateIdler => p.dark_rate_idler,
            HspsParam::SplitterT => p.splitter_t,
            HspsParam::CoherenceTime => p.coherence_time,
            HspsParam::EtaRelSigma => c.eta_rel_sigma,
        };
        *unsafe { deref_mut(value, "value") }? = v;
        Ok(())
    })
}

/// Sets one parameter. The new set is validated; on error the handle is
/// left unchanged. Setting `Gamma` drops any stored preparation efficiency.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsps_config_set(config: *mut HspsConfig, param: HspsParam, value: f64) -> HspsStatus {
    guard(|| {
        let c = &mut unsafe { deref_mut(config, "config") }?.inner;
        if !value.is_finite() {
            return Err(Failure::Invalid(format!("value must be finite, got {value}")));
        }
        let mut next = c.clone();
        let p = &mut next.params;
        match param {
            HspsParam::Mu => p.mu = value,
            HspsParam::DeltaT => {
                p.delta_t = value;
                next.bench.delta_t = value;
            }
            HspsParam::Gamma => {
                p.gamma = value;
                p.gamma_prep = None;
            }
            HspsParam::IdlerLossDb => p.idler_loss_db = value,
            HspsParam::EtaTrigger => p.eta_trigger = value,
            HspsParam::TriggerTransmission => p.trigger_transmission = value,
            HspsParam::DarkRateTrigger => p.dark_rate_trigger = value,
            HspsParam::EtaIdler => {
                p.eta_idler = value;
                next.bench.eta_idler = value;
            }
            HspsParam::DarkRateIdler => {
                p.dark_rate_idler = value;
                next.bench.dark_rate_idler = value;
            }
            HspsParam::SplitterT => {
                p.splitter_t = value;
                next.bench.splitter_t = value;
            }
            HspsParam::CoherenceTime => p.coherence_time = value,
            HspsParam::EtaRelSigma => {
                if !(0.0..1.0).contains(&value) {
                    return Err(Failure::Invalid(format!("eta_rel_sigma must lie in [0, 1), got {value}")));
                }
                next.eta_rel_sigma = value;
            }
        }
        next.params.validate()?;
        next.bench.validate()?;
        *c = next;
        Ok(())
    })
}

/// Closed-form figures of merit.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_figures_of_merit(config: *const HspsConfig, out: *mut HspsFigures) -> HspsStatus {
    guard(|| {
        let c = &unsafe { deref(config, "config") }?.inner;
        let f = analytic::figures_of_merit(&c.params)?;
        *unsafe { deref_mut(out, "out") }? = HspsFigures::from(&f);
        Ok(())
    })
}

/// Closed-form figures with bootstrap uncertainties from relative parameter
/// uncertainties.
///
/// # Safety
/// `config` and `sigmas` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_propagate_uncertainty(
    config: *const HspsConfig,
    sigmas: *const HspsRelativeSigmas,
    n_resamples: usize,
    seed: u64,
    out: *mut HspsFigures,
) -> HspsStatus {
    guard(|| {
        let c = &unsafe { deref(config, "config") }?.inner;
        let s = unsafe { deref(sigmas, "sigmas") }?;
        let rel = RelativeSigmas {
            mu: s.mu,
            delta_t: s.delta_t,
            gamma: s.gamma,
            eta_trigger: s.eta_trigger,
            trigger_transmission: s.trigger_transmission,
            dark_rate_trigger: s.dark_rate_trigger,
        };
        let f = analytic::propagate_uncertainty(&c.params, &rel, n_resamples, seed)?;
        *unsafe { deref_mut(out, "out") }? = HspsFigures::from(&f);
        Ok(())
    })
}

/// Runs the Monte Carlo bench with the configuration's engine and dead time.
/// `window` may be null.
///
/// # Safety
/// `config` must be a live handle; `counts` and a non-null `window` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_simulate(
    config: *const HspsConfig,
    duration: f64,
    seed: u64,
    replicas: u32,
    counts: *mut HspsRawCounts,
    window: *mut HspsWindowDistribution,
) -> HspsStatus {
    guard(|| {
        let c = &unsafe { deref(config, "config") }?.inner;
        let counts = unsafe { deref_mut(counts, "counts") }?;
        let mut sim = c.sim_config();
        sim.duration = duration;
        sim.seed = seed;
        sim.replicas = replicas;
        let run = simulator::simulate(&sim)?;
        if let Some(w) = unsafe { window.as_mut() } {
            let d = true_window_distribution(&run.truth)?;
            *w = HspsWindowDistribution { p0: d.p0, p1: d.p1, p2plus: d.p2plus };
        }
        *counts = HspsRawCounts::from(&run.counts);
        Ok(())
    })
}

/// Point estimate of the figures of merit from raw counts.
///
/// # Safety
/// `config` and `counts` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_estimate(
    config: *const HspsConfig,
    counts: *const HspsRawCounts,
    out: *mut HspsFigures,
) -> HspsStatus {
    guard(|| {
        let c = &unsafe { deref(config, "config") }?.inner;
        let counts = RawCounts::from(unsafe { deref(counts, "counts") }?);
        counts.check()?;
        let f = estimate(&counts, &c.bench)?;
        *unsafe { deref_mut(out, "out") }? = HspsFigures::from(&f);
        Ok(())
    })
}

/// Estimate with parametric-bootstrap uncertainties.
///
/// # Safety
/// `config` and `counts` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsps_bootstrap(
    config: *const HspsConfig,
    counts: *const HspsRawCounts,
    n_resamples: usize,
    seed: u64,
    out: *mut HspsFigures,
) -> HspsStatus {
    guard(|| {
        let c = &unsafe { deref(config, "config") }?.inner;
        let counts = RawCounts::from(unsafe { deref(counts, "counts") }?);
        counts.check()?;
        let f = bootstrap_errors(&counts, &c.bench, &c.bootstrap_options(n_resamples, seed))?;
        *unsafe { deref_mut(out, "out") }? = HspsFigures::from(&f);
        Ok(())
    })
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes. Returns the buffer size the full message needs.
///
/// # Safety
/// `buf` must be writable for `len` bytes, or null with `len` zero.
#[no_mangle]
pub unsafe extern "C" fn hsps_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hsps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
