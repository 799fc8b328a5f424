//! Underwater acoustic channel: Thorp absorption, spreading loss, ambient
//! noise, the active sonar equation and a Shannon-capacity link model.
//!
//! Frequencies are in kHz and every logarithm is base 10.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcousticError {
    #[error("frequency must be positive, got {0} kHz")]
    NonPositiveFrequency(f64),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("shipping activity must lie in (0, 1), got {0}")]
    ShippingActivityOutOfRange(f64),
    #[error("wind speed must be nonnegative, got {0} m/s")]
    NegativeWindSpeed(f64),
    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),
    #[error("echo excess is {0:.3} dB at 1 m; no detection range exists")]
    NoDetection(f64),
}

pub type Result<T> = std::result::Result<T, AcousticError>;

/// Sonar link budget and environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticConfig {
    pub center_frequency_khz: f64,
    pub source_level_db: f64,
    pub target_strength_db: f64,
    pub directivity_index_db: f64,
    pub detection_threshold_db: f64,
    pub shipping_activity: f64,
    pub wind_speed_mps: f64,
    pub bandwidth_hz: f64,
    /// Upper clamp on link capacity (bits/s).
    pub max_capacity_bps: f64,
}

impl Default for AcousticConfig {
    fn default() -> Self {
        Self {
            center_frequency_khz: 20.0,
            source_level_db: 135.0,
            target_strength_db: 10.0,
            directivity_index_db: 10.0,
            detection_threshold_db: 10.0,
            shipping_activity: 0.5,
            wind_speed_mps: 3.0,
            bandwidth_hz: 10_000.0,
            max_capacity_bps: 1.0e6,
        }
    }
}

impl AcousticConfig {
    pub fn validate(&self) -> Result<()> {
        check_frequency(self.center_frequency_khz)?;
        if !(self.shipping_activity > 0.0 && self.shipping_activity < 1.0) {
            return Err(AcousticError::ShippingActivityOutOfRange(self.shipping_activity));
        }
        if !(self.wind_speed_mps >= 0.0) {
            return Err(AcousticError::NegativeWindSpeed(self.wind_speed_mps));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(AcousticError::NonPositiveBandwidth(self.bandwidth_hz));
        }
        Ok(())
    }
}

/// Ambient noise power spectral density by source, in dB re 1 µPa²/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBreakdown {
    pub turbulence_db: f64,
    pub shipping_db: f64,
    pub wind_db: f64,
    pub thermal_db: f64,
    pub total_db: f64,
}

impl NoiseBreakdown {
    pub fn components(&self) -> [f64; 4] {
        [self.turbulence_db, self.shipping_db, self.wind_db, self.thermal_db]
    }
}

fn check_frequency(f_khz: f64) -> Result<()> {
    if f_khz > 0.0 && f_khz.is_finite() {
        Ok(())
    } else {
        Err(AcousticError::NonPositiveFrequency(f_khz))
    }
}

fn check_distance(d_m: f64) -> Result<()> {
    if d_m > 0.0 && d_m.is_finite() {
        Ok(())
    } else {
        Err(AcousticError::NonPositiveDistance(d_m))
    }
}

pub(crate) fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub(crate) fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Thorp absorption coefficient in dB/km.
pub fn thorp_absorption(f_khz: f64) -> Result<f64> {
    check_frequency(f_khz)?;
    let f2 = f_khz * f_khz;
    Ok(0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003)
}

/// Spherical spreading plus absorption, in dB.
pub fn transmission_loss(d_m: f64, f_khz: f64) -> Result<f64> {
    check_distance(d_m)?;
    let kappa = thorp_absorption(f_khz)?;
    Ok(20.0 * d_m.log10() + d_m * kappa / 1000.0)
}

/// Noise PSD at `f_khz` for shipping activity `s` and wind speed `w` (m/s).
///
/// The shipping term keeps the printed `log(f^26 / (f + 0.03)^60)` form,
/// evaluated in log space so large exponents cannot overflow.
pub fn noise_psd(f_khz: f64, s: f64, w: f64) -> Result<NoiseBreakdown> {
    check_frequency(f_khz)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(AcousticError::ShippingActivityOutOfRange(s));
    }
    if !(w >= 0.0) {
        return Err(AcousticError::NegativeWindSpeed(w));
    }
    let lf = f_khz.log10();
    let turbulence_db = 17.0 - 30.0 * lf;
    let shipping_db = 30.0 + 20.0 * s + (26.0 * lf - 60.0 * (f_khz + 0.03).log10());
    let wind_db = 50.0 + 7.5 * w.sqrt() + 20.0 * (lf - 2.0 * (f_khz + 0.4).log10());
    let thermal_db = -15.0 + 20.0 * lf;
    let total: f64 = [turbulence_db, shipping_db, wind_db, thermal_db]
        .iter()
        .map(|&db| db_to_power(db))
        .sum();
    Ok(NoiseBreakdown {
        turbulence_db,
        shipping_db,
        wind_db,
        thermal_db,
        total_db: power_to_db(total),
    })
}

/// Band noise level: PSD at the center frequency spread flat over the band.
pub fn noise_level(cfg: &AcousticConfig) -> Result<f64> {
    cfg.validate()?;
    let psd = noise_psd(cfg.center_frequency_khz, cfg.shipping_activity, cfg.wind_speed_mps)?;
    Ok(psd.total_db + 10.0 * cfg.bandwidth_hz.log10())
}

/// `SL + TS + DI - NL - DT`, the part of the sonar equation that does not
/// depend on range.
pub fn sonar_budget(cfg: &AcousticConfig) -> Result<f64> {
    let nl = noise_level(cfg)?;
    Ok(cfg.source_level_db + cfg.target_strength_db + cfg.directivity_index_db
        - nl
        - cfg.detection_threshold_db)
}

pub fn echo_excess_from_budget(budget_db: f64, d_m: f64, f_khz: f64) -> Result<f64> {
    Ok(budget_db - 2.0 * transmission_loss(d_m, f_khz)?)
}

/// Active sonar echo excess at range `d_m`.
pub fn echo_excess(d_m: f64, cfg: &AcousticConfig) -> Result<f64> {
    echo_excess_from_budget(sonar_budget(cfg)?, d_m, cfg.center_frequency_khz)
}

const RANGE_TOLERANCE_M: f64 = 0.01;

/// Range at which the echo excess crosses zero for a given budget.
///
/// Echo excess is strictly decreasing in range, so the root is bracketed by
/// doubling an upper bound from 1 m and then bisected.
pub fn detection_range_from_budget(budget_db: f64, f_khz: f64) -> Result<f64> {
    let at_one = echo_excess_from_budget(budget_db, 1.0, f_khz)?;
    if at_one <= 0.0 {
        return Err(AcousticError::NoDetection(at_one));
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while echo_excess_from_budget(budget_db, hi, f_khz)? > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > RANGE_TOLERANCE_M {
        let mid = 0.5 * (lo + hi);
        if echo_excess_from_budget(budget_db, mid, f_khz)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn detection_range(cfg: &AcousticConfig) -> Result<f64> {
    detection_range_from_budget(sonar_budget(cfg)?, cfg.center_frequency_khz)
}

/// Signal-to-noise ratio (dB) of a one-way link over `d_m`.
pub fn link_snr_db(d_m: f64, cfg: &AcousticConfig) -> Result<f64> {
    let tl = transmission_loss(d_m, cfg.center_frequency_khz)?;
    Ok(cfg.source_level_db - tl - noise_level(cfg)?)
}

pub fn capacity_from_snr_db(snr_db: f64, bandwidth_hz: f64, max_capacity_bps: f64) -> f64 {
    let c = bandwidth_hz * (1.0 + db_to_power(snr_db)).log2();
    c.clamp(0.0, max_capacity_bps)
}

/// Shannon capacity (bits/s) of the one-way link over `d_m`.
pub fn channel_capacity(d_m: f64, cfg: &AcousticConfig) -> Result<f64> {
    let snr = link_snr_db(d_m, cfg)?;
    Ok(capacity_from_snr_db(snr, cfg.bandwidth_hz, cfg.max_capacity_bps))
}
