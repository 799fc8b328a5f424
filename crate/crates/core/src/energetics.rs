//! Empirical propeller model: thrust vs. power, efficiency vs. speed, and
//! the propulsion power needed to hold a given speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("propulsion power must be nonnegative, got {0} W")]
    NegativePower(f64),
    #[error("speed {speed} m/s outside [0, {v_max}] m/s")]
    SpeedOutOfRange { speed: f64, v_max: f64 },
    #[error("no positive power root for speed {0} m/s")]
    NoPositiveRoot(f64),
}

pub type Result<T> = std::result::Result<T, EnergyError>;

/// Speed limit of the empirical efficiency fit.
pub const MAX_MODEL_SPEED: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub hover_power_w: f64,
    pub dt: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { hover_power_w: 5.0, dt: 1.0 }
    }
}

/// Thrust (N) delivered at propulsion power `p_w`.
pub fn thrust_from_power(p_w: f64) -> Result<f64> {
    if !(p_w >= 0.0) {
        return Err(EnergyError::NegativePower(p_w));
    }
    Ok(-0.0021 * p_w * p_w + 0.6342 * p_w + 2.8372)
}

/// Propeller efficiency at sailing speed `v`.
pub fn efficiency_from_speed(v: f64) -> Result<f64> {
    if !(0.0..=MAX_MODEL_SPEED).contains(&v) {
        return Err(EnergyError::SpeedOutOfRange { speed: v, v_max: MAX_MODEL_SPEED });
    }
    Ok(-0.081 * v * v * v + 0.215 * v * v - 0.01 * v + 0.541)
}

/// Propulsion power (W) that satisfies `F_T(P) * v / P = eta(v)`.
///
/// Solved as the positive root of `g(P) = F_T(P) - eta(v) * P / v`. With
/// `g(0) > 0` and `g` concave, the positive root is unique; it is bracketed
/// by doubling and refined with Newton steps guarded by bisection.
pub fn power_from_speed(v: f64) -> Result<f64> {
    if !(v > 0.0 && v <= MAX_MODEL_SPEED) {
        return Err(EnergyError::SpeedOutOfRange { speed: v, v_max: MAX_MODEL_SPEED });
    }
    let slope = efficiency_from_speed(v)? / v;
    let g = |p: f64| -0.0021 * p * p + (0.6342 - slope) * p + 2.8372;
    let dg = |p: f64| -0.0042 * p + (0.6342 - slope);

    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(EnergyError::NoPositiveRoot(v));
        }
    }
    let mut p = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gp = g(p);
        if gp.abs() < 1e-14 || (hi - lo) < 1e-15 * hi {
            break;
        }
        if gp > 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let d = dg(p);
        let newton = p - gp / d;
        p = if d != 0.0 && newton >= lo && newton <= hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(p)
}

/// Energy (J) spent over one step at commanded speed `v`.
pub fn step_energy(v: f64, hovering: bool, cfg: &EnergyConfig) -> Result<f64> {
    if !(0.0..=MAX_MODEL_SPEED).contains(&v) {
        return Err(EnergyError::SpeedOutOfRange { speed: v, v_max: MAX_MODEL_SPEED });
    }
    if hovering || v == 0.0 {
        Ok(cfg.hover_power_w * cfg.dt)
    } else {
        Ok(power_from_speed(v)? * cfg.dt)
    }
}
