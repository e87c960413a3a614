//! Drive and connector physics: winch torque across a folding edge, the
//! electromagnet holding torque it has to beat, and the cable/servo stroke
//! model with direction-reversal hysteresis.
//!
//! SI units throughout. Servo data sheets quote kg·cm; convert with
//! [`kgcm_to_nm`].

use core::f64::consts::PI;

use libm::{cos, sin};
use thiserror::Error;

pub const KGCM_IN_NM: f64 = 0.098_066_5;

pub fn kgcm_to_nm(kgcm: f64) -> f64 {
    kgcm * KGCM_IN_NM
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ActuationError {
    #[error("invalid actuation parameter: {0}")]
    InvalidParams(&'static str),
    #[error("magnet mount b = {b} m must lie inside the edge pair 2a = {two_a} m")]
    InvalidGeometry { b: f64, two_a: f64 },
    #[error("folding angle {0} rad outside (0, pi)")]
    AngleOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationParams {
    /// Servo output torque, N·m.
    pub t: f64,
    /// Output gear teeth.
    pub z1: u32,
    /// Input gear teeth.
    pub z2: u32,
    /// Winch radius, m.
    pub r: f64,
    /// Electromagnet holding force, N.
    pub fe: f64,
    /// Electromagnet mount position, m.
    pub b: f64,
    /// Friction torque, N·m.
    pub eps: f64,
    /// Encoder counts per revolution.
    pub encoder_resolution: u32,
    pub hysteresis_counts: u32,
}

impl Default for ActuationParams {
    fn default() -> Self {
        Self {
            t: kgcm_to_nm(4.5),
            z1: 12,
            z2: 24,
            r: 0.005,
            fe: 25.0,
            b: 0.070,
            eps: kgcm_to_nm(0.84),
            encoder_resolution: 4095,
            hysteresis_counts: 1500,
        }
    }
}

impl ActuationParams {
    pub fn validate(&self) -> Result<(), ActuationError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.t) {
            return Err(ActuationError::InvalidParams("servo torque must be positive"));
        }
        if self.z1 == 0 || self.z2 == 0 {
            return Err(ActuationError::InvalidParams("gear teeth must be positive"));
        }
        if !positive(self.r) {
            return Err(ActuationError::InvalidParams("winch radius must be positive"));
        }
        if !positive(self.fe) {
            return Err(ActuationError::InvalidParams("holding force must be positive"));
        }
        if !positive(self.b) {
            return Err(ActuationError::InvalidParams("magnet position must be positive"));
        }
        if !positive(self.eps) {
            return Err(ActuationError::InvalidParams("friction torque must be positive"));
        }
        if self.encoder_resolution == 0 {
            return Err(ActuationError::InvalidParams("encoder resolution must be positive"));
        }
        Ok(())
    }

    fn gear_ratio(&self) -> f64 {
        f64::from(self.z1) / f64::from(self.z2)
    }

    /// Encoder counts to servo shaft angle, degrees.
    pub fn counts_to_degrees(&self, counts: f64) -> f64 {
        counts / f64::from(self.encoder_resolution) * 360.0
    }

    /// Shaft angle offset produced by the hysteresis band, degrees.
    pub fn hysteresis_angle_deg(&self) -> f64 {
        self.counts_to_degrees(f64::from(self.hysteresis_counts))
    }
}

/// Torque the winch produces between the two edges meeting at the folding
/// corner, `M_d = T Z1 / (r Z2) * 2a sin(theta / 2)`.
pub fn actuation_torque(p: &ActuationParams, a: f64, theta: f64) -> f64 {
    p.t * p.gear_ratio() / p.r * 2.0 * a * sin(theta / 2.0)
}

/// Torque the mate's electromagnets and friction hold against,
/// `M_f = Fe (2a - b) + eps`.
pub fn resisting_torque(p: &ActuationParams, a: f64) -> Result<f64, ActuationError> {
    if p.b >= 2.0 * a {
        return Err(ActuationError::InvalidGeometry { b: p.b, two_a: 2.0 * a });
    }
    Ok(p.fe * (2.0 * a - p.b) + p.eps)
}

/// Whether a module can tear itself off a mate that keeps its magnets on.
pub fn can_disconnect_single_sided(
    p: &ActuationParams,
    a: f64,
    theta: f64,
) -> Result<bool, ActuationError> {
    if !(theta > 0.0 && theta < PI) {
        return Err(ActuationError::AngleOutOfRange(theta));
    }
    Ok(actuation_torque(p, a, theta) > resisting_torque(p, a)?)
}

/// Folding angle where drive torque equals resisting torque, found by
/// bisection on `(0, pi)`. `None` when the drive never wins.
pub fn disconnect_threshold(p: &ActuationParams, a: f64) -> Result<Option<f64>, ActuationError> {
    let mf = resisting_torque(p, a)?;
    let f = |th: f64| actuation_torque(p, a, th) - mf;
    let (mut lo, mut hi) = (0.0, PI);
    if f(lo) >= 0.0 || f(hi) <= 0.0 {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Cable length as a function of module side `a` and folding angle.
pub trait CableProfile {
    fn length(&self, a: f64, theta: f64) -> f64;
}

/// Cable stretched along the folding diagonal: `L0 + 4a cos(theta / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChordProfile {
    pub l0: f64,
}

impl CableProfile for ChordProfile {
    fn length(&self, a: f64, theta: f64) -> f64 {
        self.l0 + 4.0 * a * cos(theta / 2.0)
    }
}

impl<F: Fn(f64, f64) -> f64> CableProfile for F {
    fn length(&self, a: f64, theta: f64) -> f64 {
        self(a, theta)
    }
}

pub fn cable_length<P: CableProfile + ?Sized>(profile: &P, a: f64, theta: f64) -> f64 {
    profile.length(a, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Increasing folding angle.
    Forward,
    /// Decreasing folding angle.
    Reverse,
}

/// Encoder counts for one stroke, split so the hysteresis part stays exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeCounts {
    /// Counts from cable travel alone.
    pub travel: f64,
    /// Extra counts taken up by the backlash band on a reversal.
    pub hysteresis: u32,
}

impl StrokeCounts {
    pub fn total(&self) -> f64 {
        self.travel + f64::from(self.hysteresis)
    }
}

/// Servo stroke bookkeeping. Remembers the last direction so the backlash
/// band is paid once per reversal.
#[derive(Debug, Clone)]
pub struct StrokeModel<P: CableProfile = ChordProfile> {
    params: ActuationParams,
    a: f64,
    profile: P,
    last: Option<Direction>,
}

impl StrokeModel<ChordProfile> {
    pub fn new(params: ActuationParams, a: f64) -> Self {
        Self::with_profile(params, a, ChordProfile::default())
    }
}

impl<P: CableProfile> StrokeModel<P> {
    pub fn with_profile(params: ActuationParams, a: f64, profile: P) -> Self {
        Self {
            params,
            a,
            profile,
            last: None,
        }
    }

    pub fn params(&self) -> &ActuationParams {
        &self.params
    }

    pub fn last_direction(&self) -> Option<Direction> {
        self.last
    }

    /// Counts for cable travel alone, with no hysteresis.
    pub fn travel_counts(&self, theta_from: f64, theta_to: f64) -> f64 {
        let dl = self.profile.length(self.a, theta_to) - self.profile.length(self.a, theta_from);
        let p = &self.params;
        libm::fabs(dl) / p.r * p.gear_ratio() / (2.0 * PI) * f64::from(p.encoder_resolution)
    }

    pub fn stroke(&mut self, theta_from: f64, theta_to: f64, direction: Direction) -> StrokeCounts {
        let reversal = matches!(self.last, Some(d) if d != direction);
        self.last = Some(direction);
        StrokeCounts {
            travel: self.travel_counts(theta_from, theta_to),
            hysteresis: if reversal { self.params.hysteresis_counts } else { 0 },
        }
    }

    pub fn reset(&mut self) {
        self.last = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: f64 = 0.14;

    #[test]
    fn torques_at_defaults() {
        let p = ActuationParams::default();
        let md = actuation_torque(&p, A, PI / 2.0);
        assert!((md - 8.74).abs() < 0.01, "{md}");
        let mf = resisting_torque(&p, A).unwrap();
        assert!((mf - 5.332).abs() < 0.001, "{mf}");
        assert!(can_disconnect_single_sided(&p, A, PI / 2.0).unwrap());
        assert!(!can_disconnect_single_sided(&p, A, PI / 4.0).unwrap());
    }

    #[test]
    fn resisting_torque_boundary() {
        let p = ActuationParams { b: 0.28, ..Default::default() };
        assert!(matches!(
            resisting_torque(&p, A),
            Err(ActuationError::InvalidGeometry { .. })
        ));
        let p = ActuationParams { b: 0.28 - 1e-12, ..Default::default() };
        assert!((resisting_torque(&p, A).unwrap() - p.eps).abs() < 1e-9);
    }

    #[test]
    fn chord_profile() {
        let l = cable_length(&ChordProfile::default(), A, PI / 2.0);
        assert!((l - 0.56 * core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let flat = |_: f64, _: f64| 0.3;
        assert_eq!(cable_length(&flat, A, 1.0), 0.3);
    }

    #[test]
    fn reversal_pays_hysteresis_once() {
        let mut m = StrokeModel::new(ActuationParams::default(), A);
        let up = m.stroke(PI / 2.0, 2.0 * PI / 3.0, Direction::Forward);
        let down = m.stroke(2.0 * PI / 3.0, PI / 2.0, Direction::Reverse);
        assert_eq!(up.hysteresis, 0);
        assert_eq!(down.hysteresis, 1500);
        assert_eq!(down.travel, up.travel);
        let again = m.stroke(PI / 2.0, PI / 2.0, Direction::Reverse);
        assert_eq!(again.total(), 0.0);
    }
}
