//! Cluster phases.
//!
//! A phase is either an exact multiple of π/4 (stored as an integer mod 8) or
//! an arbitrary real angle in `[0, 2π)`. Exact arithmetic stays exact; mixing
//! an exact phase with a real one falls back to real arithmetic.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Tolerance used to classify a real phase as a multiple of π/2 (or π/4).
pub const STABILIZER_TOL: f64 = 1e-9;

/// An RBC phase: `Exact(k)` is `k·π/4` with `0 <= k < 8`, `Real(φ)` is `φ` radians with `0 <= φ < 2π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum PhaseValue {
    Exact(u8),
    Real(f64),
}

impl Default for PhaseValue {
    fn default() -> Self {
        PhaseValue::ZERO
    }
}

impl PhaseValue {
    pub const ZERO: PhaseValue = PhaseValue::Exact(0);
    pub const PI_4: PhaseValue = PhaseValue::Exact(1);
    pub const PI_2: PhaseValue = PhaseValue::Exact(2);
    pub const PI: PhaseValue = PhaseValue::Exact(4);

    /// `k·π/4`, reduced mod 8.
    pub fn exact(k: i64) -> Self {
        PhaseValue::Exact(k.rem_euclid(8) as u8)
    }

    /// `φ` radians, reduced mod 2π.
    pub fn real(phi: f64) -> Self {
        let mut r = phi.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if r >= TAU {
            r = 0.0;
        }
        PhaseValue::Real(r)
    }

    pub fn radians(self) -> f64 {
        match self {
            PhaseValue::Exact(k) => f64::from(k) * FRAC_PI_4,
            PhaseValue::Real(phi) => phi,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, PhaseValue::Exact(_))
    }

    /// Lossless for `Exact`; identity for `Real`.
    pub fn to_real(self) -> Self {
        PhaseValue::Real(self.radians())
    }

    /// The multiple of π/4 this phase equals, if any (within [`STABILIZER_TOL`] for real phases).
    pub fn quarter_turns(self) -> Option<u8> {
        match self {
            PhaseValue::Exact(k) => Some(k),
            PhaseValue::Real(phi) => {
                let k = (phi / FRAC_PI_4).round();
                if (phi - k * FRAC_PI_4).abs() < STABILIZER_TOL {
                    Some((k as i64).rem_euclid(8) as u8)
                } else {
                    None
                }
            }
        }
    }

    /// True when `|0> + e^{iφ}|1>` is a stabilizer state, i.e. φ is a multiple of π/2.
    pub fn is_stabilizer(self) -> bool {
        match self {
            PhaseValue::Exact(k) => k % 2 == 0,
            PhaseValue::Real(phi) => {
                let k = (phi / FRAC_PI_2).round();
                (phi - k * FRAC_PI_2).abs() < STABILIZER_TOL
            }
        }
    }

    /// Same phase up to `tol` radians on the circle, regardless of representation.
    pub fn same_phase(self, other: PhaseValue, tol: f64) -> bool {
        match (self, other) {
            (PhaseValue::Exact(a), PhaseValue::Exact(b)) => a == b,
            _ => {
                let d = (self.radians() - other.radians()).rem_euclid(TAU);
                d.min(TAU - d) <= tol
            }
        }
    }
}

impl Add for PhaseValue {
    type Output = PhaseValue;
    fn add(self, rhs: PhaseValue) -> PhaseValue {
        match (self, rhs) {
            (PhaseValue::Exact(a), PhaseValue::Exact(b)) => PhaseValue::Exact((a + b) % 8),
            _ => PhaseValue::real(self.radians() + rhs.radians()),
        }
    }
}

impl Neg for PhaseValue {
    type Output = PhaseValue;
    fn neg(self) -> PhaseValue {
        match self {
            PhaseValue::Exact(k) => PhaseValue::Exact((8 - k) % 8),
            PhaseValue::Real(phi) => PhaseValue::real(-phi),
        }
    }
}

impl Sub for PhaseValue {
    type Output = PhaseValue;
    fn sub(self, rhs: PhaseValue) -> PhaseValue {
        self + (-rhs)
    }
}

impl fmt::Display for PhaseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PhaseValue::Exact(0) => write!(f, "0"),
            PhaseValue::Exact(1) => write!(f, "pi/4"),
            PhaseValue::Exact(k) => write!(f, "{k}pi/4"),
            PhaseValue::Real(phi) => write!(f, "{phi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse angle `{0}` (expected e.g. `0`, `pi/4`, `3pi/4`, `pi`, or radians)")]
pub struct ParseAngleError(String);

impl FromStr for PhaseValue {
    type Err = ParseAngleError;

    /// Accepts `0`, `pi`, `pi/2`, `pi/4`, `kpi/4`, `k*pi/4`, `-pi/4` (all exact), or plain radians (real).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseAngleError(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let t = t.to_ascii_lowercase();
        if t.is_empty() {
            return Err(err());
        }
        if !t.contains("pi") {
            let phi: f64 = t.parse().map_err(|_| err())?;
            if phi == 0.0 {
                return Ok(PhaseValue::ZERO);
            }
            return Ok(PhaseValue::real(phi));
        }
        let (num, den) = match t.split_once('/') {
            Some((n, d)) => (n, d.parse::<i64>().map_err(|_| err())?),
            None => (t.as_str(), 1),
        };
        let coef = num.strip_suffix("pi").ok_or_else(err)?;
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let k: i64 = match coef {
            "" => 1,
            "-" => -1,
            c => c.parse().map_err(|_| err())?,
        };
        if den <= 0 || 4 % den != 0 {
            return Ok(PhaseValue::real(k as f64 * PI / den as f64));
        }
        Ok(PhaseValue::exact(k * (4 / den)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_arithmetic_wraps_mod_8() {
        assert_eq!(PhaseValue::exact(9), PhaseValue::Exact(1));
        assert_eq!(PhaseValue::exact(-1), PhaseValue::Exact(7));
        assert_eq!(PhaseValue::Exact(6) + PhaseValue::Exact(3), PhaseValue::Exact(1));
        assert_eq!(PhaseValue::Exact(1) - PhaseValue::Exact(3), PhaseValue::Exact(6));
        assert_eq!(-PhaseValue::ZERO, PhaseValue::ZERO);
    }

    #[test]
    fn real_phase_stays_in_range() {
        let p = PhaseValue::real(-1e-18);
        assert!(p.radians() >= 0.0 && p.radians() < TAU);
        let q = PhaseValue::real(7.0) + PhaseValue::Exact(4);
        assert!((q.radians() - (7.0 + PI).rem_euclid(TAU)).abs() < 1e-12);
    }

    #[test]
    fn exact_to_real_is_lossless() {
        for k in 0..8 {
            let e = PhaseValue::Exact(k);
            assert!(e.same_phase(e.to_real(), 1e-15));
            assert_eq!(e.to_real().quarter_turns(), Some(k));
        }
    }

    #[test]
    fn stabilizer_classification() {
        assert!(PhaseValue::ZERO.is_stabilizer());
        assert!(PhaseValue::PI.is_stabilizer());
        assert!(!PhaseValue::PI_4.is_stabilizer());
        assert!(PhaseValue::real(FRAC_PI_2 + 1e-11).is_stabilizer());
        assert!(PhaseValue::real(TAU - 1e-11).is_stabilizer());
        assert!(!PhaseValue::real(0.3).is_stabilizer());
    }

    #[test]
    fn parses_angles() {
        assert_eq!("pi/4".parse::<PhaseValue>().unwrap(), PhaseValue::Exact(1));
        assert_eq!("3pi/4".parse::<PhaseValue>().unwrap(), PhaseValue::Exact(3));
        assert_eq!("3*pi/4".parse::<PhaseValue>().unwrap(), PhaseValue::Exact(3));
        assert_eq!("-pi/4".parse::<PhaseValue>().unwrap(), PhaseValue::Exact(7));
        assert_eq!("pi".parse::<PhaseValue>().unwrap(), PhaseValue::Exact(4));
        assert_eq!("pi/2".parse::<PhaseValue>().unwrap(), PhaseValue::Exact(2));
        assert_eq!("0".parse::<PhaseValue>().unwrap(), PhaseValue::ZERO);
        assert_eq!("0.5".parse::<PhaseValue>().unwrap(), PhaseValue::Real(0.5));
        assert!("pie".parse::<PhaseValue>().is_err());
        for k in 0..8 {
            let p = PhaseValue::Exact(k);
            assert_eq!(p.to_string().parse::<PhaseValue>().unwrap(), p);
        }
    }

    proptest! {
        #[test]
        fn exact_and_real_arithmetic_agree(a in 0u8..8, b in 0u8..8) {
            let (ea, eb) = (PhaseValue::Exact(a), PhaseValue::Exact(b));
            prop_assert!((ea + eb).same_phase(ea.to_real() + eb.to_real(), 1e-12));
            prop_assert!((ea - eb).same_phase(ea.to_real() - eb.to_real(), 1e-12));
        }
    }
}
