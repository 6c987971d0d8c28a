//! Conversions between the configuration units (ordinary frequency in MHz or
//! GHz, times in ns) and the internal ones (rad/μs, μs).

use std::f64::consts::TAU;

/// `f` in MHz (ω/2π) to angular frequency in rad/μs.
#[inline]
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

/// `f` in GHz (ω/2π) to angular frequency in rad/μs.
#[inline]
pub fn ghz(f: f64) -> f64 {
    TAU * 1e3 * f
}

/// Angular frequency in rad/μs to ordinary frequency in MHz.
#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// Angular frequency in rad/μs to ordinary frequency in GHz.
#[inline]
pub fn to_ghz(omega: f64) -> f64 {
    omega / (TAU * 1e3)
}

#[inline]
pub fn ns(t: f64) -> f64 {
    t * 1e-3
}

#[inline]
pub fn to_ns(t: f64) -> f64 {
    t * 1e3
}
