//! Angle wrapping and decibel conversions shared across the crate.

use std::f64::consts::PI;

/// Wraps an angle in radians to `[-π, π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Amplitude ratio to dB (20·log10).
pub fn amplitude_to_db(a: f64) -> f64 {
    20.0 * a.log10()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Power ratio to dB (10·log10). Zero maps to `floor_db`.
pub fn power_to_db(p: f64, floor_db: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(floor_db)
    } else {
        floor_db
    }
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
