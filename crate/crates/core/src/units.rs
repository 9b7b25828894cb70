//! Atomic-unit constants (CODATA 2018) and unit-suffixed quantity parsing.
//!
//! Everything inside the crate is in Hartree atomic units (hbar = m_e = e = 1).
//! Conversions happen only at the I/O boundary.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Electron masses per unified atomic mass unit.
pub const AMU: f64 = 1822.888486;
/// One atomic unit of time in seconds.
pub const AU_TIME_S: f64 = 2.4188843265e-17;
/// One atomic unit of electric field in V/m.
pub const AU_FIELD_VPM: f64 = 5.14220675e11;
/// Bohr radius in metres.
pub const BOHR_M: f64 = 5.29177210903e-11;

pub fn seconds_to_au(s: f64) -> f64 {
    s / AU_TIME_S
}

pub fn au_to_seconds(t: f64) -> f64 {
    t * AU_TIME_S
}

pub fn vpm_to_au(e: f64) -> f64 {
    e / AU_FIELD_VPM
}

pub fn au_to_vpm(e: f64) -> f64 {
    e * AU_FIELD_VPM
}

/// Energy difference (Hartree) to an ordinary frequency in Hz.
pub fn hartree_to_hz(e: f64) -> f64 {
    e / (TAU * AU_TIME_S)
}

/// Ordinary frequency in Hz to an angular frequency in a.u.
pub fn hz_to_angular_au(nu: f64) -> f64 {
    nu * TAU * AU_TIME_S
}

pub fn bohr_to_nm(z: f64) -> f64 {
    z * BOHR_M * 1e9
}

/// Physical dimension of a configured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Field,
    Frequency,
    Mass,
    Length,
    /// Anything else that is only ever given in atomic units (force constants,
    /// rates, penalty strengths).
    Atomic,
}

/// Parse a number with an optional unit suffix into atomic units.
///
/// A bare number is taken to be in atomic units already. Frequencies given in
/// Hz are converted to angular frequencies.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse number in {text:?}")))?;
    let unit = unit.trim();
    if unit.is_empty() || unit == "au" {
        return Ok(value);
    }
    let scale = match (dim, unit) {
        (Dimension::Time, "s") => 1.0 / AU_TIME_S,
        (Dimension::Time, "ms") => 1e-3 / AU_TIME_S,
        (Dimension::Time, "us") => 1e-6 / AU_TIME_S,
        (Dimension::Time, "ns") => 1e-9 / AU_TIME_S,
        (Dimension::Time, "ps") => 1e-12 / AU_TIME_S,
        (Dimension::Time, "fs") => 1e-15 / AU_TIME_S,
        (Dimension::Field, "Vpm") => 1.0 / AU_FIELD_VPM,
        (Dimension::Frequency, "Hz") => TAU * AU_TIME_S,
        (Dimension::Frequency, "kHz") => 1e3 * TAU * AU_TIME_S,
        (Dimension::Frequency, "MHz") => 1e6 * TAU * AU_TIME_S,
        (Dimension::Mass, "amu") => AMU,
        (Dimension::Length, "nm") => 1e-9 / BOHR_M,
        _ => {
            return Err(Error::invalid(format!(
                "unit {unit:?} is not valid for a {dim:?} quantity ({text:?})"
            )))
        }
    };
    Ok(value * scale)
}
