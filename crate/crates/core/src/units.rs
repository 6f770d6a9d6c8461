//! Unit-suffixed quantities in configuration documents.
//!
//! Everything internal is SI. Configuration values may be bare numbers
//! (already SI) or strings such as `"8 mW"`, `"772.8 nm"`, `"26 ns"`,
//! `"0.67 dB"`. Losses in dB are turned into linear transmissions.

use std::fmt;

use thiserror::Error;

/// Physical dimension a configuration value is expected to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Power,
    /// Events per second.
    Rate,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Power => "power",
            Dimension::Rate => "rate",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("cannot parse number in {0:?}")]
    BadNumber(String),
    #[error("unknown unit {unit:?} for a {dimension} value")]
    UnknownUnit { unit: String, dimension: Dimension },
}

/// SI conversion as (multiplier, divisor). Sub-unit prefixes divide by an
/// exact power of ten so that e.g. "100 nm" parses to the double nearest 1e-7.
fn scale(unit: &str, dim: Dimension) -> Option<(f64, f64)> {
    let s = match (dim, unit) {
        (_, "") => (1.0, 1.0),
        (Dimension::Length, "m") => (1.0, 1.0),
        (Dimension::Length, "mm") => (1.0, 1e3),
        (Dimension::Length, "um" | "µm" | "μm") => (1.0, 1e6),
        (Dimension::Length, "nm") => (1.0, 1e9),
        (Dimension::Length, "pm") => (1.0, 1e12),
        (Dimension::Time, "s") => (1.0, 1.0),
        (Dimension::Time, "ms") => (1.0, 1e3),
        (Dimension::Time, "us" | "µs" | "μs") => (1.0, 1e6),
        (Dimension::Time, "ns") => (1.0, 1e9),
        (Dimension::Time, "ps") => (1.0, 1e12),
        (Dimension::Power, "W") => (1.0, 1.0),
        (Dimension::Power, "mW") => (1.0, 1e3),
        (Dimension::Power, "uW" | "µW" | "μW") => (1.0, 1e6),
        (Dimension::Rate, "cps" | "Hz" | "/s") => (1.0, 1.0),
        (Dimension::Rate, "kHz" | "kcps") => (1e3, 1.0),
        (Dimension::Dimensionless, "%") => (1.0, 1e2),
        _ => return None,
    };
    Some(s)
}

fn split_number(text: &str) -> (&str, &str) {
    let t = text.trim();
    let end = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && i > 0 && t[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    (t[..end].trim(), t[end..].trim())
}

/// Parses `"<number> [unit]"` into SI.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let (num, unit) = split_number(text);
    let value: f64 = num
        .parse()
        .map_err(|_| UnitError::BadNumber(text.to_string()))?;
    let (mul, div) = scale(unit, dim).ok_or_else(|| UnitError::UnknownUnit {
        unit: unit.to_string(),
        dimension: dim,
    })?;
    Ok(value * mul / div)
}

/// Parses a loss in dB (`"4.9 dB"` or a bare number of dB) into a linear
/// transmission, T = 10^(-dB/10).
pub fn parse_loss_db(text: &str) -> Result<f64, UnitError> {
    let (num, unit) = split_number(text);
    if !(unit.is_empty() || unit == "dB") {
        return Err(UnitError::UnknownUnit {
            unit: unit.to_string(),
            dimension: Dimension::Dimensionless,
        });
    }
    let db: f64 = num
        .parse()
        .map_err(|_| UnitError::BadNumber(text.to_string()))?;
    Ok(db_to_transmission(db))
}

pub fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Rounds seconds to the nearest integer picosecond.
pub fn seconds_to_ps(t: f64) -> i64 {
    (t * 1e12).round() as i64
}

pub fn ps_to_seconds(t: i64) -> f64 {
    t as f64 * 1e-12
}
