//! Brute-force event simulation of the detection chain: Poisson pair
//! generation, per-arm filtering and loss, detector response, and time-tag
//! streams.
//!
//! Times are integer picoseconds throughout. Emission instants are
//! quantized to 1 ps when drawn; every later delay and jitter sample is
//! rounded to 1 ps as well, so arrival-time differences are exact.

mod arm;
mod detector;
mod experiment;
mod source;

pub use arm::propagate_arm;
pub use detector::{apply_dead_time, dark_clicks, detect, detect_segment, photon_clicks, DeadTimeFilter};
pub use experiment::{run_experiment, run_experiment_with, SimError, SEGMENT_TARGET_EVENTS};
pub use source::{generate_pairs, generate_pairs_in};

use serde::Serialize;

use crate::config::PhysicalConstants;

/// Picosecond timestamps.
pub type Picos = i64;

/// Pump photons per second, n = Pλ/(hc).
pub fn pump_photon_flux(power: f64, wavelength: f64) -> f64 {
    power * wavelength / (PhysicalConstants::PLANCK * PhysicalConstants::SPEED_OF_LIGHT)
}

/// Pump power that gives `flux` photons per second.
pub fn power_for_flux(flux: f64, wavelength: f64) -> f64 {
    flux * PhysicalConstants::PLANCK * PhysicalConstants::SPEED_OF_LIGHT / wavelength
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub emission_time: Picos,
    pub signal_wavelength: f64,
    pub idler_wavelength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Signal,
    Idler,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Signal => "signal",
            Channel::Idler => "idler",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Channel::Signal => 0,
            Channel::Idler => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Channel::Signal),
            1 => Some(Channel::Idler),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "signal" | "0" => Some(Channel::Signal),
            "idler" | "1" => Some(Channel::Idler),
            _ => None,
        }
    }
}

/// A photon that reached a detector's input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time: Picos,
    pub wavelength: f64,
}

/// Ordered detector clicks for one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    pub channel: Channel,
    pub tags: Vec<Picos>,
}

impl TimeTagStream {
    pub fn new(channel: Channel, tags: Vec<Picos>) -> Self {
        TimeTagStream { channel, tags }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.tags.windows(2).all(|w| w[0] < w[1])
    }

    pub fn seconds(&self) -> impl Iterator<Item = f64> + '_ {
        self.tags.iter().map(|&t| crate::units::ps_to_seconds(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pump_flux() {
        // hand value: 0.008 W × 772.8e-9 m / (h c)
        let n = pump_photon_flux(0.008, 772.8e-9);
        assert!((n / 3.112_292_2e16 - 1.0).abs() < 1e-7, "{n}");
        let brightness = 6e-11 * n;
        assert!((brightness / 1.8697e6 - 1.0).abs() < 0.01);
        assert_eq!(pump_photon_flux(0.0, 772.8e-9), 0.0);
        assert!((power_for_flux(n, 772.8e-9) / 0.008 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn channel_codes() {
        for c in [Channel::Signal, Channel::Idler] {
            assert_eq!(Channel::from_code(c.code()), Some(c));
            assert_eq!(Channel::parse(c.as_str()), Some(c));
        }
        assert_eq!(Channel::from_code(7), None);
    }
}
