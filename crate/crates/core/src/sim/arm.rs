use rand::Rng;

use super::{Arrival, Channel, PairEvent};
use crate::config::ArmSpec;
use crate::filters::in_band;
use crate::units::seconds_to_ps;

/// Photons of one side of each pair that reach the arm's detector.
///
/// A photon survives with probability `transmission × gate` if its
/// wavelength is inside the passband. One uniform is drawn per in-band
/// photon whatever the transmission, so runs that differ only in
/// transmission share random numbers.
pub fn propagate_arm<R: Rng + ?Sized>(
    pairs: &[PairEvent],
    which: Channel,
    arm: &ArmSpec,
    polarization_gate: f64,
    rng: &mut R,
) -> Vec<Arrival> {
    let p = arm.transmission * polarization_gate;
    if p <= 0.0 {
        return Vec::new();
    }
    let delay = seconds_to_ps(arm.path_delay);
    let mut out = Vec::with_capacity((pairs.len() as f64 * p).ceil() as usize + 8);
    for pair in pairs {
        let wavelength = match which {
            Channel::Signal => pair.signal_wavelength,
            Channel::Idler => pair.idler_wavelength,
        };
        if !in_band(wavelength, &arm.passband) {
            continue;
        }
        if rng.random::<f64>() < p {
            out.push(Arrival {
                time: pair.emission_time + delay,
                wavelength,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::Band;
    use crate::rng::RngStream;

    fn pairs(n: usize) -> Vec<PairEvent> {
        (0..n)
            .map(|i| PairEvent {
                emission_time: i as i64 * 1000,
                signal_wavelength: 1570e-9,
                idler_wavelength: 1521.2e-9,
            })
            .collect()
    }

    #[test]
    fn transparent_arm_is_identity() {
        let arm = ArmSpec {
            transmission: 1.0,
            passband: Band::nm(1.0, 1e6),
            path_delay: 0.0,
        };
        let ps = pairs(100);
        let out = propagate_arm(&ps, Channel::Signal, &arm, 1.0, &mut RngStream::new(0, 0).rng());
        assert_eq!(out.len(), 100);
        assert!(out.iter().zip(&ps).all(|(a, p)| a.time == p.emission_time));
    }

    #[test]
    fn blocked_polarization_gives_nothing() {
        let arm = ArmSpec {
            transmission: 1.0,
            passband: Band::nm(1.0, 1e6),
            path_delay: 0.0,
        };
        assert!(propagate_arm(&pairs(100), Channel::Idler, &arm, 0.0, &mut RngStream::new(0, 0).rng()).is_empty());
    }

    #[test]
    fn out_of_band_is_dropped_and_delay_applied() {
        let arm = ArmSpec {
            transmission: 1.0,
            passband: Band::nm(1522.0, 1538.0),
            path_delay: 26e-9,
        };
        let out = propagate_arm(&pairs(10), Channel::Idler, &arm, 1.0, &mut RngStream::new(0, 0).rng());
        assert!(out.is_empty());
        let out = propagate_arm(&pairs(10), Channel::Signal, &ArmSpec { passband: Band::nm(1562.0, 1578.0), ..arm }, 1.0, &mut RngStream::new(0, 0).rng());
        assert_eq!(out[3].time, 3000 + 26_000);
    }
}
