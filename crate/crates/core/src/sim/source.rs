use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{PairEvent, Picos};
use crate::config::SourceSpec;
use crate::filters::conjugate_wavelength;
use crate::units::seconds_to_ps;

/// Pairs emitted in `[start, end)` picoseconds.
///
/// Emission is a homogeneous Poisson process at [`SourceSpec::pair_rate`];
/// the signal wavelength is uniform over the emission band and the idler is
/// its conjugate about the degeneracy wavelength.
pub fn generate_pairs_in<R: Rng + ?Sized>(source: &SourceSpec, start: Picos, end: Picos, rng: &mut R) -> Vec<PairEvent> {
    let rate = source.pair_rate();
    if !(rate > 0.0) || end <= start {
        return Vec::new();
    }
    let span_s = (end - start) as f64 * 1e-12;
    let mut out = Vec::with_capacity((rate * span_s * 1.01 + 16.0) as usize);
    let band = source.emission_band();
    let width = band.width();
    let mut t = 0.0f64;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap / rate;
        if t >= span_s {
            break;
        }
        let emission_time = start + (t * 1e12) as Picos;
        if emission_time >= end {
            break;
        }
        let signal = band.low + width * rng.random::<f64>();
        let idler = conjugate_wavelength(signal, source.degeneracy_wavelength, source.conjugation)
            .unwrap_or(f64::INFINITY);
        out.push(PairEvent {
            emission_time,
            signal_wavelength: signal,
            idler_wavelength: idler,
        });
    }
    out
}

/// Pairs emitted over `[0, duration)` seconds.
pub fn generate_pairs<R: Rng + ?Sized>(source: &SourceSpec, duration: f64, rng: &mut R) -> Vec<PairEvent> {
    generate_pairs_in(source, 0, seconds_to_ps(duration), rng)
}
