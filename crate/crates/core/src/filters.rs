//! Rectangular band-pass filters and the conjugate-band overlap that sets
//! the fraction of pairs able to produce a coincidence.

use serde::Serialize;
use thiserror::Error;

use crate::config::ConjugationMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("invalid band [{low}, {high}]: need 0 < low < high")]
    InvalidBand { low: f64, high: f64 },
    #[error("degeneracy wavelength must be positive, got {0}")]
    InvalidDegeneracy(f64),
    #[error("band edge {edge} m has no frequency conjugate about {degeneracy} m")]
    Divergent { edge: f64, degeneracy: f64 },
}

impl Band {
    pub fn new(low: f64, high: f64) -> Result<Self, FilterError> {
        let b = Band { low, high };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(FilterError::InvalidBand { low, high })
        }
    }

    /// Band from edges given in nanometres.
    pub fn nm(low: f64, high: f64) -> Self {
        Band {
            low: low * 1e-9,
            high: high * 1e-9,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.low.is_finite() && self.high.is_finite() && 0.0 < self.low && self.low < self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    /// `None` when the overlap is empty or a single point.
    pub fn intersection(&self, other: &Band) -> Option<Band> {
        let low = self.low.max(other.low);
        let high = self.high.min(other.high);
        (low < high).then_some(Band { low, high })
    }
}

/// Closed-interval membership.
pub fn in_band(wavelength: f64, band: &Band) -> bool {
    band.low <= wavelength && wavelength <= band.high
}

/// Wavelength of the partner photon for one photon at `wavelength`.
///
/// Returns `None` in exact-frequency mode when the partner frequency is not
/// positive (`wavelength <= degeneracy / 2`).
pub fn conjugate_wavelength(wavelength: f64, degeneracy: f64, mode: ConjugationMode) -> Option<f64> {
    match mode {
        ConjugationMode::Linear => Some(2.0 * degeneracy - wavelength),
        ConjugationMode::ExactFrequency => {
            let inv = 2.0 / degeneracy - 1.0 / wavelength;
            (inv > 0.0).then(|| 1.0 / inv)
        }
    }
}

pub fn conjugate_band(band: &Band, degeneracy: f64, mode: ConjugationMode) -> Result<Band, FilterError> {
    if !band.is_valid() {
        return Err(FilterError::InvalidBand {
            low: band.low,
            high: band.high,
        });
    }
    if !(degeneracy.is_finite() && degeneracy > 0.0) {
        return Err(FilterError::InvalidDegeneracy(degeneracy));
    }
    let image = |edge: f64| {
        conjugate_wavelength(edge, degeneracy, mode).ok_or(FilterError::Divergent { edge, degeneracy })
    };
    // conjugation is decreasing, so the edges swap
    Ok(Band {
        low: image(band.high)?,
        high: image(band.low)?,
    })
}

/// Conjugate of the part of `band` that has a finite conjugate.
fn conjugate_clipped(band: &Band, degeneracy: f64, mode: ConjugationMode) -> Option<Band> {
    let usable = match mode {
        ConjugationMode::Linear => *band,
        ConjugationMode::ExactFrequency => {
            let floor = 0.5 * degeneracy;
            if band.high <= floor {
                return None;
            }
            let low = if band.low <= floor {
                // smallest representable edge with a finite conjugate
                f64::from_bits(floor.to_bits() + 1)
            } else {
                band.low
            };
            Band { low, high: band.high }
        }
    };
    conjugate_band(&usable, degeneracy, mode).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapResult {
    /// Part of the signal filter whose partners land in the idler filter.
    pub effective_band_signal: Option<Band>,
    /// Part of the idler filter whose partners land in the signal filter.
    pub effective_band_idler: Option<Band>,
    /// |effective signal band| / |signal filter|.
    pub overlap_fraction: f64,
    /// |effective idler band| / |idler filter|; equals `overlap_fraction`
    /// in linear mode when both filters have the same width.
    pub idler_fraction: f64,
}

pub fn effective_overlap(
    bpf_signal: &Band,
    bpf_idler: &Band,
    degeneracy: f64,
    mode: ConjugationMode,
) -> Result<OverlapResult, FilterError> {
    for b in [bpf_signal, bpf_idler] {
        if !b.is_valid() {
            return Err(FilterError::InvalidBand { low: b.low, high: b.high });
        }
    }
    if !(degeneracy.is_finite() && degeneracy > 0.0) {
        return Err(FilterError::InvalidDegeneracy(degeneracy));
    }
    let eff_idler = conjugate_clipped(bpf_signal, degeneracy, mode).and_then(|c| bpf_idler.intersection(&c));
    let eff_signal = conjugate_clipped(bpf_idler, degeneracy, mode).and_then(|c| bpf_signal.intersection(&c));
    let fraction = |eff: Option<Band>, of: &Band| eff.map_or(0.0, |b| b.width() / of.width());
    Ok(OverlapResult {
        effective_band_signal: eff_signal,
        effective_band_idler: eff_idler,
        overlap_fraction: fraction(eff_signal, bpf_signal),
        idler_fraction: fraction(eff_idler, bpf_idler),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DEG: f64 = 1545.6e-9;

    fn close_nm(a: f64, b_nm: f64, tol_nm: f64) -> bool {
        (a * 1e9 - b_nm).abs() <= tol_nm
    }

    #[test]
    fn linear_conjugate_of_signal_filter() {
        let c = conjugate_band(&Band::nm(1562.0, 1578.0), DEG, ConjugationMode::Linear).unwrap();
        assert!(close_nm(c.low, 1513.2, 1e-9), "{c:?}");
        assert!(close_nm(c.high, 1529.2, 1e-9), "{c:?}");
    }

    #[test]
    fn symmetric_band_is_self_conjugate() {
        let b = Band::nm(1535.6, 1555.6);
        let c = conjugate_band(&b, DEG, ConjugationMode::Linear).unwrap();
        assert!(close_nm(c.low, 1535.6, 1e-9) && close_nm(c.high, 1555.6, 1e-9));
    }

    #[test]
    fn exact_frequency_conjugate() {
        // hand oracle: 1/λ' = 2/1545.6 − 1/λ at 1578 and 1562 nm
        let c = conjugate_band(&Band::nm(1562.0, 1578.0), DEG, ConjugationMode::ExactFrequency).unwrap();
        assert!(close_nm(c.low, 1514.50, 0.005), "{c:?}");
        assert!(close_nm(c.high, 1529.54, 0.005), "{c:?}");
    }

    #[test]
    fn divergent_exact_conjugate() {
        let err = conjugate_band(&Band::nm(700.0, 800.0), DEG, ConjugationMode::ExactFrequency).unwrap_err();
        assert!(matches!(err, FilterError::Divergent { .. }));
        assert!(conjugate_band(&Band::nm(1600.0, 1500.0), DEG, ConjugationMode::Linear).is_err());
    }

    #[test]
    fn reference_filters_overlap() {
        let r = effective_overlap(&Band::nm(1562.0, 1578.0), &Band::nm(1522.0, 1538.0), DEG, ConjugationMode::Linear)
            .unwrap();
        let s = r.effective_band_signal.unwrap();
        let i = r.effective_band_idler.unwrap();
        assert!(close_nm(s.low, 1562.0, 1e-9) && close_nm(s.high, 1569.2, 1e-9), "{s:?}");
        assert!(close_nm(i.low, 1522.0, 1e-9) && close_nm(i.high, 1529.2, 1e-9), "{i:?}");
        assert!((r.overlap_fraction - 0.45).abs() < 1e-12);
        assert!((r.idler_fraction - 0.45).abs() < 1e-12);
    }

    #[test]
    fn reference_filters_exact_frequency() {
        let r = effective_overlap(
            &Band::nm(1562.0, 1578.0),
            &Band::nm(1522.0, 1538.0),
            DEG,
            ConjugationMode::ExactFrequency,
        )
        .unwrap();
        // hand values: idler side [1522, 1529.5408], signal side [1562, 1569.9434]
        assert!((r.idler_fraction - 0.471_300).abs() < 1e-5, "{r:?}");
        assert!((r.overlap_fraction - 0.496_463).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn conjugate_filters_overlap_fully() {
        let s = Band::nm(1562.0, 1578.0);
        let i = conjugate_band(&s, DEG, ConjugationMode::Linear).unwrap();
        let r = effective_overlap(&s, &i, DEG, ConjugationMode::Linear).unwrap();
        assert!((r.overlap_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_filters() {
        let r = effective_overlap(&Band::nm(1562.0, 1578.0), &Band::nm(1500.0, 1510.0), DEG, ConjugationMode::Linear)
            .unwrap();
        assert_eq!(r.overlap_fraction, 0.0);
        assert!(r.effective_band_signal.is_none() && r.effective_band_idler.is_none());
    }

    #[test]
    fn band_membership() {
        let b = Band::nm(1562.0, 1578.0);
        assert!(in_band(1570e-9, &b));
        assert!(!in_band(1561.999e-9, &b));
        assert!(in_band(b.low, &b));
        assert!(in_band(b.high, &b));
    }

    fn band_above(deg: f64) -> impl Strategy<Value = Band> {
        (0.0f64..0.2, 1e-4f64..0.1).prop_map(move |(off, w)| Band {
            low: deg * (1.0 + off),
            high: deg * (1.0 + off + w),
        })
    }

    fn any_band(deg: f64) -> impl Strategy<Value = Band> {
        (0.6f64..1.4, 1e-4f64..0.1).prop_map(move |(lo, w)| Band {
            low: deg * lo,
            high: deg * (lo + w),
        })
    }

    proptest! {
        // 2λ − x is exact by Sterbenz for x in [λ, 4λ], so bands on the long
        // side of degeneracy round-trip exactly.
        #[test]
        fn linear_involution_exact(b in band_above(DEG)) {
            let once = conjugate_band(&b, DEG, ConjugationMode::Linear).unwrap();
            let twice = conjugate_band(&once, DEG, ConjugationMode::Linear).unwrap();
            prop_assert_eq!(twice, b);
        }

        #[test]
        fn linear_involution_any_side(b in any_band(DEG)) {
            let twice = conjugate_band(
                &conjugate_band(&b, DEG, ConjugationMode::Linear).unwrap(),
                DEG,
                ConjugationMode::Linear,
            ).unwrap();
            let ulp = f64::EPSILON * 2.0 * DEG;
            prop_assert!((twice.low - b.low).abs() <= ulp);
            prop_assert!((twice.high - b.high).abs() <= ulp);
        }

        #[test]
        fn exact_involution(b in any_band(DEG)) {
            let once = conjugate_band(&b, DEG, ConjugationMode::ExactFrequency).unwrap();
            let twice = conjugate_band(&once, DEG, ConjugationMode::ExactFrequency).unwrap();
            prop_assert!(((twice.low - b.low) / b.low).abs() < 1e-12);
            prop_assert!(((twice.high - b.high) / b.high).abs() < 1e-12);
        }

        #[test]
        fn swap_symmetry(s in any_band(DEG), w in 1e-4f64..0.05, lo in 0.6f64..1.4) {
            let i = Band { low: DEG * lo, high: DEG * (lo + w) };
            let a = effective_overlap(&s, &i, DEG, ConjugationMode::Linear).unwrap();
            let b = effective_overlap(&i, &s, DEG, ConjugationMode::Linear).unwrap();
            // coincidence-capable width seen from either filter is the same
            let wa = a.overlap_fraction * s.width();
            let wb = b.idler_fraction * s.width();
            prop_assert!((wa - wb).abs() <= 1e-9 * DEG);
            prop_assert!((a.idler_fraction * i.width() - b.overlap_fraction * i.width()).abs() <= 1e-9 * DEG);
            prop_assert!((0.0..=1.0).contains(&a.overlap_fraction));
        }
    }
}
