//! Quasi-phase-matching tuning near degeneracy.
//!
//! The mismatch is expanded to first order in pump detuning and second
//! order in signal detuning, Δk = a·δλp + b·Δλs², with a/b fixed by one
//! calibration anchor (a pump detuning and the signal shift it produces).
//! Real solutions exist only on the side of degeneracy where −a·δλp/b ≥ 0.
//! The grating vector 2πm/Λ is already absorbed in the expansion point.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::analytic::{car_asymmetric, AsymmetricParams};
use crate::config::{ConjugationMode, ExperimentSpec, PhaseMatchingSpec};
use crate::filters::{effective_overlap, Band, FilterError};
use crate::sim::pump_photon_flux;

#[derive(Debug, Error, PartialEq)]
pub enum PhaseMatchingError {
    #[error("config has no [phase_matching] section; add one with degenerate_pump_wavelength, anchor_pump_detuning, anchor_signal_shift and emission_halfwidth")]
    Missing,
    #[error("calibration anchors must be nonzero, got pump detuning {pump} m and signal shift {signal} m")]
    ZeroAnchor { pump: f64, signal: f64 },
    #[error("anchor pump detuning must be negative (phase matching below degeneracy), got {0} m")]
    WrongSide(f64),
    #[error("invalid tuning parameter {name} = {value}")]
    Invalid { name: &'static str, value: f64 },
    #[error("pump wavelengths must be sorted ascending")]
    Unsorted,
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningModel {
    pub degenerate_pump_wavelength: f64,
    /// Pair degeneracy, 2λp0.
    pub degeneracy_wavelength: f64,
    pub pump_slope_a: f64,
    pub curvature_b: f64,
    pub anchor_pump_detuning: f64,
    pub anchor_signal_shift: f64,
    pub qpm_period: f64,
    pub qpm_order: u32,
    pub interaction_length: f64,
    /// |Δk| beyond which emission is cut off.
    pub acceptance_bandwidth: f64,
    pub conjugation: ConjugationMode,
}

/// Signal/idler pair at one pump wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningSolution {
    /// Signal minus degeneracy, ≥ 0.
    pub signal_shift: f64,
    pub signal: f64,
    pub idler: f64,
}

impl TuningModel {
    /// Fixes a/b = −shift²/δλp from the anchor. The absolute scale puts the
    /// acceptance edge (|Δk| = 2π/L) at `emission_halfwidth` of signal
    /// detuning when the pump sits at degeneracy.
    pub fn calibrate(
        degenerate_pump_wavelength: f64,
        anchor_pump_detuning: f64,
        anchor_signal_shift: f64,
        emission_halfwidth: f64,
        interaction_length: f64,
    ) -> Result<Self, PhaseMatchingError> {
        if anchor_pump_detuning == 0.0 || anchor_signal_shift == 0.0 {
            return Err(PhaseMatchingError::ZeroAnchor {
                pump: anchor_pump_detuning,
                signal: anchor_signal_shift,
            });
        }
        if anchor_pump_detuning > 0.0 {
            return Err(PhaseMatchingError::WrongSide(anchor_pump_detuning));
        }
        for (name, value) in [
            ("degenerate_pump_wavelength", degenerate_pump_wavelength),
            ("emission_halfwidth", emission_halfwidth),
            ("interaction_length", interaction_length),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(PhaseMatchingError::Invalid { name, value });
            }
        }
        let shift = anchor_signal_shift.abs();
        let acceptance = 2.0 * PI / interaction_length;
        let b = acceptance / (emission_halfwidth * emission_halfwidth);
        let ratio = -shift * shift / anchor_pump_detuning;
        Ok(TuningModel {
            degenerate_pump_wavelength,
            degeneracy_wavelength: 2.0 * degenerate_pump_wavelength,
            pump_slope_a: ratio * b,
            curvature_b: b,
            anchor_pump_detuning,
            anchor_signal_shift: shift,
            qpm_period: 3.5e-6,
            qpm_order: 1,
            interaction_length,
            acceptance_bandwidth: acceptance,
            conjugation: ConjugationMode::Linear,
        })
    }

    pub fn from_spec(spec: &ExperimentSpec) -> Result<Self, PhaseMatchingError> {
        let pm: &PhaseMatchingSpec = spec.phase_matching.as_ref().ok_or(PhaseMatchingError::Missing)?;
        let mut m = Self::calibrate(
            pm.degenerate_pump_wavelength,
            pm.anchor_pump_detuning,
            pm.anchor_signal_shift,
            pm.emission_halfwidth,
            pm.interaction_length,
        )?;
        m.qpm_period = pm.qpm_period;
        m.qpm_order = pm.qpm_order;
        m.conjugation = spec.source.conjugation;
        Ok(m)
    }

    /// 2πm/Λ
    pub fn grating_vector(&self) -> f64 {
        2.0 * PI * self.qpm_order as f64 / self.qpm_period
    }
}

/// Δk = a·δλp + b·Δλs²
pub fn mismatch(model: &TuningModel, pump_detuning: f64, signal_detuning: f64) -> f64 {
    model.pump_slope_a * pump_detuning + model.curvature_b * signal_detuning * signal_detuning
}

/// Phase-matched signal shift for a pump detuning; `None` on the
/// non-phase-matchable side.
///
/// Evaluated as shift_anchor·sqrt(δλp/δλp_anchor), the same root as
/// sqrt(−a·δλp/b), so the anchor is reproduced exactly.
pub fn signal_shift(model: &TuningModel, pump_detuning: f64) -> Option<f64> {
    let q = pump_detuning / model.anchor_pump_detuning;
    if !(q >= 0.0) {
        return None;
    }
    Some(model.anchor_signal_shift * q.sqrt())
}

pub fn solve_detuning(model: &TuningModel, pump_detuning: f64) -> Option<TuningSolution> {
    let shift = signal_shift(model, pump_detuning)?;
    let deg = model.degeneracy_wavelength;
    let signal = deg + shift;
    let idler = match model.conjugation {
        ConjugationMode::Linear => deg - shift,
        ConjugationMode::ExactFrequency => {
            let pump = model.degenerate_pump_wavelength + pump_detuning;
            let inv = 1.0 / pump - 1.0 / signal;
            if !(inv > 0.0) {
                return None;
            }
            1.0 / inv
        }
    };
    Some(TuningSolution {
        signal_shift: shift,
        signal,
        idler,
    })
}

pub fn solve_tuning(model: &TuningModel, pump_wavelength: f64) -> Option<TuningSolution> {
    solve_detuning(model, pump_wavelength - model.degenerate_pump_wavelength)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningPoint {
    pub pump_wavelength: f64,
    pub signal_center: Option<f64>,
    pub idler_center: Option<f64>,
    pub detectable_fraction: f64,
    /// Closed form at the scanned pump wavelength with f = detectable_fraction.
    pub predicted_car: f64,
    /// Peak-over-background convention, predicted_car + 1.
    pub predicted_car_measured: f64,
}

/// Subintervals of the midpoint rule over the effective band.
const WEIGHT_STEPS: usize = 2000;

fn sinc2(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (x.sin() / x).powi(2)
    }
}

/// Acceptance-weighted width of the part of `band` inside the emission
/// window centered on the tuned signal.
fn emission_weight(model: &TuningModel, band: &Band, window: f64, pump_detuning: f64) -> f64 {
    let Some(shift) = signal_shift(model, pump_detuning) else {
        return 0.0;
    };
    let center = model.degeneracy_wavelength + shift;
    let emit = Band {
        low: center - 0.5 * window,
        high: center + 0.5 * window,
    };
    let Some(part) = band.intersection(&emit) else {
        return 0.0;
    };
    let h = part.width() / WEIGHT_STEPS as f64;
    let half_l = 0.5 * model.interaction_length;
    (0..WEIGHT_STEPS)
        .map(|k| {
            let lambda = part.low + (k as f64 + 0.5) * h;
            let dk = mismatch(model, pump_detuning, lambda - model.degeneracy_wavelength);
            if dk.abs() <= model.acceptance_bandwidth {
                sinc2(dk * half_l)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        * h
}

/// Detectable pair fraction and predicted CAR across pump wavelengths at the
/// spec's pump power.
///
/// The fraction is the filter overlap at degeneracy scaled by the
/// phase-matching weight of the effective signal band relative to its value
/// at degeneracy, so the degenerate point reproduces the overlap exactly.
pub fn detuning_scan(
    model: &TuningModel,
    spec: &ExperimentSpec,
    pump_wavelengths: &[f64],
) -> Result<Vec<DetuningPoint>, PhaseMatchingError> {
    if pump_wavelengths.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(PhaseMatchingError::Unsorted);
    }
    let overlap = effective_overlap(
        &spec.arm_signal.passband,
        &spec.arm_idler.passband,
        spec.source.degeneracy_wavelength,
        spec.source.conjugation,
    )?;
    let window = spec
        .phase_matching
        .as_ref()
        .map_or(2.0 * model.anchor_signal_shift, |pm| pm.scan_emission_bandwidth);
    let reference = overlap
        .effective_band_signal
        .map_or(0.0, |b| emission_weight(model, &b, window, 0.0));
    let gate = spec.polarization_gate();
    Ok(pump_wavelengths
        .iter()
        .map(|&lp| {
            let detuning = lp - model.degenerate_pump_wavelength;
            let sol = solve_detuning(model, detuning);
            let w = overlap
                .effective_band_signal
                .map_or(0.0, |b| emission_weight(model, &b, window, detuning));
            let fraction = if reference > 0.0 && sol.is_some() {
                (overlap.overlap_fraction * (w / reference)).min(1.0)
            } else {
                0.0
            };
            let params = AsymmetricParams {
                alpha: spec.source.conversion_efficiency_alpha,
                n: pump_photon_flux(spec.source.pump_power, lp),
                l_signal: spec.arm_signal.transmission * spec.det_signal.quantum_efficiency * gate,
                l_idler: spec.arm_idler.transmission * spec.det_idler.quantum_efficiency * gate,
                d_signal: spec.det_signal.dark_count_rate,
                d_idler: spec.det_idler.dark_count_rate,
                r: spec.tia.bin_width,
                f: fraction,
            };
            let car = car_asymmetric(&params).unwrap_or(0.0);
            DetuningPoint {
                pump_wavelength: lp,
                signal_center: sol.map(|s| s.signal),
                idler_center: sol.map(|s| s.idler),
                detectable_fraction: fraction,
                predicted_car: car,
                predicted_car_measured: car + 1.0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{car_closed_form, RateModelParams};
    use crate::config::reference_spec;
    use proptest::prelude::*;


    fn model() -> TuningModel {
        TuningModel::from_spec(&reference_spec()).unwrap()
    }

    /// Degenerate pump wavelength as parsed from the reference config.
    fn lp0() -> f64 {
        model().degenerate_pump_wavelength
    }

    #[test]
    fn calibration_ratio() {
        let m = model();
        // a/b = (100 nm)² / 1 nm = 1e4 nm
        assert!((m.pump_slope_a / m.curvature_b - 1e-5).abs() < 1e-17);
        assert!((m.acceptance_bandwidth - 2.0 * PI / 3.5e-3).abs() < 1e-9);
        assert!((m.degeneracy_wavelength - 1545.6e-9).abs() < 1e-21);
        let lp0 = lp0();
        assert!(TuningModel::calibrate(lp0, 0.0, 1e-7, 9.5e-8, 3.5e-3).is_err());
        assert_eq!(
            TuningModel::calibrate(lp0, 1e-9, 1e-7, 9.5e-8, 3.5e-3),
            Err(PhaseMatchingError::WrongSide(1e-9))
        );
    }

    #[test]
    fn mismatch_expansion() {
        let mut m = model();
        assert_eq!(mismatch(&m, 0.0, 0.0), 0.0);
        m.pump_slope_a = 1.0;
        m.curvature_b = 1.0;
        assert_eq!(mismatch(&m, -1.0, 1.0), 0.0);
    }

    #[test]
    fn anchor_and_square_root_law() {
        let m = model();
        let lp0 = lp0();
        let s = solve_detuning(&m, -1e-9).unwrap();
        assert_eq!(s.signal_shift, 100e-9);
        assert_eq!(solve_detuning(&m, -4e-9).unwrap().signal_shift, 200e-9);
        let s = solve_tuning(&m, lp0 - 1e-9).unwrap();
        assert!((s.signal - 1645.6e-9).abs() < 1e-15);
        assert!((s.idler - 1445.6e-9).abs() < 1e-15);
        let d = solve_tuning(&m, lp0).unwrap();
        assert_eq!((d.signal, d.idler), (2.0 * lp0, 2.0 * lp0));
        assert!(solve_tuning(&m, lp0 + 0.5e-9).is_none());
        assert!(solve_detuning(&m, f64::MIN_POSITIVE).is_none());
    }

    #[test]
    fn exact_mode_conserves_energy() {
        let mut m = model();
        m.conjugation = ConjugationMode::ExactFrequency;
        let lp = m.degenerate_pump_wavelength - 0.3e-9;
        let s = solve_tuning(&m, lp).unwrap();
        let residual = (1.0 / lp - 1.0 / s.signal - 1.0 / s.idler) * lp;
        assert!(residual.abs() < 1e-9);
    }

    #[test]
    fn scan_at_degeneracy_is_filter_overlap() {
        let mut spec = reference_spec();
        spec.source.pump_power = 6e-3;
        let m = TuningModel::from_spec(&spec).unwrap();
        let ov = effective_overlap(
            &spec.arm_signal.passband,
            &spec.arm_idler.passband,
            spec.source.degeneracy_wavelength,
            spec.source.conjugation,
        )
        .unwrap();
        let pts = detuning_scan(&m, &spec, &[m.degenerate_pump_wavelength]).unwrap();
        assert_eq!(pts[0].detectable_fraction.to_bits(), ov.overlap_fraction.to_bits());
        let analytic = car_closed_form(&RateModelParams {
            alpha: 6e-11,
            n: pump_photon_flux(6e-3, m.degenerate_pump_wavelength),
            l: 1e-3,
            d: 2000.0,
            r: 500e-12,
            f: ov.overlap_fraction,
        })
        .unwrap();
        assert!((pts[0].predicted_car - analytic).abs() < 1e-9 * analytic);
    }

    #[test]
    fn scan_is_one_sided() {
        let spec = reference_spec();
        let m = model();
        let lp0 = lp0();
        let grid: Vec<f64> = (0..=30).map(|k| lp0 - 1.5e-9 + k as f64 * 0.1e-9).collect();
        let pts = detuning_scan(&m, &spec, &grid).unwrap();
        for p in &pts {
            if p.pump_wavelength > lp0 + 1e-15 {
                assert_eq!(p.detectable_fraction, 0.0);
                assert_eq!(p.predicted_car_measured, 1.0);
            }
        }
        // far below degeneracy the emission has left the filters
        assert_eq!(pts[0].detectable_fraction, 0.0);
        assert!(pts.iter().any(|p| p.pump_wavelength < lp0 - 0.5e-9 && p.detectable_fraction > 0.0));
        assert!(detuning_scan(&m, &spec, &[lp0, lp0 - 1e-9]).is_err());
        assert!(detuning_scan(&m, &spec, &[]).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn square_root_scaling(d in 1e-13f64..5e-9, k in 1.0f64..8.0) {
            let m = model();
            let a = signal_shift(&m, -d).unwrap();
            let b = signal_shift(&m, -d * k * k).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-12 * b);
        }

        #[test]
        fn solutions_are_phase_matched(d in 1e-13f64..5e-9) {
            let m = model();
            let s = solve_detuning(&m, -d).unwrap();
            let r = mismatch(&m, -d, s.signal_shift);
            prop_assert!(r.abs() <= 1e-12 * (m.pump_slope_a * d).abs());
            prop_assert!((s.signal - m.degeneracy_wavelength - s.signal_shift).abs() <= 2.0 * f64::EPSILON * s.signal);
        }

        #[test]
        fn linear_pair_symmetric(d in 0.0f64..5e-9) {
            let m = model();
            let s = solve_detuning(&m, -d).unwrap();
            let sum = s.signal + s.idler;
            prop_assert!((sum - 2.0 * m.degeneracy_wavelength).abs() <= 4.0 * f64::EPSILON * sum);
        }
    }
}
