use thiserror::Error;

use super::{apply_dead_time, detect_segment, generate_pairs_in, propagate_arm, Channel, Picos, TimeTagStream};
use crate::config::{validate, ExperimentSpec, Violation};
use crate::exec::{map_indexed, Execution};
use crate::rng::{RngStream, Stage};
use crate::units::seconds_to_ps;

/// Expected number of generated events per time segment.
pub const SEGMENT_TARGET_EVENTS: f64 = (1u64 << 20) as f64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Segment length in ps. Depends only on the spec, never on the thread
/// count, so the RNG substreams line up across execution modes.
fn segment_length(spec: &ExperimentSpec, total: Picos) -> Picos {
    let rate = spec.source.pair_rate() + spec.det_signal.dark_count_rate + spec.det_idler.dark_count_rate;
    if !(rate > 0.0) {
        return total.max(1);
    }
    let len = seconds_to_ps((SEGMENT_TARGET_EVENTS / rate).max(1e-6));
    len.clamp(1, total.max(1))
}

/// Per-channel jitter: the detector's own plus half the TIA variance, so
/// that the TIA term enters the arrival-time difference once.
fn channel_jitter(det_sigma: f64, tia_sigma: f64) -> f64 {
    (det_sigma * det_sigma + 0.5 * tia_sigma * tia_sigma).sqrt()
}

pub fn run_experiment(spec: &ExperimentSpec, seed: u64) -> Result<(TimeTagStream, TimeTagStream), SimError> {
    run_experiment_with(spec, seed, Execution::default())
}

/// Full chain: pairs → both arms → both detectors.
///
/// The run is cut into chronological segments, each simulated with its own
/// substreams (one per stage); raw clicks are merged, sorted, and passed
/// through the dead-time filter. Output is identical for every
/// [`Execution`].
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    seed: u64,
    exec: Execution,
) -> Result<(TimeTagStream, TimeTagStream), SimError> {
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(SimError::Invalid(violations));
    }
    let total = seconds_to_ps(spec.integration_time);
    if total <= 0 {
        return Ok((
            TimeTagStream::new(Channel::Signal, Vec::new()),
            TimeTagStream::new(Channel::Idler, Vec::new()),
        ));
    }
    let seg = segment_length(spec, total);
    let n_seg = ((total + seg - 1) / seg) as usize;
    let gate = spec.polarization_gate();
    let sigma_s = channel_jitter(spec.det_signal.timing_jitter_sigma, spec.tia.extra_jitter_sigma);
    let sigma_i = channel_jitter(spec.det_idler.timing_jitter_sigma, spec.tia.extra_jitter_sigma);

    let segments = map_indexed(exec, n_seg, |k| {
        let start = k as Picos * seg;
        let end = (start + seg).min(total);
        let k = k as u64;
        let rng = |stage| RngStream::stage(seed, stage, k).rng();
        let pairs = generate_pairs_in(&spec.source, start, end, &mut rng(Stage::PairSource));
        let sig = propagate_arm(&pairs, Channel::Signal, &spec.arm_signal, gate, &mut rng(Stage::SignalArm));
        let idl = propagate_arm(&pairs, Channel::Idler, &spec.arm_idler, gate, &mut rng(Stage::IdlerArm));
        drop(pairs);
        let sig = detect_segment(
            &sig,
            &spec.det_signal,
            sigma_s,
            start,
            end,
            total,
            &mut rng(Stage::SignalClicks),
            &mut rng(Stage::SignalDark),
        );
        let idl = detect_segment(
            &idl,
            &spec.det_idler,
            sigma_i,
            start,
            end,
            total,
            &mut rng(Stage::IdlerClicks),
            &mut rng(Stage::IdlerDark),
        );
        (sig, idl)
    });

    let (mut raw_s, mut raw_i) = (Vec::new(), Vec::new());
    for (s, i) in segments {
        raw_s.extend(s);
        raw_i.extend(i);
    }
    Ok((
        TimeTagStream::new(Channel::Signal, apply_dead_time(raw_s, spec.det_signal.dead_time)),
        TimeTagStream::new(Channel::Idler, apply_dead_time(raw_i, spec.det_idler.dead_time)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_spec;

    fn short_spec(t: f64) -> ExperimentSpec {
        let mut spec = reference_spec();
        spec.integration_time = t;
        spec
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let spec = short_spec(0.5);
        let a = run_experiment_with(&spec, 11, Execution::Sequential).unwrap();
        let b = run_experiment_with(&spec, 11, Execution::Parallel).unwrap();
        let c = run_experiment_with(&spec, 11, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.0.is_strictly_increasing() && a.1.is_strictly_increasing());
        let d = run_experiment_with(&spec, 12, Execution::Sequential).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = short_spec(0.1);
        spec.det_idler.quantum_efficiency = -0.1;
        assert!(matches!(run_experiment(&spec, 0), Err(SimError::Invalid(_))));
    }

    #[test]
    fn vanishing_duration_is_empty() {
        let (s, i) = run_experiment(&short_spec(1e-9), 5).unwrap();
        assert!(s.is_empty() && i.is_empty());
    }

    #[test]
    fn lossless_chain_gives_identical_streams() {
        let mut spec = short_spec(1e-3);
        for arm in [&mut spec.arm_signal, &mut spec.arm_idler] {
            arm.transmission = 1.0;
            arm.path_delay = 0.0;
            arm.passband = crate::filters::Band::nm(1.0, 1e5);
        }
        for det in [&mut spec.det_signal, &mut spec.det_idler] {
            det.quantum_efficiency = 1.0;
            det.dark_count_rate = 0.0;
            det.timing_jitter_sigma = 0.0;
        }
        spec.tia.extra_jitter_sigma = 0.0;
        let (s, i) = run_experiment(&spec, 3).unwrap();
        assert!(s.len() > 1000);
        // pairs closer than 1 ps collapse, identically on both sides
        assert_eq!(s.tags, i.tags);
    }
}
