//! Arrival-time-difference histograms and the coincidence-to-accidental
//! ratio (CAR) estimator: a software time-interval analyzer.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::config::{validate, ExperimentSpec, TiaSpec};
use crate::exec::{map_indexed, Execution};
use crate::rng::derive_seed;
use crate::sim::{run_experiment_with, Picos, SimError, TimeTagStream};
use crate::units::{ps_to_seconds, seconds_to_ps};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("{0} stream is not sorted")]
    Unsorted(&'static str),
    #[error("TIA window is empty or bin width is below 1 ps")]
    InvalidWindow,
    #[error("CAR undefined: histogram has no counts")]
    UndefinedCar,
    #[error("need at least {needed} background bins outside the peak exclusion, have {available}")]
    InsufficientBackground { needed: usize, available: usize },
    #[error("summed-bin count must be odd and at least 1, got {0}")]
    SummedBins(usize),
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("pump powers must be positive and sorted ascending: {0}")]
    Powers(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Counts of `t_b − t_a` over a window starting at `origin`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Histogram {
    pub bin_width: Picos,
    pub origin: Picos,
    pub counts: Vec<u64>,
    pub total_start_events: u64,
}

impl Histogram {
    pub fn empty(tia: &TiaSpec) -> Self {
        Histogram {
            bin_width: tia.bin_width_ps(),
            origin: tia.window_min_ps(),
            counts: vec![0; tia.bin_count()],
            total_start_events: 0,
        }
    }

    pub fn bin_width_seconds(&self) -> f64 {
        ps_to_seconds(self.bin_width)
    }

    pub fn left_edge(&self, bin: usize) -> Picos {
        self.origin + bin as Picos * self.bin_width
    }

    pub fn window_end(&self) -> Picos {
        self.left_edge(self.counts.len())
    }

    pub fn bin_of(&self, dt: Picos) -> Option<usize> {
        if dt < self.origin || dt >= self.window_end() {
            return None;
        }
        Some(((dt - self.origin) / self.bin_width) as usize)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn merge(&mut self, other: &Histogram) {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total_start_events += other.total_start_events;
    }
}

fn check_sorted(s: &TimeTagStream, name: &'static str) -> Result<(), AnalysisError> {
    if s.tags.windows(2).all(|w| w[0] <= w[1]) {
        Ok(())
    } else {
        Err(AnalysisError::Unsorted(name))
    }
}

/// Two-pointer sweep of a slice of start events against all of `b`.
fn sweep(a: &[Picos], b: &[Picos], hist: &mut Histogram) {
    let (origin, end_offset, width) = (hist.origin, hist.window_end(), hist.bin_width);
    let mut lo = match a.first() {
        Some(&t0) => b.partition_point(|&t| t < t0 + origin),
        None => return,
    };
    for &ta in a {
        let start = ta + origin;
        while lo < b.len() && b[lo] < start {
            lo += 1;
        }
        let end = ta + end_offset;
        for &tb in &b[lo..] {
            if tb >= end {
                break;
            }
            hist.counts[((tb - start) / width) as usize] += 1;
        }
    }
    hist.total_start_events += a.len() as u64;
}

/// Start events per work item in the partitioned sweep.
const SWEEP_CHUNK: usize = 1 << 16;

pub fn build_histogram(a: &TimeTagStream, b: &TimeTagStream, tia: &TiaSpec) -> Result<Histogram, AnalysisError> {
    build_histogram_with(a, b, tia, Execution::default())
}

/// Histogram of every `t_b − t_a` inside the TIA window (multi-stop).
///
/// Start events are split into fixed-size chunks, swept independently and
/// merged by addition, so the result does not depend on `exec`.
pub fn build_histogram_with(
    a: &TimeTagStream,
    b: &TimeTagStream,
    tia: &TiaSpec,
    exec: Execution,
) -> Result<Histogram, AnalysisError> {
    check_sorted(a, "start")?;
    check_sorted(b, "stop")?;
    let mut hist = Histogram::empty(tia);
    if hist.bin_width < 1 || hist.counts.is_empty() {
        return Err(AnalysisError::InvalidWindow);
    }
    let chunks: Vec<&[Picos]> = a.tags.chunks(SWEEP_CHUNK).collect();
    let parts = map_indexed(exec, chunks.len(), |k| {
        let mut h = Histogram::empty(tia);
        sweep(chunks[k], &b.tags, &mut h);
        h
    });
    for p in &parts {
        hist.merge(p);
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarOptions {
    /// Seconds; the peak is taken as the bin holding this delay.
    pub peak_hint: Option<f64>,
    /// Bins on each side of the peak left out of the accidental mean.
    pub exclusion_halfwidth: usize,
    /// Odd number of bins, centered on the peak, summed for the multi-bin CAR.
    pub summed_bins: usize,
}

impl Default for CarOptions {
    fn default() -> Self {
        CarOptions {
            peak_hint: None,
            exclusion_halfwidth: 2,
            summed_bins: 3,
        }
    }
}

/// Minimum number of background bins for an accidental estimate.
pub const MIN_BACKGROUND_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummedCar {
    pub bins: usize,
    pub count: u64,
    /// count / (bins × accidental mean)
    pub car: f64,
    pub car_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarEstimate {
    /// Measured convention: peak bin over mean background bin. Reads 1 when
    /// there are no true coincidences.
    pub car: f64,
    pub car_uncertainty: f64,
    /// Formula convention, (peak − accidental) / accidental = car − 1.
    pub true_to_accidental: f64,
    pub peak_bin_index: usize,
    /// Center of the peak bin, seconds.
    pub peak_delay: f64,
    pub peak_count: u64,
    pub accidental_mean: f64,
    pub accidental_stddev: f64,
    pub background_bins: usize,
    pub summed: SummedCar,
}

/// 1σ of `count / (k × mean)` with independent Poisson numerator and
/// background estimated from `n_bg` bins.
fn ratio_sigma(count: u64, k: usize, mean: f64, n_bg: usize) -> f64 {
    if mean <= 0.0 {
        return f64::INFINITY;
    }
    let c = count as f64;
    let k = k as f64;
    let rel_bg = 1.0 / (mean * n_bg as f64);
    // a zero count still carries one count of Poisson uncertainty
    let num_var = c.max(1.0);
    (num_var / (k * mean).powi(2) + (c / (k * mean)).powi(2) * rel_bg).sqrt()
}

pub fn estimate_car(h: &Histogram, opts: &CarOptions) -> Result<CarEstimate, AnalysisError> {
    if opts.summed_bins == 0 || opts.summed_bins.is_multiple_of(2) {
        return Err(AnalysisError::SummedBins(opts.summed_bins));
    }
    let n = h.counts.len();
    let hinted = opts
        .peak_hint
        .and_then(|t| h.bin_of(seconds_to_ps(t)));
    let lo_ex = |p: usize| p.saturating_sub(opts.exclusion_halfwidth);
    let hi_ex = |p: usize| (p + opts.exclusion_halfwidth).min(n.saturating_sub(1));
    // background availability does not depend on where the peak is only
    // when the exclusion fits; check against the actual peak below
    if h.counts.iter().all(|&c| c == 0) {
        return Err(AnalysisError::UndefinedCar);
    }
    let peak = hinted.unwrap_or_else(|| {
        // first maximum wins ties
        let mut best = 0;
        for (i, &c) in h.counts.iter().enumerate() {
            if c > h.counts[best] {
                best = i;
            }
        }
        best
    });
    let (ex_lo, ex_hi) = (lo_ex(peak), hi_ex(peak));
    let background: Vec<f64> = h
        .counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i < ex_lo || i > ex_hi)
        .map(|(_, &c)| c as f64)
        .collect();
    if background.len() < MIN_BACKGROUND_BINS {
        return Err(AnalysisError::InsufficientBackground {
            needed: MIN_BACKGROUND_BINS,
            available: background.len(),
        });
    }
    let n_bg = background.len();
    let mean = background.iter().sum::<f64>() / n_bg as f64;
    let var = background.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n_bg - 1) as f64;
    let peak_count = h.counts[peak];
    let ratio = |count: u64, k: usize| {
        if mean > 0.0 {
            count as f64 / (k as f64 * mean)
        } else {
            f64::INFINITY
        }
    };
    let half = opts.summed_bins / 2;
    let s_lo = peak.saturating_sub(half);
    let s_hi = (peak + half).min(n - 1);
    let k = s_hi - s_lo + 1;
    let summed_count: u64 = h.counts[s_lo..=s_hi].iter().sum();
    let car = ratio(peak_count, 1);
    Ok(CarEstimate {
        car,
        car_uncertainty: ratio_sigma(peak_count, 1, mean, n_bg),
        true_to_accidental: car - 1.0,
        peak_bin_index: peak,
        peak_delay: ps_to_seconds(h.left_edge(peak)) + 0.5 * h.bin_width_seconds(),
        peak_count,
        accidental_mean: mean,
        accidental_stddev: var.sqrt(),
        background_bins: n_bg,
        summed: SummedCar {
            bins: k,
            count: summed_count,
            car: ratio(summed_count, k),
            car_uncertainty: ratio_sigma(summed_count, k, mean, n_bg),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPoint {
    pub power: f64,
    pub singles_signal: usize,
    pub singles_idler: usize,
    /// `None` when the histogram was empty.
    pub estimate: Option<CarEstimate>,
}

/// Simulates and analyzes one run per pump power, each with its own seed
/// derived from `seed` and the point index.
///
/// When `opts.peak_hint` is unset the configured arm delay difference is
/// used, so a peakless histogram is not read at a noise maximum.
pub fn car_vs_power(
    spec: &ExperimentSpec,
    powers: &[f64],
    seed: u64,
    opts: &CarOptions,
    exec: Execution,
) -> Result<Vec<PowerPoint>, SweepError> {
    if powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(SweepError::Powers("non-positive power".into()));
    }
    if powers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SweepError::Powers("not strictly ascending".into()));
    }
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(SimError::Invalid(violations).into());
    }
    let opts = CarOptions {
        peak_hint: opts.peak_hint.or(Some(spec.expected_peak_delay())),
        ..*opts
    };
    let mut out = Vec::with_capacity(powers.len());
    for (i, &power) in powers.iter().enumerate() {
        let mut run = spec.clone();
        run.source.pump_power = power;
        let (a, b) = run_experiment_with(&run, derive_seed(seed, i as u64), exec)?;
        let hist = build_histogram_with(&a, &b, &run.tia, exec).expect("simulated streams are sorted");
        let estimate = match estimate_car(&hist, &opts) {
            Ok(e) => Some(e),
            Err(AnalysisError::UndefinedCar) => None,
            Err(e) => return Err(SweepError::Powers(e.to_string())),
        };
        out.push(PowerPoint {
            power,
            singles_signal: a.len(),
            singles_idler: b.len(),
            estimate,
        });
    }
    Ok(out)
}

pub fn write_histogram_csv<W: Write>(h: &Histogram, mut w: W) -> io::Result<()> {
    writeln!(w, "bin_left_edge_s,count")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(w, "{:.12},{c}", ps_to_seconds(h.left_edge(i)))?;
    }
    w.flush()
}
