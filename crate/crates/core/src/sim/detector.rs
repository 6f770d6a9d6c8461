use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{Arrival, Channel, Picos, TimeTagStream};
use crate::config::DetectorSpec;
use crate::units::seconds_to_ps;

/// Appends photon clicks: each arrival is kept with probability
/// `quantum_efficiency` and shifted by Gaussian jitter of standard deviation
/// `jitter_sigma` (seconds). Clicks outside `[0, acquisition_end)` are lost.
pub fn photon_clicks<R: Rng + ?Sized>(
    arrivals: &[Arrival],
    quantum_efficiency: f64,
    jitter_sigma: f64,
    acquisition_end: Picos,
    rng: &mut R,
    out: &mut Vec<Picos>,
) {
    let sigma_ps = jitter_sigma * 1e12;
    for a in arrivals {
        if rng.random::<f64>() >= quantum_efficiency {
            continue;
        }
        let t = if sigma_ps > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            a.time + (z * sigma_ps).round() as Picos
        } else {
            a.time
        };
        if (0..acquisition_end).contains(&t) {
            out.push(t);
        }
    }
}

/// Appends a Poisson process of dark clicks at `rate` over `[start, end)`.
pub fn dark_clicks<R: Rng + ?Sized>(rate: f64, start: Picos, end: Picos, rng: &mut R, out: &mut Vec<Picos>) {
    if !(rate > 0.0) || end <= start {
        return;
    }
    let span_s = (end - start) as f64 * 1e-12;
    let mut t = 0.0f64;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap / rate;
        if t >= span_s {
            break;
        }
        let tag = start + (t * 1e12) as Picos;
        if tag >= end {
            break;
        }
        out.push(tag);
    }
}

/// Raw clicks for one time segment `[start, end)`, unsorted and before
/// dead time.
#[allow(clippy::too_many_arguments)]
pub fn detect_segment<R: Rng + ?Sized, D: Rng + ?Sized>(
    arrivals: &[Arrival],
    det: &DetectorSpec,
    jitter_sigma: f64,
    start: Picos,
    end: Picos,
    acquisition_end: Picos,
    click_rng: &mut R,
    dark_rng: &mut D,
) -> Vec<Picos> {
    let mut out = Vec::with_capacity(arrivals.len() / 2 + 16);
    photon_clicks(arrivals, det.quantum_efficiency, jitter_sigma, acquisition_end, click_rng, &mut out);
    dark_clicks(det.dark_count_rate, start, end, dark_rng, &mut out);
    out
}

/// Non-paralyzable dead time carried across chronological chunks.
#[derive(Debug, Clone)]
pub struct DeadTimeFilter {
    dead: Picos,
    last: Option<Picos>,
}

impl DeadTimeFilter {
    pub fn new(dead_time: f64) -> Self {
        DeadTimeFilter {
            // at least 1 ps so accepted tags are strictly increasing
            dead: seconds_to_ps(dead_time).max(1),
            last: None,
        }
    }

    /// Filters one sorted chunk, which must not start before the previous one ended.
    pub fn push_sorted(&mut self, chunk: &[Picos], out: &mut Vec<Picos>) {
        for &t in chunk {
            match self.last {
                Some(prev) if t - prev < self.dead => {}
                _ => {
                    out.push(t);
                    self.last = Some(t);
                }
            }
        }
    }
}

/// Sorts raw clicks and applies dead time.
pub fn apply_dead_time(mut raw: Vec<Picos>, dead_time: f64) -> Vec<Picos> {
    raw.sort_unstable();
    let mut out = Vec::with_capacity(raw.len());
    DeadTimeFilter::new(dead_time).push_sorted(&raw, &mut out);
    out
}

/// Whole-run detector response over `[0, duration)` seconds.
///
/// `tia_extra_jitter` is added in quadrature to the detector's own jitter.
pub fn detect<R: Rng + ?Sized>(
    arrivals: &[Arrival],
    channel: Channel,
    det: &DetectorSpec,
    tia_extra_jitter: f64,
    duration: f64,
    rng: &mut R,
) -> TimeTagStream {
    let end = seconds_to_ps(duration);
    let sigma = det.timing_jitter_sigma.hypot(tia_extra_jitter);
    let mut raw = Vec::new();
    photon_clicks(arrivals, det.quantum_efficiency, sigma, end, rng, &mut raw);
    dark_clicks(det.dark_count_rate, 0, end, rng, &mut raw);
    TimeTagStream::new(channel, apply_dead_time(raw, det.dead_time))
}
