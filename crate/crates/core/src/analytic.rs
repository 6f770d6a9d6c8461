//! Closed-form rate model: singles, true and accidental coincidences, CAR,
//! the optimal pump flux, and α extraction from a CAR-vs-power curve.

use serde::Serialize;
use thiserror::Error;

use crate::config::ExperimentSpec;
use crate::filters::{conjugate_band, Band};
use crate::sim::{power_for_flux, pump_photon_flux};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid rate-model parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("CAR undefined: no clicks (αnl + d = 0)")]
    Undefined,
}

/// Symbols of the closed form: α pairs per pump photon, n pump photons per
/// second, l per-photon detection probability, d dark counts per second,
/// r bin width in seconds, f coincidence overlap fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateModelParams {
    pub alpha: f64,
    pub n: f64,
    pub l: f64,
    pub d: f64,
    pub r: f64,
    pub f: f64,
}

impl RateModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("alpha", self.alpha, f64::INFINITY),
            ("n", self.n, f64::INFINITY),
            ("l", self.l, 1.0),
            ("d", self.d, f64::INFINITY),
            ("r", self.r, f64::INFINITY),
            ("f", self.f, 1.0),
        ];
        for (name, value, max) in fields {
            if !(value.is_finite() && value >= 0.0 && value <= max) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Generated pairs per second, αn.
    pub fn brightness(&self) -> f64 {
        self.alpha * self.n
    }

    pub fn with_n(self, n: f64) -> Self {
        RateModelParams { n, ..self }
    }
}

/// Clicks per second on each detector: αnl + d.
pub fn singles_rate(p: &RateModelParams) -> f64 {
    p.alpha * p.n * p.l + p.d
}

/// f·αn·l²
pub fn true_coincidence_rate(p: &RateModelParams) -> f64 {
    p.f * p.alpha * p.n * p.l * p.l
}

/// (αnl + d)²·R
pub fn accidental_rate_per_bin(p: &RateModelParams) -> f64 {
    let s = singles_rate(p);
    s * s * p.r
}

/// f·αnl² / ((αnl + d)²·R). Counts true coincidences over accidentals,
/// so a peak-over-background estimate reads this plus one.
pub fn car_closed_form(p: &RateModelParams) -> Result<f64, ModelError> {
    p.validate()?;
    let acc = accidental_rate_per_bin(p);
    if singles_rate(p) <= 0.0 || acc <= 0.0 {
        return Err(ModelError::Undefined);
    }
    Ok(true_coincidence_rate(p) / acc)
}

/// Arms with their own detection probability and dark rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymmetricParams {
    pub alpha: f64,
    pub n: f64,
    pub l_signal: f64,
    pub l_idler: f64,
    pub d_signal: f64,
    pub d_idler: f64,
    pub r: f64,
    pub f: f64,
}

/// f·αn·l_s·l_i / ((αn·l_s + d_s)(αn·l_i + d_i)·R)
pub fn car_asymmetric(p: &AsymmetricParams) -> Result<f64, ModelError> {
    let an = p.alpha * p.n;
    let s = an * p.l_signal + p.d_signal;
    let i = an * p.l_idler + p.d_idler;
    let acc = s * i * p.r;
    if !(acc > 0.0) {
        return Err(ModelError::Undefined);
    }
    Ok(p.f * an * p.l_signal * p.l_idler / acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalPoint {
    pub n_star: f64,
    pub car_max: f64,
}

/// Maximum of CAR over n (the `n` field is ignored): αn*l = d, where
/// CAR = f·l / (4dR).
pub fn optimal_flux(p: &RateModelParams) -> Result<OptimalPoint, ModelError> {
    p.validate()?;
    for (name, value) in [("alpha", p.alpha), ("l", p.l), ("d", p.d), ("r", p.r), ("f", p.f)] {
        if value <= 0.0 {
            return Err(ModelError::InvalidParameter { name, value });
        }
    }
    Ok(OptimalPoint {
        n_star: p.d / (p.alpha * p.l),
        car_max: p.f * p.l / (4.0 * p.d * p.r),
    })
}

/// Rates implied by an experiment spec through the spectral source model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedRates {
    /// αn, pairs per second per reference bandwidth.
    pub brightness: f64,
    pub pair_rate: f64,
    pub detection_prob_signal: f64,
    pub detection_prob_idler: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub true_coincidence_rate: f64,
    pub accidental_rate_per_bin: f64,
    /// Coincidence rate over αn·l_s·l_i; the f of the closed form.
    pub coincidence_fraction: f64,
    /// Formula convention; `None` when no clicks are expected.
    pub car_formula: Option<f64>,
    /// Width of the arrival-time-difference distribution of true pairs.
    pub delta_t_sigma: f64,
}

fn fraction_in(emission: &Band, band: Option<Band>) -> f64 {
    band.and_then(|b| emission.intersection(&b))
        .map_or(0.0, |b| b.width() / emission.width())
}

pub fn expected_rates(spec: &ExperimentSpec) -> ExpectedRates {
    let src = &spec.source;
    let emission = src.emission_band();
    let gate = spec.polarization_gate();
    let l_s = spec.arm_signal.transmission * spec.det_signal.quantum_efficiency * gate;
    let l_i = spec.arm_idler.transmission * spec.det_idler.quantum_efficiency * gate;
    // signal wavelengths whose partners reach the idler filter
    let idler_pre = conjugate_band(&spec.arm_idler.passband, src.degeneracy_wavelength, src.conjugation).ok();
    let both = idler_pre.and_then(|c| c.intersection(&spec.arm_signal.passband));
    let pair_rate = src.pair_rate();
    let f_s = fraction_in(&emission, Some(spec.arm_signal.passband));
    let f_i = fraction_in(&emission, idler_pre);
    let f_c = fraction_in(&emission, both);
    let singles_signal = pair_rate * f_s * l_s + spec.det_signal.dark_count_rate;
    let singles_idler = pair_rate * f_i * l_i + spec.det_idler.dark_count_rate;
    let true_rate = pair_rate * f_c * l_s * l_i;
    let acc = singles_signal * singles_idler * spec.tia.bin_width;
    let brightness = src.brightness();
    let norm = brightness * l_s * l_i;
    let t = spec.tia.extra_jitter_sigma;
    ExpectedRates {
        brightness,
        pair_rate,
        detection_prob_signal: l_s,
        detection_prob_idler: l_i,
        singles_signal,
        singles_idler,
        true_coincidence_rate: true_rate,
        accidental_rate_per_bin: acc,
        coincidence_fraction: if norm > 0.0 { true_rate / norm } else { 0.0 },
        car_formula: (acc > 0.0).then(|| true_rate / acc),
        delta_t_sigma: (spec.det_signal.timing_jitter_sigma.powi(2)
            + spec.det_idler.timing_jitter_sigma.powi(2)
            + t * t)
            .sqrt(),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {index}: {message}")]
    InvalidPoint { index: usize, message: String },
    #[error("CAR has no interior maximum over the supplied powers (peak at the {0} end)")]
    NoInteriorMaximum(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarPoint {
    pub power: f64,
    pub car: f64,
    pub sigma: Option<f64>,
}

/// Which CAR the points carry: the closed form, or peak-over-background
/// (closed form + 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum CarConvention {
    Formula,
    #[default]
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitFixed {
    pub l: f64,
    pub d: f64,
    pub r: f64,
    pub f: f64,
    pub pump_wavelength: f64,
    pub convention: CarConvention,
    /// Pump power at which the fitted brightness αn is reported.
    pub reference_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaFit {
    /// Peak matching: α = d / (n_max·l).
    pub alpha: f64,
    /// From the per-point σ, when every point in the vertex carries one.
    pub alpha_uncertainty: Option<f64>,
    pub peak_power: f64,
    pub peak_flux: f64,
    /// Weighted least squares of the closed form over every point.
    pub least_squares_alpha: f64,
    pub least_squares_chi2: f64,
    pub reference_power: f64,
    pub brightness_at_reference: f64,
}

/// Abscissa of the vertex of the parabola through three points.
fn vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let (a, b) = (x[1] - x[0], x[1] - x[2]);
    let (ya, yb) = (y[1] - y[2], y[1] - y[0]);
    let den = a * ya - b * yb;
    if den == 0.0 {
        return None;
    }
    let v = x[1] - 0.5 * (a * a * ya - b * b * yb) / den;
    v.is_finite().then_some(v)
}

fn model_car(fixed: &FitFixed, alpha: f64, power: f64) -> f64 {
    let p = RateModelParams {
        alpha,
        n: pump_photon_flux(power, fixed.pump_wavelength),
        l: fixed.l,
        d: fixed.d,
        r: fixed.r,
        f: fixed.f,
    };
    let car = car_closed_form(&p).unwrap_or(0.0);
    match fixed.convention {
        CarConvention::Formula => car,
        CarConvention::Measured => car + 1.0,
    }
}

/// Golden-section minimum of a unimodal function on [lo, hi].
fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Extracts α by matching the CAR maximum to αn*l = d.
///
/// The peak is the vertex of the parabola through the highest point and its
/// two neighbours in ln(power), where the closed form is symmetric about its
/// maximum. Points are sorted by power first.
pub fn fit_alpha(points: &[CarPoint], fixed: &FitFixed) -> Result<AlphaFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    for (index, p) in points.iter().enumerate() {
        let bad = |message: &str| FitError::InvalidPoint { index, message: message.into() };
        if !(p.power.is_finite() && p.power > 0.0) {
            return Err(bad("power must be positive"));
        }
        if !p.car.is_finite() {
            return Err(bad("CAR must be finite"));
        }
        if p.sigma.is_some_and(|s| !(s.is_finite() && s > 0.0)) {
            return Err(bad("sigma must be positive"));
        }
    }
    for (name, value) in [("l", fixed.l), ("d", fixed.d), ("r", fixed.r), ("f", fixed.f), ("pump_wavelength", fixed.pump_wavelength)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(ModelError::InvalidParameter { name, value }.into());
        }
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.power.total_cmp(&b.power));
    let mut best = 0;
    for (i, p) in pts.iter().enumerate() {
        if p.car > pts[best].car {
            best = i;
        }
    }
    if best == 0 {
        return Err(FitError::NoInteriorMaximum("low"));
    }
    if best == pts.len() - 1 {
        return Err(FitError::NoInteriorMaximum("high"));
    }
    let trio = [pts[best - 1], pts[best], pts[best + 1]];
    let x = trio.map(|p| p.power.ln());
    let y = trio.map(|p| p.car);
    let xv = vertex(x, y).ok_or(FitError::NoInteriorMaximum("flat"))?;
    let peak_power = xv.exp();
    let peak_flux = pump_photon_flux(peak_power, fixed.pump_wavelength);
    let alpha = fixed.d / (peak_flux * fixed.l);

    // α ∝ exp(−x_v), so σ_α = α·σ_xv; ∂x_v/∂y_j by central differences
    let alpha_uncertainty = trio.iter().map(|p| p.sigma).collect::<Option<Vec<f64>>>().and_then(|sig| {
        let mut var = 0.0;
        for j in 0..3 {
            let h = 1e-6 * sig[j];
            let (mut up, mut dn) = (y, y);
            up[j] += h;
            dn[j] -= h;
            let dx = (vertex(x, up)? - vertex(x, dn)?) / (2.0 * h);
            var += (dx * sig[j]).powi(2);
        }
        Some(alpha * var.sqrt())
    });

    let chi2 = |ln_alpha: f64| -> f64 {
        let a = ln_alpha.exp();
        pts.iter()
            .map(|p| {
                let r = p.car - model_car(fixed, a, p.power);
                let w = p.sigma.map_or(1.0, |s| 1.0 / (s * s));
                w * r * r
            })
            .sum()
    };
    // coarse grid to land in the right basin, then refine
    let center = alpha.ln();
    let steps = 400;
    let span = 6.0;
    let mut grid_best = (f64::INFINITY, center);
    for k in 0..=steps {
        let la = center - span + 2.0 * span * k as f64 / steps as f64;
        let c = chi2(la);
        if c < grid_best.0 {
            grid_best = (c, la);
        }
    }
    let dx = 2.0 * span / steps as f64;
    let ls = golden_min(grid_best.1 - dx, grid_best.1 + dx, chi2);

    Ok(AlphaFit {
        alpha,
        alpha_uncertainty,
        peak_power,
        peak_flux,
        least_squares_alpha: ls.exp(),
        least_squares_chi2: chi2(ls),
        reference_power: fixed.reference_power,
        brightness_at_reference: alpha * pump_photon_flux(fixed.reference_power, fixed.pump_wavelength),
    })
}

/// Pump power at the CAR maximum for the given parameters.
pub fn optimal_power(p: &RateModelParams, pump_wavelength: f64) -> Result<f64, ModelError> {
    Ok(power_for_flux(optimal_flux(p)?.n_star, pump_wavelength))
}
