//! Experiment description: domain types, invariant checks, and the TOML
//! configuration schema.
//!
//! Sections: `source`, `arm_signal`, `arm_idler`, `detector_signal`,
//! `detector_idler`, `tia`, `run`, and an optional `phase_matching`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::filters::Band;
use crate::units::{self, Dimension};

/// CODATA 2018 exact values.
pub struct PhysicalConstants;

impl PhysicalConstants {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    TE,
    TM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationMode {
    /// λ' = 2λ_deg − λ; the arithmetic used for the band-overlap factor.
    #[default]
    Linear,
    /// 1/λ' = 2/λ_deg − 1/λ; exact energy conservation.
    ExactFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSpec {
    pub pump_power: f64,
    pub pump_wavelength: f64,
    pub conversion_efficiency_alpha: f64,
    pub degeneracy_wavelength: f64,
    pub degenerate: bool,
    /// Center of the flat emission band of the signal photon.
    pub emission_center: f64,
    /// Full width of the signal emission band.
    pub emission_bandwidth: f64,
    /// Spectral width of signal emission over which `alpha` is quoted.
    /// The generated pair rate is αn · emission_bandwidth / this.
    pub alpha_reference_bandwidth: f64,
    pub conjugation: ConjugationMode,
}

impl SourceSpec {
    pub fn emission_band(&self) -> Band {
        Band {
            low: self.emission_center - 0.5 * self.emission_bandwidth,
            high: self.emission_center + 0.5 * self.emission_bandwidth,
        }
    }

    /// Pump photons per second.
    pub fn pump_flux(&self) -> f64 {
        crate::sim::pump_photon_flux(self.pump_power, self.pump_wavelength)
    }

    /// αn: pairs per second per reference bandwidth.
    pub fn brightness(&self) -> f64 {
        self.conversion_efficiency_alpha * self.pump_flux()
    }

    /// Total rate of generated pairs over the emission band.
    pub fn pair_rate(&self) -> f64 {
        self.brightness() * self.emission_bandwidth / self.alpha_reference_bandwidth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSpec {
    /// Per-photon survival excluding detector efficiency.
    pub transmission: f64,
    pub passband: Band,
    pub path_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSpec {
    pub quantum_efficiency: f64,
    pub dark_count_rate: f64,
    pub timing_jitter_sigma: f64,
    /// Non-paralyzable; 0 disables.
    pub dead_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiaSpec {
    pub bin_width: f64,
    pub window_min: f64,
    pub window_max: f64,
    /// Timing-electronics contribution to the arrival-time difference.
    pub extra_jitter_sigma: f64,
}

impl TiaSpec {
    pub fn bin_width_ps(&self) -> i64 {
        units::seconds_to_ps(self.bin_width)
    }

    pub fn window_min_ps(&self) -> i64 {
        units::seconds_to_ps(self.window_min)
    }

    /// Bin count after aligning the upper edge to a whole number of bins.
    pub fn bin_count(&self) -> usize {
        let span = units::seconds_to_ps(self.window_max) - self.window_min_ps();
        let w = self.bin_width_ps();
        if span <= 0 || w <= 0 {
            return 0;
        }
        ((span + w - 1) / w) as usize
    }
}

/// Raw phase-matching parameters from the `phase_matching` section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMatchingSpec {
    pub degenerate_pump_wavelength: f64,
    pub anchor_pump_detuning: f64,
    pub anchor_signal_shift: f64,
    /// Half-width (in signal detuning) of emission at degeneracy; sets the curvature.
    pub emission_halfwidth: f64,
    pub interaction_length: f64,
    pub qpm_period: f64,
    pub qpm_order: u32,
    /// Width of the emission window evaluated around each tuned center.
    pub scan_emission_bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub source: SourceSpec,
    pub arm_signal: ArmSpec,
    pub arm_idler: ArmSpec,
    pub det_signal: DetectorSpec,
    pub det_idler: DetectorSpec,
    pub tia: TiaSpec,
    pub integration_time: f64,
    pub pair_polarization: Polarization,
    pub analyzer_polarization: Option<Polarization>,
    pub phase_matching: Option<PhaseMatchingSpec>,
}

impl ExperimentSpec {
    /// 0 when the analyzer blocks the pair polarization.
    pub fn polarization_gate(&self) -> f64 {
        match self.analyzer_polarization {
            Some(p) if p != self.pair_polarization => 0.0,
            _ => 1.0,
        }
    }

    /// Idler-minus-signal path delay: where the true-coincidence peak sits.
    pub fn expected_peak_delay(&self) -> f64 {
        self.arm_idler.path_delay - self.arm_signal.path_delay
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("configuration schema errors:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
    #[error("invalid experiment:\n  {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n  "))]
    Validation(Vec<Violation>),
    #[error("bad override {0:?}: expected section.key=value")]
    Override(String),
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, path: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                path: path.to_string(),
                message: message.into(),
            });
        }
    }

    fn probability(&mut self, v: f64, path: &str) {
        self.check((0.0..=1.0).contains(&v), path, format!("must lie in [0, 1], got {v}"));
    }

    fn non_negative(&mut self, v: f64, path: &str) {
        self.check(v.is_finite() && v >= 0.0, path, format!("must be finite and >= 0, got {v}"));
    }

    fn positive(&mut self, v: f64, path: &str) {
        self.check(v.is_finite() && v > 0.0, path, format!("must be finite and > 0, got {v}"));
    }

    fn band(&mut self, b: &Band, path: &str) {
        self.check(
            b.low.is_finite() && b.high.is_finite() && b.low < b.high,
            path,
            format!("band width must be positive (low {} < high {})", b.low, b.high),
        );
        self.check(b.low > 0.0, path, "band edges must be positive wavelengths");
    }
}

/// Every invariant violation of `spec`; empty means valid.
pub fn validate(spec: &ExperimentSpec) -> Vec<Violation> {
    let mut c = Checker(Vec::new());
    let s = &spec.source;
    c.non_negative(s.pump_power, "source.pump_power");
    c.positive(s.pump_wavelength, "source.pump_wavelength");
    c.non_negative(s.conversion_efficiency_alpha, "source.alpha");
    c.positive(s.degeneracy_wavelength, "source.degeneracy_wavelength");
    if s.degenerate {
        let target = 2.0 * s.pump_wavelength;
        c.check(
            (s.degeneracy_wavelength - target).abs() <= 1e-9 * target,
            "source.degeneracy_wavelength",
            format!("degenerate source requires degeneracy_wavelength = 2 x pump_wavelength ({target})"),
        );
    }
    c.positive(s.emission_bandwidth, "source.emission_bandwidth");
    c.positive(s.alpha_reference_bandwidth, "source.alpha_reference_bandwidth");
    c.positive(s.emission_center, "source.emission_center");
    let emission = s.emission_band();
    if s.emission_bandwidth > 0.0 {
        c.check(emission.low > 0.0, "source.emission_bandwidth", "emission band extends to non-positive wavelength");
        if s.conjugation == ConjugationMode::ExactFrequency {
            c.check(
                emission.low > 0.5 * s.degeneracy_wavelength,
                "source.emission_bandwidth",
                "emission band has no finite frequency conjugate",
            );
        }
    }

    for (name, arm) in [("arm_signal", &spec.arm_signal), ("arm_idler", &spec.arm_idler)] {
        c.probability(arm.transmission, &format!("{name}.transmission"));
        c.band(&arm.passband, &format!("{name}.passband"));
        c.non_negative(arm.path_delay, &format!("{name}.path_delay"));
    }
    for (name, det) in [("detector_signal", &spec.det_signal), ("detector_idler", &spec.det_idler)] {
        c.probability(det.quantum_efficiency, &format!("{name}.quantum_efficiency"));
        c.non_negative(det.dark_count_rate, &format!("{name}.dark_count_rate"));
        c.non_negative(det.timing_jitter_sigma, &format!("{name}.timing_jitter"));
        c.non_negative(det.dead_time, &format!("{name}.dead_time"));
    }

    let t = &spec.tia;
    c.check(
        t.bin_width.is_finite() && t.bin_width_ps() >= 1,
        "tia.bin_width",
        format!("must be at least 1 ps, got {}", t.bin_width),
    );
    c.check(
        t.window_min.is_finite() && t.window_max.is_finite() && t.window_min < t.window_max,
        "tia.window",
        format!("window_min ({}) must be < window_max ({})", t.window_min, t.window_max),
    );
    c.non_negative(t.extra_jitter_sigma, "tia.extra_jitter");
    c.positive(spec.integration_time, "run.integration_time");

    if let Some(pm) = &spec.phase_matching {
        c.positive(pm.degenerate_pump_wavelength, "phase_matching.degenerate_pump_wavelength");
        c.check(
            pm.anchor_pump_detuning != 0.0 && pm.anchor_pump_detuning.is_finite(),
            "phase_matching.anchor_pump_detuning",
            "must be nonzero",
        );
        c.check(
            pm.anchor_signal_shift != 0.0 && pm.anchor_signal_shift.is_finite(),
            "phase_matching.anchor_signal_shift",
            "must be nonzero",
        );
        c.positive(pm.emission_halfwidth, "phase_matching.emission_halfwidth");
        c.positive(pm.interaction_length, "phase_matching.interaction_length");
        c.positive(pm.qpm_period, "phase_matching.qpm_period");
        c.check(pm.qpm_order >= 1, "phase_matching.qpm_order", "must be >= 1");
        c.positive(pm.scan_emission_bandwidth, "phase_matching.scan_emission_bandwidth");
    }
    c.0
}

// ---------------------------------------------------------------------------
// Loading

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: BTreeSet<&'static str>,
    issues: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn open(root: &'a Table, name: &'static str, required: bool, issues: &'a mut Vec<String>) -> Self {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                issues.push(format!("[{name}] must be a table"));
                None
            }
            None => {
                if required {
                    issues.push(format!("missing section [{name}]"));
                }
                None
            }
        };
        Section {
            name,
            table,
            seen: BTreeSet::new(),
            issues,
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.insert(key);
        self.table.and_then(|t| t.get(key))
    }

    fn report_missing(&mut self, key: &str) {
        self.issues.push(format!("missing required key {}.{}", self.name, key));
    }

    fn quantity_opt(&mut self, key: &'static str, dim: Dimension) -> Option<f64> {
        let v = self.raw(key)?;
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            Value::String(s) => match units::parse_quantity(s, dim) {
                Ok(x) => Some(x),
                Err(e) => {
                    self.issues.push(format!("{}.{}: {e}", self.name, key));
                    None
                }
            },
            _ => {
                self.issues.push(format!("{}.{}: expected a number or a unit string", self.name, key));
                None
            }
        }
    }

    fn quantity(&mut self, key: &'static str, dim: Dimension) -> f64 {
        if self.table.is_none_or(|t| !t.contains_key(key)) {
            self.report_missing(key);
        }
        self.quantity_opt(key, dim).unwrap_or(f64::NAN)
    }

    fn string_opt(&mut self, key: &'static str) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            _ => {
                self.issues.push(format!("{}.{}: expected a string", self.name, key));
                None
            }
        }
    }

    fn bool_opt(&mut self, key: &'static str) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.issues.push(format!("{}.{}: expected true or false", self.name, key));
                None
            }
        }
    }

    fn integer_opt(&mut self, key: &'static str) -> Option<i64> {
        match self.raw(key)? {
            Value::Integer(i) => Some(*i),
            _ => {
                self.issues.push(format!("{}.{}: expected an integer", self.name, key));
                None
            }
        }
    }

    /// Linear transmission from `transmission` or from `loss` (one dB value
    /// or a list of dB values that add up).
    fn transmission(&mut self) -> f64 {
        let t = self.quantity_opt("transmission", Dimension::Dimensionless);
        let loss = self.raw("loss").map(|v| self.loss_value(v));
        match (t, loss) {
            (Some(t), None) => t,
            (None, Some(Some(l))) => l,
            (None, Some(None)) => f64::NAN,
            (Some(_), Some(_)) => {
                self.issues.push(format!("{}: give either transmission or loss, not both", self.name));
                f64::NAN
            }
            (None, None) => {
                self.report_missing("transmission");
                f64::NAN
            }
        }
    }

    fn loss_value(&mut self, v: &Value) -> Option<f64> {
        let one = |v: &Value| -> Result<f64, String> {
            match v {
                Value::Float(f) => Ok(units::db_to_transmission(*f)),
                Value::Integer(i) => Ok(units::db_to_transmission(*i as f64)),
                Value::String(s) => units::parse_loss_db(s).map_err(|e| e.to_string()),
                _ => Err("expected a dB value".into()),
            }
        };
        let result = match v {
            Value::Array(items) => items.iter().try_fold(1.0, |acc, x| one(x).map(|t| acc * t)),
            other => one(other),
        };
        match result {
            Ok(t) => Some(t),
            Err(e) => {
                self.issues.push(format!("{}.loss: {e}", self.name));
                None
            }
        }
    }

    fn finish(self) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.seen.contains(key.as_str()) {
                    self.issues.push(format!("unknown key {}.{}", self.name, key));
                }
            }
        }
    }
}

const SECTIONS: [&str; 8] = [
    "source",
    "arm_signal",
    "arm_idler",
    "detector_signal",
    "detector_idler",
    "tia",
    "run",
    "phase_matching",
];

fn parse_polarization(s: &str) -> Option<Polarization> {
    match s.to_ascii_uppercase().as_str() {
        "TE" => Some(Polarization::TE),
        "TM" => Some(Polarization::TM),
        _ => None,
    }
}

fn read_arm(root: &Table, name: &'static str, issues: &mut Vec<String>) -> ArmSpec {
    let mut s = Section::open(root, name, true, issues);
    let transmission = s.transmission();
    let low = s.quantity("passband_low", Dimension::Length);
    let high = s.quantity("passband_high", Dimension::Length);
    let path_delay = s.quantity_opt("path_delay", Dimension::Time).unwrap_or(0.0);
    s.finish();
    ArmSpec {
        transmission,
        passband: Band { low, high },
        path_delay,
    }
}

fn read_detector(root: &Table, name: &'static str, issues: &mut Vec<String>) -> DetectorSpec {
    let mut s = Section::open(root, name, true, issues);
    let spec = DetectorSpec {
        quantum_efficiency: s.quantity("quantum_efficiency", Dimension::Dimensionless),
        dark_count_rate: s.quantity("dark_count_rate", Dimension::Rate),
        timing_jitter_sigma: s.quantity_opt("timing_jitter", Dimension::Time).unwrap_or(0.0),
        dead_time: s.quantity_opt("dead_time", Dimension::Time).unwrap_or(0.0),
    };
    s.finish();
    spec
}

fn spec_from_table(root: &Table) -> Result<ExperimentSpec, ConfigError> {
    let mut issues = Vec::new();
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            issues.push(format!("unknown section [{key}]"));
        }
    }

    let mut s = Section::open(root, "source", true, &mut issues);
    let pump_power = s.quantity("pump_power", Dimension::Power);
    let pump_wavelength = s.quantity("pump_wavelength", Dimension::Length);
    let alpha = s.quantity("alpha", Dimension::Dimensionless);
    let degenerate = s.bool_opt("degenerate").unwrap_or(true);
    let degeneracy_wavelength = s
        .quantity_opt("degeneracy_wavelength", Dimension::Length)
        .unwrap_or(2.0 * pump_wavelength);
    let emission_bandwidth = s.quantity("emission_bandwidth", Dimension::Length);
    let emission_center = s
        .quantity_opt("emission_center", Dimension::Length)
        .unwrap_or(degeneracy_wavelength);
    let alpha_reference_bandwidth = s
        .quantity_opt("alpha_reference_bandwidth", Dimension::Length)
        .unwrap_or(emission_bandwidth);
    let conjugation = match s.string_opt("conjugation") {
        None => ConjugationMode::Linear,
        Some("linear") => ConjugationMode::Linear,
        Some("exact_frequency") => ConjugationMode::ExactFrequency,
        Some(other) => {
            s.issues.push(format!("source.conjugation: expected linear or exact_frequency, got {other:?}"));
            ConjugationMode::Linear
        }
    };
    let pair_polarization = match s.string_opt("pair_polarization") {
        None => Polarization::TE,
        Some(p) => parse_polarization(p).unwrap_or_else(|| {
            s.issues.push(format!("source.pair_polarization: expected TE or TM, got {p:?}"));
            Polarization::TE
        }),
    };
    s.finish();

    let arm_signal = read_arm(root, "arm_signal", &mut issues);
    let arm_idler = read_arm(root, "arm_idler", &mut issues);
    let det_signal = read_detector(root, "detector_signal", &mut issues);
    let det_idler = read_detector(root, "detector_idler", &mut issues);

    let mut s = Section::open(root, "tia", true, &mut issues);
    let tia = TiaSpec {
        bin_width: s.quantity("bin_width", Dimension::Time),
        window_min: s.quantity("window_min", Dimension::Time),
        window_max: s.quantity("window_max", Dimension::Time),
        extra_jitter_sigma: s.quantity_opt("extra_jitter", Dimension::Time).unwrap_or(0.0),
    };
    s.finish();

    let mut s = Section::open(root, "run", true, &mut issues);
    let integration_time = s.quantity("integration_time", Dimension::Time);
    let analyzer_polarization = match s.string_opt("analyzer_polarization") {
        None => None,
        Some(p) if p.eq_ignore_ascii_case("none") => None,
        Some(p) => parse_polarization(p).or_else(|| {
            s.issues.push(format!("run.analyzer_polarization: expected TE, TM or none, got {p:?}"));
            None
        }),
    };
    s.finish();

    let phase_matching = if root.contains_key("phase_matching") {
        let mut s = Section::open(root, "phase_matching", false, &mut issues);
        let halfwidth = s.quantity("emission_halfwidth", Dimension::Length);
        let pm = PhaseMatchingSpec {
            degenerate_pump_wavelength: s
                .quantity_opt("degenerate_pump_wavelength", Dimension::Length)
                .unwrap_or(pump_wavelength),
            anchor_pump_detuning: s.quantity("anchor_pump_detuning", Dimension::Length),
            anchor_signal_shift: s.quantity("anchor_signal_shift", Dimension::Length),
            emission_halfwidth: halfwidth,
            interaction_length: s
                .quantity_opt("interaction_length", Dimension::Length)
                .unwrap_or(3.5e-3),
            qpm_period: s.quantity_opt("qpm_period", Dimension::Length).unwrap_or(3.5e-6),
            qpm_order: match s.integer_opt("qpm_order") {
                None => 1,
                Some(m) if m >= 0 => m as u32,
                Some(m) => {
                    s.issues.push(format!("phase_matching.qpm_order: must be positive, got {m}"));
                    1
                }
            },
            scan_emission_bandwidth: s
                .quantity_opt("scan_emission_bandwidth", Dimension::Length)
                .unwrap_or(2.0 * halfwidth),
        };
        s.finish();
        Some(pm)
    } else {
        None
    };

    if !issues.is_empty() {
        return Err(ConfigError::Schema(issues));
    }

    let spec = ExperimentSpec {
        source: SourceSpec {
            pump_power,
            pump_wavelength,
            conversion_efficiency_alpha: alpha,
            degeneracy_wavelength,
            degenerate,
            emission_center,
            emission_bandwidth,
            alpha_reference_bandwidth,
            conjugation,
        },
        arm_signal,
        arm_idler,
        det_signal,
        det_idler,
        tia,
        integration_time,
        pair_polarization,
        analyzer_polarization,
        phase_matching,
    };
    let violations = validate(&spec);
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(ConfigError::Validation(violations))
    }
}

fn parse_table(document: &str) -> Result<Table, ConfigError> {
    document
        .parse::<Table>()
        .map_err(|e| ConfigError::Parse(e.to_string()))
}

/// Parses and validates a configuration document.
pub fn load_spec(document: &str) -> Result<ExperimentSpec, ConfigError> {
    load_spec_with_overrides(document, &[])
}

/// Like [`load_spec`], applying `section.key=value` overrides first. Values
/// are read as TOML literals, falling back to plain strings (`8mW`).
pub fn load_spec_with_overrides(document: &str, overrides: &[String]) -> Result<ExperimentSpec, ConfigError> {
    let mut root = parse_table(document)?;
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    spec_from_table(&root)
}

fn apply_override(root: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::Override(assignment.to_string());
    let (path, raw) = assignment.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
    if section.is_empty() || key.is_empty() {
        return Err(bad());
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let entry = root
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            // `transmission` and `loss` are alternatives
            match key {
                "transmission" => {
                    t.remove("loss");
                }
                "loss" => {
                    t.remove("transmission");
                }
                _ => {}
            }
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(bad()),
    }
}

/// Serializes `spec` as a configuration document in plain SI numbers.
pub fn to_toml(spec: &ExperimentSpec) -> String {
    fn table(pairs: Vec<(&str, Value)>) -> Value {
        Value::Table(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
    let f = Value::Float;
    let s = &spec.source;
    let mut root = Table::new();
    root.insert(
        "source".into(),
        table(vec![
            ("pump_power", f(s.pump_power)),
            ("pump_wavelength", f(s.pump_wavelength)),
            ("alpha", f(s.conversion_efficiency_alpha)),
            ("degeneracy_wavelength", f(s.degeneracy_wavelength)),
            ("degenerate", Value::Boolean(s.degenerate)),
            ("emission_center", f(s.emission_center)),
            ("emission_bandwidth", f(s.emission_bandwidth)),
            ("alpha_reference_bandwidth", f(s.alpha_reference_bandwidth)),
            (
                "conjugation",
                Value::String(
                    match s.conjugation {
                        ConjugationMode::Linear => "linear",
                        ConjugationMode::ExactFrequency => "exact_frequency",
                    }
                    .into(),
                ),
            ),
            ("pair_polarization", Value::String(format!("{:?}", spec.pair_polarization))),
        ]),
    );
    for (name, arm) in [("arm_signal", &spec.arm_signal), ("arm_idler", &spec.arm_idler)] {
        root.insert(
            name.into(),
            table(vec![
                ("transmission", f(arm.transmission)),
                ("passband_low", f(arm.passband.low)),
                ("passband_high", f(arm.passband.high)),
                ("path_delay", f(arm.path_delay)),
            ]),
        );
    }
    for (name, det) in [("detector_signal", &spec.det_signal), ("detector_idler", &spec.det_idler)] {
        root.insert(
            name.into(),
            table(vec![
                ("quantum_efficiency", f(det.quantum_efficiency)),
                ("dark_count_rate", f(det.dark_count_rate)),
                ("timing_jitter", f(det.timing_jitter_sigma)),
                ("dead_time", f(det.dead_time)),
            ]),
        );
    }
    root.insert(
        "tia".into(),
        table(vec![
            ("bin_width", f(spec.tia.bin_width)),
            ("window_min", f(spec.tia.window_min)),
            ("window_max", f(spec.tia.window_max)),
            ("extra_jitter", f(spec.tia.extra_jitter_sigma)),
        ]),
    );
    root.insert(
        "run".into(),
        table(vec![
            ("integration_time", f(spec.integration_time)),
            (
                "analyzer_polarization",
                Value::String(match spec.analyzer_polarization {
                    None => "none".into(),
                    Some(p) => format!("{p:?}"),
                }),
            ),
        ]),
    );
    if let Some(pm) = &spec.phase_matching {
        root.insert(
            "phase_matching".into(),
            table(vec![
                ("degenerate_pump_wavelength", f(pm.degenerate_pump_wavelength)),
                ("anchor_pump_detuning", f(pm.anchor_pump_detuning)),
                ("anchor_signal_shift", f(pm.anchor_signal_shift)),
                ("emission_halfwidth", f(pm.emission_halfwidth)),
                ("interaction_length", f(pm.interaction_length)),
                ("qpm_period", f(pm.qpm_period)),
                ("qpm_order", Value::Integer(pm.qpm_order as i64)),
                ("scan_emission_bandwidth", f(pm.scan_emission_bandwidth)),
            ]),
        );
    }
    toml::to_string(&root).expect("TOML serialization of a plain table")
}

/// The bundled reference configuration.
pub const REFERENCE_CONFIG: &str = include_str!("../../../configs/reference.toml");

pub fn reference_spec() -> ExperimentSpec {
    load_spec(REFERENCE_CONFIG).expect("bundled reference configuration is valid")
}
