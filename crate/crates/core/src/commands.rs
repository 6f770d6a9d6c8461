//! Subcommand implementations behind the `spdc-car` binary.
//!
//! Each command takes a resolved spec and typed options, writes its data
//! files into the output directory along with `manifest.json`, and prints a
//! human-readable summary to `report`.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytic::{expected_rates, fit_alpha, AlphaFit, CarConvention, CarPoint, FitError, FitFixed};
use crate::coincidence::{
    build_histogram_with, car_vs_power, estimate_car, write_histogram_csv, AnalysisError, CarEstimate, CarOptions,
    Histogram, SweepError,
};
use crate::config::{load_spec_with_overrides, to_toml, validate, ConfigError, ConjugationMode, ExperimentSpec, REFERENCE_CONFIG};
use crate::exec::Execution;
use crate::filters::{effective_overlap, Band, FilterError, OverlapResult};
use crate::phase_matching::{detuning_scan, PhaseMatchingError, TuningModel};
use crate::sim::{run_experiment_with, Channel, SimError, TimeTagStream};
use crate::tags::{self, TagError};
use crate::units::{parse_quantity, Dimension, UnitError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    ConfigFile { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Tags { path: PathBuf, source: TagError },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("alpha fit failed: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    PhaseMatching(#[from] PhaseMatchingError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("{0}")]
    Usage(String),
}

impl CommandError {
    fn io(path: &Path, source: io::Error) -> Self {
        CommandError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Loads `path` (or the built-in reference config) and applies overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentSpec, CommandError> {
    match path {
        Some(p) => {
            let doc = fs::read_to_string(p).map_err(|e| CommandError::io(p, e))?;
            load_spec_with_overrides(&doc, overrides).map_err(|source| CommandError::ConfigFile {
                path: p.to_path_buf(),
                source,
            })
        }
        None => Ok(load_spec_with_overrides(REFERENCE_CONFIG, overrides)?),
    }
}

/// Parses a comma-separated list of quantities such as `2mW,4mW,8 mW`.
pub fn parse_list(text: &str, dim: Dimension) -> Result<Vec<f64>, UnitError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_quantity(s, dim))
        .collect()
}

/// SHA-256 of the canonical serialization of the resolved spec.
pub fn spec_digest(spec: &ExperimentSpec) -> String {
    hex::encode(Sha256::digest(to_toml(spec).as_bytes()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub spec_digest: String,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Collects written files and produces the manifest at the end of a run.
pub struct Outputs {
    dir: PathBuf,
    command: &'static str,
    digest: String,
    seed: Option<u64>,
    started: Instant,
    artifacts: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &'static str, spec: &ExperimentSpec, seed: Option<u64>) -> Result<Self, CommandError> {
        fs::create_dir_all(dir).map_err(|e| CommandError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            command,
            digest: spec_digest(spec),
            seed,
            started: Instant::now(),
            artifacts: Vec::new(),
        })
    }

    /// Creates `name` in the output directory and hands a buffered writer to `fill`.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<PathBuf, CommandError>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CommandError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        fill(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CommandError::io(&path, e))?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CommandError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
            writeln!(w)
        })
    }

    pub fn finish(self) -> Result<RunManifest, CommandError> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            spec_digest: self.digest,
            seed: self.seed,
            artifacts: self.artifacts.iter().map(|p| p.display().to_string()).collect(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CommandError::io(&path, io::Error::other(e)))?;
        fs::write(&path, text + "\n").map_err(|e| CommandError::io(&path, e))?;
        Ok(manifest)
    }
}

fn report_io(e: io::Error) -> CommandError {
    CommandError::io(Path::new("<stdout>"), e)
}

fn require_valid(spec: &ExperimentSpec) -> Result<(), CommandError> {
    let v = validate(spec);
    if v.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Validation(v).into())
    }
}

// ---------------------------------------------------------------- simulate

pub struct SimulateOptions {
    pub seed: u64,
    pub binary: bool,
    pub exec: Execution,
}

pub fn simulate(
    spec: &ExperimentSpec,
    opts: &SimulateOptions,
    out: &Path,
    report: &mut dyn Write,
) -> Result<RunManifest, CommandError> {
    require_valid(spec)?;
    let mut outputs = Outputs::new(out, "simulate", spec, Some(opts.seed))?;
    let (sig, idl) = run_experiment_with(spec, opts.seed, opts.exec)?;
    for s in [&sig, &idl] {
        if opts.binary {
            outputs.write(&format!("tags_{}.ptag", s.channel.as_str()), |w| tags::write_binary(s, w))?;
        } else {
            outputs.write(&format!("tags_{}.csv", s.channel.as_str()), |w| tags::write_csv(&[s], w))?;
        }
    }
    let t = spec.integration_time;
    writeln!(
        report,
        "simulated {t} s: signal {} clicks ({:.1} cps), idler {} clicks ({:.1} cps)",
        sig.len(),
        sig.len() as f64 / t,
        idl.len(),
        idl.len() as f64 / t
    )
    .map_err(report_io)?;
    outputs.finish()
}

// ---------------------------------------------------------------- car

pub enum TagSource {
    Files { signal: PathBuf, idler: PathBuf },
    /// One CSV holding both channels.
    Combined(PathBuf),
    Simulate { seed: u64 },
}

pub struct CarCommandOptions {
    pub source: TagSource,
    pub car: CarOptions,
    pub format: OutputFormat,
    pub exec: Execution,
}

#[derive(Debug, Clone, Serialize)]
pub struct CarReport {
    /// `ok`, or `undefined` when the histogram is empty.
    pub status: String,
    pub warning: Option<String>,
    pub bin_width_s: f64,
    pub window_min_s: f64,
    pub window_max_s: f64,
    pub singles_signal: usize,
    pub singles_idler: usize,
    pub total_coincidences: u64,
    pub estimate: Option<CarEstimate>,
    /// Closed form for the configured experiment, for comparison.
    pub expected_car_formula: Option<f64>,
}

#[derive(Serialize)]
struct HistogramJson<'a> {
    bin_width_s: f64,
    window_min_s: f64,
    bin_left_edges_s: Vec<f64>,
    counts: &'a [u64],
    total_start_events: u64,
}

fn read_tag_file(path: &Path, channel: Channel) -> Result<TimeTagStream, CommandError> {
    let file = File::open(path).map_err(|e| CommandError::io(path, e))?;
    let tag_err = |source| CommandError::Tags {
        path: path.to_path_buf(),
        source,
    };
    if path.extension().is_some_and(|e| e == "ptag") {
        let s = tags::read_binary(BufReader::new(file)).map_err(tag_err)?;
        if s.channel != channel {
            return Err(CommandError::Data {
                path: path.to_path_buf(),
                message: format!("holds {} tags, expected {}", s.channel.as_str(), channel.as_str()),
            });
        }
        Ok(s)
    } else {
        let (sig, idl) = tags::read_csv(BufReader::new(file)).map_err(tag_err)?;
        Ok(match channel {
            Channel::Signal => sig,
            Channel::Idler => idl,
        })
    }
}

fn load_tags(spec: &ExperimentSpec, opts: &CarCommandOptions) -> Result<(TimeTagStream, TimeTagStream), CommandError> {
    match &opts.source {
        TagSource::Files { signal, idler } => Ok((read_tag_file(signal, Channel::Signal)?, read_tag_file(idler, Channel::Idler)?)),
        TagSource::Combined(path) => {
            let file = File::open(path).map_err(|e| CommandError::io(path, e))?;
            tags::read_csv(BufReader::new(file)).map_err(|source| CommandError::Tags {
                path: path.clone(),
                source,
            })
        }
        TagSource::Simulate { seed } => {
            require_valid(spec)?;
            Ok(run_experiment_with(spec, *seed, opts.exec)?)
        }
    }
}

pub fn car(
    spec: &ExperimentSpec,
    opts: &CarCommandOptions,
    out: &Path,
    report: &mut dyn Write,
) -> Result<CarReport, CommandError> {
    let seed = match opts.source {
        TagSource::Simulate { seed } => Some(seed),
        _ => None,
    };
    let (sig, idl) = load_tags(spec, opts)?;
    let mut outputs = Outputs::new(out, "car", spec, seed)?;
    let hist = build_histogram_with(&sig, &idl, &spec.tia, opts.exec)?;
    write_histogram(&mut outputs, &hist, opts.format)?;
    let (status, warning, estimate) = match estimate_car(&hist, &opts.car) {
        Ok(e) => ("ok", None, Some(e)),
        Err(AnalysisError::UndefinedCar) => ("undefined", Some("histogram is empty; CAR undefined".to_string()), None),
        Err(e) => return Err(e.into()),
    };
    let car_report = CarReport {
        status: status.into(),
        warning,
        bin_width_s: hist.bin_width_seconds(),
        window_min_s: spec.tia.window_min,
        window_max_s: crate::units::ps_to_seconds(hist.window_end()),
        singles_signal: sig.len(),
        singles_idler: idl.len(),
        total_coincidences: hist.total(),
        estimate,
        expected_car_formula: expected_rates(spec).car_formula,
    };
    outputs.write_json("car.json", &car_report)?;
    print_car_report(&car_report, report).map_err(report_io)?;
    outputs.finish()?;
    Ok(car_report)
}

fn write_histogram(outputs: &mut Outputs, hist: &Histogram, format: OutputFormat) -> Result<(), CommandError> {
    match format {
        OutputFormat::Csv => {
            outputs.write("histogram.csv", |w| write_histogram_csv(hist, w))?;
        }
        OutputFormat::Json => {
            let j = HistogramJson {
                bin_width_s: hist.bin_width_seconds(),
                window_min_s: crate::units::ps_to_seconds(hist.origin),
                bin_left_edges_s: (0..hist.counts.len()).map(|i| crate::units::ps_to_seconds(hist.left_edge(i))).collect(),
                counts: &hist.counts,
                total_start_events: hist.total_start_events,
            };
            outputs.write_json("histogram.json", &j)?;
        }
    }
    Ok(())
}

fn print_car_report(r: &CarReport, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "singles: signal {}, idler {}", r.singles_signal, r.singles_idler)?;
    writeln!(w, "coincidences in window: {}", r.total_coincidences)?;
    match &r.estimate {
        None => writeln!(w, "status: undefined (warning: {})", r.warning.as_deref().unwrap_or(""))?,
        Some(e) => {
            writeln!(w, "peak: bin {} at {:.3} ns, {} counts", e.peak_bin_index, e.peak_delay * 1e9, e.peak_count)?;
            writeln!(
                w,
                "accidentals: {:.4} ± {:.4} per bin over {} bins",
                e.accidental_mean, e.accidental_stddev, e.background_bins
            )?;
            writeln!(w, "CAR (peak / background): {:.3} ± {:.3}", e.car, e.car_uncertainty)?;
            writeln!(w, "CAR (true / accidental): {:.3} ± {:.3}", e.true_to_accidental, e.car_uncertainty)?;
            writeln!(
                w,
                "CAR ({}-bin sum): {:.3} ± {:.3}",
                e.summed.bins, e.summed.car, e.summed.car_uncertainty
            )?;
        }
    }
    if let Some(c) = r.expected_car_formula {
        writeln!(w, "closed form for this config: {c:.3}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------- sweep-power

pub struct SweepOptions {
    pub powers: Vec<f64>,
    pub seed: u64,
    pub car: CarOptions,
    pub format: OutputFormat,
    pub exec: Execution,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub power_w: f64,
    pub car: Option<f64>,
    pub car_sigma: Option<f64>,
    pub car_summed: Option<f64>,
    pub car_summed_sigma: Option<f64>,
    pub peak_count: Option<u64>,
    pub accidental_mean: Option<f64>,
    pub singles_signal_cps: f64,
    pub singles_idler_cps: f64,
    pub analytic_car: Option<f64>,
    /// Closed form + 1, comparable to `car`.
    pub analytic_car_measured: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str = "power_w,car,car_sigma,car_summed,car_summed_sigma,peak_count,accidental_mean,singles_signal_cps,singles_idler_cps,analytic_car,analytic_car_measured";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn sweep_power(
    spec: &ExperimentSpec,
    opts: &SweepOptions,
    out: &Path,
    report: &mut dyn Write,
) -> Result<Vec<SweepRow>, CommandError> {
    let points = car_vs_power(spec, &opts.powers, opts.seed, &opts.car, opts.exec)?;
    let mut outputs = Outputs::new(out, "sweep-power", spec, Some(opts.seed))?;
    let t = spec.integration_time;
    let rows: Vec<SweepRow> = points
        .iter()
        .map(|p| {
            let mut s = spec.clone();
            s.source.pump_power = p.power;
            let analytic = expected_rates(&s).car_formula;
            let e = p.estimate.as_ref();
            SweepRow {
                power_w: p.power,
                car: e.map(|e| e.car),
                car_sigma: e.map(|e| e.car_uncertainty),
                car_summed: e.map(|e| e.summed.car),
                car_summed_sigma: e.map(|e| e.summed.car_uncertainty),
                peak_count: e.map(|e| e.peak_count),
                accidental_mean: e.map(|e| e.accidental_mean),
                singles_signal_cps: p.singles_signal as f64 / t,
                singles_idler_cps: p.singles_idler as f64 / t,
                analytic_car: analytic,
                analytic_car_measured: analytic.map(|c| c + 1.0),
            }
        })
        .collect();
    match opts.format {
        OutputFormat::Csv => {
            outputs.write("sweep_power.csv", |w| {
                writeln!(w, "{SWEEP_CSV_HEADER}")?;
                for r in &rows {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        r.power_w,
                        opt(r.car),
                        opt(r.car_sigma),
                        opt(r.car_summed),
                        opt(r.car_summed_sigma),
                        opt(r.peak_count),
                        opt(r.accidental_mean),
                        r.singles_signal_cps,
                        r.singles_idler_cps,
                        opt(r.analytic_car),
                        opt(r.analytic_car_measured)
                    )?;
                }
                Ok(())
            })?;
        }
        OutputFormat::Json => {
            outputs.write_json("sweep_power.json", &rows)?;
        }
    }
    writeln!(report, "{:>10} {:>10} {:>8} {:>12}", "power_mW", "CAR", "sigma", "closed+1").map_err(report_io)?;
    for r in &rows {
        writeln!(
            report,
            "{:>10.3} {:>10} {:>8} {:>12}",
            r.power_w * 1e3,
            r.car.map_or("undef".into(), |c| format!("{c:.2}")),
            r.car_sigma.map_or(String::new(), |c| format!("{c:.2}")),
            r.analytic_car_measured.map_or(String::new(), |c| format!("{c:.2}"))
        )
        .map_err(report_io)?;
    }
    outputs.finish()?;
    Ok(rows)
}

// ---------------------------------------------------------------- detune

pub fn detune(
    spec: &ExperimentSpec,
    pump_wavelengths: &[f64],
    format: OutputFormat,
    out: &Path,
    report: &mut dyn Write,
) -> Result<RunManifest, CommandError> {
    let model = TuningModel::from_spec(spec)?;
    let points = detuning_scan(&model, spec, pump_wavelengths)?;
    let mut outputs = Outputs::new(out, "detune", spec, None)?;
    match format {
        OutputFormat::Csv => {
            outputs.write("detune.csv", |w| {
                writeln!(w, "pump_wavelength_m,signal_center_m,idler_center_m,detectable_fraction,predicted_car,predicted_car_measured")?;
                for p in &points {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        p.pump_wavelength,
                        opt(p.signal_center),
                        opt(p.idler_center),
                        p.detectable_fraction,
                        p.predicted_car,
                        p.predicted_car_measured
                    )?;
                }
                Ok(())
            })?;
        }
        OutputFormat::Json => {
            outputs.write_json("detune.json", &points)?;
        }
    }
    for p in &points {
        writeln!(
            report,
            "{:.4} nm  fraction {:.4}  CAR {:.2}",
            p.pump_wavelength * 1e9,
            p.detectable_fraction,
            p.predicted_car
        )
        .map_err(report_io)?;
    }
    outputs.finish()
}

// ---------------------------------------------------------------- fit-alpha

/// Reads `power_w` and `car` (and optionally `car_sigma`) columns by header
/// name; extra columns are ignored, so `sweep_power.csv` is accepted as is.
pub fn read_car_points(path: &Path) -> Result<Vec<CarPoint>, CommandError> {
    let text = fs::read_to_string(path).map_err(|e| CommandError::io(path, e))?;
    let data_err = |line: usize, message: String| CommandError::Data {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| data_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let ip = find("power_w").ok_or_else(|| data_err(1, "missing power_w column".into()))?;
    let ic = find("car").ok_or_else(|| data_err(1, "missing car column".into()))?;
    let is = find("car_sigma");
    let mut points = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |k: usize, name: &str| -> Result<Option<f64>, CommandError> {
            match fields.get(k).copied() {
                None | Some("") => Ok(None),
                Some(v) => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| data_err(i + 1, format!("bad {name} value {v:?}"))),
            }
        };
        let power = num(ip, "power_w")?.ok_or_else(|| data_err(i + 1, "missing power_w".into()))?;
        // rows with an undefined CAR carry no information about the peak
        let Some(car) = num(ic, "car")? else { continue };
        let sigma = match is {
            Some(k) => num(k, "car_sigma")?,
            None => None,
        };
        points.push(CarPoint { power, car, sigma });
    }
    Ok(points)
}

/// Fixed parameters implied by the spec; any may be overridden.
pub fn default_fit_fixed(spec: &ExperimentSpec) -> FitFixed {
    let e = expected_rates(spec);
    FitFixed {
        l: e.detection_prob_signal,
        d: spec.det_signal.dark_count_rate,
        r: spec.tia.bin_width,
        f: e.coincidence_fraction,
        pump_wavelength: spec.source.pump_wavelength,
        convention: CarConvention::Measured,
        reference_power: spec.source.pump_power,
    }
}

pub fn fit_alpha_cmd(
    spec: &ExperimentSpec,
    data: &Path,
    fixed: &FitFixed,
    out: &Path,
    report: &mut dyn Write,
) -> Result<AlphaFit, CommandError> {
    let points = read_car_points(data)?;
    let fit = fit_alpha(&points, fixed)?;
    let mut outputs = Outputs::new(out, "fit-alpha", spec, None)?;
    #[derive(Serialize)]
    struct FitReport<'a> {
        fixed: &'a FitFixed,
        points: usize,
        fit: &'a AlphaFit,
    }
    outputs.write_json(
        "fit_alpha.json",
        &FitReport {
            fixed,
            points: points.len(),
            fit: &fit,
        },
    )?;
    let w = report;
    (|| -> io::Result<()> {
        writeln!(w, "points: {}", points.len())?;
        writeln!(w, "CAR maximum at {:.4} mW (flux {:.5e} photons/s)", fit.peak_power * 1e3, fit.peak_flux)?;
        match fit.alpha_uncertainty {
            Some(s) => writeln!(w, "alpha (peak matching): {:.5e} ± {:.2e}", fit.alpha, s)?,
            None => writeln!(w, "alpha (peak matching): {:.5e}", fit.alpha)?,
        }
        writeln!(w, "alpha (least squares): {:.5e}  chi2 {:.3}", fit.least_squares_alpha, fit.least_squares_chi2)?;
        writeln!(
            w,
            "brightness at {:.3} mW: {:.5e} pairs/s",
            fit.reference_power * 1e3,
            fit.brightness_at_reference
        )
    })()
    .map_err(report_io)?;
    outputs.finish()?;
    Ok(fit)
}

// ---------------------------------------------------------------- overlap

#[derive(Debug, Clone, Serialize)]
pub struct OverlapReport {
    pub signal_band: Band,
    pub idler_band: Band,
    pub degeneracy_wavelength: f64,
    pub linear: OverlapResult,
    pub exact_frequency: OverlapResult,
}

pub fn overlap(signal: &Band, idler: &Band, degeneracy: f64) -> Result<OverlapReport, CommandError> {
    Ok(OverlapReport {
        signal_band: *signal,
        idler_band: *idler,
        degeneracy_wavelength: degeneracy,
        linear: effective_overlap(signal, idler, degeneracy, ConjugationMode::Linear)?,
        exact_frequency: effective_overlap(signal, idler, degeneracy, ConjugationMode::ExactFrequency)?,
    })
}

fn band_nm(b: &Option<Band>) -> String {
    b.map_or("none".into(), |b| format!("{:.4}-{:.4} nm", b.low * 1e9, b.high * 1e9))
}

pub fn print_overlap(r: &OverlapReport, format: OutputFormat, w: &mut dyn Write) -> Result<(), CommandError> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *w, r).map_err(|e| report_io(io::Error::other(e)))?;
            writeln!(w).map_err(report_io)
        }
        OutputFormat::Csv => (|| -> io::Result<()> {
            writeln!(w, "mode,effective_signal_low_m,effective_signal_high_m,effective_idler_low_m,effective_idler_high_m,overlap_fraction,idler_fraction")?;
            for (name, o) in [("linear", &r.linear), ("exact_frequency", &r.exact_frequency)] {
                let edges = |b: &Option<Band>| b.map_or(",".into(), |b| format!("{},{}", b.low, b.high));
                writeln!(
                    w,
                    "{name},{},{},{},{}",
                    edges(&o.effective_band_signal),
                    edges(&o.effective_band_idler),
                    o.overlap_fraction,
                    o.idler_fraction
                )?;
            }
            for (name, o) in [("linear", &r.linear), ("exact_frequency", &r.exact_frequency)] {
                writeln!(
                    w,
                    "# {name}: signal {}, idler {}, fraction {:.6} (idler side {:.6})",
                    band_nm(&o.effective_band_signal),
                    band_nm(&o.effective_band_idler),
                    o.overlap_fraction,
                    o.idler_fraction
                )?;
            }
            Ok(())
        })()
        .map_err(report_io),
    }
}
