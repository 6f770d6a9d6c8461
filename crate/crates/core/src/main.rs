use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spdc_car::analytic::CarConvention;
use spdc_car::coincidence::CarOptions;
use spdc_car::commands::{self, CarCommandOptions, CommandError, OutputFormat, SimulateOptions, SweepOptions, TagSource};
use spdc_car::config::validate;
use spdc_car::filters::Band;
use spdc_car::units::{parse_quantity, Dimension};
use spdc_car::Execution;

#[derive(Parser)]
#[command(name = "spdc-car", version, about = "Photon-pair coincidence simulation and CAR analysis")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML); defaults to the built-in reference setup
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set source.pump_power="6 mW"`
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Run the Monte Carlo on one thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    /// peak over mean background (closed form + 1)
    Measured,
    /// closed form, true over accidental
    Formula,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Peak position, e.g. `26ns`; defaults to the configured arm delay difference
    #[arg(long)]
    peak_delay: Option<String>,
    /// Take the highest bin as the peak
    #[arg(long, conflicts_with = "peak_delay")]
    no_peak_hint: bool,
    /// Bins on each side of the peak excluded from the background
    #[arg(long, default_value_t = 2)]
    exclusion: usize,
    /// Odd number of bins summed for the multi-bin CAR
    #[arg(long, default_value_t = 3)]
    summed_bins: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the detection chain and write time-tag files
    Simulate {
        #[arg(long)]
        seed: u64,
        /// Integration time override, e.g. `20s`
        #[arg(long)]
        duration: Option<String>,
        /// Write `.ptag` binary files instead of CSV
        #[arg(long)]
        binary: bool,
    },
    /// Histogram time tags and estimate CAR
    Car {
        /// Signal tag file (CSV or .ptag)
        #[arg(long, requires = "idler")]
        signal: Option<PathBuf>,
        /// Idler tag file (CSV or .ptag)
        #[arg(long, requires = "signal")]
        idler: Option<PathBuf>,
        /// One CSV holding both channels
        #[arg(long, conflicts_with_all = ["signal", "idler"])]
        tags: Option<PathBuf>,
        /// Simulate from the config instead of reading tags
        #[arg(long, conflicts_with_all = ["signal", "idler", "tags"])]
        seed: Option<u64>,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Monte Carlo CAR against pump power, with the closed form alongside
    SweepPower {
        #[arg(long)]
        seed: u64,
        /// Comma-separated powers, e.g. `2mW,4mW,8mW`
        #[arg(long)]
        powers: String,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Detectable fraction and predicted CAR against pump wavelength
    Detune {
        /// Comma-separated pump wavelengths, e.g. `771.5nm,772nm`
        #[arg(long, conflicts_with_all = ["from", "to", "step"])]
        pump_wavelengths: Option<String>,
        #[arg(long, requires_all = ["to", "step"])]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        step: Option<String>,
    },
    /// Extract alpha from a CAR-vs-power CSV
    FitAlpha {
        /// CSV with `power_w`, `car` and optional `car_sigma` columns
        #[arg(long)]
        data: PathBuf,
        /// Per-photon detection probability
        #[arg(long)]
        l: Option<f64>,
        /// Dark count rate, counts per second
        #[arg(long)]
        d: Option<f64>,
        /// Bin width, e.g. `500ps`
        #[arg(long)]
        r: Option<String>,
        /// Coincidence overlap fraction
        #[arg(long)]
        f: Option<f64>,
        #[arg(long)]
        pump_wavelength: Option<String>,
        #[arg(long, value_enum, default_value_t = Convention::Measured)]
        convention: Convention,
        /// Power at which brightness is reported
        #[arg(long)]
        reference_power: Option<String>,
    },
    /// Effective filter bands and overlap fraction in both conjugation modes
    Overlap {
        /// Signal filter as `low,high`, e.g. `1562nm,1578nm`
        #[arg(long)]
        signal_band: Option<String>,
        #[arg(long)]
        idler_band: Option<String>,
        #[arg(long)]
        degeneracy: Option<String>,
    },
    /// Check a config and list every violation
    Validate,
}

fn band_arg(text: &str) -> Result<Band, CommandError> {
    let v = commands::parse_list(text, Dimension::Length)?;
    match v[..] {
        [low, high] => Ok(Band::new(low, high)?),
        _ => Err(CommandError::Usage(format!("band {text:?}: expected `low,high`"))),
    }
}

fn car_options(a: &EstimatorArgs) -> Result<CarOptions, CommandError> {
    let peak_hint = match &a.peak_delay {
        Some(t) => Some(parse_quantity(t, Dimension::Time)?),
        None => None,
    };
    Ok(CarOptions {
        peak_hint,
        exclusion_halfwidth: a.exclusion,
        summed_bins: a.summed_bins,
    })
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let g = &cli.global;
    let format = match g.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let exec = if g.sequential { Execution::Sequential } else { Execution::default() };
    let mut overrides = g.overrides.clone();
    if let Command::Simulate { duration: Some(d), .. } = &cli.command {
        overrides.push(format!("run.integration_time={}", toml_string(d)));
    }
    let spec = commands::load_config(g.config.as_deref(), &overrides)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Simulate { seed, binary, .. } => {
            commands::simulate(&spec, &SimulateOptions { seed, binary, exec }, &g.out, &mut out)?;
        }
        Command::Car {
            signal,
            idler,
            tags,
            seed,
            estimator,
        } => {
            let source = match (signal, idler, tags, seed) {
                (Some(signal), Some(idler), _, _) => TagSource::Files { signal, idler },
                (_, _, Some(t), _) => TagSource::Combined(t),
                (_, _, _, Some(seed)) => TagSource::Simulate { seed },
                _ => return Err(CommandError::Usage("car needs --signal/--idler, --tags, or --seed".into())),
            };
            let mut car = car_options(&estimator)?;
            if car.peak_hint.is_none() && !estimator.no_peak_hint {
                car.peak_hint = Some(spec.expected_peak_delay());
            }
            let opts = CarCommandOptions { source, car, format, exec };
            commands::car(&spec, &opts, &g.out, &mut out)?;
        }
        Command::SweepPower { seed, powers, estimator } => {
            let mut car = car_options(&estimator)?;
            if estimator.no_peak_hint {
                // car_vs_power falls back to the configured delay when unset;
                // a hint outside the window means argmax
                car.peak_hint = Some(f64::NEG_INFINITY);
            }
            let opts = SweepOptions {
                powers: commands::parse_list(&powers, Dimension::Power)?,
                seed,
                car,
                format,
                exec,
            };
            commands::sweep_power(&spec, &opts, &g.out, &mut out)?;
        }
        Command::Detune {
            pump_wavelengths,
            from,
            to,
            step,
        } => {
            let grid = match (pump_wavelengths, from, to, step) {
                (Some(list), ..) => commands::parse_list(&list, Dimension::Length)?,
                (None, Some(a), Some(b), Some(s)) => {
                    let (a, b, s) = (
                        parse_quantity(&a, Dimension::Length)?,
                        parse_quantity(&b, Dimension::Length)?,
                        parse_quantity(&s, Dimension::Length)?,
                    );
                    if !(s > 0.0 && b >= a) {
                        return Err(CommandError::Usage("detune: need --from <= --to and --step > 0".into()));
                    }
                    let n = ((b - a) / s + 1e-9).floor() as usize;
                    (0..=n).map(|k| a + k as f64 * s).collect()
                }
                _ => Vec::new(),
            };
            commands::detune(&spec, &grid, format, &g.out, &mut out)?;
        }
        Command::FitAlpha {
            data,
            l,
            d,
            r,
            f,
            pump_wavelength,
            convention,
            reference_power,
        } => {
            let mut fixed = commands::default_fit_fixed(&spec);
            if let Some(v) = l {
                fixed.l = v;
            }
            if let Some(v) = d {
                fixed.d = v;
            }
            if let Some(v) = r {
                fixed.r = parse_quantity(&v, Dimension::Time)?;
            }
            if let Some(v) = f {
                fixed.f = v;
            }
            if let Some(v) = pump_wavelength {
                fixed.pump_wavelength = parse_quantity(&v, Dimension::Length)?;
            }
            if let Some(v) = reference_power {
                fixed.reference_power = parse_quantity(&v, Dimension::Power)?;
            }
            fixed.convention = match convention {
                Convention::Measured => CarConvention::Measured,
                Convention::Formula => CarConvention::Formula,
            };
            commands::fit_alpha_cmd(&spec, &data, &fixed, &g.out, &mut out)?;
        }
        Command::Overlap {
            signal_band,
            idler_band,
            degeneracy,
        } => {
            let sb = signal_band.map_or(Ok(spec.arm_signal.passband), |t| band_arg(&t))?;
            let ib = idler_band.map_or(Ok(spec.arm_idler.passband), |t| band_arg(&t))?;
            let deg = match degeneracy {
                Some(t) => parse_quantity(&t, Dimension::Length)?,
                None => spec.source.degeneracy_wavelength,
            };
            let report = commands::overlap(&sb, &ib, deg)?;
            commands::print_overlap(&report, format, &mut out)?;
        }
        Command::Validate => {
            let v = validate(&spec);
            if !v.is_empty() {
                return Err(spdc_car::config::ConfigError::Validation(v).into());
            }
            writeln!(out, "ok: digest {}", commands::spec_digest(&spec))
                .map_err(|e| CommandError::Usage(e.to_string()))?;
        }
    }
    Ok(())
}

/// Quotes a CLI value for use as a TOML string literal.
fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
