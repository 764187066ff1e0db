//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::acquisition::{export_spectrum, AcquisitionParams, SpectrumSidecar};
use crate::dynamics::NoiseModel;
use crate::error::{Error, Result};
use crate::experiments::{
    epsilon_scan, linspace, run, temperature_scan, ExperimentKind, FunctionLabel, Setup,
};
use crate::qcore::SpinSystem;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_AMBIGUOUS: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

pub const OUT_ENV: &str = "SINGLETSIM_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "singletsim",
    version,
    about = "Two-qubit NMR Deutsch algorithm simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalFlags {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Singlet polarization of the initial state.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub epsilon: Option<f64>,
    /// Disable relaxation.
    #[arg(long, global = true)]
    pub no_noise: bool,
    /// Output directory (falls back to $SINGLETSIM_OUT, then the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Accepted for scripts; every command is already deterministic.
    #[arg(long, global = true)]
    pub seedless: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its spectrum and record.
    Run {
        #[arg(value_enum)]
        kind: KindArg,
        #[arg(long = "f", value_enum)]
        f: LabelArg,
    },
    /// Run the acceptance checks.
    Verify {
        /// Run a single check by name.
        #[arg(long)]
        only: Option<String>,
    },
    /// Sweep polarization or temperature.
    Scan {
        #[arg(value_enum)]
        kind: ScanArg,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long = "f", value_enum, default_value = "f01")]
        f: LabelArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    #[value(name = "classical-f0")]
    ClassicalF0,
    #[value(name = "classical-f1")]
    ClassicalF1,
    Quantum,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::ClassicalF0 => ExperimentKind::ClassicalF0,
            KindArg::ClassicalF1 => ExperimentKind::ClassicalF1,
            KindArg::Quantum => ExperimentKind::Quantum,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LabelArg {
    F00,
    F01,
    F10,
    F11,
}

impl From<LabelArg> for FunctionLabel {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::F00 => FunctionLabel::F00,
            LabelArg::F01 => FunctionLabel::F01,
            LabelArg::F10 => FunctionLabel::F10,
            LabelArg::F11 => FunctionLabel::F11,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScanArg {
    Epsilon,
    Temperature,
}

/// Noise section of the config; unset fields follow the spin system.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NoiseConfig {
    enabled: Option<bool>,
    t1: Option<f64>,
    t2: Option<f64>,
    equilibrium_excited_population: Option<f64>,
    substeps_per_delay: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    system: SpinSystem,
    noise: NoiseConfig,
    acquisition: AcquisitionParams,
    output_dir: Option<PathBuf>,
}

/// Resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub setup: Setup,
    pub output_dir: PathBuf,
}

impl Config {
    /// Flags beat the config file, which beats defaults.
    pub fn resolve(flags: &GlobalFlags) -> Result<Config> {
        let file = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str::<ConfigFile>(&text).map_err(|e| Error::Format {
                    path: path.clone(),
                    reason: e.to_string(),
                })?
            }
            None => ConfigFile::default(),
        };
        let mut system = file.system;
        if let Some(eps) = flags.epsilon {
            system.epsilon = eps;
        }
        let defaults = NoiseModel::from_system(&system);
        let n = file.noise;
        let noise = NoiseModel {
            enabled: !flags.no_noise && n.enabled.unwrap_or(defaults.enabled),
            t1: n.t1.unwrap_or(defaults.t1),
            t2: n.t2.unwrap_or(defaults.t2),
            equilibrium_excited_population: n
                .equilibrium_excited_population
                .unwrap_or(defaults.equilibrium_excited_population),
            substeps_per_delay: n.substeps_per_delay.unwrap_or(defaults.substeps_per_delay),
        };
        let setup = Setup {
            system,
            noise,
            acquisition: file.acquisition,
        };
        setup.validate()?;
        let output_dir = flags
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Config { setup, output_dir })
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Ambiguous { .. } | Error::NoReferenceSignal { .. } => EXIT_AMBIGUOUS,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let config = Config::resolve(&cli.global)?;
    match &cli.command {
        Command::Run { kind, f } => cmd_run((*kind).into(), (*f).into(), &config),
        Command::Verify { only } => cmd_verify(only.as_deref(), &config),
        Command::Scan {
            kind,
            from,
            to,
            steps,
            f,
        } => cmd_scan(*kind, *from, *to, *steps, (*f).into(), &config),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_run(kind: ExperimentKind, f: FunctionLabel, config: &Config) -> Result<i32> {
    let mut record = run(kind, f, &config.setup)?;
    ensure_dir(&config.output_dir)?;
    let stem = format!("{kind}_{f}");
    let csv_path = config.output_dir.join(format!("{stem}_spectrum.csv"));
    let params = config
        .setup
        .acquisition
        .with_readout(kind != ExperimentKind::Quantum);
    export_spectrum(
        &record.spectrum,
        &csv_path,
        &SpectrumSidecar {
            params,
            phase0_deg: record.phase0_deg,
            readings: record.readings.to_vec(),
        },
    )?;
    record.spectrum_file = Some(csv_path.display().to_string());
    write_file(
        &config.output_dir.join(format!("{stem}_record.json")),
        &record.to_json(),
    )?;

    let bits = record
        .readings
        .iter()
        .map(|r| format!("{}={}", r.spin, r.bit.value().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(" ");
    println!("bits: {bits}");
    match kind {
        ExperimentKind::ClassicalF0 => println!("f(0)={}", record.result_bit),
        ExperimentKind::ClassicalF1 => println!("f(1)={}", record.result_bit),
        ExperimentKind::Quantum => println!(
            "result={} {}",
            record.result_bit,
            record.verdict.unwrap_or_default()
        ),
    }
    Ok(EXIT_OK)
}

fn cmd_verify(only: Option<&str>, config: &Config) -> Result<i32> {
    let results = match only {
        Some(name) => vec![verify::run_only(name).ok_or_else(|| Error::UnknownLabel {
            kind: "check",
            label: name.to_string(),
        })?],
        None => verify::run_all(),
    };
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} checks passed", results.len());
    ensure_dir(&config.output_dir)?;
    let report = serde_json::to_string_pretty(&results).expect("report serializes");
    write_file(&config.output_dir.join("verify_report.json"), &report)?;
    Ok(if passed == results.len() {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn cmd_scan(
    kind: ScanArg,
    from: f64,
    to: f64,
    steps: usize,
    f: FunctionLabel,
    config: &Config,
) -> Result<i32> {
    if steps == 0 || !from.is_finite() || !to.is_finite() || from > to || (steps > 1 && from == to)
    {
        return Err(Error::invalid(
            "range",
            "need --from < --to (or equal with --steps 1) and --steps >= 1",
        ));
    }
    let grid = linspace(from, to, steps);
    let mut table = String::new();
    match kind {
        ScanArg::Epsilon => {
            if from < 0.0 || to > 1.0 {
                return Err(Error::invalid("range", "epsilon must lie in [0, 1]"));
            }
            table.push_str("epsilon,result_bit,final_polarization,pt_min_eig,final_pt_min_eig\n");
            for row in epsilon_scan(&grid, f, &config.setup)? {
                let bit = row
                    .result_bit
                    .map_or_else(|| "ambiguous".to_string(), |b| b.to_string());
                table.push_str(&format!(
                    "{},{bit},{:.6},{:.6},{:.6}\n",
                    row.epsilon, row.final_polarization, row.pt_min_eig, row.final_pt_min_eig
                ));
            }
        }
        ScanArg::Temperature => {
            if from <= 0.0 {
                return Err(Error::invalid("range", "temperature must be positive"));
            }
            table.push_str("temperature_k,para_fraction\n");
            for (t, p) in temperature_scan(&grid)? {
                table.push_str(&format!("{t},{p:.9}\n"));
            }
        }
    }
    ensure_dir(&config.output_dir)?;
    let name = match kind {
        ScanArg::Epsilon => "scan_epsilon.csv",
        ScanArg::Temperature => "scan_temperature.csv",
    };
    write_file(&config.output_dir.join(name), &table)?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(table.as_bytes());
    Ok(EXIT_OK)
}
