//! File-based pipeline driver: predict → simulate → reconstruct → analyze.
//!
//! Every stage reads and writes plain JSON/CSV artifacts in an output
//! directory, so each intermediate quantity can be inspected on its own.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O failure while reading or writing artifacts |
//! | 2 | usage or configuration error (unknown scenario, missing seed, bad exposure, missing file) |
//! | 3 | malformed or physically invalid input (counts file, density matrix) |
//! | 4 | numerical failure |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use eraser_core::entanglement::report_with_angles;
use eraser_core::measurement::{
    correlation, polarizer_probability, records_from_json, records_to_json, simulate_counts,
    standard_tomography_set, AngleSet,
};
use eraser_core::qstate::{operator_to_json, DensityMatrix};
use eraser_core::spdc::{
    coherence_gaussian, predict, rho_from_coherence, FilterScenario, WavePacketSpec,
    DEFAULT_CENTER_NM, DEFAULT_TAU_FS,
};
use eraser_core::tomography::{linear_invert, mle_reconstruct, ReconstructionReport};
use eraser_core::Error;

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Bob angles of the fringe table, in degrees.
pub const FRINGE_STEP_DEG: f64 = 5.0;
/// Alice angles of the fringe table, in degrees.
pub const FRINGE_ALICE_DEG: [f64; 2] = [45.0, 135.0];

#[derive(Debug, Parser)]
#[command(
    name = "eraser",
    version,
    about = "Two-photon polarization entanglement pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model coherence, density matrix and entanglement report for a filter scenario.
    Predict {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Poisson coincidence counts for the 16 tomography settings.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Density-matrix JSON to sample from instead of a scenario.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["bandwidth", "sigma_t", "scenario"])]
        rho: Option<PathBuf>,
        /// Expected number of detected pairs per setting.
        #[arg(long, value_name = "N")]
        exposure: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Linear inversion followed by maximum-likelihood reconstruction.
    Reconstruct {
        #[arg(long, value_name = "FILE")]
        counts: PathBuf,
        /// Seed for the perturbed optimizer starts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Entanglement report and correlation fringes of a density matrix.
    Analyze {
        #[arg(long, value_name = "FILE")]
        rho: PathBuf,
        /// Pairs per unit rate in the fringe table.
        #[arg(long, value_name = "N")]
        exposure: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Filter bandwidth in nm (catalogued: 8.0, 1.2).
    #[arg(long, value_name = "NM")]
    pub bandwidth: Option<f64>,
    /// Explicit temporal width of the wave packets in fs.
    #[arg(long = "sigma-t", value_name = "FS")]
    pub sigma_t: Option<f64>,
    /// Delay between the two emission amplitudes in fs.
    #[arg(long, value_name = "FS")]
    pub tau: Option<f64>,
    /// Scenario JSON; flags given alongside override its fields.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// CHSH angles as a1,a2,b1,b2 in degrees.
    #[arg(long, value_name = "A1,A2,B1,B2")]
    pub angles: Option<String>,
}

/// Resolved inputs shared by all stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scenario: Option<FilterScenario>,
    pub rho: Option<PathBuf>,
    pub counts: Option<PathBuf>,
    pub exposure: Option<f64>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub angles: AngleSet,
}

impl PipelineConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            scenario: None,
            rho: None,
            counts: None,
            exposure: None,
            seed: None,
            out: out.into(),
            angles: AngleSet::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn input(context: &str, e: Error) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: format!("{context}: {e}"),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Configuration(_) | Error::Parameter(_) => EXIT_USAGE,
            Error::Accuracy { .. } | Error::UndefinedCorrelation => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `a1,a2,b1,b2` in degrees.
pub fn parse_angles(s: &str) -> CliResult<AngleSet> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::usage(format!("--angles {s:?}: {e}")))?;
    if values.len() != 4 {
        return Err(CliError::usage(format!(
            "--angles needs four comma-separated values, got {}",
            values.len()
        )));
    }
    Ok(AngleSet::new(
        [values[0], values[1]],
        [values[2], values[3]],
    )?)
}

fn resolve_scenario(args: &ScenarioArgs) -> CliResult<Option<FilterScenario>> {
    let mut scenario = match &args.scenario {
        Some(path) => {
            let text = read(path)?;
            Some(
                serde_json::from_str::<FilterScenario>(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    if args.bandwidth.is_none() && args.sigma_t.is_none() && args.tau.is_none() {
        return Ok(scenario);
    }
    let s = scenario.get_or_insert(FilterScenario {
        bandwidth_nm: None,
        center_nm: DEFAULT_CENTER_NM,
        tau_fs: DEFAULT_TAU_FS,
        sigma_t_fs: None,
    });
    if let Some(bw) = args.bandwidth {
        s.bandwidth_nm = Some(bw);
    }
    if let Some(sigma) = args.sigma_t {
        s.sigma_t_fs = Some(sigma);
    }
    if let Some(tau) = args.tau {
        s.tau_fs = tau;
    }
    Ok(scenario)
}

impl TryFrom<&Command> for PipelineConfig {
    type Error = CliError;

    fn try_from(cmd: &Command) -> CliResult<Self> {
        let common = match cmd {
            Command::Predict { common, .. }
            | Command::Simulate { common, .. }
            | Command::Reconstruct { common, .. }
            | Command::Analyze { common, .. } => common,
        };
        let mut cfg = PipelineConfig::new(&common.out);
        if let Some(a) = &common.angles {
            cfg.angles = parse_angles(a)?;
        }
        match cmd {
            Command::Predict { scenario, .. } => cfg.scenario = resolve_scenario(scenario)?,
            Command::Simulate {
                scenario,
                rho,
                exposure,
                seed,
                ..
            } => {
                cfg.scenario = resolve_scenario(scenario)?;
                cfg.rho = rho.clone();
                cfg.exposure = *exposure;
                cfg.seed = *seed;
            }
            Command::Reconstruct { counts, seed, .. } => {
                cfg.counts = Some(counts.clone());
                cfg.seed = Some(*seed);
            }
            Command::Analyze { rho, exposure, .. } => {
                cfg.rho = Some(rho.clone());
                cfg.exposure = *exposure;
            }
        }
        Ok(cfg)
    }
}

/// Runs one subcommand and returns the paths it wrote.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let cfg = PipelineConfig::try_from(&cli.command)?;
    match cli.command {
        Command::Predict { .. } => cmd_predict(&cfg),
        Command::Simulate { .. } => cmd_simulate(&cfg),
        Command::Reconstruct { .. } => cmd_reconstruct(&cfg),
        Command::Analyze { .. } => cmd_analyze(&cfg),
    }
}

fn read(path: &Path) -> CliResult<String> {
    if !path.exists() {
        return Err(CliError::usage(format!("{}: no such file", path.display())));
    }
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let mut text = contents.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn load_rho(path: &Path) -> CliResult<DensityMatrix> {
    DensityMatrix::from_json(&read(path)?)
        .map_err(|e| CliError::input(&path.display().to_string(), e))
}

fn require_scenario(cfg: &PipelineConfig) -> CliResult<&FilterScenario> {
    cfg.scenario.as_ref().ok_or_else(|| {
        CliError::usage("no scenario: pass --bandwidth, --sigma-t/--tau or --scenario")
    })
}

/// Writes `coherence.json`, `rho.json` and `report.json`.
pub fn cmd_predict(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let scenario = require_scenario(cfg)?;
    let prediction = predict(scenario)?;
    let report = report_with_angles(&prediction.rho, &cfg.angles)?;
    let tau = prediction.wave_packet.tau_fs();
    let transform_limited_coherence = prediction
        .transform_limited_sigma_t_fs
        .map(|s| coherence_gaussian(&WavePacketSpec::new(s, tau)?).map(|c| c.magnitude()))
        .transpose()?;
    let c = prediction.coherence.value();
    let coherence = json!({
        "scenario": prediction.scenario,
        "sigma_t_fs": prediction.wave_packet.sigma_t_fs(),
        "tau_fs": tau,
        "coherence": { "re": c.re, "im": c.im },
        "magnitude": prediction.coherence.magnitude(),
        "transform_limited_sigma_t_fs": prediction.transform_limited_sigma_t_fs,
        "transform_limited_coherence": transform_limited_coherence,
    });
    Ok(vec![
        write(&cfg.out, "coherence.json", &pretty(&coherence))?,
        write(&cfg.out, "rho.json", &prediction.rho.to_json())?,
        write(&cfg.out, "report.json", &report.to_json())?,
    ])
}

/// Writes `counts.json`.
pub fn cmd_simulate(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::usage("simulate requires --seed"))?;
    let exposure = cfg
        .exposure
        .ok_or_else(|| CliError::usage("simulate requires --exposure"))?;
    if !(exposure > 0.0 && exposure.is_finite()) {
        return Err(CliError::usage(format!(
            "--exposure must be positive, got {exposure}"
        )));
    }
    let rho = match &cfg.rho {
        Some(path) => load_rho(path)?,
        None => rho_from_coherence(coherence_gaussian(&require_scenario(cfg)?.wave_packet()?)?),
    };
    let records = simulate_counts(&rho, &standard_tomography_set(), exposure, seed)?;
    Ok(vec![write(
        &cfg.out,
        "counts.json",
        &records_to_json(&records),
    )?])
}

/// Writes `rho_linear.json`, `rho_mle.json` and `reconstruction.json`.
pub fn cmd_reconstruct(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let path = cfg
        .counts
        .as_ref()
        .ok_or_else(|| CliError::usage("reconstruct requires --counts"))?;
    let context = path.display().to_string();
    let records = records_from_json(&read(path)?).map_err(|e| CliError::input(&context, e))?;
    let raw = linear_invert(&records).map_err(|e| CliError::input(&context, e))?;
    let mle = mle_reconstruct(&records, Some(&raw), cfg.seed.unwrap_or(0))?;
    let report = ReconstructionReport::new(&raw, &mle);
    let report = serde_json::to_string_pretty(&report).expect("report serializes");
    Ok(vec![
        write(
            &cfg.out,
            "rho_linear.json",
            &operator_to_json(raw.entries()),
        )?,
        write(&cfg.out, "rho_mle.json", &mle.rho.to_json())?,
        write(&cfg.out, "reconstruction.json", &report)?,
    ])
}

/// Writes `report.json` and `fringes.csv`.
pub fn cmd_analyze(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let path = cfg
        .rho
        .as_ref()
        .ok_or_else(|| CliError::usage("analyze requires --rho"))?;
    let rho = load_rho(path)?;
    let report = report_with_angles(&rho, &cfg.angles)?;
    let fringes = fringe_table(&rho, cfg.exposure.unwrap_or(1.0))?;
    Ok(vec![
        write(&cfg.out, "report.json", &report.to_json())?,
        write(&cfg.out, "fringes.csv", &fringes)?,
    ])
}

/// Coincidence rate and correlation versus Bob's polarizer angle for
/// Alice at 45° and 135°.
pub fn fringe_table(rho: &DensityMatrix, exposure: f64) -> CliResult<String> {
    let mut csv = String::from("bob_angle_deg,rate_alice45,rate_alice135,E_alice45,E_alice135\n");
    let steps = (180.0 / FRINGE_STEP_DEG).round() as usize;
    for i in 0..=steps {
        let bob = i as f64 * FRINGE_STEP_DEG;
        let [a1, a2] = FRINGE_ALICE_DEG;
        writeln!(
            csv,
            "{bob},{},{},{},{}",
            exposure * polarizer_probability(rho, a1, bob)?,
            exposure * polarizer_probability(rho, a2, bob)?,
            correlation(rho, a1, bob)?,
            correlation(rho, a2, bob)?,
        )
        .expect("writing to a String");
    }
    Ok(csv)
}
