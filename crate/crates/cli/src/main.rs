mod artifacts;
mod config;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iolws_core::channel::{CalibrationOptions, CalibrationTarget, ChannelError};
use iolws_core::metrics::{Mode, Reference, SweepTable};
use iolws_core::sim::{
    artifact_header, calibrate_connect, run_scenario, run_sweep, ScenarioConfig, ScenarioError,
    ScenarioKind, MAX_ATTENUATION_DB,
};

pub const EXIT_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILED,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::runtime(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Invalid(_) => EXIT_CONFIG,
            ScenarioError::TooManyDiscards { .. } => EXIT_INFEASIBLE,
            ScenarioError::Protocol(_) => EXIT_FAILED,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Roaming and handover simulator for IO-Link Wireless (Safety).
#[derive(Parser)]
#[command(name = "iolws-sim", version)]
struct Cli {
    /// Scenario config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "IOLWS_OUT_DIR", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Run one scenario per attenuation and mode.
    Sweep(SweepArgs),
    /// Fit the loss curve to the reference connect means.
    Calibrate(CalibrateArgs),
    /// Compare sweep outputs with the reference tables.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Connect,
    Handover,
}

impl From<Kind> for ScenarioKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Connect => ScenarioKind::RoamingConnect,
            Kind::Handover => ScenarioKind::Handover,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Modes {
    Both,
    Iolw,
    Iolws,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Valid repetitions per scenario.
    #[arg(long)]
    reps: Option<u32>,
}

impl Common {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(reps) = self.reps {
            cfg.repetitions = reps;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    safety: Option<bool>,
    #[arg(long)]
    atten_db: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Comma-separated attenuations; defaults to the bench settings of the kind.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    atten_db: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "both")]
    modes: Modes,
    /// Run the scenarios one after another.
    #[arg(long)]
    serial: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Reference file; the bundled bench values when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Search iterations.
    #[arg(long, default_value_t = 40)]
    budget: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    /// Connect sweep directory.
    #[arg(long)]
    connect: Option<PathBuf>,
    /// Handover sweep directory.
    #[arg(long)]
    handover: Option<PathBuf>,
    /// Reference file; the bundled bench values when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
}

const CONNECT_ATTENUATIONS: [f64; 6] = [30.0, 50.0, 65.0, 80.0, 83.0, 85.0];
/// Handover above 80 dB does not complete in reasonable time on the bench.
const HANDOVER_ATTENUATIONS: [f64; 5] = [30.0, 50.0, 65.0, 77.0, 80.0];

fn check_attenuation(a: f64) -> Result<(), Failure> {
    if (0.0..=MAX_ATTENUATION_DB).contains(&a) {
        Ok(())
    } else {
        Err(Failure::config(format!(
            "attenuation {a} dB outside [0, {MAX_ATTENUATION_DB}] dB"
        )))
    }
}

fn validated(cfg: ScenarioConfig) -> Result<ScenarioConfig, Failure> {
    check_attenuation(cfg.attenuation_on_db)?;
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(kind) = args.kind {
        cfg.kind = kind.into();
    }
    if let Some(safety) = args.safety {
        cfg.safety = safety;
    }
    if let Some(a) = args.atten_db {
        cfg.attenuation_on_db = a;
    }
    args.common.apply(&mut cfg);
    let cfg = validated(cfg)?;
    let series = run_scenario(&cfg)?;
    let written = artifacts::write_series(&cli.out, &cfg, &series)?;
    print!(
        "{}",
        artifacts::summary_text(&cfg, &series, &written.stats, &written.ecdf)
    );
    println!("wrote {}", cli.out.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<(), Failure> {
    let mut base = config::load(cli.config.as_deref())?;
    if let Some(kind) = args.kind {
        base.kind = kind.into();
    }
    args.common.apply(&mut base);
    let attenuations = match &args.atten_db {
        Some(list) => list.clone(),
        None => match base.kind {
            ScenarioKind::RoamingConnect => CONNECT_ATTENUATIONS.to_vec(),
            ScenarioKind::Handover => HANDOVER_ATTENUATIONS.to_vec(),
        },
    };
    if attenuations.is_empty() {
        return Err(Failure::config("attenuation list is empty"));
    }
    let modes: &[bool] = match args.modes {
        Modes::Both => &[false, true],
        Modes::Iolw => &[false],
        Modes::Iolws => &[true],
    };
    let mut configs = Vec::new();
    for &a in &attenuations {
        for &safety in modes {
            configs.push(validated(ScenarioConfig {
                attenuation_on_db: a,
                safety,
                ..base.clone()
            })?);
        }
    }

    let results = run_sweep(&configs, !args.serial);
    artifacts::create_dir(&cli.out)?;
    let mut table = SweepTable::new(base.seed);
    let mut failure = None;
    for (cfg, result) in configs.iter().zip(results) {
        let name = artifacts::cell_name(cfg);
        match result {
            Ok(series) => {
                let written = artifacts::write_series(&cli.out.join(&name), cfg, &series)?;
                let rssi = cfg.rssi_map.rssi_from_attenuation(cfg.attenuation_on_db);
                table.insert(
                    cfg.attenuation_on_db,
                    rssi,
                    Mode::from_safety(cfg.safety),
                    written.stats,
                    &series.config_digest,
                );
                println!(
                    "{name}: mean {:.4} s std {:.4} s ({} discarded)",
                    written.stats.mean, written.stats.std, series.discarded
                );
            }
            Err(e) => {
                let mut f = Failure::from(e);
                f.message = format!("{name}: {}", f.message);
                failure = Some(f);
                break;
            }
        }
    }
    artifacts::write_file(&cli.out.join("table.csv"), &table.to_csv())?;
    println!("wrote {}", cli.out.display());
    failure.map_or(Ok(()), Err)
}

fn load_reference(path: Option<&Path>) -> Result<Reference, Failure> {
    match path {
        None => Ok(Reference::builtin()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            Reference::from_toml(&text)
                .map_err(|e| Failure::config(format!("{}: {e}", p.display())))
        }
    }
}

fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs) -> Result<(), Failure> {
    let reference = load_reference(args.reference.as_deref())?;
    let mut base = config::load(cli.config.as_deref())?;
    args.common.apply(&mut base);
    base.kind = ScenarioKind::RoamingConnect;
    base.safety = false;
    let base = validated(base)?;
    let targets: Vec<_> = reference
        .connect
        .iter()
        .filter_map(|row| {
            Some(CalibrationTarget {
                attenuation_db: row.attenuation_db,
                rssi_dbm: row.rssi_dbm,
                mean_s: row.iolw.mean?,
            })
        })
        .collect();
    let options = CalibrationOptions::for_targets(&targets, args.budget);
    let report = match calibrate_connect(&base, &targets, options) {
        Ok(report) => report,
        Err(ChannelError::CalibrationDiverged(report)) => {
            print!("{report}");
            return Err(Failure {
                code: EXIT_DIVERGED,
                message: "calibration diverged: strong-signal rows off by more than 25 %".into(),
            });
        }
        Err(e) => return Err(Failure::config(e.to_string())),
    };
    print!("{report}");

    let mut cfg = base.clone();
    cfg.per_curve = report.curve;
    let mut text = artifact_header(cfg.seed, &cfg.digest());
    text.push_str(&format!(
        "# budget: {}\n# objective: {:.6}\n",
        args.budget, report.objective
    ));
    let mut section = toml::Table::new();
    section.insert(
        "per_curve".into(),
        toml::Value::try_from(report.curve).expect("curve serializes"),
    );
    text.push_str(&toml::to_string(&section).expect("table serializes"));
    artifacts::create_dir(&cli.out)?;
    let path = cli.out.join("per_curve.toml");
    artifacts::write_file(&path, &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Failure> {
    if args.connect.is_none() && args.handover.is_none() {
        return Err(Failure::config("report needs --connect and/or --handover"));
    }
    let reference = load_reference(args.reference.as_deref())?;
    let mut loaded = Vec::new();
    for dir in [&args.connect, &args.handover].into_iter().flatten() {
        loaded.extend(artifacts::scan(dir)?);
    }
    let outcome = report::evaluate(&reference, &loaded)?;
    print!("{outcome}");
    if outcome.pass() {
        Ok(())
    } else {
        Err(Failure::runtime("report: some comparisons failed"))
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(&cli, args),
        Command::Sweep(args) => cmd_sweep(&cli, args),
        Command::Calibrate(args) => cmd_calibrate(&cli, args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("iolws-sim: {f}");
            ExitCode::from(f.code)
        }
    }
}
