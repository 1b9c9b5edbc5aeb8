//! Per-scenario output directory: `scenario.toml`, `durations.csv`,
//! `ecdf.csv` and `summary.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use iolws_core::metrics::{ecdf, kind_name, summarize, Ecdf, Mode, SummaryStats};
use iolws_core::sim::{artifact_header, DurationSeries, ScenarioConfig};

use crate::{config, Failure};

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const DURATIONS_FILE: &str = "durations.csv";
pub const ECDF_FILE: &str = "ecdf.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

/// Directory name of one sweep cell, e.g. `connect_80dB_iolws`.
pub fn cell_name(cfg: &ScenarioConfig) -> String {
    format!(
        "{}_{}dB_{}",
        kind_name(cfg.kind),
        cfg.attenuation_on_db,
        Mode::from_safety(cfg.safety).as_str()
    )
}

pub struct Written {
    pub stats: SummaryStats,
    pub ecdf: Ecdf,
}

pub fn write_series(
    dir: &Path,
    cfg: &ScenarioConfig,
    series: &DurationSeries,
) -> Result<Written, Failure> {
    let stats = summarize(series).map_err(|e| Failure::runtime(e.to_string()))?;
    let e = ecdf(series).map_err(|e| Failure::runtime(e.to_string()))?;
    create_dir(dir)?;
    write_file(&dir.join(SCENARIO_FILE), &config::render(cfg))?;
    write_file(&dir.join(DURATIONS_FILE), &series.to_csv())?;
    write_file(
        &dir.join(ECDF_FILE),
        &e.to_csv(series.seed, &series.config_digest),
    )?;
    write_file(
        &dir.join(SUMMARY_FILE),
        &summary_text(cfg, series, &stats, &e),
    )?;
    Ok(Written { stats, ecdf: e })
}

pub fn summary_text(
    cfg: &ScenarioConfig,
    series: &DurationSeries,
    s: &SummaryStats,
    e: &Ecdf,
) -> String {
    let mut out = artifact_header(series.seed, &series.config_digest);
    let q99 = e
        .quantile_seconds(0.99)
        .expect("0.99 is a valid probability");
    let _ = writeln!(out, "kind: {}", kind_name(cfg.kind));
    let _ = writeln!(out, "mode: {}", Mode::from_safety(cfg.safety).as_str());
    let _ = writeln!(out, "attenuation_db: {}", cfg.attenuation_on_db);
    let _ = writeln!(
        out,
        "rssi_dbm: {:.1}",
        cfg.rssi_map.rssi_from_attenuation(cfg.attenuation_on_db)
    );
    let _ = writeln!(out, "repetitions: {}", s.n);
    let _ = writeln!(out, "discarded: {}", series.discarded);
    let _ = writeln!(out, "min_s: {:.4}", s.min);
    let _ = writeln!(out, "max_s: {:.4}", s.max);
    let _ = writeln!(out, "mean_s: {:.4}", s.mean);
    let _ = writeln!(out, "std_s: {:.4}", s.std);
    let _ = writeln!(out, "q99_s: {q99:.4}");
    out
}

/// A scenario directory read back for reporting.
pub struct Loaded {
    pub dir: PathBuf,
    pub config: ScenarioConfig,
    pub series: DurationSeries,
}

pub fn load_series(dir: &Path) -> Result<Loaded, Failure> {
    let config = config::load(Some(&dir.join(SCENARIO_FILE)))?;
    let path = dir.join(DURATIONS_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let series = DurationSeries::from_csv(&text)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if series.config_digest != config.digest() {
        return Err(Failure::config(format!(
            "{}: config digest {} does not match {}",
            path.display(),
            series.config_digest,
            config.digest()
        )));
    }
    Ok(Loaded {
        dir: dir.to_path_buf(),
        config,
        series,
    })
}

/// Every scenario directory directly below `root`, in name order.
pub fn scan(root: &Path) -> Result<Vec<Loaded>, Failure> {
    let entries =
        fs::read_dir(root).map_err(|e| Failure::config(format!("{}: {e}", root.display())))?;
    let mut dirs: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SCENARIO_FILE).is_file())
        .collect();
    dirs.sort();
    if root.join(SCENARIO_FILE).is_file() {
        dirs.insert(0, root.to_path_buf());
    }
    if dirs.is_empty() {
        return Err(Failure::config(format!(
            "{}: no scenario outputs found",
            root.display()
        )));
    }
    dirs.iter().map(|d| load_series(d)).collect()
}
