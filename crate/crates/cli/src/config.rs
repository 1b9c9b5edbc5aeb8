//! Scenario config files.
//!
//! Four optional sections; anything left out keeps its default.
//!
//! ```toml
//! [scenario]
//! kind = "roaming_connect"        # or "handover"
//! safety = true
//! attenuation_on_db = 80.0
//! repetitions = 300
//! seed = 1
//!
//! [profile]
//! w_cycle_us = 5000
//!
//! [rssi_map]
//! anchors = [
//!     { attenuation_db = 30.0, rssi_dbm = -37.0 },
//!     { attenuation_db = 85.0, rssi_dbm = -89.0 },
//! ]
//!
//! [per_curve]
//! rssi_mid = -90.6
//! slope = 0.572
//! floor = 0.0
//! ```

use std::path::Path;

use iolws_core::sim::{artifact_header, ScenarioConfig};
use toml::{Table, Value};

use crate::Failure;

const SECTIONS: [&str; 3] = ["profile", "rssi_map", "per_curve"];

pub fn parse(text: &str) -> Result<ScenarioConfig, String> {
    let mut file: Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let mut flat = match file.remove("scenario") {
        Some(Value::Table(t)) => t,
        Some(_) => return Err("[scenario] must be a table".into()),
        None => Table::new(),
    };
    for name in SECTIONS {
        if let Some(section) = file.remove(name) {
            if flat.contains_key(name) {
                return Err(format!("[{name}] may not also appear inside [scenario]"));
            }
            flat.insert(name.into(), section);
        }
    }
    if let Some(unknown) = file.keys().next() {
        return Err(format!("unknown section or key {unknown:?}"));
    }
    let cfg: ScenarioConfig = Value::Table(flat)
        .try_into()
        .map_err(|e: toml::de::Error| e.to_string())?;
    Ok(cfg)
}

pub fn load(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

/// Canonical config file for `cfg`, headed by the artifact comment lines.
pub fn render(cfg: &ScenarioConfig) -> String {
    let mut flat = Table::try_from(cfg).expect("scenario config serializes");
    let mut out = Table::new();
    let sections: Vec<_> = SECTIONS
        .iter()
        .filter_map(|&name| flat.remove(name).map(|v| (name, v)))
        .collect();
    out.insert("scenario".into(), Value::Table(flat));
    for (name, v) in sections {
        out.insert(name.into(), v);
    }
    let mut text = artifact_header(cfg.seed, &cfg.digest());
    text.push_str(&toml::to_string(&out).expect("table serializes"));
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use iolws_core::channel::PerCurve;
    use iolws_core::sim::ScenarioKind;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(parse("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = parse(
            "[scenario]\nkind = \"handover\"\nsafety = true\nattenuation_on_db = 77.0\n\
             [profile]\nw_cycle_us = 4000\n\
             [per_curve]\nrssi_mid = -85.0\nslope = 1.0\nfloor = 0.0\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ScenarioKind::Handover);
        assert!(cfg.safety);
        assert_eq!(cfg.attenuation_on_db, 77.0);
        assert_eq!(cfg.profile.w_cycle_us, 4000);
        assert_eq!(cfg.profile.scan_dwell_us, 58_000);
        assert_eq!(cfg.per_curve, PerCurve::new(-85.0, 1.0, 0.0).unwrap());
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = ScenarioConfig::handover(65.0, true);
        cfg.seed = 9;
        let text = render(&cfg);
        assert!(text.starts_with("# tool: iolws "));
        assert!(text.contains("\n[scenario]\n"));
        assert!(text.contains("\n[[rssi_map.anchors]]\n"));
        assert_eq!(parse(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(parse("[scenario]\nbogus = 1\n").is_err());
        assert!(parse("[plot]\nx = 1\n").is_err());
        assert!(parse("[profile]\nw_cycle = 1\n").is_err());
    }

    #[test]
    fn rejects_bad_map() {
        let text = "[rssi_map]\nanchors = [{ attenuation_db = 30.0, rssi_dbm = -37.0 }]\n";
        assert!(parse(text).is_err());
    }
}
