//! Combined per-attenuation table of a sweep, one column pair per statistic.
//!
//! ```text
//! # tool: iolws 0.1.0
//! # seed: 1
//! # config_digest: 5b0e2d4c8a7f1e93
//! attenuation_db,rssi_dbm,min_iolw,min_iolws,max_iolw,max_iolws,mean_iolw,mean_iolws,std_iolw,std_iolws
//! 30,-37.0,0.4290,0.4540,0.4870,0.5120,0.4573,0.4823,0.0176,0.0176
//! ```

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::sim::artifact_header;

use super::{Field, Mode, SummaryStats};

pub const TABLE_COLUMNS: [&str; 10] = [
    "attenuation_db",
    "rssi_dbm",
    "min_iolw",
    "min_iolws",
    "max_iolw",
    "max_iolws",
    "mean_iolw",
    "mean_iolws",
    "std_iolw",
    "std_iolws",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub attenuation_db: f64,
    pub rssi_dbm: f64,
    pub iolw: Option<SummaryStats>,
    pub iolws: Option<SummaryStats>,
}

impl TableRow {
    fn slot(&mut self, mode: Mode) -> &mut Option<SummaryStats> {
        match mode {
            Mode::Iolw => &mut self.iolw,
            Mode::Iolws => &mut self.iolws,
        }
    }

    pub fn stats(&self, mode: Mode) -> Option<&SummaryStats> {
        match mode {
            Mode::Iolw => self.iolw.as_ref(),
            Mode::Iolws => self.iolws.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub seed: u64,
    pub rows: Vec<TableRow>,
    digests: Vec<String>,
}

impl SweepTable {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Adds one series' statistics; rows stay sorted by attenuation.
    pub fn insert(
        &mut self,
        attenuation_db: f64,
        rssi_dbm: f64,
        mode: Mode,
        stats: SummaryStats,
        config_digest: &str,
    ) {
        self.digests.push(config_digest.to_string());
        let idx = match self
            .rows
            .iter()
            .position(|r| r.attenuation_db == attenuation_db)
        {
            Some(i) => i,
            None => {
                let at = self
                    .rows
                    .partition_point(|r| r.attenuation_db < attenuation_db);
                self.rows.insert(
                    at,
                    TableRow {
                        attenuation_db,
                        rssi_dbm,
                        iolw: None,
                        iolws: None,
                    },
                );
                at
            }
        };
        *self.rows[idx].slot(mode) = Some(stats);
    }

    /// Digest over the member series' config digests, in sorted order.
    pub fn digest(&self) -> String {
        let mut d = self.digests.clone();
        d.sort();
        hex::encode(Sha256::digest(d.join(",").as_bytes()))[..16].to_string()
    }

    pub fn to_csv(&self) -> String {
        let mut out = artifact_header(self.seed, &self.digest());
        out.push_str(&TABLE_COLUMNS.join(","));
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{:.1}", row.attenuation_db, row.rssi_dbm);
            for field in Field::ALL {
                for mode in [Mode::Iolw, Mode::Iolws] {
                    out.push(',');
                    if let Some(s) = row.stats(mode) {
                        let v = match field {
                            Field::Min => s.min,
                            Field::Max => s.max,
                            Field::Mean => s.mean,
                            Field::Std => s.std,
                        };
                        let _ = write!(out, "{v:.4}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(mean: f64) -> SummaryStats {
        SummaryStats {
            n: 3,
            min: mean - 0.02,
            max: mean + 0.03,
            mean,
            std: 0.015,
        }
    }

    #[test]
    fn rows_sorted_and_merged() {
        let mut t = SweepTable::new(1);
        t.insert(80.0, -83.0, Mode::Iolw, s(0.48), "b");
        t.insert(30.0, -37.0, Mode::Iolws, s(0.475), "c");
        t.insert(30.0, -37.0, Mode::Iolw, s(0.45), "a");
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].attenuation_db, 30.0);
        assert!(t.rows[0].iolw.is_some() && t.rows[0].iolws.is_some());
        assert!(t.rows[1].iolws.is_none());
    }

    #[test]
    fn csv_shape() {
        let mut t = SweepTable::new(1);
        t.insert(30.0, -37.0, Mode::Iolw, s(0.45), "a");
        t.insert(30.0, -37.0, Mode::Iolws, s(0.475), "b");
        t.insert(80.0, -83.0, Mode::Iolw, s(0.48), "c");
        let text = t.to_csv();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# tool: iolws "));
        assert_eq!(lines[3].split(',').count(), 10);
        assert_eq!(
            lines[4],
            "30,-37.0,0.4300,0.4550,0.4800,0.5050,0.4500,0.4750,0.0150,0.0150"
        );
        assert_eq!(lines[5], "80,-83.0,0.4600,,0.5100,,0.4800,,0.0150,");
    }

    #[test]
    fn digest_ignores_insertion_order() {
        let mut a = SweepTable::new(1);
        a.insert(30.0, -37.0, Mode::Iolw, s(0.45), "x");
        a.insert(50.0, -53.0, Mode::Iolw, s(0.45), "y");
        let mut b = SweepTable::new(1);
        b.insert(50.0, -53.0, Mode::Iolw, s(0.45), "y");
        b.insert(30.0, -37.0, Mode::Iolw, s(0.45), "x");
        assert_eq!(a.digest(), b.digest());
    }
}
