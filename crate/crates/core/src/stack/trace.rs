use std::fmt;
use std::str::FromStr;

use crate::sim::SimTime;

/// One state transition: `timestamp_us entity phase_from phase_to event`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub at: SimTime,
    pub entity: String,
    pub from: String,
    pub to: String,
    pub event: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.at.as_micros(),
            self.entity,
            self.from,
            self.to,
            self.event
        )
    }
}

impl FromStr for TraceRecord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        let [at, entity, from, to, event] = fields[..] else {
            return Err(format!("expected 5 fields in trace line {s:?}"));
        };
        Ok(Self {
            at: SimTime(at.parse().map_err(|e| format!("{e} in {s:?}"))?),
            entity: entity.into(),
            from: from.into(),
            to: to.into(),
            event: event.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let rec = TraceRecord {
            at: SimTime(2_429_000),
            entity: "device".into(),
            from: "PAIRING".into(),
            to: "CONNECTED".into(),
            event: "pairing_ack".into(),
        };
        let line = rec.to_string();
        assert_eq!(line, "2429000 device PAIRING CONNECTED pairing_ack");
        assert_eq!(line.parse::<TraceRecord>().unwrap(), rec);
        assert!("1 device".parse::<TraceRecord>().is_err());
    }
}
