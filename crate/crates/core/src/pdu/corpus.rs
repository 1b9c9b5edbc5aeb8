//! Text corpus of output frames with expected decode outcomes.
//!
//! ```text
//! # comment
//! @key 00112233445566778899aabbccddeeff
//! @identity 2 5
//! @last-mcnt none
//! 1001020501...a7f3 OK
//! @last-mcnt 1
//! 1001020501...a7f3 STALE_COUNTER
//! ```
//!
//! Frame lines are hex followed by the expected outcome token. Directives set
//! the receiver context for all following lines.

use std::fmt::Write as _;

use super::frame::{decode_output_pdu, CounterWindow, PairingIdentity, DEFAULT_COUNTER_SPAN};
use super::mac::SessionKey;
use super::{DecodeOutcome, PduError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub line: usize,
    pub frame: Vec<u8>,
    pub key: SessionKey,
    pub identity: PairingIdentity,
    pub last_mcnt: Option<u16>,
    pub expected: DecodeOutcome,
}

impl CorpusEntry {
    pub fn window(&self) -> CounterWindow {
        match self.last_mcnt {
            Some(last) => CounterWindow::after(last, DEFAULT_COUNTER_SPAN),
            None => CounterWindow::OPEN,
        }
    }

    /// Decodes the frame in this entry's context.
    pub fn outcome(&self) -> Result<DecodeOutcome, PduError> {
        let result = decode_output_pdu(&self.frame, &self.key, self.identity, self.window());
        match DecodeOutcome::of(&result) {
            Some(outcome) => Ok(outcome),
            None => Err(result.expect_err("Ok always maps to an outcome")),
        }
    }
}

fn parse_error(line: usize, msg: impl std::fmt::Display) -> PduError {
    PduError::InvalidParameter(format!("corpus line {line}: {msg}"))
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusEntry>, PduError> {
    let mut key = None;
    let mut identity = None;
    let mut last_mcnt = None;
    let mut entries = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let head = tokens.next().expect("non-empty line");
        if let Some(directive) = head.strip_prefix('@') {
            match directive {
                "key" => {
                    let value = tokens
                        .next()
                        .ok_or_else(|| parse_error(line, "missing key"))?;
                    let bytes = hex::decode(value).map_err(|e| parse_error(line, e))?;
                    let material: [u8; 16] = bytes
                        .try_into()
                        .map_err(|_| parse_error(line, "key must be 16 octets"))?;
                    key = Some(SessionKey::new(material));
                }
                "identity" => {
                    let mut next = || -> Result<u8, PduError> {
                        tokens
                            .next()
                            .ok_or_else(|| parse_error(line, "identity needs track and slot"))?
                            .parse()
                            .map_err(|e| parse_error(line, e))
                    };
                    let (track, slot) = (next()?, next()?);
                    identity = Some(PairingIdentity::new(track, slot)?);
                }
                "last-mcnt" => {
                    let value = tokens
                        .next()
                        .ok_or_else(|| parse_error(line, "missing counter"))?;
                    last_mcnt = match value {
                        "none" => None,
                        v => Some(v.parse::<u16>().map_err(|e| parse_error(line, e))?),
                    };
                }
                other => return Err(parse_error(line, format!("unknown directive @{other}"))),
            }
            continue;
        }

        let frame = hex::decode(head).map_err(|e| parse_error(line, e))?;
        let expected = tokens
            .next()
            .ok_or_else(|| parse_error(line, "missing expected outcome"))?
            .parse()?;
        entries.push(CorpusEntry {
            line,
            frame,
            key: key.ok_or_else(|| parse_error(line, "frame before @key"))?,
            identity: identity.ok_or_else(|| parse_error(line, "frame before @identity"))?,
            last_mcnt,
            expected,
        });
    }
    Ok(entries)
}

/// Serializes entries, emitting directives only when the context changes.
pub fn write_corpus(entries: &[CorpusEntry]) -> String {
    let mut out = String::new();
    let mut key = None;
    let mut identity = None;
    let mut last_mcnt: Option<Option<u16>> = None;
    for entry in entries {
        if key != Some(entry.key) {
            let _ = writeln!(out, "@key {}", hex::encode(entry.key.as_bytes()));
            key = Some(entry.key);
        }
        if identity != Some(entry.identity) {
            let _ = writeln!(
                out,
                "@identity {} {}",
                entry.identity.track(),
                entry.identity.slot()
            );
            identity = Some(entry.identity);
        }
        if last_mcnt != Some(entry.last_mcnt) {
            match entry.last_mcnt {
                Some(v) => {
                    let _ = writeln!(out, "@last-mcnt {v}");
                }
                None => out.push_str("@last-mcnt none\n"),
            }
            last_mcnt = Some(entry.last_mcnt);
        }
        let _ = writeln!(out, "{} {}", hex::encode(&entry.frame), entry.expected);
    }
    out
}
