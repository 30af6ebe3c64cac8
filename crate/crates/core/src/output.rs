//! Artifact plumbing shared by every file writer: the provenance comment and
//! CSV reader/writer construction.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "bondtca";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata stamped on every artifact so it can be traced back to its inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
            seed,
        }
    }

    /// Hashes any serializable config through its canonical JSON form.
    pub fn for_config<T: Serialize>(config: &T, seed: u64) -> Self {
        Self::new(config_hash(config), seed)
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# {} {} config_hash={} seed={}",
            self.tool, self.version, self.config_hash, self.seed
        )
    }
}

pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).unwrap_or_default();
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

pub fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source)
}

pub fn csv_writer<W: Write>(mut sink: W, meta: Option<&Provenance>) -> Result<csv::Writer<W>> {
    if let Some(meta) = meta {
        writeln!(sink, "{}", meta.comment_line()).map_err(|e| Error::io("<output>", e))?;
    }
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(sink))
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_f64(text: &str, row: usize, column: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(row, column, format!("not a number: {text:?}")))
}

/// Resolves each expected column name to its index in a header record.
pub fn header_indices(headers: &csv::StringRecord, expected: &[&str]) -> Result<Vec<usize>> {
    expected
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::parse(1, *name, "column missing from header"))
        })
        .collect()
}

pub fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [100.0, 0.1, 1.0 / 3.0, 99.5, 1e-12, 123456789.125] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(100.0), "100");
    }

    #[test]
    fn config_hash_is_stable() {
        let a = config_hash(&serde_json::json!({"a": 1, "b": [1, 2]}));
        let b = config_hash(&serde_json::json!({"a": 1, "b": [1, 2]}));
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
    }
}
