//! Plain-text policy checkpoints.
//!
//! ```text
//! pedpath-policy v1
//! input 7
//! hidden 64
//! output 10
//! config_hash <hex>
//! count <n>
//! checksum <sha256 of the parameter bytes, hex>
//! <one parameter per line as the 16-digit hex of its IEEE-754 bits>
//! ```
//!
//! Parameters are stored in the flat row-major layout of
//! [`PolicyParameters`]; hex bit patterns make the round trip exact.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::env::OBS_DIM;
use crate::error::{Error, Result};
use crate::policy::{PolicyParameters, ACTION_DIM};

const MAGIC: &str = "pedpath-policy v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParameters,
    pub config_hash: String,
}

fn checksum(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
    hex(&hasher.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let values = self.params.as_slice();
        let mut s = String::with_capacity(values.len() * 17 + 256);
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "input {OBS_DIM}");
        let _ = writeln!(s, "hidden {}", self.params.hidden());
        let _ = writeln!(s, "output {ACTION_DIM}");
        let _ = writeln!(s, "config_hash {}", self.config_hash);
        let _ = writeln!(s, "count {}", values.len());
        let _ = writeln!(s, "checksum {}", checksum(values));
        for v in values {
            let _ = writeln!(s, "{:016x}", v.to_bits());
        }
        s
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| format!("truncated before {what}"))
        };

        if next("header")? != MAGIC {
            return Err("not a pedpath policy checkpoint".into());
        }
        let field = |line: &str, key: &str| -> std::result::Result<String, String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| format!("expected `{key}` line, found `{line}`"))
        };
        let number =
            |s: String, key: &str| s.parse::<usize>().map_err(|_| format!("bad {key} `{s}`"));

        let input = number(field(next("input")?, "input")?, "input")?;
        let hidden = number(field(next("hidden")?, "hidden")?, "hidden")?;
        let output = number(field(next("output")?, "output")?, "output")?;
        if input != OBS_DIM || output != ACTION_DIM {
            return Err(format!("unsupported dims {input}→{output}"));
        }
        let config_hash = field(next("config_hash")?, "config_hash")?;
        let count = number(field(next("count")?, "count")?, "count")?;
        let expected_sum = field(next("checksum")?, "checksum")?;
        if count != PolicyParameters::param_count(hidden) {
            return Err(format!("count {count} does not match hidden size {hidden}"));
        }

        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            let line = next("parameters")?;
            let bits = u64::from_str_radix(line.trim(), 16)
                .map_err(|_| format!("bad parameter {i}: `{line}`"))?;
            values.push(f64::from_bits(bits));
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err("trailing data after parameters".into());
        }
        if checksum(&values) != expected_sum {
            return Err("checksum mismatch".into());
        }
        let params =
            PolicyParameters::from_raw(hidden, values).ok_or("parameter count mismatch")?;
        Ok(Self {
            params,
            config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|reason| Error::Checkpoint {
            path: path.to_owned(),
            reason,
        })
    }
}
