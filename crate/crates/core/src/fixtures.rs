//! Plain-text sequence files: one positive decimal integer per line, line
//! `m` holding `a_m`. Blank lines and lines starting with `#` are skipped.

use std::path::Path;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

/// `a_1 ..= a_31` for 1324-avoiders.
pub const BUNDLED_A1324: &str = include_str!("../../../fixtures/a1324.txt");

pub fn parse_sequence(text: &str) -> Result<Vec<BigUint>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        if !line.bytes().all(|b| b.is_ascii_digit()) {
            return Err(parse_err(format!(
                "expected a non-negative integer, found {line:?}"
            )));
        }
        let value: BigUint = line.parse().map_err(|e| parse_err(format!("{e}")))?;
        if value.is_zero() {
            return Err(parse_err("sequence terms must be positive".into()));
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(Error::invalid("the sequence file has no terms"));
    }
    Ok(out)
}

pub fn load_sequence(path: &Path) -> Result<Vec<BigUint>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_sequence(&text)
}

pub fn bundled_a1324() -> Vec<BigUint> {
    parse_sequence(BUNDLED_A1324).expect("bundled fixture is well formed")
}
