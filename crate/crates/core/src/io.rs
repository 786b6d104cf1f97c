//! CSV and manifest helpers shared by the exporters.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// 17 significant digits, round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV table with a header row and `\n` line endings.
pub fn write_table<W: Write>(out: &mut W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    let rows = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut line = String::new();
    for r in 0..rows {
        line.clear();
        for (k, col) in columns.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(col[r]));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_table_file(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut buf = Vec::new();
    write_table(&mut buf, header, columns)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_vec(value).unwrap_or_default();
    let digest = Sha256::digest(&canonical);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
