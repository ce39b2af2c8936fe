//! Atomic file writes, CSV series and report envelopes.

use std::io::Write;
use std::path::Path;

use heisgs::Result;
use serde::Serialize;

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-separated table with a header row.
pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, csv_string(header, rows).as_bytes())
}

/// Seconds since the Unix epoch. The only nondeterministic report field.
pub fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub timestamp: u64,
    pub command: &'a str,
    #[serde(flatten)]
    pub body: T,
}

pub fn to_json<T: Serialize>(command: &str, body: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        timestamp: timestamp(),
        command,
        body,
    })?;
    s.push('\n');
    Ok(s)
}
