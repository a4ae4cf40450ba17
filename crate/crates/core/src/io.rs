//! CSV and JSON persistence with atomic file replacement.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary sibling of `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json_atomic<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Chain rows with a header, followed by `#key=value` summary lines.
pub fn write_chain_csv<W: Write>(mut w: W, names: &[String], rows: &[Vec<f64>], trailer: &[(&str, String)]) -> Result<()> {
    writeln!(w, "{}", names.join(","))?;
    for row in rows {
        if row.len() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: row.len(),
            });
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    for (k, v) in trailer {
        writeln!(w, "#{k}={v}")?;
    }
    Ok(())
}

/// Header and numeric rows of a chain CSV; `#` lines are skipped.
pub fn read_chain_csv<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = r.lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() && !line.starts_with('#') {
                    break line;
                }
            }
            None => return Err(Error::Parse("empty chain file".into())),
        }
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
        if row.len() != names.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                row.len(),
                names.len()
            )));
        }
        rows.push(row);
    }
    Ok((names, rows))
}

pub fn write_vector_csv<W: Write>(mut w: W, name: &str, v: &[f64]) -> Result<()> {
    writeln!(w, "index,{name}")?;
    for (i, x) in v.iter().enumerate() {
        writeln!(w, "{i},{x:.16e}")?;
    }
    Ok(())
}

pub fn read_vector_csv<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let (_, rows) = read_chain_csv(r)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            [idx, v] if *idx as usize == i => Ok(*v),
            _ => Err(Error::Parse(format!("vector row {i} malformed"))),
        })
        .collect()
}
