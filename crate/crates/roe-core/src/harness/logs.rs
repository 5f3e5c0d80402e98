//! Append-only CSV logs with byte-deterministic formatting.
//!
//! Floats are written with the shortest representation that round-trips, so
//! identical runs produce byte-identical files and parsed values equal the
//! computed ones exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DIAGNOSTICS_COLUMNS: &[&str] = &[
    "step",
    "mean_extrinsic_episode_reward",
    "mean_intrinsic_reward",
    "policy_loss",
    "value_loss",
    "entropy",
    "grad_norm",
];

/// Format one CSV field; `f64` and integers both use `Display`, which for
/// floats is the shortest round-tripping form.
pub fn field<T: std::fmt::Display>(value: T) -> String {
    value.to_string()
}

pub struct CsvLog {
    writer: BufWriter<File>,
    columns: usize,
}

impl CsvLog {
    /// Create (or overwrite) a log and write the header.
    pub fn create(path: &Path, columns: &[&str]) -> Result<CsvLog> {
        let owned: Vec<String> = columns.iter().map(|s| s.to_string()).collect();
        CsvLog::create_owned(path, &owned)
    }

    pub fn create_owned(path: &Path, columns: &[String]) -> Result<CsvLog> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut writer = BufWriter::new(File::create(path)?);
        writeln!(writer, "{}", columns.join(","))?;
        Ok(CsvLog {
            writer,
            columns: columns.len(),
        })
    }

    /// Reopen an existing log for appending, keeping the header and the
    /// first `keep_rows` data rows (any later rows are dropped, which makes
    /// resuming from an older checkpoint safe).
    pub fn open_truncated(path: &Path, columns: &[&str], keep_rows: usize) -> Result<CsvLog> {
        let owned: Vec<String> = columns.iter().map(|s| s.to_string()).collect();
        CsvLog::open_truncated_owned(path, &owned, keep_rows)
    }

    pub fn open_truncated_owned(
        path: &Path,
        columns: &[String],
        keep_rows: usize,
    ) -> Result<CsvLog> {
        if !path.exists() {
            let mut log = CsvLog::create_owned(path, columns)?;
            log.flush()?;
            return Ok(log);
        }
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().to_string();
        if header != columns.join(",") {
            return Err(Error::config(format!(
                "log {} has unexpected columns `{header}`",
                path.display()
            )));
        }
        let kept: Vec<&str> = lines.take(keep_rows).collect();
        let mut writer = BufWriter::new(File::create(path)?);
        writeln!(writer, "{header}")?;
        for line in kept {
            writeln!(writer, "{line}")?;
        }
        writer.flush()?;
        Ok(CsvLog {
            writer,
            columns: columns.len(),
        })
    }

    pub fn write_row(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        writeln!(self.writer, "{}", fields.join(","))?;
        // Flush per row so checkpoints and logs never diverge by more than
        // the row being written.
        self.writer.flush()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Read one column of a CSV log as `(step, value)` pairs; empty fields
/// come back as `None`.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<(u64, Option<f64>)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config(format!("{} is empty", path.display())))?;
    let names: Vec<&str> = header.split(',').collect();
    let idx = names
        .iter()
        .position(|n| *n == column)
        .ok_or_else(|| Error::config(format!("no column `{column}` in {}", path.display())))?;
    let mut out = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::config(format!("ragged row in {}", path.display())));
        }
        let step: u64 = fields[0]
            .parse()
            .map_err(|_| Error::config(format!("bad step `{}`", fields[0])))?;
        let value = if fields[idx].is_empty() {
            None
        } else {
            Some(fields[idx].parse::<f64>().map_err(|_| {
                Error::config(format!("bad value `{}` in column `{column}`", fields[idx]))
            })?)
        };
        out.push((step, value));
    }
    Ok(out)
}
