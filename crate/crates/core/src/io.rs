//! Observation CSV files (`level,size,accuracy`) and JSON helpers.

use std::io::{Read, Write};

use serde::Serialize;

use crate::trace::Observation;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("expected header 'level,size,accuracy', found '{0}'")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const HEADER: [&str; 3] = ["level", "size", "accuracy"];

/// Reads observations; errors name the offending line (header is line 1).
pub fn read_observations<R: Read>(reader: R) -> Result<Vec<Observation>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_ascii_lowercase).collect();
    if header != HEADER {
        return Err(IoError::Header(header.join(",")));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| IoError::Parse { line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let level: u32 = record[0]
            .parse()
            .map_err(|_| bad(format!("level '{}' is not a positive integer", &record[0])))?;
        let number = |k: usize, what: &str| -> Result<f64, IoError> {
            record[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("{what} '{}' is not a finite number", &record[k])))
        };
        let x = number(1, "size")?;
        let accuracy = number(2, "accuracy")?;
        out.push(Observation::new(level, x, accuracy));
    }
    Ok(out)
}

pub fn write_observations<W: Write>(writer: W, observations: &[Observation]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for o in observations {
        w.write_record([o.level.to_string(), fmt_num(o.x), fmt_num(o.accuracy)])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that reads back to the same value.
pub fn fmt_num(v: f64) -> String {
    format!("{v}")
}

pub fn write_table<W: Write>(writer: W, header: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
