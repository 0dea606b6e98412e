use std::io::Write;
use std::path::Path;

use super::{ResultRow, SweepKind};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["estimator", "sweep_kind", "sweep_value", "nmse", "draws", "wall_time_ms"];

// 17 significant digits: exact round trip for f64
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the header and one line per row (LF line endings).
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.estimator.name().to_string(),
            r.sweep_kind.name().to_string(),
            real(r.sweep_value),
            real(r.nmse),
            r.draws.to_string(),
            real(r.wall_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file))
}

/// Parses harness CSV text; errors name the source and the 1-based line.
pub fn parse_csv(text: &str, source_name: &str) -> Result<Vec<ResultRow>> {
    let err = |line: u64, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line: line as usize,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(err(1, format!("header must be `{}`", CSV_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let real = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| err(line, format!("column {}: {e}", CSV_HEADER[i])))
        };
        let row = ResultRow {
            estimator: record[0].parse().map_err(|e: Error| err(line, e.to_string()))?,
            sweep_kind: record[1].parse::<SweepKind>().map_err(|e| err(line, e.to_string()))?,
            sweep_value: real(2)?,
            nmse: real(3)?,
            draws: record[4].trim().parse().map_err(|e| err(line, format!("column draws: {e}")))?,
            wall_time_ms: real(5)?,
        };
        if !(row.nmse >= 0.0) {
            return Err(err(line, "nmse must be non-negative".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    parse_csv(&std::fs::read_to_string(path)?, &path.display().to_string())
}
