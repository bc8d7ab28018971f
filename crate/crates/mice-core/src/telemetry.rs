//! Per-iteration run records and their CSV persistence.
//!
//! The CSV column order is stable:
//! `iter,grad_evals_cum,time_s,objective,opt_gap,grad_norm_est,stat_err_sq,action,hierarchy_len`.
//! Optional fields serialize as empty cells. The in-memory record also
//! carries the iterate and per-layer telemetry, which are not serialized.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::estimator::LayerTelemetry;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// One optimizer iteration's telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub iter: u64,
    pub grad_evals_cum: u64,
    pub time_s: f64,
    pub objective: Option<f64>,
    pub opt_gap: Option<f64>,
    pub grad_norm_est: f64,
    pub stat_err_sq: Option<f64>,
    /// Hierarchy event name; empty for methods without a hierarchy.
    pub action: String,
    pub hierarchy_len: u32,
    /// Iterate at this record; not serialized.
    pub xi: Vec<f64>,
    /// Per-layer `(index, samples, variance, weight)` snapshot; not
    /// serialized.
    pub per_layer: Vec<LayerTelemetry>,
}

pub const CSV_HEADER: &str =
    "iter,grad_evals_cum,time_s,objective,opt_gap,grad_norm_est,stat_err_sq,action,hierarchy_len";

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Write records as CSV; returns the number of data rows.
pub fn write_run_csv<'a, I, W>(records: I, sink: &mut W) -> Result<u64, TelemetryError>
where
    I: IntoIterator<Item = &'a RunRecord>,
    W: Write,
{
    writeln!(sink, "{CSV_HEADER}")?;
    let mut rows = 0;
    for r in records {
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.grad_evals_cum,
            r.time_s,
            opt_cell(r.objective),
            opt_cell(r.opt_gap),
            r.grad_norm_est,
            opt_cell(r.stat_err_sq),
            r.action,
            r.hierarchy_len
        )?;
        rows += 1;
    }
    Ok(rows)
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>, TelemetryError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| TelemetryError::Malformed {
            line,
            reason: format!("bad numeric field '{field}'"),
        })
}

/// Read records back; `xi` and `per_layer` come back empty.
pub fn read_run_csv<R: BufRead>(reader: R) -> Result<Vec<RunRecord>, TelemetryError> {
    let mut out = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line_no == 0 {
            if line.trim() != CSV_HEADER {
                return Err(TelemetryError::Malformed {
                    line: 1,
                    reason: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(TelemetryError::Malformed {
                line: line_no + 1,
                reason: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let bad = |reason: String| TelemetryError::Malformed {
            line: line_no + 1,
            reason,
        };
        out.push(RunRecord {
            iter: fields[0]
                .parse()
                .map_err(|_| bad(format!("bad iter '{}'", fields[0])))?,
            grad_evals_cum: fields[1]
                .parse()
                .map_err(|_| bad(format!("bad evals '{}'", fields[1])))?,
            time_s: fields[2]
                .parse()
                .map_err(|_| bad(format!("bad time '{}'", fields[2])))?,
            objective: parse_opt(fields[3], line_no + 1)?,
            opt_gap: parse_opt(fields[4], line_no + 1)?,
            grad_norm_est: fields[5]
                .parse()
                .map_err(|_| bad(format!("bad norm '{}'", fields[5])))?,
            stat_err_sq: parse_opt(fields[6], line_no + 1)?,
            action: fields[7].to_string(),
            hierarchy_len: fields[8]
                .parse()
                .map_err(|_| bad(format!("bad hierarchy length '{}'", fields[8])))?,
            xi: Vec::new(),
            per_layer: Vec::new(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample_record(iter: u64) -> RunRecord {
        RunRecord {
            iter,
            grad_evals_cum: 10 * iter + 3,
            time_s: 0.0,
            objective: Some(1.0 / (iter + 1) as f64),
            opt_gap: Some(0.25 * (iter + 1) as f64),
            grad_norm_est: (iter + 1) as f64 * 0.1234567890123456789,
            stat_err_sq: if iter % 2 == 0 { Some(1e-7) } else { None },
            action: if iter == 0 { "regular".into() } else { "dropped".into() },
            hierarchy_len: iter as u32 + 1,
            xi: vec![],
            per_layer: vec![],
        }
    }

    #[test]
    fn empty_stream_writes_header_only() {
        let mut buf = Vec::new();
        let rows = write_run_csv([].iter(), &mut buf).unwrap();
        assert_eq!(rows, 0);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.trim(), CSV_HEADER);
    }

    #[test]
    fn three_records_three_rows() {
        let records: Vec<RunRecord> = (0..3).map(sample_record).collect();
        let mut buf = Vec::new();
        let rows = write_run_csv(records.iter(), &mut buf).unwrap();
        assert_eq!(rows, 3);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn round_trip_preserves_numeric_fields() {
        let records: Vec<RunRecord> = (0..5).map(sample_record).collect();
        let mut buf = Vec::new();
        write_run_csv(records.iter(), &mut buf).unwrap();
        let parsed = read_run_csv(Cursor::new(buf)).unwrap();
        assert_eq!(parsed.len(), records.len());
        for (a, b) in records.iter().zip(&parsed) {
            assert_eq!(a.iter, b.iter);
            assert_eq!(a.grad_evals_cum, b.grad_evals_cum);
            // Shortest-roundtrip float formatting reproduces values exactly,
            // well inside the 1e-15 requirement.
            assert_eq!(a.grad_norm_est.to_bits(), b.grad_norm_est.to_bits());
            assert_eq!(a.objective, b.objective);
            assert_eq!(a.opt_gap, b.opt_gap);
            assert_eq!(a.stat_err_sq, b.stat_err_sq);
            assert_eq!(a.action, b.action);
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let text = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(matches!(
            read_run_csv(Cursor::new(text)),
            Err(TelemetryError::Malformed { line: 2, .. })
        ));
    }
}
