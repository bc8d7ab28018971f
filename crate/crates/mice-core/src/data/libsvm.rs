//! Streaming parser for the LibSVM sparse text format.
//!
//! Lines look like `label idx:val idx:val ...` with 1-based, strictly
//! increasing feature indices. Parsing reads one line at a time, so memory
//! use beyond the accumulated dataset is bounded by the longest row.

use std::io::BufRead;

use thiserror::Error;

use crate::rng::RngStream;

/// How raw labels are normalized to the internal {-1, +1} convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    /// Accept only -1 and +1.
    #[default]
    Strict,
    /// Map 0 -> -1 and 1 -> +1.
    ZeroOne,
    /// Map 1 -> -1 and 2 -> +1 (used by some dataset mirrors).
    OneTwo,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("empty input")]
    Empty,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("subsample size {requested} exceeds population {available}")]
    Subsample { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A sparse binary-classification dataset. Feature indices are 0-based
/// internally; rows keep their `(index, value)` pairs sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    num_features: usize,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
}

impl SparseDataset {
    pub fn new(num_features: usize, rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>) -> Self {
        assert_eq!(rows.len(), labels.len());
        Self {
            num_features,
            rows,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Largest squared row norm, used for per-sample Lipschitz bounds.
    pub fn max_row_norm_sq(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(_, v)| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn normalize_label(raw: f64, policy: LabelPolicy, line: usize) -> Result<f64, ParseError> {
    let mapped = match policy {
        LabelPolicy::Strict => raw,
        LabelPolicy::ZeroOne => {
            if raw == 0.0 {
                -1.0
            } else if raw == 1.0 {
                1.0
            } else {
                raw
            }
        }
        LabelPolicy::OneTwo => {
            if raw == 1.0 {
                -1.0
            } else if raw == 2.0 {
                1.0
            } else {
                raw
            }
        }
    };
    if mapped == -1.0 || mapped == 1.0 {
        Ok(mapped)
    } else {
        Err(ParseError::Parse {
            line,
            reason: format!("label {raw} not in {{-1,+1}} after normalization"),
        })
    }
}

/// Parse a LibSVM-format stream. Indices are converted to 0-based; malformed
/// lines are reported with their (1-based) line number.
pub fn parse_libsvm<R: BufRead>(reader: R, policy: LabelPolicy) -> Result<SparseDataset, ParseError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut num_features = 0usize;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_ascii_whitespace();
        let label_tok = parts.next().ok_or_else(|| ParseError::Parse {
            line: line_no,
            reason: "missing label".into(),
        })?;
        let raw_label: f64 = label_tok.parse().map_err(|_| ParseError::Parse {
            line: line_no,
            reason: format!("bad label token '{label_tok}'"),
        })?;
        let label = normalize_label(raw_label, policy, line_no)?;
        let mut row = Vec::new();
        let mut last_index: Option<usize> = None;
        for tok in parts {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| ParseError::Parse {
                line: line_no,
                reason: format!("expected idx:val, got '{tok}'"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| ParseError::Parse {
                line: line_no,
                reason: format!("bad feature index '{idx_s}'"),
            })?;
            if idx == 0 {
                return Err(ParseError::Parse {
                    line: line_no,
                    reason: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| ParseError::Parse {
                line: line_no,
                reason: format!("bad feature value '{val_s}'"),
            })?;
            let internal = idx - 1;
            if let Some(prev) = last_index {
                if internal <= prev {
                    return Err(ParseError::Parse {
                        line: line_no,
                        reason: format!("feature index {idx} not strictly increasing"),
                    });
                }
            }
            last_index = Some(internal);
            num_features = num_features.max(internal + 1);
            row.push((internal, val));
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(SparseDataset {
        num_features,
        rows,
        labels,
    })
}

/// Serialize back to LibSVM text (1-based indices). Round-trips normalized
/// datasets byte-for-byte.
pub fn serialize_libsvm(dataset: &SparseDataset) -> String {
    let mut out = String::new();
    for i in 0..dataset.len() {
        out.push_str(if dataset.label(i) > 0.0 { "1" } else { "-1" });
        for (idx, val) in dataset.row(i) {
            out.push(' ');
            out.push_str(&format!("{}:{}", idx + 1, val));
        }
        out.push('\n');
    }
    out
}

/// Uniform without-replacement subsample of `n` rows.
pub fn subsample(
    dataset: &SparseDataset,
    n: usize,
    rng: &mut RngStream,
) -> Result<SparseDataset, ParseError> {
    if n > dataset.len() {
        return Err(ParseError::Subsample {
            requested: n,
            available: dataset.len(),
        });
    }
    // Partial Fisher-Yates over the row indices.
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    for i in 0..n {
        let j = i + rng.index(indices.len() - i);
        indices.swap(i, j);
    }
    let chosen = &indices[..n];
    Ok(SparseDataset {
        num_features: dataset.num_features,
        rows: chosen.iter().map(|&i| dataset.rows[i].clone()).collect(),
        labels: chosen.iter().map(|&i| dataset.labels[i]).collect(),
    })
}
