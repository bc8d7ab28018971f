//! Dataset ingestion and telemetry persistence.

mod libsvm;

pub use libsvm::{parse_libsvm, serialize_libsvm, subsample, LabelPolicy, ParseError, SparseDataset};
