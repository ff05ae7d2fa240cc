//! Corpus manifests, prediction adapters and report persistence.

pub mod adapters;
pub mod manifest;
pub mod report;

use thiserror::Error;

pub use adapters::{adapt_prediction, AdapterKind, PredictionEnvelope};
pub use manifest::{load_manifest, parse_manifest, CorpusManifest, ManifestEntry, ManifestMeta, PredictionRef};
pub use report::{render_markdown, report_from_json, report_to_json, write_report, ReportFormat};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("duplicate doc_id {0:?}")]
    DuplicateId(String),
    #[error("document {doc_id:?} references missing file {path}")]
    DanglingPath { doc_id: String, path: String },
    #[error("invalid document metadata: {0}")]
    InvalidMeta(String),
    #[error("manifest lists no documents")]
    Empty,
}
