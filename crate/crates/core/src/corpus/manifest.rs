use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adapters::AdapterKind;
use super::CorpusError;
use crate::schema::DocumentMeta;

/// A prediction file reference: a bare path uses the canonical adapter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionRef {
    Path(String),
    Spec {
        path: String,
        #[serde(default)]
        adapter: AdapterKind,
    },
}

impl PredictionRef {
    pub fn path(&self) -> &str {
        match self {
            PredictionRef::Path(p) | PredictionRef::Spec { path: p, .. } => p,
        }
    }

    pub fn adapter(&self) -> AdapterKind {
        match self {
            PredictionRef::Path(_) => AdapterKind::Canonical,
            PredictionRef::Spec { adapter, .. } => *adapter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub gt_path: String,
    pub predictions: BTreeMap<String, PredictionRef>,
    pub meta: ManifestMeta,
}

/// Document metadata as written in a manifest; the id comes from the entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestMeta {
    pub source_kind: crate::schema::SourceKind,
    pub language: String,
    pub vendor_id: String,
    pub template_id: String,
    #[serde(default)]
    pub template_split: crate::schema::TemplateSplit,
    pub page_count: u32,
}

impl ManifestEntry {
    pub fn document_meta(&self) -> DocumentMeta {
        DocumentMeta {
            doc_id: self.doc_id.clone(),
            source_kind: self.meta.source_kind,
            language: self.meta.language.clone(),
            vendor_id: self.meta.vendor_id.clone(),
            template_id: self.meta.template_id.clone(),
            template_split: self.meta.template_split,
            page_count: self.meta.page_count,
        }
    }
}

impl From<&DocumentMeta> for ManifestMeta {
    fn from(m: &DocumentMeta) -> Self {
        Self {
            source_kind: m.source_kind,
            language: m.language.clone(),
            vendor_id: m.vendor_id.clone(),
            template_id: m.template_id.clone(),
            template_split: m.template_split,
            page_count: m.page_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub corpus_id: String,
    pub documents: Vec<ManifestEntry>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn metas(&self) -> BTreeMap<String, DocumentMeta> {
        self.documents.iter().map(|d| (d.doc_id.clone(), d.document_meta())).collect()
    }

    /// Method names across all documents, sorted.
    pub fn methods(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.documents.iter().flat_map(|d| d.predictions.keys()).collect();
        set.into_iter().cloned().collect()
    }

    /// Structural checks that need no file system access.
    pub fn check(&self) -> Result<(), CorpusError> {
        if self.documents.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut seen = BTreeSet::new();
        for d in &self.documents {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(CorpusError::DuplicateId(d.doc_id.clone()));
            }
            d.document_meta().check().map_err(CorpusError::InvalidMeta)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&serde_json::to_value(self).expect("serializable"))
            .expect("serializable");
        text.push('\n');
        text
    }
}

pub fn parse_manifest(text: &str, origin: &Path) -> Result<CorpusManifest, CorpusError> {
    let mut manifest: CorpusManifest = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
        path: origin.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    manifest.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest.check()?;
    Ok(manifest)
}

/// Reads and fully validates a manifest, including that every referenced
/// file exists relative to the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let manifest = parse_manifest(&text, path)?;
    for d in &manifest.documents {
        let paths = std::iter::once(d.gt_path.as_str()).chain(d.predictions.values().map(PredictionRef::path));
        for p in paths {
            if !manifest.resolve(p).is_file() {
                return Err(CorpusError::DanglingPath { doc_id: d.doc_id.clone(), path: p.to_string() });
            }
        }
    }
    Ok(manifest)
}
