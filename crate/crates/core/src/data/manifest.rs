//! JSON manifest: `{"snippets": [{"path", "infant_id", "session", "label", "snippet_id"}, ...]}`.
//!
//! Relative paths resolve against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_unique_ids, read_snippet_file, Dataset, Label, PressureSnippet, Session, SnippetMeta};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub infant_id: String,
    pub session: String,
    pub label: String,
    pub snippet_id: String,
}

impl ManifestEntry {
    pub fn new(path: impl Into<PathBuf>, meta: &SnippetMeta, label: Label) -> Self {
        Self {
            path: path.into(),
            infant_id: meta.infant_id.clone(),
            session: meta.session.to_string(),
            label: label.to_string(),
            snippet_id: meta.snippet_id.clone(),
        }
    }

    pub fn label(&self) -> Result<Label> {
        self.label.parse()
    }

    pub fn meta(&self) -> Result<SnippetMeta> {
        Ok(SnippetMeta {
            snippet_id: self.snippet_id.clone(),
            infant_id: self.infant_id.clone(),
            session: self.session.parse::<Session>()?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub snippets: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for entry in &manifest.snippets {
            entry.label()?;
            entry.meta()?;
        }
        check_unique_ids(manifest.snippets.iter().map(|e| e.snippet_id.as_str()))?;
        Ok(manifest)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Reads one listed snippet and checks its label against the manifest.
    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<PressureSnippet> {
        let snippet = read_snippet_file(&self.resolve(entry), entry.meta()?)?;
        let listed = entry.label()?;
        if snippet.label != listed {
            return Err(Error::LabelMismatch {
                id: entry.snippet_id.clone(),
                manifest: listed.to_string(),
                file: snippet.label.to_string(),
            });
        }
        Ok(snippet)
    }
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = Manifest::load(manifest_path)?;
    let snippets = manifest
        .snippets
        .iter()
        .map(|e| manifest.load_entry(e))
        .collect::<Result<Vec<_>>>()?;
    let dataset = Dataset::new(snippets, Some(manifest_path.to_path_buf()))?;
    dataset.verify_counts()?;
    Ok(dataset)
}

/// Writes `manifest.json` (pretty, stable key order) at `path`.
pub fn write_manifest(path: &Path, entries: Vec<ManifestEntry>) -> Result<()> {
    let manifest = Manifest {
        snippets: entries,
        base_dir: PathBuf::new(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_snippet_file, PressureFrame, FRAMES};

    fn snippet(id: &str, infant: &str, label: Label) -> PressureSnippet {
        let meta = SnippetMeta {
            snippet_id: id.into(),
            infant_id: infant.into(),
            session: if label.is_positive() { Session::T5 } else { Session::T1 },
        };
        PressureSnippet::new(meta, label, vec![PressureFrame::zeros(); FRAMES]).unwrap()
    }

    fn write_all(dir: &Path, snippets: &[PressureSnippet]) -> Vec<ManifestEntry> {
        snippets
            .iter()
            .map(|s| {
                let name = format!("{}.pmat", s.id());
                write_snippet_file(s, &dir.join(&name)).unwrap();
                ManifestEntry::new(name, &s.meta, s.label)
            })
            .collect()
    }

    #[test]
    fn empty_manifest_gives_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(&path, r#"{"snippets": []}"#).unwrap();
        let ds = load_dataset(&path).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.counts.snippets, 0);
    }

    #[test]
    fn loads_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let snippets = [
            snippet("a", "i1", Label::FmPlus),
            snippet("b", "i1", Label::FmMinus),
            snippet("c", "i2", Label::FmMinus),
        ];
        let entries = write_all(dir.path(), &snippets);
        let path = dir.path().join("manifest.json");
        write_manifest(&path, entries).unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.counts.to_string(), "snippets=3 FM+=1 FM-=2 infants=2");
        assert_eq!(ds.snippets[2], snippets[2]);
    }

    #[test]
    fn duplicate_listing_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut entries = write_all(dir.path(), &[snippet("a", "i1", Label::FmPlus)]);
        entries.push(entries[0].clone());
        let path = dir.path().join("manifest.json");
        write_manifest(&path, entries).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn missing_file_and_bad_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(
            &path,
            r#"{"snippets": [{"path": "nope.pmat", "infant_id": "i", "session": "T1", "label": "FM-", "snippet_id": "x"}]}"#,
        )
        .unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::File { .. })));

        fs::write(
            &path,
            r#"{"snippets": [{"path": "nope.pmat", "infant_id": "i", "session": "T1", "label": "n/a", "snippet_id": "x"}]}"#,
        )
        .unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn label_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut entries = write_all(dir.path(), &[snippet("a", "i1", Label::FmPlus)]);
        entries[0].label = "FM-".into();
        let path = dir.path().join("manifest.json");
        write_manifest(&path, entries).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::LabelMismatch { .. })));
    }
}
