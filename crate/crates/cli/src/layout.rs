//! Output directory layout:
//!
//! ```text
//! <output_dir>/translated/{documents,queries}.jsonl
//! <output_dir>/scores/<run_tag>.jsonl
//! <output_dir>/runs/<run_tag>.run
//! <output_dir>/runs/<run_tag>.judgments.jsonl
//! <output_dir>/reports/<run_tag>.{json,txt}
//! <output_dir>/reports/<run_tag>-sweep.{json,txt}
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn translated_dir(&self) -> PathBuf {
        self.root.join("translated")
    }

    pub fn translated_documents(&self) -> PathBuf {
        self.translated_dir().join("documents.jsonl")
    }

    pub fn translated_queries(&self) -> PathBuf {
        self.translated_dir().join("queries.jsonl")
    }

    pub fn scores(&self, tag: &str) -> PathBuf {
        self.root.join("scores").join(format!("{tag}.jsonl"))
    }

    pub fn run(&self, tag: &str) -> PathBuf {
        self.root.join("runs").join(format!("{tag}.run"))
    }

    pub fn judgments(&self, tag: &str) -> PathBuf {
        self.root
            .join("runs")
            .join(format!("{tag}.judgments.jsonl"))
    }

    pub fn report_json(&self, tag: &str) -> PathBuf {
        self.root.join("reports").join(format!("{tag}.json"))
    }

    pub fn report_txt(&self, tag: &str) -> PathBuf {
        self.root.join("reports").join(format!("{tag}.txt"))
    }

    pub fn sweep_json(&self, tag: &str) -> PathBuf {
        self.root.join("reports").join(format!("{tag}-sweep.json"))
    }

    pub fn sweep_txt(&self, tag: &str) -> PathBuf {
        self.root.join("reports").join(format!("{tag}-sweep.txt"))
    }
}

pub(crate) fn ensure_parent(path: &Path) -> io::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir),
        _ => Ok(()),
    }
}

/// Writes via a sibling temp file and rename so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    ensure_parent(path)?;
    let tmp = tmp_path(path);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub(crate) fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}
