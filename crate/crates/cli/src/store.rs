//! Snapshot directory: one `<subject>.kg.jsonl` file per subject graph.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use examforge_core::kg_store::{write_snapshot, GraphRegistry, SubjectId};

use crate::error::{CliError, Result};

const SUFFIX: &str = ".kg.jsonl";

pub struct Store {
    dir: PathBuf,
}

/// File stem for a subject: safe characters kept, the rest hex-escaped.
fn file_stem(subject: &SubjectId) -> String {
    let mut out = String::new();
    for b in subject.as_str().bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02x}"));
        }
    }
    out
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, subject: &SubjectId) -> PathBuf {
        self.dir.join(format!("{}{SUFFIX}", file_stem(subject)))
    }

    /// Every snapshot in the directory; a missing directory is an empty store.
    pub fn load(&self) -> Result<GraphRegistry> {
        let registry = GraphRegistry::new();
        if !self.dir.exists() {
            return Ok(registry);
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)
            .map_err(|e| CliError::io(&self.dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(SUFFIX)))
            .collect();
        files.sort();
        for path in files {
            let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
            registry.import_graph(BufReader::new(file)).map_err(|e| {
                let e = CliError::from(e);
                CliError::new(&e.error_code, format!("{}: {}", path.display(), e.message))
            })?;
        }
        Ok(registry)
    }

    /// Writes one subject atomically (temp file, then rename).
    pub fn save(&self, registry: &GraphRegistry, subject: &SubjectId) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let handle = registry.require(subject.as_str())?;
        let path = self.path_for(subject);
        let tmp = path.with_extension("tmp");
        let write = |p: &Path| -> std::io::Result<()> {
            let mut out = BufWriter::new(fs::File::create(p)?);
            write_snapshot(&handle.read(), &mut out)?;
            out.flush()
        };
        write(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn save_all(&self, registry: &GraphRegistry) -> Result<()> {
        for subject in registry.subjects() {
            self.save(registry, &subject)?;
        }
        Ok(())
    }
}
