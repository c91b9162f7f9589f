//! Command implementations behind the `persist-eval` binary.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use persist_eval_core as core;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Parse = 2,
    DataMismatch = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Core(core::Error::Parse { .. } | core::Error::Io { .. }) => ExitStatus::Parse,
            CliError::Core(core::Error::Data(_)) => ExitStatus::DataMismatch,
            CliError::Write { .. } => ExitStatus::Parse,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Replaces characters outside `[A-Za-z0-9._-]` so a key can name a file.
pub fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Files are collected first and written together once all computation
/// succeeded, in path order.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: std::collections::BTreeMap<PathBuf, String>,
}

impl OutputSet {
    pub fn add(&mut self, relative: impl Into<PathBuf>, contents: String) {
        self.files.insert(relative.into(), contents);
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.keys().map(PathBuf::as_path)
    }

    pub fn get(&self, relative: impl AsRef<Path>) -> Option<&str> {
        self.files.get(relative.as_ref()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn write_to(&self, dir: &Path) -> CliResult<()> {
        for (rel, contents) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| CliError::Write {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        }
        Ok(())
    }
}
