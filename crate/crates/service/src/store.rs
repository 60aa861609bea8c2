//! Append-only session log: one JSON document per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::session::{AnswerRecord, SessionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Session(SessionRecord),
    Answer {
        session: String,
        answer: AnswerRecord,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

/// Writes go through one lock, so appends are queued and never interleave.
#[derive(Debug)]
pub struct Store {
    path: Option<PathBuf>,
    file: Option<Mutex<File>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            file: None,
        }
    }

    /// Opens (creating if needed) the log and returns the records already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<LogRecord>), StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut records = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec = serde_json::from_str(&line).map_err(|source| StoreError::Corrupt {
                    path: path.clone(),
                    line: i + 1,
                    source,
                })?;
                records.push(rec);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        Ok((
            Self {
                path: Some(path),
                file: Some(Mutex::new(file)),
            },
            records,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, record: &LogRecord) -> Result<(), StoreError> {
        let Some(file) = &self.file else {
            return Ok(());
        };
        let mut line = serde_json::to_string(record).expect("log records always serialize");
        line.push('\n');
        let mut f = file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.clone().unwrap_or_default(),
                source,
            })
    }
}
