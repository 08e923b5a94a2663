//! Append-only result persistence.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::Configuration;

/// One stored classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub device_id: u32,
    pub clip_id: u64,
    pub config: Configuration,
    pub label: String,
    pub class_index: u8,
    pub confidence: f32,
    pub server_receive_ts_us: u64,
    pub processing_time_us: u64,
    pub bytes_received: u64,
}

/// Durable sink for records; `store` returns only once the record survives
/// a crash of this process.
pub trait ResultSink: Send {
    fn store(&mut self, record: &ResultRecord) -> io::Result<()>;
}

/// JSON-lines file. Each record is written with a single `write_all` of a
/// complete line, so lines never interleave.
#[derive(Debug)]
pub struct JsonlStore {
    file: File,
    path: PathBuf,
    fsync: bool,
}

impl JsonlStore {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { file, path, fsync: false })
    }

    /// Also survive power loss by syncing each record to disk.
    pub fn with_fsync(mut self, fsync: bool) -> Self {
        self.fsync = fsync;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl ResultSink for JsonlStore {
    fn store(&mut self, record: &ResultRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        if self.fsync {
            self.file.sync_data()?;
        }
        Ok(())
    }
}

/// Keeps records in memory; for tests and benchmarks that discard them.
#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    pub records: Vec<ResultRecord>,
}

impl ResultSink for MemoryStore {
    fn store(&mut self, record: &ResultRecord) -> io::Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

pub fn read_records(path: impl AsRef<Path>) -> io::Result<Vec<ResultRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(clip_id: u64) -> ResultRecord {
        ResultRecord {
            device_id: 3,
            clip_id,
            config: Configuration::C,
            label: "siren".into(),
            class_index: 8,
            confidence: 0.75,
            server_receive_ts_us: 10,
            processing_time_us: 5,
            bytes_received: 796,
        }
    }

    #[test]
    fn three_records_three_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let mut store = JsonlStore::open(&path).unwrap();
        for i in 0..3 {
            store.store(&record(i)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back = read_records(&path).unwrap();
        assert_eq!(back, (0..3).map(record).collect::<Vec<_>>());
    }

    #[test]
    fn reopening_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        JsonlStore::open(&path).unwrap().with_fsync(true).store(&record(0)).unwrap();
        JsonlStore::open(&path).unwrap().store(&record(1)).unwrap();
        assert_eq!(read_records(&path).unwrap().len(), 2);
    }

    #[test]
    fn unwritable_path_errors() {
        assert!(JsonlStore::open("/nonexistent-dir/results.jsonl").is_err());
    }
}
