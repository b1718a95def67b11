//! Append-only, line-delimited event log.
//!
//! Every entry is one JSON line written with a single `write_all` and
//! synced before the caller sees success. A crash can therefore only leave
//! an unterminated tail, which is dropped (and cut from the file) on open.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::ServiceError;
use crate::record::LogEntry;

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

/// Result of parsing log bytes.
#[derive(Debug, PartialEq)]
pub struct Parsed {
    pub entries: Vec<LogEntry>,
    /// Byte length of the complete lines.
    pub valid_len: usize,
    /// Bytes of an unterminated tail that were ignored.
    pub dropped: usize,
}

/// Parses complete lines; an unterminated final line is ignored.
///
/// A terminated line that fails to parse is corruption, not a torn write,
/// and is reported with its 1-based line number.
pub fn parse_log(bytes: &[u8]) -> Result<Parsed, ServiceError> {
    let valid_len = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut entries = Vec::new();
    for (i, line) in bytes[..valid_len].split(|&b| b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_slice(line).map_err(|e| ServiceError::CorruptLog {
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(Parsed {
        entries,
        valid_len,
        dropped: bytes.len() - valid_len,
    })
}

pub fn encode_entry(entry: &LogEntry) -> Vec<u8> {
    let mut line = serde_json::to_vec(entry).expect("log entries serialize");
    line.push(b'\n');
    line
}

impl EventLog {
    /// Creates a new, empty log; fails if one already exists.
    pub fn create(path: &Path) -> Result<Self, ServiceError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().append(true).create_new(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Opens an existing log, trimming a torn tail.
    pub fn open(path: &Path) -> Result<(Self, Parsed), ServiceError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let parsed = parse_log(&bytes)?;
        let file = OpenOptions::new().append(true).open(path)?;
        if parsed.dropped > 0 {
            tracing::warn!(
                path = %path.display(),
                bytes = parsed.dropped,
                "dropping torn tail of event log"
            );
            file.set_len(parsed.valid_len as u64)?;
            file.sync_all()?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            parsed,
        ))
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<(), ServiceError> {
        self.file.write_all(&encode_entry(entry))?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Event;

    fn entry(seq: u64) -> LogEntry {
        LogEntry {
            seq,
            at: 1000 + seq,
            event: Event::StudyLocked,
        }
    }

    #[test]
    fn torn_tail_is_ignored() {
        let mut bytes = encode_entry(&entry(1));
        bytes.extend(encode_entry(&entry(2)));
        let full = bytes.len();
        bytes.extend(&encode_entry(&entry(3))[..10]);
        let parsed = parse_log(&bytes).unwrap();
        assert_eq!(parsed.entries, vec![entry(1), entry(2)]);
        assert_eq!(parsed.valid_len, full);
        assert_eq!(parsed.dropped, 10);
    }

    #[test]
    fn terminated_garbage_is_corruption() {
        let mut bytes = encode_entry(&entry(1));
        bytes.extend(b"{\"seq\":2,\n");
        let err = parse_log(&bytes).unwrap_err();
        assert!(matches!(err, ServiceError::CorruptLog { line: 2, .. }), "{err}");
    }

    #[test]
    fn open_trims_and_appends_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut log = EventLog::create(&path).unwrap();
        log.append(&entry(1)).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":2,\"at").unwrap();
        drop(f);

        let (mut log, parsed) = EventLog::open(&path).unwrap();
        assert_eq!(parsed.entries.len(), 1);
        log.append(&entry(2)).unwrap();
        let (_, parsed) = EventLog::open(&path).unwrap();
        assert_eq!(parsed.entries, vec![entry(1), entry(2)]);
        assert!(EventLog::create(&path).is_err());
    }
}
