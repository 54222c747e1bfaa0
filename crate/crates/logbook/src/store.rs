//! On-disk store: `log.jsonl` (one entry per line) and `configs/<name>.json`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::SceneConfiguration;
use crate::entry::{Action, LogEntry};
use crate::LogbookError;

pub const LOG_FILE: &str = "log.jsonl";
pub const CONFIG_DIR: &str = "configs";

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// A partial final record found (and cut off) when the store was opened.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recovery {
    /// 1-based line number of the torn record.
    pub line: usize,
    pub discarded_bytes: u64,
}

#[derive(Clone, Debug, Default)]
pub struct StoreOptions {
    /// Appends that would grow the log past this many bytes fail with StorageFull.
    pub max_bytes: Option<u64>,
}

/// Query filter; unset fields match everything. Seq bounds are inclusive.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogFilter {
    #[serde(default)]
    pub session: Option<String>,
    #[serde(default)]
    pub action: Option<String>,
    #[serde(default)]
    pub from_seq: Option<u64>,
    #[serde(default)]
    pub to_seq: Option<u64>,
}

impl LogFilter {
    pub fn session(id: impl Into<String>) -> Self {
        LogFilter {
            session: Some(id.into()),
            ..Default::default()
        }
    }

    pub fn matches(&self, e: &LogEntry) -> bool {
        self.session.as_ref().is_none_or(|s| *s == e.session)
            && self.action.as_ref().is_none_or(|a| a == e.action.name())
            && self.from_seq.is_none_or(|lo| e.seq >= lo)
            && self.to_seq.is_none_or(|hi| e.seq <= hi)
    }
}

struct Writer {
    file: File,
    next_seq: u64,
    len: u64,
}

/// Append-only log with a single serialized writer. Readers see a consistent
/// prefix of the log and never block on the disk.
/// Complete entries, the byte length they span, and the torn tail if any.
fn parse_log(bytes: &[u8]) -> Result<(Vec<LogEntry>, usize, Option<Recovery>), LogbookError> {
    let mut entries: Vec<LogEntry> = Vec::new();
    let mut offset = 0usize;
    let mut recovery = None;
    for (i, chunk) in bytes.split_inclusive(|b| *b == b'\n').enumerate() {
        if !chunk.ends_with(b"\n") {
            recovery = Some(Recovery {
                line: i + 1,
                discarded_bytes: chunk.len() as u64,
            });
            break;
        }
        let entry: LogEntry = serde_json::from_slice(chunk).map_err(|e| LogbookError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        if entries.last().is_some_and(|p| p.seq >= entry.seq) {
            return Err(LogbookError::Corrupt {
                line: i + 1,
                message: format!("seq {} does not increase", entry.seq),
            });
        }
        entries.push(entry);
        offset += chunk.len();
    }
    Ok((entries, offset, recovery))
}

/// Reads the log under `root` without opening it for writing. A torn
/// final record is skipped, not repaired.
pub fn read_log(root: &Path) -> Result<Vec<LogEntry>, LogbookError> {
    let bytes = std::fs::read(root.join(LOG_FILE))?;
    Ok(parse_log(&bytes)?.0)
}

pub struct LogStore {
    root: PathBuf,
    writer: Mutex<Writer>,
    entries: RwLock<Vec<LogEntry>>,
    config_lock: Mutex<()>,
    options: StoreOptions,
    recovery: Option<Recovery>,
}

impl std::fmt::Debug for LogStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogStore").field("root", &self.root).finish_non_exhaustive()
    }
}

impl LogStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, LogbookError> {
        Self::open_with(root, StoreOptions::default())
    }

    pub fn open_with(root: impl Into<PathBuf>, options: StoreOptions) -> Result<Self, LogbookError> {
        let root = root.into();
        std::fs::create_dir_all(root.join(CONFIG_DIR))?;
        let path = root.join(LOG_FILE);
        let file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let bytes = std::fs::read(&path)?;

        let (entries, offset, recovery) = parse_log(&bytes)?;
        if recovery.is_some() {
            file.set_len(offset as u64)?;
            file.sync_data()?;
        }
        let next_seq = entries.last().map_or(1, |e| e.seq + 1);
        Ok(LogStore {
            root,
            writer: Mutex::new(Writer {
                file,
                next_seq,
                len: offset as u64,
            }),
            entries: RwLock::new(entries),
            config_lock: Mutex::new(()),
            options,
            recovery,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Torn record discarded by [`open`](Self::open), if there was one.
    pub fn recovery(&self) -> Option<&Recovery> {
        self.recovery.as_ref()
    }

    /// Persists one entry with the next seq. The record is on disk when this returns.
    pub fn append(&self, session: &str, action: Action) -> Result<LogEntry, LogbookError> {
        action.validate().map_err(LogbookError::Serialization)?;
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let entry = LogEntry {
            seq: w.next_seq,
            ts: now_ms(),
            session: session.to_owned(),
            action,
        };
        let mut line = serde_json::to_vec(&entry).map_err(|e| LogbookError::Serialization(e.to_string()))?;
        line.push(b'\n');
        if let Some(limit) = self.options.max_bytes {
            if w.len + line.len() as u64 > limit {
                return Err(LogbookError::StorageFull { limit });
            }
        }
        let len = w.len;
        if let Err(e) = w.file.write_all(&line).and_then(|_| w.file.sync_data()) {
            // drop whatever part of the record made it out
            let _ = w.file.set_len(len);
            return Err(e.into());
        }
        w.len += line.len() as u64;
        w.next_seq += 1;
        self.entries.write().unwrap_or_else(|e| e.into_inner()).push(entry.clone());
        Ok(entry)
    }

    pub fn query(&self, filter: &LogFilter) -> Vec<LogEntry> {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .filter(|e| filter.matches(e))
            .cloned()
            .collect()
    }

    pub fn get(&self, seq: u64) -> Option<LogEntry> {
        let entries = self.entries.read().unwrap_or_else(|e| e.into_inner());
        entries
            .binary_search_by_key(&seq, |e| e.seq)
            .ok()
            .map(|i| entries[i].clone())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn config_path(&self, name: &str) -> Result<PathBuf, LogbookError> {
        let ok = !name.is_empty()
            && name.len() <= 128
            && !name.starts_with('.')
            && name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
        if !ok {
            return Err(LogbookError::InvalidName(name.to_owned()));
        }
        Ok(self.root.join(CONFIG_DIR).join(format!("{name}.json")))
    }

    /// Stores `config` under `config.name`.
    pub fn save_config(&self, config: &SceneConfiguration, overwrite: bool) -> Result<(), LogbookError> {
        config.validate().map_err(LogbookError::Serialization)?;
        let path = self.config_path(&config.name)?;
        let _guard = self.config_lock.lock().unwrap_or_else(|e| e.into_inner());
        if path.exists() && !overwrite {
            return Err(LogbookError::NameCollision(config.name.clone()));
        }
        let text = serde_json::to_vec_pretty(config).map_err(|e| LogbookError::Serialization(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&text)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn load_config(&self, name: &str) -> Result<SceneConfiguration, LogbookError> {
        let path = self.config_path(name)?;
        let text = match std::fs::read(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(LogbookError::UnknownConfig(name.to_owned())),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_slice(&text).map_err(|e| LogbookError::Serialization(format!("{name}: {e}")))
    }

    pub fn list_configs(&self) -> Result<Vec<String>, LogbookError> {
        let mut names = Vec::new();
        for entry in std::fs::read_dir(self.root.join(CONFIG_DIR))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    names.push(stem.to_owned());
                }
            }
        }
        names.sort();
        Ok(names)
    }
}
