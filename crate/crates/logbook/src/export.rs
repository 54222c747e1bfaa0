//! Self-contained examination exports: `config.json`, `log.jsonl`, `meta.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SceneConfiguration;
use crate::entry::LogEntry;
use crate::replay::replay_log;
use crate::store::{now_ms, LogFilter, LogStore};
use crate::LogbookError;

pub const EXPORT_CONFIG: &str = "config.json";
pub const EXPORT_LOG: &str = "log.jsonl";
pub const EXPORT_META: &str = "meta.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub tool_version: String,
    pub session: String,
    pub scene_id: String,
    pub entry_count: usize,
    pub exported_at: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Export {
    pub config: SceneConfiguration,
    pub entries: Vec<LogEntry>,
    pub meta: ExportMeta,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LogbookError> {
    let text = serde_json::to_vec_pretty(value).map_err(|e| LogbookError::Serialization(e.to_string()))?;
    let mut f = File::create(path)?;
    f.write_all(&text)?;
    f.write_all(b"\n")?;
    f.sync_all()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LogbookError> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| LogbookError::Export(format!("{}: {e}", path.display())))
}

/// Writes every entry of `session` plus the configuration they replay to.
pub fn export_session(store: &LogStore, session: &str, out: &Path, tool_version: &str) -> Result<Export, LogbookError> {
    export_entries(&store.query(&LogFilter::session(session)), session, out, tool_version)
}

/// As [`export_session`], from entries already read (e.g. by [`crate::store::read_log`]).
/// Entries of other sessions are ignored.
pub fn export_entries(all: &[LogEntry], session: &str, out: &Path, tool_version: &str) -> Result<Export, LogbookError> {
    let entries: Vec<LogEntry> = all.iter().filter(|e| e.session == session).cloned().collect();
    if entries.is_empty() {
        return Err(LogbookError::UnknownSession(session.to_owned()));
    }
    let mut config = replay_log(&entries)?;
    config.name = format!("export-{session}");
    let now = now_ms();
    config.created_at = now;
    let meta = ExportMeta {
        tool_version: tool_version.to_owned(),
        session: session.to_owned(),
        scene_id: config.scene_id.clone(),
        entry_count: entries.len(),
        exported_at: now,
    };

    std::fs::create_dir_all(out)?;
    write_json(&out.join(EXPORT_CONFIG), &config)?;
    let mut log = BufWriter::new(File::create(out.join(EXPORT_LOG))?);
    for e in &entries {
        serde_json::to_writer(&mut log, e).map_err(|e| LogbookError::Serialization(e.to_string()))?;
        log.write_all(b"\n")?;
    }
    log.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    write_json(&out.join(EXPORT_META), &meta)?;
    Ok(Export { config, entries, meta })
}

pub fn read_export(dir: &Path) -> Result<Export, LogbookError> {
    let config = read_json(&dir.join(EXPORT_CONFIG))?;
    let meta = read_json(&dir.join(EXPORT_META))?;
    let text = std::fs::read_to_string(dir.join(EXPORT_LOG))?;
    let entries = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogbookError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<LogEntry>, _>>()?;
    Ok(Export { config, entries, meta })
}

/// Replays the exported log and checks it against the exported configuration.
pub fn verify_export(export: &Export) -> Result<SceneConfiguration, LogbookError> {
    if export.meta.entry_count != export.entries.len() {
        return Err(LogbookError::Export(format!(
            "meta declares {} entries, log has {}",
            export.meta.entry_count,
            export.entries.len()
        )));
    }
    if let Some(e) = export.entries.iter().find(|e| e.session != export.meta.session) {
        return Err(LogbookError::Export(format!("entry {} belongs to session `{}`", e.seq, e.session)));
    }
    let replayed = replay_log(&export.entries)?;
    if !replayed.same_state(&export.config) {
        return Err(LogbookError::ExportMismatch {
            diff: export.config.diff(&replayed),
        });
    }
    Ok(replayed)
}
