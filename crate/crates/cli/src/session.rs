use anyhow::Context;
use scenelab_logbook::{export_entries, read_export, read_log, verify_export, LogbookError};

use crate::args::{ExportArgs, ReplayArgs};
use crate::Reported;

pub fn export(a: ExportArgs) -> anyhow::Result<()> {
    if !a.log_dir.is_dir() {
        anyhow::bail!("log directory {} does not exist", a.log_dir.display());
    }
    let entries = read_log(&a.log_dir).with_context(|| format!("reading the log in {}", a.log_dir.display()))?;
    let export = export_entries(&entries, &a.session, &a.out, env!("CARGO_PKG_VERSION"))?;
    println!(
        "exported session {} ({} entries, scene {}) to {}",
        export.meta.session,
        export.meta.entry_count,
        export.meta.scene_id,
        a.out.display()
    );
    Ok(())
}

pub fn replay(a: ReplayArgs) -> anyhow::Result<()> {
    let export = read_export(&a.export).with_context(|| format!("reading export {}", a.export.display()))?;
    match verify_export(&export) {
        Ok(config) => {
            println!("{}", serde_json::to_string_pretty(&config)?);
            Ok(())
        }
        Err(LogbookError::ExportMismatch { diff }) => {
            eprintln!("replayed state differs from the exported configuration:");
            for line in &diff {
                eprintln!("  {line}");
            }
            Err(Reported.into())
        }
        Err(e) => Err(e.into()),
    }
}
