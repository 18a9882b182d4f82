use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Failure, Outcome};

/// Where a command writes, and the provenance lines every file carries.
pub struct Sink {
    pub dir: PathBuf,
    pub stem: String,
    header: Vec<(String, String)>,
}

impl Sink {
    pub fn new(dir: PathBuf, stem: String, command: &str, config_json: Option<&str>) -> Self {
        let mut header = vec![
            ("levkit".to_string(), levkit_core::VERSION.to_string()),
            ("command".into(), command.into()),
        ];
        if let Some(cfg) = config_json {
            header.push(("config".into(), cfg.into()));
        }
        Sink { dir, stem, header }
    }

    pub fn header(&self) -> &[(String, String)] {
        &self.header
    }

    pub fn header_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.stem))
    }

    /// Writes `<stem>_<suffix>` atomically and returns its path.
    pub fn write(&self, suffix: &str, contents: &str) -> Outcome<PathBuf> {
        let path = self.path(suffix);
        write_atomic(&path, contents)?;
        Ok(path)
    }
}

/// Temp file in the target directory, then rename over the destination.
pub fn write_atomic(path: &Path, contents: &str) -> Outcome<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: std::io::Error| Failure::numerical(format!("writing {}: {e}", path.display()));
    std::fs::create_dir_all(&dir).map_err(fail)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialises") + "\n"
}
