//! Output files. Every file carries the format version and the resolved
//! configuration: JSON documents as top-level fields, CSV files as `#` header
//! lines.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    command: &'static str,
    config: Value,
}

impl OutputDir {
    /// The directory itself is created on the first write.
    pub fn new(root: &Path, command: &'static str, config: Value) -> Self {
        Self {
            root: root.to_path_buf(),
            command,
            config,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn target(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.root)
            .with_context(|| format!("cannot create {}", self.root.display()))?;
        Ok(self.path(name))
    }

    /// Writes `{format_version, command, config, ...payload}`; the payload must
    /// serialize to a JSON object.
    pub fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        let mut doc = Map::new();
        doc.insert("format_version".into(), FORMAT_VERSION.into());
        doc.insert("command".into(), self.command.into());
        doc.insert("config".into(), self.config.clone());
        match serde_json::to_value(payload)? {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let path = self.target(name)?;
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Writes the provenance header, then lets `body` write the table.
    pub fn write_csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.target(name)?;
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# format_version={FORMAT_VERSION}")?;
        writeln!(w, "# command={}", self.command)?;
        writeln!(w, "# config={}", serde_json::to_string(&self.config)?)?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}
