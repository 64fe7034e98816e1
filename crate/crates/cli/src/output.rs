use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Value};

/// Writes artifacts into one directory, stamping each with the config
/// fingerprint and seed.
pub struct Artifacts {
    dir: PathBuf,
    fingerprint: String,
    seed: u64,
}

impl Artifacts {
    pub fn create(dir: &Path, fingerprint: String, seed: u64) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Artifacts { dir: dir.to_path_buf(), fingerprint, seed })
    }

    pub fn header(&self) -> String {
        format!("gridquake {} config_sha256={} seed={}", env!("CARGO_PKG_VERSION"), self.fingerprint, self.seed)
    }

    pub fn meta(&self) -> Value {
        json!({
            "tool": "gridquake",
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.fingerprint,
            "seed": self.seed,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV body with a leading `#` comment line.
    pub fn csv(&self, name: &str, body: &str) -> anyhow::Result<PathBuf> {
        self.raw(name, &format!("# {}\n{body}", self.header()))
    }

    /// JSON object with a `meta` block merged in front of `body`'s fields.
    pub fn json(&self, name: &str, body: Value) -> anyhow::Result<PathBuf> {
        let mut doc = serde_json::Map::new();
        doc.insert("meta".into(), self.meta());
        match body {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.raw(name, &text)
    }

    pub fn raw(&self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        log::debug!("wrote {}", path.display());
        Ok(path)
    }
}
