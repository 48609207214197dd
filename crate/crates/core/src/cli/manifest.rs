//! Run manifests: the resolved configuration, its hash, and run metadata.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::Result;

/// Resolved configuration plus timings; outputs reference it by the hash of `config`.
#[derive(Debug)]
pub struct RunManifest {
    pub config: Table,
    pub threads: usize,
    pub timings: Vec<(String, f64)>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut config = Table::new();
        config.insert("command".into(), Value::String(command.into()));
        Self {
            config,
            threads: crate::par::current_threads(),
            timings: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.config.insert(key.into(), value.into());
    }

    pub fn extend(&mut self, table: &Table, prefix: &str) {
        for (k, v) in table {
            self.config.insert(format!("{prefix}{k}"), v.clone());
        }
    }

    /// Runs `f` and records its wall-clock time under `phase`.
    pub fn phase<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push((phase.into(), t.elapsed().as_secs_f64()));
        out
    }

    /// Canonical text of the configuration (sorted keys).
    pub fn config_text(&self) -> String {
        toml::to_string(&self.config).expect("flat table serialises")
    }

    /// SHA-256 of the configuration text; thread count and timings are excluded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.config_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// First line of every CSV written for this run.
    pub fn csv_tag(&self) -> String {
        format!("# manifest {}", self.hash())
    }

    pub fn render(&self) -> String {
        let mut run = Table::new();
        run.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        run.insert("threads".into(), Value::Integer(self.threads as i64));
        run.insert("wall_clock_seconds".into(), Value::Float(self.started.elapsed().as_secs_f64()));
        let mut timings = Table::new();
        for (k, v) in &self.timings {
            timings.insert(k.clone(), Value::Float(*v));
        }
        run.insert("timings".into(), Value::Table(timings));
        let mut doc = Table::new();
        doc.insert("manifest_sha256".into(), Value::String(self.hash()));
        doc.insert("config".into(), Value::Table(self.config.clone()));
        doc.insert("run".into(), Value::Table(run));
        toml::to_string(&doc).expect("manifest serialises")
    }

    /// Writes `<out>.manifest.toml` next to `out`.
    pub fn write_beside(&self, out: &Path) -> Result<PathBuf> {
        let path = sibling(out, "manifest.toml");
        std::fs::write(&path, self.render())?;
        Ok(path)
    }
}

/// `dir/name.csv` -> `dir/name.csv.<suffix>`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timings_and_key_order() {
        let mut a = RunManifest::new("solve");
        a.set("seed", 3i64);
        a.set("paths", 100i64);
        let mut b = RunManifest::new("solve");
        b.set("paths", 100i64);
        b.set("seed", 3i64);
        b.phase("x", || ());
        assert_eq!(a.hash(), b.hash());
        b.set("seed", 4i64);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        assert!(a.render().contains("[run.timings]") || a.render().contains("[run]"));
    }
}
