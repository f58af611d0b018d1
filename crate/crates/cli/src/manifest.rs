use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub subcommand: String,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub version: String,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
    /// SHA-256 over subcommand, effective settings and tool version.
    pub run_hash: String,
    pub outputs: Vec<OutputFile>,
    pub all_flags_true: bool,
}

/// Collects output files for one subcommand run.
pub struct Run {
    subcommand: String,
    config: Option<PathBuf>,
    seed: u64,
    out: PathBuf,
    settings: serde_json::Value,
    started: SystemTime,
    clock: Instant,
    outputs: Vec<OutputFile>,
    flags: Vec<bool>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Run {
    pub fn start(
        subcommand: &str,
        config: Option<&Path>,
        seed: u64,
        out: &Path,
        settings: serde_json::Value,
    ) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Run {
            subcommand: subcommand.to_string(),
            config: config.map(Path::to_path_buf),
            seed,
            out: out.to_path_buf(),
            settings,
            started: SystemTime::now(),
            clock: Instant::now(),
            outputs: Vec::new(),
            flags: Vec::new(),
        })
    }

    pub fn flag(&mut self, ok: bool) {
        self.flags.push(ok);
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(OutputFile {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// JSON document with a `manifest` back reference.
    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(map) = &mut v {
            let depth = rel.matches('/').count();
            let back = format!("{}{MANIFEST_NAME}", "../".repeat(depth));
            map.insert("manifest".into(), back.into());
        }
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_csv<R: Serialize>(&mut self, rel: &str, rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().context("flushing csv")?;
        self.write_bytes(rel, &bytes)
    }

    pub fn all_flags_true(&self) -> bool {
        self.flags.iter().all(|&f| f)
    }

    /// Writes the manifest and returns whether every flag held.
    pub fn finish(self) -> Result<bool> {
        let ok = self.all_flags_true();
        let version = env!("CARGO_PKG_VERSION").to_string();
        let hashed = serde_json::json!({
            "subcommand": self.subcommand,
            "seed": self.seed,
            "settings": self.settings,
            "version": version,
        });
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            subcommand: self.subcommand,
            config: self.config,
            seed: self.seed,
            out: self.out.clone(),
            version,
            started_unix: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_secs: self.clock.elapsed().as_secs_f64(),
            run_hash: sha256_hex(serde_json::to_string(&hashed)?.as_bytes()),
            outputs: self.outputs,
            all_flags_true: ok,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.out.join(MANIFEST_NAME), text)?;
        Ok(ok)
    }
}
