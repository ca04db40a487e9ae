use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const OUTPUT_ROOT_ENV: &str = "STOCHWAVE_OUTPUT_ROOT";
const DEFAULT_ROOT: &str = "stochwave-runs";
const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";

/// Hex sha256 of the canonical JSON form (object keys sorted).
pub fn run_id(canonical: &Value) -> String {
    let bytes = serde_json::to_vec(canonical).expect("json values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn output_root(configured: Option<&Path>) -> PathBuf {
    configured
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
}

/// Output directory of one run, held under a lock file while it is open.
pub struct RunDir {
    pub path: PathBuf,
    pub run_id: String,
    artifacts: Vec<String>,
}

pub enum Opened {
    Cached(PathBuf),
    Fresh(RunDir),
}

impl RunDir {
    pub fn open(root: &Path, subcommand: &str, run_id: &str, force: bool) -> Result<Opened> {
        let path = root.join(format!("{subcommand}-{}", &run_id[..16]));
        if path.join(MANIFEST).exists() && !force {
            return Ok(Opened::Cached(path));
        }
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        match OpenOptions::new().write(true).create_new(true).open(path.join(LOCK)) {
            Ok(mut f) => writeln!(f, "{}", std::process::id())?,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!("{} is locked by another run", path.display())
            }
            Err(e) => return Err(e.into()),
        }
        let _ = fs::remove_file(path.join(MANIFEST));
        Ok(Opened::Fresh(RunDir { path, run_id: run_id.to_string(), artifacts: Vec::new() }))
    }

    pub fn file(&mut self, name: &str) -> Result<File> {
        self.artifacts.push(name.to_string());
        Ok(File::create(self.path.join(name))?)
    }

    pub fn subdir(&mut self, name: &str) -> Result<PathBuf> {
        self.artifacts.push(format!("{name}/"));
        let p = self.path.join(name);
        fs::create_dir_all(&p)?;
        Ok(p)
    }

    /// JSON artifact {"run_id", "result"}.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let doc = json!({ "run_id": self.run_id, "result": value });
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        Ok(())
    }

    /// CSV artifact preceded by a `# run_id=` comment line.
    pub fn write_csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = format!("# run_id={}\n", self.run_id).into_bytes();
        fill(&mut buf)?;
        self.file(name)?.write_all(&buf)?;
        Ok(())
    }

    /// Writes the manifest, which marks the run complete.
    pub fn finish(self, subcommand: &str, canonical: &Value) -> Result<PathBuf> {
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let doc = json!({
            "run_id": self.run_id,
            "subcommand": subcommand,
            "config": canonical,
            "artifacts": self.artifacts,
            "metadata": { "created_unix": created, "version": env!("CARGO_PKG_VERSION") },
        });
        let mut f = File::create(self.path.join(MANIFEST))?;
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        Ok(self.path.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.path.join(LOCK));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a": 1, "b": {"x": 2, "y": 3}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b": {"y": 3, "x": 2}, "a": 1}"#).unwrap();
        assert_eq!(run_id(&a), run_id(&b));
        assert_eq!(run_id(&a).len(), 64);
    }

    #[test]
    fn lock_blocks_a_second_open() {
        let dir = tempfile::tempdir().unwrap();
        let id = "0123456789abcdef0123";
        let first = RunDir::open(dir.path(), "x", id, false).unwrap();
        assert!(RunDir::open(dir.path(), "x", id, false).is_err());
        drop(first);
        assert!(matches!(RunDir::open(dir.path(), "x", id, false).unwrap(), Opened::Fresh(_)));
    }
}
