use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Collects everything a run reads and writes, then records it in
/// `manifest.json` next to the outputs.
pub struct Run {
    out: Option<PathBuf>,
    command: &'static str,
    started: f64,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Run {
    pub fn new(command: &'static str, out: Option<&Path>) -> Result<Self> {
        if let Some(dir) = out {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Self {
            out: out.map(Path::to_path_buf),
            command,
            started: unix_now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Reads an input file and remembers its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path)
            .map_err(|e| loadshare::Error::Io(format!("{}: {e}", path.display())))?;
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256 });
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        if let Some(dir) = &self.out {
            let path = dir.join(name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
            self.outputs.push(name.to_string());
        }
        Ok(())
    }

    pub fn finish<C: Serialize>(self, seed: u64, config: &C) -> Result<()> {
        let Some(dir) = &self.out else { return Ok(()) };
        let manifest = serde_json::json!({
            "command": self.command,
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started_unix": self.started,
            "finished_unix": unix_now(),
        });
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Minimal CSV builder for numeric tables.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Shortest round-trip formatting; empty for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

pub fn json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}
