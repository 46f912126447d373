//! Reproducibility record emitted with every output: identical manifests
//! imply byte-identical outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    subcommand: &'static str,
    toolkit_version: &'static str,
    flags: BTreeMap<String, String>,
    inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str) -> Self {
        RunManifest {
            subcommand,
            toolkit_version: convcast::TOOLKIT_VERSION,
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            seed: None,
        }
    }

    pub fn flag(&mut self, key: &str, value: impl Display) {
        self.flags.insert(key.to_string(), value.to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: Sha256::digest(text.as_bytes())
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect(),
        });
        Ok(text)
    }

    /// Writes `<output>.manifest.json` next to a file output, or one JSON
    /// line to stderr when the result went to stdout.
    pub fn emit(self, output: Option<&Path>) -> Result<()> {
        match output {
            Some(path) => {
                let mut name = path.file_name().unwrap_or_default().to_os_string();
                name.push(".manifest.json");
                let target = path.with_file_name(name);
                let mut text = serde_json::to_string_pretty(&self)?;
                text.push('\n');
                fs::write(&target, text)
                    .with_context(|| format!("writing {}", target.display()))?;
            }
            None => eprintln!("manifest: {}", serde_json::to_string(&self)?),
        }
        Ok(())
    }
}
