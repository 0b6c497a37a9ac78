//! Per-stage output directories and their `manifest.json` provenance files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// On-disk format versions this build reads and writes.
    pub formats: BTreeMap<String, u32>,
    pub command: String,
    pub config: serde_json::Value,
    /// Input name → SHA-256. Upstream artifacts are named `stage/file`
    /// relative to the output root; external files by their configured path.
    pub inputs: BTreeMap<String, String>,
    /// File name within the stage directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the serialized manifest.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut hasher = Sha256::new();
    let mut f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn format_versions() -> BTreeMap<String, u32> {
    use author2vec_core::{author2vec, baselines, embedstore, evalharness};
    BTreeMap::from([
        ("checkpoint".to_string(), author2vec::CKPT_VERSION),
        ("embeddings".to_string(), embedstore::EMBED_VERSION),
        ("baseline_model".to_string(), baselines::MODEL_VERSION),
        (
            "eval_report".to_string(),
            evalharness::REPORT_SCHEMA_VERSION,
        ),
    ])
}

/// The output root shared by all stages of one experiment.
#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn manifest(&self, stage: &str) -> Result<Manifest, CliError> {
        let path = self.stage_dir(stage).join(MANIFEST_FILE);
        if !path.exists() {
            return Err(CliError::MissingArtifact(format!(
                "{stage}/{MANIFEST_FILE}"
            )));
        }
        Manifest::load(&path)
    }

    /// Clears and recreates a stage directory.
    pub fn begin(&self, stage: &str) -> Result<StageWriter, CliError> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(StageWriter {
            stage: stage.to_string(),
            dir,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }
}

/// Collects a stage's inputs and outputs, then writes its manifest.
#[derive(Debug)]
pub struct StageWriter {
    stage: String,
    dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stage(&self) -> &str {
        &self.stage
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Resolves `stage/file` from an upstream manifest, verifying that the
    /// file still has the recorded hash, and records it as an input.
    pub fn require(
        &mut self,
        ws: &Workspace,
        stage: &str,
        file: &str,
    ) -> Result<PathBuf, CliError> {
        let name = format!("{stage}/{file}");
        let manifest = ws.manifest(stage)?;
        let recorded = manifest
            .outputs
            .get(file)
            .ok_or_else(|| CliError::MissingArtifact(name.clone()))?;
        let path = ws.stage_dir(stage).join(file);
        if !path.exists() {
            return Err(CliError::MissingArtifact(name));
        }
        let actual = sha256_file(&path)?;
        if &actual != recorded {
            return Err(CliError::StaleArtifact(format!(
                "{name} hash {actual} differs from its manifest ({recorded})"
            )));
        }
        self.inputs.insert(name, actual);
        Ok(path)
    }

    /// Records a file from outside the workspace.
    pub fn external(&mut self, label: &str, path: &Path) -> Result<(), CliError> {
        if !path.exists() {
            return Err(CliError::Config(format!(
                "{label}: {} does not exist",
                path.display()
            )));
        }
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&mut self, file: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(file);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.insert(file.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(file, s.as_bytes())
    }

    /// Records a file some other writer already produced.
    pub fn record(&mut self, file: &str) -> Result<(), CliError> {
        let hash = sha256_file(&self.path(file))?;
        self.outputs.insert(file.to_string(), hash);
        Ok(())
    }

    pub fn finish(self, command: &str, config: serde_json::Value) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            formats: format_versions(),
            command: command.to_string(),
            config,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_json()).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upstream(ws: &Workspace, content: &[u8]) -> Manifest {
        let mut w = ws.begin("up").unwrap();
        w.write("a.bin", content).unwrap();
        w.finish("up", serde_json::json!({})).unwrap()
    }

    fn downstream(ws: &Workspace) -> Result<Manifest, CliError> {
        let mut w = ws.begin("down")?;
        let p = w.require(ws, "up", "a.bin")?;
        let bytes = fs::read(p)?;
        w.write("b.bin", &bytes)?;
        w.finish("down", serde_json::json!({"k": 1}))
    }

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_hash_changes_iff_an_input_changes() {
        let tmp = tempfile::tempdir().unwrap();
        let ws = Workspace::new(tmp.path());
        upstream(&ws, b"one");
        let m1 = downstream(&ws).unwrap();
        let m2 = downstream(&ws).unwrap();
        assert_eq!(m1.digest(), m2.digest());
        upstream(&ws, b"two");
        let m3 = downstream(&ws).unwrap();
        assert_ne!(m1.digest(), m3.digest());
        assert_ne!(m1.inputs, m3.inputs);
    }

    #[test]
    fn missing_and_stale_upstream_are_named() {
        let tmp = tempfile::tempdir().unwrap();
        let ws = Workspace::new(tmp.path());
        match downstream(&ws).unwrap_err() {
            CliError::MissingArtifact(name) => assert_eq!(name, "up/manifest.json"),
            e => panic!("{e}"),
        }
        upstream(&ws, b"one");
        fs::write(ws.stage_dir("up").join("a.bin"), b"tampered").unwrap();
        match downstream(&ws).unwrap_err() {
            CliError::StaleArtifact(msg) => assert!(msg.contains("up/a.bin")),
            e => panic!("{e}"),
        }
        fs::remove_file(ws.stage_dir("up").join("a.bin")).unwrap();
        match downstream(&ws).unwrap_err() {
            CliError::MissingArtifact(name) => assert_eq!(name, "up/a.bin"),
            e => panic!("{e}"),
        }
    }
}
