//! Run manifests: the fully resolved parameters of a stage, written next to
//! its outputs. Re-running a stage from its manifest reproduces the outputs
//! bit-for-bit, so manifests carry no timestamps.

use anyhow::{Context, Result};
use serde_json::{json, Value};
use std::path::Path;

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    params: Value,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let manifest = json!({
        "command": command,
        "seed": seed,
        "params": params,
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write manifest {}", path.display()))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read input file {}", path.display()))
}
