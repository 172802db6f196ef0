//! Run manifest: config echo, content hashes of every output file, versions,
//! and wall time. Re-verification recomputes the hashes and detects any
//! tampering with the artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.txt";

fn sha256_hex(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

/// Write `manifest.txt` listing every artifact with its content hash.
pub fn write_manifest(
    out_dir: &Path,
    mode: &str,
    wall_time_secs: f64,
    files: &[PathBuf],
) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str("# bch run manifest\n");
    text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("mode = {mode}\n"));
    text.push_str(&format!("wall_time_secs = {wall_time_secs}\n"));
    text.push_str("[files]\n");
    let mut rows = Vec::new();
    for f in files {
        let rel = f.strip_prefix(out_dir).unwrap_or(f);
        rows.push(format!("{}  {}", sha256_hex(f)?, rel.display()));
    }
    rows.sort();
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(out_dir.join(MANIFEST_NAME), text)?;
    Ok(())
}

/// Recompute every hash listed in the manifest; returns the list of files
/// whose content changed or disappeared.
pub fn verify_manifest(out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(out_dir.join(MANIFEST_NAME))?;
    let mut bad = Vec::new();
    let mut in_files = false;
    for line in text.lines() {
        if line.trim() == "[files]" {
            in_files = true;
            continue;
        }
        if !in_files || line.trim().is_empty() {
            continue;
        }
        let Some((hash, rel)) = line.split_once("  ") else {
            continue;
        };
        let path = out_dir.join(rel);
        match sha256_hex(&path) {
            Ok(actual) if actual == hash => {}
            _ => bad.push(path),
        }
    }
    Ok(bad)
}
