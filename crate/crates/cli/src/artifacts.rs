//! Output artifacts: CSV/JSON staging, manifest with checksums, and the
//! all-or-nothing commit into the output directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Every file name a run may produce; cleared before a failed run's
/// diagnostic is written.
pub const KNOWN: &[&str] = &[
    "values.csv",
    "density.csv",
    "inverse_density.csv",
    "eigenvalues.csv",
    "solution.csv",
    "coefficients.csv",
    "samples.csv",
    "residuals.csv",
    "report.json",
    "manifest.json",
    "diagnostic.json",
];

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory artifact set, written only when the run succeeds.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.push(name, bytes);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.push(name, bytes);
        Ok(())
    }

    fn push(&mut self, name: &str, bytes: Vec<u8>) {
        debug_assert!(KNOWN.contains(&name), "unregistered artifact {name}");
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn checksums(&self) -> Vec<(String, String)> {
        self.files
            .iter()
            .map(|(n, b)| (n.clone(), hex::encode(Sha256::digest(b))))
            .collect()
    }

    /// Write everything to a staging directory, then move it into `dir`.
    pub fn commit(self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let staging = staging_dir(dir);
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        for (name, bytes) in &self.files {
            fs::write(staging.join(name), bytes)?;
        }
        clear_known(dir, &self.names())?;
        for (name, _) in &self.files {
            fs::rename(staging.join(name), dir.join(name))?;
        }
        fs::remove_dir(&staging)
    }
}

fn staging_dir(dir: &Path) -> PathBuf {
    dir.join(format!(".staging-{}", std::process::id()))
}

/// Remove stale artifacts from earlier runs, except those in `keep`.
fn clear_known(dir: &Path, keep: &[&str]) -> io::Result<()> {
    for name in KNOWN {
        if keep.contains(name) {
            continue;
        }
        match fs::remove_file(dir.join(name)) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Leave only `diagnostic.json` behind.
pub fn write_failure(dir: &Path, diagnostic: &Value) -> io::Result<()> {
    let mut a = Artifacts::default();
    a.json("diagnostic.json", diagnostic)
        .map_err(|e| io::Error::other(e.to_string()))?;
    a.commit(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_replaces_stale_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("solution.csv"), "old").unwrap();
        fs::write(dir.path().join("unrelated.txt"), "keep").unwrap();
        let mut a = Artifacts::default();
        a.csv(
            "eigenvalues.csv",
            &["n", "eigenvalue"],
            [vec!["1".into(), fmt_num(1.0)]],
        )
        .unwrap();
        a.commit(dir.path()).unwrap();
        assert!(!dir.path().join("solution.csv").exists());
        assert!(dir.path().join("unrelated.txt").exists());
        let text = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
        assert_eq!(text, "n,eigenvalue\n1,1.0000000000000000e0\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn failure_leaves_only_diagnostic() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("report.json"), "{}").unwrap();
        write_failure(dir.path(), &serde_json::json!({"error": "x"})).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec!["diagnostic.json"]);
    }
}
