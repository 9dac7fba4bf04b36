//! Artifact emission: atomic file writes, the metadata sidecar, and the
//! machine-readable summary that accompanies every run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use pearl_core::engine::RunStatus;
use pearl_core::game::ProblemParameters;

use crate::config::ExperimentConfig;

/// Writes via a temporary sibling and renames into place, so readers never
/// observe a half-written artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)
        .with_context(|| format!("creating output directory {}", parent.display()))?;
    let mut tmp = path.to_path_buf();
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".into());
    tmp.set_file_name(format!(".{file_name}.tmp"));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}

/// Final error of one `(tau, gamma)` cell of an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub tau: u64,
    /// Resolved step size (first-round value for decreasing schedules).
    pub gamma: f64,
    pub final_rel_error: f64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub entries: Vec<SummaryEntry>,
}

/// Sidecar with everything needed to reproduce the artifact directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub problem_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem_params: Option<ProblemParameters>,
    /// Residual of the equilibrium used for relative errors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_star_residual: Option<f64>,
    /// Resolved step size per tau (first round).
    pub resolved_gammas: Vec<(u64, f64)>,
    pub seed: u64,
}

pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.path(name), contents)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).context("serializing artifact")?;
        self.write(name, &text)
    }
}

/// Strips the trailing `elapsed_ms` column from every CSV line. Wall time is
/// the one legitimately nondeterministic column; everything else must
/// reproduce bit-for-bit.
pub fn strip_elapsed_column(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(idx) => &line[..idx],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Compares two artifact directories for scientific equality: identical
/// file sets of CSV/summary artifacts, CSV contents equal modulo the
/// `elapsed_ms` column, and identical summaries.
pub fn compare_artifacts(original: &Path, replay: &Path) -> Result<Vec<String>> {
    let mut mismatches = Vec::new();
    let mut names: Vec<String> = fs::read_dir(original)
        .with_context(|| format!("reading {}", original.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") || n == "summary.json" || n == "problem.json")
        .collect();
    names.sort();
    for name in names {
        let a = fs::read_to_string(original.join(&name))
            .with_context(|| format!("reading original {name}"))?;
        let b = match fs::read_to_string(replay.join(&name)) {
            Ok(text) => text,
            Err(_) => {
                mismatches.push(format!("{name}: missing from replay"));
                continue;
            }
        };
        let (a, b) = if name.ends_with(".csv") {
            (strip_elapsed_column(&a), strip_elapsed_column(&b))
        } else {
            (a, b)
        };
        if a != b {
            mismatches.push(format!("{name}: contents differ"));
        }
    }
    Ok(mismatches)
}
