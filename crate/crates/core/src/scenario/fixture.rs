use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MergeScenario, VersionKind, VersionSource};
use crate::oracle::InterferenceType;
use crate::{Error, Result};

pub const GROUND_TRUTH_FILE: &str = "groundtruth.json";
pub const REFACTORINGS_FILE: &str = "refactorings.json";
const UNIT_EXTENSION: &str = "mini";

/// Ground-truth labels stored next to a fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub interference: bool,
    #[serde(rename = "type")]
    pub kind: Option<InterferenceType>,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub dir: PathBuf,
    pub scenario: MergeScenario,
    pub ground_truth: Option<GroundTruth>,
    /// Path of the fixture's external refactoring report, when present.
    pub refactorings: Option<PathBuf>,
}

fn read_version(dir: &Path) -> Result<VersionSource> {
    let mut version = VersionSource::default();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        let entries = fs::read_dir(&current).map_err(|e| Error::io(&current, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&current, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|ext| ext == UNIT_EXTENSION) {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let unit = path
                    .strip_prefix(dir)
                    .expect("walked below the version root")
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                version.units.insert(unit, text.replace("\r\n", "\n"));
            }
        }
    }
    Ok(version)
}

/// Loads a fixture directory with `base/`, `left/`, `right/` and `merge/`
/// subdirectories of `.mini` units.
pub fn load_fixture(dir: impl AsRef<Path>) -> Result<Fixture> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Scenario(format!("{} is not a directory", dir.display())));
    }
    let mut versions = Vec::with_capacity(4);
    for kind in VersionKind::ALL {
        let sub = dir.join(kind.name());
        if !sub.is_dir() {
            return Err(Error::Scenario(format!("{} lacks a `{}/` subdirectory", dir.display(), kind.name())));
        }
        versions.push(read_version(&sub)?);
    }
    let merge = versions.pop().unwrap();
    let right = versions.pop().unwrap();
    let left = versions.pop().unwrap();
    let base = versions.pop().unwrap();
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let scenario = MergeScenario::new(id, base, left, right, merge);
    scenario.validate()?;

    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let ground_truth = if gt_path.is_file() {
        let text = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| Error::json(gt_path.display().to_string(), e))?)
    } else {
        None
    };
    let refactorings = Some(dir.join(REFACTORINGS_FILE)).filter(|p| p.is_file());
    Ok(Fixture { dir: dir.to_path_buf(), scenario, ground_truth, refactorings })
}

/// Writes the four versions of a scenario in fixture layout.
pub fn write_fixture(scenario: &MergeScenario, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for kind in VersionKind::ALL {
        for (unit, text) in &scenario.version(kind).units {
            let path = dir.join(kind.name()).join(unit);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        let sub = dir.join(kind.name());
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    Ok(())
}

pub fn write_ground_truth(gt: &GroundTruth, dir: impl AsRef<Path>) -> Result<()> {
    let path = dir.as_ref().join(GROUND_TRUTH_FILE);
    let mut text = serde_json::to_string_pretty(gt).map_err(|e| Error::json("ground truth", e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
