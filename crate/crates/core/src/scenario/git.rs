use std::path::{Path, PathBuf};
use std::process::Command;

use super::{MergeScenario, VersionSource};
use crate::{Error, Result};

struct Repo {
    dir: PathBuf,
    // Keeps a cloned remote alive for the duration of the load.
    _clone: Option<tempfile::TempDir>,
}

impl Repo {
    fn open(location: &str) -> Result<Repo> {
        let local = Path::new(location);
        if local.is_dir() {
            return Ok(Repo { dir: local.to_path_buf(), _clone: None });
        }
        if !location.contains("://") && !location.starts_with("git@") {
            return Err(Error::Git(format!("repository `{location}` not found")));
        }
        let tmp = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let target = tmp.path().join("repo");
        let status = Command::new("git")
            .args(["clone", "--quiet", "--no-checkout", location])
            .arg(&target)
            .status()
            .map_err(|e| Error::Git(format!("cannot run git: {e}")))?;
        if !status.success() {
            return Err(Error::Git(format!("clone of `{location}` failed")));
        }
        Ok(Repo { dir: target, _clone: Some(tmp) })
    }

    fn git(&self, args: &[&str]) -> Result<String> {
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.dir)
            .args(args)
            .output()
            .map_err(|e| Error::Git(format!("cannot run git: {e}")))?;
        if !out.status.success() {
            return Err(Error::Git(format!(
                "`git {}` failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        String::from_utf8(out.stdout).map_err(|_| Error::Git(format!("`git {}` produced non-UTF-8 output", args.join(" "))))
    }

    fn tree(&self, commit: &str) -> Result<VersionSource> {
        let listing = self.git(&["ls-tree", "-r", "-z", "--name-only", commit])?;
        let mut version = VersionSource::default();
        for path in listing.split('\0').filter(|p| p.ends_with(".mini")) {
            let text = self.git(&["cat-file", "blob", &format!("{commit}:{path}")])?;
            version.units.insert(path.to_owned(), text.replace("\r\n", "\n"));
        }
        Ok(version)
    }
}

/// Collapses a branch's history since `base` into one virtual version.
///
/// Only the head tree matters: intermediate edits, and files added then
/// removed along the way, leave no trace.
pub fn squash_branch(_base: &VersionSource, head: &VersionSource) -> VersionSource {
    head.clone()
}

/// Loads the scenario around a two-parent merge commit. `repo` is a local
/// path or a remote URL; remotes are cloned into a temporary directory.
pub fn load_git_scenario(repo: &str, merge_commit: &str) -> Result<MergeScenario> {
    let repo = Repo::open(repo)?;
    let commit = repo.git(&["rev-parse", "--verify", &format!("{merge_commit}^{{commit}}")])?.trim().to_owned();
    let parents_line = repo.git(&["rev-list", "--parents", "-n", "1", &commit])?;
    let parents: Vec<&str> = parents_line.split_whitespace().skip(1).collect();
    if parents.len() != 2 {
        return Err(Error::Git(format!("{commit} has {} parent(s); a two-parent merge is required", parents.len())));
    }
    let base_commit = repo
        .git(&["merge-base", parents[0], parents[1]])
        .map_err(|_| Error::Git(format!("no merge base between {} and {}", parents[0], parents[1])))?
        .trim()
        .to_owned();
    let base = repo.tree(&base_commit)?;
    let left = squash_branch(&base, &repo.tree(parents[0])?);
    let right = squash_branch(&base, &repo.tree(parents[1])?);
    let merge = repo.tree(&commit)?;
    let scenario = MergeScenario::new(commit, base, left, right, merge);
    scenario.validate()?;
    Ok(scenario)
}
