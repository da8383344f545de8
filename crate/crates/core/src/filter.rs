//! Phase two: discard potential interferences that one branch touched only
//! through behavior-preserving refactorings.
//!
//! For a branch `c` and interference `PI`, `psi(c, PI)` holds when every
//! member of `PI` is either unmodified by `c` or covered by a pure
//! refactoring of `c`. A PI is discarded when `psi` holds on either side.
//! Membership uses merge coordinates; refactoring lookups use each change
//! entry's own parent line.

use serde::{Deserialize, Serialize};

use crate::detect::{InterferenceReport, PotentialInterference};
use crate::refdetect::{RefactoringIndex, RefactoringRecord};
use crate::scenario::{ChangeSet, LineRef, Side};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    NotModifiedBySide,
    Refactoring(RefactoringRecord),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(flatten)]
    pub at: LineRef,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub discarded: bool,
    #[serde(rename = "witness")]
    pub witness_side: Option<Side>,
    #[serde(flatten)]
    pub pi: PotentialInterference,
    /// One item per member when discarded; empty otherwise.
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    #[serde(rename = "scenario")]
    pub scenario_id: String,
    pub any_kept: bool,
    pub verdicts: Vec<Verdict>,
}

impl FilterOutcome {
    pub fn kept(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.discarded)
    }
}

/// Per-member justification when `psi` holds, `None` otherwise.
pub fn psi_evidence(changes: &ChangeSet, idx: &RefactoringIndex, pi: &PotentialInterference) -> Option<Vec<Evidence>> {
    pi.members
        .iter()
        .map(|m| {
            let basis = match changes.get(m) {
                None => Basis::NotModifiedBySide,
                Some(entry) => Basis::Refactoring(idx.covering(entry)?.clone()),
            };
            Some(Evidence { at: m.clone(), basis })
        })
        .collect()
}

pub fn psi(changes: &ChangeSet, idx: &RefactoringIndex, pi: &PotentialInterference) -> bool {
    psi_evidence(changes, idx, pi).is_some()
}

pub fn classify_pi(
    pi: &PotentialInterference,
    left: &ChangeSet,
    right: &ChangeSet,
    idx_left: &RefactoringIndex,
    idx_right: &RefactoringIndex,
) -> Verdict {
    let witness = psi_evidence(left, idx_left, pi)
        .map(|e| (Side::Left, e))
        .or_else(|| psi_evidence(right, idx_right, pi).map(|e| (Side::Right, e)));
    match witness {
        Some((side, evidence)) => Verdict { discarded: true, witness_side: Some(side), pi: pi.clone(), evidence },
        None => Verdict { discarded: false, witness_side: None, pi: pi.clone(), evidence: Vec::new() },
    }
}

/// Classifies every PI of a report. An empty report keeps nothing.
pub fn classify(
    report: &InterferenceReport,
    left: &ChangeSet,
    right: &ChangeSet,
    idx_left: &RefactoringIndex,
    idx_right: &RefactoringIndex,
) -> FilterOutcome {
    debug_assert_eq!(left.side, Side::Left);
    debug_assert_eq!(right.side, Side::Right);
    let verdicts: Vec<Verdict> =
        report.interferences.iter().map(|pi| classify_pi(pi, left, right, idx_left, idx_right)).collect();
    let any_kept = verdicts.iter().any(|v| !v.discarded);
    FilterOutcome { scenario_id: report.scenario_id.clone(), any_kept, verdicts }
}
