//! Phase one: def-use interference detection over the merged program.
//!
//! Every statement of the merge version is tagged with the branch (or
//! branches) that changed its line. A reaching-definitions analysis over a
//! per-function CFG, with transitive call summaries, then reports
//!
//! * dataflow interference: a definition from one branch reaches a use from
//!   the other;
//! * override interference: two branches define the same global and one
//!   definition reaches the other, or both survive to program exit.

mod dataflow;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::minilang::{walk_stmts, Program};
use crate::scenario::{ChangeSet, LineRef, MergeScenario, Side, VersionKind};
use crate::{Error, Result};

/// Which branches changed a statement's line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    #[default]
    None,
    Left,
    Right,
    Both,
}

impl Tag {
    pub fn with(self, side: Side) -> Tag {
        match (self, side) {
            (Tag::None, Side::Left) | (Tag::Left, Side::Left) => Tag::Left,
            (Tag::None, Side::Right) | (Tag::Right, Side::Right) => Tag::Right,
            _ => Tag::Both,
        }
    }

    pub fn has(self, side: Side) -> bool {
        matches!((self, side), (Tag::Both, _) | (Tag::Left, Side::Left) | (Tag::Right, Side::Right))
    }

    pub fn is_tagged(self) -> bool {
        self != Tag::None
    }

    /// Every side of `other` is also a side of `self`.
    pub fn covers(self, other: Tag) -> bool {
        [Side::Left, Side::Right].into_iter().all(|s| !other.has(s) || self.has(s))
    }

    /// True when one tag can play the left role and the other the right.
    pub fn mixes(self, other: Tag) -> bool {
        (self.has(Side::Left) && other.has(Side::Right)) || (self.has(Side::Right) && other.has(Side::Left))
    }
}

/// The merge program with per-line branch tags.
#[derive(Debug, Clone)]
pub struct AnnotatedProgram {
    pub program: Program,
    pub tags: BTreeMap<LineRef, Tag>,
    /// Changed lines that hold no statement.
    pub warnings: Vec<String>,
}

impl AnnotatedProgram {
    pub fn tag(&self, unit: &str, line: usize) -> Tag {
        self.tags.get(&LineRef::new(unit, line)).copied().unwrap_or_default()
    }
}

fn statement_lines(program: &Program) -> BTreeSet<LineRef> {
    let mut out: BTreeSet<LineRef> = program.globals.iter().map(|g| LineRef::new(g.unit.clone(), g.line)).collect();
    for f in &program.functions {
        walk_stmts(&f.body, &mut |s| {
            out.insert(LineRef::new(f.unit.clone(), s.line));
        });
    }
    out
}

/// Tags statements by change-set membership of their starting line.
pub fn annotate(merge: Program, left: &ChangeSet, right: &ChangeSet) -> AnnotatedProgram {
    let stmt_lines = statement_lines(&merge);
    let mut tags = BTreeMap::new();
    let mut warnings = Vec::new();
    for set in [left, right] {
        for at in set.lines() {
            if stmt_lines.contains(at) {
                let t: &mut Tag = tags.entry(at.clone()).or_default();
                *t = t.with(set.side);
            } else {
                let text = merge.source_line(&at.unit, at.line).unwrap_or("").trim();
                let msg = format!("{} line {at} holds no statement: `{text}`", set.side);
                log::debug!("{msg}");
                warnings.push(msg);
            }
        }
    }
    AnnotatedProgram { program: merge, tags, warnings }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PiKind {
    #[default]
    Dataflow,
    Override,
}

/// One potential interference: a set of merge locations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialInterference {
    #[serde(default)]
    pub kind: PiKind,
    /// Sorted, without duplicates.
    pub members: Vec<LineRef>,
}

impl PotentialInterference {
    pub fn new(kind: PiKind, members: impl IntoIterator<Item = LineRef>) -> Self {
        let set: BTreeSet<LineRef> = members.into_iter().collect();
        PotentialInterference { kind, members: set.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceReport {
    #[serde(rename = "scenario")]
    pub scenario_id: String,
    pub interferences: Vec<PotentialInterference>,
}

impl InterferenceReport {
    pub fn is_empty(&self) -> bool {
        self.interferences.is_empty()
    }

    /// Normalizes member order, drops duplicate PIs, and sorts.
    pub fn normalize(&mut self) {
        let mut seen = BTreeMap::new();
        for pi in self.interferences.drain(..) {
            let pi = PotentialInterference::new(pi.kind, pi.members);
            seen.entry(pi.members.clone()).or_insert(pi.kind);
        }
        self.interferences =
            seen.into_iter().map(|(members, kind)| PotentialInterference { kind, members }).collect();
    }

    /// Checks an externally supplied report against the scenario's merge version.
    pub fn validate(&self, s: &MergeScenario) -> Result<()> {
        for pi in &self.interferences {
            if pi.members.is_empty() {
                return Err(Error::Report("interference with no members".into()));
            }
            if let Some(bad) = pi.members.iter().find(|m| !s.merge_has_line(m)) {
                return Err(Error::Report(format!("{bad} is not a line of the merge version")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Reads a report in the detector's JSON shape. A blank file is an empty
/// report with no scenario id.
pub fn load_report(path: impl AsRef<Path>) -> Result<InterferenceReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(InterferenceReport { scenario_id: String::new(), interferences: Vec::new() });
    }
    let mut report: InterferenceReport =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    let before = report.interferences.len();
    report.normalize();
    if report.interferences.len() != before {
        log::warn!("{}: dropped {} duplicate interference(s)", path.display(), before - report.interferences.len());
    }
    Ok(report)
}

/// Runs the analysis on an annotated program.
pub fn find_interference(ap: &AnnotatedProgram, scenario_id: &str) -> InterferenceReport {
    let mut report = InterferenceReport { scenario_id: scenario_id.to_owned(), interferences: dataflow::analyze(ap) };
    report.normalize();
    report
}

/// Annotates the scenario's merge version and analyzes it.
pub fn detect(s: &MergeScenario) -> Result<InterferenceReport> {
    let merge = s.parse_version(VersionKind::Merge)?;
    let ap = annotate(merge, &s.changes_left, &s.changes_right);
    Ok(find_interference(&ap, &s.id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;
    use crate::scenario::{ChangeEntry, VersionSource};

    fn set(side: Side, lines: &[usize]) -> ChangeSet {
        ChangeSet::from_entries(
            side,
            lines.iter().map(|&l| ChangeEntry {
                merge_ref: LineRef::new("main.mini", l),
                parent_line: None,
                content: String::new(),
                deletion: false,
            }),
        )
    }

    fn run(src: &str, left: &[usize], right: &[usize]) -> Vec<(PiKind, Vec<usize>)> {
        let ap = annotate(parse(src).unwrap(), &set(Side::Left, left), &set(Side::Right, right));
        find_interference(&ap, "t")
            .interferences
            .into_iter()
            .map(|pi| (pi.kind, pi.members.iter().map(|m| m.line).collect()))
            .collect()
    }

    const SEQ: &str = "global x = 0;\nglobal y = 0;\nfn main() {\n    x = 1;\n    y = x + 1;\n}\n";

    #[test]
    fn tag_algebra() {
        assert_eq!(Tag::None.with(Side::Left).with(Side::Right), Tag::Both);
        assert!(Tag::Both.mixes(Tag::Both));
        assert!(Tag::Left.mixes(Tag::Both));
        assert!(!Tag::Left.mixes(Tag::Left));
        assert!(!Tag::None.mixes(Tag::Right));
    }

    #[test]
    fn annotation() {
        let ap = annotate(parse(SEQ).unwrap(), &set(Side::Left, &[4, 6]), &set(Side::Right, &[4]));
        assert_eq!(ap.tag("main.mini", 4), Tag::Both);
        assert_eq!(ap.tag("main.mini", 5), Tag::None);
        assert_eq!(ap.warnings.len(), 1, "line 6 is a closing brace");
        let ap = annotate(parse(SEQ).unwrap(), &set(Side::Left, &[]), &set(Side::Right, &[]));
        assert!(ap.tags.is_empty());
    }

    #[test]
    fn def_reaches_use() {
        assert_eq!(run(SEQ, &[4], &[5]), vec![(PiKind::Dataflow, vec![4, 5])]);
        assert_eq!(run(SEQ, &[5], &[4]), vec![(PiKind::Dataflow, vec![4, 5])]);
        assert!(run(SEQ, &[4, 5], &[]).is_empty());
        assert!(run(SEQ, &[], &[]).is_empty());
    }

    #[test]
    fn killed_definition_does_not_reach() {
        let src = "global x = 0;\nglobal y = 0;\nfn main() {\n    x = 1;\n    x = 2;\n    y = x;\n}\n";
        assert_eq!(run(src, &[4], &[6]), Vec::<(PiKind, Vec<usize>)>::new());
    }

    #[test]
    fn sequential_override() {
        let src = "global x = 0;\nfn main() {\n    x = 1;\n    x = 2;\n}\n";
        assert_eq!(run(src, &[3], &[4]), vec![(PiKind::Override, vec![3, 4])]);
    }

    #[test]
    fn override_at_exit() {
        let src = "global x = 0;\nglobal c = 1;\nfn main() {\n    if (c) {\n        x = 1;\n    } else {\n        x = 2;\n    }\n}\n";
        assert_eq!(run(src, &[5], &[7]), vec![(PiKind::Override, vec![5, 7])]);
    }

    #[test]
    fn loop_carried_dependence() {
        let src = "global x = 0;\nglobal y = 0;\nfn main() {\n    let i = 0;\n    while (i < 3) {\n        y = y + x;\n        x = x + 1;\n        i = i + 1;\n    }\n}\n";
        let pis = run(src, &[7], &[6]);
        assert!(pis.contains(&(PiKind::Dataflow, vec![6, 7])), "{pis:?}");
    }

    #[test]
    fn flows_through_calls() {
        let src = "global x = 0;\nglobal y = 0;\nfn main() {\n    call set();\n    call get();\n}\nfn set() {\n    x = 5;\n}\nfn get() {\n    y = x;\n}\n";
        assert_eq!(run(src, &[8], &[11]), vec![(PiKind::Dataflow, vec![8, 11])]);
        // A tagged call site stands for everything its callee reads and writes.
        assert_eq!(run(src, &[4], &[11]), vec![(PiKind::Dataflow, vec![4, 11])]);
    }

    #[test]
    fn flows_into_parameters() {
        let src = "global y = 0;\nfn main() {\n    let a = 3;\n    call f(a);\n}\nfn f(p) {\n    y = p;\n}\n";
        assert_eq!(run(src, &[3], &[7]), vec![(PiKind::Dataflow, vec![3, 7])]);
    }

    #[test]
    fn global_initializers() {
        let src = "global a = 1;\nglobal b = a + 1;\nfn main() {\n}\n";
        assert_eq!(run(src, &[1], &[2]), vec![(PiKind::Dataflow, vec![1, 2])]);
    }

    #[test]
    fn recursion_terminates() {
        let src = "global n = 3;\nglobal acc = 0;\nfn main() {\n    call r();\n}\nfn r() {\n    if (n > 0) {\n        acc = acc + n;\n        n = n - 1;\n        call r();\n    }\n}\n";
        let pis = run(src, &[9], &[8]);
        assert!(pis.contains(&(PiKind::Dataflow, vec![8, 9])), "{pis:?}");
    }

    #[test]
    fn locals_shadow_globals() {
        let src = "global x = 0;\nglobal y = 0;\nfn main() {\n    x = 4;\n    call f();\n}\nfn f() {\n    let x = 1;\n    y = x;\n}\n";
        assert!(run(src, &[4], &[9]).is_empty());
    }

    #[test]
    fn report_json_shape() {
        let report = InterferenceReport {
            scenario_id: "s".into(),
            interferences: vec![PotentialInterference::new(PiKind::Dataflow, [LineRef::new("u", 7), LineRef::new("u", 5)])],
        };
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"scenario": "s", "interferences": [{"kind": "dataflow", "members": [{"unit": "u", "line": 5}, {"unit": "u", "line": 7}]}]})
        );
    }

    #[test]
    fn external_report_validation() {
        let v = VersionSource::single("u", "fn main() {\n}\n");
        let s = MergeScenario::new("s", v.clone(), v.clone(), v.clone(), v);
        let ok = InterferenceReport { scenario_id: "s".into(), interferences: vec![PotentialInterference::new(PiKind::Dataflow, [LineRef::new("u", 2)])] };
        ok.validate(&s).unwrap();
        let bad = InterferenceReport { scenario_id: "s".into(), interferences: vec![PotentialInterference::new(PiKind::Dataflow, [LineRef::new("u", 3)])] };
        assert!(matches!(bad.validate(&s), Err(Error::Report(_))));
    }
}
