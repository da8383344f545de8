//! Merge scenarios: the base, left, right and merge versions of a program,
//! plus the lines each branch contributed to the merge.

mod fixture;
mod git;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diff::{align, diff, hunks};
use crate::minilang::{parse_units, Program};
use crate::{Error, Result};

pub use fixture::{load_fixture, write_fixture, write_ground_truth, Fixture, GroundTruth, GROUND_TRUTH_FILE, REFACTORINGS_FILE};
pub use git::{load_git_scenario, squash_branch};

/// A (unit, line) location. Lines are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRef {
    pub unit: String,
    pub line: usize,
}

impl LineRef {
    pub fn new(unit: impl Into<String>, line: usize) -> Self {
        LineRef { unit: unit.into(), line }
    }
}

impl fmt::Display for LineRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.unit, self.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEntry {
    pub merge_ref: LineRef,
    /// Line in the branch's own version. Set by line mapping for ordinary
    /// entries; for deletions it is the branch line just after the gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_line: Option<usize>,
    pub content: String,
    /// Zero-width entry standing for lines the branch removed. `merge_ref`
    /// anchors it at the first surviving merge line after the removal.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub deletion: bool,
}

impl ChangeEntry {
    /// True for ordinary entries that line mapping could not place.
    pub fn is_unmatched(&self) -> bool {
        !self.deletion && self.parent_line.is_none()
    }
}

/// Lines one branch modified, keyed by merge location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub side: Side,
    entries: Vec<ChangeEntry>,
}

impl ChangeSet {
    pub fn new(side: Side) -> Self {
        ChangeSet { side, entries: Vec::new() }
    }

    /// Builds a set, keeping the first entry for each merge location.
    pub fn from_entries(side: Side, entries: impl IntoIterator<Item = ChangeEntry>) -> Self {
        let mut set = ChangeSet::new(side);
        for e in entries {
            set.insert(e);
        }
        set
    }

    /// Inserts unless an entry with the same merge location exists.
    pub fn insert(&mut self, entry: ChangeEntry) -> bool {
        match self.entries.binary_search_by(|e| e.merge_ref.cmp(&entry.merge_ref)) {
            Ok(_) => false,
            Err(pos) => {
                self.entries.insert(pos, entry);
                true
            }
        }
    }

    pub fn get(&self, at: &LineRef) -> Option<&ChangeEntry> {
        self.entries.binary_search_by(|e| e.merge_ref.cmp(at)).ok().map(|i| &self.entries[i])
    }

    pub fn contains(&self, at: &LineRef) -> bool {
        self.get(at).is_some()
    }

    pub fn entries(&self) -> &[ChangeEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut ChangeEntry> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lines(&self) -> impl Iterator<Item = &LineRef> {
        self.entries.iter().map(|e| &e.merge_ref)
    }
}

/// Text of every unit in one program version.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VersionSource {
    pub units: BTreeMap<String, String>,
}

impl VersionSource {
    pub fn single(unit: impl Into<String>, text: impl Into<String>) -> Self {
        let mut units = BTreeMap::new();
        units.insert(unit.into(), text.into());
        VersionSource { units }
    }

    pub fn text(&self, unit: &str) -> Option<&str> {
        self.units.get(unit).map(String::as_str)
    }

    pub fn lines(&self, unit: &str) -> Vec<&str> {
        self.text(unit).map(|t| t.lines().collect()).unwrap_or_default()
    }

    pub fn parse(&self) -> Result<Program, crate::minilang::ParseError> {
        parse_units(self.units.iter().map(|(u, t)| (u.as_str(), t.as_str())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VersionKind {
    Base,
    Left,
    Right,
    Merge,
}

impl VersionKind {
    pub const ALL: [VersionKind; 4] = [VersionKind::Base, VersionKind::Left, VersionKind::Right, VersionKind::Merge];

    pub fn name(self) -> &'static str {
        match self {
            VersionKind::Base => "base",
            VersionKind::Left => "left",
            VersionKind::Right => "right",
            VersionKind::Merge => "merge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeScenario {
    pub id: String,
    pub base: VersionSource,
    pub left: VersionSource,
    pub right: VersionSource,
    pub merge: VersionSource,
    pub changes_left: ChangeSet,
    pub changes_right: ChangeSet,
}

impl MergeScenario {
    /// Assembles a scenario and computes both change sets.
    pub fn new(
        id: impl Into<String>,
        base: VersionSource,
        left: VersionSource,
        right: VersionSource,
        merge: VersionSource,
    ) -> Self {
        let mut s = MergeScenario {
            id: id.into(),
            base,
            left,
            right,
            merge,
            changes_left: ChangeSet::new(Side::Left),
            changes_right: ChangeSet::new(Side::Right),
        };
        let (l, r) = extract_modified_lines(&s);
        s.changes_left = l;
        s.changes_right = r;
        s
    }

    pub fn version(&self, kind: VersionKind) -> &VersionSource {
        match kind {
            VersionKind::Base => &self.base,
            VersionKind::Left => &self.left,
            VersionKind::Right => &self.right,
            VersionKind::Merge => &self.merge,
        }
    }

    pub fn side_version(&self, side: Side) -> &VersionSource {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn changes(&self, side: Side) -> &ChangeSet {
        match side {
            Side::Left => &self.changes_left,
            Side::Right => &self.changes_right,
        }
    }

    pub fn parse_version(&self, kind: VersionKind) -> Result<Program> {
        self.version(kind)
            .parse()
            .map_err(|source| Error::Parse { version: kind.name().to_owned(), source })
    }

    /// Checks that all four versions parse.
    pub fn validate(&self) -> Result<()> {
        for kind in VersionKind::ALL {
            self.parse_version(kind)?;
        }
        Ok(())
    }

    /// True when `at` names an existing line of the merge version.
    pub fn merge_has_line(&self, at: &LineRef) -> bool {
        at.line >= 1 && self.merge.text(&at.unit).is_some_and(|t| at.line <= t.lines().count())
    }
}

/// Computes the merge lines contributed by each branch.
///
/// A merge line belongs to a branch when it aligns with a line the branch
/// introduced relative to base, or when the merge rewrote such a line
/// (it sits, unmatched by base, in a replacement hunk over introduced
/// lines). Lines introduced identically by both branches land in both sets.
pub fn extract_modified_lines(s: &MergeScenario) -> (ChangeSet, ChangeSet) {
    (side_changes(s, Side::Left), side_changes(s, Side::Right))
}

fn side_changes(s: &MergeScenario, side: Side) -> ChangeSet {
    let mut set = ChangeSet::new(side);
    let branch = s.side_version(side);
    for unit in s.merge.units.keys() {
        let base = s.base.lines(unit);
        let own = branch.lines(unit);
        let merge = s.merge.lines(unit);
        let base_merge = align(&base, &merge);
        let base_own = diff(&base, &own);
        let own_merge_ops = diff(&own, &merge);
        let own_merge = align(&own, &merge);

        let mut introduced = vec![true; own.len()];
        for op in &base_own {
            if let crate::diff::Op::Equal { new, .. } = *op {
                introduced[new] = false;
            }
        }
        let mut rewritten = vec![false; merge.len()];
        for h in hunks(&own_merge_ops) {
            if introduced[h.old_start..h.old_end].iter().any(|&x| x) {
                for (i, r) in rewritten.iter_mut().enumerate().take(h.new_end).skip(h.new_start) {
                    *r = base_merge.new_to_old[i].is_none();
                }
            }
        }
        for (i, text) in merge.iter().enumerate() {
            let from_own = own_merge.new_to_old[i].is_some_and(|k| introduced[k]);
            if from_own || rewritten[i] {
                set.insert(ChangeEntry {
                    merge_ref: LineRef::new(unit.clone(), i + 1),
                    parent_line: None,
                    content: (*text).to_owned(),
                    deletion: false,
                });
            }
        }

        if merge.is_empty() {
            continue;
        }
        for h in hunks(&base_own).into_iter().filter(|h| h.is_pure_deletion()) {
            let anchor = (h.old_end..base.len())
                .find_map(|j| base_merge.old_to_new[j])
                .map_or(merge.len(), |m| m + 1);
            let parent_line = if own.is_empty() { None } else { Some((h.new_start + 1).min(own.len())) };
            set.insert(ChangeEntry {
                merge_ref: LineRef::new(unit.clone(), anchor),
                parent_line,
                content: base[h.old_start..h.old_end].join("\n"),
                deletion: true,
            });
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: &str = "prog.mini";

    fn scenario(base: &str, left: &str, right: &str, merge: &str) -> MergeScenario {
        let v = |t: &str| VersionSource::single(UNIT, t);
        MergeScenario::new("t", v(base), v(left), v(right), v(merge))
    }

    fn lines(set: &ChangeSet) -> Vec<usize> {
        set.entries().iter().map(|e| e.merge_ref.line).collect()
    }

    #[test]
    fn identical_versions_have_no_changes() {
        let src = "global x = 1;\nfn main() {\n    x = 2;\n}\n";
        let s = scenario(src, src, src, src);
        assert!(s.changes_left.is_empty());
        assert!(s.changes_right.is_empty());
    }

    #[test]
    fn edits_attributed_per_branch() {
        let base = "a\nb\nc\nd\ne\n";
        let s = scenario(base, "a\nB\nc\nd\ne\n", "a\nb\nc\nd\nE\n", "a\nB\nc\nd\nE\n");
        assert_eq!(lines(&s.changes_left), vec![2]);
        assert_eq!(lines(&s.changes_right), vec![5]);
    }

    // Hand-computed on a 6-line fixture: left inserts "n" after line 2,
    // right deletes base line 5 ("e"). Merge = a b n c d f.
    #[test]
    fn insertion_and_pure_deletion() {
        let base = "a\nb\nc\nd\ne\nf\n";
        let left = "a\nb\nn\nc\nd\ne\nf\n";
        let right = "a\nb\nc\nd\nf\n";
        let merge = "a\nb\nn\nc\nd\nf\n";
        let s = scenario(base, left, right, merge);
        assert_eq!(lines(&s.changes_left), vec![3]);
        let r = s.changes_right.entries();
        assert_eq!(r.len(), 1);
        assert!(r[0].deletion);
        assert_eq!(r[0].merge_ref.line, 6, "anchored at the surviving `f`");
        assert_eq!(r[0].parent_line, Some(5), "`f` is line 5 of the right version");
        assert_eq!(r[0].content, "e");
    }

    #[test]
    fn same_new_content_goes_to_both_sides() {
        let base = "a\nb\nc\n";
        let both = "a\nX\nc\n";
        let s = scenario(base, both, both, both);
        assert_eq!(lines(&s.changes_left), vec![2]);
        assert_eq!(lines(&s.changes_right), vec![2]);
    }

    #[test]
    fn merge_rewrite_of_changed_line_counts_for_its_branches() {
        let s = scenario("a\nb\n", "a\nL\n", "a\nR\n", "a\nM\n");
        assert_eq!(lines(&s.changes_left), vec![2]);
        assert_eq!(lines(&s.changes_right), vec![2]);
        let s = scenario("a\nb\n", "a\nb\n", "a\nb\n", "a\nM\n");
        assert!(s.changes_left.is_empty() && s.changes_right.is_empty());
    }

    #[test]
    fn duplicated_line_insertion() {
        let base = "f {\nx = 10;\nuse;\n}\n";
        let left = "f {\nx = 10;\nx = 10;\nuse;\n}\n";
        let right = "f {\nx = 20;\nuse;\n}\n";
        let merge = "f {\nx = 20;\nx = 10;\nuse;\n}\n";
        let s = scenario(base, left, right, merge);
        assert_eq!(lines(&s.changes_left), vec![3]);
        assert_eq!(lines(&s.changes_right), vec![2]);
    }

    #[test]
    fn replacement_is_not_a_deletion() {
        let s = scenario("a\nb\nc\nd\n", "a\nx\nd\n", "a\nb\nc\nd\n", "a\nx\nd\n");
        assert_eq!(lines(&s.changes_left), vec![2]);
        assert!(s.changes_left.entries().iter().all(|e| !e.deletion));
    }

    #[test]
    fn deletion_at_end_anchors_on_last_line() {
        let s = scenario("a\nb\nc\n", "a\nb\n", "a\nb\nc\n", "a\nb\n");
        let e = &s.changes_left.entries()[0];
        assert!(e.deletion);
        assert_eq!(e.merge_ref.line, 2);
        assert_eq!(e.parent_line, Some(2));
    }

    #[test]
    fn change_set_dedups_by_location() {
        let mut set = ChangeSet::new(Side::Left);
        let e = ChangeEntry { merge_ref: LineRef::new("u", 3), parent_line: None, content: "x".into(), deletion: false };
        assert!(set.insert(e.clone()));
        assert!(!set.insert(e));
        assert_eq!(set.len(), 1);
    }

    proptest::proptest! {
        // Entries point at real merge lines; an untouched branch contributes nothing.
        #[test]
        fn entries_come_from_changed_branches(
            base in proptest::collection::vec(0u8..5, 0..8),
            left in proptest::collection::vec(0u8..5, 0..8),
            right in proptest::collection::vec(0u8..5, 0..8),
            merge in proptest::collection::vec(0u8..5, 1..8),
        ) {
            let text = |v: &[u8]| v.iter().map(|x| format!("l{x}\n")).collect::<String>();
            let s = scenario(&text(&base), &text(&left), &text(&right), &text(&merge));
            let merge_lines = s.merge.lines(UNIT);
            for (set, own) in [(&s.changes_left, &left), (&s.changes_right, &right)] {
                if *own == base {
                    proptest::prop_assert!(set.is_empty());
                }
                for e in set.entries() {
                    proptest::prop_assert!(s.merge_has_line(&e.merge_ref));
                    if !e.deletion {
                        proptest::prop_assert_eq!(&e.content, merge_lines[e.merge_ref.line - 1]);
                    }
                }
            }
        }
    }
}
