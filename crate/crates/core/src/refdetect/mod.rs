//! Refactoring evidence and the `R_f` membership predicate.
//!
//! Records come from the built-in detector and from external tools through a
//! normalized JSON schema. Ranges are in the branch's own coordinates, plus
//! optional merge-coordinate ranges for lines the refactoring added.

mod builtin;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::scenario::{ChangeEntry, MergeScenario, Side};
use crate::{Error, Result};

pub use builtin::detect_builtin;

pub const BUILTIN_TOOL: &str = "builtin";

/// Inclusive, 1-based line range within one unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRange {
    pub unit: String,
    pub start_line: usize,
    pub end_line: usize,
}

impl LineRange {
    pub fn new(unit: impl Into<String>, start_line: usize, end_line: usize) -> Self {
        LineRange { unit: unit.into(), start_line, end_line }
    }

    pub fn contains(&self, unit: &str, line: usize) -> bool {
        self.unit == unit && self.start_line <= line && line <= self.end_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefactoringRecord {
    pub tool: String,
    #[serde(rename = "type")]
    pub rtype: String,
    pub side: Side,
    pub pure: bool,
    pub parent_ranges: Vec<LineRange>,
    #[serde(default)]
    pub added_merge_ranges: Vec<LineRange>,
    #[serde(default)]
    pub description: String,
}

impl RefactoringRecord {
    fn dedup_key(&self) -> (String, Side, Vec<LineRange>, Vec<LineRange>) {
        (self.rtype.clone(), self.side, self.parent_ranges.clone(), self.added_merge_ranges.clone())
    }
}

#[derive(Deserialize)]
struct RawRange {
    unit: String,
    start_line: i64,
    end_line: i64,
}

#[derive(Deserialize)]
struct RawRecord {
    tool: String,
    #[serde(rename = "type")]
    rtype: String,
    side: Side,
    pure: Option<bool>,
    parent_ranges: Vec<RawRange>,
    #[serde(default)]
    added_merge_ranges: Vec<RawRange>,
    #[serde(default)]
    description: String,
}

fn check_range(r: RawRange, index: usize) -> Result<LineRange> {
    if r.unit.is_empty() {
        return Err(Error::Record(format!("record {index}: empty unit")));
    }
    if r.start_line < 1 || r.end_line < 1 {
        return Err(Error::Record(format!("record {index}: non-positive line in {}:{}-{}", r.unit, r.start_line, r.end_line)));
    }
    if r.start_line > r.end_line {
        return Err(Error::Record(format!("record {index}: inverted range {}:{}-{}", r.unit, r.start_line, r.end_line)));
    }
    Ok(LineRange::new(r.unit, r.start_line as usize, r.end_line as usize))
}

/// Parses and validates records in the normalized schema.
pub fn parse_records(text: &str, context: &str) -> Result<Vec<RefactoringRecord>> {
    let raw: Vec<RawRecord> = serde_json::from_str(text).map_err(|e| Error::json(context, e))?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let pure = r.pure.unwrap_or_else(|| {
                log::warn!("{context}: record {i} ({}) has no `pure` flag; assuming pure", r.rtype);
                true
            });
            Ok(RefactoringRecord {
                tool: r.tool,
                rtype: r.rtype,
                side: r.side,
                pure,
                parent_ranges: r.parent_ranges.into_iter().map(|x| check_range(x, i)).collect::<Result<_>>()?,
                added_merge_ranges: r.added_merge_ranges.into_iter().map(|x| check_range(x, i)).collect::<Result<_>>()?,
                description: r.description,
            })
        })
        .collect()
}

pub fn load_external_reports(path: impl AsRef<Path>) -> Result<Vec<RefactoringRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, &path.display().to_string())
}

pub fn write_records(records: &[RefactoringRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(records).map_err(|e| Error::json("refactoring records", e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A provider of refactoring records.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Builtin,
    External(PathBuf),
    /// The fixture's own `refactorings.json`, when it has one.
    Fixture,
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "builtin" => Ok(Source::Builtin),
            "fixture" => Ok(Source::Fixture),
            _ => match s.strip_prefix("external:") {
                Some(p) if !p.is_empty() => Ok(Source::External(PathBuf::from(p))),
                _ => Err(Error::Config(format!("unknown refactoring source `{s}`"))),
            },
        }
    }
}

/// Union of all sources for one side, deduplicated by type, side and ranges.
pub fn detect_refactorings(
    s: &MergeScenario,
    side: Side,
    sources: &[Source],
    fixture_file: Option<&Path>,
    step_limit: u64,
) -> Result<Vec<RefactoringRecord>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for source in sources {
        let records = match source {
            Source::Builtin => detect_builtin(s, side, step_limit)?,
            Source::External(path) => load_external_reports(path)?,
            Source::Fixture => match fixture_file {
                Some(path) => load_external_reports(path)?,
                None => Vec::new(),
            },
        };
        for r in records.into_iter().filter(|r| r.side == side) {
            if seen.insert(r.dedup_key()) {
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Interval lookup over one side's records.
#[derive(Debug, Clone)]
pub struct RefactoringIndex {
    pub side: Side,
    records: Vec<RefactoringRecord>,
    /// Per unit, `(start, end, record)` sorted by start.
    parent: BTreeMap<String, Vec<(usize, usize, usize)>>,
    added: BTreeMap<String, Vec<(usize, usize, usize)>>,
}

fn insert_ranges(map: &mut BTreeMap<String, Vec<(usize, usize, usize)>>, ranges: &[LineRange], record: usize) {
    for r in ranges {
        map.entry(r.unit.clone()).or_default().push((r.start_line, r.end_line, record));
    }
}

fn lookup(map: &BTreeMap<String, Vec<(usize, usize, usize)>>, unit: &str, line: usize) -> Option<usize> {
    let ivs = map.get(unit)?;
    let upto = ivs.partition_point(|&(start, _, _)| start <= line);
    ivs[..upto].iter().filter(|&&(_, end, _)| line <= end).map(|&(_, _, r)| r).min()
}

impl RefactoringIndex {
    /// Indexes the records of `side`. Impure records are dropped unless
    /// `allow_impure` is set.
    pub fn build(side: Side, records: &[RefactoringRecord], allow_impure: bool) -> Self {
        let kept: Vec<RefactoringRecord> =
            records.iter().filter(|r| r.side == side && (r.pure || allow_impure)).cloned().collect();
        let mut parent = BTreeMap::new();
        let mut added = BTreeMap::new();
        for (i, r) in kept.iter().enumerate() {
            insert_ranges(&mut parent, &r.parent_ranges, i);
            insert_ranges(&mut added, &r.added_merge_ranges, i);
        }
        for ivs in parent.values_mut().chain(added.values_mut()) {
            ivs.sort_unstable();
        }
        RefactoringIndex { side, records: kept, parent, added }
    }

    pub fn empty(side: Side) -> Self {
        RefactoringIndex::build(side, &[], false)
    }

    pub fn records(&self) -> &[RefactoringRecord] {
        &self.records
    }

    /// The first record that licenses this modification: its parent line lies
    /// in a parent range, or its merge line in a projected merge range.
    pub fn covering(&self, entry: &ChangeEntry) -> Option<&RefactoringRecord> {
        let unit = entry.merge_ref.unit.as_str();
        let by_parent = entry.parent_line.and_then(|p| lookup(&self.parent, unit, p));
        let hit = by_parent.or_else(|| if entry.deletion { None } else { lookup(&self.added, unit, entry.merge_ref.line) });
        hit.map(|i| &self.records[i])
    }

    pub fn r_f(&self, entry: &ChangeEntry) -> bool {
        self.covering(entry).is_some()
    }
}
