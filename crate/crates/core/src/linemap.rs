//! Content-based alignment of merge lines to a branch's own line numbers.
//!
//! Refactoring reports locate code in the branch version, while interference
//! reports use merge coordinates. Each changed merge line is matched against
//! every line of the same unit in the branch by Jaro-Winkler similarity.

use std::collections::{BTreeMap, BTreeSet};

use crate::scenario::{ChangeSet, VersionSource};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.85;
pub const DEFAULT_PREFIX_SCALE: f64 = 0.1;
pub const DEFAULT_MAX_PREFIX: usize = 4;

/// Jaro similarity over Unicode scalar values.
pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == *ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_matched).filter(|(_, m)| **m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, m)| **m).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();
    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler: `jaro + l * prefix_scale * (1 - jaro)` where `l` is the
/// common prefix length capped at `max_prefix`.
pub fn jaro_winkler(a: &str, b: &str, prefix_scale: f64, max_prefix: usize) -> f64 {
    debug_assert!((0.0..=0.25).contains(&prefix_scale));
    let j = jaro(a, b);
    let prefix = a.chars().zip(b.chars()).take_while(|(x, y)| x == y).take(max_prefix).count();
    j + prefix as f64 * prefix_scale * (1.0 - j)
}

pub fn jaro_winkler_default(a: &str, b: &str) -> f64 {
    jaro_winkler(a, b, DEFAULT_PREFIX_SCALE, DEFAULT_MAX_PREFIX)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMapConfig {
    pub threshold: f64,
    pub prefix_scale: f64,
    pub max_prefix: usize,
}

impl Default for LineMapConfig {
    fn default() -> Self {
        LineMapConfig { threshold: DEFAULT_THRESHOLD, prefix_scale: DEFAULT_PREFIX_SCALE, max_prefix: DEFAULT_MAX_PREFIX }
    }
}

impl LineMapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.25).contains(&self.prefix_scale) {
            return Err(Error::Config(format!("prefix scale {} outside [0, 0.25]", self.prefix_scale)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

/// Merge-to-parent correspondence for one unit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineMapping {
    pub unit: String,
    pub pairs: BTreeMap<usize, usize>,
    pub unmatched: BTreeSet<usize>,
}

impl LineMapping {
    pub fn is_injective(&self) -> bool {
        let targets: BTreeSet<_> = self.pairs.values().collect();
        targets.len() == self.pairs.len()
    }
}

struct Candidate {
    score: f64,
    distance: usize,
    parent: usize,
    entry: usize,
}

/// Assigns a parent line to every non-deletion entry.
///
/// Candidates are ranked by similarity, then by positional distance, then by
/// parent line. Assignment is greedy over that global ranking so that no two
/// merge lines claim the same parent line. Entries whose best remaining
/// candidate falls below the threshold stay unmatched.
pub fn map_lines(changes: &ChangeSet, parent: &VersionSource, config: &LineMapConfig) -> Result<ChangeSet> {
    let mut out = changes.clone();
    let mut by_unit: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in changes.entries().iter().enumerate() {
        if !e.deletion {
            by_unit.entry(e.merge_ref.unit.as_str()).or_default().push(i);
        }
    }
    let mut assigned: BTreeMap<usize, Option<usize>> = BTreeMap::new();
    for (unit, idxs) in by_unit {
        let parent_text = parent.text(unit).ok_or_else(|| Error::MissingUnit(unit.to_owned()))?;
        let parent_lines: Vec<&str> = parent_text.lines().map(str::trim).collect();
        let mut cands = Vec::new();
        for &i in &idxs {
            let e = &changes.entries()[i];
            let content = e.content.trim();
            for (k, p) in parent_lines.iter().enumerate() {
                let score = jaro_winkler(content, p, config.prefix_scale, config.max_prefix);
                if score >= config.threshold {
                    cands.push(Candidate { score, distance: (k + 1).abs_diff(e.merge_ref.line), parent: k + 1, entry: i });
                }
            }
        }
        cands.sort_by(|x, y| {
            y.score
                .total_cmp(&x.score)
                .then(x.distance.cmp(&y.distance))
                .then(x.parent.cmp(&y.parent))
                .then(x.entry.cmp(&y.entry))
        });
        let mut used = BTreeSet::new();
        for c in cands {
            if assigned.contains_key(&c.entry) || used.contains(&c.parent) {
                continue;
            }
            used.insert(c.parent);
            assigned.insert(c.entry, Some(c.parent));
        }
        for i in idxs {
            assigned.entry(i).or_insert(None);
        }
    }
    for (i, e) in out.entries_mut().enumerate() {
        if let Some(p) = assigned.get(&i) {
            e.parent_line = *p;
        }
    }
    Ok(out)
}

/// Summarizes a mapped change set per unit.
pub fn line_mappings(changes: &ChangeSet) -> Vec<LineMapping> {
    let mut by_unit: BTreeMap<String, LineMapping> = BTreeMap::new();
    for e in changes.entries().iter().filter(|e| !e.deletion) {
        let m = by_unit
            .entry(e.merge_ref.unit.clone())
            .or_insert_with(|| LineMapping { unit: e.merge_ref.unit.clone(), ..Default::default() });
        match e.parent_line {
            Some(p) => {
                m.pairs.insert(e.merge_ref.line, p);
            }
            None => {
                m.unmatched.insert(e.merge_ref.line);
            }
        }
    }
    by_unit.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ChangeEntry, LineRef, Side};

    /// Jaro computed straight from its definition with explicit match lists.
    fn jaro_reference(a: &str, b: &str) -> f64 {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        if a.is_empty() && b.is_empty() {
            return 1.0;
        }
        let window = (a.len().max(b.len()) / 2).saturating_sub(1) as isize;
        let mut taken = vec![false; b.len()];
        let mut pairs = Vec::new();
        for (i, ca) in a.iter().enumerate() {
            if let Some(j) = (0..b.len()).find(|&j| !taken[j] && b[j] == *ca && (i as isize - j as isize).abs() <= window) {
                taken[j] = true;
                pairs.push((i, j));
            }
        }
        let m = pairs.len();
        if m == 0 {
            return 0.0;
        }
        let from_a: Vec<char> = pairs.iter().map(|&(i, _)| a[i]).collect();
        let mut js: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
        js.sort();
        let from_b: Vec<char> = js.iter().map(|&j| b[j]).collect();
        let t = from_a.iter().zip(&from_b).filter(|(x, y)| x != y).count() / 2;
        let m = m as f64;
        (m / a.len() as f64 + m / b.len() as f64 + (m - t as f64) / m) / 3.0
    }

    #[test]
    fn martha() {
        // m = 6, t = 1: (6/6 + 6/6 + 5/6) / 3
        assert!((jaro("MARTHA", "MARHTA") - 0.944_444).abs() < 1e-4);
        assert!((jaro_winkler_default("MARTHA", "MARHTA") - 0.961_111).abs() < 1e-4);
    }

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(jaro("abc", "abc"), 1.0);
        assert_eq!(jaro_winkler_default("abc", "abc"), 1.0);
        assert_eq!(jaro("abc", "xyz"), 0.0);
        assert_eq!(jaro_winkler_default("abc", "xyz"), 0.0);
    }

    #[test]
    fn empty_strings() {
        assert_eq!(jaro("", ""), 1.0);
        assert_eq!(jaro("", "a"), 0.0);
        assert_eq!(jaro("a", ""), 0.0);
    }

    #[test]
    fn other_known_values() {
        assert!((jaro("DIXON", "DICKSONX") - 0.766_667).abs() < 1e-4);
        assert!((jaro_winkler_default("DIXON", "DICKSONX") - 0.813_333).abs() < 1e-4);
    }

    fn entry(line: usize, content: &str) -> ChangeEntry {
        ChangeEntry { merge_ref: LineRef::new("u", line), parent_line: None, content: content.into(), deletion: false }
    }

    #[test]
    fn identity_mapping() {
        let text = "a = 1;\nb = 2;\n}\n}\nc = 3;\n";
        let parent = VersionSource::single("u", text);
        let set = ChangeSet::from_entries(Side::Left, text.lines().enumerate().map(|(i, l)| entry(i + 1, l)));
        let mapped = map_lines(&set, &parent, &LineMapConfig::default()).unwrap();
        for e in mapped.entries() {
            assert_eq!(e.parent_line, Some(e.merge_ref.line));
        }
    }

    #[test]
    fn shifted_by_two_lines() {
        // 8-line parent: two extra lines above the changed statement.
        let parent = VersionSource::single(
            "u",
            "global a = 0;\nglobal extra1 = 1;\nglobal extra2 = 2;\nfn main() {\n    let t = 1;\n    a = 1;\n    a = a * 40 + t;\n}\n",
        );
        let set = ChangeSet::from_entries(Side::Left, [entry(5, "    a = a * 40 + t;")]);
        let mapped = map_lines(&set, &parent, &LineMapConfig::default()).unwrap();
        assert_eq!(mapped.entries()[0].parent_line, Some(7));
    }

    #[test]
    fn new_line_stays_unmatched() {
        let parent = VersionSource::single("u", "fn main() {\n}\n");
        let set = ChangeSet::from_entries(Side::Right, [entry(2, "    total = price * 3 - bonus;")]);
        let mapped = map_lines(&set, &parent, &LineMapConfig::default()).unwrap();
        assert!(mapped.entries()[0].is_unmatched());
    }

    #[test]
    fn missing_unit_is_an_error() {
        let set = ChangeSet::from_entries(Side::Left, [entry(1, "x")]);
        assert!(matches!(map_lines(&set, &VersionSource::default(), &LineMapConfig::default()), Err(Error::MissingUnit(_))));
    }

    #[test]
    fn ties_prefer_closest_line() {
        let parent = VersionSource::single("u", "}\nx\n}\ny\n}\n");
        let set = ChangeSet::from_entries(Side::Left, [entry(4, "}")]);
        let mapped = map_lines(&set, &parent, &LineMapConfig::default()).unwrap();
        // Lines 3 and 5 are equally close; the smaller wins.
        assert_eq!(mapped.entries()[0].parent_line, Some(3));
    }

    proptest::proptest! {
        #[test]
        fn symmetric_and_bounded(a in "[a-d ]{0,8}", b in "[a-d ]{0,8}") {
            let j = jaro(&a, &b);
            let jw = jaro_winkler_default(&a, &b);
            proptest::prop_assert!((j - jaro(&b, &a)).abs() < 1e-12);
            proptest::prop_assert!((jw - jaro_winkler_default(&b, &a)).abs() < 1e-12);
            proptest::prop_assert!(0.0 <= j && j <= jw + 1e-12 && jw <= 1.0 + 1e-12);
            proptest::prop_assert!((j - jaro_reference(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn mapping_is_injective_and_above_threshold(
            parent in proptest::collection::vec("[ab]{1,3}", 1..10),
            merge in proptest::collection::vec("[ab]{1,3}", 1..10),
        ) {
            let pv = VersionSource::single("u", parent.join("\n"));
            let set = ChangeSet::from_entries(Side::Left, merge.iter().enumerate().map(|(i, l)| entry(i + 1, l)));
            let cfg = LineMapConfig::default();
            let mapped = map_lines(&set, &pv, &cfg).unwrap();
            for m in line_mappings(&mapped) {
                proptest::prop_assert!(m.is_injective());
            }
            for e in mapped.entries() {
                if let Some(p) = e.parent_line {
                    proptest::prop_assert!(jaro_winkler_default(e.content.trim(), parent[p - 1].trim()) >= cfg.threshold);
                }
            }
        }
    }
}
