//! Execution-based interference oracle.
//!
//! Runs base, left, right and merge to completion and compares the final
//! value of every global. A global missing from a version reads as `None`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::minilang::{execute, ExecStatus, ExecutionOutcome};
use crate::scenario::{GroundTruth, MergeScenario, VersionKind};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InterferenceType {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VarClass {
    None,
    TypeI,
    TypeII,
    TypeIII,
}

impl VarClass {
    pub fn interference_type(self) -> Option<InterferenceType> {
        match self {
            VarClass::None => None,
            VarClass::TypeI => Some(InterferenceType::I),
            VarClass::TypeII => Some(InterferenceType::II),
            VarClass::TypeIII => Some(InterferenceType::III),
        }
    }
}

/// Final values of one global across the four versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observed {
    pub base: Option<i64>,
    pub left: Option<i64>,
    pub right: Option<i64>,
    pub merge: Option<i64>,
}

/// Applies the three type predicates, lowest-numbered type first.
pub fn classify_values(v: Observed) -> VarClass {
    let Observed { base: b, left: l, right: r, merge: m } = v;
    if b != l && b != r && l != r {
        VarClass::TypeI
    } else if (l != b && l != m) || (r != b && r != m) {
        VarClass::TypeII
    } else if b == l && l == r && m != b {
        VarClass::TypeIII
    } else {
        VarClass::None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statuses {
    pub base: ExecStatus,
    pub left: ExecStatus,
    pub right: ExecStatus,
    pub merge: ExecStatus,
}

impl Statuses {
    pub fn all_ok(&self) -> bool {
        [self.base, self.left, self.right, self.merge].iter().all(|s| *s == ExecStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Empty unless every version ran to completion.
    pub classes: BTreeMap<String, VarClass>,
    pub overall: bool,
    pub statuses: Statuses,
}

impl OracleResult {
    pub fn is_classified(&self) -> bool {
        self.statuses.all_ok()
    }

    /// Lowest type present, with the variables that exhibit it.
    pub fn ground_truth(&self) -> GroundTruth {
        let kind = self.classes.values().filter_map(|c| c.interference_type()).min();
        let variables = self
            .classes
            .iter()
            .filter(|(_, c)| c.interference_type().is_some() && c.interference_type() == kind)
            .map(|(v, _)| v.clone())
            .collect();
        GroundTruth { interference: self.overall, kind, variables }
    }
}

/// Classifies every global from four execution outcomes.
pub fn judge(outcomes: [&ExecutionOutcome; 4], universe: &BTreeSet<String>) -> OracleResult {
    let [b, l, r, m] = outcomes;
    let statuses = Statuses { base: b.status, left: l.status, right: r.status, merge: m.status };
    if !statuses.all_ok() {
        return OracleResult { classes: BTreeMap::new(), overall: false, statuses };
    }
    let value = |o: &ExecutionOutcome, x: &str| o.final_state.as_ref().and_then(|s| s.get(x).copied());
    let classes: BTreeMap<String, VarClass> = universe
        .iter()
        .map(|x| {
            let obs = Observed { base: value(b, x), left: value(l, x), right: value(r, x), merge: value(m, x) };
            (x.clone(), classify_values(obs))
        })
        .collect();
    let overall = classes.values().any(|c| *c != VarClass::None);
    OracleResult { classes, overall, statuses }
}

/// Executes all four versions and classifies each global.
pub fn interferes(s: &MergeScenario, step_limit: u64) -> Result<OracleResult> {
    let mut outcomes = Vec::with_capacity(4);
    let mut universe = BTreeSet::new();
    for kind in VersionKind::ALL {
        let program = s.parse_version(kind)?;
        universe.extend(program.global_names());
        outcomes.push(execute(&program, step_limit));
    }
    Ok(judge([&outcomes[0], &outcomes[1], &outcomes[2], &outcomes[3]], &universe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::DEFAULT_STEP_LIMIT;
    use crate::scenario::VersionSource;

    fn scenario(b: &str, l: &str, r: &str, m: &str) -> MergeScenario {
        let v = |t: &str| VersionSource::single("p.mini", t);
        MergeScenario::new("t", v(b), v(l), v(r), v(m))
    }

    fn prog(body: &str) -> String {
        format!("global x = 0;\nglobal y = 0;\nfn main() {{\n{body}\n}}\n")
    }

    #[test]
    fn identical_versions() {
        let p = prog("x = 4;");
        let res = interferes(&scenario(&p, &p, &p, &p), DEFAULT_STEP_LIMIT).unwrap();
        assert!(!res.overall);
        assert!(res.classes.values().all(|c| *c == VarClass::None));
        assert_eq!(res.ground_truth(), GroundTruth { interference: false, kind: None, variables: vec![] });
    }

    #[test]
    fn type_one() {
        let res = interferes(&scenario(&prog(""), &prog("x = 1;"), &prog("x = 2;"), &prog("x = 3;")), DEFAULT_STEP_LIMIT)
            .unwrap();
        assert_eq!(res.classes["x"], VarClass::TypeI);
        assert_eq!(res.classes["y"], VarClass::None);
        assert_eq!(res.ground_truth().kind, Some(InterferenceType::I));
    }

    #[test]
    fn type_two_left_disjunct() {
        let res = interferes(&scenario(&prog(""), &prog("x = 1;"), &prog(""), &prog("")), DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(res.classes["x"], VarClass::TypeII);
    }

    #[test]
    fn type_three() {
        let res = interferes(&scenario(&prog(""), &prog(""), &prog(""), &prog("y = 9;")), DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(res.classes["y"], VarClass::TypeIII);
        assert_eq!(res.ground_truth().variables, vec!["y".to_owned()]);
    }

    #[test]
    fn missing_global_is_bottom() {
        let b = "global x = 0;\nfn main() {\n}\n";
        let l = "fn main() {\n}\n";
        let res = interferes(&scenario(b, l, b, l), DEFAULT_STEP_LIMIT).unwrap();
        // base 0, left ⊥, right 0, merge ⊥: merge preserved the left change.
        assert_eq!(res.classes["x"], VarClass::None);
        let res = interferes(&scenario(b, l, b, b), DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(res.classes["x"], VarClass::TypeII);
    }

    #[test]
    fn failed_execution_has_no_classes() {
        let res = interferes(&scenario(&prog(""), &prog("x = 1 / 0;"), &prog(""), &prog("")), DEFAULT_STEP_LIMIT).unwrap();
        assert!(!res.is_classified());
        assert!(res.classes.is_empty());
        assert_eq!(res.statuses.left, ExecStatus::DivByZero);
    }

    #[test]
    fn class_serialization() {
        assert_eq!(serde_json::to_string(&VarClass::TypeII).unwrap(), "\"typeII\"");
        assert_eq!(serde_json::to_string(&InterferenceType::III).unwrap(), "\"III\"");
    }

    proptest::proptest! {
        #[test]
        fn swap_keeps_types_one_and_three(vals in proptest::array::uniform4(proptest::option::of(0i64..3))) {
            let [b, l, r, m] = vals;
            let c = classify_values(Observed { base: b, left: l, right: r, merge: m });
            let swapped = classify_values(Observed { base: b, left: r, right: l, merge: m });
            if matches!(c, VarClass::TypeI | VarClass::TypeIII) {
                proptest::prop_assert_eq!(c, swapped);
            }
        }
    }
}
