//! Built-in detector for ExtractFunction and RenameVariable.
//!
//! Each function present in both base and the branch is compared after
//! inlining calls to functions the branch introduced. A match up to a
//! bijective renaming of locals yields records; purity is then checked by
//! running base with only that function's new version swapped in.

use std::collections::{BTreeMap, BTreeSet};

use super::{LineRange, RefactoringRecord, BUILTIN_TOOL};
use crate::diff::align;
use crate::minilang::{check, execute, walk_stmts, Expr, FunctionDef, Program, Stmt, StmtKind};
use crate::scenario::{MergeScenario, Side, VersionKind};
use crate::Result;

pub const EXTRACT_FUNCTION: &str = "ExtractFunction";
pub const RENAME_VARIABLE: &str = "RenameVariable";

/// Prefix that cannot occur in a source identifier.
fn fresh(k: usize, name: &str) -> String {
    format!("{k}%{name}")
}

fn is_fresh(name: &str) -> bool {
    name.contains('%')
}

fn has_return(body: &[Stmt]) -> bool {
    let mut found = false;
    walk_stmts(body, &mut |s| found |= matches!(s.kind, StmtKind::Return(_)));
    found
}

fn writes_param(g: &FunctionDef) -> bool {
    let mut found = false;
    walk_stmts(&g.body, &mut |s| match &s.kind {
        StmtKind::Assign { target: n, .. } | StmtKind::Let { name: n, .. } => found |= g.params.contains(n),
        _ => {}
    });
    found
}

/// Whether `call g(args)` inside `f` can be replaced by g's body.
fn inlinable(f_locals: &BTreeSet<String>, g: &FunctionDef, args: &[Expr]) -> bool {
    if has_return(&g.body) || writes_param(g) {
        return false;
    }
    let args_ok = args.iter().all(|a| match a {
        Expr::Int(_) => true,
        Expr::Var(v) => f_locals.contains(v),
        _ => false,
    });
    let g_locals = g.locals();
    let captures = g.mentioned_names().iter().any(|n| !g_locals.contains(n) && f_locals.contains(n));
    args_ok && !captures
}

struct Inliner<'a> {
    new_fns: &'a BTreeMap<&'a str, &'a FunctionDef>,
    f_locals: BTreeSet<String>,
    counter: usize,
    /// Inlined callee, with the side line of its call site.
    inlined: Vec<(&'a FunctionDef, usize)>,
    fresh_locals: BTreeSet<String>,
}

impl<'a> Inliner<'a> {
    fn block(&mut self, block: &[Stmt]) -> Vec<Stmt> {
        let mut out = Vec::with_capacity(block.len());
        let new_fns = self.new_fns;
        for s in block {
            match &s.kind {
                StmtKind::Call { callee, args } => match new_fns.get(callee.as_str()) {
                    Some(&g) if inlinable(&self.f_locals, g, args) => {
                        self.inlined.push((g, s.line));
                        out.extend(self.expand(g, args));
                    }
                    _ => out.push(s.clone()),
                },
                StmtKind::If { cond, then_block, else_block } => out.push(Stmt {
                    kind: StmtKind::If { cond: cond.clone(), then_block: self.block(then_block), else_block: self.block(else_block) },
                    line: s.line,
                }),
                StmtKind::While { cond, body } => {
                    out.push(Stmt { kind: StmtKind::While { cond: cond.clone(), body: self.block(body) }, line: s.line })
                }
                _ => out.push(s.clone()),
            }
        }
        out
    }

    fn expand(&mut self, g: &FunctionDef, args: &[Expr]) -> Vec<Stmt> {
        let k = self.counter;
        self.counter += 1;
        let params: BTreeMap<&str, &Expr> = g.params.iter().map(String::as_str).zip(args).collect();
        let lets: BTreeSet<String> = g.locals().into_iter().filter(|n| !params.contains_key(n.as_str())).collect();
        self.fresh_locals.extend(lets.iter().map(|n| fresh(k, n)));
        let rename = |n: &str| if lets.contains(n) { fresh(k, n) } else { n.to_owned() };
        let subst = |e: &Expr| substitute(e, &params, &rename);
        fn go(
            block: &[Stmt],
            rename: &dyn Fn(&str) -> String,
            subst: &dyn Fn(&Expr) -> Expr,
        ) -> Vec<Stmt> {
            block
                .iter()
                .map(|s| {
                    let kind = match &s.kind {
                        StmtKind::Assign { target, value } => StmtKind::Assign { target: rename(target), value: subst(value) },
                        StmtKind::Let { name, value } => StmtKind::Let { name: rename(name), value: subst(value) },
                        StmtKind::If { cond, then_block, else_block } => StmtKind::If {
                            cond: subst(cond),
                            then_block: go(then_block, rename, subst),
                            else_block: go(else_block, rename, subst),
                        },
                        StmtKind::While { cond, body } => StmtKind::While { cond: subst(cond), body: go(body, rename, subst) },
                        StmtKind::Call { callee, args } => {
                            StmtKind::Call { callee: callee.clone(), args: args.iter().map(subst).collect() }
                        }
                        StmtKind::Return(e) => StmtKind::Return(subst(e)),
                    };
                    Stmt { kind, line: s.line }
                })
                .collect()
        }
        go(&g.body, &rename, &subst)
    }
}

fn substitute(e: &Expr, params: &BTreeMap<&str, &Expr>, rename: &dyn Fn(&str) -> String) -> Expr {
    match e {
        Expr::Int(v) => Expr::Int(*v),
        Expr::Var(n) => match params.get(n.as_str()) {
            Some(arg) => (*arg).clone(),
            None => Expr::Var(rename(n)),
        },
        Expr::Unary(op, inner) => Expr::Unary(*op, Box::new(substitute(inner, params, rename))),
        Expr::Binary(op, l, r) => Expr::binary(*op, substitute(l, params, rename), substitute(r, params, rename)),
    }
}

/// Bijection between base locals and branch locals; globals must coincide.
struct Matcher<'a> {
    base_locals: &'a BTreeSet<String>,
    side_locals: &'a BTreeSet<String>,
    fwd: BTreeMap<String, String>,
    bwd: BTreeMap<String, String>,
}

impl Matcher<'_> {
    fn name(&mut self, b: &str, s: &str) -> bool {
        match (self.base_locals.contains(b), self.side_locals.contains(s)) {
            (false, false) => b == s,
            (true, true) => {
                let f = self.fwd.entry(b.to_owned()).or_insert_with(|| s.to_owned());
                let r = self.bwd.entry(s.to_owned()).or_insert_with(|| b.to_owned());
                f == s && r == b
            }
            _ => false,
        }
    }

    fn expr(&mut self, b: &Expr, s: &Expr) -> bool {
        match (b, s) {
            (Expr::Int(x), Expr::Int(y)) => x == y,
            (Expr::Var(x), Expr::Var(y)) => self.name(x, y),
            (Expr::Unary(o1, x), Expr::Unary(o2, y)) => o1 == o2 && self.expr(x, y),
            (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => o1 == o2 && self.expr(l1, l2) && self.expr(r1, r2),
            _ => false,
        }
    }

    fn block(&mut self, b: &[Stmt], s: &[Stmt]) -> bool {
        b.len() == s.len() && b.iter().zip(s).all(|(x, y)| self.stmt(x, y))
    }

    fn stmt(&mut self, b: &Stmt, s: &Stmt) -> bool {
        match (&b.kind, &s.kind) {
            (StmtKind::Assign { target: t1, value: v1 }, StmtKind::Assign { target: t2, value: v2 })
            | (StmtKind::Let { name: t1, value: v1 }, StmtKind::Let { name: t2, value: v2 }) => {
                self.expr(v1, v2) && self.name(t1, t2)
            }
            (
                StmtKind::If { cond: c1, then_block: t1, else_block: e1 },
                StmtKind::If { cond: c2, then_block: t2, else_block: e2 },
            ) => self.expr(c1, c2) && self.block(t1, t2) && self.block(e1, e2),
            (StmtKind::While { cond: c1, body: b1 }, StmtKind::While { cond: c2, body: b2 }) => {
                self.expr(c1, c2) && self.block(b1, b2)
            }
            (StmtKind::Call { callee: f1, args: a1 }, StmtKind::Call { callee: f2, args: a2 }) => {
                f1 == f2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| self.expr(x, y))
            }
            (StmtKind::Return(x), StmtKind::Return(y)) => self.expr(x, y),
            _ => false,
        }
    }
}

/// Base with `side_fn` swapped in and the branch's new functions added.
fn transplant(base: &Program, side: &Program, side_fn: &FunctionDef) -> Program {
    let mut p = base.clone();
    if let Some(f) = p.function_mut(&side_fn.name) {
        *f = side_fn.clone();
    }
    for g in side.functions.iter().filter(|g| base.function(&g.name).is_none()) {
        p.functions.push(g.clone());
    }
    p
}

fn is_pure(base: &Program, side: &Program, side_fn: &FunctionDef, step_limit: u64) -> bool {
    let candidate = transplant(base, side, side_fn);
    if check(&candidate).is_err() {
        return false;
    }
    execute(base, step_limit).same_observation(&execute(&candidate, step_limit))
}

fn contains_word(line: &str, word: &str) -> bool {
    let ident = |c: char| c.is_ascii_alphanumeric() || c == '_';
    line.match_indices(word).any(|(i, _)| {
        let before = line[..i].chars().next_back();
        let after = line[i + word.len()..].chars().next();
        !before.is_some_and(ident) && !after.is_some_and(ident)
    })
}

/// Collapses sorted line numbers into inclusive ranges.
fn ranges(unit: &str, lines: impl IntoIterator<Item = usize>) -> Vec<LineRange> {
    let lines: BTreeSet<usize> = lines.into_iter().collect();
    let mut out: Vec<LineRange> = Vec::new();
    for l in lines {
        match out.last_mut() {
            Some(r) if r.end_line + 1 == l => r.end_line = l,
            _ => out.push(LineRange::new(unit, l, l)),
        }
    }
    out
}

struct Coords<'a> {
    s: &'a MergeScenario,
    side: Side,
}

impl Coords<'_> {
    /// Projects each parent range through the side/merge alignment. Merge
    /// lines with no counterpart that sit inside the projected span count.
    fn merge_ranges(&self, parent: &[LineRange]) -> Vec<LineRange> {
        let mut out = Vec::new();
        for r in parent {
            let own = self.s.side_version(self.side).lines(&r.unit);
            let merge = self.s.merge.lines(&r.unit);
            let al = align(&own, &merge);
            let at = |l: usize| al.old_to_new.get(l - 1).copied().flatten().map(|m| m + 1);
            let start = at(r.start_line)
                .unwrap_or_else(|| (1..r.start_line).rev().find_map(at).unwrap_or(0) + 1);
            let end = at(r.end_line)
                .unwrap_or_else(|| (r.end_line + 1..=own.len()).find_map(at).unwrap_or(merge.len() + 1) - 1);
            if start <= end {
                out.push(LineRange::new(r.unit.clone(), start, end));
            }
        }
        out
    }

    fn record(&self, rtype: &str, pure: bool, parent_ranges: Vec<LineRange>, description: String) -> RefactoringRecord {
        RefactoringRecord {
            tool: BUILTIN_TOOL.to_owned(),
            rtype: rtype.to_owned(),
            side: self.side,
            pure,
            added_merge_ranges: self.merge_ranges(&parent_ranges),
            parent_ranges,
            description,
        }
    }
}

/// Compares base with one branch.
pub fn detect_builtin(s: &MergeScenario, side: Side, step_limit: u64) -> Result<Vec<RefactoringRecord>> {
    let base = s.parse_version(VersionKind::Base)?;
    let branch = s.parse_version(match side {
        Side::Left => VersionKind::Left,
        Side::Right => VersionKind::Right,
    })?;
    let coords = Coords { s, side };
    let new_fns: BTreeMap<&str, &FunctionDef> =
        branch.functions.iter().filter(|g| base.function(&g.name).is_none()).map(|g| (g.name.as_str(), g)).collect();

    let mut out = Vec::new();
    for f in &branch.functions {
        let Some(bf) = base.function(&f.name) else { continue };
        if bf.params.len() != f.params.len() {
            continue;
        }
        let mut inl = Inliner { new_fns: &new_fns, f_locals: f.locals(), counter: 0, inlined: Vec::new(), fresh_locals: BTreeSet::new() };
        let body = inl.block(&f.body);
        let base_locals = bf.locals();
        let mut side_locals = inl.f_locals.clone();
        side_locals.extend(inl.fresh_locals.iter().cloned());
        let mut m = Matcher { base_locals: &base_locals, side_locals: &side_locals, fwd: BTreeMap::new(), bwd: BTreeMap::new() };
        let params_match = bf.params.iter().zip(&f.params).all(|(a, b)| m.name(a, b));
        if !params_match || !m.block(&bf.body, &body) {
            continue;
        }
        let renames: Vec<(String, String)> =
            m.fwd.iter().filter(|(b, s)| b != s && !is_fresh(s)).map(|(b, s)| (b.clone(), s.clone())).collect();
        if inl.inlined.is_empty() && renames.is_empty() {
            continue;
        }
        let pure = is_pure(&base, &branch, f, step_limit);

        let mut by_callee: BTreeMap<&str, (&FunctionDef, Vec<usize>)> = BTreeMap::new();
        for (g, call_line) in &inl.inlined {
            by_callee.entry(g.name.as_str()).or_insert((g, Vec::new())).1.push(*call_line);
        }
        for (name, (g, calls)) in by_callee {
            let mut parent = ranges(&f.unit, calls);
            parent.push(LineRange::new(g.unit.clone(), g.line, g.end_line));
            parent.sort();
            out.push(coords.record(EXTRACT_FUNCTION, pure, parent, format!("extract `{name}` from `{}`", f.name)));
        }
        for (old, new) in renames {
            let lines = (f.line..=f.end_line).filter(|&l| branch.source_line(&f.unit, l).is_some_and(|t| contains_word(t, &new)));
            let parent = ranges(&f.unit, lines);
            out.push(coords.record(RENAME_VARIABLE, pure, parent, format!("rename `{old}` to `{new}` in `{}`", f.name)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::DEFAULT_STEP_LIMIT;
    use crate::scenario::VersionSource;

    const UNIT: &str = "p.mini";

    fn scenario(base: &str, left: &str) -> MergeScenario {
        let v = |t: &str| VersionSource::single(UNIT, t);
        MergeScenario::new("t", v(base), v(left), v(base), v(left))
    }

    const BASE: &str = "\
global total = 0;
fn main() {
    let a = 2;
    let b = a * 3;
    total = total + b;
}
";

    #[test]
    fn identical_side_yields_nothing() {
        assert!(detect_builtin(&scenario(BASE, BASE), Side::Left, DEFAULT_STEP_LIMIT).unwrap().is_empty());
    }

    #[test]
    fn rename() {
        let left = BASE.replace("let a", "let alpha").replace("a * 3", "alpha * 3");
        let recs = detect_builtin(&scenario(BASE, &left), Side::Left, DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(recs.len(), 1, "{recs:?}");
        assert_eq!(recs[0].rtype, RENAME_VARIABLE);
        assert!(recs[0].pure);
        assert_eq!(recs[0].parent_ranges, vec![LineRange::new(UNIT, 3, 4)]);
    }

    #[test]
    fn capturing_rename_is_rejected() {
        // `b` becomes `total`, which then shadows the global.
        let left = BASE.replace("let b", "let total").replace("total + b", "total + total");
        assert!(detect_builtin(&scenario(BASE, &left), Side::Left, DEFAULT_STEP_LIMIT).unwrap().is_empty());
    }

    #[test]
    fn extract() {
        let left = "\
global total = 0;
fn main() {
    let a = 2;
    call add(a);
}
fn add(x) {
    let b = x * 3;
    total = total + b;
}
";
        let recs = detect_builtin(&scenario(BASE, left), Side::Left, DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(recs.len(), 1, "{recs:?}");
        assert_eq!(recs[0].rtype, EXTRACT_FUNCTION);
        assert!(recs[0].pure);
        assert_eq!(recs[0].parent_ranges, vec![LineRange::new(UNIT, 4, 4), LineRange::new(UNIT, 6, 9)]);
        assert_eq!(recs[0].added_merge_ranges, recs[0].parent_ranges);
    }

    #[test]
    fn behavior_change_is_not_a_refactoring() {
        let left = BASE.replace("a * 3", "a * 4");
        assert!(detect_builtin(&scenario(BASE, &left), Side::Left, DEFAULT_STEP_LIMIT).unwrap().is_empty());
    }

    #[test]
    fn extract_capturing_global_is_rejected() {
        // The callee's `a` is a global; inlining would bind it to the caller's local.
        let base = "global a = 5;\nglobal t = 0;\nfn main() {\n    let a = 1;\n    t = a;\n}\n";
        let left = "global a = 5;\nglobal t = 0;\nfn main() {\n    let a = 1;\n    call g();\n}\nfn g() {\n    t = a;\n}\n";
        assert!(detect_builtin(&scenario(base, left), Side::Left, DEFAULT_STEP_LIMIT).unwrap().is_empty());
    }

    #[test]
    fn whole_word_matching() {
        assert!(contains_word("    x = ab + 1;", "ab"));
        assert!(!contains_word("    x = abc + 1;", "ab"));
        assert!(!contains_word("    x = cab;", "ab"));
    }
}
