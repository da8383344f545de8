//! Seeded generators of small MiniLang programs and merge scenarios.
//!
//! Programs use globals `g0..`, locals `l0..`, loop counters `c0..` and
//! helpers `f1`, `f2` that only call later helpers, so recursion never
//! occurs. Loops are bounded by a dedicated counter. Every generated
//! version runs to completion within the default step limit.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::minilang::{
    execute, parse, render_unit, walk_stmts, walk_stmts_mut, BinaryOp, ExecStatus, Expr, FunctionDef, GlobalDecl,
    Program, Stmt, StmtKind, DEFAULT_STEP_LIMIT, DEFAULT_UNIT,
};
use crate::scenario::{MergeScenario, VersionSource};

const MAX_ATTEMPTS: usize = 10_000;

/// An edit that changes behavior.
#[derive(Debug, Clone)]
enum Edit {
    /// Replace the right-hand side of the `index`-th assignment or `let`
    /// (in walk order) of a function.
    Rhs { function: String, index: usize, value: Expr },
    /// Append a global assignment to a function's body.
    Append { function: String, stmt: Stmt },
    AddGlobal { name: String, init: Expr },
}

/// A behavior-preserving transformation, re-applicable to any version that
/// satisfies its preconditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MachineRefactoring {
    Rename { function: String, from: String, to: String },
    Extract { function: String, start: usize, len: usize, name: String },
}

#[derive(Debug, Clone)]
pub struct RefactoringCase {
    pub scenario: MergeScenario,
    pub refactoring: MachineRefactoring,
}

fn stmt(kind: StmtKind) -> Stmt {
    Stmt::new(kind)
}

fn source(p: &Program) -> VersionSource {
    VersionSource::single(DEFAULT_UNIT, render_unit(&p.globals, &p.functions))
}

/// Re-parses a rendered program so statement lines are populated.
fn reparse(p: &Program) -> Program {
    parse(&render_unit(&p.globals, &p.functions)).expect("generated programs parse")
}

fn runs(p: &Program) -> bool {
    execute(p, DEFAULT_STEP_LIMIT).status == ExecStatus::Ok
}

/// No two statements render to the same text.
fn lines_unique(p: &Program) -> bool {
    let text = render_unit(&p.globals, &p.functions);
    let mut seen = BTreeSet::new();
    text.lines().map(str::trim).filter(|l| !l.starts_with('}')).all(|l| seen.insert(l))
}

pub struct Generator {
    rng: ChaCha8Rng,
    /// Next local and counter suffixes, unique across a program.
    names: (usize, usize),
}

struct Frame {
    readable: Vec<String>,
    assignable: Vec<String>,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator { rng: ChaCha8Rng::seed_from_u64(seed), names: (0, 0) }
    }

    fn leaf(&mut self, vars: &[String]) -> Expr {
        if !vars.is_empty() && self.rng.random_bool(0.6) {
            Expr::var(vars.choose(&mut self.rng).unwrap().clone())
        } else {
            Expr::Int(self.rng.random_range(0..10))
        }
    }

    fn expr(&mut self, vars: &[String], depth: u32) -> Expr {
        if depth == 0 || self.rng.random_bool(0.35) {
            return self.leaf(vars);
        }
        let op = *[BinaryOp::Add, BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Rem]
            .choose(&mut self.rng)
            .unwrap();
        Expr::binary(op, self.expr(vars, depth - 1), self.expr(vars, depth - 1))
    }

    fn cond(&mut self, vars: &[String]) -> Expr {
        let op = *[BinaryOp::Lt, BinaryOp::Gt, BinaryOp::Eq, BinaryOp::Ne, BinaryOp::Le].choose(&mut self.rng).unwrap();
        Expr::binary(op, self.expr(vars, 1), self.expr(vars, 1))
    }

    fn block(
        &mut self,
        f: &mut (usize, usize),
        globals: &[String],
        callees: &[(String, usize)],
        mut frame: Frame,
        depth: usize,
        len: usize,
    ) -> Vec<Stmt> {
        let mut out = Vec::new();
        while out.len() < len {
            let vars: Vec<String> = globals.iter().chain(&frame.readable).cloned().collect();
            match self.rng.random_range(0..10) {
                0..=2 => {
                    let name = format!("l{}", f.0);
                    f.0 += 1;
                    out.push(stmt(StmtKind::Let { name: name.clone(), value: self.expr(&vars, 2) }));
                    frame.readable.push(name.clone());
                    frame.assignable.push(name);
                }
                3 | 4 => {
                    let target = globals.choose(&mut self.rng).unwrap().clone();
                    out.push(stmt(StmtKind::Assign { target, value: self.expr(&vars, 2) }));
                }
                5 if !frame.assignable.is_empty() => {
                    let target = frame.assignable.choose(&mut self.rng).unwrap().clone();
                    out.push(stmt(StmtKind::Assign { target, value: self.expr(&vars, 2) }));
                }
                6 if depth < 2 => {
                    let cond = self.cond(&vars);
                    let sub = Frame { readable: frame.readable.clone(), assignable: frame.assignable.clone() };
                    let n = self.rng.random_range(1..=2);
                    let then_block = self.block(f, globals, callees, sub, depth + 1, n);
                    let else_block = if self.rng.random_bool(0.5) {
                        let sub = Frame { readable: frame.readable.clone(), assignable: frame.assignable.clone() };
                        let n = self.rng.random_range(1..=2);
                        self.block(f, globals, callees, sub, depth + 1, n)
                    } else {
                        Vec::new()
                    };
                    out.push(stmt(StmtKind::If { cond, then_block, else_block }));
                }
                7 if depth < 2 => {
                    let counter = format!("c{}", f.1);
                    f.1 += 1;
                    out.push(stmt(StmtKind::Let { name: counter.clone(), value: Expr::Int(0) }));
                    let mut readable = frame.readable.clone();
                    readable.push(counter.clone());
                    let sub = Frame { readable, assignable: frame.assignable.clone() };
                    let n = self.rng.random_range(1..=2);
                    let mut body = self.block(f, globals, callees, sub, depth + 1, n);
                    body.push(stmt(StmtKind::Assign {
                        target: counter.clone(),
                        value: Expr::binary(BinaryOp::Add, Expr::var(counter.clone()), Expr::Int(1)),
                    }));
                    let bound = Expr::Int(self.rng.random_range(1..=3));
                    out.push(stmt(StmtKind::While { cond: Expr::binary(BinaryOp::Lt, Expr::var(counter), bound), body }));
                }
                8 | 9 if !callees.is_empty() => {
                    let (callee, arity) = callees.choose(&mut self.rng).unwrap().clone();
                    let args = (0..arity).map(|_| self.expr(&vars, 1)).collect();
                    out.push(stmt(StmtKind::Call { callee, args }));
                }
                _ => {}
            }
        }
        out
    }

    fn function(&mut self, name: &str, params: Vec<String>, globals: &[String], callees: &[(String, usize)]) -> FunctionDef {
        let mut counters = std::mem::take(&mut self.names);
        let frame = Frame { readable: params.clone(), assignable: Vec::new() };
        let len = self.rng.random_range(2..=6);
        let body = self.block(&mut counters, globals, callees, frame, 0, len);
        self.names = counters;
        FunctionDef { name: name.to_owned(), params, body, line: 0, end_line: 0, unit: DEFAULT_UNIT.to_owned() }
    }

    fn candidate(&mut self) -> Program {
        self.names = (0, 0);
        let n_globals = self.rng.random_range(1..=3);
        let globals: Vec<String> = (0..n_globals).map(|i| format!("g{i}")).collect();
        let decls = globals
            .iter()
            .map(|g| GlobalDecl { name: g.clone(), init: Expr::Int(self.rng.random_range(0..10)), line: 0, unit: DEFAULT_UNIT.into() })
            .collect();
        let n_helpers = self.rng.random_range(0..=2);
        let mut functions = Vec::new();
        let mut callees: Vec<(String, usize)> = Vec::new();
        for i in (1..=n_helpers).rev() {
            let arity = self.rng.random_range(0..=2);
            let params = (0..arity).map(|j| format!("p{j}")).collect();
            let f = self.function(&format!("f{i}"), params, &globals, &callees);
            callees.push((f.name.clone(), arity));
            functions.push(f);
        }
        let main = self.function("main", Vec::new(), &globals, &callees);
        functions.push(main);
        functions.reverse();
        Program { globals: decls, functions, sources: Default::default() }
    }

    /// A random program that runs to completion.
    pub fn program(&mut self) -> Program {
        for _ in 0..MAX_ATTEMPTS {
            let p = reparse(&self.candidate());
            if runs(&p) && lines_unique(&p) {
                return p;
            }
        }
        panic!("generator failed to produce a terminating program");
    }

    /// Targets of assignments and lets that are not loop counters.
    fn rhs_sites(p: &Program) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for f in &p.functions {
            let mut index = 0;
            walk_stmts(&f.body, &mut |s| {
                if let StmtKind::Assign { target: n, .. } | StmtKind::Let { name: n, .. } = &s.kind {
                    if !n.starts_with('c') {
                        out.push((f.name.clone(), index));
                    }
                    index += 1;
                }
            });
        }
        out
    }

    fn edit(&mut self, p: &Program, allow_globals_change: bool) -> Edit {
        let globals: Vec<String> = p.globals.iter().map(|g| g.name.clone()).collect();
        let sites = Self::rhs_sites(p);
        let roll = self.rng.random_range(0..10);
        if allow_globals_change && roll == 0 && p.globals.len() < 3 {
            return Edit::AddGlobal { name: "g9".into(), init: Expr::Int(self.rng.random_range(0..10)) };
        }
        if roll < 6 && !sites.is_empty() {
            let (function, index) = sites.choose(&mut self.rng).unwrap().clone();
            return Edit::Rhs { function, index, value: self.expr(&globals, 2) };
        }
        let function = p.functions.choose(&mut self.rng).unwrap().name.clone();
        let target = globals.choose(&mut self.rng).unwrap().clone();
        Edit::Append { function, stmt: stmt(StmtKind::Assign { target, value: self.expr(&globals, 2) }) }
    }

    fn edits(&mut self, p: &Program, allow_globals_change: bool) -> Vec<Edit> {
        let n = self.rng.random_range(1..=2);
        (0..n).map(|_| self.edit(p, allow_globals_change)).collect()
    }

    /// Four random versions sharing an ancestor, with interference of any
    /// kind (or none).
    pub fn random_scenario(&mut self, id: &str) -> MergeScenario {
        for _ in 0..MAX_ATTEMPTS {
            let base = self.program();
            let left_edits = self.edits(&base, true);
            let right_edits = self.edits(&base, true);
            let left = apply(&base, &left_edits);
            let right = apply(&base, &right_edits);
            let both: Vec<Edit> = left_edits.iter().chain(&right_edits).cloned().collect();
            let merge = match self.rng.random_range(0..6) {
                0 => base.clone(),
                1 => left.clone(),
                2 => right.clone(),
                3 => {
                    let extra = self.edits(&base, false);
                    apply(&base, &both.iter().chain(&extra).cloned().collect::<Vec<_>>())
                }
                _ => apply(&base, &both),
            };
            let versions = [&base, &left, &right, &merge];
            if versions.iter().all(|p| runs(p)) {
                return MergeScenario::new(id, source(&base), source(&left), source(&right), source(&merge));
            }
        }
        panic!("generator failed to produce an executable scenario");
    }

    /// Left is a pure machine refactoring of base; right carries behavior
    /// edits over globals and constants; merge is the refactoring applied to
    /// right.
    pub fn refactoring_scenario(&mut self, id: &str) -> RefactoringCase {
        for _ in 0..MAX_ATTEMPTS {
            let base = self.program();
            let edits = self.edits(&base, false);
            let right = apply(&base, &edits);
            if !runs(&right) || source(&right) == source(&base) || !lines_unique(&right) {
                continue;
            }
            let Some(r) = self.pick_refactoring(&base) else { continue };
            let (Some(left), Some(merge)) = (refactor(&base, &r), refactor(&right, &r)) else { continue };
            if !runs(&left) || !runs(&merge) || !lines_unique(&left) || !lines_unique(&merge) {
                continue;
            }
            let scenario = MergeScenario::new(id, source(&base), source(&left), source(&right), source(&merge));
            return RefactoringCase { scenario, refactoring: r };
        }
        panic!("generator failed to produce a refactoring scenario");
    }

    fn pick_refactoring(&mut self, p: &Program) -> Option<MachineRefactoring> {
        let f = p.functions.choose(&mut self.rng)?;
        if self.rng.random_bool(0.5) {
            let lets: Vec<String> = f.locals().into_iter().filter(|n| n.starts_with('l')).collect();
            let from = lets.choose(&mut self.rng)?.clone();
            let to = format!("{from}_renamed");
            return Some(MachineRefactoring::Rename { function: f.name.clone(), from, to });
        }
        if f.body.is_empty() {
            return None;
        }
        let start = self.rng.random_range(0..f.body.len());
        let len = self.rng.random_range(1..=2).min(f.body.len() - start);
        let r = MachineRefactoring::Extract { function: f.name.clone(), start, len, name: "ex_0".into() };
        extract_site_ok(p, &f.name, start, len).then_some(r)
    }
}

fn rhs_at(f: &mut FunctionDef, index: usize, value: &Expr) {
    let mut i = 0;
    walk_stmts_mut(&mut f.body, &mut |s| {
        if let StmtKind::Assign { value: v, .. } | StmtKind::Let { value: v, .. } = &mut s.kind {
            if i == index {
                *v = value.clone();
            }
            i += 1;
        }
    });
}

fn apply(base: &Program, edits: &[Edit]) -> Program {
    let mut p = base.clone();
    for e in edits {
        if let Edit::Rhs { function, index, value } = e {
            if let Some(f) = p.function_mut(function) {
                rhs_at(f, *index, value);
            }
        }
    }
    for e in edits {
        match e {
            Edit::Append { function, stmt } => {
                if let Some(f) = p.function_mut(function) {
                    f.body.push(stmt.clone());
                }
            }
            Edit::AddGlobal { name, init } => {
                if !p.globals.iter().any(|g| &g.name == name) {
                    p.globals.push(GlobalDecl { name: name.clone(), init: init.clone(), line: 0, unit: DEFAULT_UNIT.into() });
                }
            }
            Edit::Rhs { .. } => {}
        }
    }
    reparse(&p)
}

fn rename_in_block(block: &mut [Stmt], from: &str, to: &str) {
    let mut f = |n: &str| (n == from).then(|| to.to_owned());
    walk_stmts_mut(block, &mut |s| match &mut s.kind {
        StmtKind::Assign { target: n, value } | StmtKind::Let { name: n, value } => {
            if n == from {
                *n = to.to_owned();
            }
            value.rename_vars(&mut f);
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => cond.rename_vars(&mut f),
        StmtKind::Call { args, .. } => args.iter_mut().for_each(|a| a.rename_vars(&mut f)),
        StmtKind::Return(e) => e.rename_vars(&mut f),
    });
}

fn block_lets(block: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_stmts(block, &mut |s| {
        if let StmtKind::Let { name, .. } = &s.kind {
            out.insert(name.clone());
        }
    });
    out
}

fn block_targets(block: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_stmts(block, &mut |s| {
        if let StmtKind::Assign { target, .. } = &s.kind {
            out.insert(target.clone());
        }
    });
    out
}

fn block_reads(block: &[Stmt]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    walk_stmts(block, &mut |s| {
        let mut vars = Vec::new();
        match &s.kind {
            StmtKind::Assign { value, .. } | StmtKind::Let { value, .. } | StmtKind::Return(value) => value.collect_vars(&mut vars),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => cond.collect_vars(&mut vars),
            StmtKind::Call { args, .. } => args.iter().for_each(|a| a.collect_vars(&mut vars)),
        }
        for v in vars {
            if !out.iter().any(|o| o == v) {
                out.push(v.to_owned());
            }
        }
    });
    out
}

/// Preconditions for extracting `len` top-level statements of `function`
/// starting at `start`.
///
/// Besides the semantic conditions, enough lines must follow the block that
/// a line diff keeps them aligned instead of reading the extraction as a move
/// of the block to the end of the unit.
pub fn extract_site_ok(p: &Program, function: &str, start: usize, len: usize) -> bool {
    let Some(f) = p.function(function) else { return false };
    if len == 0 || start + len > f.body.len() {
        return false;
    }
    let block = &f.body[start..start + len];
    let lets = block_lets(block);
    let f_locals = f.locals();
    let mut returns = false;
    walk_stmts(block, &mut |s| returns |= matches!(s.kind, StmtKind::Return(_)));
    if returns {
        return false;
    }
    if block_targets(block).iter().any(|t| f_locals.contains(t) && !lets.contains(t)) {
        return false;
    }
    let after = &f.body[start + len..];
    if after.iter().any(|s| {
        let mut inner = Vec::new();
        walk_stmts(std::slice::from_ref(s), &mut |x| inner.push(x.clone()));
        let mentioned: BTreeSet<String> = block_reads(&inner).into_iter().chain(block_targets(&inner)).chain(block_lets(&inner)).collect();
        !mentioned.is_disjoint(&lets)
    }) {
        return false;
    }
    let total = p.sources.values().next().map_or(0, Vec::len);
    let first = block[0].line;
    let last = f.body.get(start + len).map_or(f.end_line, |s| s.line) - 1;
    let block_lines = last + 1 - first;
    total - last >= block_lines + 2
}

/// Applies a machine refactoring, or `None` when its preconditions fail.
pub fn refactor(p: &Program, r: &MachineRefactoring) -> Option<Program> {
    let mut out = p.clone();
    match r {
        MachineRefactoring::Rename { function, from, to } => {
            let f = out.function_mut(function)?;
            if !f.locals().contains(from) || f.mentioned_names().contains(to) || p.function(to).is_some() {
                return None;
            }
            for param in &mut f.params {
                if param == from {
                    *param = to.clone();
                }
            }
            rename_in_block(&mut f.body, from, to);
        }
        MachineRefactoring::Extract { function, start, len, name } => {
            if !extract_site_ok(p, function, *start, *len) || p.function(name).is_some() {
                return None;
            }
            let f = out.function_mut(function)?;
            let f_locals = f.locals();
            let block: Vec<Stmt> = f.body.drain(*start..*start + *len).collect();
            let lets = block_lets(&block);
            let free: Vec<String> = block_reads(&block).into_iter().filter(|v| f_locals.contains(v) && !lets.contains(v)).collect();
            let args = free.iter().map(|v| Expr::var(v.clone())).collect();
            f.body.insert(*start, stmt(StmtKind::Call { callee: name.clone(), args }));
            let mut body = block;
            for v in &free {
                rename_in_block(&mut body, v, &format!("{v}_in"));
            }
            for v in &lets {
                rename_in_block(&mut body, v, &format!("{v}_x"));
            }
            let params = free.iter().map(|v| format!("{v}_in")).collect();
            out.functions.push(FunctionDef { name: name.clone(), params, body, line: 0, end_line: 0, unit: DEFAULT_UNIT.into() });
        }
    }
    Some(reparse(&out))
}
