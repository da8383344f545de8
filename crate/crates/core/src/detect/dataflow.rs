use std::collections::{BTreeMap, BTreeSet};

use super::{AnnotatedProgram, PiKind, PotentialInterference, Tag};
use crate::minilang::{Expr, FunctionDef, Stmt, StmtKind};
use crate::scenario::LineRef;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Var {
    Global(String),
    Local(String),
}

/// A use or definition attributed to a source line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Site {
    var: Var,
    origin: LineRef,
    tag: Tag,
}

#[derive(Debug)]
struct Def {
    var: Var,
    /// `None` for the value a variable holds on function entry.
    origin: Option<LineRef>,
    tag: Tag,
}

#[derive(Debug, Default)]
struct Node {
    uses: Vec<Site>,
    gen: Vec<usize>,
    kills: Vec<Var>,
    succs: Vec<usize>,
}

/// What a function contributes at a call site.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Summary {
    reads: BTreeSet<String>,
    writes: BTreeSet<String>,
    /// Tagged uses of globals or parameters reached by their entry value.
    exposed: BTreeSet<Site>,
    /// Tagged definitions of globals that reach the function's exit.
    exit_defs: BTreeSet<Site>,
}

const ENTRY: usize = 0;
const EXIT: usize = 1;

struct Graph<'a> {
    ap: &'a AnnotatedProgram,
    summaries: &'a BTreeMap<String, Summary>,
    unit: String,
    locals: BTreeSet<String>,
    nodes: Vec<Node>,
    defs: Vec<Def>,
    entry_defs: BTreeMap<Var, usize>,
    reads: BTreeSet<String>,
    writes: BTreeSet<String>,
}

impl<'a> Graph<'a> {
    fn new(ap: &'a AnnotatedProgram, summaries: &'a BTreeMap<String, Summary>, unit: &str, locals: BTreeSet<String>) -> Self {
        Graph {
            ap,
            summaries,
            unit: unit.to_owned(),
            locals,
            nodes: vec![Node::default(), Node::default()],
            defs: Vec::new(),
            entry_defs: BTreeMap::new(),
            reads: BTreeSet::new(),
            writes: BTreeSet::new(),
        }
    }

    fn for_function(ap: &'a AnnotatedProgram, summaries: &'a BTreeMap<String, Summary>, f: &FunctionDef) -> Self {
        let mut g = Graph::new(ap, summaries, &f.unit, f.locals());
        let entry_vars = ap
            .program
            .globals
            .iter()
            .filter(|d| !g.locals.contains(&d.name))
            .map(|d| Var::Global(d.name.clone()))
            .chain(f.params.iter().map(|p| Var::Local(p.clone())))
            .collect::<Vec<_>>();
        for var in entry_vars {
            let id = g.defs.len();
            g.defs.push(Def { var: var.clone(), origin: None, tag: Tag::None });
            g.nodes[ENTRY].gen.push(id);
            g.entry_defs.insert(var, id);
        }
        let first = g.block(&f.body, EXIT);
        g.nodes[ENTRY].succs.push(first);
        g
    }

    /// Global initializers in order, then `main`.
    fn for_program(ap: &'a AnnotatedProgram, summaries: &'a BTreeMap<String, Summary>) -> Self {
        let unit = ap.program.globals.first().map_or(String::new(), |d| d.unit.clone());
        let mut g = Graph::new(ap, summaries, &unit, BTreeSet::new());
        let mut call = Node::default();
        if let Some(main) = ap.program.function("main") {
            g.unit = main.unit.clone();
            let at = LineRef::new(main.unit.clone(), main.line);
            g.call(&mut call, "main", &[], &at, Tag::None);
        }
        call.succs.push(EXIT);
        let mut next = g.push(call);
        for decl in ap.program.globals.iter().rev() {
            g.unit = decl.unit.clone();
            let at = LineRef::new(decl.unit.clone(), decl.line);
            let tag = ap.tag(&decl.unit, decl.line);
            let mut node = Node::default();
            g.uses(&mut node, &decl.init, &at, tag);
            g.def(&mut node, Var::Global(decl.name.clone()), at, tag, true);
            node.succs.push(next);
            next = g.push(node);
        }
        g.nodes[ENTRY].succs.push(next);
        g
    }

    fn var(&self, name: &str) -> Var {
        if self.locals.contains(name) {
            Var::Local(name.to_owned())
        } else {
            Var::Global(name.to_owned())
        }
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn uses(&mut self, node: &mut Node, e: &Expr, at: &LineRef, tag: Tag) {
        for name in e.vars() {
            let var = self.var(name);
            if let Var::Global(g) = &var {
                self.reads.insert(g.clone());
            }
            node.uses.push(Site { var, origin: at.clone(), tag });
        }
    }

    fn def(&mut self, node: &mut Node, var: Var, at: LineRef, tag: Tag, kill: bool) {
        if let Var::Global(g) = &var {
            self.writes.insert(g.clone());
        }
        if kill {
            node.kills.push(var.clone());
        }
        node.gen.push(self.defs.len());
        self.defs.push(Def { var, origin: Some(at), tag });
    }

    fn call(&mut self, node: &mut Node, callee: &str, args: &[Expr], at: &LineRef, tag: Tag) {
        for a in args {
            self.uses(node, a, at, tag);
        }
        let summaries = self.summaries;
        let Some(sum) = summaries.get(callee) else { return };
        self.reads.extend(sum.reads.iter().cloned());
        self.writes.extend(sum.writes.iter().cloned());
        if tag.is_tagged() {
            for g in &sum.reads {
                node.uses.push(Site { var: Var::Global(g.clone()), origin: at.clone(), tag });
            }
            for g in &sum.writes {
                self.def(node, Var::Global(g.clone()), at.clone(), tag, false);
            }
        }
        let params = self.ap.program.function(callee).map(|f| f.params.as_slice()).unwrap_or_default();
        for e in &sum.exposed {
            match &e.var {
                Var::Global(_) => node.uses.push(e.clone()),
                Var::Local(_) if tag.covers(e.tag) => {}
                Var::Local(p) => {
                    let Some(arg) = params.iter().position(|q| q == p).and_then(|i| args.get(i)) else { continue };
                    for name in arg.vars() {
                        node.uses.push(Site { var: self.var(name), origin: e.origin.clone(), tag: e.tag });
                    }
                }
            }
        }
        for d in &sum.exit_defs {
            self.def(node, d.var.clone(), d.origin.clone(), d.tag, false);
        }
    }

    fn block(&mut self, block: &[Stmt], next: usize) -> usize {
        block.iter().rev().fold(next, |next, s| self.stmt(s, next))
    }

    fn stmt(&mut self, s: &Stmt, next: usize) -> usize {
        let at = LineRef::new(self.unit.clone(), s.line);
        let tag = self.ap.tag(&self.unit, s.line);
        let mut node = Node::default();
        match &s.kind {
            StmtKind::Assign { target, value } => {
                self.uses(&mut node, value, &at, tag);
                let var = self.var(target);
                self.def(&mut node, var, at, tag, true);
                node.succs.push(next);
            }
            StmtKind::Let { name, value } => {
                self.uses(&mut node, value, &at, tag);
                self.def(&mut node, Var::Local(name.clone()), at, tag, true);
                node.succs.push(next);
            }
            StmtKind::Return(value) => {
                self.uses(&mut node, value, &at, tag);
                node.succs.push(EXIT);
            }
            StmtKind::Call { callee, args } => {
                self.call(&mut node, callee, args, &at, tag);
                node.succs.push(next);
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.uses(&mut node, cond, &at, tag);
                let id = self.push(node);
                let t = self.block(then_block, next);
                let e = self.block(else_block, next);
                self.nodes[id].succs = vec![t, e];
                return id;
            }
            StmtKind::While { cond, body } => {
                self.uses(&mut node, cond, &at, tag);
                let id = self.push(node);
                let b = self.block(body, id);
                self.nodes[id].succs = vec![b, next];
                return id;
            }
        }
        self.push(node)
    }

    /// Reaching definitions at the entry of every node.
    fn solve(&self) -> Vec<BTreeSet<usize>> {
        let n = self.nodes.len();
        let mut preds = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for &s in &node.succs {
                preds[s].push(i);
            }
        }
        let mut reach_in: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut reach_out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..n {
                let input: BTreeSet<usize> = preds[i].iter().flat_map(|&p| reach_out[p].iter().copied()).collect();
                let node = &self.nodes[i];
                let mut output: BTreeSet<usize> =
                    input.iter().copied().filter(|&d| !node.kills.contains(&self.defs[d].var)).collect();
                output.extend(node.gen.iter().copied());
                if output != reach_out[i] {
                    reach_out[i] = output;
                    changed = true;
                }
                reach_in[i] = input;
            }
        }
        reach_in
    }

    fn site(&self, d: usize) -> Option<Site> {
        let def = &self.defs[d];
        let origin = def.origin.clone()?;
        Some(Site { var: def.var.clone(), origin, tag: def.tag })
    }

    fn summarize(&self, reach: &[BTreeSet<usize>]) -> Summary {
        let mut exposed = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            for u in node.uses.iter().filter(|u| u.tag.is_tagged()) {
                if self.entry_defs.get(&u.var).is_some_and(|d| reach[i].contains(d)) {
                    exposed.insert(u.clone());
                }
            }
        }
        let exit_defs = reach[EXIT]
            .iter()
            .filter_map(|&d| self.site(d))
            .filter(|s| s.tag.is_tagged() && matches!(s.var, Var::Global(_)))
            .collect();
        Summary { reads: self.reads.clone(), writes: self.writes.clone(), exposed, exit_defs }
    }

    fn interferences(&self, reach: &[BTreeSet<usize>], out: &mut Vec<PotentialInterference>) {
        for (i, node) in self.nodes.iter().enumerate() {
            let reaching: Vec<Site> = reach[i].iter().filter_map(|&d| self.site(d)).filter(|s| s.tag.is_tagged()).collect();
            for u in node.uses.iter().filter(|u| u.tag.is_tagged()) {
                for d in &reaching {
                    if d.var == u.var && d.origin != u.origin && d.tag.mixes(u.tag) {
                        out.push(PotentialInterference::new(PiKind::Dataflow, [d.origin.clone(), u.origin.clone()]));
                    }
                }
            }
            for g in node.gen.iter().filter_map(|&d| self.site(d)) {
                if !g.tag.is_tagged() || !matches!(g.var, Var::Global(_)) {
                    continue;
                }
                for d in &reaching {
                    if d.var == g.var && d.origin != g.origin && d.tag.mixes(g.tag) {
                        out.push(PotentialInterference::new(PiKind::Override, [d.origin.clone(), g.origin.clone()]));
                    }
                }
            }
        }
    }
}

fn survivors_at_exit(sites: &BTreeSet<Site>, out: &mut Vec<PotentialInterference>) {
    let sites: Vec<&Site> = sites.iter().collect();
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            if a.var == b.var && a.origin != b.origin && a.tag.mixes(b.tag) {
                out.push(PotentialInterference::new(PiKind::Override, [a.origin.clone(), b.origin.clone()]));
            }
        }
    }
}

fn summaries(ap: &AnnotatedProgram) -> BTreeMap<String, Summary> {
    let mut sums: BTreeMap<String, Summary> =
        ap.program.functions.iter().map(|f| (f.name.clone(), Summary::default())).collect();
    loop {
        let mut changed = false;
        for f in &ap.program.functions {
            let next = {
                let g = Graph::for_function(ap, &sums, f);
                let reach = g.solve();
                g.summarize(&reach)
            };
            if sums[&f.name] != next {
                sums.insert(f.name.clone(), next);
                changed = true;
            }
        }
        if !changed {
            return sums;
        }
    }
}

pub(super) fn analyze(ap: &AnnotatedProgram) -> Vec<PotentialInterference> {
    let sums = summaries(ap);
    let mut out = Vec::new();
    for f in &ap.program.functions {
        let g = Graph::for_function(ap, &sums, f);
        let reach = g.solve();
        g.interferences(&reach, &mut out);
    }
    let g = Graph::for_program(ap, &sums);
    let reach = g.solve();
    g.interferences(&reach, &mut out);
    survivors_at_exit(&g.summarize(&reach).exit_defs, &mut out);
    out
}
