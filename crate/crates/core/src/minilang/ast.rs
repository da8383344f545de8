use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Appends every variable read by the expression, in evaluation order.
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(name) => out.push(name),
            Expr::Unary(_, inner) => inner.collect_vars(out),
            Expr::Binary(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    /// Renames variables in place according to `f`.
    pub fn rename_vars(&mut self, f: &mut dyn FnMut(&str) -> Option<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(name) => {
                if let Some(new) = f(name) {
                    *name = new;
                }
            }
            Expr::Unary(_, inner) => inner.rename_vars(f),
            Expr::Binary(_, lhs, rhs) => {
                lhs.rename_vars(f);
                rhs.rename_vars(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Assign { target: String, value: Expr },
    Let { name: String, value: Expr },
    If { cond: Expr, then_block: Vec<Stmt>, else_block: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Call { callee: String, args: Vec<Expr> },
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub kind: StmtKind,
    /// 1-based line of the statement's leading token.
    pub line: usize,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, line: 0 }
    }

    /// Structural equality ignoring source positions.
    pub fn same_shape(&self, other: &Stmt) -> bool {
        match (&self.kind, &other.kind) {
            (
                StmtKind::If { cond: c1, then_block: t1, else_block: e1 },
                StmtKind::If { cond: c2, then_block: t2, else_block: e2 },
            ) => c1 == c2 && blocks_same_shape(t1, t2) && blocks_same_shape(e1, e2),
            (StmtKind::While { cond: c1, body: b1 }, StmtKind::While { cond: c2, body: b2 }) => {
                c1 == c2 && blocks_same_shape(b1, b2)
            }
            (a, b) => a == b,
        }
    }
}

pub fn blocks_same_shape(a: &[Stmt], b: &[Stmt]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
}

/// Visits every statement of a block in source order, descending into nested blocks.
pub fn walk_stmts<'a>(block: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for stmt in block {
        f(stmt);
        match &stmt.kind {
            StmtKind::If { then_block, else_block, .. } => {
                walk_stmts(then_block, f);
                walk_stmts(else_block, f);
            }
            StmtKind::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}

pub fn walk_stmts_mut(block: &mut [Stmt], f: &mut dyn FnMut(&mut Stmt)) {
    for stmt in block {
        f(stmt);
        match &mut stmt.kind {
            StmtKind::If { then_block, else_block, .. } => {
                walk_stmts_mut(then_block, f);
                walk_stmts_mut(else_block, f);
            }
            StmtKind::While { body, .. } => walk_stmts_mut(body, f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDecl {
    pub name: String,
    pub init: Expr,
    pub line: usize,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    /// Line of the `fn` keyword.
    pub line: usize,
    /// Line of the closing brace.
    pub end_line: usize,
    pub unit: String,
}

impl FunctionDef {
    /// Names bound in the function's frame: parameters plus every `let`.
    ///
    /// Scoping is static and function-wide: an identifier is local iff it is
    /// in this set, otherwise it refers to a global.
    pub fn locals(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.params.iter().cloned().collect();
        walk_stmts(&self.body, &mut |s| {
            if let StmtKind::Let { name, .. } = &s.kind {
                out.insert(name.clone());
            }
        });
        out
    }

    /// Every identifier the body mentions (reads, targets, lets), excluding callee names.
    pub fn mentioned_names(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.params.iter().cloned().collect();
        walk_stmts(&self.body, &mut |s| {
            let mut vars = Vec::new();
            match &s.kind {
                StmtKind::Assign { target, value } => {
                    out.insert(target.clone());
                    value.collect_vars(&mut vars);
                }
                StmtKind::Let { name, value } => {
                    out.insert(name.clone());
                    value.collect_vars(&mut vars);
                }
                StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => cond.collect_vars(&mut vars),
                StmtKind::Call { args, .. } => args.iter().for_each(|a| a.collect_vars(&mut vars)),
                StmtKind::Return(e) => e.collect_vars(&mut vars),
            }
            out.extend(vars.into_iter().map(str::to_owned));
        });
        out
    }
}

/// A parsed (and, for multi-unit sources, linked) MiniLang program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionDef>,
    /// Raw source lines per unit; index 0 is line 1.
    pub sources: BTreeMap<String, Vec<String>>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut FunctionDef> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    pub fn global_names(&self) -> BTreeSet<String> {
        self.globals.iter().map(|g| g.name.clone()).collect()
    }

    /// Raw text of a 1-based source line.
    pub fn source_line(&self, unit: &str, line: usize) -> Option<&str> {
        self.sources.get(unit)?.get(line.checked_sub(1)?).map(String::as_str)
    }
}
