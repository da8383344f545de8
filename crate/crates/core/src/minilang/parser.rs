use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Unit name used when a single source text is parsed on its own.
pub const DEFAULT_UNIT: &str = "main.mini";

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    unit: &'a str,
    last_line: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |t| t.line)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => (self.last_line, 1),
        };
        ParseError::Syntax { line, col, message: message.into() }
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> PResult<&'a Token> {
        match self.toks.get(self.pos) {
            Some(t) if &t.tok == want => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.err(format!("expected {what}, found {:?}", t.tok))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(name.clone())
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn unit(&mut self) -> PResult<(Vec<GlobalDecl>, Vec<FunctionDef>)> {
        let mut globals = Vec::new();
        let mut functions = Vec::new();
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Global => {
                    let line = self.bump().unwrap().line;
                    let name = self.ident("global name")?;
                    self.expect(&Tok::Assign, "`=`")?;
                    let init = self.expr()?;
                    self.expect(&Tok::Semi, "`;`")?;
                    globals.push(GlobalDecl { name, init, line, unit: self.unit.to_owned() });
                }
                Tok::Fn => functions.push(self.function()?),
                _ => return Err(self.err("expected `global` or `fn`")),
            }
        }
        Ok((globals, functions))
    }

    fn function(&mut self) -> PResult<FunctionDef> {
        let line = self.expect(&Tok::Fn, "`fn`")?.line;
        let name = self.ident("function name")?;
        self.expect(&Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let p_line = self.peek_line();
                let p = self.ident("parameter name")?;
                if params.contains(&p) {
                    return Err(ParseError::Duplicate { name: p, line: p_line });
                }
                params.push(p);
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "`)`")?;
        let (body, end_line) = self.block()?;
        Ok(FunctionDef { name, params, body, line, end_line, unit: self.unit.to_owned() })
    }

    /// Parses `{ stmt* }`, returning the statements and the closing-brace line.
    fn block(&mut self) -> PResult<(Vec<Stmt>, usize)> {
        self.expect(&Tok::LBrace, "`{`")?;
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    let end = self.bump().unwrap().line;
                    return Ok((body, end));
                }
                None => return Err(self.err("unterminated block")),
                _ => body.push(self.stmt()?),
            }
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.peek_line();
        let kind = match self.peek() {
            Some(Tok::Let) => {
                self.pos += 1;
                let name = self.ident("local name")?;
                self.expect(&Tok::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(&Tok::Semi, "`;`")?;
                StmtKind::Let { name, value }
            }
            Some(Tok::If) => {
                self.pos += 1;
                self.expect(&Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                let (then_block, _) = self.block()?;
                let else_block = if self.peek() == Some(&Tok::Else) {
                    self.pos += 1;
                    self.block()?.0
                } else {
                    Vec::new()
                };
                StmtKind::If { cond, then_block, else_block }
            }
            Some(Tok::While) => {
                self.pos += 1;
                self.expect(&Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                let (body, _) = self.block()?;
                StmtKind::While { cond, body }
            }
            Some(Tok::Call) => {
                self.pos += 1;
                let callee = self.ident("function name")?;
                self.expect(&Tok::LParen, "`(`")?;
                let mut args = Vec::new();
                if self.peek() != Some(&Tok::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(&Tok::RParen, "`)`")?;
                self.expect(&Tok::Semi, "`;`")?;
                StmtKind::Call { callee, args }
            }
            Some(Tok::Return) => {
                self.pos += 1;
                let value = self.expr()?;
                self.expect(&Tok::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            Some(Tok::Ident(_)) => {
                let target = self.ident("assignment target")?;
                self.expect(&Tok::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(&Tok::Semi, "`;`")?;
                StmtKind::Assign { target, value }
            }
            _ => return Err(self.err("expected statement")),
        };
        Ok(Stmt { kind, line })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek()? {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            Tok::Percent => BinaryOp::Rem,
            _ => return None,
        })
    }

    // Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.err("expected expression")),
        }
    }
}

fn normalize(source: &str) -> String {
    source.replace("\r\n", "\n")
}

fn parse_declarations(unit: &str, source: &str) -> PResult<(Vec<GlobalDecl>, Vec<FunctionDef>)> {
    let toks = tokenize(source)?;
    let mut p = Parser { toks: &toks, pos: 0, unit, last_line: source.lines().count().max(1) };
    p.unit()
}

/// Parses a single self-contained source text.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_units([(DEFAULT_UNIT, source)])
}

/// Parses and links several units into one program. Units are linked in the
/// iteration order given; globals are initialized in that order.
pub fn parse_units<'a, I>(units: I) -> Result<Program, ParseError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let units: Vec<(&str, &str)> = units.into_iter().collect();
    let several = units.len() > 1;
    let mut program = Program { globals: Vec::new(), functions: Vec::new(), sources: BTreeMap::new() };
    for (unit, source) in units {
        let text = normalize(source);
        let (globals, functions) = parse_declarations(unit, &text).map_err(|e| {
            if several {
                ParseError::Unit { unit: unit.to_owned(), source: Box::new(e) }
            } else {
                e
            }
        })?;
        program.globals.extend(globals);
        program.functions.extend(functions);
        program.sources.insert(unit.to_owned(), text.lines().map(str::to_owned).collect());
    }
    check(&program)?;
    Ok(program)
}

/// Validates declaration uniqueness, `main`, and call arity.
pub fn check(program: &Program) -> Result<(), ParseError> {
    let in_unit = |unit: &str, e: ParseError| {
        if program.sources.len() > 1 {
            ParseError::Unit { unit: unit.to_owned(), source: Box::new(e) }
        } else {
            e
        }
    };
    let mut names = BTreeSet::new();
    for g in &program.globals {
        if !names.insert(g.name.as_str()) {
            return Err(in_unit(&g.unit, ParseError::Duplicate { name: g.name.clone(), line: g.line }));
        }
    }
    let mut arity: HashMap<&str, usize> = HashMap::new();
    for f in &program.functions {
        if !names.insert(f.name.as_str()) {
            return Err(in_unit(&f.unit, ParseError::Duplicate { name: f.name.clone(), line: f.line }));
        }
        arity.insert(&f.name, f.params.len());
    }
    match program.function("main") {
        Some(main) if main.params.is_empty() => {}
        _ => return Err(ParseError::Main),
    }
    for f in &program.functions {
        let mut failure = None;
        walk_stmts(&f.body, &mut |s| {
            if failure.is_some() {
                return;
            }
            if let StmtKind::Call { callee, args } = &s.kind {
                match arity.get(callee.as_str()) {
                    None => failure = Some(ParseError::UnknownFunction { name: callee.clone(), line: s.line }),
                    Some(&n) if n != args.len() => {
                        failure = Some(ParseError::Arity {
                            name: callee.clone(),
                            expected: n,
                            found: args.len(),
                            line: s.line,
                        })
                    }
                    _ => {}
                }
            }
        });
        if let Some(e) = failure {
            return Err(in_unit(&f.unit, e));
        }
    }
    Ok(())
}
