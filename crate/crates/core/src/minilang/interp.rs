use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ast::*;

pub const DEFAULT_STEP_LIMIT: u64 = 100_000;
pub const DEFAULT_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    DivByZero,
    StepLimitExceeded,
    Overflow,
    UndefinedVariable,
    CallDepthExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    /// Final global values; present only when `status` is `Ok`.
    pub final_state: Option<BTreeMap<String, i64>>,
    pub steps: u64,
    pub status: ExecStatus,
}

impl ExecutionOutcome {
    /// Status plus final state, ignoring step counts.
    pub fn same_observation(&self, other: &ExecutionOutcome) -> bool {
        self.status == other.status && self.final_state == other.final_state
    }
}

enum Flow {
    Normal,
    Return,
}

type Exec<T> = Result<T, ExecStatus>;

struct Machine<'p> {
    program: &'p Program,
    locals: &'p HashMap<&'p str, BTreeSet<String>>,
    globals: BTreeMap<String, i64>,
    steps: u64,
    step_limit: u64,
    depth: usize,
    max_depth: usize,
}

struct Frame<'p> {
    local_names: &'p BTreeSet<String>,
    values: HashMap<String, i64>,
}

impl<'p> Machine<'p> {
    fn tick(&mut self) -> Exec<()> {
        if self.steps >= self.step_limit {
            return Err(ExecStatus::StepLimitExceeded);
        }
        self.steps += 1;
        Ok(())
    }

    fn read(&self, frame: Option<&Frame<'_>>, name: &str) -> Exec<i64> {
        if let Some(frame) = frame {
            if frame.local_names.contains(name) {
                return frame.values.get(name).copied().ok_or(ExecStatus::UndefinedVariable);
            }
        }
        self.globals.get(name).copied().ok_or(ExecStatus::UndefinedVariable)
    }

    fn eval(&self, frame: Option<&Frame<'_>>, e: &Expr) -> Exec<i64> {
        Ok(match e {
            Expr::Int(v) => *v,
            Expr::Var(name) => self.read(frame, name)?,
            Expr::Unary(UnaryOp::Neg, inner) => {
                self.eval(frame, inner)?.checked_neg().ok_or(ExecStatus::Overflow)?
            }
            Expr::Unary(UnaryOp::Not, inner) => (self.eval(frame, inner)? == 0) as i64,
            Expr::Binary(BinaryOp::And, l, r) => {
                if self.eval(frame, l)? == 0 {
                    0
                } else {
                    (self.eval(frame, r)? != 0) as i64
                }
            }
            Expr::Binary(BinaryOp::Or, l, r) => {
                if self.eval(frame, l)? != 0 {
                    1
                } else {
                    (self.eval(frame, r)? != 0) as i64
                }
            }
            Expr::Binary(op, l, r) => {
                let a = self.eval(frame, l)?;
                let b = self.eval(frame, r)?;
                match op {
                    BinaryOp::Add => a.checked_add(b).ok_or(ExecStatus::Overflow)?,
                    BinaryOp::Sub => a.checked_sub(b).ok_or(ExecStatus::Overflow)?,
                    BinaryOp::Mul => a.checked_mul(b).ok_or(ExecStatus::Overflow)?,
                    BinaryOp::Div | BinaryOp::Rem if b == 0 => return Err(ExecStatus::DivByZero),
                    BinaryOp::Div => a.checked_div(b).ok_or(ExecStatus::Overflow)?,
                    BinaryOp::Rem => a.checked_rem(b).ok_or(ExecStatus::Overflow)?,
                    BinaryOp::Eq => (a == b) as i64,
                    BinaryOp::Ne => (a != b) as i64,
                    BinaryOp::Lt => (a < b) as i64,
                    BinaryOp::Le => (a <= b) as i64,
                    BinaryOp::Gt => (a > b) as i64,
                    BinaryOp::Ge => (a >= b) as i64,
                    BinaryOp::And | BinaryOp::Or => unreachable!(),
                }
            }
        })
    }

    fn write(&mut self, frame: &mut Frame<'_>, name: &str, value: i64) -> Exec<()> {
        if frame.local_names.contains(name) {
            frame.values.insert(name.to_owned(), value);
        } else if let Some(slot) = self.globals.get_mut(name) {
            *slot = value;
        } else {
            return Err(ExecStatus::UndefinedVariable);
        }
        Ok(())
    }

    fn block(&mut self, frame: &mut Frame<'p>, block: &'p [Stmt]) -> Exec<Flow> {
        for stmt in block {
            if let Flow::Return = self.stmt(frame, stmt)? {
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, frame: &mut Frame<'p>, stmt: &'p Stmt) -> Exec<Flow> {
        match &stmt.kind {
            StmtKind::Assign { target, value } => {
                self.tick()?;
                let v = self.eval(Some(frame), value)?;
                self.write(frame, target, v)?;
            }
            StmtKind::Let { name, value } => {
                self.tick()?;
                let v = self.eval(Some(frame), value)?;
                frame.values.insert(name.clone(), v);
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.tick()?;
                let branch = if self.eval(Some(frame), cond)? != 0 { then_block } else { else_block };
                return self.block(frame, branch);
            }
            StmtKind::While { cond, body } => loop {
                self.tick()?;
                if self.eval(Some(frame), cond)? == 0 {
                    break;
                }
                if let Flow::Return = self.block(frame, body)? {
                    return Ok(Flow::Return);
                }
            },
            StmtKind::Call { callee, args } => {
                self.tick()?;
                let values = args.iter().map(|a| self.eval(Some(frame), a)).collect::<Exec<Vec<_>>>()?;
                self.call(callee, values)?;
            }
            StmtKind::Return(value) => {
                self.tick()?;
                self.eval(Some(frame), value)?;
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Normal)
    }

    fn call(&mut self, name: &str, args: Vec<i64>) -> Exec<()> {
        let program = self.program;
        let locals = self.locals;
        let f = program.function(name).ok_or(ExecStatus::UndefinedVariable)?;
        if self.depth >= self.max_depth {
            return Err(ExecStatus::CallDepthExceeded);
        }
        self.depth += 1;
        let local_names = &locals[f.name.as_str()];
        let mut frame = Frame { local_names, values: f.params.iter().cloned().zip(args).collect() };
        let result = self.block(&mut frame, &f.body);
        self.depth -= 1;
        result.map(|_| ())
    }
}

/// Runs global initializers top to bottom, then `main`.
pub fn execute(program: &Program, step_limit: u64) -> ExecutionOutcome {
    execute_with_depth(program, step_limit, DEFAULT_CALL_DEPTH)
}

pub fn execute_with_depth(program: &Program, step_limit: u64, max_depth: usize) -> ExecutionOutcome {
    let locals = program.functions.iter().map(|f| (f.name.as_str(), f.locals())).collect();
    let mut m = Machine {
        program,
        locals: &locals,
        globals: BTreeMap::new(),
        steps: 0,
        step_limit,
        depth: 0,
        max_depth,
    };
    let run = (|| {
        for g in &program.globals {
            m.tick()?;
            let v = m.eval(None, &g.init)?;
            m.globals.insert(g.name.clone(), v);
        }
        m.call("main", Vec::new())
    })();
    match run {
        Ok(()) => ExecutionOutcome { final_state: Some(m.globals), steps: m.steps, status: ExecStatus::Ok },
        Err(status) => ExecutionOutcome { final_state: None, steps: m.steps, status },
    }
}
