use std::collections::HashMap;

use thiserror::Error;

use super::ast::{BinaryOp, Expr, Node, UnaryOp, VarMask, VariableId, MAX_DIM};
use crate::Dims;

const SLOTS: usize = 2 * MAX_DIM + MAX_DIM * MAX_DIM;
const MAX_SHOWN: usize = 160;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(VariableId),
    #[error("variable {var} outside declared dimensions (m={m}, n={n})")]
    OutOfRange { var: VariableId, m: usize, n: usize },
    #[error("{reason} in `{subexpr}`")]
    Domain { reason: &'static str, subexpr: String },
}

fn shorten(e: &Expr) -> String {
    let s = e.to_string();
    if s.len() <= MAX_SHOWN {
        s
    } else {
        let cut = (0..=MAX_SHOWN).rev().find(|&i| s.is_char_boundary(i)).unwrap_or(0);
        format!("{}...", &s[..cut])
    }
}

/// Numeric values for (a subset of) the jet variables.
#[derive(Clone, Debug)]
pub struct Bindings {
    dims: Dims,
    values: [f64; SLOTS],
    bound: VarMask,
}

impl Bindings {
    pub fn new(dims: Dims) -> Self {
        Bindings {
            dims,
            values: [0.0; SLOTS],
            bound: VarMask::EMPTY,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn set(&mut self, var: VariableId, value: f64) -> Result<(), EvalError> {
        if !var.in_bounds(self.dims) {
            return Err(EvalError::OutOfRange {
                var,
                m: self.dims.m,
                n: self.dims.n,
            });
        }
        self.values[var.bit() as usize] = value;
        self.bound.insert(var);
        Ok(())
    }

    pub fn with(mut self, var: VariableId, value: f64) -> Self {
        self.set(var, value).expect("variable within dimensions");
        self
    }

    pub fn get(&self, var: VariableId) -> Option<f64> {
        self.bound
            .contains(var)
            .then(|| self.values[var.bit() as usize])
    }

    pub fn bound(&self) -> VarMask {
        self.bound
    }

    fn check(&self, needed: VarMask) -> Result<(), EvalError> {
        let missing = VarMask(needed.0 & !self.bound.0);
        match missing.iter().next() {
            Some(v) => Err(EvalError::Unbound(v)),
            None => Ok(()),
        }
    }

    #[inline]
    fn slot(&self, var: VariableId) -> f64 {
        self.values[var.bit() as usize]
    }
}

pub(crate) fn apply_unary(op: UnaryOp, x: f64) -> Result<f64, &'static str> {
    Ok(match op {
        UnaryOp::Neg => -x,
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::Tan => x.tan(),
        UnaryOp::Exp => x.exp(),
        UnaryOp::Log => {
            if x <= 0.0 {
                return Err("log of non-positive value");
            }
            x.ln()
        }
        UnaryOp::Sqrt => {
            if x < 0.0 {
                return Err("sqrt of negative value");
            }
            x.sqrt()
        }
        UnaryOp::Sinh => x.sinh(),
        UnaryOp::Cosh => x.cosh(),
    })
}

/// Integer exponents use repeated-multiplication semantics; any other
/// exponent requires a strictly positive base.
pub(crate) fn apply_pow(base: f64, exponent: f64) -> Result<f64, &'static str> {
    if exponent == exponent.trunc() && exponent.abs() <= i32::MAX as f64 {
        let k = exponent as i32;
        if k < 0 && base == 0.0 {
            return Err("division by zero");
        }
        Ok(base.powi(k))
    } else if base > 0.0 {
        Ok(base.powf(exponent))
    } else {
        Err("non-integer power of non-positive base")
    }
}

pub(crate) fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, &'static str> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err("division by zero");
            }
            a / b
        }
        BinaryOp::Pow => return apply_pow(a, b),
    })
}

/// Recursive evaluation. For repeated evaluation of large derived
/// expressions compile a [`Tape`] instead.
pub fn evaluate(e: &Expr, b: &Bindings) -> Result<f64, EvalError> {
    b.check(e.vars())?;
    eval_rec(e, b)
}

fn eval_rec(e: &Expr, b: &Bindings) -> Result<f64, EvalError> {
    let wrap = |reason| EvalError::Domain {
        reason,
        subexpr: shorten(e),
    };
    match e.node() {
        Node::Num(x) => Ok(*x),
        Node::Const(c) => Ok(c.value()),
        Node::Var(v) => Ok(b.slot(*v)),
        Node::Unary(op, a) => apply_unary(*op, eval_rec(a, b)?).map_err(wrap),
        Node::Binary(op, l, r) => {
            let x = eval_rec(l, b)?;
            let y = eval_rec(r, b)?;
            apply_binary(*op, x, y).map_err(wrap)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Num(u64),
    Var(u32),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
}

#[derive(Clone, Copy, Debug)]
enum Instr {
    Num(f64),
    Var(usize),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
}

/// A batch of expressions flattened into one straight-line program.
///
/// Shared and structurally identical subexpressions are evaluated once.
#[derive(Clone, Debug)]
pub struct Tape {
    instrs: Vec<Instr>,
    origin: Vec<Expr>,
    outputs: Vec<usize>,
    vars: VarMask,
}

struct TapeBuilder {
    instrs: Vec<Instr>,
    origin: Vec<Expr>,
    by_addr: HashMap<usize, usize>,
    by_key: HashMap<Key, usize>,
}

impl TapeBuilder {
    fn push(&mut self, e: &Expr) -> usize {
        if let Some(&i) = self.by_addr.get(&e.addr()) {
            return i;
        }
        let (key, instr) = match e.node() {
            Node::Num(x) => (Key::Num(x.to_bits()), Instr::Num(*x)),
            Node::Const(c) => (Key::Num(c.value().to_bits()), Instr::Num(c.value())),
            Node::Var(v) => (Key::Var(v.bit()), Instr::Var(v.bit() as usize)),
            Node::Unary(op, a) => {
                let a = self.push(a);
                (Key::Unary(*op, a), Instr::Unary(*op, a))
            }
            Node::Binary(op, l, r) => {
                let l = self.push(l);
                let r = self.push(r);
                (Key::Binary(*op, l, r), Instr::Binary(*op, l, r))
            }
        };
        let idx = match self.by_key.get(&key) {
            Some(&i) => i,
            None => {
                self.instrs.push(instr);
                self.origin.push(e.clone());
                let i = self.instrs.len() - 1;
                self.by_key.insert(key, i);
                i
            }
        };
        self.by_addr.insert(e.addr(), idx);
        idx
    }
}

impl Tape {
    pub fn compile<'a>(exprs: impl IntoIterator<Item = &'a Expr>) -> Tape {
        let mut builder = TapeBuilder {
            instrs: Vec::new(),
            origin: Vec::new(),
            by_addr: HashMap::new(),
            by_key: HashMap::new(),
        };
        let mut vars = VarMask::EMPTY;
        let mut outputs = Vec::new();
        for e in exprs {
            vars = vars.union(e.vars());
            outputs.push(builder.push(e));
        }
        Tape {
            instrs: builder.instrs,
            origin: builder.origin,
            outputs,
            vars,
        }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn instruction_count(&self) -> usize {
        self.instrs.len()
    }

    pub fn vars(&self) -> VarMask {
        self.vars
    }

    pub fn eval(&self, b: &Bindings) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(b, &mut scratch, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(
        &self,
        b: &Bindings,
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        b.check(self.vars)?;
        scratch.clear();
        scratch.reserve(self.instrs.len());
        for (k, instr) in self.instrs.iter().enumerate() {
            let value = match *instr {
                Instr::Num(x) => Ok(x),
                Instr::Var(slot) => Ok(b.values[slot]),
                Instr::Unary(op, a) => apply_unary(op, scratch[a]),
                Instr::Binary(op, l, r) => apply_binary(op, scratch[l], scratch[r]),
            }
            .map_err(|reason| EvalError::Domain {
                reason,
                subexpr: shorten(&self.origin[k]),
            })?;
            scratch.push(value);
        }
        for (o, &idx) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[idx];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    fn dims() -> Dims {
        Dims::new(2, 2).unwrap()
    }

    #[test]
    fn arithmetic() {
        let e = parse("2*t1 + v1_1", dims()).unwrap();
        let b = Bindings::new(dims())
            .with(VariableId::t(0), 1.0)
            .with(VariableId::v(0, 0), 3.0);
        assert_eq!(evaluate(&e, &b).unwrap(), 5.0);
        assert_eq!(evaluate(&parse("sin(0)", dims()).unwrap(), &Bindings::new(dims())).unwrap(), 0.0);
    }

    #[test]
    fn division_by_zero_is_a_domain_error() {
        let e = parse("1/x1", dims()).unwrap();
        let b = Bindings::new(dims()).with(VariableId::x(0), 0.0);
        match evaluate(&e, &b) {
            Err(EvalError::Domain { reason, subexpr }) => {
                assert_eq!(reason, "division by zero");
                assert_eq!(subexpr, "1/x1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unbound_and_domain_errors() {
        let b = Bindings::new(dims());
        assert_eq!(
            evaluate(&parse("x2+1", dims()).unwrap(), &b),
            Err(EvalError::Unbound(VariableId::x(1)))
        );
        let b = b.with(VariableId::x(0), -1.0);
        assert!(matches!(evaluate(&parse("log(x1)", dims()).unwrap(), &b), Err(EvalError::Domain { .. })));
        assert!(matches!(evaluate(&parse("sqrt(x1)", dims()).unwrap(), &b), Err(EvalError::Domain { .. })));
        assert!(matches!(evaluate(&parse("x1^0.5", dims()).unwrap(), &b), Err(EvalError::Domain { .. })));
        assert_eq!(evaluate(&parse("x1^3", dims()).unwrap(), &b).unwrap(), -1.0);
    }

    #[test]
    fn tape_matches_recursive_evaluation() {
        let exprs: Vec<Expr> = ["sin(x1)*v1_2 + x1^2", "exp(t1)/(2+cos(x2))", "sin(x1)*v1_2"]
            .iter()
            .map(|s| parse(s, dims()).unwrap())
            .collect();
        let tape = Tape::compile(&exprs);
        let b = Bindings::new(dims())
            .with(VariableId::x(0), 0.3)
            .with(VariableId::x(1), -0.2)
            .with(VariableId::t(0), 0.9)
            .with(VariableId::v(0, 1), 1.7);
        let got = tape.eval(&b).unwrap();
        for (e, g) in exprs.iter().zip(&got) {
            assert_eq!(evaluate(e, &b).unwrap(), *g);
        }
        // "sin(x1)*v1_2" appears twice and is deduplicated.
        assert!(tape.instruction_count() < 20);
    }
}
