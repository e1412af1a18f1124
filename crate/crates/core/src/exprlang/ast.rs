use std::collections::HashSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::Dims;

/// Largest temporal or spatial dimension the engine accepts.
pub const MAX_DIM: usize = 4;

/// A jet coordinate. Indices are zero-based; the textual form is one-based
/// (`t1`, `x2`, `v1_2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariableId {
    Temporal(u8),
    Spatial(u8),
    Velocity { i: u8, alpha: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Temporal,
    Spatial,
    Velocity,
}

impl VariableId {
    pub fn t(alpha: usize) -> Self {
        assert!(alpha < MAX_DIM, "temporal index {alpha} out of range");
        VariableId::Temporal(alpha as u8)
    }

    pub fn x(i: usize) -> Self {
        assert!(i < MAX_DIM, "spatial index {i} out of range");
        VariableId::Spatial(i as u8)
    }

    pub fn v(i: usize, alpha: usize) -> Self {
        assert!(i < MAX_DIM && alpha < MAX_DIM, "velocity index ({i},{alpha}) out of range");
        VariableId::Velocity {
            i: i as u8,
            alpha: alpha as u8,
        }
    }

    pub fn kind(self) -> VarKind {
        match self {
            VariableId::Temporal(_) => VarKind::Temporal,
            VariableId::Spatial(_) => VarKind::Spatial,
            VariableId::Velocity { .. } => VarKind::Velocity,
        }
    }

    /// Bit position in a [`VarMask`].
    pub(crate) fn bit(self) -> u32 {
        match self {
            VariableId::Temporal(a) => a as u32,
            VariableId::Spatial(i) => MAX_DIM as u32 + i as u32,
            VariableId::Velocity { i, alpha } => {
                2 * MAX_DIM as u32 + MAX_DIM as u32 * i as u32 + alpha as u32
            }
        }
    }

    pub(crate) fn from_bit(bit: u32) -> Self {
        let d = MAX_DIM as u32;
        if bit < d {
            VariableId::Temporal(bit as u8)
        } else if bit < 2 * d {
            VariableId::Spatial((bit - d) as u8)
        } else {
            let r = bit - 2 * d;
            VariableId::Velocity {
                i: (r / d) as u8,
                alpha: (r % d) as u8,
            }
        }
    }

    pub fn in_bounds(self, dims: Dims) -> bool {
        match self {
            VariableId::Temporal(a) => (a as usize) < dims.m,
            VariableId::Spatial(i) => (i as usize) < dims.n,
            VariableId::Velocity { i, alpha } => (i as usize) < dims.n && (alpha as usize) < dims.m,
        }
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VariableId::Temporal(a) => write!(f, "t{}", a + 1),
            VariableId::Spatial(i) => write!(f, "x{}", i + 1),
            VariableId::Velocity { i, alpha } => write!(f, "v{}_{}", i + 1, alpha + 1),
        }
    }
}

/// Set of variables an expression depends on, one bit per [`VariableId`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct VarMask(pub(crate) u32);

impl VarMask {
    pub const EMPTY: VarMask = VarMask(0);

    pub fn contains(self, var: VariableId) -> bool {
        self.0 & (1 << var.bit()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn insert(&mut self, var: VariableId) {
        self.0 |= 1 << var.bit();
    }

    pub fn union(self, other: VarMask) -> VarMask {
        VarMask(self.0 | other.0)
    }

    pub fn has_kind(self, kind: VarKind) -> bool {
        self.iter().any(|v| v.kind() == kind)
    }

    pub fn iter(self) -> impl Iterator<Item = VariableId> {
        (0..32u32)
            .filter(move |b| self.0 & (1 << b) != 0)
            .map(VariableId::from_bit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "sinh" => UnaryOp::Sinh,
            "cosh" => UnaryOp::Cosh,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Node {
    Num(f64),
    Const(Constant),
    Var(VariableId),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
}

struct Inner {
    node: Node,
    vars: VarMask,
    hash: u64,
}

/// Immutable, reference-counted expression DAG over the jet variables.
///
/// Equality is structural. Subtrees are shared freely, so cloning is cheap.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

fn mix(mut h: u64, x: u64) -> u64 {
    h ^= x.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb)
}

impl Expr {
    fn make(node: Node) -> Expr {
        let (vars, hash) = match &node {
            Node::Num(x) => (VarMask::EMPTY, mix(1, x.to_bits())),
            Node::Const(c) => (VarMask::EMPTY, mix(2, *c as u64)),
            Node::Var(v) => {
                let mut m = VarMask::EMPTY;
                m.insert(*v);
                (m, mix(3, v.bit() as u64))
            }
            Node::Unary(op, a) => (a.vars(), mix(mix(4, *op as u64), a.0.hash)),
            Node::Binary(op, a, b) => (
                a.vars().union(b.vars()),
                mix(mix(mix(5, *op as u64), a.0.hash), b.0.hash),
            ),
        };
        Expr(Arc::new(Inner { node, vars, hash }))
    }

    /// Numeric literal; `-0.0` is stored as `0.0`.
    pub fn num(x: f64) -> Expr {
        Expr::make(Node::Num(if x == 0.0 { 0.0 } else { x }))
    }

    pub fn zero() -> Expr {
        Expr::num(0.0)
    }

    pub fn one() -> Expr {
        Expr::num(1.0)
    }

    pub fn constant(c: Constant) -> Expr {
        Expr::make(Node::Const(c))
    }

    pub fn var(v: VariableId) -> Expr {
        Expr::make(Node::Var(v))
    }

    /// Builds a unary node without simplification.
    pub fn unary_raw(op: UnaryOp, a: Expr) -> Expr {
        Expr::make(Node::Unary(op, a))
    }

    /// Builds a binary node without simplification.
    pub fn binary_raw(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::make(Node::Binary(op, a, b))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn vars(&self) -> VarMask {
        self.0.vars
    }

    pub fn depends_on(&self, v: VariableId) -> bool {
        self.0.vars.contains(v)
    }

    pub fn free_variables(&self) -> Vec<VariableId> {
        self.0.vars.iter().collect()
    }

    pub fn is_constant(&self) -> bool {
        self.0.vars.is_empty()
    }

    pub fn as_num(&self) -> Option<f64> {
        match self.0.node {
            Node::Num(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_num() == Some(1.0)
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        fn walk(e: &Expr, seen: &mut HashSet<usize>) {
            if !seen.insert(e.addr()) {
                return;
            }
            match e.node() {
                Node::Unary(_, a) => walk(a, seen),
                Node::Binary(_, a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
                _ => {}
            }
        }
        let mut seen = HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }

    // Smart constructors. Each applies the local identities used by
    // `simplify` so derived expressions stay compact.

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Num(x) => Expr::num(-x),
            Node::Unary(UnaryOp::Neg, a) => a.clone(),
            Node::Binary(BinaryOp::Mul, a, b) if a.as_num().is_some() => {
                Expr::num(-a.as_num().unwrap()).mul(b)
            }
            _ => Expr::unary_raw(UnaryOp::Neg, self.clone()),
        }
    }

    pub fn apply(op: UnaryOp, a: &Expr) -> Expr {
        if op == UnaryOp::Neg {
            return a.neg();
        }
        if let Some(x) = a.as_num() {
            if let Ok(y) = super::eval::apply_unary(op, x) {
                if y.is_finite() {
                    return Expr::num(y);
                }
            }
        }
        Expr::unary_raw(op, a.clone())
    }

    pub fn add(&self, other: &Expr) -> Expr {
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) => return Expr::num(a + b),
            (Some(a), _) if a == 0.0 => return other.clone(),
            (_, Some(b)) if b == 0.0 => return self.clone(),
            _ => {}
        }
        if let Node::Unary(UnaryOp::Neg, b) = other.node() {
            return self.sub(b);
        }
        if let Node::Unary(UnaryOp::Neg, a) = self.node() {
            return other.sub(a);
        }
        if self == other {
            return Expr::num(2.0).mul(self);
        }
        Expr::binary_raw(BinaryOp::Add, self.clone(), other.clone())
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) => return Expr::num(a - b),
            (Some(a), _) if a == 0.0 => return other.neg(),
            (_, Some(b)) if b == 0.0 => return self.clone(),
            _ => {}
        }
        if self == other {
            return Expr::zero();
        }
        if let Node::Unary(UnaryOp::Neg, b) = other.node() {
            return self.add(b);
        }
        Expr::binary_raw(BinaryOp::Sub, self.clone(), other.clone())
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) => return Expr::num(a * b),
            (Some(a), _) if a == 0.0 => return Expr::zero(),
            (_, Some(b)) if b == 0.0 => return Expr::zero(),
            (Some(a), _) if a == 1.0 => return other.clone(),
            (_, Some(b)) if b == 1.0 => return self.clone(),
            (Some(a), _) if a == -1.0 => return other.neg(),
            (_, Some(b)) if b == -1.0 => return self.neg(),
            (None, Some(_)) => return other.mul(self),
            _ => {}
        }
        if let Node::Unary(UnaryOp::Neg, a) = self.node() {
            return a.mul(other).neg();
        }
        if let Node::Unary(UnaryOp::Neg, b) = other.node() {
            return self.mul(b).neg();
        }
        if let (Some(a), Node::Binary(BinaryOp::Mul, c, rest)) = (self.as_num(), other.node()) {
            if let Some(c) = c.as_num() {
                return Expr::num(a * c).mul(rest);
            }
        }
        Expr::binary_raw(BinaryOp::Mul, self.clone(), other.clone())
    }

    pub fn div(&self, other: &Expr) -> Expr {
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) if b != 0.0 => return Expr::num(a / b),
            (Some(a), _) if a == 0.0 => return Expr::zero(),
            (_, Some(b)) if b == 1.0 => return self.clone(),
            (_, Some(b)) if b == -1.0 => return self.neg(),
            _ => {}
        }
        if let Node::Unary(UnaryOp::Neg, a) = self.node() {
            return a.div(other).neg();
        }
        Expr::binary_raw(BinaryOp::Div, self.clone(), other.clone())
    }

    pub fn pow(&self, exponent: &Expr) -> Expr {
        match (self.as_num(), exponent.as_num()) {
            (Some(a), Some(b)) => {
                if let Ok(y) = super::eval::apply_pow(a, b) {
                    if y.is_finite() {
                        return Expr::num(y);
                    }
                }
            }
            (_, Some(b)) if b == 1.0 => return self.clone(),
            (_, Some(b)) if b == 0.0 => return Expr::one(),
            (Some(a), _) if a == 1.0 => return Expr::one(),
            _ => {}
        }
        if self.is_zero() {
            if let Some(b) = exponent.as_num() {
                if b > 0.0 {
                    return Expr::zero();
                }
            }
        }
        Expr::binary_raw(BinaryOp::Pow, self.clone(), exponent.clone())
    }

    pub fn powi(&self, k: i32) -> Expr {
        self.pow(&Expr::num(k as f64))
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::num(c).mul(self)
    }

    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc.add(t))
    }

    pub fn sum_owned(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc.add(&t))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        if self.0.hash != other.0.hash || self.0.vars != other.0.vars {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Num(a), Node::Num(b)) => a.to_bits() == b.to_bits(),
            (Node::Const(a), Node::Const(b)) => a == b,
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Unary(o1, a1), Node::Unary(o2, a2)) => o1 == o2 && a1 == a2,
            (Node::Binary(o1, a1, b1), Node::Binary(o2, a2, b2)) => {
                o1 == o2 && a1 == a2 && b1 == b2
            }
            _ => false,
        }
    }
}

impl Eq for Expr {}

impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

// Printing. Parentheses are inserted wherever re-parsing would otherwise
// produce a different tree, so `parse(print(e)) == e` for parser output.

const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Num(x) if *x < 0.0 || x.to_bits() == (-0.0f64).to_bits() => PREC_NEG,
        Node::Num(_) | Node::Const(_) | Node::Var(_) => PREC_ATOM,
        Node::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Node::Unary(_, _) => PREC_ATOM,
        Node::Binary(op, _, _) => op.precedence(),
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x.is_finite() && x == x.trunc() && x.abs() < 1e15 {
        write!(f, "{}", x as i64)
    } else {
        write!(f, "{:?}", x)
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Num(x) => write_num(f, *x),
            Node::Const(Constant::Pi) => f.write_str("pi"),
            Node::Const(Constant::E) => f.write_str("e"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                write_wrapped(f, a, precedence(a) < PREC_POW)
            }
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(BinaryOp::Pow, a, b) => {
                write_wrapped(f, a, precedence(a) <= PREC_POW)?;
                f.write_str("^")?;
                write_wrapped(f, b, precedence(b) < PREC_POW)
            }
            Node::Binary(op, a, b) => {
                let p = op.precedence();
                write_wrapped(f, a, precedence(a) < p)?;
                write!(f, "{}", op.symbol())?;
                write_wrapped(f, b, precedence(b) <= p)
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $smart:ident) => {
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                self.$smart(rhs)
            }
        }
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$smart(&rhs)
            }
        }
        impl ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                (&self).$smart(rhs)
            }
        }
        impl ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$smart(&rhs)
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);
impl_binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<f64> for Expr {
    fn from(x: f64) -> Expr {
        Expr::num(x)
    }
}

impl From<VariableId> for Expr {
    fn from(v: VariableId) -> Expr {
        Expr::var(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_bits_roundtrip() {
        for a in 0..MAX_DIM {
            assert_eq!(VariableId::from_bit(VariableId::t(a).bit()), VariableId::t(a));
            assert_eq!(VariableId::from_bit(VariableId::x(a).bit()), VariableId::x(a));
            for i in 0..MAX_DIM {
                let v = VariableId::v(i, a);
                assert_eq!(VariableId::from_bit(v.bit()), v);
            }
        }
    }

    #[test]
    fn smart_constructors_fold_identities() {
        let x = Expr::var(VariableId::x(0));
        assert_eq!(&x + &Expr::zero(), x);
        assert_eq!(&Expr::one() * &x, x);
        assert!((&Expr::zero() * &x).is_zero());
        assert_eq!(x.neg().neg(), x);
        assert!((&x - &x).is_zero());
        assert_eq!(x.pow(&Expr::one()), x);
        assert_eq!((&Expr::num(2.0) * &Expr::num(3.0)).as_num(), Some(6.0));
        assert!(Expr::zero().pow(&Expr::num(3.0)).is_zero());
    }

    #[test]
    fn display_uses_minimal_parentheses() {
        let x = Expr::var(VariableId::x(0));
        let t = Expr::var(VariableId::t(1));
        let e = Expr::binary_raw(
            BinaryOp::Sub,
            x.clone(),
            Expr::binary_raw(BinaryOp::Sub, t.clone(), x.clone()),
        );
        assert_eq!(e.to_string(), "x1-(t2-x1)");
        let p = Expr::binary_raw(BinaryOp::Pow, Expr::unary_raw(UnaryOp::Neg, x.clone()), t);
        assert_eq!(p.to_string(), "(-x1)^t2");
        assert_eq!(Expr::num(2.5).to_string(), "2.5");
    }
}
