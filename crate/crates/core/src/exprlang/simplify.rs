use std::collections::HashMap;

use super::ast::{BinaryOp, Expr, Node, UnaryOp, VariableId};

/// Conservative bottom-up simplification: constant folding and the 0/1
/// identities. No factoring or expansion.
pub fn simplify(e: &Expr) -> Expr {
    let mut memo = HashMap::new();
    rebuild(e, &mut memo, &|_| None)
}

/// Replaces variables by expressions, simplifying on the way back up.
pub fn substitute(e: &Expr, map: &dyn Fn(VariableId) -> Option<Expr>) -> Expr {
    let mut memo = HashMap::new();
    rebuild(e, &mut memo, map)
}

/// Substitution with a memo shared across calls, so expressions that share
/// subtrees keep sharing them after substitution.
pub struct Substitution<'a> {
    map: Box<dyn Fn(VariableId) -> Option<Expr> + 'a>,
    memo: HashMap<usize, Expr>,
    pinned: Vec<Expr>,
}

impl<'a> Substitution<'a> {
    pub fn new(map: impl Fn(VariableId) -> Option<Expr> + 'a) -> Self {
        Substitution {
            map: Box::new(map),
            memo: HashMap::new(),
            pinned: Vec::new(),
        }
    }

    pub fn apply(&mut self, e: &Expr) -> Expr {
        self.pinned.push(e.clone());
        rebuild(e, &mut self.memo, &*self.map)
    }
}

fn rebuild(
    e: &Expr,
    memo: &mut HashMap<usize, Expr>,
    map: &dyn Fn(VariableId) -> Option<Expr>,
) -> Expr {
    if let Some(r) = memo.get(&e.addr()) {
        return r.clone();
    }
    let r = match e.node() {
        Node::Num(_) | Node::Const(_) => e.clone(),
        Node::Var(v) => map(*v).unwrap_or_else(|| e.clone()),
        Node::Unary(op, a) => {
            let a = rebuild(a, memo, map);
            match op {
                UnaryOp::Neg => a.neg(),
                _ => Expr::apply(*op, &a),
            }
        }
        Node::Binary(op, a, b) => {
            let a = rebuild(a, memo, map);
            let b = rebuild(b, memo, map);
            match op {
                BinaryOp::Add => a.add(&b),
                BinaryOp::Sub => a.sub(&b),
                BinaryOp::Mul => a.mul(&b),
                BinaryOp::Div => a.div(&b),
                BinaryOp::Pow => a.pow(&b),
            }
        }
    };
    memo.insert(e.addr(), r.clone());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::Dims;

    #[test]
    fn annihilator_and_identity() {
        let dims = Dims::new(1, 1).unwrap();
        assert_eq!(simplify(&parse("0*sin(t1) + x1", dims).unwrap()).to_string(), "x1");
        assert_eq!(simplify(&parse("2*3", dims).unwrap()).to_string(), "6");
        assert_eq!(simplify(&parse("--x1 * 1 + 0", dims).unwrap()).to_string(), "x1");
        assert_eq!(simplify(&parse("0^3 + x1^1", dims).unwrap()).to_string(), "x1");
    }

    #[test]
    fn substitution_replaces_variables() {
        let dims = Dims::new(1, 1).unwrap();
        let e = parse("x1^2 + t1", dims).unwrap();
        let s = substitute(&e, &|v| (v == VariableId::x(0)).then(|| Expr::num(3.0)));
        assert_eq!(s.to_string(), "9+t1");
    }
}
