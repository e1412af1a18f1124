use std::collections::HashMap;

use super::ast::{BinaryOp, Expr, Node, UnaryOp, VariableId};

/// Exact partial derivative of `e` with respect to `var`.
///
/// Jet coordinates are independent, so anything `e` does not mention
/// differentiates to a structural zero. The result is built through the
/// simplifying constructors.
pub fn differentiate(e: &Expr, var: VariableId) -> Expr {
    let mut memo = HashMap::new();
    diff_memo(e, var, &mut memo)
}

/// Derivative with a caller-owned memo, for repeated differentiation of
/// expressions that share subtrees.
pub(crate) fn diff_memo(e: &Expr, var: VariableId, memo: &mut HashMap<usize, Expr>) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    if let Some(d) = memo.get(&e.addr()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Num(_) | Node::Const(_) => Expr::zero(),
        Node::Var(v) => {
            if *v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Unary(op, u) => {
            let du = diff_memo(u, var, memo);
            match op {
                UnaryOp::Neg => du.neg(),
                UnaryOp::Sin => Expr::apply(UnaryOp::Cos, u).mul(&du),
                UnaryOp::Cos => Expr::apply(UnaryOp::Sin, u).mul(&du).neg(),
                UnaryOp::Tan => du.div(&Expr::apply(UnaryOp::Cos, u).powi(2)),
                UnaryOp::Exp => e.mul(&du),
                UnaryOp::Log => du.div(u),
                UnaryOp::Sqrt => du.div(&Expr::num(2.0).mul(e)),
                UnaryOp::Sinh => Expr::apply(UnaryOp::Cosh, u).mul(&du),
                UnaryOp::Cosh => Expr::apply(UnaryOp::Sinh, u).mul(&du),
            }
        }
        Node::Binary(op, a, b) => {
            let da = diff_memo(a, var, memo);
            let db = diff_memo(b, var, memo);
            match op {
                BinaryOp::Add => da.add(&db),
                BinaryOp::Sub => da.sub(&db),
                BinaryOp::Mul => da.mul(b).add(&a.mul(&db)),
                BinaryOp::Div => {
                    if db.is_zero() {
                        da.div(b)
                    } else {
                        da.div(b).sub(&a.mul(&db).div(&b.powi(2)))
                    }
                }
                BinaryOp::Pow => {
                    if !b.depends_on(var) {
                        let lowered = match b.as_num() {
                            Some(k) => Expr::num(k - 1.0),
                            None => b.sub(&Expr::one()),
                        };
                        b.mul(&a.pow(&lowered)).mul(&da)
                    } else {
                        let log_a = Expr::apply(UnaryOp::Log, a);
                        e.mul(&db.mul(&log_a).add(&b.mul(&da).div(a)))
                    }
                }
            }
        }
    };
    memo.insert(e.addr(), d.clone());
    d
}

/// Differentiation with a cache shared across calls and variables.
///
/// Higher-order derivative towers reuse lower-order results, which keeps the
/// derived DAGs small when many mixed partials of the same expression are
/// needed.
#[derive(Default)]
pub struct Differentiator {
    memo: HashMap<VariableId, HashMap<usize, Expr>>,
    // Keeps every differentiated expression alive so cached addresses stay valid.
    pinned: Vec<Expr>,
}

impl Differentiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn d(&mut self, e: &Expr, var: VariableId) -> Expr {
        self.pinned.push(e.clone());
        let memo = self.memo.entry(var).or_default();
        let out = diff_memo(e, var, memo);
        self.pinned.push(out.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::{evaluate, parse, Bindings};
    use crate::Dims;

    fn dims() -> Dims {
        Dims::new(2, 1).unwrap()
    }

    #[test]
    fn power_rule() {
        let e = parse("v1_1^2", dims()).unwrap();
        assert_eq!(differentiate(&e, VariableId::v(0, 0)).to_string(), "2*v1_1");
    }

    #[test]
    fn coordinates_are_independent() {
        let e = parse("x1", dims()).unwrap();
        assert!(differentiate(&e, VariableId::t(0)).is_zero());
    }

    #[test]
    fn matches_central_difference() {
        let e = parse("sin(x1)*v1_2", dims()).unwrap();
        let d = differentiate(&e, VariableId::x(0));
        let at = |x: f64| Bindings::new(dims()).with(VariableId::x(0), x).with(VariableId::v(0, 1), 2.0);
        let h = 1e-5;
        let fd = (evaluate(&e, &at(0.7 + h)).unwrap() - evaluate(&e, &at(0.7 - h)).unwrap()) / (2.0 * h);
        let exact = evaluate(&d, &at(0.7)).unwrap();
        assert!(((exact - fd) / exact).abs() < 1e-7, "{exact} vs {fd}");
    }

    #[test]
    fn general_power_and_functions() {
        let dims = Dims::new(1, 1).unwrap();
        let e = parse("x1^x1 + tan(x1) + sqrt(x1) + log(x1) + sinh(x1)*cosh(x1) + exp(-x1)", dims).unwrap();
        let d = differentiate(&e, VariableId::x(0));
        let x = 0.8;
        let b = Bindings::new(dims).with(VariableId::x(0), x);
        let expect = x.powf(x) * (x.ln() + 1.0) + 1.0 / x.cos().powi(2) + 0.5 / x.sqrt() + 1.0 / x
            + x.cosh().powi(2)
            + x.sinh().powi(2)
            - (-x).exp();
        assert!((evaluate(&d, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn shared_cache_agrees_with_plain_derivative() {
        let e = parse("sin(x1*v1_1)*v1_2^3", dims()).unwrap();
        let mut dd = Differentiator::new();
        let first = dd.d(&e, VariableId::v(0, 0));
        let a = dd.d(&first, VariableId::x(0));
        let b = differentiate(&differentiate(&e, VariableId::v(0, 0)), VariableId::x(0));
        let bind = Bindings::new(dims())
            .with(VariableId::x(0), 0.3)
            .with(VariableId::v(0, 0), -1.1)
            .with(VariableId::v(0, 1), 0.6);
        assert_eq!(evaluate(&a, &bind).unwrap(), evaluate(&b, &bind).unwrap());
    }
}
