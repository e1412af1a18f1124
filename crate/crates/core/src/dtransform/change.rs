use nalgebra::DMatrix;
use rand::Rng;

use crate::exprlang::{evaluate, Bindings, Differentiator, Expr, Substitution, UnaryOp, VarKind, VariableId};
use crate::jetgeom::JetPoint;
use crate::sampling;
use crate::tensor::Tensor;
use crate::{Dims, Error, Result};

/// Jacobians this close to singular are rejected.
pub const JACOBIAN_TOLERANCE: f64 = 1e-10;
/// Forward-then-inverse must return sampled points to within this.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-8;

/// A change of jet coordinates `t̃(t)`, `x̃(x)` with user-supplied inverses
/// `t(t̃)`, `x(x̃)`. Inverse maps are written in the same variable names
/// (`t1`, `x1`, ...) standing for the new coordinates.
#[derive(Clone, Debug)]
pub struct CoordinateChange {
    dims: Dims,
    t_forward: Vec<Expr>,
    x_forward: Vec<Expr>,
    t_inverse: Vec<Expr>,
    x_inverse: Vec<Expr>,
    // ∂t̃^α/∂t^β and ∂²t̃^α/∂t^β∂t^γ in old coordinates
    jt: Tensor<Expr>,
    ht: Tensor<Expr>,
    jx: Tensor<Expr>,
    hx: Tensor<Expr>,
    // ∂t^β/∂t̃^α and ∂²t^γ/∂t̃^α∂t̃^β in new coordinates
    jt_inv: Tensor<Expr>,
    ht_inv: Tensor<Expr>,
    jx_inv: Tensor<Expr>,
}

fn check_maps(what: &str, kind: VarKind, len: usize, dims: Dims, maps: &[Expr]) -> Result<()> {
    if maps.len() != len {
        return Err(Error::Dimension(format!(
            "{what} needs {len} expressions, got {}",
            maps.len()
        )));
    }
    for (k, e) in maps.iter().enumerate() {
        if let Some(var) = e.vars().iter().find(|v| v.kind() != kind || !v.in_bounds(dims)) {
            return Err(Error::invalid(format!(
                "{what} component {} must not depend on {var}",
                k + 1
            )));
        }
    }
    Ok(())
}

fn derivatives(
    maps: &[Expr],
    coord: fn(usize) -> VariableId,
    diff: &mut Differentiator,
) -> (Tensor<Expr>, Tensor<Expr>) {
    let d = maps.len();
    let j = Tensor::from_fn(vec![d, d], |i| diff.d(&maps[i[0]], coord(i[1])));
    let h = Tensor::from_fn(vec![d, d, d], |i| diff.d(j.get(&[i[0], i[1]]), coord(i[2])));
    (j, h)
}

fn eval_tensor(t: &Tensor<Expr>, b: &Bindings) -> Result<Tensor<f64>> {
    let data = t
        .data()
        .iter()
        .map(|e| evaluate(e, b).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tensor::from_vec(t.shape().to_vec(), data))
}

fn eval_vec(v: &[Expr], b: &Bindings) -> Result<Vec<f64>> {
    v.iter().map(|e| evaluate(e, b).map_err(Error::from)).collect()
}

fn to_matrix(t: &Tensor<f64>) -> DMatrix<f64> {
    let d = t.shape()[0];
    DMatrix::from_row_slice(d, d, t.data())
}

fn from_matrix(m: &DMatrix<f64>) -> Tensor<f64> {
    Tensor::from_fn(vec![m.nrows(), m.ncols()], |i| m[(i[0], i[1])])
}

fn invert(what: &str, t: &Tensor<f64>) -> Result<Tensor<f64>> {
    let m = to_matrix(t);
    let det = m.determinant();
    if !(det.abs() > JACOBIAN_TOLERANCE) {
        return Err(Error::Singular {
            what: what.to_string(),
            det,
        });
    }
    let inv = m.try_inverse().ok_or_else(|| Error::Singular {
        what: what.to_string(),
        det,
    })?;
    Ok(from_matrix(&inv))
}

/// Numeric Jacobian data of a change at an old-coordinate point, built from
/// the forward maps alone.
#[derive(Clone, Debug)]
pub struct Jacobians {
    /// `∂t̃^α/∂t^β`, `[α, β]`.
    pub jt: Tensor<f64>,
    /// `∂t^β/∂t̃^α`, `[β, α]`.
    pub bt: Tensor<f64>,
    /// `∂²t^γ/∂t̃^α∂t̃^β`, `[γ, α, β]`.
    pub d2t: Tensor<f64>,
    /// `∂x̃^i/∂x^j`, `[i, j]`.
    pub ax: Tensor<f64>,
    /// `∂x^j/∂x̃^i`, `[j, i]`.
    pub cx: Tensor<f64>,
    /// `∂²x̃^i/∂x^j∂x^k`, `[i, j, k]`.
    pub dax: Tensor<f64>,
}

impl CoordinateChange {
    pub fn new(
        dims: Dims,
        t_forward: Vec<Expr>,
        x_forward: Vec<Expr>,
        t_inverse: Vec<Expr>,
        x_inverse: Vec<Expr>,
    ) -> Result<Self> {
        check_maps("t_forward", VarKind::Temporal, dims.m, dims, &t_forward)?;
        check_maps("x_forward", VarKind::Spatial, dims.n, dims, &x_forward)?;
        check_maps("t_inverse", VarKind::Temporal, dims.m, dims, &t_inverse)?;
        check_maps("x_inverse", VarKind::Spatial, dims.n, dims, &x_inverse)?;
        let mut diff = Differentiator::new();
        let (jt, ht) = derivatives(&t_forward, VariableId::t, &mut diff);
        let (jx, hx) = derivatives(&x_forward, VariableId::x, &mut diff);
        let (jt_inv, ht_inv) = derivatives(&t_inverse, VariableId::t, &mut diff);
        let (jx_inv, _) = derivatives(&x_inverse, VariableId::x, &mut diff);
        Ok(CoordinateChange {
            dims,
            t_forward,
            x_forward,
            t_inverse,
            x_inverse,
            jt,
            ht,
            jx,
            hx,
            jt_inv,
            ht_inv,
            jx_inv,
        })
    }

    pub fn identity(dims: Dims) -> Self {
        let t: Vec<Expr> = (0..dims.m).map(crate::exprlang::t).collect();
        let x: Vec<Expr> = (0..dims.n).map(crate::exprlang::x).collect();
        Self::new(dims, t.clone(), x.clone(), t, x).expect("identity change is valid")
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn t_forward(&self) -> &[Expr] {
        &self.t_forward
    }

    pub fn x_forward(&self) -> &[Expr] {
        &self.x_forward
    }

    pub fn t_inverse(&self) -> &[Expr] {
        &self.t_inverse
    }

    pub fn x_inverse(&self) -> &[Expr] {
        &self.x_inverse
    }

    /// The inverse change.
    pub fn inverse(&self) -> CoordinateChange {
        Self::new(
            self.dims,
            self.t_inverse.clone(),
            self.x_inverse.clone(),
            self.t_forward.clone(),
            self.x_forward.clone(),
        )
        .expect("inverse of a valid change is valid")
    }

    /// `then ∘ self`: first `self`, then `then`.
    pub fn compose(&self, then: &CoordinateChange) -> Result<CoordinateChange> {
        if self.dims != then.dims {
            return Err(Error::Dimension("cannot compose changes of different dimensions".into()));
        }
        let after = |outer: &[Expr], inner: &[Expr], kind: VarKind| -> Vec<Expr> {
            let mut s = Substitution::new(|v| match (v, kind) {
                (VariableId::Temporal(a), VarKind::Temporal) => Some(inner[a as usize].clone()),
                (VariableId::Spatial(i), VarKind::Spatial) => Some(inner[i as usize].clone()),
                _ => None,
            });
            outer.iter().map(|e| s.apply(e)).collect()
        };
        Self::new(
            self.dims,
            after(&then.t_forward, &self.t_forward, VarKind::Temporal),
            after(&then.x_forward, &self.x_forward, VarKind::Spatial),
            after(&self.t_inverse, &then.t_inverse, VarKind::Temporal),
            after(&self.x_inverse, &then.x_inverse, VarKind::Spatial),
        )
    }

    /// Symbolic `∂t̃^α/∂t^β`, `∂²t̃^α/∂t^β∂t^γ`, `∂x̃^i/∂x^j`, `∂²x̃^i/∂x^j∂x^k`
    /// in old coordinates.
    pub(crate) fn forward_derivatives(&self) -> (&Tensor<Expr>, &Tensor<Expr>, &Tensor<Expr>, &Tensor<Expr>) {
        (&self.jt, &self.ht, &self.jx, &self.hx)
    }

    /// Symbolic `∂t^β/∂t̃^α`, `∂²t^γ/∂t̃^α∂t̃^β` and `∂x^j/∂x̃^i` in new
    /// coordinates.
    pub(crate) fn inverse_derivatives(&self) -> (&Tensor<Expr>, &Tensor<Expr>, &Tensor<Expr>) {
        (&self.jt_inv, &self.ht_inv, &self.jx_inv)
    }

    /// `(t̃(t), x̃(x))`.
    pub fn map_base(&self, p: &JetPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = p.bindings();
        Ok((eval_vec(&self.t_forward, &b)?, eval_vec(&self.x_forward, &b)?))
    }

    /// Numeric Jacobians at the old-coordinate point `p`.
    pub fn jacobians(&self, p: &JetPoint) -> Result<Jacobians> {
        let b = p.bindings();
        let jt = eval_tensor(&self.jt, &b)?;
        let ht = eval_tensor(&self.ht, &b)?;
        let ax = eval_tensor(&self.jx, &b)?;
        let dax = eval_tensor(&self.hx, &b)?;
        let bt = invert("temporal Jacobian", &jt)?;
        let cx = invert("spatial Jacobian", &ax)?;
        let m = self.dims.m;
        // ∂²t^γ/∂t̃^α∂t̃^β = −B^γ_δ ∂²t̃^δ/∂t^ε∂t^ζ B^ε_α B^ζ_β
        let d2t = Tensor::from_fn(vec![m, m, m], |idx| {
            let (g, a, be) = (idx[0], idx[1], idx[2]);
            let mut s = 0.0;
            for d in 0..m {
                for e in 0..m {
                    for z in 0..m {
                        s += bt.get(&[g, d]) * ht.get(&[d, e, z]) * bt.get(&[e, a]) * bt.get(&[z, be]);
                    }
                }
            }
            -s
        });
        Ok(Jacobians {
            jt,
            bt,
            d2t,
            ax,
            cx,
            dax,
        })
    }

    /// Checks invertibility of both Jacobians and the forward/inverse round
    /// trip at `p`.
    pub fn validate_at(&self, p: &JetPoint) -> Result<()> {
        self.jacobians(p)?;
        let (t_new, x_new) = self.map_base(p)?;
        let mut b = Bindings::new(self.dims);
        for (a, &v) in t_new.iter().enumerate() {
            b.set(VariableId::t(a), v)?;
        }
        for (i, &v) in x_new.iter().enumerate() {
            b.set(VariableId::x(i), v)?;
        }
        let t_back = eval_vec(&self.t_inverse, &b)?;
        let x_back = eval_vec(&self.x_inverse, &b)?;
        let worst = t_back
            .iter()
            .zip(&p.t)
            .chain(x_back.iter().zip(&p.x))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !(worst <= ROUND_TRIP_TOLERANCE) {
            return Err(Error::invalid(format!(
                "inverse maps do not invert the forward maps at t={:?}, x={:?} (round-trip error {worst:.3e})",
                p.t, p.x
            )));
        }
        Ok(())
    }

    /// A random diffeomorphism built from an affine map, an exponential
    /// stretch of the first coordinate and triangular sine shears, all with
    /// closed-form inverses.
    pub fn random(dims: Dims, seed: u64) -> Self {
        let mut rng = sampling::rng(seed, u64::MAX);
        let t = random_map(dims.m, &mut rng, VariableId::t);
        let x = random_map(dims.n, &mut rng, VariableId::x);
        Self::new(dims, t.0, x.0, t.1, x.1).expect("random change is valid")
    }
}

fn random_map(
    d: usize,
    rng: &mut impl Rng,
    coord: fn(usize) -> VariableId,
) -> (Vec<Expr>, Vec<Expr>) {
    let (l, l_inv) = loop {
        let l: DMatrix<f64> = DMatrix::from_fn(d, d, |i, j| {
            let noise: f64 = rng.random_range(-0.25..0.25);
            if i == j {
                1.0 + noise
            } else {
                noise
            }
        });
        if l.determinant().abs() > 0.3 {
            let inv = l.clone().try_inverse().expect("well-conditioned");
            break (l, inv);
        }
    };
    let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-0.2..0.2)).collect();
    let stretch: f64 = rng.random_range(0.2..0.5);
    let shears: Vec<f64> = (0..d).map(|_| rng.random_range(-0.4..0.4)).collect();
    let var = |k: usize| Expr::var(coord(k));
    let num = Expr::num;

    // y = L u + b
    let y: Vec<Expr> = (0..d)
        .map(|i| Expr::sum_owned((0..d).map(|j| num(l[(i, j)]).mul(&var(j))).chain([num(shift[i])])))
        .collect();
    // w_0 = (exp(c y_0) − 1)/c, w_k = y_k + s_k sin(y_{k−1})
    let forward: Vec<Expr> = (0..d)
        .map(|k| {
            if k == 0 {
                Expr::apply(UnaryOp::Exp, &num(stretch).mul(&y[0]))
                    .sub(&Expr::one())
                    .div(&num(stretch))
            } else {
                y[k].add(&num(shears[k]).mul(&Expr::apply(UnaryOp::Sin, &y[k - 1])))
            }
        })
        .collect();
    let mut y_back: Vec<Expr> = Vec::with_capacity(d);
    for k in 0..d {
        let e = if k == 0 {
            Expr::apply(UnaryOp::Log, &Expr::one().add(&num(stretch).mul(&var(0)))).div(&num(stretch))
        } else {
            var(k).sub(&num(shears[k]).mul(&Expr::apply(UnaryOp::Sin, &y_back[k - 1])))
        };
        y_back.push(e);
    }
    let inverse: Vec<Expr> = (0..d)
        .map(|i| {
            Expr::sum_owned(
                (0..d).map(|j| num(l_inv[(i, j)]).mul(&y_back[j].sub(&num(shift[j])))),
            )
        })
        .collect();
    (forward, inverse)
}
