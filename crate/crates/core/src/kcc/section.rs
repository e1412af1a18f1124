use crate::exprlang::{evaluate, substitute, Bindings, Differentiator, Expr, VarKind, VariableId};
use crate::jetgeom::{JetPoint, PdeSystem};
use crate::kcc::{Invariant, KccSystem};
use crate::tensor::{DTensorValue, IndexSignature, Tensor};
use crate::{Dims, Error, Result};

/// Largest SODE residual a section may have before the Jacobi identity
/// refuses it.
pub const SOLUTION_TOLERANCE: f64 = 1e-8;

fn check_time_only(what: &str, dims: Dims, exprs: &[Expr]) -> Result<()> {
    if exprs.len() != dims.n {
        return Err(Error::Dimension(format!(
            "{what} needs {} components, got {}",
            dims.n,
            exprs.len()
        )));
    }
    for (i, e) in exprs.iter().enumerate() {
        if let Some(var) = e.vars().iter().find(|v| v.kind() != VarKind::Temporal || !v.in_bounds(dims)) {
            return Err(Error::invalid(format!(
                "{what} component {} may depend on t1..t{} only, found {var}",
                i + 1,
                dims.m
            )));
        }
    }
    Ok(())
}

/// First and second partial derivatives of time-only expressions.
#[derive(Clone, Debug)]
struct Jets {
    value: Vec<Expr>,
    first: Tensor<Expr>,
    second: Tensor<Expr>,
}

impl Jets {
    fn new(dims: Dims, value: Vec<Expr>) -> Self {
        let mut diff = Differentiator::new();
        let first = Tensor::from_fn(vec![dims.n, dims.m], |i| diff.d(&value[i[0]], VariableId::t(i[1])));
        let second = Tensor::from_fn(vec![dims.n, dims.m, dims.m], |i| {
            diff.d(first.get(&[i[0], i[1]]), VariableId::t(i[2]))
        });
        Jets { value, first, second }
    }

    fn eval(&self, b: &Bindings) -> Result<(Vec<f64>, Tensor<f64>, Tensor<f64>)> {
        let value = self.value.iter().map(|e| evaluate(e, b)).collect::<Result<Vec<_>, _>>()?;
        let first = self.first.data().iter().map(|e| evaluate(e, b)).collect::<Result<Vec<_>, _>>()?;
        let second = self.second.data().iter().map(|e| evaluate(e, b)).collect::<Result<Vec<_>, _>>()?;
        Ok((
            value,
            Tensor::from_vec(self.first.shape().to_vec(), first),
            Tensor::from_vec(self.second.shape().to_vec(), second),
        ))
    }
}

/// A map `t ↦ x^i(t)`, given in closed form.
#[derive(Clone, Debug)]
pub struct SectionMap {
    dims: Dims,
    jets: Jets,
}

impl SectionMap {
    pub fn new(dims: Dims, x: Vec<Expr>) -> Result<Self> {
        check_time_only("section", dims, &x)?;
        Ok(SectionMap {
            dims,
            jets: Jets::new(dims, x),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn components(&self) -> &[Expr] {
        &self.jets.value
    }

    /// `∂x^i/∂t^α`, laid out `[i, α]`.
    pub fn velocities(&self) -> &Tensor<Expr> {
        &self.jets.first
    }

    /// `∂²x^i/∂t^α∂t^β`, laid out `[i, α, β]`.
    pub fn accelerations(&self) -> &Tensor<Expr> {
        &self.jets.second
    }

    fn time_bindings(&self, t: &[f64]) -> Result<Bindings> {
        time_bindings(self.dims, t)
    }

    /// The prolongation `(t, x(t), ∂x/∂t(t))`.
    pub fn prolongation_at(&self, t: &[f64]) -> Result<JetPoint> {
        let b = self.time_bindings(t)?;
        let (x, v, _) = self.jets.eval(&b)?;
        let m = self.dims.m;
        let v = v.data().chunks(m).map(<[f64]>::to_vec).collect();
        JetPoint::new(self.dims, t.to_vec(), x, v)
    }

    /// `e(t, x(t), ∂x/∂t(t))` as an expression in `t`.
    pub fn pull_back(&self, e: &Expr) -> Expr {
        substitute(e, &|var| match var {
            VariableId::Spatial(i) => Some(self.jets.value[i as usize].clone()),
            VariableId::Velocity { i, alpha } => Some(self.jets.first.get(&[i as usize, alpha as usize]).clone()),
            VariableId::Temporal(_) => None,
        })
    }
}

fn time_bindings(dims: Dims, t: &[f64]) -> Result<Bindings> {
    if t.len() != dims.m {
        return Err(Error::Dimension(format!(
            "time point needs {} coordinates, got {}",
            dims.m,
            t.len()
        )));
    }
    let mut b = Bindings::new(dims);
    for (a, &val) in t.iter().enumerate() {
        b.set(VariableId::t(a), val)?;
    }
    Ok(b)
}

/// A variation field `ξ^i(t)`, given in closed form.
#[derive(Clone, Debug)]
pub struct VariationField {
    dims: Dims,
    jets: Jets,
}

impl VariationField {
    pub fn new(dims: Dims, xi: Vec<Expr>) -> Result<Self> {
        check_time_only("variation", dims, &xi)?;
        Ok(VariationField {
            dims,
            jets: Jets::new(dims, xi),
        })
    }

    pub fn zero(dims: Dims) -> Self {
        VariationField {
            dims,
            jets: Jets::new(dims, vec![Expr::zero(); dims.n]),
        }
    }

    pub fn components(&self) -> &[Expr] {
        &self.jets.value
    }
}

fn check_dims(a: Dims, b: Dims) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!(
            "dimension mismatch: (m={}, n={}) vs (m={}, n={})",
            a.m, a.n, b.m, b.n
        )));
    }
    Ok(())
}

fn eval_all(exprs: &[Expr], b: &Bindings) -> Result<Vec<f64>> {
    exprs.iter().map(|e| evaluate(e, b).map_err(Error::from)).collect()
}

/// Values of `Γ^μ_{αβ}` of the temporal metric at `b`, laid out `[μ, α, β]`.
fn temporal_christoffels(kcc: &KccSystem, b: &Bindings) -> Result<Tensor<f64>> {
    let c = kcc.metric().christoffels();
    Ok(Tensor::from_vec(c.shape().to_vec(), eval_all(c.data(), b)?))
}

/// `∇T^(i)_(α)/∂t^β = ∂T^(i)_(α)/∂t^β + N^(i)_(α)r T^(r)_(β) − H^μ_{αβ}T^(i)_(μ)`
/// along `σ`, where `∂/∂t^β` is the total derivative along the prolongation.
/// `field` is laid out `[i, α]`.
pub fn covariant_derivative_section(
    kcc: &KccSystem,
    field: &Tensor<Expr>,
    sigma: &SectionMap,
    t: &[f64],
) -> Result<DTensorValue> {
    let dims = kcc.dims();
    check_dims(dims, sigma.dims())?;
    if field.shape() != [dims.n, dims.m] {
        return Err(Error::Dimension(format!(
            "d-tensor field needs shape [{}, {}], got {:?}",
            dims.n,
            dims.m,
            field.shape()
        )));
    }
    let p = sigma.prolongation_at(t)?;
    let b = p.bindings();
    kcc.metric().check_nonsingular(&b)?;
    let tb = sigma.time_bindings(t)?;
    let tv = Tensor::from_vec(vec![dims.n, dims.m], eval_all(field.data(), &b)?);
    let nv = eval_all(kcc.connection().components().data(), &b)?;
    let hc = temporal_christoffels(kcc, &b)?;
    let mut diff = Differentiator::new();
    let mut out = Vec::with_capacity(dims.n * dims.m * dims.m);
    for i in 0..dims.n {
        for a in 0..dims.m {
            let along = sigma.pull_back(field.get(&[i, a]));
            for be in 0..dims.m {
                let mut s = evaluate(&diff.d(&along, VariableId::t(be)), &tb)?;
                for r in 0..dims.n {
                    s += nv[(i * dims.m + a) * dims.n + r] * tv.get(&[r, be]);
                }
                for mu in 0..dims.m {
                    s -= hc.get(&[mu, a, be]) * tv.get(&[i, mu]);
                }
                out.push(s);
            }
        }
    }
    DTensorValue::new(IndexSignature::first_invariant(), dims, out)
}

/// `∇ξ^i/∂t^α = ∂ξ^i/∂t^α + N^(i)_(α)r ξ^r` along `σ`.
pub fn covariant_derivative_variation(
    kcc: &KccSystem,
    xi: &VariationField,
    sigma: &SectionMap,
    t: &[f64],
) -> Result<DTensorValue> {
    let dims = kcc.dims();
    check_dims(dims, sigma.dims())?;
    check_dims(dims, xi.dims)?;
    let p = sigma.prolongation_at(t)?;
    let b = p.bindings();
    kcc.metric().check_nonsingular(&b)?;
    let (xv, dxv, _) = xi.jets.eval(&sigma.time_bindings(t)?)?;
    let nv = eval_all(kcc.connection().components().data(), &b)?;
    let w = first_covariant(dims, &xv, &dxv, &nv);
    DTensorValue::new(IndexSignature::liouville(), dims, w.into_data())
}

fn first_covariant(dims: Dims, xv: &[f64], dxv: &Tensor<f64>, nv: &[f64]) -> Tensor<f64> {
    Tensor::from_fn(vec![dims.n, dims.m], |idx| {
        let (i, a) = (idx[0], idx[1]);
        dxv.get(&[i, a])
            + (0..dims.n)
                .map(|r| nv[(i * dims.m + a) * dims.n + r] * xv[r])
                .sum::<f64>()
    })
}

/// `∂²x^i/∂t^α∂t^β + F^(i)_(α)β` on the prolongation of `σ`, laid out `[i, α, β]`.
pub fn sode_residual(f: &PdeSystem, sigma: &SectionMap, t: &[f64]) -> Result<Tensor<f64>> {
    let dims = f.dims();
    check_dims(dims, sigma.dims())?;
    let p = sigma.prolongation_at(t)?;
    let b = p.bindings();
    let (_, _, acc) = sigma.jets.eval(&sigma.time_bindings(t)?)?;
    let fv = eval_all(f.components().data(), &b)?;
    Ok(Tensor::from_vec(
        acc.shape().to_vec(),
        acc.data().iter().zip(&fv).map(|(a, f)| a + f).collect(),
    ))
}

/// Residual of the variational equations
/// `∂²ξ^i/∂t^α∂t^β + ∂F^(i)_(α)β/∂x^k ξ^k + ∂F^(i)_(α)β/∂x^r_μ ∂ξ^r/∂t^μ`,
/// laid out `[i, α, β]`.
pub fn variational_residual(
    f: &PdeSystem,
    sigma: &SectionMap,
    xi: &VariationField,
    t: &[f64],
) -> Result<Tensor<f64>> {
    let dims = f.dims();
    check_dims(dims, sigma.dims())?;
    check_dims(dims, xi.dims)?;
    let b = sigma.prolongation_at(t)?.bindings();
    let (xv, dxv, ddxv) = xi.jets.eval(&sigma.time_bindings(t)?)?;
    let mut diff = Differentiator::new();
    let mut out = ddxv;
    for idx in f.components().indices() {
        let e = f.get(idx[0], idx[1], idx[2]);
        let mut s = 0.0;
        for k in 0..dims.n {
            s += evaluate(&diff.d(e, VariableId::x(k)), &b)? * xv[k];
            for mu in 0..dims.m {
                s += evaluate(&diff.d(e, VariableId::v(k, mu)), &b)? * dxv.get(&[k, mu]);
            }
        }
        *out.get_mut(&idx) += s;
    }
    Ok(out)
}

/// h-trace of the variational equations,
/// `h^{αβ}∂²ξ^i/∂t^α∂t^β + ∂F^i/∂x^k ξ^k + ∂F^i/∂x^r_μ ∂ξ^r/∂t^μ`.
pub fn trace_variational_residual(
    kcc: &KccSystem,
    sigma: &SectionMap,
    xi: &VariationField,
    t: &[f64],
) -> Result<Vec<f64>> {
    let dims = kcc.dims();
    let full = variational_residual(kcc.system(), sigma, xi, t)?;
    let b = sigma.prolongation_at(t)?.bindings();
    kcc.metric().check_nonsingular(&b)?;
    let hinv = eval_all(kcc.metric().inverse().data(), &b)?;
    Ok((0..dims.n)
        .map(|i| {
            let mut s = 0.0;
            for a in 0..dims.m {
                for be in 0..dims.m {
                    s += hinv[a * dims.m + be] * full.get(&[i, a, be]);
                }
            }
            s
        })
        .collect())
}

/// `h^{αβ} ∇/∂t^β[∇ξ^i/∂t^α] − P^i_r ξ^r` along a solution `σ`.
///
/// Total derivatives of jet functions use the system to replace second
/// derivatives of the section: `D_β = ∂_{t^β} + x^k_β ∂_{x^k} − F^(k)_(γ)β ∂_{x^k_γ}`.
/// Errors with [`Error::Precondition`] when `σ` misses the system by more
/// than [`SOLUTION_TOLERANCE`] at `t`.
pub fn jacobi_identity_residual(
    kcc: &KccSystem,
    sigma: &SectionMap,
    xi: &VariationField,
    t: &[f64],
) -> Result<Vec<f64>> {
    let dims = kcc.dims();
    let Dims { m, n } = dims;
    check_dims(dims, xi.dims)?;
    let sode = sode_residual(kcc.system(), sigma, t)?;
    let worst = sode.data().iter().fold(0.0f64, |w, r| w.max(r.abs()));
    if !(worst <= SOLUTION_TOLERANCE) {
        return Err(Error::precondition(format!(
            "section is not a solution of the system at t = {t:?}: max |SODE residual| = {worst:.3e} exceeds {SOLUTION_TOLERANCE:e}"
        )));
    }
    let p = sigma.prolongation_at(t)?;
    let b = p.bindings();
    kcc.metric().check_nonsingular(&b)?;
    let (xv, dxv, ddxv) = xi.jets.eval(&sigma.time_bindings(t)?)?;

    let nc = kcc.connection();
    let nv = eval_all(nc.components().data(), &b)?;
    let fv = Tensor::from_vec(vec![n, m, m], eval_all(kcc.system().components().data(), &b)?);
    let hc = temporal_christoffels(kcc, &b)?;
    let hinv = eval_all(kcc.metric().inverse().data(), &b)?;
    let pv = kcc.evaluate(Invariant::P, &p)?;

    // D_β N^(i)_(α)r
    let mut dn = Tensor::filled(vec![n, m, n, m], 0.0);
    for idx in nc.components().indices() {
        let e = nc.get(idx[0], idx[1], idx[2]);
        let dt: Vec<f64> = (0..m).map(|g| evaluate(&kcc.d(e, VariableId::t(g)), &b)).collect::<Result<_, _>>()?;
        let dx: Vec<f64> = (0..n).map(|k| evaluate(&kcc.d(e, VariableId::x(k)), &b)).collect::<Result<_, _>>()?;
        let dv = Tensor::from_vec(
            vec![n, m],
            (0..n * m)
                .map(|kg| evaluate(&kcc.d(e, VariableId::v(kg / m, kg % m)), &b))
                .collect::<Result<Vec<_>, _>>()?,
        );
        for be in 0..m {
            let mut s = dt[be];
            for k in 0..n {
                s += p.v[k][be] * dx[k];
                for g in 0..m {
                    s -= fv.get(&[k, g, be]) * dv.get(&[k, g]);
                }
            }
            *dn.get_mut(&[idx[0], idx[1], idx[2], be]) = s;
        }
    }

    let w = first_covariant(dims, &xv, &dxv, &nv);
    let nat = |i: usize, a: usize, r: usize| nv[(i * m + a) * n + r];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        for a in 0..m {
            for be in 0..m {
                let weight = hinv[a * m + be];
                if weight == 0.0 {
                    continue;
                }
                let mut dw = *ddxv.get(&[i, a, be]);
                for r in 0..n {
                    dw += dn.get(&[i, a, r, be]) * xv[r] + nat(i, a, r) * dxv.get(&[r, be]);
                }
                let mut cov = dw;
                for r in 0..n {
                    cov += nat(i, a, r) * w.get(&[r, be]);
                }
                for mu in 0..m {
                    cov -= hc.get(&[mu, a, be]) * w.get(&[i, mu]);
                }
                s += weight * cov;
            }
        }
        for r in 0..n {
            s -= pv.values.get(&[i, r]) * xv[r];
        }
        out.push(s);
    }
    Ok(out)
}
