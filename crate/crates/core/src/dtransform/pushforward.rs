use crate::dtransform::CoordinateChange;
use crate::exprlang::{v, Expr, Substitution, VariableId};
use crate::jetgeom::{MetricField, MetricKind, PdeSystem};
use crate::kcc::SectionMap;
use crate::tensor::Tensor;
use crate::{Dims, Error, Result};

fn check_dims(cc: &CoordinateChange, dims: Dims) -> Result<()> {
    if cc.dims() != dims {
        return Err(Error::Dimension(format!(
            "coordinate change is for (m={}, n={}), object for (m={}, n={})",
            cc.dims().m,
            cc.dims().n,
            dims.m,
            dims.n
        )));
    }
    Ok(())
}

/// Substitutes old base coordinates by the inverse maps.
fn base_substitution(cc: &CoordinateChange) -> Substitution<'_> {
    Substitution::new(move |var| match var {
        VariableId::Temporal(a) => Some(cc.t_inverse()[a as usize].clone()),
        VariableId::Spatial(i) => Some(cc.x_inverse()[i as usize].clone()),
        VariableId::Velocity { .. } => None,
    })
}

/// `g̃_{ab} = g_{cd}(u(ũ)) ∂u^c/∂ũ^a ∂u^d/∂ũ^b`.
pub fn pushforward_metric(cc: &CoordinateChange, g: &MetricField) -> Result<MetricField> {
    let (jt_inv, _, jx_inv) = cc.inverse_derivatives();
    let (jac, d) = match g.kind() {
        MetricKind::Temporal => (jt_inv, cc.dims().m),
        MetricKind::Spatial => (jx_inv, cc.dims().n),
    };
    if g.dim() != d {
        return Err(Error::Dimension(format!(
            "{} metric has dimension {}, coordinate change expects {d}",
            g.kind().name(),
            g.dim()
        )));
    }
    let mut sub = base_substitution(cc);
    let old: Vec<Expr> = g.components().data().iter().map(|e| sub.apply(e)).collect();
    let mut rows = vec![vec![Expr::zero(); d]; d];
    for a in 0..d {
        for b in a..d {
            let mut terms = Vec::new();
            for c in 0..d {
                for e in 0..d {
                    let gce = &old[c * d + e];
                    if gce.is_zero() {
                        continue;
                    }
                    terms.push(gce.mul(jac.get(&[c, a])).mul(jac.get(&[e, b])));
                }
            }
            let s = Expr::sum_owned(terms);
            rows[b][a] = s.clone();
            rows[a][b] = s;
        }
    }
    MetricField::new(g.kind(), rows)
}

/// The system and temporal metric in the new coordinates:
///
/// `F̃^(i)_(α)β = ∂x̃^i/∂x^j F^(j)_(γ)δ B^γ_α B^δ_β − ∂²x̃^i/∂x^j∂x^k x^j_γ x^k_δ B^γ_α B^δ_β
///  − ∂x̃^i/∂x^j x^j_γ ∂²t^γ/∂t̃^α∂t̃^β` with `B = ∂t/∂t̃`, all old quantities
/// expressed through the inverse maps.
pub fn pushforward_system(
    cc: &CoordinateChange,
    f: &PdeSystem,
    h: &MetricField,
) -> Result<(PdeSystem, MetricField)> {
    let dims = f.dims();
    check_dims(cc, dims)?;
    let Dims { m, n } = dims;
    let h_new = pushforward_metric(cc, h)?;
    if h.kind() != MetricKind::Temporal {
        return Err(Error::invalid("pushforward_system needs the temporal metric"));
    }
    let (jt, _, jx, hx) = cc.forward_derivatives();
    let (bt, d2t, cx) = cc.inverse_derivatives();

    let mut base = base_substitution(cc);
    let jt_old: Vec<Expr> = jt.data().iter().map(|e| base.apply(e)).collect();
    let a: Vec<Expr> = jx.data().iter().map(|e| base.apply(e)).collect();
    let da: Vec<Expr> = hx.data().iter().map(|e| base.apply(e)).collect();
    let a_at = |i: usize, j: usize| &a[i * n + j];
    let da_at = |i: usize, j: usize, k: usize| &da[(i * n + j) * n + k];

    // x^j_γ = ∂x^j/∂x̃^k x̃^k_δ ∂t̃^δ/∂t^γ
    let v_old = Tensor::from_fn(vec![n, m], |idx| {
        let (j, g) = (idx[0], idx[1]);
        let mut terms = Vec::new();
        for k in 0..n {
            let c = cx.get(&[j, k]);
            if c.is_zero() {
                continue;
            }
            for d in 0..m {
                let jtd = &jt_old[d * m + g];
                if !jtd.is_zero() {
                    terms.push(c.mul(&v(k, d)).mul(jtd));
                }
            }
        }
        Expr::sum_owned(terms)
    });
    let mut full = Substitution::new(|var| match var {
        VariableId::Temporal(a) => Some(cc.t_inverse()[a as usize].clone()),
        VariableId::Spatial(i) => Some(cc.x_inverse()[i as usize].clone()),
        VariableId::Velocity { i, alpha } => Some(v_old.get(&[i as usize, alpha as usize]).clone()),
    });
    let f_old = Tensor::from_vec(
        vec![n, m, m],
        f.components().data().iter().map(|e| full.apply(e)).collect(),
    );

    // contractions with B on both temporal slots, shared across i
    let fb = Tensor::from_fn(vec![n, m, m], |idx| {
        let (j, al, be) = (idx[0], idx[1], idx[2]);
        let mut terms = Vec::new();
        for g in 0..m {
            for d in 0..m {
                let fj = f_old.get(&[j, g, d]);
                let (b1, b2) = (bt.get(&[g, al]), bt.get(&[d, be]));
                if fj.is_zero() || b1.is_zero() || b2.is_zero() {
                    continue;
                }
                terms.push(fj.mul(b1).mul(b2));
            }
        }
        Expr::sum_owned(terms)
    });
    // ṽ-type velocity contracted with B: x^j_γ B^γ_α
    let vb = Tensor::from_fn(vec![n, m], |idx| {
        let (j, al) = (idx[0], idx[1]);
        Expr::sum_owned((0..m).map(|g| v_old.get(&[j, g]).mul(bt.get(&[g, al]))))
    });
    let vd = Tensor::from_fn(vec![n, m, m], |idx| {
        let (j, al, be) = (idx[0], idx[1], idx[2]);
        Expr::sum_owned((0..m).map(|g| v_old.get(&[j, g]).mul(d2t.get(&[g, al, be]))))
    });

    let component = |i: usize, al: usize, be: usize| {
        let mut terms = Vec::new();
        for j in 0..n {
            let aij = a_at(i, j);
            if !aij.is_zero() {
                terms.push(aij.mul(fb.get(&[j, al, be])));
                terms.push(aij.mul(vd.get(&[j, al, be])).neg());
            }
            for k in 0..n {
                let d = da_at(i, j, k);
                if !d.is_zero() {
                    terms.push(d.mul(vb.get(&[j, al])).mul(vb.get(&[k, be])).neg());
                }
            }
        }
        Expr::sum_owned(terms)
    };
    let f_new = if f.is_symmetric() {
        PdeSystem::symmetric(dims, component)?
    } else {
        PdeSystem::as_written(dims, Tensor::from_fn(vec![n, m, m], |i| component(i[0], i[1], i[2])))?
    };
    Ok((f_new, h_new))
}

/// The section `t̃ ↦ x̃(σ(t(t̃)))`.
pub fn pushforward_section(cc: &CoordinateChange, sigma: &SectionMap) -> Result<SectionMap> {
    let dims = sigma.dims();
    check_dims(cc, dims)?;
    let mut inner = Substitution::new(|var| match var {
        VariableId::Temporal(a) => Some(cc.t_inverse()[a as usize].clone()),
        _ => None,
    });
    let x_of_t: Vec<Expr> = sigma.components().iter().map(|e| inner.apply(e)).collect();
    let mut outer = Substitution::new(|var| match var {
        VariableId::Spatial(i) => Some(x_of_t[i as usize].clone()),
        _ => None,
    });
    let comps = cc.x_forward().iter().map(|e| outer.apply(e)).collect();
    SectionMap::new(dims, comps)
}
