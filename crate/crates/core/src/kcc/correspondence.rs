use crate::exprlang::{v, Differentiator, Expr, VariableId};
use crate::jetgeom::canonical::temporal_contraction;
use crate::jetgeom::{
    MetricGeometry, MetricKind, PdeSystem, SpatialConnection, SpatialSemispray, TemporalConnection,
    TemporalSemispray,
};
use crate::tensor::Tensor;
use crate::{Dims, Error, Result};

/// `M = 2H`.
pub fn temporal_connection_from_semispray(h: &TemporalSemispray) -> TemporalConnection {
    TemporalConnection::from_fn(h.dims(), |i, a, b| h.get(i, a, b).scale(2.0))
}

/// `H = M/2`.
pub fn temporal_semispray_from_connection(m: &TemporalConnection) -> TemporalSemispray {
    TemporalSemispray::from_fn(m.dims(), |i, a, b| m.get(i, a, b).scale(0.5))
}

pub(crate) fn check_temporal(h: &MetricGeometry, dims: Dims) -> Result<()> {
    if h.kind() != MetricKind::Temporal || h.dim() != dims.m {
        return Err(Error::Dimension(format!(
            "expected a temporal metric of dimension m={}",
            dims.m
        )));
    }
    Ok(())
}

/// `G^(i)_(α)β = ½F^(i)_(α)β + ½H^μ_{αβ}x^i_μ`. The system must be
/// structurally symmetric.
pub fn spatial_semispray_from_f(f: &PdeSystem, h: &MetricGeometry) -> Result<SpatialSemispray> {
    let dims = f.dims();
    check_temporal(h, dims)?;
    if !f.is_symmetric() {
        return Err(Error::invalid(
            "a spatial semispray needs a system symmetric in its temporal indices",
        ));
    }
    Ok(SpatialSemispray::from_fn(dims, |i, a, b| {
        f.get(i, a, b).add(&temporal_contraction(h, i, a, b)).scale(0.5)
    }))
}

/// h-trace `Σ h^{αβ} T_{αβ}` of each row `i` of an `[i, α, β]` array.
pub(crate) fn trace_rows(c: &Tensor<Expr>, h: &MetricGeometry) -> Vec<Expr> {
    let (n, m) = (c.shape()[0], c.shape()[1]);
    (0..n)
        .map(|i| {
            let mut terms = Vec::new();
            for a in 0..m {
                for b in 0..m {
                    let w = h.inv(a, b);
                    let e = c.get(&[i, a, b]);
                    if !w.is_zero() && !e.is_zero() {
                        terms.push(w.mul(e));
                    }
                }
            }
            Expr::sum_owned(terms)
        })
        .collect()
}

/// `F^i = h^{αβ}F^(i)_(α)β` and `H^γ = h^{μν}H^γ_{μν}`.
pub fn h_traces(f: &PdeSystem, h: &MetricGeometry) -> Result<(Vec<Expr>, Vec<Expr>)> {
    check_temporal(h, f.dims())?;
    Ok((trace_rows(f.components(), h), trace_rows(h.christoffels(), h)))
}

/// `N^(i)_(α)j = ∂G^i/∂x^j_μ h_{αμ}` with `G^i = h^{δε}G^(i)_(δ)ε`.
pub fn connection_from_semispray(g: &SpatialSemispray, h: &MetricGeometry) -> Result<SpatialConnection> {
    let dims = g.dims();
    check_temporal(h, dims)?;
    let traces = trace_rows(g.components(), h);
    let mut diff = Differentiator::new();
    let dg = Tensor::from_fn(vec![dims.n, dims.n, dims.m], |idx| {
        diff.d(&traces[idx[0]], VariableId::v(idx[1], idx[2]))
    });
    Ok(SpatialConnection::from_fn(dims, |i, a, j| {
        Expr::sum_owned((0..dims.m).map(|mu| dg.get(&[i, j, mu]).mul(h.g(a, mu))))
    }))
}

/// `N^(i)_(α)j = ½∂F^i/∂x^j_γ h_{γα} + ½H^γ h_{γα} δ^i_j`.
pub fn connection_from_f(f: &PdeSystem, h: &MetricGeometry) -> Result<SpatialConnection> {
    let dims = f.dims();
    let (fi, hg) = h_traces(f, h)?;
    let mut diff = Differentiator::new();
    let a_tensor = Tensor::from_fn(vec![dims.n, dims.n, dims.m], |idx| {
        diff.d(&fi[idx[0]], VariableId::v(idx[1], idx[2]))
    });
    Ok(connection_from_parts(dims, h, &a_tensor, &hg))
}

pub(crate) fn connection_from_parts(
    dims: Dims,
    h: &MetricGeometry,
    dfdv: &Tensor<Expr>,
    hg: &[Expr],
) -> SpatialConnection {
    let shift: Vec<Expr> = (0..dims.m)
        .map(|a| Expr::sum_owned((0..dims.m).map(|g| hg[g].mul(h.g(g, a)))).scale(0.5))
        .collect();
    SpatialConnection::from_fn(dims, |i, a, j| {
        let main = Expr::sum_owned((0..dims.m).map(|g| dfdv.get(&[i, j, g]).mul(h.g(g, a)))).scale(0.5);
        if i == j {
            main.add(&shift[a])
        } else {
            main
        }
    })
}

/// `G^(i)_(α)β = ½N^(i)_(α)r x^r_β`, averaged over `(α, β)` so the result is
/// a symmetric semispray. The average is a no-op whenever the product is
/// already symmetric, as for the connection of any spatial metric.
pub fn semispray_from_connection(n: &SpatialConnection) -> SpatialSemispray {
    let dims = n.dims();
    let half = |i: usize, a: usize, b: usize| {
        Expr::sum_owned((0..dims.n).map(|r| n.get(i, a, r).mul(&v(r, b)))).scale(0.5)
    };
    SpatialSemispray::from_fn(dims, |i, a, b| {
        if a == b {
            half(i, a, a)
        } else {
            half(i, a, b).add(&half(i, b, a)).scale(0.5)
        }
    })
}
