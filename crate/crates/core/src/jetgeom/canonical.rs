use crate::exprlang::{v, Expr};
use crate::jetgeom::{JetPoint, MetricField, MetricGeometry, MetricKind};
use crate::tensor::{DTensorValue, IndexSignature, Tensor};
use crate::{Dims, Error, Result};

/// Builds an `[i, α, β]` array from `f` on `α <= β`, mirrored.
pub(crate) fn symmetric_components(
    dims: Dims,
    mut f: impl FnMut(usize, usize, usize) -> Expr,
) -> Tensor<Expr> {
    let Dims { m, n } = dims;
    let mut out = Tensor::filled(vec![n, m, m], Expr::zero());
    for i in 0..n {
        for a in 0..m {
            for b in a..m {
                let e = f(i, a, b);
                *out.get_mut(&[i, b, a]) = e.clone();
                *out.get_mut(&[i, a, b]) = e;
            }
        }
    }
    out
}

fn check_symmetric(what: &str, c: &Tensor<Expr>) -> Result<Dims> {
    let s = c.shape();
    if s.len() != 3 || s[1] != s[2] {
        return Err(Error::Dimension(format!("{what} needs shape [n, m, m], got {s:?}")));
    }
    let dims = Dims::new(s[1], s[0])?;
    for idx in c.indices() {
        if idx[1] < idx[2] && c.get(&idx) != c.get(&[idx[0], idx[2], idx[1]]) {
            return Err(Error::invalid(format!(
                "{what} component ({}, {}, {}) is not symmetric in its temporal indices",
                idx[0] + 1,
                idx[1] + 1,
                idx[2] + 1
            )));
        }
    }
    Ok(dims)
}

macro_rules! semispray_type {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            dims: Dims,
            components: Tensor<Expr>,
        }

        impl $name {
            /// Components laid out as `[i, α, β]`; must be symmetric in `(α, β)`.
            pub fn new(components: Tensor<Expr>) -> Result<Self> {
                let dims = check_symmetric($what, &components)?;
                Ok($name { dims, components })
            }

            pub fn from_fn(dims: Dims, f: impl FnMut(usize, usize, usize) -> Expr) -> Self {
                $name {
                    dims,
                    components: symmetric_components(dims, f),
                }
            }

            pub fn dims(&self) -> Dims {
                self.dims
            }

            pub fn get(&self, i: usize, alpha: usize, beta: usize) -> &Expr {
                self.components.get(&[i, alpha, beta])
            }

            pub fn components(&self) -> &Tensor<Expr> {
                &self.components
            }
        }
    };
}

semispray_type!(
    /// Temporal semispray `H^(i)_(α)β`.
    TemporalSemispray,
    "temporal semispray"
);
semispray_type!(
    /// Spatial semispray `G^(i)_(α)β`.
    SpatialSemispray,
    "spatial semispray"
);
semispray_type!(
    /// Temporal part `M^(i)_(α)β` of a nonlinear connection.
    TemporalConnection,
    "temporal connection"
);

/// Spatial part `N^(i)_(α)j` of a nonlinear connection, laid out `[i, α, j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialConnection {
    dims: Dims,
    components: Tensor<Expr>,
}

impl SpatialConnection {
    pub fn new(dims: Dims, components: Tensor<Expr>) -> Result<Self> {
        if components.shape() != [dims.n, dims.m, dims.n] {
            return Err(Error::Dimension(format!(
                "spatial connection needs shape [{}, {}, {}], got {:?}",
                dims.n,
                dims.m,
                dims.n,
                components.shape()
            )));
        }
        Ok(SpatialConnection { dims, components })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> Expr) -> Self {
        SpatialConnection {
            dims,
            components: Tensor::from_fn(vec![dims.n, dims.m, dims.n], |i| f(i[0], i[1], i[2])),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, i: usize, alpha: usize, j: usize) -> &Expr {
        self.components.get(&[i, alpha, j])
    }

    pub fn components(&self) -> &Tensor<Expr> {
        &self.components
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearConnection {
    pub temporal: TemporalConnection,
    pub spatial: SpatialConnection,
}

/// `H̊`, `G̊`, `M̊` and `N̊` of a pair of metrics.
#[derive(Clone, Debug)]
pub struct CanonicalObjects {
    pub temporal_semispray: TemporalSemispray,
    pub spatial_semispray: SpatialSemispray,
    pub connection: NonlinearConnection,
}

pub(crate) fn metric_dims(h: &MetricGeometry, phi: &MetricGeometry) -> Result<Dims> {
    if h.kind() != MetricKind::Temporal || phi.kind() != MetricKind::Spatial {
        return Err(Error::invalid("expected a temporal metric and a spatial metric"));
    }
    Dims::new(h.dim(), phi.dim())
}

/// `Σ_μ H^μ_{αβ} v^i_μ`.
pub(crate) fn temporal_contraction(h: &MetricGeometry, i: usize, a: usize, b: usize) -> Expr {
    Expr::sum_owned((0..h.dim()).map(|mu| h.christoffel(mu, a, b).mul(&v(i, mu))))
}

/// `Σ_{p,q} Γ^i_{pq} v^p_α v^q_β` for any `Γ` laid out `[i, p, q]`.
pub(crate) fn quadratic_contraction(gamma: &Tensor<Expr>, i: usize, a: usize, b: usize) -> Expr {
    let n = gamma.shape()[1];
    let mut terms = Vec::new();
    for p in 0..n {
        for q in 0..n {
            let g = gamma.get(&[i, p, q]);
            if !g.is_zero() {
                terms.push(g.mul(&v(p, a)).mul(&v(q, b)));
            }
        }
    }
    Expr::sum_owned(terms)
}

pub fn canonical_objects(h: &MetricGeometry, phi: &MetricGeometry) -> Result<CanonicalObjects> {
    let dims = metric_dims(h, phi)?;
    let temporal_semispray = TemporalSemispray::from_fn(dims, |i, a, b| {
        temporal_contraction(h, i, a, b).scale(-0.5)
    });
    let spatial_semispray = SpatialSemispray::from_fn(dims, |i, a, b| {
        quadratic_contraction(phi.christoffels(), i, a, b).scale(0.5)
    });
    let temporal = TemporalConnection::from_fn(dims, |i, a, b| {
        temporal_semispray.get(i, a, b).scale(2.0)
    });
    let spatial = SpatialConnection::from_fn(dims, |i, a, j| {
        Expr::sum_owned((0..dims.n).map(|r| phi.christoffel(i, j, r).mul(&v(r, a))))
    });
    Ok(CanonicalObjects {
        temporal_semispray,
        spatial_semispray,
        connection: NonlinearConnection { temporal, spatial },
    })
}

/// The Liouville d-tensor `C^(i)_(α) = x^i_α` and the h-normalization
/// d-tensor `J^(i)_(α)βj = h_{αβ} δ^i_j` at `p`.
pub fn canonical_tensors(h: &MetricField, p: &JetPoint) -> Result<(DTensorValue, DTensorValue)> {
    let dims = p.dims();
    if h.kind() != MetricKind::Temporal || h.dim() != dims.m {
        return Err(Error::Dimension(format!(
            "expected a temporal metric of dimension {}",
            dims.m
        )));
    }
    let hv = h.evaluate(&p.bindings())?;
    let c = DTensorValue::new(
        IndexSignature::liouville(),
        dims,
        p.v.iter().flatten().copied().collect(),
    )?;
    let sig = IndexSignature::normalization();
    let j = Tensor::from_fn(sig.shape(dims), |idx| {
        if idx[0] == idx[3] {
            hv[idx[1] * dims.m + idx[2]]
        } else {
            0.0
        }
    });
    Ok((c, DTensorValue::new(sig, dims, j.into_data())?))
}
