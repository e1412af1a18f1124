use crate::exprlang::{evaluate, v, Differentiator, Expr, VarKind, VariableId};
use crate::jetgeom::canonical::{canonical_objects, metric_dims, symmetric_components};
use crate::jetgeom::MetricGeometry;
use crate::sampling::PointSampler;
use crate::tensor::Tensor;
use crate::{Dims, Error, Result};

/// Components `F^(i)_(α)β` of `∂²x^i/∂t^α∂t^β + F^(i)_(α)β(t, x, v) = 0`,
/// laid out `[i, α, β]`.
///
/// Systems built through [`PdeSystem::symmetric`] share one expression per
/// unordered `(α, β)`. [`PdeSystem::as_written`] keeps a full array, which
/// may be asymmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeSystem {
    dims: Dims,
    components: Tensor<Expr>,
}

fn check_vars(dims: Dims, e: &Expr) -> Result<()> {
    match e.vars().iter().find(|var| !var.in_bounds(dims)) {
        Some(var) => Err(Error::Dimension(format!(
            "{var} is outside the declared dimensions (m={}, n={})",
            dims.m, dims.n
        ))),
        None => Ok(()),
    }
}

impl PdeSystem {
    /// Calls `f(i, α, β)` for `α <= β` and mirrors.
    pub fn symmetric(dims: Dims, f: impl FnMut(usize, usize, usize) -> Expr) -> Result<Self> {
        Self::as_written(dims, symmetric_components(dims, f))
    }

    pub fn as_written(dims: Dims, components: Tensor<Expr>) -> Result<Self> {
        if components.shape() != [dims.n, dims.m, dims.m] {
            return Err(Error::Dimension(format!(
                "system needs shape [{}, {}, {}], got {:?}",
                dims.n,
                dims.m,
                dims.m,
                components.shape()
            )));
        }
        for e in components.data() {
            check_vars(dims, e)?;
        }
        Ok(PdeSystem { dims, components })
    }

    pub fn zero(dims: Dims) -> Self {
        PdeSystem {
            dims,
            components: Tensor::filled(vec![dims.n, dims.m, dims.m], Expr::zero()),
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

    /// Structural symmetry in `(α, β)`.
    pub fn is_symmetric(&self) -> bool {
        self.components
            .indices()
            .all(|idx| idx[1] >= idx[2] || self.get(idx[0], idx[1], idx[2]) == self.get(idx[0], idx[2], idx[1]))
    }

    /// `(α, β)`-average of the components.
    pub fn symmetrized(&self) -> PdeSystem {
        let components = symmetric_components(self.dims, |i, a, b| {
            if a == b {
                self.get(i, a, b).clone()
            } else {
                self.get(i, a, b).add(self.get(i, b, a)).scale(0.5)
            }
        });
        PdeSystem {
            dims: self.dims,
            components,
        }
    }
}

/// The system of affine maps, `F̊ = M̊ + 2G̊ = −H^μ_{αβ}v^i_μ + γ^i_{pq}v^p_α v^q_β`.
pub fn build_affine_system(h: &MetricGeometry, phi: &MetricGeometry) -> Result<PdeSystem> {
    let dims = metric_dims(h, phi)?;
    let c = canonical_objects(h, phi)?;
    PdeSystem::symmetric(dims, |i, a, b| {
        c.connection
            .temporal
            .get(i, a, b)
            .add(&c.spatial_semispray.get(i, a, b).scale(2.0))
    })
}

/// Result of [`build_first_order_system`].
#[derive(Clone, Debug)]
pub struct FirstOrderSystem {
    pub system: PdeSystem,
    /// Largest `|F_(α)β − F_(β)α|` seen at the probe points, before any
    /// symmetrization.
    pub max_asymmetry: f64,
    pub warning: Option<String>,
}

pub const ASYMMETRY_TOLERANCE: f64 = 1e-9;
const ASYMMETRY_PROBES: usize = 16;

/// System obtained by differentiating `∂x^i/∂t^α = X^(i)_(α)(t, x)`:
/// `F^(i)_(α)β = −(∂X^(i)_(α)/∂t^β + ∂X^(i)_(α)/∂x^r v^r_β)`.
///
/// `x` is laid out `[i, α]`.
pub fn build_first_order_system(
    dims: Dims,
    x: &Tensor<Expr>,
    symmetrize: bool,
) -> Result<FirstOrderSystem> {
    if x.shape() != [dims.n, dims.m] {
        return Err(Error::Dimension(format!(
            "X needs shape [{}, {}], got {:?}",
            dims.n,
            dims.m,
            x.shape()
        )));
    }
    for idx in x.indices() {
        let e = x.get(&idx);
        check_vars(dims, e)?;
        if e.vars().has_kind(VarKind::Velocity) {
            return Err(Error::invalid(format!(
                "X component ({}, {}) depends on velocities: {e}",
                idx[0] + 1,
                idx[1] + 1
            )));
        }
    }
    let mut diff = Differentiator::new();
    let raw = Tensor::from_fn(vec![dims.n, dims.m, dims.m], |idx| {
        let (i, a, b) = (idx[0], idx[1], idx[2]);
        let xa = x.get(&[i, a]);
        let mut terms = vec![diff.d(xa, VariableId::t(b))];
        for r in 0..dims.n {
            terms.push(diff.d(xa, VariableId::x(r)).mul(&v(r, b)));
        }
        Expr::sum_owned(terms).neg()
    });
    let written = PdeSystem::as_written(dims, raw)?;
    let max_asymmetry = probe_asymmetry(&written);
    let warning = (max_asymmetry > ASYMMETRY_TOLERANCE).then(|| {
        format!(
            "first-order system is not symmetric in its temporal indices (max |F_ab - F_ba| = {max_asymmetry:.3e}); {}",
            if symmetrize {
                "components were symmetrized"
            } else {
                "components are kept as written"
            }
        )
    });
    let system = if symmetrize { written.symmetrized() } else { written };
    Ok(FirstOrderSystem {
        system,
        max_asymmetry,
        warning,
    })
}

fn probe_asymmetry(f: &PdeSystem) -> f64 {
    if f.is_symmetric() {
        return 0.0;
    }
    let sampler = PointSampler::new(f.dims(), 0);
    let mut worst: f64 = 0.0;
    for p in sampler.points(ASYMMETRY_PROBES) {
        let b = p.bindings();
        for idx in f.components().indices() {
            let (i, a, c) = (idx[0], idx[1], idx[2]);
            if a >= c {
                continue;
            }
            if let (Ok(x), Ok(y)) = (evaluate(f.get(i, a, c), &b), evaluate(f.get(i, c, a), &b)) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}
