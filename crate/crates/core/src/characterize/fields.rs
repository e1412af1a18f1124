use crate::characterize::nullspace::StarStarOperator;
use crate::exprlang::{v, Expr, Tape, VarKind};
use crate::jetgeom::canonical::temporal_contraction;
use crate::jetgeom::{MetricGeometry, MetricKind, PdeSystem};
use crate::sampling::PointSampler;
use crate::tensor::Tensor;
use crate::{Dims, Error, Result};

/// Residual bound for `S` against the constraint system at the probe points.
pub const STAR_TOLERANCE: f64 = 1e-9;
const STAR_PROBES: usize = 16;

fn check_base_only(what: &str, c: &Tensor<Expr>, dims: Dims) -> Result<()> {
    for e in c.data() {
        for var in e.free_variables() {
            if var.kind() == VarKind::Velocity {
                return Err(Error::invalid(format!("{what} must not depend on velocities (found {var})")));
            }
            if !var.in_bounds(dims) {
                return Err(Error::Dimension(format!("{what} uses {var}, out of range for {dims:?}")));
            }
        }
    }
    Ok(())
}

/// `Γ^i_{pq}(t, x)`, symmetric in `(p, q)`, laid out `[i, p, q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaField {
    dims: Dims,
    components: Tensor<Expr>,
}

impl GammaField {
    pub fn new(dims: Dims, components: Tensor<Expr>) -> Result<Self> {
        let n = dims.n;
        if components.shape() != [n, n, n] {
            return Err(Error::Dimension(format!("Γ needs shape [{n}, {n}, {n}], got {:?}", components.shape())));
        }
        check_base_only("Γ", &components, dims)?;
        for idx in components.indices() {
            if idx[1] < idx[2] && components.get(&idx) != components.get(&[idx[0], idx[2], idx[1]]) {
                return Err(Error::invalid(format!(
                    "Γ component ({}, {}, {}) is not symmetric in its lower indices",
                    idx[0] + 1,
                    idx[1] + 1,
                    idx[2] + 1
                )));
            }
        }
        Ok(GammaField { dims, components })
    }

    /// Calls `f(i, p, q)` for `p <= q` and mirrors.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> Expr) -> Result<Self> {
        let n = dims.n;
        let mut c = Tensor::filled(vec![n, n, n], Expr::zero());
        for i in 0..n {
            for p in 0..n {
                for q in p..n {
                    let e = f(i, p, q);
                    *c.get_mut(&[i, q, p]) = e.clone();
                    *c.get_mut(&[i, p, q]) = e;
                }
            }
        }
        Self::new(dims, c)
    }

    pub fn zero(dims: Dims) -> Self {
        let n = dims.n;
        GammaField {
            dims,
            components: Tensor::filled(vec![n, n, n], Expr::zero()),
        }
    }

    /// The Christoffel symbols of a spatial metric.
    pub fn christoffel(dims: Dims, phi: &MetricGeometry) -> Result<Self> {
        if phi.kind() != MetricKind::Spatial || phi.dim() != dims.n {
            return Err(Error::invalid("Γ from Christoffel symbols needs an n×n spatial metric"));
        }
        Self::new(dims, phi.christoffels().clone())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, i: usize, p: usize, q: usize) -> &Expr {
        self.components.get(&[i, p, q])
    }

    pub fn components(&self) -> &Tensor<Expr> {
        &self.components
    }
}

/// `S^{iν}_{αpq}(t, x)` for `α ≠ ν`, antisymmetric in `(p, q)`, laid out
/// `[i, ν, α, p, q]`. Entries with `α = ν` or `p = q` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SField {
    dims: Dims,
    components: Tensor<Expr>,
}

impl SField {
    pub fn new(dims: Dims, components: Tensor<Expr>) -> Result<Self> {
        let Dims { m, n } = dims;
        if components.shape() != [n, m, m, n, n] {
            return Err(Error::Dimension(format!(
                "S needs shape [{n}, {m}, {m}, {n}, {n}], got {:?}",
                components.shape()
            )));
        }
        check_base_only("S", &components, dims)?;
        for idx in components.indices() {
            let [i, nu, a, p, q] = idx[..] else { unreachable!() };
            let e = components.get(&idx);
            if (nu == a || p == q) && !e.is_zero() {
                return Err(Error::invalid(format!(
                    "S component ({}, {}, {}, {}, {}) must be zero",
                    i + 1,
                    nu + 1,
                    a + 1,
                    p + 1,
                    q + 1
                )));
            }
            if p < q && *components.get(&[i, nu, a, q, p]) != e.neg() {
                return Err(Error::invalid(format!(
                    "S component ({}, {}, {}, {}, {}) is not antisymmetric in its last two indices",
                    i + 1,
                    nu + 1,
                    a + 1,
                    p + 1,
                    q + 1
                )));
            }
        }
        Ok(SField { dims, components })
    }

    /// Calls `f(i, ν, α, p, q)` for `α ≠ ν` and `p < q`; the `q < p` entries
    /// are the negatives.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize, usize) -> Expr) -> Result<Self> {
        let Dims { m, n } = dims;
        let mut c = Tensor::filled(vec![n, m, m, n, n], Expr::zero());
        for i in 0..n {
            for nu in 0..m {
                for a in (0..m).filter(|&a| a != nu) {
                    for p in 0..n {
                        for q in p + 1..n {
                            let e = f(i, nu, a, p, q);
                            *c.get_mut(&[i, nu, a, q, p]) = e.neg();
                            *c.get_mut(&[i, nu, a, p, q]) = e;
                        }
                    }
                }
            }
        }
        Self::new(dims, c)
    }

    pub fn zero(dims: Dims) -> Self {
        let Dims { m, n } = dims;
        SField {
            dims,
            components: Tensor::filled(vec![n, m, m, n, n], Expr::zero()),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, i: usize, nu: usize, alpha: usize, p: usize, q: usize) -> &Expr {
        self.components.get(&[i, nu, alpha, p, q])
    }

    pub fn components(&self) -> &Tensor<Expr> {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.data().iter().all(Expr::is_zero)
    }
}

#[derive(Clone, Debug)]
pub struct CharacterizedSystem {
    pub system: PdeSystem,
    /// Largest constraint residual of `S` over the probe points.
    pub star_residual: f64,
    pub warning: Option<String>,
}

/// `F^(i)_(α)β = Γ^i_{pq}v^p_α v^q_β − H^μ_{αβ}v^i_μ
///   + 2δ_{αβ} Σ_{ν≠α} Σ_{p≠q} S^{iν}_{αpq} v^p_α v^q_ν`.
pub fn build_characterized_system(gamma: &GammaField, s: &SField, h: &MetricGeometry) -> Result<CharacterizedSystem> {
    let dims = gamma.dims();
    if s.dims() != dims {
        return Err(Error::Dimension(format!("Γ is {dims:?} but S is {:?}", s.dims())));
    }
    if h.kind() != MetricKind::Temporal || h.dim() != dims.m {
        return Err(Error::invalid("expected an m×m temporal metric"));
    }
    let Dims { m, n } = dims;
    let system = PdeSystem::symmetric(dims, |i, a, b| {
        let mut terms = Vec::new();
        for p in 0..n {
            for q in 0..n {
                let g = gamma.get(i, p, q);
                if !g.is_zero() {
                    terms.push(g.mul(&v(p, a)).mul(&v(q, b)));
                }
            }
        }
        terms.push(temporal_contraction(h, i, a, b).neg());
        if a == b {
            for nu in (0..m).filter(|&nu| nu != a) {
                for p in 0..n {
                    for q in (0..n).filter(|&q| q != p) {
                        let c = s.get(i, nu, a, p, q);
                        if !c.is_zero() {
                            terms.push(c.scale(2.0).mul(&v(p, a)).mul(&v(q, nu)));
                        }
                    }
                }
            }
        }
        Expr::sum_owned(terms)
    })?;
    let star_residual = if s.is_zero() { 0.0 } else { star_residual(s, h)? };
    let warning = (star_residual > STAR_TOLERANCE)
        .then(|| format!("S violates the constraint system: residual {star_residual:e} > {STAR_TOLERANCE:e}"));
    Ok(CharacterizedSystem {
        system,
        star_residual,
        warning,
    })
}

fn star_residual(s: &SField, h: &MetricGeometry) -> Result<f64> {
    let dims = s.dims();
    let n = dims.n;
    let tape = Tape::compile(s.components().data());
    let mut worst: f64 = 0.0;
    for p in PointSampler::new(dims, 0).points(STAR_PROBES) {
        let op = StarStarOperator::assemble(h.field(), &p.t)?;
        let vals = Tensor::from_vec(s.components().shape().to_vec(), tape.eval(&p.bindings())?);
        for i in 0..n {
            for a in 0..n {
                for b in a + 1..n {
                    let packed = op.pack(|nu, al| *vals.get(&[i, nu, al, a, b]));
                    worst = worst.max(op.residual(&packed));
                }
            }
        }
    }
    Ok(worst)
}
