use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use crate::exprlang::{v, Differentiator, Expr, Tape, VariableId};
use crate::jetgeom::{JetPoint, MetricGeometry, PdeSystem, SpatialConnection};
use crate::kcc::correspondence::{check_temporal, connection_from_parts, trace_rows};
use crate::tensor::{DTensorValue, IndexSignature, MultiIndex, Tensor};
use crate::{Dims, Error, Result};

/// The five h-KCC invariants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Invariant {
    /// `ε^(i)_(α)β`, the external force.
    Epsilon,
    /// `P^i_j`, the deviation curvature.
    P,
    /// `R^{iα}_{jk}`.
    R,
    /// `B^{iα(β)}_{jk(l)}`.
    B,
    /// `D^(i)(γ)(ε)(μ)_(α)β(j)(k)(l)`.
    D,
}

impl Invariant {
    pub const ALL: [Invariant; 5] = [
        Invariant::Epsilon,
        Invariant::P,
        Invariant::R,
        Invariant::B,
        Invariant::D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Invariant::Epsilon => "eps",
            Invariant::P => "P",
            Invariant::R => "R",
            Invariant::B => "B",
            Invariant::D => "D",
        }
    }

    pub fn signature(self) -> IndexSignature {
        match self {
            Invariant::Epsilon => IndexSignature::first_invariant(),
            Invariant::P => IndexSignature::deviation(),
            Invariant::R => IndexSignature::third_invariant(),
            Invariant::B => IndexSignature::fourth_invariant(),
            Invariant::D => IndexSignature::fifth_invariant(),
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Invariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eps" | "epsilon" => Ok(Invariant::Epsilon),
            "P" => Ok(Invariant::P),
            "R" => Ok(Invariant::R),
            "B" => Ok(Invariant::B),
            "D" => Ok(Invariant::D),
            other => Err(Error::invalid(format!(
                "unknown invariant `{other}` (expected eps, P, R, B or D)"
            ))),
        }
    }
}

/// A system together with a temporal metric; every derived object is built
/// symbolically on first use and cached.
pub struct KccSystem {
    f: PdeSystem,
    h: MetricGeometry,
    diff: Mutex<Differentiator>,
    traces: OnceLock<(Vec<Expr>, Vec<Expr>)>,
    dfdv: OnceLock<Tensor<Expr>>,
    connection: OnceLock<SpatialConnection>,
    invariants: [OnceLock<Tensor<Expr>>; 5],
    tapes: [OnceLock<Tape>; 5],
}

impl fmt::Debug for KccSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KccSystem")
            .field("dims", &self.f.dims())
            .finish_non_exhaustive()
    }
}

impl KccSystem {
    pub fn new(f: PdeSystem, h: MetricGeometry) -> Result<Self> {
        check_temporal(&h, f.dims())?;
        Ok(KccSystem {
            f,
            h,
            diff: Mutex::new(Differentiator::new()),
            traces: OnceLock::new(),
            dfdv: OnceLock::new(),
            connection: OnceLock::new(),
            invariants: Default::default(),
            tapes: Default::default(),
        })
    }

    pub fn dims(&self) -> Dims {
        self.f.dims()
    }

    pub fn system(&self) -> &PdeSystem {
        &self.f
    }

    pub fn metric(&self) -> &MetricGeometry {
        &self.h
    }

    pub(crate) fn d(&self, e: &Expr, var: VariableId) -> Expr {
        self.diff.lock().expect("differentiator lock").d(e, var)
    }

    /// `(F^i, H^γ)`.
    pub fn traces(&self) -> &(Vec<Expr>, Vec<Expr>) {
        self.traces.get_or_init(|| {
            (
                trace_rows(self.f.components(), &self.h),
                trace_rows(self.h.christoffels(), &self.h),
            )
        })
    }

    /// `∂F^i/∂x^r_γ` laid out `[i, r, γ]`.
    pub fn trace_velocity_derivatives(&self) -> &Tensor<Expr> {
        self.dfdv.get_or_init(|| {
            let Dims { m, n } = self.dims();
            let fi = &self.traces().0;
            Tensor::from_fn(vec![n, n, m], |idx| self.d(&fi[idx[0]], VariableId::v(idx[1], idx[2])))
        })
    }

    /// Spatial connection `N^(i)_(α)j` induced by the system.
    pub fn connection(&self) -> &SpatialConnection {
        self.connection.get_or_init(|| {
            connection_from_parts(
                self.dims(),
                &self.h,
                self.trace_velocity_derivatives(),
                &self.traces().1,
            )
        })
    }

    /// Symbolic components of `which`, laid out per its signature.
    pub fn expressions(&self, which: Invariant) -> &Tensor<Expr> {
        if let Some(t) = self.invariants[which.slot()].get() {
            return t;
        }
        let built = match which {
            Invariant::Epsilon => self.build_epsilon(),
            Invariant::P => self.build_p(),
            Invariant::R => self.build_r(),
            Invariant::B => self.build_b(),
            Invariant::D => self.build_d(),
        };
        self.invariants[which.slot()].get_or_init(|| built)
    }

    /// True when every component simplified to the literal 0.
    pub fn is_structural_zero(&self, which: Invariant) -> bool {
        self.expressions(which).data().iter().all(Expr::is_zero)
    }

    fn tape(&self, which: Invariant) -> &Tape {
        self.tapes[which.slot()].get_or_init(|| Tape::compile(self.expressions(which).data()))
    }

    /// Numeric value of `which` at `p`.
    pub fn evaluate(&self, which: Invariant, p: &JetPoint) -> Result<DTensorValue> {
        if p.dims() != self.dims() {
            return Err(Error::Dimension(format!(
                "point has dimensions (m={}, n={}), system has (m={}, n={})",
                p.dims().m,
                p.dims().n,
                self.dims().m,
                self.dims().n
            )));
        }
        let b = p.bindings();
        self.h.check_nonsingular(&b)?;
        let values = self.tape(which).eval(&b)?;
        DTensorValue::new(which.signature(), self.dims(), values)
    }

    fn build_epsilon(&self) -> Tensor<Expr> {
        let Dims { m, n } = self.dims();
        let nc = self.connection();
        Tensor::from_fn(vec![n, m, m], |idx| {
            let (i, a, b) = (idx[0], idx[1], idx[2]);
            let mut terms = vec![self.f.get(i, a, b).neg()];
            for r in 0..n {
                terms.push(nc.get(i, a, r).mul(&v(r, b)));
            }
            for mu in 0..m {
                terms.push(self.h.christoffel(mu, a, b).mul(&v(i, mu)).neg());
            }
            Expr::sum_owned(terms)
        })
    }

    fn build_p(&self) -> Tensor<Expr> {
        let Dims { m, n } = self.dims();
        let (fi, hg) = self.traces();
        let a = self.trace_velocity_derivatives();
        let h = &self.h;
        // c_μ = ½ h^{γη} ∂h_{μγ}/∂t^η
        let c: Vec<Expr> = (0..m)
            .map(|mu| {
                let mut terms = Vec::new();
                for g in 0..m {
                    for eta in 0..m {
                        let dh = self.d(h.g(mu, g), VariableId::t(eta));
                        if !dh.is_zero() {
                            terms.push(h.inv(g, eta).mul(&dh));
                        }
                    }
                }
                Expr::sum_owned(terms).scale(0.5)
            })
            .collect();
        let mut bracket = Vec::new();
        for g in 0..m {
            bracket.push(self.d(&hg[g], VariableId::t(g)).scale(0.5));
            bracket.push(c[g].mul(&hg[g]));
            for mu in 0..m {
                bracket.push(h.g(g, mu).mul(&hg[g]).mul(&hg[mu]).scale(-0.25));
            }
        }
        let bracket = Expr::sum_owned(bracket);
        Tensor::from_fn(vec![n, n], |idx| {
            let (i, j) = (idx[0], idx[1]);
            let mut terms = vec![self.d(&fi[i], VariableId::x(j)).neg()];
            for g in 0..m {
                let aij = a.get(&[i, j, g]);
                terms.push(self.d(aij, VariableId::t(g)).scale(0.5));
                for r in 0..n {
                    terms.push(self.d(aij, VariableId::x(r)).mul(&v(r, g)).scale(0.5));
                }
                for r in 0..n {
                    for gg in 0..m {
                        let second = self.d(aij, VariableId::v(r, gg));
                        if !second.is_zero() {
                            terms.push(second.mul(self.f.get(r, gg, g)).scale(-0.5));
                        }
                    }
                }
                for mu in 0..m {
                    let w = h.g(g, mu);
                    if w.is_zero() {
                        continue;
                    }
                    for r in 0..n {
                        terms.push(w.mul(a.get(&[i, r, g])).mul(a.get(&[r, j, mu])).scale(0.25));
                    }
                }
                terms.push(c[g].mul(aij));
            }
            if i == j {
                terms.push(bracket.clone());
            }
            Expr::sum_owned(terms)
        })
    }

    fn build_r(&self) -> Tensor<Expr> {
        let Dims { m, n } = self.dims();
        let p = self.expressions(Invariant::P);
        let mut r = Tensor::filled(vec![n, m, n, n], Expr::zero());
        for i in 0..n {
            for a in 0..m {
                for j in 0..n {
                    for k in j + 1..n {
                        let e = self
                            .d(p.get(&[i, j]), VariableId::v(k, a))
                            .sub(&self.d(p.get(&[i, k]), VariableId::v(j, a)))
                            .scale(1.0 / 3.0);
                        *r.get_mut(&[i, a, k, j]) = e.neg();
                        *r.get_mut(&[i, a, j, k]) = e;
                    }
                }
            }
        }
        r
    }

    fn build_b(&self) -> Tensor<Expr> {
        let Dims { m, n } = self.dims();
        let r = self.expressions(Invariant::R);
        let mut b = Tensor::filled(vec![n, m, n, n, n, m], Expr::zero());
        for i in 0..n {
            for a in 0..m {
                for j in 0..n {
                    for k in j + 1..n {
                        for l in 0..n {
                            for be in 0..m {
                                let e = self.d(r.get(&[i, a, j, k]), VariableId::v(l, be));
                                *b.get_mut(&[i, a, k, j, l, be]) = e.neg();
                                *b.get_mut(&[i, a, j, k, l, be]) = e;
                            }
                        }
                    }
                }
            }
        }
        b
    }

    fn build_d(&self) -> Tensor<Expr> {
        let Dims { m, n } = self.dims();
        let symmetric = self.f.is_symmetric();
        let pairs: Vec<VariableId> = MultiIndex::new(&[n, m]).map(|p| VariableId::v(p[0], p[1])).collect();
        let np = pairs.len();
        let mut out = Tensor::filled(vec![n, m, m, n, m, n, m, n, m], Expr::zero());
        for i in 0..n {
            for a in 0..m {
                for b in 0..m {
                    if symmetric && b < a {
                        continue;
                    }
                    let f = self.f.get(i, a, b);
                    for x in 0..np {
                        let d1 = self.d(f, pairs[x]);
                        if d1.is_zero() {
                            continue;
                        }
                        for y in x..np {
                            let d2 = self.d(&d1, pairs[y]);
                            if d2.is_zero() {
                                continue;
                            }
                            for z in y..np {
                                let d3 = self.d(&d2, pairs[z]);
                                if d3.is_zero() {
                                    continue;
                                }
                                for [p, q, s] in permutations(x, y, z) {
                                    let slot = |k: usize| [k / m, k % m];
                                    let (pp, qq, ss) = (slot(p), slot(q), slot(s));
                                    let mut put = |a1: usize, b1: usize| {
                                        *out.get_mut(&[i, a1, b1, pp[0], pp[1], qq[0], qq[1], ss[0], ss[1]]) =
                                            d3.clone();
                                    };
                                    put(a, b);
                                    if symmetric {
                                        put(b, a);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn permutations(x: usize, y: usize, z: usize) -> [[usize; 3]; 6] {
    [
        [x, y, z],
        [x, z, y],
        [y, x, z],
        [y, z, x],
        [z, x, y],
        [z, y, x],
    ]
}

fn build(f: &PdeSystem, h: &MetricGeometry, which: Invariant) -> Result<Tensor<Expr>> {
    Ok(KccSystem::new(f.clone(), h.clone())?.expressions(which).clone())
}

/// `ε^(i)_(α)β`, laid out `[i, α, β]`.
pub fn first_invariant(f: &PdeSystem, h: &MetricGeometry) -> Result<Tensor<Expr>> {
    build(f, h, Invariant::Epsilon)
}

/// `P^i_j`, laid out `[i, j]`.
pub fn deviation_curvature(f: &PdeSystem, h: &MetricGeometry) -> Result<Tensor<Expr>> {
    build(f, h, Invariant::P)
}

/// `R^{iα}_{jk}`, laid out `[i, α, j, k]`.
pub fn third_invariant(f: &PdeSystem, h: &MetricGeometry) -> Result<Tensor<Expr>> {
    build(f, h, Invariant::R)
}

/// `B^{iα(β)}_{jk(l)}`, laid out `[i, α, j, k, l, β]`.
pub fn fourth_invariant(f: &PdeSystem, h: &MetricGeometry) -> Result<Tensor<Expr>> {
    build(f, h, Invariant::B)
}

/// Third velocity derivatives of `F`, laid out `[i, α, β, j, γ, k, ε, l, μ]`.
/// Needs no metric.
pub fn fifth_invariant(f: &PdeSystem) -> Result<Tensor<Expr>> {
    let h = MetricGeometry::new(crate::jetgeom::MetricField::identity(
        crate::jetgeom::MetricKind::Temporal,
        f.dims().m,
    ));
    build(f, &h, Invariant::D)
}
