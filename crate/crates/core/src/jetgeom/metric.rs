use crate::exprlang::{evaluate, Bindings, Differentiator, Expr, VariableId};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Metrics whose determinant is this small at a point are singular there.
pub const DET_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// `h_{αβ}(t)` on the temporal manifold.
    Temporal,
    /// `φ_{ij}(x)` on the spatial manifold.
    Spatial,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Temporal => "temporal",
            MetricKind::Spatial => "spatial",
        }
    }

    /// The coordinate a metric of this kind depends on.
    pub fn coordinate(self, a: usize) -> VariableId {
        match self {
            MetricKind::Temporal => VariableId::t(a),
            MetricKind::Spatial => VariableId::x(a),
        }
    }
}

/// Symmetric matrix of expressions in the temporal or spatial coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    kind: MetricKind,
    components: Tensor<Expr>,
}

impl MetricField {
    pub fn new(kind: MetricKind, rows: Vec<Vec<Expr>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 || d > crate::exprlang::MAX_DIM {
            return Err(Error::Dimension(format!(
                "{} metric must be d x d with 1 <= d <= {}, got d={d}",
                kind.name(),
                crate::exprlang::MAX_DIM
            )));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Dimension(format!(
                "{} metric row {} has {} entries, expected {d}",
                kind.name(),
                r + 1,
                rows[r].len()
            )));
        }
        let data: Vec<Expr> = rows.into_iter().flatten().collect();
        let components = Tensor::from_vec(vec![d, d], data);
        for a in 0..d {
            for b in 0..d {
                let g = components.get(&[a, b]);
                for var in g.vars().iter() {
                    let ok = match (kind, var) {
                        (MetricKind::Temporal, VariableId::Temporal(k)) => (k as usize) < d,
                        (MetricKind::Spatial, VariableId::Spatial(k)) => (k as usize) < d,
                        _ => false,
                    };
                    if !ok {
                        return Err(Error::invalid(format!(
                            "{} metric component ({}, {}) depends on {var}",
                            kind.name(),
                            a + 1,
                            b + 1
                        )));
                    }
                }
                if b > a && g != components.get(&[b, a]) {
                    return Err(Error::invalid(format!(
                        "{} metric is not symmetric: component ({}, {}) = {g} but ({}, {}) = {}",
                        kind.name(),
                        a + 1,
                        b + 1,
                        b + 1,
                        a + 1,
                        components.get(&[b, a])
                    )));
                }
            }
        }
        Ok(MetricField { kind, components })
    }

    pub fn identity(kind: MetricKind, d: usize) -> Self {
        Self::diagonal(kind, vec![Expr::one(); d]).expect("identity metric is valid")
    }

    pub fn diagonal(kind: MetricKind, diag: Vec<Expr>) -> Result<Self> {
        let d = diag.len();
        let rows = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| if a == b { diag[a].clone() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        Self::new(kind, rows)
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.components.shape()[0]
    }

    pub fn get(&self, a: usize, b: usize) -> &Expr {
        self.components.get(&[a, b])
    }

    pub fn components(&self) -> &Tensor<Expr> {
        &self.components
    }

    /// True when no component depends on a coordinate.
    pub fn is_constant(&self) -> bool {
        self.components.data().iter().all(|g| g.vars().is_empty())
    }

    /// Numeric components, row-major.
    pub fn evaluate(&self, b: &Bindings) -> Result<Vec<f64>> {
        self.components
            .data()
            .iter()
            .map(|g| evaluate(g, b).map_err(Error::from))
            .collect()
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|&(r, _)| r != row)
        .map(|(_, cols)| {
            cols.iter()
                .enumerate()
                .filter(|&(c, _)| c != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

fn det_sym(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        d => {
            let terms: Vec<Expr> = (0..d)
                .filter(|&c| !m[0][c].is_zero())
                .map(|c| {
                    let t = m[0][c].mul(&det_sym(&minor(m, 0, c)));
                    if c % 2 == 0 {
                        t
                    } else {
                        t.neg()
                    }
                })
                .collect();
            Expr::sum_owned(terms)
        }
    }
}

fn rows_of(g: &MetricField) -> Vec<Vec<Expr>> {
    let d = g.dim();
    (0..d)
        .map(|a| (0..d).map(|b| g.get(a, b).clone()).collect())
        .collect()
}

/// Symbolic determinant and inverse by the adjugate formula.
fn inverse_with_det(g: &MetricField) -> (Expr, Tensor<Expr>) {
    let d = g.dim();
    let rows = rows_of(g);
    let det = det_sym(&rows);
    let mut inv = Tensor::filled(vec![d, d], Expr::zero());
    for a in 0..d {
        for b in a..d {
            let cof = det_sym(&minor(&rows, b, a));
            let cof = if (a + b) % 2 == 0 { cof } else { cof.neg() };
            let e = cof.div(&det);
            *inv.get_mut(&[a, b]) = e.clone();
            *inv.get_mut(&[b, a]) = e;
        }
    }
    (det, inv)
}

/// Inverse metric `g^{ab}`; symmetric by construction.
pub fn inverse_metric_sym(g: &MetricField) -> Tensor<Expr> {
    inverse_with_det(g).1
}

fn christoffel_from(g: &MetricField, inv: &Tensor<Expr>, diff: &mut Differentiator) -> Tensor<Expr> {
    let d = g.dim();
    let coord = |a| g.kind().coordinate(a);
    // dg[c][a][b] = ∂g_ab/∂u^c
    let dg = Tensor::from_fn(vec![d, d, d], |i| diff.d(g.get(i[1], i[2]), coord(i[0])));
    let mut gamma = Tensor::filled(vec![d, d, d], Expr::zero());
    for a in 0..d {
        for b in 0..d {
            for c in b..d {
                let terms: Vec<Expr> = (0..d)
                    .map(|k| {
                        let lower = dg
                            .get(&[c, b, k])
                            .add(dg.get(&[b, c, k]))
                            .sub(dg.get(&[k, b, c]));
                        inv.get(&[a, k]).mul(&lower)
                    })
                    .collect();
                let e = Expr::sum_owned(terms).scale(0.5);
                *gamma.get_mut(&[a, b, c]) = e.clone();
                *gamma.get_mut(&[a, c, b]) = e;
            }
        }
    }
    gamma
}

/// Christoffel symbols `Γ^a_{bc}` laid out as `[a, b, c]`.
pub fn christoffel_sym(g: &MetricField) -> Tensor<Expr> {
    let inv = inverse_metric_sym(g);
    christoffel_from(g, &inv, &mut Differentiator::new())
}

fn curvature_from(
    kind: MetricKind,
    gamma: &Tensor<Expr>,
    diff: &mut Differentiator,
) -> Tensor<Expr> {
    let d = gamma.shape()[0];
    let mut r = Tensor::filled(vec![d; 4], Expr::zero());
    for i in 0..d {
        for p in 0..d {
            for q in 0..d {
                for j in q + 1..d {
                    let mut terms = vec![
                        diff.d(gamma.get(&[i, p, q]), kind.coordinate(j)),
                        diff.d(gamma.get(&[i, p, j]), kind.coordinate(q)).neg(),
                    ];
                    for s in 0..d {
                        terms.push(gamma.get(&[s, p, q]).mul(gamma.get(&[i, s, j])));
                        terms.push(gamma.get(&[s, p, j]).mul(gamma.get(&[i, s, q])).neg());
                    }
                    let e = Expr::sum_owned(terms);
                    *r.get_mut(&[i, p, j, q]) = e.neg();
                    *r.get_mut(&[i, p, q, j]) = e;
                }
            }
        }
    }
    r
}

/// Curvature `𝕽^i_{pqj} = ∂_j γ^i_{pq} − ∂_q γ^i_{pj} + γ^r_{pq}γ^i_{rj} − γ^r_{pj}γ^i_{rq}`
/// laid out as `[i, p, q, j]`. Antisymmetric in `(q, j)` by construction.
pub fn curvature_sym(phi: &MetricField) -> Tensor<Expr> {
    let mut diff = Differentiator::new();
    let inv = inverse_metric_sym(phi);
    let gamma = christoffel_from(phi, &inv, &mut diff);
    curvature_from(phi.kind(), &gamma, &mut diff)
}

/// A metric together with its symbolic determinant, inverse and
/// Christoffel symbols, built once.
#[derive(Clone, Debug)]
pub struct MetricGeometry {
    field: MetricField,
    det: Expr,
    inverse: Tensor<Expr>,
    christoffel: Tensor<Expr>,
}

impl MetricGeometry {
    pub fn new(field: MetricField) -> Self {
        let (det, inverse) = inverse_with_det(&field);
        let christoffel = christoffel_from(&field, &inverse, &mut Differentiator::new());
        MetricGeometry {
            field,
            det,
            inverse,
            christoffel,
        }
    }

    pub fn field(&self) -> &MetricField {
        &self.field
    }

    pub fn kind(&self) -> MetricKind {
        self.field.kind()
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn g(&self, a: usize, b: usize) -> &Expr {
        self.field.get(a, b)
    }

    pub fn inv(&self, a: usize, b: usize) -> &Expr {
        self.inverse.get(&[a, b])
    }

    pub fn det(&self) -> &Expr {
        &self.det
    }

    pub fn inverse(&self) -> &Tensor<Expr> {
        &self.inverse
    }

    /// `Γ^a_{bc}`.
    pub fn christoffel(&self, a: usize, b: usize, c: usize) -> &Expr {
        self.christoffel.get(&[a, b, c])
    }

    pub fn christoffels(&self) -> &Tensor<Expr> {
        &self.christoffel
    }

    pub fn curvature(&self) -> Tensor<Expr> {
        curvature_from(self.kind(), &self.christoffel, &mut Differentiator::new())
    }

    /// Errors with [`Error::Singular`] when `|det| <= 1e-12` at `b`.
    pub fn check_nonsingular(&self, b: &Bindings) -> Result<f64> {
        let det = evaluate(&self.det, b)?;
        if !(det.abs() > DET_TOLERANCE) {
            return Err(Error::Singular {
                what: format!("{} metric", self.kind().name()),
                det,
            });
        }
        Ok(det)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::{parse, x};
    use crate::Dims;

    fn metric(kind: MetricKind, rows: &[&[&str]], dims: Dims) -> MetricField {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|s| parse(s, dims).unwrap()).collect())
            .collect();
        MetricField::new(kind, rows).unwrap()
    }

    #[test]
    fn identity_inverse_is_identity() {
        let inv = inverse_metric_sym(&MetricField::identity(MetricKind::Temporal, 3));
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(inv.get(&[a, b]).as_num(), Some(if a == b { 1.0 } else { 0.0 }));
            }
        }
    }

    #[test]
    fn constant_metric_has_zero_christoffels() {
        let dims = Dims::new(2, 2).unwrap();
        let g = metric(MetricKind::Spatial, &[&["2", "1"], &["1", "3"]], dims);
        assert!(christoffel_sym(&g).data().iter().all(Expr::is_zero));
        assert!(curvature_sym(&g).data().iter().all(Expr::is_zero));
    }

    #[test]
    fn rejects_wrong_kind_and_asymmetry() {
        let dims = Dims::new(2, 2).unwrap();
        let p = |s| parse(s, dims).unwrap();
        assert!(MetricField::new(MetricKind::Temporal, vec![vec![p("1+x1")]]).is_err());
        assert!(MetricField::new(MetricKind::Spatial, vec![vec![p("t1")]]).is_err());
        assert!(MetricField::new(MetricKind::Spatial, vec![vec![p("1"), p("x1")], vec![p("0"), p("1")]]).is_err());
        assert!(MetricField::new(MetricKind::Spatial, vec![vec![p("1"), p("0")]]).is_err());
        assert!(MetricField::new(MetricKind::Spatial, vec![vec![x(1)]]).is_err());
    }

    #[test]
    fn singular_metric_is_reported_at_evaluation() {
        let dims = Dims::new(1, 1).unwrap();
        let g = MetricGeometry::new(metric(MetricKind::Spatial, &[&["x1"]], dims));
        let b = Bindings::new(dims).with(VariableId::x(0), 0.0);
        assert!(matches!(g.check_nonsingular(&b), Err(Error::Singular { .. })));
    }
}
