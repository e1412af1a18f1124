use nalgebra::DMatrix;
use serde::Serialize;

use crate::exprlang::{Bindings, VariableId};
use crate::jetgeom::{MetricField, MetricKind, DET_TOLERANCE};
use crate::{Dims, Error, Result};

/// Singular values below `RANK_CUTOFF · σ_max` count as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

/// The homogeneous system on `{S^ν_α : α ≠ ν}` at one temporal point,
/// shared by every `(i, p, q)`:
/// `2S^ν_α − Σ_{ε≠ν} (h^{εε} S^ν_ε − h^{νν} S^ε_ν) h_{εα} = 0`, with the
/// repeated raised indices read as diagonal entries of `h⁻¹`.
#[derive(Clone, Debug)]
pub struct StarStarOperator {
    m: usize,
    unknowns: Vec<(usize, usize)>,
    matrix: DMatrix<f64>,
}

impl StarStarOperator {
    /// Assembles the operator for `h` at the temporal point `t`.
    pub fn assemble(h: &MetricField, t: &[f64]) -> Result<Self> {
        if h.kind() != MetricKind::Temporal {
            return Err(Error::invalid("the constraint operator needs a temporal metric"));
        }
        let m = h.dim();
        if t.len() != m {
            return Err(Error::Dimension(format!("temporal point has {} coordinates, metric has {m}", t.len())));
        }
        let mut b = Bindings::new(Dims::new(m, 1)?);
        for (a, &val) in t.iter().enumerate() {
            b.set(VariableId::t(a), val)?;
        }
        let g = DMatrix::from_row_slice(m, m, &h.evaluate(&b)?);
        let det = g.determinant();
        if !det.is_finite() || det.abs() <= DET_TOLERANCE {
            return Err(Error::Singular {
                what: "temporal metric".into(),
                det,
            });
        }
        let inv = g.clone().try_inverse().ok_or(Error::Singular {
            what: "temporal metric".into(),
            det,
        })?;
        Ok(Self::from_numeric(&g, &inv))
    }

    fn from_numeric(g: &DMatrix<f64>, inv: &DMatrix<f64>) -> Self {
        let m = g.nrows();
        let unknowns: Vec<(usize, usize)> = (0..m)
            .flat_map(|nu| (0..m).filter(move |&a| a != nu).map(move |a| (nu, a)))
            .collect();
        let col = |nu: usize, a: usize| unknowns.iter().position(|&u| u == (nu, a)).unwrap();
        let k = unknowns.len();
        let mut matrix = DMatrix::zeros(k, k);
        for (row, &(nu, a)) in unknowns.iter().enumerate() {
            matrix[(row, row)] += 2.0;
            for e in (0..m).filter(|&e| e != nu) {
                matrix[(row, col(nu, e))] -= inv[(e, e)] * g[(e, a)];
                matrix[(row, col(e, nu))] += inv[(nu, nu)] * g[(e, a)];
            }
        }
        StarStarOperator { m, unknowns, matrix }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Ordering of the unknowns as `(ν, α)` pairs.
    pub fn unknowns(&self) -> &[(usize, usize)] {
        &self.unknowns
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Max-abs residual of the system at `s` (ordered as [`Self::unknowns`]).
    pub fn residual(&self, s: &[f64]) -> f64 {
        assert_eq!(s.len(), self.unknowns.len());
        let r = &self.matrix * DMatrix::from_column_slice(s.len(), 1, s);
        r.iter().fold(0.0, |w: f64, x| w.max(x.abs()))
    }

    /// Packs `S^ν_α` given as a function of `(ν, α)`.
    pub fn pack(&self, mut s: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
        self.unknowns.iter().map(|&(nu, a)| s(nu, a)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NullSpace {
    pub m: usize,
    pub dimension: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Orthonormal basis, each vector ordered as `unknowns`.
    pub basis: Vec<Vec<f64>>,
    pub unknowns: Vec<(usize, usize)>,
    /// Largest constraint residual over the basis vectors.
    pub max_residual: f64,
    pub caveat: Option<String>,
    #[serde(skip)]
    pub operator: StarStarOperator,
}

/// Null space of the constraint operator for `h` at `t`.
pub fn star_star_nullspace(h: &MetricField, t: &[f64], m: usize) -> Result<NullSpace> {
    if m < 2 {
        return Err(Error::precondition("the constraint system needs m >= 2"));
    }
    if h.dim() != m {
        return Err(Error::Dimension(format!("metric is {0}x{0} but m = {m}", h.dim())));
    }
    let operator = StarStarOperator::assemble(h, t)?;
    let svd = operator.matrix.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |w, &s| w.max(s));
    let cutoff = RANK_CUTOFF * sigma_max;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let mut basis = Vec::new();
    for &k in &order {
        if sigma_max == 0.0 || svd.singular_values[k] < cutoff {
            let mut row: Vec<f64> = v_t.row(k).iter().copied().collect();
            let lead = row.iter().copied().fold(0.0f64, |w, x| if x.abs() > w.abs() { x } else { w });
            if lead < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            basis.push(row);
        }
    }
    let max_residual = basis.iter().map(|b| operator.residual(b)).fold(0.0, f64::max);
    let caveat = (m == 2).then(|| "the structure result assumes m >= 3; m = 2 is solved without that guarantee".to_string());
    Ok(NullSpace {
        m,
        dimension: basis.len(),
        rank: operator.unknowns.len() - basis.len(),
        singular_values,
        basis,
        unknowns: operator.unknowns.clone(),
        max_residual,
        caveat,
        operator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    #[test]
    fn flat_metric_gives_antisymmetric_solutions() {
        for m in 2..=4 {
            let ns = star_star_nullspace(&MetricField::identity(MetricKind::Temporal, m), &vec![0.0; m], m).unwrap();
            assert_eq!(ns.dimension, m * (m - 1) / 2);
            assert!(ns.max_residual <= 1e-10);
            for b in &ns.basis {
                let s = |nu: usize, a: usize| b[ns.unknowns.iter().position(|&u| u == (nu, a)).unwrap()];
                for (nu, a) in ns.unknowns.iter().copied() {
                    assert!((s(nu, a) + s(a, nu)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_vector_always_solves() {
        let dims = Dims::new(3, 1).unwrap();
        let rows = [["2", "t1", "0"], ["t1", "3", "0.5"], ["0", "0.5", "1+t2^2"]];
        let rows = rows.iter().map(|r| r.iter().map(|s| parse(s, dims).unwrap()).collect()).collect();
        let h = MetricField::new(MetricKind::Temporal, rows).unwrap();
        let op = StarStarOperator::assemble(&h, &[0.3, -0.2, 0.1]).unwrap();
        assert_eq!(op.residual(&[0.0; 6]), 0.0);
    }
}
