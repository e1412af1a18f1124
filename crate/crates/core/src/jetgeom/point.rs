use crate::exprlang::{Bindings, VariableId};
use crate::{Dims, Error, Result};

/// Numeric coordinates `(t^α, x^i, x^i_α)` of a point of `J¹(T, M)`.
/// `v[i][α]` holds `x^i_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetPoint {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

impl JetPoint {
    pub fn new(dims: Dims, t: Vec<f64>, x: Vec<f64>, v: Vec<Vec<f64>>) -> Result<Self> {
        if t.len() != dims.m || x.len() != dims.n || v.len() != dims.n {
            return Err(Error::Dimension(format!(
                "jet point needs {} times, {} positions and {}x{} velocities",
                dims.m, dims.n, dims.n, dims.m
            )));
        }
        if v.iter().any(|row| row.len() != dims.m) {
            return Err(Error::Dimension(format!(
                "velocity rows must have {} entries",
                dims.m
            )));
        }
        Ok(JetPoint { t, x, v })
    }

    pub fn zero(dims: Dims) -> Self {
        JetPoint {
            t: vec![0.0; dims.m],
            x: vec![0.0; dims.n],
            v: vec![vec![0.0; dims.m]; dims.n],
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            m: self.t.len(),
            n: self.x.len(),
        }
    }

    pub fn bindings(&self) -> Bindings {
        let dims = self.dims();
        let mut b = Bindings::new(dims);
        for (a, &val) in self.t.iter().enumerate() {
            b.set(VariableId::t(a), val).unwrap();
        }
        for (i, &val) in self.x.iter().enumerate() {
            b.set(VariableId::x(i), val).unwrap();
        }
        for (i, row) in self.v.iter().enumerate() {
            for (a, &val) in row.iter().enumerate() {
                b.set(VariableId::v(i, a), val).unwrap();
            }
        }
        b
    }
}
