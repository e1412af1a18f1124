//! Multi-time KCC invariants of second-order PDE systems on the 1-jet space
//! `J¹(T, M)`.
//!
//! The crate is layered bottom-up:
//!
//! - [`exprlang`]: symbolic scalar expressions in the jet coordinates
//!   `(t^α, x^i, x^i_α)` with exact differentiation.
//! - [`jetgeom`]: metrics, Christoffel symbols, curvature, the canonical
//!   semisprays and connections, and the PDE system builders.
//! - [`kcc`]: connections induced by a system, the five h-KCC invariants,
//!   covariant derivatives along sections and the variational/Jacobi residuals.
//! - [`dtransform`]: jet coordinate changes, the d-tensor transformation law
//!   and two-path invariance checks.
//! - [`characterize`]: systems with vanishing first and fifth invariants and
//!   the null-space tool for the `S` constraints.
//! - [`cli`]: problem files, deterministic sampling and JSON reports.

#![allow(clippy::needless_range_loop, clippy::redundant_guards, clippy::neg_cmp_op_on_partial_ord)]

pub mod characterize;
pub mod cli;
pub mod dtransform;
mod error;
pub mod exprlang;
pub mod jetgeom;
pub mod kcc;
pub mod sampling;
pub mod tensor;

pub use error::{Error, Result};
pub use exprlang::{Expr, VariableId};
pub use jetgeom::{JetPoint, MetricField, MetricKind, PdeSystem};
pub use tensor::{DTensorValue, IndexSignature, Slot, Tensor};

/// Temporal (`m`) and spatial (`n`) dimensions of the jet space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
}

impl Dims {
    pub fn new(m: usize, n: usize) -> Result<Dims> {
        let max = exprlang::MAX_DIM;
        if m == 0 || n == 0 || m > max || n > max {
            return Err(Error::Dimension(format!(
                "dimensions must satisfy 1 <= m, n <= {max}, got m={m}, n={n}"
            )));
        }
        Ok(Dims { m, n })
    }
}
