//! Semisprays and connections induced by a second-order system, the five
//! h-KCC invariants, covariant derivatives along sections and the
//! variational and Jacobi residuals.

mod correspondence;
mod invariants;
mod section;

pub use crate::jetgeom::{
    NonlinearConnection, SpatialConnection, SpatialSemispray, TemporalConnection, TemporalSemispray,
};
pub use correspondence::{
    connection_from_f, connection_from_semispray, h_traces, semispray_from_connection,
    spatial_semispray_from_f, temporal_connection_from_semispray, temporal_semispray_from_connection,
};
pub use invariants::{
    deviation_curvature, fifth_invariant, first_invariant, fourth_invariant, third_invariant,
    Invariant, KccSystem,
};
pub use section::{
    covariant_derivative_section, covariant_derivative_variation, jacobi_identity_residual,
    sode_residual, trace_variational_residual, variational_residual, SectionMap, VariationField,
    SOLUTION_TOLERANCE,
};
