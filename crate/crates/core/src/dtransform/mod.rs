//! Jet coordinate changes: transforming points, pushing systems and metrics
//! forward, the d-tensor transformation law and two-path invariance checks.

mod change;
mod check;
mod law;
mod pushforward;

pub use change::{CoordinateChange, Jacobians, JACOBIAN_TOLERANCE, ROUND_TRIP_TOLERANCE};
pub use check::{
    check_canonical_tensors, check_connection_rules, check_invariance, scaled_deviation,
    solution_transport_residual, CheckOutcome, InvarianceReport, VANISHING_TOLERANCE,
};
pub use law::{
    transform_dtensor, transform_jet_point, transform_spatial_connection,
    transform_spatial_semispray, transform_temporal_connection, transform_temporal_semispray,
};
pub use pushforward::{pushforward_metric, pushforward_section, pushforward_system};
