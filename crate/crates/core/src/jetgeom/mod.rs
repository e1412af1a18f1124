//! Metrics and their derived objects, the canonical semisprays, connections
//! and d-tensors, and the affine-map and first-order system builders.

pub(crate) mod canonical;
mod metric;
mod point;
mod system;

pub use canonical::{
    canonical_objects, canonical_tensors, CanonicalObjects, NonlinearConnection, SpatialConnection,
    SpatialSemispray, TemporalConnection, TemporalSemispray,
};
pub use metric::{
    christoffel_sym, curvature_sym, inverse_metric_sym, MetricField, MetricGeometry, MetricKind,
    DET_TOLERANCE,
};
pub use point::JetPoint;
pub use system::{build_affine_system, build_first_order_system, FirstOrderSystem, PdeSystem};
