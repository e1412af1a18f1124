use serde::Serialize;

use crate::dtransform::law::{transform_dtensor_with, transform_with};
use crate::dtransform::{
    pushforward_section, transform_spatial_connection, transform_spatial_semispray,
    transform_temporal_connection, transform_temporal_semispray, CoordinateChange,
};
use crate::exprlang::{Expr, Tape};
use crate::jetgeom::{canonical_objects, canonical_tensors, JetPoint, MetricField, MetricGeometry, PdeSystem};
use crate::kcc::{sode_residual, Invariant, KccSystem, SectionMap};
use crate::tensor::{MultiIndex, Tensor};
use crate::Result;

/// Tensors whose components are all at most this large are treated as
/// vanishing.
pub const VANISHING_TOLERANCE: f64 = 1e-9;
const ABSOLUTE_FLOOR: f64 = 1e-12;
const RELATIVE_FLOOR: f64 = 1e-9;

/// Largest component-wise `|a − b| / max(|a|, |b|, floor)` and its flat
/// index. The floor is `max(1e-12, 1e-9·s)` with `s` the largest component
/// magnitude of either array. Two arrays that both vanish (all components
/// `<= 1e-9`) agree with deviation 0.
pub fn scaled_deviation(a: &[f64], b: &[f64]) -> (f64, usize, bool) {
    assert_eq!(a.len(), b.len());
    let scale = a.iter().chain(b).fold(0.0f64, |s, x| s.max(x.abs()));
    if scale <= VANISHING_TOLERANCE {
        return (0.0, 0, true);
    }
    let floor = ABSOLUTE_FLOOR.max(RELATIVE_FLOOR * scale);
    let mut worst = (0.0, 0);
    for (k, (&x, &y)) in a.iter().zip(b).enumerate() {
        let d = (x - y).abs() / x.abs().max(y.abs()).max(floor);
        if d > worst.0 || d.is_nan() {
            worst = (d, k);
        }
    }
    (worst.0, worst.1, false)
}

/// One covariance check summarized over all sampled points.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub points: usize,
    pub max_deviation: f64,
    pub max_abs_difference: f64,
    pub worst_point: usize,
    pub worst_component: Vec<usize>,
    /// Both sides vanished at every sampled point.
    pub vanishing: bool,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            points: 0,
            max_deviation: 0.0,
            max_abs_difference: 0.0,
            worst_point: 0,
            worst_component: Vec::new(),
            vanishing: true,
            tolerance,
            passed: true,
        }
    }

    fn record(&mut self, point: usize, shape: &[usize], expected: &[f64], actual: &[f64]) {
        let (dev, k, vanishing) = scaled_deviation(expected, actual);
        let abs = expected
            .iter()
            .zip(actual)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.points += 1;
        self.vanishing &= vanishing;
        self.max_abs_difference = self.max_abs_difference.max(abs);
        if self.points == 1 || dev > self.max_deviation || dev.is_nan() {
            self.max_deviation = dev;
            self.worst_point = point;
            self.worst_component = MultiIndex::new(shape).nth(k).unwrap_or_default();
        }
        self.passed = self.max_deviation <= self.tolerance;
    }
}

/// Per-invariant two-path comparison: transform the invariant computed
/// from `(F, h)` at `p`, and recompute it from `(F̃, h̃)` at the
/// transformed point.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| !o.passed)
    }
}

pub fn check_invariance(
    old: &KccSystem,
    new: &KccSystem,
    cc: &CoordinateChange,
    points: &[JetPoint],
    which: &[Invariant],
    tolerance: f64,
) -> Result<InvarianceReport> {
    let mut outcomes: Vec<CheckOutcome> = which.iter().map(|w| CheckOutcome::new(w.name(), tolerance)).collect();
    for (k, p) in points.iter().enumerate() {
        cc.validate_at(p)?;
        let jac = cc.jacobians(p)?;
        let q = transform_with(cc, p, &jac)?;
        for (w, out) in which.iter().zip(outcomes.iter_mut()) {
            let expected = transform_dtensor_with(&old.evaluate(*w, p)?, &jac);
            let actual = new.evaluate(*w, &q)?;
            out.record(k, actual.values.shape(), expected.values.data(), actual.values.data());
        }
    }
    Ok(InvarianceReport { outcomes })
}

/// The Liouville and h-normalization tensors under the d-tensor law.
pub fn check_canonical_tensors(
    h_old: &MetricField,
    h_new: &MetricField,
    cc: &CoordinateChange,
    points: &[JetPoint],
    tolerance: f64,
) -> Result<InvarianceReport> {
    let mut c_out = CheckOutcome::new("C", tolerance);
    let mut j_out = CheckOutcome::new("J_h", tolerance);
    for (k, p) in points.iter().enumerate() {
        let jac = cc.jacobians(p)?;
        let q = transform_with(cc, p, &jac)?;
        let (c, j) = canonical_tensors(h_old, p)?;
        let (c_new, j_new) = canonical_tensors(h_new, &q)?;
        let c_exp = transform_dtensor_with(&c, &jac);
        let j_exp = transform_dtensor_with(&j, &jac);
        c_out.record(k, c_new.values.shape(), c_exp.values.data(), c_new.values.data());
        j_out.record(k, j_new.values.shape(), j_exp.values.data(), j_new.values.data());
    }
    Ok(InvarianceReport {
        outcomes: vec![c_out, j_out],
    })
}

struct Compiled {
    shape: Vec<usize>,
    tape: Tape,
}

impl Compiled {
    fn new(t: &Tensor<Expr>) -> Self {
        Compiled {
            shape: t.shape().to_vec(),
            tape: Tape::compile(t.data()),
        }
    }

    fn eval(&self, p: &JetPoint) -> Result<Tensor<f64>> {
        Ok(Tensor::from_vec(self.shape.clone(), self.tape.eval(&p.bindings())?))
    }
}

/// The canonical semisprays and connection of `(h, φ)` against their
/// inhomogeneous transformation rules.
pub fn check_connection_rules(
    old: (&MetricGeometry, &MetricGeometry),
    new: (&MetricGeometry, &MetricGeometry),
    cc: &CoordinateChange,
    points: &[JetPoint],
    tolerance: f64,
) -> Result<InvarianceReport> {
    let a = canonical_objects(old.0, old.1)?;
    let b = canonical_objects(new.0, new.1)?;
    let pairs = [
        (
            "temporal semispray",
            Compiled::new(a.temporal_semispray.components()),
            Compiled::new(b.temporal_semispray.components()),
        ),
        (
            "spatial semispray",
            Compiled::new(a.spatial_semispray.components()),
            Compiled::new(b.spatial_semispray.components()),
        ),
        (
            "temporal connection",
            Compiled::new(a.connection.temporal.components()),
            Compiled::new(b.connection.temporal.components()),
        ),
        (
            "spatial connection",
            Compiled::new(a.connection.spatial.components()),
            Compiled::new(b.connection.spatial.components()),
        ),
    ];
    let mut outcomes: Vec<CheckOutcome> = pairs.iter().map(|(n, _, _)| CheckOutcome::new(*n, tolerance)).collect();
    for (k, p) in points.iter().enumerate() {
        let q = transform_with(cc, p, &cc.jacobians(p)?)?;
        for (idx, (_, before, after)) in pairs.iter().enumerate() {
            let old_v = before.eval(p)?;
            let expected = match idx {
                0 => transform_temporal_semispray(&old_v, cc, p)?,
                1 => transform_spatial_semispray(&old_v, cc, p)?,
                2 => transform_temporal_connection(&old_v, cc, p)?,
                _ => transform_spatial_connection(&old_v, cc, p)?,
            };
            let actual = after.eval(&q)?;
            outcomes[idx].record(k, actual.shape(), expected.data(), actual.data());
        }
    }
    Ok(InvarianceReport { outcomes })
}

/// Solutions map to solutions: the largest SODE residual of the pushed
/// system along the pushed section at `t̃(t)` for each `t`, and the largest
/// deviation between the transformed prolongation and the prolongation of
/// the transformed section.
pub fn solution_transport_residual(
    f_new: &PdeSystem,
    cc: &CoordinateChange,
    sigma: &SectionMap,
    times: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let sigma_new = pushforward_section(cc, sigma)?;
    let mut sode: f64 = 0.0;
    let mut prolong: f64 = 0.0;
    for t in times {
        let p = sigma.prolongation_at(t)?;
        let q = transform_with(cc, &p, &cc.jacobians(&p)?)?;
        let r = sode_residual(f_new, &sigma_new, &q.t)?;
        sode = r.data().iter().fold(sode, |w, x| w.max(x.abs()));
        let direct = sigma_new.prolongation_at(&q.t)?;
        let flat = |p: &JetPoint| -> Vec<f64> {
            p.x.iter().chain(p.v.iter().flatten()).copied().collect()
        };
        prolong = prolong.max(scaled_deviation(&flat(&q), &flat(&direct)).0);
    }
    Ok((sode, prolong))
}
