use std::path::Path;

use serde_json::{json, Value};

use crate::characterize::{extract_structure, star_star_nullspace};
use crate::cli::problem::{load_metrics, ProblemFile};
use crate::cli::report::{components, num, point, to_value, CheckLine, Report};
use crate::dtransform::{
    check_canonical_tensors, check_connection_rules, check_invariance, pushforward_metric, pushforward_system,
    solution_transport_residual, CheckOutcome, CoordinateChange,
};
use crate::exprlang::{Differentiator, Expr, Tape, VariableId};
use crate::jetgeom::{JetPoint, MetricGeometry};
use crate::kcc::{jacobi_identity_residual, sode_residual, Invariant, KccSystem, SOLUTION_TOLERANCE};
use crate::sampling::PointSampler;
use crate::{Dims, Error, Result};

#[derive(Clone, Debug)]
pub struct SampleOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { samples: 10, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct TransformOptions {
    pub sampling: SampleOptions,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct FdOptions {
    pub sampling: SampleOptions,
    pub step: f64,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct JacobiOptions {
    pub sampling: SampleOptions,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct CharacterizeOptions {
    /// `t` values followed by `x` values.
    pub base: Vec<f64>,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct NullspaceOptions {
    pub m: usize,
    pub points: Vec<Vec<f64>>,
}

fn start(command: &str, p: &ProblemFile) -> Report {
    let mut r = Report::new(command);
    r.inputs.push(("problem".into(), p.sha256.clone()));
    r.dims = Some(p.dims);
    r.warnings.extend(p.warnings.iter().cloned());
    r
}

fn kcc(p: &ProblemFile) -> Result<KccSystem> {
    KccSystem::new(p.system.clone(), MetricGeometry::new(p.temporal_metric.clone()))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |w: f64, x| w.max(x.abs()))
}

pub fn run_invariants(
    p: &ProblemFile,
    which: &[Invariant],
    explicit: Option<(Vec<JetPoint>, String)>,
    sampling: &SampleOptions,
) -> Result<Report> {
    let mut r = start("invariants", p);
    let points = match explicit {
        Some((pts, sha)) => {
            r.inputs.push(("points".into(), sha));
            pts
        }
        None => match &p.points {
            Some(pts) => pts.clone(),
            None => {
                r.seed = Some(sampling.seed);
                PointSampler::new(p.dims, sampling.seed).points(sampling.samples)
            }
        },
    };
    let k = kcc(p)?;
    let mut out = Vec::new();
    for &w in which {
        let structural = k.is_structural_zero(w);
        let mut worst: f64 = 0.0;
        let mut per_point = Vec::new();
        for (idx, pt) in points.iter().enumerate() {
            let mut entry = json!({ "index": idx, "point": point(pt) });
            if structural {
                k.metric().check_nonsingular(&pt.bindings())?;
            } else {
                let val = k.evaluate(w, pt)?;
                worst = worst.max(max_abs(val.values.data()));
                entry["components"] = components(val.values.shape(), val.values.data());
            }
            per_point.push(entry);
        }
        out.push(json!({
            "name": w.name(),
            "slots": to_value(&w.signature()),
            "shape": w.signature().shape(p.dims),
            "structural_zero": structural,
            "max_abs": num(worst),
            "points": per_point,
        }));
    }
    r.results = json!({ "system": p.source.name(), "invariants": out });
    Ok(r)
}

fn outcome_line(prefix: &str, o: &CheckOutcome) -> CheckLine {
    CheckLine::bound(
        format!("{prefix}:{}", o.name),
        o.max_abs_difference,
        o.max_deviation,
        o.max_deviation,
        o.tolerance,
    )
    .with_detail(json!({
        "points": o.points,
        "worst_point": o.worst_point,
        "worst_component": o.worst_component.iter().map(|k| k + 1).collect::<Vec<_>>(),
        "vanishing": o.vanishing,
    }))
}

pub fn run_transform(p: &ProblemFile, cc: &CoordinateChange, opts: &TransformOptions) -> Result<Report> {
    let mut r = start("check transform", p);
    r.seed = Some(opts.sampling.seed);
    if cc.dims() != p.dims {
        return Err(Error::Dimension("coordinate change and problem dimensions differ".into()));
    }
    let pts = PointSampler::new(p.dims, opts.sampling.seed).points(opts.sampling.samples);
    let (f_new, h_new) = pushforward_system(cc, &p.system, &p.temporal_metric)?;
    let old = kcc(p)?;
    let new = KccSystem::new(f_new.clone(), MetricGeometry::new(h_new.clone()))?;
    let inv = check_invariance(&old, &new, cc, &pts, &Invariant::ALL, opts.tol)?;
    r.checks.extend(inv.outcomes.iter().map(|o| outcome_line("invariance", o)));
    let canon = check_canonical_tensors(&p.temporal_metric, &h_new, cc, &pts, opts.tol)?;
    r.checks.extend(canon.outcomes.iter().map(|o| outcome_line("canonical", o)));
    if let Some(phi) = &p.spatial_metric {
        let phi_new = pushforward_metric(cc, phi)?;
        let g = |m: &crate::MetricField| MetricGeometry::new(m.clone());
        let rules = check_connection_rules(
            (&g(&p.temporal_metric), &g(phi)),
            (&g(&h_new), &g(&phi_new)),
            cc,
            &pts,
            opts.tol,
        )?;
        r.checks.extend(rules.outcomes.iter().map(|o| outcome_line("rule", o)));
    }
    if let Some(sigma) = &p.section {
        let times: Vec<Vec<f64>> = pts.iter().map(|q| q.t.clone()).collect();
        let before = times
            .iter()
            .map(|t| sode_residual(&p.system, sigma, t).map(|x| max_abs(x.data())))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if before <= SOLUTION_TOLERANCE {
            let (sode, prolong) = solution_transport_residual(&f_new, cc, sigma, &times)?;
            r.checks.push(CheckLine::bound("solutions:residual", sode, sode, sode, SOLUTION_TOLERANCE));
            r.checks.push(CheckLine::bound("solutions:prolongation", prolong, prolong, prolong, opts.tol));
        } else {
            r.warnings.push(format!(
                "section does not solve the system (residual {before:e}); solution transport not checked"
            ));
        }
    }
    r.results = json!({
        "points": pts.iter().map(point).collect::<Vec<_>>(),
        "transformed_temporal_metric": p_metric(&h_new),
    });
    Ok(r)
}

fn p_metric(m: &crate::MetricField) -> Value {
    let d = m.dim();
    Value::Array(
        (0..d)
            .map(|a| Value::Array((0..d).map(|b| Value::String(m.get(a, b).to_string())).collect()))
            .collect(),
    )
}

fn all_variables(dims: Dims) -> Vec<VariableId> {
    let Dims { m, n } = dims;
    (0..m)
        .map(VariableId::t)
        .chain((0..n).map(VariableId::x))
        .chain((0..n).flat_map(|i| (0..m).map(move |a| VariableId::v(i, a))))
        .collect()
}

fn shifted(p: &JetPoint, var: VariableId, delta: f64) -> (JetPoint, f64) {
    let mut q = p.clone();
    let slot = match var {
        VariableId::Temporal(a) => &mut q.t[a as usize],
        VariableId::Spatial(i) => &mut q.x[i as usize],
        VariableId::Velocity { i, alpha } => &mut q.v[i as usize][alpha as usize],
    };
    let base = *slot;
    *slot += delta;
    (q, base)
}

/// Largest `|symbolic − central FD| / max(1, |a|, |b|)` over all first
/// partials of `exprs`.
fn fd_compare(
    name: &str,
    exprs: &[Expr],
    dims: Dims,
    pts: &[JetPoint],
    step: f64,
    tol: f64,
    diff: &mut Differentiator,
) -> Result<CheckLine> {
    let base = Tape::compile(exprs);
    let mut worst_abs: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut worst_at = Value::Null;
    for var in all_variables(dims) {
        let ds: Vec<Expr> = exprs.iter().map(|e| diff.d(e, var)).collect();
        let dt = Tape::compile(&ds);
        for (k, p) in pts.iter().enumerate() {
            let sym = dt.eval(&p.bindings())?;
            let (_, x0) = shifted(p, var, 0.0);
            let h = step * x0.abs().max(1.0);
            let plus = base.eval(&shifted(p, var, h).0.bindings())?;
            let minus = base.eval(&shifted(p, var, -h).0.bindings())?;
            for c in 0..exprs.len() {
                let fd = (plus[c] - minus[c]) / (2.0 * h);
                let abs = (sym[c] - fd).abs();
                let rel = abs / sym[c].abs().max(fd.abs()).max(1.0);
                worst_abs = worst_abs.max(abs);
                if rel > worst_rel || rel.is_nan() {
                    worst_rel = rel;
                    worst_at = json!({ "point": k, "component": c + 1, "variable": var.to_string() });
                }
            }
        }
    }
    Ok(CheckLine::bound(format!("fd:{name}"), worst_abs, worst_rel, worst_rel, tol).with_detail(worst_at))
}

pub fn run_fd(p: &ProblemFile, opts: &FdOptions) -> Result<Report> {
    let mut r = start("check fd", p);
    r.seed = Some(opts.sampling.seed);
    let pts = PointSampler::new(p.dims, opts.sampling.seed).points(opts.sampling.samples);
    let k = kcc(p)?;
    let mut diff = Differentiator::new();
    r.checks.push(fd_compare("F", p.system.components().data(), p.dims, &pts, opts.step, opts.tol, &mut diff)?);
    r.checks.push(fd_compare("N", k.connection().components().data(), p.dims, &pts, opts.step, opts.tol, &mut diff)?);
    r.checks.push(fd_compare("P", k.expressions(Invariant::P).data(), p.dims, &pts, opts.step, opts.tol, &mut diff)?);
    r.results = json!({ "step": num(opts.step), "points": pts.len() });
    Ok(r)
}

pub fn run_jacobi(p: &ProblemFile, opts: &JacobiOptions) -> Result<Report> {
    let mut r = start("check jacobi", p);
    r.seed = Some(opts.sampling.seed);
    let (sigma, xi) = match (&p.section, &p.variation) {
        (Some(s), Some(x)) => (s, x),
        _ => return Err(Error::invalid("check jacobi needs `section` and `variation` in the problem file")),
    };
    let k = kcc(p)?;
    let times: Vec<Vec<f64>> = PointSampler::new(p.dims, opts.sampling.seed)
        .points(opts.sampling.samples)
        .into_iter()
        .map(|q| q.t)
        .collect();
    let mut sode: f64 = 0.0;
    for t in &times {
        sode = sode.max(max_abs(sode_residual(&p.system, sigma, t)?.data()));
    }
    r.checks.push(CheckLine::bound("section solves system", sode, sode, sode, SOLUTION_TOLERANCE));
    let mut rows = Vec::new();
    if sode <= SOLUTION_TOLERANCE {
        let mut worst: f64 = 0.0;
        for t in &times {
            let res = jacobi_identity_residual(&k, sigma, xi, t)?;
            worst = worst.max(max_abs(&res));
            rows.push(json!({
                "t": t.iter().copied().map(num).collect::<Vec<_>>(),
                "residual": components(&[res.len()], &res),
            }));
        }
        r.checks.push(CheckLine::bound("jacobi residual", worst, worst, worst, opts.tol));
    }
    r.results = json!({ "times": rows });
    Ok(r)
}

pub fn run_characterize(p: &ProblemFile, opts: &CharacterizeOptions, command: &str) -> Result<Report> {
    let mut r = start(command, p);
    let Dims { m, n } = p.dims;
    if opts.base.len() != m + n {
        return Err(Error::invalid(format!(
            "--base needs {} values (t then x), got {}",
            m + n,
            opts.base.len()
        )));
    }
    let (t, x) = opts.base.split_at(m);
    let h = MetricGeometry::new(p.temporal_metric.clone());
    let ex = match extract_structure(&p.system, &h, t, x) {
        Ok(ex) => ex,
        Err(Error::Precondition(msg)) => {
            r.checks.push(CheckLine {
                name: "hypotheses".into(),
                max_abs: f64::NAN,
                max_rel: f64::NAN,
                tolerance: opts.tol,
                passed: false,
                detail: Value::String(msg),
            });
            return Ok(r);
        }
        Err(e) => return Err(e),
    };
    let d = &ex.diagnostics;
    r.warnings.extend(d.caveat.clone());
    for (name, v) in [
        ("rebuild", d.rebuild_residual),
        ("linear part", d.linear_residual),
        ("constant part", d.constant_residual),
        ("gamma consistency", d.gamma_consistency),
        ("off-pattern coefficients", d.off_pattern_residual),
        ("S antisymmetry", d.s_antisymmetry),
        ("S constraints", d.star_residual),
    ] {
        r.checks.push(CheckLine::bound(name, v, v, v, opts.tol));
    }
    let mut s_entries = Vec::new();
    for i in 0..n {
        for nu in 0..m {
            for a in (0..m).filter(|&a| a != nu) {
                for pp in 0..n {
                    for q in 0..n {
                        s_entries.push(json!({
                            "index": [i + 1, nu + 1, a + 1, pp + 1, q + 1],
                            "value": num(ex.s[(((i * m + nu) * m + a) * n + pp) * n + q]),
                        }));
                    }
                }
            }
        }
    }
    r.results = json!({
        "base": { "t": t.iter().copied().map(num).collect::<Vec<_>>(), "x": x.iter().copied().map(num).collect::<Vec<_>>() },
        "gamma": components(&[n, n, n], &ex.gamma),
        "s": s_entries,
        "diagnostics": to_value(d),
    });
    Ok(r)
}

pub fn run_nullspace(path: &Path, opts: &NullspaceOptions, command: &str) -> Result<Report> {
    let mut r = Report::new(command);
    let (metrics, sha) = load_metrics(path, opts.m)?;
    r.inputs.push(("metric".into(), sha));
    if opts.points.is_empty() {
        return Err(Error::invalid("--t needs at least one temporal point"));
    }
    let mut rows = Vec::new();
    let (mut residual, mut ortho): (f64, f64) = (0.0, 0.0);
    for (mk, h) in metrics.iter().enumerate() {
        for t in &opts.points {
            if t.len() != opts.m {
                return Err(Error::Dimension(format!("temporal point {t:?} needs {} coordinates", opts.m)));
            }
            let ns = star_star_nullspace(h, t, opts.m)?;
            residual = residual.max(ns.max_residual);
            for (a, u) in ns.basis.iter().enumerate() {
                for (b, w) in ns.basis.iter().enumerate() {
                    let dot: f64 = u.iter().zip(w).map(|(x, y)| x * y).sum();
                    ortho = ortho.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
                }
            }
            if let Some(c) = &ns.caveat {
                if !r.warnings.contains(c) {
                    r.warnings.push(c.clone());
                }
            }
            rows.push(json!({
                "metric": mk,
                "t": t.iter().copied().map(num).collect::<Vec<_>>(),
                "dimension": ns.dimension,
                "rank": ns.rank,
                "unknowns": ns.unknowns.iter().map(|&(nu, a)| json!({ "nu": nu + 1, "alpha": a + 1 })).collect::<Vec<_>>(),
                "singular_values": ns.singular_values.iter().copied().map(num).collect::<Vec<_>>(),
                "basis": ns.basis.iter().map(|b| b.iter().copied().map(num).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "max_residual": num(ns.max_residual),
            }));
        }
    }
    r.checks.push(CheckLine::bound("nullspace residual", residual, residual, residual, 1e-10));
    r.checks.push(CheckLine::bound("basis orthonormality", ortho, ortho, ortho, 1e-12));
    r.results = json!({ "m": opts.m, "scan": rows });
    Ok(r)
}
