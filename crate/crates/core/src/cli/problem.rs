//! Problem, coordinate-change and metric files.

use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dtransform::CoordinateChange;
use crate::exprlang::{parse, Expr, Tape};
use crate::jetgeom::{build_affine_system, build_first_order_system, JetPoint, MetricField, MetricGeometry, MetricKind, PdeSystem};
use crate::kcc::{SectionMap, VariationField};
use crate::sampling::PointSampler;
use crate::tensor::Tensor;
use crate::{Dims, Error, Result};

const METRIC_SYMMETRY_TOLERANCE: f64 = 1e-12;
const METRIC_PROBES: usize = 16;

/// How the system of a problem was specified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemSource {
    Explicit,
    Affine,
    FirstOrder,
}

impl SystemSource {
    pub fn name(self) -> &'static str {
        match self {
            SystemSource::Explicit => "explicit",
            SystemSource::Affine => "affine",
            SystemSource::FirstOrder => "first_order",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemFile {
    pub dims: Dims,
    pub temporal_metric: MetricField,
    pub spatial_metric: Option<MetricField>,
    pub system: PdeSystem,
    pub source: SystemSource,
    pub points: Option<Vec<JetPoint>>,
    pub section: Option<SectionMap>,
    pub variation: Option<VariationField>,
    pub warnings: Vec<String>,
    /// SHA-256 of the raw file bytes, hex.
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_json(path: &Path) -> Result<(Value, String)> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::schema("$", format!("file is not UTF-8: {e}")))?;
    let value: Value = serde_json::from_str(text)?;
    Ok((value, sha256_hex(&bytes)))
}

struct Cursor<'a> {
    path: String,
    value: &'a Value,
}

impl<'a> Cursor<'a> {
    fn root(value: &'a Value) -> Self {
        Cursor {
            path: "$".into(),
            value,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::schema(self.path.clone(), msg)
    }

    fn field(&self, key: &str) -> Result<Cursor<'a>> {
        self.opt(key)?.ok_or_else(|| self.err(format!("missing key `{key}`")))
    }

    fn opt(&self, key: &str) -> Result<Option<Cursor<'a>>> {
        let obj = self.value.as_object().ok_or_else(|| self.err("expected an object"))?;
        Ok(obj.get(key).filter(|v| !v.is_null()).map(|value| Cursor {
            path: format!("{}.{key}", self.path),
            value,
        }))
    }

    fn keys(&self, allowed: &[&str]) -> Result<()> {
        let obj = self.value.as_object().ok_or_else(|| self.err("expected an object"))?;
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(self.err(format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }

    fn items(&self) -> Result<Vec<Cursor<'a>>> {
        let arr = self.value.as_array().ok_or_else(|| self.err("expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(k, value)| Cursor {
                path: format!("{}[{k}]", self.path),
                value,
            })
            .collect())
    }

    fn usize(&self) -> Result<usize> {
        self.value
            .as_u64()
            .map(|u| u as usize)
            .ok_or_else(|| self.err("expected a non-negative integer"))
    }

    /// One-based index in `1..=max`, returned zero-based.
    fn index(&self, max: usize) -> Result<usize> {
        let k = self.usize()?;
        if k == 0 || k > max {
            return Err(self.err(format!("index {k} outside 1..={max}")));
        }
        Ok(k - 1)
    }

    fn f64(&self) -> Result<f64> {
        self.value.as_f64().ok_or_else(|| self.err("expected a number"))
    }

    fn bool(&self) -> Result<bool> {
        self.value.as_bool().ok_or_else(|| self.err("expected a boolean"))
    }

    fn str(&self) -> Result<&'a str> {
        self.value.as_str().ok_or_else(|| self.err("expected a string"))
    }

    fn expr(&self, dims: Dims) -> Result<Expr> {
        parse(self.str()?, dims).map_err(|e| self.err(e.to_string()))
    }

    fn numbers(&self, len: usize) -> Result<Vec<f64>> {
        let items = self.items()?;
        if items.len() != len {
            return Err(self.err(format!("expected {len} numbers, got {}", items.len())));
        }
        items.iter().map(Cursor::f64).collect()
    }

    fn exprs(&self, len: usize, dims: Dims) -> Result<Vec<Expr>> {
        let items = self.items()?;
        if items.len() != len {
            return Err(self.err(format!("expected {len} expressions, got {}", items.len())));
        }
        items.iter().map(|c| c.expr(dims)).collect()
    }
}

fn metric(c: &Cursor<'_>, kind: MetricKind, d: usize, dims: Dims) -> Result<MetricField> {
    let rows = c.items()?;
    if rows.len() != d {
        return Err(c.err(format!("expected {d} rows, got {}", rows.len())));
    }
    let mut g: Vec<Vec<Expr>> = rows.iter().map(|r| r.exprs(d, dims)).collect::<Result<_>>()?;
    let mut asymmetric = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            if g[a][b] != g[b][a] {
                asymmetric.push((a, b));
            }
        }
    }
    if !asymmetric.is_empty() {
        let sampler = PointSampler::new(dims, 0);
        for &(a, b) in &asymmetric {
            let tape = Tape::compile([&g[a][b], &g[b][a]]);
            for p in sampler.points(METRIC_PROBES) {
                let vals = tape.eval(&p.bindings())?;
                let scale = vals[0].abs().max(vals[1].abs()).max(1.0);
                if !((vals[0] - vals[1]).abs() <= METRIC_SYMMETRY_TOLERANCE * scale) {
                    return Err(c.err(format!(
                        "metric is not symmetric: entries ({}, {}) and ({}, {}) differ",
                        a + 1,
                        b + 1,
                        b + 1,
                        a + 1
                    )));
                }
            }
            g[b][a] = g[a][b].clone();
        }
    }
    MetricField::new(kind, g).map_err(|e| c.err(e.to_string()))
}

fn jet_point(c: &Cursor<'_>, dims: Dims) -> Result<JetPoint> {
    c.keys(&["t", "x", "v"])?;
    let t = c.field("t")?.numbers(dims.m)?;
    let x = c.field("x")?.numbers(dims.n)?;
    let v = match c.opt("v")? {
        Some(vc) => {
            let rows = vc.items()?;
            if rows.len() != dims.n {
                return Err(vc.err(format!("expected {} rows, got {}", dims.n, rows.len())));
            }
            rows.iter().map(|r| r.numbers(dims.m)).collect::<Result<_>>()?
        }
        None => vec![vec![0.0; dims.m]; dims.n],
    };
    JetPoint::new(dims, t, x, v)
}

pub fn parse_points(c: &Value, dims: Dims, root: &str) -> Result<Vec<JetPoint>> {
    let c = Cursor {
        path: root.into(),
        value: c,
    };
    c.items()?.iter().map(|p| jet_point(p, dims)).collect()
}

fn explicit_system(c: &Cursor<'_>, dims: Dims) -> Result<PdeSystem> {
    let Dims { m, n } = dims;
    let mut slots: Vec<Option<Expr>> = vec![None; n * m * m];
    for e in c.items()? {
        e.keys(&["i", "alpha", "beta", "expr"])?;
        let i = e.field("i")?.index(n)?;
        let a = e.field("alpha")?.index(m)?;
        let b = e.field("beta")?.index(m)?;
        let (lo, hi) = (a.min(b), a.max(b));
        let slot = &mut slots[(i * m + lo) * m + hi];
        if slot.is_some() {
            return Err(e.err(format!(
                "duplicate coverage of F component (i={}, alpha={}, beta={})",
                i + 1,
                lo + 1,
                hi + 1
            )));
        }
        *slot = Some(e.field("expr")?.expr(dims)?);
    }
    for i in 0..n {
        for a in 0..m {
            for b in a..m {
                if slots[(i * m + a) * m + b].is_none() {
                    return Err(c.err(format!("missing F component (i={}, alpha={}, beta={})", i + 1, a + 1, b + 1)));
                }
            }
        }
    }
    PdeSystem::symmetric(dims, |i, a, b| slots[(i * m + a) * m + b].clone().unwrap())
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<ProblemFile> {
        let (value, sha256) = read_json(path)?;
        Self::from_value(&value, sha256)
    }

    pub fn parse(text: &str) -> Result<ProblemFile> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(&value, sha256_hex(text.as_bytes()))
    }

    fn from_value(value: &Value, sha256: String) -> Result<ProblemFile> {
        let root = Cursor::root(value);
        root.keys(&["m", "n", "temporal_metric", "spatial_metric", "system", "points", "section", "variation"])?;
        let m_c = root.field("m")?;
        let n_c = root.field("n")?;
        let dims = Dims::new(m_c.usize()?, n_c.usize()?).map_err(|e| m_c.err(e.to_string()))?;
        let temporal_metric = metric(&root.field("temporal_metric")?, MetricKind::Temporal, dims.m, dims)?;
        let spatial_metric = root
            .opt("spatial_metric")?
            .map(|c| metric(&c, MetricKind::Spatial, dims.n, dims))
            .transpose()?;

        let sys = root.field("system")?;
        let mut warnings = Vec::new();
        let (system, source) = if let Some(f) = sys.opt("F")? {
            sys.keys(&["F"])?;
            (explicit_system(&f, dims)?, SystemSource::Explicit)
        } else {
            let ty = sys.field("type")?;
            match ty.str()? {
                "affine" => {
                    sys.keys(&["type"])?;
                    let phi = spatial_metric
                        .clone()
                        .ok_or_else(|| root.err("the affine builder needs `spatial_metric`"))?;
                    let f = build_affine_system(&MetricGeometry::new(temporal_metric.clone()), &MetricGeometry::new(phi))?;
                    (f, SystemSource::Affine)
                }
                "first_order" => {
                    sys.keys(&["type", "X", "symmetrize"])?;
                    let symmetrize = sys.opt("symmetrize")?.map(|c| c.bool()).transpose()?.unwrap_or(false);
                    let xc = sys.field("X")?;
                    let Dims { m, n } = dims;
                    let mut slots: Vec<Option<Expr>> = vec![None; n * m];
                    for e in xc.items()? {
                        e.keys(&["i", "alpha", "expr"])?;
                        let i = e.field("i")?.index(n)?;
                        let a = e.field("alpha")?.index(m)?;
                        if slots[i * m + a].is_some() {
                            return Err(e.err(format!("duplicate coverage of X component (i={}, alpha={})", i + 1, a + 1)));
                        }
                        slots[i * m + a] = Some(e.field("expr")?.expr(dims)?);
                    }
                    if let Some(k) = slots.iter().position(Option::is_none) {
                        return Err(xc.err(format!("missing X component (i={}, alpha={})", k / m + 1, k % m + 1)));
                    }
                    let x = Tensor::from_vec(vec![n, m], slots.into_iter().map(Option::unwrap).collect());
                    let built = build_first_order_system(dims, &x, symmetrize).map_err(|e| xc.err(e.to_string()))?;
                    warnings.extend(built.warning);
                    (built.system, SystemSource::FirstOrder)
                }
                other => return Err(ty.err(format!("unknown system type `{other}`"))),
            }
        };

        let points = root
            .opt("points")?
            .map(|c| parse_points(c.value, dims, &c.path))
            .transpose()?;
        let section = root
            .opt("section")?
            .map(|c| SectionMap::new(dims, c.exprs(dims.n, dims)?).map_err(|e| c.err(e.to_string())))
            .transpose()?;
        let variation = root
            .opt("variation")?
            .map(|c| VariationField::new(dims, c.exprs(dims.n, dims)?).map_err(|e| c.err(e.to_string())))
            .transpose()?;

        Ok(ProblemFile {
            dims,
            temporal_metric,
            spatial_metric,
            system,
            source,
            points,
            section,
            variation,
            warnings,
            sha256,
        })
    }
}

/// Reads `{"t_forward", "x_forward", "t_inverse", "x_inverse"}`.
pub fn load_change(path: &Path, dims: Dims) -> Result<(CoordinateChange, String)> {
    let (value, sha) = read_json(path)?;
    Ok((change_from_value(&value, dims)?, sha))
}

pub fn change_from_value(value: &Value, dims: Dims) -> Result<CoordinateChange> {
    let root = Cursor::root(value);
    root.keys(&["t_forward", "x_forward", "t_inverse", "x_inverse"])?;
    let tf = root.field("t_forward")?.exprs(dims.m, dims)?;
    let xf = root.field("x_forward")?.exprs(dims.n, dims)?;
    let ti = root.field("t_inverse")?.exprs(dims.m, dims)?;
    let xi = root.field("x_inverse")?.exprs(dims.n, dims)?;
    CoordinateChange::new(dims, tf, xf, ti, xi).map_err(|e| root.err(e.to_string()))
}

/// Temporal metrics from a file holding either `temporal_metric` (a
/// problem or a bare metric) or `metrics: [[[..]], ...]`.
pub fn load_metrics(path: &Path, m: usize) -> Result<(Vec<MetricField>, String)> {
    let (value, sha) = read_json(path)?;
    let dims = Dims::new(m, 1)?;
    let root = Cursor::root(&value);
    if let Some(list) = root.opt("metrics")? {
        let metrics = list
            .items()?
            .iter()
            .map(|c| metric(c, MetricKind::Temporal, m, dims))
            .collect::<Result<_>>()?;
        return Ok((metrics, sha));
    }
    if let Some(mc) = root.opt("m")? {
        if mc.usize()? != m {
            return Err(mc.err(format!("file declares m = {} but --m is {m}", mc.usize()?)));
        }
    }
    let c = root.field("temporal_metric")?;
    let dims = Dims::new(m, root.opt("n")?.map(|c| c.usize()).transpose()?.unwrap_or(1).clamp(1, 4))?;
    Ok((vec![metric(&c, MetricKind::Temporal, m, dims)?], sha))
}
