use serde::Serialize;

use crate::characterize::fields::{build_characterized_system, GammaField, SField};
use crate::characterize::nullspace::StarStarOperator;
use crate::exprlang::{Expr, Tape};
use crate::jetgeom::{JetPoint, MetricGeometry, PdeSystem};
use crate::kcc::{Invariant, KccSystem};
use crate::sampling::PointSampler;
use crate::tensor::Tensor;
use crate::{Dims, Error, Result};

const QUADRATIC_TOLERANCE: f64 = 1e-10;
const EPSILON_TOLERANCE: f64 = 1e-8;
const SYMMETRY_TOLERANCE: f64 = 1e-8;
const PROBES: usize = 8;
const PROBE_RADIUS: f64 = 0.05;

/// `F^(i)_(α)β = Γ^{(μ)(ν)}_{(i)(α)β(p)(q)} v^p_μ v^q_ν + 𝒰^{(ν)}_{(i)(α)β(q)} v^q_ν + 𝒱_{(i)(α)β}`
/// at one base point, with the quadratic part symmetric under
/// `(p, μ) ↔ (q, ν)`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticDecomposition {
    /// `[i, α, β, p, μ, q, ν]`.
    pub quadratic: Vec<f64>,
    /// `[i, α, β, q, ν]`.
    pub linear: Vec<f64>,
    /// `[i, α, β]`.
    pub constant: Vec<f64>,
    #[serde(skip)]
    dims: Option<Dims>,
}

impl QuadraticDecomposition {
    #[allow(clippy::too_many_arguments)]
    fn quad(&self, i: usize, a: usize, b: usize, p: usize, mu: usize, q: usize, nu: usize) -> f64 {
        let Dims { m, n } = self.dims.unwrap();
        self.quadratic[(((((i * m + a) * m + b) * n + p) * m + mu) * n + q) * m + nu]
    }

    fn lin(&self, i: usize, a: usize, b: usize, q: usize, nu: usize) -> f64 {
        let Dims { m, n } = self.dims.unwrap();
        self.linear[(((i * m + a) * m + b) * n + q) * m + nu]
    }

    fn cst(&self, i: usize, a: usize, b: usize) -> f64 {
        let Dims { m, .. } = self.dims.unwrap();
        self.constant[(i * m + a) * m + b]
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StructureDiagnostics {
    /// Largest `|D|` at the probe points (0 when structurally zero).
    pub fifth_invariant_max: f64,
    pub fifth_invariant_structural_zero: bool,
    pub first_invariant_max: f64,
    /// Asymmetry of the quadratic, linear and constant parts under `α ↔ β`.
    pub symmetry_residual: f64,
    /// `max |𝒰 + H^ν_{αβ} δ^i_q|`.
    pub linear_residual: f64,
    /// `max |𝒱|`.
    pub constant_residual: f64,
    /// Spread of `Γ^i_{pq}` read from the different `(α, β)` positions.
    pub gamma_consistency: f64,
    /// Quadratic coefficients outside the positions that carry `Γ` or `S`.
    pub off_pattern_residual: f64,
    /// `max |S_{pq} + S_{qp}|`.
    pub s_antisymmetry: f64,
    /// Constraint residual of the extracted `S` at the base time.
    pub star_residual: f64,
    /// Relative mismatch of the rebuilt system against `F` at random velocities.
    pub rebuild_residual: f64,
    pub caveat: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractedStructure {
    /// `Γ^i_{pq}` laid out `[i, p, q]`.
    pub gamma: Vec<f64>,
    /// `S^{iν}_{αpq}` laid out `[i, ν, α, p, q]`.
    pub s: Vec<f64>,
    pub decomposition: QuadraticDecomposition,
    pub diagnostics: StructureDiagnostics,
}

impl ExtractedStructure {
    pub fn gamma_field(&self, dims: Dims) -> GammaField {
        let n = dims.n;
        GammaField::from_fn(dims, |i, p, q| Expr::num(self.gamma[(i * n + p) * n + q])).expect("symmetric by construction")
    }

    pub fn s_field(&self, dims: Dims) -> SField {
        let Dims { m, n } = dims;
        SField::from_fn(dims, |i, nu, a, p, q| Expr::num(self.s[(((i * m + nu) * m + a) * n + p) * n + q]))
            .expect("antisymmetric by construction")
    }
}

struct Probe<'a> {
    tape: Tape,
    base: &'a JetPoint,
}

impl Probe<'_> {
    fn at(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.base.clone();
        let m = p.t.len();
        for (i, row) in p.v.iter_mut().enumerate() {
            row.copy_from_slice(&v[i * m..(i + 1) * m]);
        }
        Ok(self.tape.eval(&p.bindings())?)
    }
}

fn probes(dims: Dims, t: &[f64], x: &[f64]) -> Vec<JetPoint> {
    PointSampler::new(dims, 0)
        .points(PROBES)
        .into_iter()
        .map(|mut p| {
            p.t.iter_mut().zip(t).for_each(|(a, b)| *a = b + PROBE_RADIUS * *a);
            p.x.iter_mut().zip(x).for_each(|(a, b)| *a = b + PROBE_RADIUS * *a);
            p
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |w: f64, x| w.max(x.abs()))
}

/// Recovers `Γ^i_{pq}` and `S^{iν}_{αpq}` at the base point `(t, x)` from a
/// system whose first and fifth invariants vanish.
pub fn extract_structure(f: &PdeSystem, h: &MetricGeometry, t: &[f64], x: &[f64]) -> Result<ExtractedStructure> {
    let dims = f.dims();
    let Dims { m, n } = dims;
    let base = JetPoint::new(dims, t.to_vec(), x.to_vec(), vec![vec![0.0; m]; n])?;
    h.check_nonsingular(&base.bindings())?;
    let kcc = KccSystem::new(f.clone(), h.clone())?;
    let mut diag = StructureDiagnostics {
        caveat: (m == 2).then(|| "the structure result assumes m >= 3".to_string()),
        ..Default::default()
    };

    let near = probes(dims, t, x);
    diag.fifth_invariant_structural_zero = kcc.is_structural_zero(Invariant::D);
    if !diag.fifth_invariant_structural_zero {
        for p in &near {
            diag.fifth_invariant_max = diag.fifth_invariant_max.max(max_abs(kcc.evaluate(Invariant::D, p)?.values.data()));
        }
        if diag.fifth_invariant_max > QUADRATIC_TOLERANCE {
            return Err(Error::precondition(format!(
                "fifth invariant does not vanish near the base point (max |D| = {:e}); the system is not velocity-quadratic",
                diag.fifth_invariant_max
            )));
        }
    }
    for p in &near {
        diag.first_invariant_max = diag.first_invariant_max.max(max_abs(kcc.evaluate(Invariant::Epsilon, p)?.values.data()));
    }
    if diag.first_invariant_max > EPSILON_TOLERANCE {
        return Err(Error::precondition(format!(
            "first invariant does not vanish near the base point (max |ε| = {:e})",
            diag.first_invariant_max
        )));
    }

    let probe = Probe {
        tape: Tape::compile(f.components().data()),
        base: &base,
    };
    let decomposition = polarize(&probe, dims)?;
    let d = &decomposition;

    let mut sym: f64 = 0.0;
    for i in 0..n {
        for a in 0..m {
            for b in 0..m {
                sym = sym.max((d.cst(i, a, b) - d.cst(i, b, a)).abs());
                for q in 0..n {
                    for nu in 0..m {
                        sym = sym.max((d.lin(i, a, b, q, nu) - d.lin(i, b, a, q, nu)).abs());
                        for p in 0..n {
                            for mu in 0..m {
                                sym = sym.max((d.quad(i, a, b, p, mu, q, nu) - d.quad(i, b, a, p, mu, q, nu)).abs());
                            }
                        }
                    }
                }
            }
        }
    }
    diag.symmetry_residual = sym;
    if sym > SYMMETRY_TOLERANCE {
        return Err(Error::precondition(format!(
            "quadratic decomposition violates the symmetry conditions (residual {sym:e})"
        )));
    }

    let hb = base.bindings();
    let christoffel = Tape::compile(h.christoffels().data()).eval(&hb)?;
    let hc = |nu: usize, a: usize, b: usize| christoffel[(nu * m + a) * m + b];
    diag.constant_residual = max_abs(&d.constant);
    for i in 0..n {
        for a in 0..m {
            for b in 0..m {
                for q in 0..n {
                    for nu in 0..m {
                        let expected = if i == q { -hc(nu, a, b) } else { 0.0 };
                        diag.linear_residual = diag.linear_residual.max((d.lin(i, a, b, q, nu) - expected).abs());
                    }
                }
            }
        }
    }

    let mut gamma = vec![0.0; n * n * n];
    for i in 0..n {
        for p in 0..n {
            for q in 0..n {
                gamma[(i * n + p) * n + q] = d.quad(i, 0, 0, p, 0, q, 0);
            }
        }
    }
    let mut s = vec![0.0; n * m * m * n * n];
    for i in 0..n {
        for nu in 0..m {
            for a in (0..m).filter(|&a| a != nu) {
                for p in 0..n {
                    for q in 0..n {
                        s[(((i * m + nu) * m + a) * n + p) * n + q] = d.quad(i, a, a, p, a, q, nu);
                    }
                }
            }
        }
    }
    for i in 0..n {
        for p in 0..n {
            for q in 0..n {
                let g = gamma[(i * n + p) * n + q];
                for a in 0..m {
                    for b in 0..m {
                        for mu in 0..m {
                            for nu in 0..m {
                                let expected = if a == b {
                                    if mu == a && nu == a {
                                        g
                                    } else if mu == a && nu != a {
                                        s[(((i * m + nu) * m + a) * n + p) * n + q]
                                    } else if nu == a && mu != a {
                                        s[(((i * m + mu) * m + a) * n + q) * n + p]
                                    } else {
                                        0.0
                                    }
                                } else if (mu == a && nu == b) || (mu == b && nu == a) {
                                    0.5 * g
                                } else {
                                    0.0
                                };
                                let r = (d.quad(i, a, b, p, mu, q, nu) - expected).abs();
                                let carries_gamma = if a == b {
                                    mu == a && nu == a
                                } else {
                                    (mu == a && nu == b) || (mu == b && nu == a)
                                };
                                if carries_gamma {
                                    diag.gamma_consistency = diag.gamma_consistency.max(r);
                                } else {
                                    diag.off_pattern_residual = diag.off_pattern_residual.max(r);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for i in 0..n {
        for nu in 0..m {
            for a in 0..m {
                for p in 0..n {
                    for q in 0..n {
                        let at = |p: usize, q: usize| s[(((i * m + nu) * m + a) * n + p) * n + q];
                        diag.s_antisymmetry = diag.s_antisymmetry.max((at(p, q) + at(q, p)).abs());
                    }
                }
            }
        }
    }
    if m >= 2 {
        let op = StarStarOperator::assemble(h.field(), t)?;
        for i in 0..n {
            for p in 0..n {
                for q in 0..n {
                    let packed = op.pack(|nu, a| s[(((i * m + nu) * m + a) * n + p) * n + q]);
                    diag.star_residual = diag.star_residual.max(op.residual(&packed));
                }
            }
        }
    }

    let mut out = ExtractedStructure {
        gamma,
        s,
        decomposition,
        diagnostics: diag,
    };
    out.diagnostics.rebuild_residual = rebuild_residual(&out, &probe, h, dims)?;
    Ok(out)
}

fn polarize(probe: &Probe<'_>, dims: Dims) -> Result<QuadraticDecomposition> {
    let Dims { m, n } = dims;
    let k_all = n * m;
    let len = n * m * m;
    let unit = |ks: &[(usize, f64)]| {
        let mut v = vec![0.0; k_all];
        for &(k, s) in ks {
            v[k] += s;
        }
        v
    };
    let constant = probe.at(&vec![0.0; k_all])?;
    let plus: Vec<Vec<f64>> = (0..k_all).map(|k| probe.at(&unit(&[(k, 1.0)]))).collect::<Result<_>>()?;
    let minus: Vec<Vec<f64>> = (0..k_all).map(|k| probe.at(&unit(&[(k, -1.0)]))).collect::<Result<_>>()?;
    // [c][k][l] with c the flat (i, α, β) index.
    let mut q = Tensor::filled(vec![len, k_all, k_all], 0.0);
    let mut lin = Tensor::filled(vec![len, k_all], 0.0);
    for k in 0..k_all {
        for c in 0..len {
            *lin.get_mut(&[c, k]) = 0.5 * (plus[k][c] - minus[k][c]);
            *q.get_mut(&[c, k, k]) = 0.5 * (plus[k][c] + minus[k][c]) - constant[c];
        }
        for l in k + 1..k_all {
            let both = probe.at(&unit(&[(k, 1.0), (l, 1.0)]))?;
            for c in 0..len {
                let val = 0.5 * (both[c] - plus[k][c] - plus[l][c] + constant[c]);
                *q.get_mut(&[c, k, l]) = val;
                *q.get_mut(&[c, l, k]) = val;
            }
        }
    }
    Ok(QuadraticDecomposition {
        quadratic: q.into_data(),
        linear: lin.into_data(),
        constant,
        dims: Some(dims),
    })
}

fn rebuild_residual(ex: &ExtractedStructure, probe: &Probe<'_>, h: &MetricGeometry, dims: Dims) -> Result<f64> {
    let rebuilt = build_characterized_system(&ex.gamma_field(dims), &ex.s_field(dims), h)?;
    let tape = Tape::compile(rebuilt.system.components().data());
    let Dims { m, n } = dims;
    let mut worst: f64 = 0.0;
    for p in PointSampler::new(dims, 1).points(PROBES) {
        let v: Vec<f64> = p.v.iter().flatten().copied().collect();
        let want = probe.at(&v)?;
        let mut q = probe.base.clone();
        for (i, row) in q.v.iter_mut().enumerate() {
            row.copy_from_slice(&v[i * m..(i + 1) * m]);
        }
        let got = tape.eval(&q.bindings())?;
        let scale = max_abs(&want).max(max_abs(&got)).max(1.0);
        for c in 0..n * m * m {
            worst = worst.max((want[c] - got[c]).abs() / scale);
        }
    }
    Ok(worst)
}
