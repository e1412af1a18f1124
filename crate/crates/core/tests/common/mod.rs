#![allow(dead_code)]

use jetkcc::characterize::{star_star_nullspace, GammaField, SField};
use jetkcc::exprlang::{parse, Expr};
use jetkcc::jetgeom::{MetricField, MetricKind};
use jetkcc::sampling::rng;
use jetkcc::Dims;
use rand::Rng;

pub fn expr(s: &str, dims: Dims) -> Expr {
    parse(s, dims).unwrap()
}

pub fn field(kind: MetricKind, rows: &[&[&str]], dims: Dims) -> MetricField {
    let rows = rows.iter().map(|r| r.iter().map(|s| expr(s, dims)).collect()).collect();
    MetricField::new(kind, rows).unwrap()
}

fn coord(kind: MetricKind, k: usize) -> String {
    match kind {
        MetricKind::Temporal => format!("t{}", k + 1),
        MetricKind::Spatial => format!("x{}", k + 1),
    }
}

/// Diagonally dominant metric with polynomial and trigonometric entries,
/// positive definite on the unit box.
pub fn random_metric(kind: MetricKind, d: usize, dims: Dims, seed: u64) -> MetricField {
    let mut r = rng(seed, kind as u64 + 100);
    let mut rows = vec![vec![String::new(); d]; d];
    for a in 0..d {
        let k = r.random_range(0..d);
        rows[a][a] = match r.random_range(0..3) {
            0 => format!("{:.3} + {:.3}*sin({})", 2.0 + r.random::<f64>(), 0.5 * r.random::<f64>(), coord(kind, k)),
            1 => format!("{:.3} + {:.3}*{}^2", 2.0 + r.random::<f64>(), 0.5 * r.random::<f64>(), coord(kind, k)),
            _ => format!("{:.3} + {:.3}*cos({})", 2.0 + r.random::<f64>(), 0.5 * r.random::<f64>(), coord(kind, k)),
        };
        for b in a + 1..d {
            let c: f64 = r.random_range(-0.2..0.2);
            let k = r.random_range(0..d);
            let e = if r.random::<bool>() {
                format!("{c:.3}*{}", coord(kind, k))
            } else {
                format!("{c:.3}*sin({})", coord(kind, k))
            };
            rows[a][b] = e.clone();
            rows[b][a] = e;
        }
    }
    let refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let refs: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
    field(kind, &refs, dims)
}

/// Random `Γ^i_{pq}(t, x)`.
pub fn random_gamma(dims: Dims, seed: u64) -> GammaField {
    let mut r = rng(seed, 7);
    GammaField::from_fn(dims, |_, _, _| {
        let c: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)];
        let x = r.random_range(0..dims.n) + 1;
        let t = r.random_range(0..dims.m) + 1;
        expr(&format!("{:.4} + {:.4}*sin(x{x}) + {:.4}*t{t}*x{x}", c[0], c[1], c[2]), dims)
    })
    .unwrap()
}

/// `S` from the constraint null space of a constant temporal metric, with
/// `(t, x)`-dependent weights.
pub fn nullspace_s(dims: Dims, h: &MetricField, seed: u64) -> SField {
    let ns = star_star_nullspace(h, &vec![0.0; dims.m], dims.m).unwrap();
    let mut r = rng(seed, 9);
    let weights: Vec<Vec<Expr>> = (0..dims.n * dims.n * dims.n)
        .map(|_| {
            ns.basis
                .iter()
                .map(|_| expr(&format!("{:.4} + {:.4}*x1", r.random_range(-1.0..1.0), r.random_range(-0.5..0.5)), dims))
                .collect()
        })
        .collect();
    SField::from_fn(dims, |i, nu, a, p, q| {
        let k = ns.unknowns.iter().position(|&u| u == (nu, a)).unwrap();
        let w = &weights[(i * dims.n + p) * dims.n + q];
        Expr::sum_owned(ns.basis.iter().zip(w).map(|(b, w)| w.scale(b[k])))
    })
    .unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |w: f64, x| w.max(x.abs()))
}
