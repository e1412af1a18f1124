use jetkcc::exprlang::parse;
use jetkcc::jetgeom::{build_affine_system, MetricField, MetricGeometry, MetricKind};
use jetkcc::kcc::{jacobi_identity_residual, Invariant, KccSystem, SectionMap, VariationField};
use jetkcc::sampling::PointSampler;
use jetkcc::{Dims, PdeSystem};

fn metric(kind: MetricKind, rows: &[&[&str]], dims: Dims) -> MetricGeometry {
    let rows = rows.iter().map(|r| r.iter().map(|s| parse(s, dims).unwrap()).collect()).collect();
    MetricGeometry::new(MetricField::new(kind, rows).unwrap())
}

#[test]
fn oscillator_reduces_to_classical_values() {
    let dims = Dims::new(1, 1).unwrap();
    let f = PdeSystem::symmetric(dims, |_, _, _| parse("x1", dims).unwrap()).unwrap();
    let kcc = KccSystem::new(f, MetricGeometry::new(MetricField::identity(MetricKind::Temporal, 1))).unwrap();
    for p in PointSampler::new(dims, 7).points(10) {
        let eps = kcc.evaluate(Invariant::Epsilon, &p).unwrap();
        assert_eq!(eps.values.data(), &[-p.x[0]]);
        let pv = kcc.evaluate(Invariant::P, &p).unwrap();
        assert_eq!(pv.values.data(), &[-1.0]);
    }
    assert!(kcc.is_structural_zero(Invariant::R));
    assert!(kcc.is_structural_zero(Invariant::D));
}

#[test]
fn affine_first_invariant_vanishes() {
    let dims = Dims::new(2, 2).unwrap();
    let h = metric(MetricKind::Temporal, &[&["2+sin(t1)", "0.3*t2"], &["0.3*t2", "3+t1^2"]], dims);
    let phi = metric(MetricKind::Spatial, &[&["1+x2^2", "0.1*x1"], &["0.1*x1", "2+cos(x1)"]], dims);
    let f = build_affine_system(&h, &phi).unwrap();
    let kcc = KccSystem::new(f, h).unwrap();
    for p in PointSampler::new(dims, 1).points(20) {
        let eps = kcc.evaluate(Invariant::Epsilon, &p).unwrap();
        let worst = eps.values.data().iter().fold(0.0f64, |w, x| w.max(x.abs()));
        assert!(worst < 1e-9, "{worst}");
    }
    assert!(kcc.is_structural_zero(Invariant::D));
}

#[test]
fn sphere_equator_jacobi_field() {
    let dims = Dims::new(1, 2).unwrap();
    let h = MetricGeometry::new(MetricField::identity(MetricKind::Temporal, 1));
    let phi = metric(MetricKind::Spatial, &[&["1", "0"], &["0", "sin(x1)^2"]], dims);
    let f = build_affine_system(&h, &phi).unwrap();
    let kcc = KccSystem::new(f, h).unwrap();
    let sigma = SectionMap::new(dims, vec![parse("pi/2", dims).unwrap(), parse("t1", dims).unwrap()]).unwrap();
    let xi = VariationField::new(dims, vec![parse("sin(t1)", dims).unwrap(), parse("0", dims).unwrap()]).unwrap();
    for t in [0.1, 0.5, 1.3] {
        let r = jacobi_identity_residual(&kcc, &sigma, &xi, &[t]).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-6), "{r:?}");
    }
}
