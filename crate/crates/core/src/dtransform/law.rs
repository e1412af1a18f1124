use crate::dtransform::{CoordinateChange, Jacobians};
use crate::jetgeom::JetPoint;
use crate::tensor::{DTensorValue, Slot, Tensor};
use crate::{Dims, Error, Result};

/// `(t̃, x̃, x̃^i_α = ∂x̃^i/∂x^j ∂t^β/∂t̃^α x^j_β)`.
pub fn transform_jet_point(cc: &CoordinateChange, p: &JetPoint) -> Result<JetPoint> {
    let jac = cc.jacobians(p)?;
    transform_with(cc, p, &jac)
}

pub(crate) fn transform_with(cc: &CoordinateChange, p: &JetPoint, jac: &Jacobians) -> Result<JetPoint> {
    let (t, x) = cc.map_base(p)?;
    let Dims { m, n } = p.dims();
    let v = (0..n)
        .map(|i| {
            (0..m)
                .map(|a| {
                    let mut s = 0.0;
                    for j in 0..n {
                        for b in 0..m {
                            s += jac.ax.get(&[i, j]) * p.v[j][b] * jac.bt.get(&[b, a]);
                        }
                    }
                    s
                })
                .collect()
        })
        .collect();
    JetPoint::new(p.dims(), t, x, v)
}

/// Contracts axis `axis` of `t` with `mat[new, old]`.
fn mode_product(t: &Tensor<f64>, axis: usize, mat: impl Fn(usize, usize) -> f64) -> Tensor<f64> {
    let extent = t.shape()[axis];
    Tensor::from_fn(t.shape().to_vec(), |idx| {
        let mut old = idx.to_vec();
        let mut s = 0.0;
        for k in 0..extent {
            old[axis] = k;
            s += mat(idx[axis], k) * t.get(&old);
        }
        s
    })
}

/// Applies the d-tensor law with one Jacobian factor per slot.
pub fn transform_dtensor_with(val: &DTensorValue, jac: &Jacobians) -> DTensorValue {
    let mut values = val.values.clone();
    for (axis, slot) in val.signature.slots().iter().enumerate() {
        values = match slot {
            Slot::TemporalUp => mode_product(&values, axis, |new, old| *jac.jt.get(&[new, old])),
            Slot::TemporalDown => mode_product(&values, axis, |new, old| *jac.bt.get(&[old, new])),
            Slot::SpatialUp => mode_product(&values, axis, |new, old| *jac.ax.get(&[new, old])),
            Slot::SpatialDown => mode_product(&values, axis, |new, old| *jac.cx.get(&[old, new])),
        };
    }
    DTensorValue {
        signature: val.signature.clone(),
        values,
    }
}

/// Components of `val` (given at the old-coordinate point `p`) in the new
/// coordinates.
pub fn transform_dtensor(val: &DTensorValue, cc: &CoordinateChange, p: &JetPoint) -> Result<DTensorValue> {
    let dims = p.dims();
    if val.values.shape() != val.signature.shape(dims).as_slice() {
        return Err(Error::Dimension(format!(
            "d-tensor of shape {:?} does not match its signature at (m={}, n={})",
            val.values.shape(),
            dims.m,
            dims.n
        )));
    }
    let jac = cc.jacobians(p)?;
    Ok(transform_dtensor_with(val, &jac))
}

fn check_shape(what: &str, t: &Tensor<f64>, shape: &[usize]) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::Dimension(format!(
            "{what} needs shape {shape:?}, got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// `T^k_{γν} ∂x̃^i/∂x^k ∂t^γ/∂t̃^α ∂t^ν/∂t̃^β`.
fn tensorial_part(t: &Tensor<f64>, jac: &Jacobians, dims: Dims) -> Tensor<f64> {
    let Dims { m, n } = dims;
    Tensor::from_fn(vec![n, m, m], |idx| {
        let (i, a, b) = (idx[0], idx[1], idx[2]);
        let mut s = 0.0;
        for k in 0..n {
            for g in 0..m {
                for nu in 0..m {
                    s += t.get(&[k, g, nu]) * jac.ax.get(&[i, k]) * jac.bt.get(&[g, a]) * jac.bt.get(&[nu, b]);
                }
            }
        }
        s
    })
}

/// `∂t^μ/∂t̃^β ∂x̃^i_α/∂t^μ = ∂x̃^i/∂x^j x^j_δ ∂²t^δ/∂t̃^α∂t̃^β`.
fn temporal_inhomogeneity(p: &JetPoint, jac: &Jacobians) -> Tensor<f64> {
    let Dims { m, n } = p.dims();
    Tensor::from_fn(vec![n, m, m], |idx| {
        let (i, a, b) = (idx[0], idx[1], idx[2]);
        let mut s = 0.0;
        for j in 0..n {
            for d in 0..m {
                s += jac.ax.get(&[i, j]) * p.v[j][d] * jac.d2t.get(&[d, a, b]);
            }
        }
        s
    })
}

/// `∂x̃^i_α/∂x^r = ∂²x̃^i/∂x^j∂x^r ∂t^δ/∂t̃^α x^j_δ`, laid out `[i, α, r]`.
fn spatial_inhomogeneity(p: &JetPoint, jac: &Jacobians) -> Tensor<f64> {
    let Dims { m, n } = p.dims();
    Tensor::from_fn(vec![n, m, n], |idx| {
        let (i, a, r) = (idx[0], idx[1], idx[2]);
        let mut s = 0.0;
        for j in 0..n {
            for d in 0..m {
                s += jac.dax.get(&[i, j, r]) * jac.bt.get(&[d, a]) * p.v[j][d];
            }
        }
        s
    })
}

/// Temporal semispray rule: `2H̃ = 2H ∂x̃/∂x ∂t/∂t̃ ∂t/∂t̃ − ∂t^μ/∂t̃^β ∂x̃^i_α/∂t^μ`.
pub fn transform_temporal_semispray(h: &Tensor<f64>, cc: &CoordinateChange, p: &JetPoint) -> Result<Tensor<f64>> {
    let dims = p.dims();
    check_shape("temporal semispray", h, &[dims.n, dims.m, dims.m])?;
    let jac = cc.jacobians(p)?;
    let main = tensorial_part(h, &jac, dims);
    let inh = temporal_inhomogeneity(p, &jac);
    Ok(Tensor::from_fn(main.shape().to_vec(), |i| main.get(i) - 0.5 * inh.get(i)))
}

/// Temporal connection rule: `M̃ = M ∂x̃/∂x ∂t/∂t̃ ∂t/∂t̃ − ∂t^μ/∂t̃^β ∂x̃^i_α/∂t^μ`.
pub fn transform_temporal_connection(mc: &Tensor<f64>, cc: &CoordinateChange, p: &JetPoint) -> Result<Tensor<f64>> {
    let dims = p.dims();
    check_shape("temporal connection", mc, &[dims.n, dims.m, dims.m])?;
    let jac = cc.jacobians(p)?;
    let main = tensorial_part(mc, &jac, dims);
    let inh = temporal_inhomogeneity(p, &jac);
    Ok(Tensor::from_fn(main.shape().to_vec(), |i| main.get(i) - inh.get(i)))
}

/// Spatial semispray rule:
/// `2G̃ = 2G ∂x̃/∂x ∂t/∂t̃ ∂t/∂t̃ − ∂x^r/∂x̃^s ∂x̃^i_α/∂x^r x̃^s_β`.
pub fn transform_spatial_semispray(g: &Tensor<f64>, cc: &CoordinateChange, p: &JetPoint) -> Result<Tensor<f64>> {
    let dims = p.dims();
    let Dims { m, n } = dims;
    check_shape("spatial semispray", g, &[n, m, m])?;
    let jac = cc.jacobians(p)?;
    let q = transform_with(cc, p, &jac)?;
    let main = tensorial_part(g, &jac, dims);
    let inh = spatial_inhomogeneity(p, &jac);
    Ok(Tensor::from_fn(vec![n, m, m], |idx| {
        let (i, a, b) = (idx[0], idx[1], idx[2]);
        let mut s = 0.0;
        for r in 0..n {
            for t in 0..n {
                s += jac.cx.get(&[r, t]) * inh.get(&[i, a, r]) * q.v[t][b];
            }
        }
        main.get(idx) - 0.5 * s
    }))
}

/// Spatial connection rule:
/// `Ñ^(i)_(α)j = N^(k)_(γ)l ∂x̃^i/∂x^k ∂t^γ/∂t̃^α ∂x^l/∂x̃^j − ∂x^r/∂x̃^j ∂x̃^i_α/∂x^r`.
pub fn transform_spatial_connection(nc: &Tensor<f64>, cc: &CoordinateChange, p: &JetPoint) -> Result<Tensor<f64>> {
    let Dims { m, n } = p.dims();
    check_shape("spatial connection", nc, &[n, m, n])?;
    let jac = cc.jacobians(p)?;
    let inh = spatial_inhomogeneity(p, &jac);
    Ok(Tensor::from_fn(vec![n, m, n], |idx| {
        let (i, a, j) = (idx[0], idx[1], idx[2]);
        let mut s = 0.0;
        for k in 0..n {
            for g in 0..m {
                for l in 0..n {
                    s += nc.get(&[k, g, l]) * jac.ax.get(&[i, k]) * jac.bt.get(&[g, a]) * jac.cx.get(&[l, j]);
                }
            }
        }
        for r in 0..n {
            s -= jac.cx.get(&[r, j]) * inh.get(&[i, a, r]);
        }
        s
    }))
}
