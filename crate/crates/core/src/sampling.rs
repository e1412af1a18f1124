//! Deterministic, index-addressed random sampling.
//!
//! Point `k` of a sampler depends only on `(seed, k)`, never on how many
//! points were drawn before it or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::jetgeom::JetPoint;
use crate::Dims;

/// Returns a generator for stream `stream` of `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub v: (f64, f64),
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox {
            t: (-1.0, 1.0),
            x: (-1.0, 1.0),
            v: (-2.0, 2.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PointSampler {
    pub dims: Dims,
    pub seed: u64,
    pub bounds: SampleBox,
}

impl PointSampler {
    pub fn new(dims: Dims, seed: u64) -> Self {
        PointSampler {
            dims,
            seed,
            bounds: SampleBox::default(),
        }
    }

    pub fn with_bounds(mut self, bounds: SampleBox) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn point(&self, index: u64) -> JetPoint {
        let mut r = rng(self.seed, index);
        let Dims { m, n } = self.dims;
        let b = self.bounds;
        let t = (0..m).map(|_| r.random_range(b.t.0..=b.t.1)).collect();
        let x = (0..n).map(|_| r.random_range(b.x.0..=b.x.1)).collect();
        let v = (0..n)
            .map(|_| (0..m).map(|_| r.random_range(b.v.0..=b.v.1)).collect())
            .collect();
        JetPoint::new(self.dims, t, x, v).expect("sampler produces well-formed points")
    }

    pub fn points(&self, count: usize) -> Vec<JetPoint> {
        (0..count as u64).map(|k| self.point(k)).collect()
    }
}
