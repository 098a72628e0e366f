//! Seeded random HLSP instances.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hierarchy::{HlspData, HlspLevel, Kind};
use crate::numerics::{DenseMatrix, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct RandomHlspSpec {
    pub n: usize,
    pub levels: usize,
    pub rows_per_level: usize,
    /// Share of inequality rows on every level after the first.
    pub inequality_share: f64,
}

impl Default for RandomHlspSpec {
    fn default() -> Self {
        RandomHlspSpec { n: 20, levels: 3, rows_per_level: 10, inequality_share: 0.5 }
    }
}

/// Levels with entries uniform in `[−1, 1]`. The first level holds
/// equalities only; later levels mix in inequalities `A Δx ≤ b`.
pub fn random_hlsp(spec: &RandomHlspSpec, seed: u64) -> HlspData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = Vec::with_capacity(spec.levels);
    for l in 0..spec.levels {
        let m = spec.rows_per_level;
        let d = DenseMatrix::from_fn(m, spec.n, |_, _| rng.gen_range(-1.0..1.0));
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let kinds = (0..m)
            .map(|_| {
                let draw: f64 = rng.gen_range(0.0..1.0);
                if l > 0 && draw < spec.inequality_share {
                    Kind::Inequality
                } else {
                    Kind::Equality
                }
            })
            .collect();
        levels.push(HlspLevel { a: SparseMatrix::from_dense(&d, 0.0), b, kinds, constraint_rows: m, euler: None });
    }
    HlspData { n: spec.n, trust_radius: f64::INFINITY, levels }
}
