//! Nine-level hierarchy of classic test functions over ten variables.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::hierarchy::{ConstraintBlock, Hierarchy, Kind};
use crate::numerics::SparseMatrix;
use crate::{math, Error};

#[derive(Clone, Debug, PartialEq)]
pub struct TestHierarchySpec {
    /// Offset keeping the McCormick residual positive.
    pub offset: f64,
    pub x0: Vec<f64>,
}

pub const TEST_N: usize = 10;

impl Default for TestHierarchySpec {
    fn default() -> Self {
        // the origin zeroes the gradient of several quadratic levels
        TestHierarchySpec { offset: 20.0, x0: vec![0.5; TEST_N] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    /// `Σ x² + c` over the given variables
    SumOfSquares(f64),
    /// `(1 − a)² + 100(b − a²)²`
    Rosenbrock,
    /// `sin(a + b) + (a − b)² − 1.5a + 2.5b + 1 + offset`
    McCormick(f64),
}

/// Unshifted McCormick function.
pub fn mccormick(a: f64, b: f64) -> f64 {
    math::sin(a + b) + (a - b) * (a - b) - 1.5 * a + 2.5 * b + 1.0
}

/// Scalar test function of a few variables, as a one-row block.
pub struct ScalarBlock {
    pub function: TestFunction,
    pub vars: Vec<usize>,
    pub kind: Kind,
    pub n: usize,
}

impl ScalarBlock {
    fn local(&self, x: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&i| x[i]).collect()
    }

    fn value(&self, y: &[f64]) -> f64 {
        match self.function {
            TestFunction::SumOfSquares(c) => y.iter().map(|v| v * v).sum::<f64>() + c,
            TestFunction::Rosenbrock => {
                let (a, b) = (y[0], y[1]);
                (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
            }
            TestFunction::McCormick(m) => mccormick(y[0], y[1]) + m,
        }
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        match self.function {
            TestFunction::SumOfSquares(_) => y.iter().map(|v| 2.0 * v).collect(),
            TestFunction::Rosenbrock => {
                let (a, b) = (y[0], y[1]);
                vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]
            }
            TestFunction::McCormick(_) => {
                let (a, b) = (y[0], y[1]);
                let c = math::cos(a + b);
                vec![c + 2.0 * (a - b) - 1.5, c - 2.0 * (a - b) + 2.5]
            }
        }
    }

    /// Dense local Hessian, row-major.
    fn hess(&self, y: &[f64]) -> Vec<f64> {
        let k = y.len();
        match self.function {
            TestFunction::SumOfSquares(_) => {
                let mut h = vec![0.0; k * k];
                for i in 0..k {
                    h[i * k + i] = 2.0;
                }
                h
            }
            TestFunction::Rosenbrock => {
                let (a, b) = (y[0], y[1]);
                let haa = 2.0 - 400.0 * (b - a * a) + 800.0 * a * a;
                let hab = -400.0 * a;
                vec![haa, hab, hab, 200.0]
            }
            TestFunction::McCormick(_) => {
                let s = -math::sin(y[0] + y[1]);
                vec![s + 2.0, s - 2.0, s - 2.0, s + 2.0]
            }
        }
    }
}

impl ConstraintBlock for ScalarBlock {
    fn dim(&self) -> usize {
        1
    }

    fn kind(&self) -> Kind {
        self.kind
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        vec![self.value(&self.local(x))]
    }

    fn jacobian(&self, x: &[f64]) -> SparseMatrix {
        let g = self.gradient(&self.local(x));
        let trip: Vec<_> = self.vars.iter().zip(g).map(|(&j, v)| (0, j, v)).collect();
        SparseMatrix::from_triplets(1, self.n, &trip)
    }

    fn hessian(&self, x: &[f64], lambda: &[f64]) -> Option<SparseMatrix> {
        let h = self.hess(&self.local(x));
        let k = self.vars.len();
        let mut trip = Vec::with_capacity(k * k);
        for (a, &i) in self.vars.iter().enumerate() {
            for (b, &j) in self.vars.iter().enumerate() {
                trip.push((i, j, lambda[0] * h[a * k + b]));
            }
        }
        Some(SparseMatrix::from_triplets(self.n, self.n, &trip))
    }

    fn variables(&self) -> Vec<usize> {
        let mut v = self.vars.clone();
        v.sort_unstable();
        v
    }
}

/// `x − target = 0` over all variables.
pub struct Regularization {
    pub n: usize,
}

impl ConstraintBlock for Regularization {
    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> Kind {
        Kind::Equality
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn jacobian(&self, _x: &[f64]) -> SparseMatrix {
        SparseMatrix::identity(self.n)
    }

    fn hessian(&self, _x: &[f64], _lambda: &[f64]) -> Option<SparseMatrix> {
        Some(SparseMatrix::zeros(self.n, self.n))
    }

    fn variables(&self) -> Vec<usize> {
        (0..self.n).collect()
    }
}

fn scalar(function: TestFunction, vars: &[usize], kind: Kind) -> Box<dyn ConstraintBlock> {
    Box::new(ScalarBlock { function, vars: vars.to_vec(), kind, n: TEST_N })
}

/// Levels (0-based variable indices):
/// 1. `x₀² + x₁² − 1.9 ≤ 0`
/// 2. Rosenbrock(x₀, x₁) = 0
/// 3. `x₀² + x₁² − 0.9 = 0`
/// 4. `x₁² + x₂² − 1 = 0`
/// 5. `x₃² + x₄² + 1 ≤ 0`
/// 6. `x₅² + x₆² + x₇² − 4 = 0`
/// 7. Rosenbrock(x₅, x₆) = 0
/// 8. McCormick(x₈, x₉) + offset = 0
/// 9. `x = 0`
pub fn build_test_hierarchy(spec: &TestHierarchySpec) -> Hierarchy {
    use Kind::{Equality as E, Inequality as I};
    use TestFunction::*;
    let mut h = Hierarchy::new(TEST_N);
    h.push_level("disk", vec![scalar(SumOfSquares(-1.9), &[0, 1], I)]);
    h.push_level("rosenbrock-a", vec![scalar(Rosenbrock, &[0, 1], E)]);
    h.push_level("circle", vec![scalar(SumOfSquares(-0.9), &[0, 1], E)]);
    h.push_level("circle-shifted", vec![scalar(SumOfSquares(-1.0), &[1, 2], E)]);
    h.push_level("infeasible-disk", vec![scalar(SumOfSquares(1.0), &[3, 4], I)]);
    h.push_level("sphere", vec![scalar(SumOfSquares(-4.0), &[5, 6, 7], E)]);
    h.push_level("rosenbrock-b", vec![scalar(Rosenbrock, &[5, 6], E)]);
    h.push_level("mccormick", vec![scalar(McCormick(spec.offset), &[8, 9], E)]);
    h.push_level("regularization", vec![Box::new(Regularization { n: TEST_N })]);
    h
}

/// Grid points over `[lo, hi]²` with spacing at most `step`.
fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let cells = math::ceil((hi - lo) / step) as usize;
    (0..=cells).map(|k| lo + (hi - lo) * k as f64 / cells as f64).collect()
}

fn local_minima(values: &[f64], k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 1..k - 1 {
        for j in 1..k - 1 {
            let v = values[i * k + j];
            let mut is_min = true;
            for di in [-1isize, 0, 1] {
                for dj in [-1isize, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let w = values[(i as isize + di) as usize * k + (j as isize + dj) as usize];
                    if w < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                out.push((i, j));
            }
        }
    }
    out
}

/// Interior grid points of `[−5.5, 4]²` that are no larger than their
/// eight neighbours.
pub fn mccormick_local_minima(step: f64) -> Vec<(f64, f64)> {
    let g = grid(-5.5, 4.0, step);
    let k = g.len();
    let vals: Vec<f64> = (0..k * k).map(|p| mccormick(g[p / k], g[p % k])).collect();
    local_minima(&vals, k).into_iter().map(|(i, j)| (g[i], g[j])).collect()
}

/// Verifies that squaring `mccormick + offset` keeps the local minima of
/// the unsquared function on a grid over `[−5.5, 4]²`, i.e. that the
/// shifted function stays positive.
pub fn mccormick_offset_check(offset: f64, step: f64) -> Result<bool, Error> {
    if !(step > 0.0 && step <= 0.05) {
        return Err(Error::InvalidSettings("grid step must lie in (0, 0.05]"));
    }
    let g = grid(-5.5, 4.0, step);
    let k = g.len();
    let plain: Vec<f64> = (0..k * k).map(|p| mccormick(g[p / k], g[p % k])).collect();
    let min_value = plain.iter().fold(f64::INFINITY, |m, v| m.min(v + offset));
    if min_value <= 0.0 {
        return Err(Error::OffsetTooSmall { min_value });
    }
    let squared: Vec<f64> = plain.iter().map(|v| (v + offset) * (v + offset)).collect();
    Ok(local_minima(&plain, k) == local_minima(&squared, k))
}
