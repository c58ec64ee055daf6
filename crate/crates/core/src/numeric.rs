//! Small numeric helpers shared by the solvers and the exact oracle.

use std::ops::AddAssign;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Compensated sum of an iterator of values.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Symmetric 2x2 real matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Inverse, or `None` when the determinant is not strictly positive
    /// relative to the diagonal scale.
    pub fn inverse(&self) -> Option<Sym2> {
        let det = self.det();
        let scale = self.xx.abs() * self.yy.abs();
        if !(det > 1e-300 && det > 1e-14 * scale) {
            return None;
        }
        Some(Sym2::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    /// Quadratic form `v M v^T`.
    pub fn quad(&self, v: (f64, f64)) -> f64 {
        v.0 * v.0 * self.xx + 2.0 * v.0 * v.1 * self.xy + v.1 * v.1 * self.yy
    }

    pub fn mul_vec(&self, v: (f64, f64)) -> (f64, f64) {
        (self.xx * v.0 + self.xy * v.1, self.xy * v.0 + self.yy * v.1)
    }

    /// Matrix product; the result of two symmetric matrices need not be
    /// symmetric, so it is returned as a plain row-major array.
    pub fn mul(&self, other: &Sym2) -> [[f64; 2]; 2] {
        [
            [
                self.xx * other.xx + self.xy * other.xy,
                self.xx * other.xy + self.xy * other.yy,
            ],
            [
                self.xy * other.xx + self.yy * other.xy,
                self.xy * other.xy + self.yy * other.yy,
            ],
        ]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        mean - half_diff.hypot(self.xy)
    }
}

/// `ln(sum(exp(x_i)))` over a slice, stable for large arguments.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + compensated_sum(values.iter().map(|v| (v - max).exp())).ln()
}
