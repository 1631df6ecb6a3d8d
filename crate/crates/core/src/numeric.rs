//! Small floating-point helpers shared by the estimators.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
///
/// `merge` folds another partial sum in, so per-chunk accumulators can be
/// combined after a parallel pass. Merging in a fixed order gives
/// bit-identical results regardless of how the chunks were scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Product of `factors` carrying the rounding error of each step in a
/// second term (error-free transformation via fused multiply-add).
pub fn compensated_product<I: IntoIterator<Item = f64>>(factors: I) -> f64 {
    let mut hi = 1.0f64;
    let mut lo = 0.0f64;
    for x in factors {
        let next = hi * x;
        let err = hi.mul_add(x, -next);
        lo = lo * x + err;
        hi = next;
    }
    hi + lo
}

/// `C(n, k)` as a float. Exact while the result stays below 2^53.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}
