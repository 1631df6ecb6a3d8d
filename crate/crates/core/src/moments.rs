//! Exact mean and variance of the triangle count, leading-order predictions
//! for its higher central moments, and streaming empirical moments.
//!
//! The variance comes from summing the covariances of triangle indicators.
//! Two distinct triangles are independent unless they share an edge, and
//! triangles sharing one edge span four vertices. Each ordered pair of such
//! triangles is fixed by the shared edge and an ordered choice of the two
//! apexes, giving `C(n,2)(n-2)(n-3) = (n)_4 / 2` pairs with covariance
//! `p^5 - p^6`. The diagonal contributes `C(n,3) p^3 (1 - p^3)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, param_err, Error, Result};
use crate::numeric::{binomial, compensated_product, CompensatedSum};

pub const MAX_EMPIRICAL_ORDER: u32 = 8;

pub fn mean_triangles(n: usize, p: f64) -> f64 {
    if n < 3 {
        return 0.0;
    }
    p.powi(3) * binomial(n as u64, 3)
}

/// Number of ordered pairs of distinct triangles in `K_n` sharing exactly one edge.
pub fn edge_sharing_pairs(n: usize) -> f64 {
    if n < 4 {
        return 0.0;
    }
    falling_factorial(n as u64, 4) / 2.0
}

/// Exact `Var[S_n]`. Defined from `n = 3` (a single Bernoulli triangle).
pub fn variance_triangles(n: usize, p: f64) -> Result<f64> {
    if n < 3 {
        return domain_err(format!("triangle count is constant for n = {n}"));
    }
    let p3 = p.powi(3);
    Ok(binomial(n as u64, 3) * p3 * (1.0 - p3) + edge_sharing_pairs(n) * edge_share_covariance(p))
}

/// Covariance of the indicators of two triangles sharing one edge.
pub fn edge_share_covariance(p: f64) -> f64 {
    p.powi(5) * (1.0 - p)
}

/// `n (n-1) ... (n-k+1)`.
pub fn falling_factorial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    compensated_product((0..k).map(|i| (n - i) as f64))
}

/// `(k-1)!!` for even `k`, with `(-1)!! = 1`.
pub fn double_factorial_odd(k: u32) -> f64 {
    (1..k).step_by(2).map(f64::from).product()
}

/// Leading term of `E[(S_n - mu_n)^k]`. Zero for odd `k`, whose moments are
/// of lower order than `sigma_n^k`.
pub fn predicted_kth_central_moment(n: usize, p: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k % 2 == 1 {
        return 0.0;
    }
    let half = k / 2;
    falling_factorial(n as u64, 2 * u64::from(k))
        * edge_share_covariance(p).powi(half as i32)
        * double_factorial_odd(k)
        / 2f64.powi(half as i32)
}

/// `E[N^k]` for a standard normal `N`.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        double_factorial_odd(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// One-pass accumulator of the power sums `sum r^j`, `j = 1..=2 k_max`.
///
/// The doubled range gives standard errors for each reported moment.
#[derive(Clone, Debug)]
pub struct MomentAccumulator {
    k_max: u32,
    count: u64,
    power_sums: Vec<CompensatedSum>,
}

impl MomentAccumulator {
    pub fn new(k_max: u32) -> Result<Self> {
        if k_max == 0 || k_max > MAX_EMPIRICAL_ORDER {
            return param_err(format!("k_max must be in 1..={MAX_EMPIRICAL_ORDER}, got {k_max}"));
        }
        Ok(Self {
            k_max,
            count: 0,
            power_sums: vec![CompensatedSum::new(); 2 * k_max as usize],
        })
    }

    #[inline]
    pub fn push(&mut self, r: f64) {
        self.push_weighted(r, 1);
    }

    /// Adds `r` with multiplicity `weight`.
    pub fn push_weighted(&mut self, r: f64, weight: u64) {
        let w = weight as f64;
        let mut power = 1.0;
        for sum in &mut self.power_sums {
            power *= r;
            sum.add(w * power);
        }
        self.count += weight;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        debug_assert_eq!(self.k_max, other.k_max);
        for (a, b) in self.power_sums.iter_mut().zip(&other.power_sums) {
            a.merge(b);
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> Result<EmpiricalMoments> {
        if self.count == 0 {
            return Err(Error::Empty("moment estimation needs at least one value"));
        }
        let m = self.count as f64;
        let raw: Vec<f64> = self.power_sums.iter().map(|s| s.value() / m).collect();
        let moments = (1..=self.k_max)
            .map(|k| {
                let value = raw[k as usize - 1];
                let second = raw[2 * k as usize - 1];
                let std_error = ((second - value * value).max(0.0) / m).sqrt();
                (k, MomentEstimate { value, std_error })
            })
            .collect();
        Ok(EmpiricalMoments {
            sample_count: self.count,
            moments,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub sample_count: u64,
    pub moments: BTreeMap<u32, MomentEstimate>,
}

impl EmpiricalMoments {
    pub fn get(&self, k: u32) -> Option<MomentEstimate> {
        self.moments.get(&k).copied()
    }
}

/// Sample moments `(1/m) sum r^k` for `k = 1..=k_max`.
pub fn empirical_moments<I>(values: I, k_max: u32) -> Result<EmpiricalMoments>
where
    I: IntoIterator<Item = f64>,
{
    let mut acc = MomentAccumulator::new(k_max)?;
    for r in values {
        acc.push(r);
    }
    acc.finish()
}

/// Closed-form and observed moments for one `(n, p)`; the JSON field names
/// are part of the output format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub p: f64,
    pub mean: f64,
    pub variance: f64,
    pub empirical_moments: BTreeMap<u32, MomentEstimate>,
    pub predicted_moments: BTreeMap<u32, f64>,
    pub sample_count: u64,
}

impl MomentReport {
    pub fn new(n: usize, p: f64, empirical: &EmpiricalMoments) -> Result<Self> {
        let variance = variance_triangles(n, p)?;
        let predicted_moments = empirical
            .moments
            .keys()
            .map(|&k| (k, gaussian_moment(k)))
            .collect();
        Ok(Self {
            n,
            p,
            mean: mean_triangles(n, p),
            variance,
            empirical_moments: empirical.moments.clone(),
            predicted_moments,
            sample_count: empirical.sample_count,
        })
    }
}
