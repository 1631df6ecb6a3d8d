//! Exact distribution of the triangle count for small `n` by enumerating
//! every labelled graph.
//!
//! Enumeration tallies graphs by `(triangles, edges)` in integers, so one pass
//! serves every `p`: the probability of triangle count `s` is
//! `sum_e tally[s][e] p^e (1-p)^(m-e)`. Edge masks are visited in Gray-code
//! order, so each step flips one pair and moves the triangle count by the
//! codegree of its endpoints.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::numeric::CompensatedSum;
use crate::spectral::LatticeSpec;

/// Largest `n` enumerated without an explicit override (2^21 graphs).
pub const MAX_EXACT_N: usize = 7;

/// Upper bound accepted even with the override (2^28 graphs).
pub const HARD_MAX_EXACT_N: usize = 8;

const SHARD_BITS: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmfKind {
    Exact,
    Empirical,
}

/// Probability mass function of the triangle count on its integer support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    pub n: usize,
    pub p: f64,
    pub support: Vec<u64>,
    pub probs: Vec<f64>,
    pub kind: PmfKind,
    pub sample_count: u64,
    /// Raw frequencies behind an empirical table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
}

impl PmfTable {
    /// Empirical table from a histogram of observed counts.
    pub fn from_histogram(n: usize, p: f64, histogram: &BTreeMap<u64, u64>) -> Result<Self> {
        let total: u64 = histogram.values().sum();
        if total == 0 {
            return Err(Error::Empty("histogram has no observations"));
        }
        let m = total as f64;
        let (support, counts): (Vec<u64>, Vec<u64>) =
            histogram.iter().filter(|(_, &c)| c > 0).map(|(&k, &c)| (k, c)).unzip();
        let probs = counts.iter().map(|&c| c as f64 / m).collect();
        Ok(Self {
            n,
            p,
            support,
            probs,
            kind: PmfKind::Empirical,
            sample_count: total,
            counts: Some(counts),
        })
    }

    /// Degenerate exact table with all mass on `k`.
    pub fn point_mass(n: usize, p: f64, k: u64) -> Self {
        Self {
            n,
            p,
            support: vec![k],
            probs: vec![1.0],
            kind: PmfKind::Exact,
            sample_count: 0,
            counts: None,
        }
    }

    pub fn prob(&self, k: u64) -> f64 {
        self.support
            .binary_search(&k)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().copied().collect::<CompensatedSum>().value()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.len() != self.probs.len() || self.support.is_empty() {
            return Err(Error::Format("support and probabilities must be non-empty and aligned".into()));
        }
        if self.support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("support must be strictly increasing".into()));
        }
        let max = crate::numeric::binomial(self.n as u64, 3) as u64;
        if self.support.last().is_some_and(|&k| k > max) {
            return Err(Error::Format(format!("support exceeds C({}, 3)", self.n)));
        }
        if self.probs.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::Format("probabilities must lie in [0, 1]".into()));
        }
        if (self.total_mass() - 1.0).abs() > 1e-12 {
            return Err(Error::Format(format!("probabilities sum to {}", self.total_mass())));
        }
        Ok(())
    }

    /// Writes the `k,prob` CSV form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "prob"])?;
        for (k, q) in self.iter() {
            w.write_record([k.to_string(), format!("{q:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `k,prob` CSV form; the header-free metadata comes from the caller.
    pub fn read_csv<R: Read>(
        reader: R,
        n: usize,
        p: f64,
        kind: PmfKind,
        sample_count: u64,
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            k: u64,
            prob: f64,
        }
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            support.push(row.k);
            probs.push(row.prob);
        }
        let table = Self {
            n,
            p,
            support,
            probs,
            kind,
            sample_count,
            counts: None,
        };
        table.validate()?;
        Ok(table)
    }
}

/// Graph counts by `(triangle count, edge count)` over all labelled graphs on `n` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumerationTally {
    n: usize,
    pairs: usize,
    /// `tally[s][e]`: graphs with `s` triangles and `e` edges.
    tally: Vec<Vec<u64>>,
}

impl EnumerationTally {
    /// Enumerates all `2^C(n,2)` graphs. `n > 7` needs `allow_large`.
    pub fn enumerate(n: usize, allow_large: bool) -> Result<Self> {
        Self::enumerate_sharded(n, allow_large, SHARD_BITS)
    }

    /// Same as [`enumerate`](Self::enumerate) with an explicit number of
    /// fixed high mask bits per shard. The result does not depend on it.
    pub fn enumerate_sharded(n: usize, allow_large: bool, shard_bits: u32) -> Result<Self> {
        if n == 0 {
            return param_err("vertex count must be positive");
        }
        if n > MAX_EXACT_N && !allow_large {
            return param_err(format!(
                "exact enumeration is limited to n <= {MAX_EXACT_N} ({} graphs at n = {n}); pass the override to force it",
                1u128 << (n * (n - 1) / 2)
            ));
        }
        if n > HARD_MAX_EXACT_N {
            return param_err(format!("exact enumeration refuses n > {HARD_MAX_EXACT_N}"));
        }
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .collect();
        let m = pairs.len();
        let max_tri = n * n.saturating_sub(1) * n.saturating_sub(2) / 6;
        let shard_bits = shard_bits.min(m as u32);
        let low_bits = m as u32 - shard_bits;

        let tally = (0u64..1 << shard_bits)
            .into_par_iter()
            .map(|high| enumerate_shard(n, &pairs, max_tri, high, low_bits))
            .reduce(
                || vec![vec![0u64; m + 1]; max_tri + 1],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(&b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    a
                },
            );
        Ok(Self { n, pairs: m, tally })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn graphs_with(&self, triangles: usize, edges: usize) -> u64 {
        self.tally
            .get(triangles)
            .and_then(|row| row.get(edges))
            .copied()
            .unwrap_or(0)
    }

    /// The exact triangle-count distribution under edge probability `p`.
    pub fn pmf(&self, p: f64) -> Result<PmfTable> {
        if !(p > 0.0 && p < 1.0) {
            return param_err(format!("edge probability {p} is not in (0, 1)"));
        }
        let weights: Vec<f64> = (0..=self.pairs)
            .map(|e| p.powi(e as i32) * (1.0 - p).powi((self.pairs - e) as i32))
            .collect();
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for (s, row) in self.tally.iter().enumerate() {
            if row.iter().all(|&c| c == 0) {
                continue;
            }
            let mass: CompensatedSum = row
                .iter()
                .zip(&weights)
                .map(|(&c, &w)| c as f64 * w)
                .collect();
            support.push(s as u64);
            probs.push(mass.value());
        }
        Ok(PmfTable {
            n: self.n,
            p,
            support,
            probs,
            kind: PmfKind::Exact,
            sample_count: 0,
            counts: None,
        })
    }
}

fn enumerate_shard(
    n: usize,
    pairs: &[(usize, usize)],
    max_tri: usize,
    high: u64,
    low_bits: u32,
) -> Vec<Vec<u64>> {
    let m = pairs.len();
    let mut tally = vec![vec![0u64; m + 1]; max_tri + 1];
    let mut rows = vec![0u64; n];
    let mut edges = 0usize;
    for (i, &(u, v)) in pairs.iter().enumerate() {
        if i as u32 >= low_bits && high >> (i as u32 - low_bits) & 1 == 1 {
            rows[u] |= 1 << v;
            rows[v] |= 1 << u;
            edges += 1;
        }
    }
    let mut triangles: usize = 0;
    for u in 0..n {
        for v in (u + 1)..n {
            if rows[u] >> v & 1 == 1 {
                triangles += (rows[u] & rows[v] & !((2u64 << v) - 1)).count_ones() as usize;
            }
        }
    }
    tally[triangles][edges] += 1;
    for step in 1u64..1 << low_bits {
        let (u, v) = pairs[step.trailing_zeros() as usize];
        let common = (rows[u] & rows[v]).count_ones() as usize;
        if rows[u] >> v & 1 == 1 {
            rows[u] &= !(1 << v);
            rows[v] &= !(1 << u);
            triangles -= common;
            edges -= 1;
        } else {
            rows[u] |= 1 << v;
            rows[v] |= 1 << u;
            triangles += common;
            edges += 1;
        }
        tally[triangles][edges] += 1;
    }
    tally
}

/// Exact pmf of the triangle count in G(n, p) for `n <= 7`.
pub fn exact_pmf(n: usize, p: f64) -> Result<PmfTable> {
    EnumerationTally::enumerate(n, false)?.pmf(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfStatistics {
    pub mean: f64,
    pub variance: f64,
    /// Residue frequencies `Pr[S = a mod q]`, indexed by `a`, for each requested `q`.
    pub mod_q: BTreeMap<u64, Vec<f64>>,
}

/// Mean, variance and residue marginals of a tabulated distribution.
pub fn pmf_statistics(pmf: &PmfTable, moduli: &[u64]) -> Result<PmfStatistics> {
    if moduli.iter().any(|&q| q < 2) {
        return param_err("moduli must be at least 2");
    }
    let mean: CompensatedSum = pmf.iter().map(|(k, q)| k as f64 * q).collect();
    let mean = mean.value();
    let variance: CompensatedSum = pmf
        .iter()
        .map(|(k, q)| {
            let d = k as f64 - mean;
            d * d * q
        })
        .collect();
    let mod_q = moduli
        .iter()
        .map(|&q| {
            let mut sums = vec![CompensatedSum::new(); q as usize];
            for (k, prob) in pmf.iter() {
                sums[(k % q) as usize].add(prob);
            }
            (q, sums.iter().map(CompensatedSum::value).collect())
        })
        .collect();
    Ok(PmfStatistics {
        mean,
        variance: variance.value(),
        mod_q,
    })
}

/// `sum_k Pr[S = k] exp(i t (k - a) / b)`.
pub fn exact_charfun(pmf: &PmfTable, lattice: &LatticeSpec, t: f64) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for (k, q) in pmf.iter() {
        let (s, c) = (t * lattice.point(k as i64)).sin_cos();
        re.add(q * c);
        im.add(q * s);
    }
    Complex64::new(re.value(), im.value())
}
