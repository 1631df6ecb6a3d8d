//! Triangle counting kernels.
//!
//! Every triangle `u < v < w` is found exactly once by walking the edges
//! `u < v` and intersecting the two rows above `v`.

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, param_err, Result};
use crate::graph::{iter_bits, mask_from, BitAdjacency, WORD_BITS};
use crate::moments;

/// Triangle counts split by how many of their edges lie in a distinguished
/// edge set `E`: `c0` has none, `c3` has all three.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionedCounts {
    pub c0: u64,
    pub c1: u64,
    pub c2: u64,
    pub c3: u64,
}

impl PartitionedCounts {
    pub fn total(&self) -> u64 {
        self.c0 + self.c1 + self.c2 + self.c3
    }

    pub fn as_array(&self) -> [u64; 4] {
        [self.c0, self.c1, self.c2, self.c3]
    }
}

impl std::ops::AddAssign for PartitionedCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.c0 += rhs.c0;
        self.c1 += rhs.c1;
        self.c2 += rhs.c2;
        self.c3 += rhs.c3;
    }
}

#[inline]
fn common_above(a: &[u64], b: &[u64], v: usize) -> u32 {
    let start = (v + 1) / WORD_BITS;
    if start >= a.len() {
        return 0;
    }
    let mut acc = (a[start] & b[start] & mask_from(v + 1)).count_ones();
    for i in (start + 1)..a.len() {
        acc += (a[i] & b[i]).count_ones();
    }
    acc
}

/// Number of triangles in the graph.
pub fn count_triangles(adj: &BitAdjacency) -> u64 {
    let mut total = 0u64;
    for u in 0..adj.n() {
        let row_u = adj.row(u);
        for v in iter_bits(row_u, u + 1) {
            total += u64::from(common_above(row_u, adj.row(v), v));
        }
    }
    total
}

/// Classifies every triangle by the number of its edges inside `special`.
pub fn count_partitioned(adj: &BitAdjacency, special: &BitAdjacency) -> Result<PartitionedCounts> {
    if adj.n() != special.n() {
        return param_err(format!(
            "edge set is over {} vertices, graph has {}",
            special.n(),
            adj.n()
        ));
    }
    let mut buckets = [0u64; 4];
    for u in 0..adj.n() {
        let row_u = adj.row(u);
        let sp_u = special.row(u);
        for v in iter_bits(row_u, u + 1) {
            let row_v = adj.row(v);
            let sp_v = special.row(v);
            let base = usize::from(special.has_edge(u, v));
            let start = (v + 1) / WORD_BITS;
            let (mut none, mut one, mut two) = (0u64, 0u64, 0u64);
            for i in start..row_u.len() {
                let mut common = row_u[i] & row_v[i];
                if i == start {
                    common &= mask_from(v + 1);
                }
                let both = common & sp_u[i] & sp_v[i];
                let either = common & (sp_u[i] ^ sp_v[i]);
                let b = u64::from(both.count_ones());
                let e = u64::from(either.count_ones());
                two += b;
                one += e;
                none += u64::from(common.count_ones()) - b - e;
            }
            buckets[base] += none;
            buckets[base + 1] += one;
            buckets[base + 2] += two;
        }
    }
    Ok(PartitionedCounts {
        c0: buckets[0],
        c1: buckets[1],
        c2: buckets[2],
        c3: buckets[3],
    })
}

/// `(s - p^3 C(n,3)) / sigma_n`.
pub fn normalize_count(s: u64, n: usize, p: f64) -> Result<f64> {
    if n < 4 {
        return domain_err(format!("normalisation needs n >= 4, got {n}"));
    }
    let sigma = moments::variance_triangles(n, p)?.sqrt();
    Ok((s as f64 - moments::mean_triangles(n, p)) / sigma)
}
