//! Conditioning experiments behind the characteristic-function decay bounds.
//!
//! The decomposition experiment splits the vertices into halves `U` and `V`,
//! lays `k` disjoint perfect matchings between them (their union is `E`, the
//! remaining pairs are `F`) and counts triangles by how many edges they have
//! in `E`: `S = C + Y + Z` with zero, one and two edges respectively. No
//! triangle can have all three edges in a bipartite set, so `c3 = 0`.
//!
//! The h-vector experiment draws two independent `U`-to-`V` neighbourhood
//! matrices `A`, `A'` and records, for each pair `{v, w}` of `V`, how many
//! `u` see both `v` and `w` under `A` minus the same count under `A'`.

use std::io::Write;

use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::count::{count_partitioned, count_triangles, PartitionedCounts};
use crate::error::{param_err, Error, Result};
use crate::graph::{
    codegree_unchecked, edge_threshold, iter_bits, pair_index, restrict_to_edge_set, sample_stream,
    words_for, BitAdjacency, GraphParams, WORD_BITS,
};
use crate::sampler::{fold_indices, fold_samples};

/// Exponents of the magnitude band `(|U|^0.49, |U|^0.51)` for h coordinates.
pub const BAND_LOW_EXPONENT: f64 = 0.49;
pub const BAND_HIGH_EXPONENT: f64 = 0.51;

/// `k` disjoint perfect matchings between `U = 0..n/2` and `V = n/2..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingPlan {
    pub n: usize,
    pub k: usize,
    /// `matchings[j]` pairs `u_i` with `v_{(i + j) mod n/2}`.
    pub matchings: Vec<Vec<(usize, usize)>>,
    /// Union of the matchings.
    pub union: BitAdjacency,
    /// All pairs not in the union.
    pub rest: BitAdjacency,
}

impl MatchingPlan {
    pub fn half(&self) -> usize {
        self.n / 2
    }

    pub fn union_size(&self) -> usize {
        self.k * self.half()
    }
}

/// The `j`-th cyclic matching (0-based): `u_i -- v_{(i + j) mod n/2}`.
pub fn cyclic_matching(n: usize, j: usize) -> Vec<(usize, usize)> {
    let half = n / 2;
    (0..half).map(|i| (i, half + (i + j) % half)).collect()
}

/// Cyclic-shift construction of `k` disjoint perfect matchings.
pub fn build_matching_plan(n: usize, k: usize) -> Result<MatchingPlan> {
    if n == 0 || n % 2 == 1 {
        return param_err(format!("matching plans need a positive even n, got {n}"));
    }
    if k == 0 || k > n / 4 {
        return param_err(format!("k must be in 1..={} for n = {n}, got {k}", n / 4));
    }
    let matchings: Vec<Vec<(usize, usize)>> = (0..k).map(|j| cyclic_matching(n, j)).collect();
    let all: Vec<(usize, usize)> = matchings.iter().flatten().copied().collect();
    let union = BitAdjacency::from_edges(n, &all)?;
    let rest = union.complement();
    Ok(MatchingPlan {
        n,
        k,
        matchings,
        union,
        rest,
    })
}

/// Running statistics of one integer quantity over trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct IntMoments {
    count: u64,
    sum: i128,
    sum_sq: i128,
}

impl IntMoments {
    fn push(&mut self, x: i64) {
        self.count += 1;
        self.sum += i128::from(x);
        self.sum_sq += i128::from(x) * i128::from(x);
    }

    fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn mean(&self) -> f64 {
        self.sum as f64 / self.count as f64
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let m = self.count as i128;
        // m * sum_sq - sum^2 is exact in integers.
        let num = m * self.sum_sq - self.sum * self.sum;
        num as f64 / (m as f64 * (m - 1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedEdge {
    pub u: usize,
    pub v: usize,
    /// Number of `w` with both `{u, w}` and `{v, w}` in `F`; `Y_e ~ Bin(m_e, p^2)`.
    pub paths_available: usize,
    pub mean: f64,
    pub variance: f64,
    pub expected_mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionStats {
    pub k: usize,
    pub union_size: usize,
    /// Sum of the partitioned counts over all trials.
    pub totals: PartitionedCounts,
    pub c_mean: f64,
    pub y_mean: f64,
    /// Estimate of `zeta = E[Z]`.
    pub z_mean: f64,
    pub z_var: f64,
    /// `6 n k^3`.
    pub z_var_bound: f64,
    /// Smallest `Y_e` seen over all `e` in `E` and all trials.
    pub y_e_min: u64,
    /// Mean of `Y_e` over all `e` in `E` and all trials.
    pub y_e_mean: f64,
    /// `n p^2 / 2`.
    pub bad_threshold: f64,
    /// Fraction of trials with some `Y_e` below the threshold.
    pub bad_l_freq: f64,
    pub tracked_edge: TrackedEdge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateStat {
    pub v: usize,
    pub w: usize,
    pub mean: f64,
    pub variance: f64,
    pub in_band_freq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HVectorStats {
    pub u_size: usize,
    pub v_size: usize,
    pub coordinates: usize,
    /// Mean and variance of a coordinate, pooled over coordinates and trials.
    pub coord_mean: f64,
    pub coord_variance: f64,
    /// `2 |U| p^2 (1 - p^2)`.
    pub expected_variance: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub in_band_freq: f64,
    /// Estimate of `gamma`: fraction of coordinates outside the band.
    pub lambda_e_freq: f64,
    /// Fraction of trials with more than `|V|^2 / 4` coordinates outside the band.
    pub lambda_freq: f64,
    /// `|U| = 1` only: fraction of trials with `|J xor J'| >= n p (1-p) / 2`.
    pub good_pair_freq: Option<f64>,
    /// Per-trial `#{h_e > 0} - #{h_e < 0}`, averaged over trials.
    pub sign_balance_mean: f64,
    pub sign_balance_std_error: f64,
    #[serde(skip)]
    pub per_coordinate: Vec<CoordinateStat>,
}

impl HVectorStats {
    /// Per-coordinate CSV: `v,w,mean,variance,in_band_freq`.
    pub fn write_coordinate_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["v", "w", "mean", "variance", "in_band_freq"])?;
        for c in &self.per_coordinate {
            w.write_record([
                c.v.to_string(),
                c.w.to_string(),
                format!("{:e}", c.mean),
                format!("{:e}", c.variance),
                format!("{:e}", c.in_band_freq),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    pub trials: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decomposition: Option<DecompositionStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hvector: Option<HVectorStats>,
}

#[derive(Clone, Debug, Default)]
struct DecompositionAcc {
    totals: PartitionedCounts,
    c: IntMoments,
    y: IntMoments,
    z: IntMoments,
    y_e_all: IntMoments,
    tracked: IntMoments,
    y_e_min: u64,
    bad_trials: u64,
    violation: Option<String>,
}

/// Samples `trials` graphs and measures the `C + Y + Z` split against `plan`.
pub fn run_decomposition_trials(params: &GraphParams, plan: &MatchingPlan, trials: u64) -> Result<ProbeReport> {
    params.validate()?;
    if trials == 0 {
        return param_err("trial budget must be positive");
    }
    if plan.n != params.n {
        return param_err(format!("plan is for n = {}, parameters have n = {}", plan.n, params.n));
    }
    let n = params.n;
    let p = params.p;
    let bad_threshold = n as f64 * p * p / 2.0;
    let union_edges: Vec<(usize, usize)> = plan.union.edges().collect();
    let tracked = plan.matchings[0][0];

    let acc = fold_samples(
        params,
        trials,
        || DecompositionAcc {
            y_e_min: u64::MAX,
            ..Default::default()
        },
        |acc, idx, g| {
            let parts = match count_partitioned(g, &plan.union) {
                Ok(parts) => parts,
                Err(e) => {
                    acc.violation.get_or_insert(e.to_string());
                    return;
                }
            };
            let total = count_triangles(g);
            if parts.c3 != 0 || parts.total() != total {
                acc.violation.get_or_insert(format!(
                    "sample {idx}: partition {:?} does not sum to {total} with c3 = 0",
                    parts.as_array()
                ));
            }
            acc.totals += parts;
            acc.c.push(parts.c0 as i64);
            acc.y.push(parts.c1 as i64);
            acc.z.push(parts.c2 as i64);
            let f_only = restrict_to_edge_set(g, &plan.rest).expect("plan matches graph size");
            let mut trial_min = u64::MAX;
            for &(u, v) in &union_edges {
                let y_e = u64::from(codegree_unchecked(&f_only, u, v));
                acc.y_e_all.push(y_e as i64);
                trial_min = trial_min.min(y_e);
                if (u, v) == tracked {
                    acc.tracked.push(y_e as i64);
                }
            }
            acc.y_e_min = acc.y_e_min.min(trial_min);
            if (trial_min as f64) < bad_threshold {
                acc.bad_trials += 1;
            }
        },
        |total, part| {
            total.totals += part.totals;
            total.c.merge(&part.c);
            total.y.merge(&part.y);
            total.z.merge(&part.z);
            total.y_e_all.merge(&part.y_e_all);
            total.tracked.merge(&part.tracked);
            total.y_e_min = total.y_e_min.min(part.y_e_min);
            total.bad_trials += part.bad_trials;
            if total.violation.is_none() {
                total.violation = part.violation;
            }
        },
    )?;
    if let Some(msg) = acc.violation {
        return Err(Error::Invariant(msg));
    }

    let (tu, tv) = tracked;
    let paths_available = (0..n)
        .filter(|&w| w != tu && w != tv && plan.rest.has_edge(tu, w) && plan.rest.has_edge(tv, w))
        .count();
    let tracked_var = acc.tracked.variance();
    let k = plan.k as f64;
    Ok(ProbeReport {
        n,
        p,
        seed: params.seed,
        trials,
        decomposition: Some(DecompositionStats {
            k: plan.k,
            union_size: plan.union_size(),
            totals: acc.totals,
            c_mean: acc.c.mean(),
            y_mean: acc.y.mean(),
            z_mean: acc.z.mean(),
            z_var: acc.z.variance(),
            z_var_bound: 6.0 * n as f64 * k * k * k,
            y_e_min: acc.y_e_min,
            y_e_mean: acc.y_e_all.mean(),
            bad_threshold,
            bad_l_freq: acc.bad_trials as f64 / trials as f64,
            tracked_edge: TrackedEdge {
                u: tu,
                v: tv,
                paths_available,
                mean: acc.tracked.mean(),
                variance: tracked_var,
                expected_mean: paths_available as f64 * p * p,
                std_error: (tracked_var / trials as f64).sqrt(),
            },
        }),
        hvector: None,
    })
}

/// `U`-to-`V` neighbourhood matrix: row `u` is the indicator of `N(u) ∩ V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteAdjacency {
    u_size: usize,
    v_size: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BipartiteAdjacency {
    pub fn empty(u_size: usize, v_size: usize) -> Self {
        let words_per_row = words_for(v_size);
        Self {
            u_size,
            v_size,
            words_per_row,
            bits: vec![0; u_size * words_per_row],
        }
    }

    /// Independent `p`-biased entries drawn from the counter-based stream `(seed, stream)`.
    pub fn sample(u_size: usize, v_size: usize, p: f64, seed: u64, stream: u64) -> Self {
        let mut out = Self::empty(u_size, v_size);
        let threshold = edge_threshold(p);
        let mut rng = sample_stream(seed, stream);
        for u in 0..u_size {
            for v in 0..v_size {
                if u64::from(rng.next_u32()) < threshold {
                    out.set(u, v);
                }
            }
        }
        out
    }

    /// Edges of `graph` between `0..u_size` and `u_size..n`.
    pub fn from_graph(graph: &BitAdjacency, u_size: usize) -> Result<Self> {
        if u_size > graph.n() {
            return param_err(format!("u_size {u_size} exceeds n = {}", graph.n()));
        }
        let mut out = Self::empty(u_size, graph.n() - u_size);
        for u in 0..u_size {
            for v in iter_bits(graph.row(u), u_size) {
                out.set(u, v - u_size);
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, u: usize, v: usize) {
        self.bits[u * self.words_per_row + v / WORD_BITS] |= 1 << (v % WORD_BITS);
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.words_per_row + v / WORD_BITS] >> (v % WORD_BITS) & 1 == 1
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn v_size(&self) -> usize {
        self.v_size
    }

    pub fn row(&self, u: usize) -> &[u64] {
        &self.bits[u * self.words_per_row..(u + 1) * self.words_per_row]
    }
}

/// `h_e = sum_u (A_u[v] A_u[w] - A'_u[v] A'_u[w])` for every pair `e = {v, w}`
/// of `V`, indexed in row-major order over `v < w`.
pub fn h_vector(a: &BipartiteAdjacency, a_prime: &BipartiteAdjacency) -> Result<Vec<i64>> {
    if a.u_size != a_prime.u_size || a.v_size != a_prime.v_size {
        return param_err(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.u_size, a.v_size, a_prime.u_size, a_prime.v_size
        ));
    }
    let v_size = a.v_size;
    let mut h = vec![0i64; v_size * v_size.saturating_sub(1) / 2];
    for (matrix, sign) in [(a, 1i64), (a_prime, -1i64)] {
        for u in 0..matrix.u_size {
            let row = matrix.row(u);
            for v in iter_bits(row, 0) {
                let base = v * (2 * v_size - v - 1) / 2;
                for w in iter_bits(row, v + 1) {
                    h[base + (w - v - 1)] += sign;
                }
            }
        }
    }
    Ok(h)
}

#[derive(Clone, Debug)]
struct HAcc {
    coord_sum: Vec<i64>,
    coord_sum_sq: Vec<i64>,
    coord_in_band: Vec<u64>,
    pooled: IntMoments,
    in_band: u64,
    outside: u64,
    lambda_trials: u64,
    good_pairs: u64,
    sign_balance: IntMoments,
}

/// Draws `trials` independent pairs `(A, A')` with `|U| = u_size`, `|V| = n - u_size`.
pub fn run_h_experiments(n: usize, p: f64, u_size: usize, trials: u64, seed: u64) -> Result<ProbeReport> {
    GraphParams::new(n, p, seed)?;
    if u_size == 0 || u_size + 2 > n {
        return param_err(format!("u_size must be in 1..={} for n = {n}, got {u_size}", n.saturating_sub(2)));
    }
    if trials == 0 {
        return param_err("trial budget must be positive");
    }
    let v_size = n - u_size;
    let coords = v_size * (v_size - 1) / 2;
    let band_low = (u_size as f64).powf(BAND_LOW_EXPONENT);
    let band_high = (u_size as f64).powf(BAND_HIGH_EXPONENT);
    let lambda_limit = (v_size * v_size) as f64 / 4.0;
    let good_threshold = n as f64 * p * (1.0 - p) / 2.0;

    let acc = fold_indices(
        trials,
        || HAcc {
            coord_sum: vec![0; coords],
            coord_sum_sq: vec![0; coords],
            coord_in_band: vec![0; coords],
            pooled: IntMoments::default(),
            in_band: 0,
            outside: 0,
            lambda_trials: 0,
            good_pairs: 0,
            sign_balance: IntMoments::default(),
        },
        |acc, range| {
            for trial in range {
                let a = BipartiteAdjacency::sample(u_size, v_size, p, seed, 2 * trial);
                let a_prime = BipartiteAdjacency::sample(u_size, v_size, p, seed, 2 * trial + 1);
                let h = h_vector(&a, &a_prime).expect("same dimensions");
                let mut bad = 0u64;
                let mut balance = 0i64;
                for (i, &x) in h.iter().enumerate() {
                    acc.coord_sum[i] += x;
                    acc.coord_sum_sq[i] += x * x;
                    acc.pooled.push(x);
                    balance += x.signum();
                    let mag = x.unsigned_abs() as f64;
                    if mag > band_low && mag < band_high {
                        acc.coord_in_band[i] += 1;
                        acc.in_band += 1;
                    } else {
                        bad += 1;
                    }
                }
                acc.outside += bad;
                if bad as f64 > lambda_limit {
                    acc.lambda_trials += 1;
                }
                acc.sign_balance.push(balance);
                if u_size == 1 {
                    let sym_diff: u32 = a
                        .row(0)
                        .iter()
                        .zip(a_prime.row(0))
                        .map(|(x, y)| (x ^ y).count_ones())
                        .sum();
                    if f64::from(sym_diff) >= good_threshold {
                        acc.good_pairs += 1;
                    }
                }
            }
        },
        |total, part| {
            for i in 0..coords {
                total.coord_sum[i] += part.coord_sum[i];
                total.coord_sum_sq[i] += part.coord_sum_sq[i];
                total.coord_in_band[i] += part.coord_in_band[i];
            }
            total.pooled.merge(&part.pooled);
            total.in_band += part.in_band;
            total.outside += part.outside;
            total.lambda_trials += part.lambda_trials;
            total.good_pairs += part.good_pairs;
            total.sign_balance.merge(&part.sign_balance);
        },
    );

    let m = trials as f64;
    let observations = (acc.in_band + acc.outside) as f64;
    let mut per_coordinate = Vec::with_capacity(coords);
    for v in 0..v_size {
        for w in (v + 1)..v_size {
            let i = pair_index(v_size, v, w) as usize;
            let stats = IntMoments {
                count: trials,
                sum: i128::from(acc.coord_sum[i]),
                sum_sq: i128::from(acc.coord_sum_sq[i]),
            };
            per_coordinate.push(CoordinateStat {
                v: u_size + v,
                w: u_size + w,
                mean: stats.mean(),
                variance: stats.variance(),
                in_band_freq: acc.coord_in_band[i] as f64 / m,
            });
        }
    }
    let p2 = p * p;
    Ok(ProbeReport {
        n,
        p,
        seed,
        trials,
        decomposition: None,
        hvector: Some(HVectorStats {
            u_size,
            v_size,
            coordinates: coords,
            coord_mean: acc.pooled.mean(),
            coord_variance: acc.pooled.variance(),
            expected_variance: 2.0 * u_size as f64 * p2 * (1.0 - p2),
            band_low,
            band_high,
            in_band_freq: acc.in_band as f64 / observations,
            lambda_e_freq: acc.outside as f64 / observations,
            lambda_freq: acc.lambda_trials as f64 / m,
            good_pair_freq: (u_size == 1).then(|| acc.good_pairs as f64 / m),
            sign_balance_mean: acc.sign_balance.mean(),
            sign_balance_std_error: (acc.sign_balance.variance() / m).sqrt(),
            per_coordinate,
        }),
    })
}

/// Triangle counts of a graph split by how many vertices fall in `U = 0..u_size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteDecomposition {
    /// All three vertices in `U`.
    pub s_u: u64,
    /// Two in `U`: `sum over edges {u, u*} inside U of <A_u, A_u*>`.
    pub cross_2u: u64,
    /// Two in `V`: `sum over u of the B-edges inside N(u) ∩ V`.
    pub cross_2v: u64,
    /// All three in `V`.
    pub q_v: u64,
    pub total: u64,
}

/// Computes each term from its own definition and checks they add up to `S`.
pub fn bipartite_decomposition_check(adj: &BitAdjacency, u_size: usize) -> Result<BipartiteDecomposition> {
    let n = adj.n();
    if u_size == 0 || u_size > n {
        return param_err(format!("u_size must be in 1..={n}, got {u_size}"));
    }
    let neighbourhoods = BipartiteAdjacency::from_graph(adj, u_size)?;
    let inside_u = adj.induced(0, u_size)?;
    let inside_v = adj.induced(u_size, n)?;

    let s_u = count_triangles(&inside_u);
    let q_v = count_triangles(&inside_v);
    let mut cross_2u = 0u64;
    for (u, w) in inside_u.edges() {
        cross_2u += neighbourhoods
            .row(u)
            .iter()
            .zip(neighbourhoods.row(w))
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum::<u64>();
    }
    let mut cross_2v = 0u64;
    for u in 0..u_size {
        let row = neighbourhoods.row(u);
        for v in iter_bits(row, 0) {
            cross_2v += iter_bits(row, v + 1).filter(|&w| inside_v.has_edge(v, w)).count() as u64;
        }
    }
    let total = count_triangles(adj);
    let sum = s_u + cross_2u + cross_2v + q_v;
    if sum != total {
        return Err(Error::Invariant(format!(
            "U-split terms ({s_u}, {cross_2u}, {cross_2v}, {q_v}) sum to {sum}, graph has {total} triangles"
        )));
    }
    Ok(BipartiteDecomposition {
        s_u,
        cross_2u,
        cross_2v,
        q_v,
        total,
    })
}
