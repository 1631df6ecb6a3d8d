//! Bit-packed adjacency matrices and the seeded G(n, p) sampler.
//!
//! Row `i` of a [`BitAdjacency`] is the neighbourhood indicator of vertex `i`,
//! packed into `u64` words. Rows are padded up to a word boundary and the
//! padding bits are always zero, so word-wise kernels can AND and popcount
//! whole rows without masking the tail.
//!
//! Sampling is driven by ChaCha8 used as a counter-based generator: the key
//! is derived from the run seed, the stream id is the sample index, and the
//! word position inside the stream is the pair index. The graph for a given
//! `(seed, sample_index)` is therefore fixed no matter which thread draws it.

use std::fmt::Write as _;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

pub const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

/// Mask of the bits at positions `>= bit` inside that bit's word.
#[inline]
pub(crate) fn mask_from(bit: usize) -> u64 {
    u64::MAX << (bit % WORD_BITS)
}

/// Parameters of one draw from G(n, p).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    pub sample_index: u64,
}

impl GraphParams {
    pub fn new(n: usize, p: f64, seed: u64) -> Result<Self> {
        let params = Self {
            n,
            p,
            seed,
            sample_index: 0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return param_err("vertex count must be positive");
        }
        // NaN fails both comparisons.
        if !(self.p > 0.0 && self.p < 1.0) {
            return param_err(format!("edge probability {} is not in (0, 1)", self.p));
        }
        Ok(())
    }

    pub fn with_sample(self, sample_index: u64) -> Self {
        Self {
            sample_index,
            ..self
        }
    }
}

/// Symmetric, zero-diagonal adjacency matrix stored as packed bit rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitAdjacency {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for BitAdjacency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BitAdjacency")
            .field("n", &self.n)
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl BitAdjacency {
    pub fn empty(n: usize) -> Self {
        let words_per_row = words_for(n);
        Self {
            n,
            words_per_row,
            bits: vec![0; n * words_per_row],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut adj = Self::empty(n);
        for u in 0..n {
            for v in (u + 1)..n {
                adj.set_pair(u, v);
            }
        }
        adj
    }

    /// Builds an adjacency from an explicit edge list.
    ///
    /// Duplicate pairs are allowed; self-loops and out-of-range endpoints
    /// are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Self::empty(n);
        for &(u, v) in edges {
            adj.insert_edge(u, v)?;
        }
        Ok(adj)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[u64] {
        let start = u * self.words_per_row;
        &self.bits[start..start + self.words_per_row]
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.words_per_row + v / WORD_BITS] >> (v % WORD_BITS) & 1 == 1
    }

    pub fn insert_edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_pair(u, v)?;
        self.set_pair(u, v);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_pair(u, v)?;
        let w = self.words_per_row;
        self.bits[u * w + v / WORD_BITS] &= !(1u64 << (v % WORD_BITS));
        self.bits[v * w + u / WORD_BITS] &= !(1u64 << (u % WORD_BITS));
        Ok(())
    }

    pub(crate) fn check_pair(&self, u: usize, v: usize) -> Result<()> {
        if u >= self.n || v >= self.n {
            return param_err(format!("pair ({u}, {v}) out of range for n = {}", self.n));
        }
        if u == v {
            return param_err(format!("pair ({u}, {v}) is a self-loop"));
        }
        Ok(())
    }

    #[inline]
    fn set_pair(&mut self, u: usize, v: usize) {
        let w = self.words_per_row;
        self.bits[u * w + v / WORD_BITS] |= 1u64 << (v % WORD_BITS);
        self.bits[v * w + u / WORD_BITS] |= 1u64 << (u % WORD_BITS);
    }

    pub fn degree(&self, u: usize) -> u32 {
        self.row(u).iter().map(|w| w.count_ones()).sum()
    }

    pub fn edge_count(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum::<u64>() / 2
    }

    /// Neighbours of `u` in increasing order.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        iter_bits(self.row(u), 0)
    }

    /// Edges `(u, v)` with `u < v`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| iter_bits(self.row(u), u + 1).map(move |v| (u, v)))
    }

    /// The complementary graph on the same vertex set.
    pub fn complement(&self) -> Self {
        let mut out = Self::empty(self.n);
        for u in 0..self.n {
            let w = self.words_per_row;
            for (i, word) in self.row(u).iter().enumerate() {
                out.bits[u * w + i] = !word;
            }
            out.bits[u * w + u / WORD_BITS] &= !(1u64 << (u % WORD_BITS));
            if let Some(last) = out.bits[u * w..(u + 1) * w].last_mut() {
                *last &= tail_mask(self.n);
            }
        }
        out
    }

    /// Subgraph induced on the contiguous vertex range `lo..hi`, relabelled to `0..hi-lo`.
    pub fn induced(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo > hi || hi > self.n {
            return param_err(format!("vertex range {lo}..{hi} invalid for n = {}", self.n));
        }
        let mut out = Self::empty(hi - lo);
        for u in lo..hi {
            for v in iter_bits(self.row(u), u + 1).take_while(|&v| v < hi) {
                out.set_pair(u - lo, v - lo);
            }
        }
        Ok(out)
    }

    /// Symmetry, zero diagonal and zero padding.
    pub fn check_invariants(&self) -> bool {
        if self.bits.len() != self.n * self.words_per_row {
            return false;
        }
        let tail = tail_mask(self.n);
        for u in 0..self.n {
            if self.has_edge(u, u) {
                return false;
            }
            if self.words_per_row > 0 && self.row(u)[self.words_per_row - 1] & !tail != 0 {
                return false;
            }
            for v in self.neighbors(u) {
                if !self.has_edge(v, u) {
                    return false;
                }
            }
        }
        true
    }

    /// Debug dump: first line `n`, then one line per row `i = 1..n` holding
    /// the lower-triangle bits `(i, 0..i)` as big-endian hex, where bit `j`
    /// of the number is the pair `(i, j)`.
    pub fn to_dump(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for i in 1..self.n {
            let digits = i.div_ceil(4);
            for d in (0..digits).rev() {
                let mut nibble = 0u32;
                for b in 0..4 {
                    let j = d * 4 + b;
                    if j < i && self.has_edge(i, j) {
                        nibble |= 1 << b;
                    }
                }
                let _ = write!(out, "{nibble:x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Format("missing vertex count line".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad vertex count: {e}")))?;
        let mut adj = Self::empty(n);
        for i in 1..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing row {i}")))?
                .trim();
            if line.len() != i.div_ceil(4) {
                return Err(Error::Format(format!(
                    "row {i} has {} hex digits, expected {}",
                    line.len(),
                    i.div_ceil(4)
                )));
            }
            for (d, ch) in line.chars().rev().enumerate() {
                let nibble = ch
                    .to_digit(16)
                    .ok_or_else(|| Error::Format(format!("row {i}: bad hex digit {ch:?}")))?;
                for b in 0..4 {
                    if nibble >> b & 1 == 1 {
                        let j = d * 4 + b;
                        if j >= i {
                            return Err(Error::Format(format!("row {i}: bit {j} above diagonal")));
                        }
                        adj.set_pair(i, j);
                    }
                }
            }
        }
        Ok(adj)
    }
}

#[inline]
fn tail_mask(n: usize) -> u64 {
    match n % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Iterates set bit positions `>= from` in a packed row.
pub(crate) fn iter_bits(row: &[u64], from: usize) -> impl Iterator<Item = usize> + '_ {
    let first = from / WORD_BITS;
    row.iter()
        .enumerate()
        .skip(first)
        .flat_map(move |(wi, &word)| {
            let mut w = if wi == first { word & mask_from(from) } else { word };
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + b)
                }
            })
        })
}

/// Acceptance threshold on a 32-bit uniform variate: the pair is an edge iff
/// `variate < threshold`, so the realised edge probability is
/// `threshold / 2^32`.
pub fn edge_threshold(p: f64) -> u64 {
    ((p * 4_294_967_296.0).round() as u64).min(1 << 32)
}

/// Index of the unordered pair `u < v` in row-major order over the upper
/// triangle; also the word position of its variate in the sample's stream.
#[inline]
pub fn pair_index(n: usize, u: usize, v: usize) -> u64 {
    debug_assert!(u < v && v < n);
    let (n, u, v) = (n as u64, u as u64, v as u64);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

pub(crate) fn sample_stream(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

/// The variate for a single pair, found by seeking the stream directly.
///
/// Slow; exists so tests can check the sampler against the keying contract.
pub fn pair_variate(seed: u64, sample_index: u64, word_index: u64) -> u32 {
    let mut rng = sample_stream(seed, sample_index);
    rng.set_word_pos(u128::from(word_index));
    rng.next_u32()
}

/// Draws G(n, p) for the given parameters.
pub fn sample_gnp(params: &GraphParams) -> Result<BitAdjacency> {
    params.validate()?;
    let mut adj = BitAdjacency::empty(params.n);
    fill_gnp(params, &mut adj);
    Ok(adj)
}

/// Redraws `adj` in place; lets hot loops reuse one buffer.
pub fn sample_gnp_into(params: &GraphParams, adj: &mut BitAdjacency) -> Result<()> {
    params.validate()?;
    if adj.n != params.n {
        *adj = BitAdjacency::empty(params.n);
    } else {
        adj.bits.fill(0);
    }
    fill_gnp(params, adj);
    Ok(())
}

fn fill_gnp(params: &GraphParams, adj: &mut BitAdjacency) {
    let n = params.n;
    let threshold = edge_threshold(params.p);
    let mut rng = sample_stream(params.seed, params.sample_index);
    let mut buf = [0u32; 64];
    let w = adj.words_per_row;
    for u in 0..n {
        // Upper part of row u, built a word at a time, then mirrored.
        let mut v = u + 1;
        while v < n {
            let word_idx = v / WORD_BITS;
            let end = ((word_idx + 1) * WORD_BITS).min(n);
            let len = end - v;
            let chunk = &mut buf[..len];
            rng.fill_bytes(bytemuck_u32(chunk));
            let mut word = 0u64;
            for (k, &x) in chunk.iter().enumerate() {
                let x = u32::from_le(x);
                word |= u64::from((u64::from(x) < threshold) as u8) << ((v + k) % WORD_BITS);
            }
            adj.bits[u * w + word_idx] |= word;
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let t = word_idx * WORD_BITS + b;
                adj.bits[t * w + u / WORD_BITS] |= 1u64 << (u % WORD_BITS);
            }
            v = end;
        }
    }
}

fn bytemuck_u32(words: &mut [u32]) -> &mut [u8] {
    let len = std::mem::size_of_val(words);
    // SAFETY: u32 has no padding or invalid bit patterns and u8 has alignment 1.
    unsafe { std::slice::from_raw_parts_mut(words.as_mut_ptr().cast::<u8>(), len) }
}

/// `|N(u) ∩ N(v)|`.
pub fn codegree(adj: &BitAdjacency, u: usize, v: usize) -> Result<u32> {
    adj.check_pair(u, v)?;
    Ok(codegree_unchecked(adj, u, v))
}

#[inline]
pub(crate) fn codegree_unchecked(adj: &BitAdjacency, u: usize, v: usize) -> u32 {
    adj.row(u)
        .iter()
        .zip(adj.row(v))
        .map(|(a, b)| (a & b).count_ones())
        .sum()
}

/// Keeps only the edges of `adj` that also belong to `keep`.
pub fn restrict_to_edge_set(adj: &BitAdjacency, keep: &BitAdjacency) -> Result<BitAdjacency> {
    if adj.n != keep.n {
        return param_err(format!(
            "edge set is over {} vertices, graph has {}",
            keep.n, adj.n
        ));
    }
    let bits = adj.bits.iter().zip(&keep.bits).map(|(a, b)| a & b).collect();
    Ok(BitAdjacency {
        n: adj.n,
        words_per_row: adj.words_per_row,
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, p: f64, seed: u64, idx: u64) -> GraphParams {
        GraphParams::new(n, p, seed).unwrap().with_sample(idx)
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GraphParams::new(0, 0.5, 1).is_err());
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(GraphParams::new(5, p, 1).is_err(), "p = {p}");
        }
    }

    #[test]
    fn probability_one_limit_gives_complete_graph() {
        let g = sample_gnp(&params(3, 1.0 - 1e-12, 9, 0)).unwrap();
        assert_eq!(g, BitAdjacency::complete(3));
        let g = sample_gnp(&params(70, 1.0 - 1e-12, 9, 4)).unwrap();
        assert_eq!(g.edge_count(), 70 * 69 / 2);
    }

    #[test]
    fn same_key_same_graph() {
        let a = sample_gnp(&params(5, 0.5, 0xfeed, 7)).unwrap();
        let b = sample_gnp(&params(5, 0.5, 0xfeed, 7)).unwrap();
        assert_eq!(a, b);
        let a = sample_gnp(&params(150, 0.3, 2, 11)).unwrap();
        let b = sample_gnp(&params(150, 0.3, 2, 11)).unwrap();
        assert_eq!(a, b);
        let c = sample_gnp(&params(150, 0.3, 2, 12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_follows_pair_keying() {
        for &(n, p) in &[(9usize, 0.5), (70, 0.37), (130, 0.81)] {
            let prm = params(n, p, 123, 5);
            let g = sample_gnp(&prm).unwrap();
            let thr = edge_threshold(p);
            for u in 0..n {
                for v in (u + 1)..n {
                    let x = pair_variate(123, 5, pair_index(n, u, v));
                    assert_eq!(g.has_edge(u, v), u64::from(x) < thr, "n={n} ({u},{v})");
                }
            }
        }
    }

    #[test]
    fn sampled_graphs_satisfy_invariants() {
        let mut buf = BitAdjacency::empty(1);
        for idx in 0..50 {
            for n in [1usize, 2, 63, 64, 65, 128, 129] {
                sample_gnp_into(&params(n, 0.5, 3, idx), &mut buf).unwrap();
                assert!(buf.check_invariants());
                assert_eq!(buf, sample_gnp(&params(n, 0.5, 3, idx)).unwrap());
            }
        }
    }

    #[test]
    fn pair_index_is_row_major() {
        let n = 7;
        let mut expected = 0;
        for u in 0..n {
            for v in (u + 1)..n {
                assert_eq!(pair_index(n, u, v), expected);
                expected += 1;
            }
        }
    }

    #[test]
    fn codegree_on_fixed_graphs() {
        let k4 = BitAdjacency::complete(4);
        let empty = BitAdjacency::empty(4);
        for u in 0..4 {
            for v in 0..4 {
                if u != v {
                    assert_eq!(codegree(&k4, u, v).unwrap(), 2);
                    assert_eq!(codegree(&empty, u, v).unwrap(), 0);
                }
            }
        }
        assert!(codegree(&k4, 1, 1).is_err());
        assert!(codegree(&k4, 0, 4).is_err());
    }

    #[test]
    fn codegree_matches_naive_loop() {
        let n = 64;
        let g = sample_gnp(&params(n, 0.5, 77, 0)).unwrap();
        for u in 0..n {
            for v in 0..n {
                if u == v {
                    continue;
                }
                let naive = (0..n)
                    .filter(|&w| w != u && w != v && g.has_edge(u, w) && g.has_edge(v, w))
                    .count() as u32;
                assert_eq!(codegree(&g, u, v).unwrap(), naive);
            }
        }
    }

    #[test]
    fn restriction_edge_cases() {
        let g = sample_gnp(&params(6, 0.5, 1, 0)).unwrap();
        assert_eq!(restrict_to_edge_set(&g, &BitAdjacency::complete(6)).unwrap(), g);
        assert_eq!(
            restrict_to_edge_set(&g, &BitAdjacency::empty(6)).unwrap(),
            BitAdjacency::empty(6)
        );
        assert!(restrict_to_edge_set(&g, &BitAdjacency::empty(5)).is_err());
        assert!(BitAdjacency::from_edges(6, &[(0, 6)]).is_err());
        assert!(BitAdjacency::from_edges(6, &[(2, 2)]).is_err());
    }

    #[test]
    fn restriction_to_matching_is_set_intersection() {
        let matching = [(0, 3), (1, 4), (2, 5)];
        let keep = BitAdjacency::from_edges(6, &matching).unwrap();
        for idx in 0..200 {
            let g = sample_gnp(&params(6, 0.5, 8, idx)).unwrap();
            let r = restrict_to_edge_set(&g, &keep).unwrap();
            let expected: Vec<_> = matching.iter().copied().filter(|&(u, v)| g.has_edge(u, v)).collect();
            assert!(r.edge_count() <= 3);
            assert_eq!(r.edges().collect::<Vec<_>>(), expected);
            assert!(r.check_invariants());
        }
    }

    #[test]
    fn complement_is_involution() {
        for n in [1usize, 5, 64, 65] {
            let g = sample_gnp(&params(n, 0.4, 2, 1)).unwrap();
            let c = g.complement();
            assert!(c.check_invariants());
            assert_eq!(c.edge_count() + g.edge_count(), (n * (n - 1) / 2) as u64);
            assert_eq!(c.complement(), g);
        }
    }

    #[test]
    fn dump_round_trip() {
        let g = sample_gnp(&params(23, 0.5, 4, 0)).unwrap();
        let text = g.to_dump();
        assert_eq!(text.lines().count(), 23);
        assert_eq!(BitAdjacency::from_dump(&text).unwrap(), g);
        let k3 = BitAdjacency::complete(3);
        assert_eq!(k3.to_dump(), "3\n1\n3\n");
        assert!(BitAdjacency::from_dump("3\n1\n7\n").is_err());
    }

    #[test]
    fn edge_density_within_five_sigma() {
        let n = 100;
        let m = 2000u64;
        let pairs = (n * (n - 1) / 2) as f64;
        let mut buf = BitAdjacency::empty(n);
        let mut total = 0u64;
        for idx in 0..m {
            sample_gnp_into(&params(n, 0.5, 99, idx), &mut buf).unwrap();
            total += buf.edge_count();
        }
        let trials = pairs * m as f64;
        let sd = (trials * 0.25).sqrt();
        assert!((total as f64 - 0.5 * trials).abs() < 5.0 * sd);
    }
}
