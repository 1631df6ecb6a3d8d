//! Deterministic parallel reduction over independent G(n, p) draws.
//!
//! Sample indices are cut into fixed-size chunks. Chunks run on the rayon
//! pool in rounds and their partial results are merged in chunk order, so the
//! output depends only on the parameters and never on the thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::count::count_triangles;
use crate::error::{param_err, Result};
use crate::graph::{sample_gnp_into, BitAdjacency, GraphParams};

pub const CHUNK_SAMPLES: u64 = 2048;
const CHUNKS_PER_ROUND: u64 = 64;

/// Folds `visit` over the indices `0..count` in chunks, merging chunk
/// results in increasing order.
pub fn fold_indices<A, I, V, M>(count: u64, init: I, visit: V, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, std::ops::Range<u64>) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = count.div_ceil(CHUNK_SAMPLES);
    let mut total = init();
    let mut next = 0;
    while next < chunks {
        let end = (next + CHUNKS_PER_ROUND).min(chunks);
        let parts: Vec<A> = (next..end)
            .into_par_iter()
            .map(|chunk| {
                let mut acc = init();
                let lo = chunk * CHUNK_SAMPLES;
                visit(&mut acc, lo..(lo + CHUNK_SAMPLES).min(count));
                acc
            })
            .collect();
        for part in parts {
            merge(&mut total, part);
        }
        next = end;
    }
    total
}

/// Folds `visit` over draws `base.sample_index .. base.sample_index + samples`.
///
/// `visit` receives the sample index and the graph.
pub fn fold_samples<A, I, V, M>(base: &GraphParams, samples: u64, init: I, visit: V, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, u64, &BitAdjacency) + Sync,
    M: Fn(&mut A, A),
{
    base.validate()?;
    Ok(fold_indices(
        samples,
        init,
        |acc, range| {
            let mut graph = BitAdjacency::empty(base.n);
            for offset in range {
                let idx = base.sample_index.wrapping_add(offset);
                sample_gnp_into(&base.with_sample(idx), &mut graph).expect("parameters validated above");
                visit(acc, idx, &graph);
            }
        },
        merge,
    ))
}

/// Histogram of triangle counts over `samples` draws.
pub fn triangle_histogram(base: &GraphParams, samples: u64) -> Result<BTreeMap<u64, u64>> {
    if samples == 0 {
        return param_err("sample count must be positive");
    }
    fold_samples(
        base,
        samples,
        BTreeMap::new,
        |hist: &mut BTreeMap<u64, u64>, _, g| *hist.entry(count_triangles(g)).or_insert(0) += 1,
        |total, part| {
            for (k, c) in part {
                *total.entry(k).or_insert(0) += c;
            }
        },
    )
}
