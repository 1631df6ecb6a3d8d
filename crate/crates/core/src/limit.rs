//! Local limit law checks: how far `sigma_n Pr[S_n = k]` sits from the
//! standard normal density at the lattice point `(k - mu_n) / sigma_n`, and
//! how evenly `S_n` spreads over residues mod `q`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, param_err, Error, Result};
use crate::graph::GraphParams;
use crate::moments::{mean_triangles, variance_triangles};
use crate::numeric::binomial;
use crate::oracle::{PmfKind, PmfTable};
use crate::sampler::triangle_histogram;

/// Width of the zero-count margin added around the observed support, in units of sigma.
pub const MARGIN_SIGMAS: f64 = 4.0;

/// Standard normal density.
pub fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Empirical triangle-count pmf from `samples` independent draws.
pub fn empirical_pmf(params: &GraphParams, samples: u64) -> Result<PmfTable> {
    let hist = triangle_histogram(params, samples)?;
    PmfTable::from_histogram(params.n, params.p, &hist)
}

/// Predicted point probability `N((k - mu_n) / sigma_n) / sigma_n`.
pub fn discrete_gaussian_reference(k: i64, n: usize, p: f64) -> Result<f64> {
    if n < 4 {
        return domain_err(format!("the Gaussian reference needs n >= 4, got {n}"));
    }
    let sigma = variance_triangles(n, p)?.sqrt();
    Ok(normal_density((k as f64 - mean_triangles(n, p)) / sigma) / sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyPoint {
    pub k: i64,
    pub x: f64,
    /// `sigma_n * p_hat(k)`.
    pub empirical: f64,
    /// `N(x)`.
    pub reference: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub n: usize,
    pub p: f64,
    pub kind: PmfKind,
    pub sample_count: u64,
    pub mean: f64,
    pub sigma: f64,
    pub sup_discrepancy: f64,
    pub argmax_k: i64,
    pub argmax_x: f64,
    pub mc_error_bound: f64,
    pub per_point: Vec<DiscrepancyPoint>,
}

impl DiscrepancyReport {
    /// Two-column `x,gap` CSV.
    pub fn write_gap_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "gap"])?;
        for pt in &self.per_point {
            w.write_record([format!("{:e}", pt.x), format!("{:e}", pt.gap)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Monte Carlo error bound on `sigma_n * p_hat`: the largest per-point
/// binomial standard error, floored at the one-count resolution `sigma_n / m`.
pub fn mc_error_bound(pmf: &PmfTable, sigma: f64) -> f64 {
    if pmf.kind == PmfKind::Exact {
        return 0.0;
    }
    let m = pmf.sample_count as f64;
    let worst = pmf
        .probs
        .iter()
        .map(|&q| (q * (1.0 - q) / m).sqrt())
        .fold(0.0, f64::max);
    sigma * worst.max(1.0 / m)
}

/// `sup_x |sigma_n p(x) - N(x)|` over the support plus a `4 sigma_n` margin.
///
/// Empirical tables whose error bound exceeds `N(0) / 2` are refused.
pub fn sup_discrepancy(pmf: &PmfTable, n: usize, p: f64) -> Result<DiscrepancyReport> {
    if pmf.n != n || pmf.p != p {
        return param_err(format!(
            "table is for (n = {}, p = {}), requested (n = {n}, p = {p})",
            pmf.n, pmf.p
        ));
    }
    if n < 4 {
        return domain_err(format!("the local limit comparison needs n >= 4, got {n}"));
    }
    if pmf.kind == PmfKind::Empirical && pmf.sample_count == 0 {
        return param_err("empirical table carries no sample count");
    }
    let (first, last) = match (pmf.support.first(), pmf.support.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Empty("pmf has empty support")),
    };
    let mean = mean_triangles(n, p);
    let sigma = variance_triangles(n, p)?.sqrt();
    let error_bound = mc_error_bound(pmf, sigma);
    if error_bound > normal_density(0.0) / 2.0 {
        return Err(Error::Underpowered(format!(
            "Monte Carlo error bound {error_bound:.4} exceeds N(0)/2 = {:.4}; draw more samples",
            normal_density(0.0) / 2.0
        )));
    }
    let margin = (MARGIN_SIGMAS * sigma).ceil() as u64;
    let lo = first.saturating_sub(margin);
    let hi = (last + margin).min(binomial(n as u64, 3) as u64);

    let mut per_point = Vec::with_capacity((hi - lo + 1) as usize);
    let mut probs = pmf.iter().peekable();
    for k in lo..=hi {
        let prob = match probs.peek() {
            Some(&(s, q)) if s == k => {
                probs.next();
                q
            }
            _ => 0.0,
        };
        let x = (k as f64 - mean) / sigma;
        let empirical = sigma * prob;
        let reference = normal_density(x);
        per_point.push(DiscrepancyPoint {
            k: k as i64,
            x,
            empirical,
            reference,
            gap: (empirical - reference).abs(),
        });
    }
    let worst = per_point
        .iter()
        .copied()
        .reduce(|a, b| if b.gap > a.gap { b } else { a })
        .expect("range contains the support");
    Ok(DiscrepancyReport {
        n,
        p,
        kind: pmf.kind,
        sample_count: pmf.sample_count,
        mean,
        sigma,
        sup_discrepancy: worst.gap,
        argmax_k: worst.k,
        argmax_x: worst.x,
        mc_error_bound: error_bound,
        per_point,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModQHistogram {
    pub q: u64,
    pub sample_count: u64,
    /// Frequency of each residue `0..q`.
    pub freqs: Vec<f64>,
    /// `max_a |freq[a] - 1/q|`.
    pub max_dev: f64,
}

/// Residue frequencies of a tabulated distribution.
pub fn mod_q_from_pmf(pmf: &PmfTable, q: u64) -> Result<ModQHistogram> {
    if q < 2 {
        return param_err(format!("modulus must be at least 2, got {q}"));
    }
    let freqs = match &pmf.counts {
        Some(counts) => {
            let mut by_residue = vec![0u64; q as usize];
            for (&k, &c) in pmf.support.iter().zip(counts) {
                by_residue[(k % q) as usize] += c;
            }
            let m = pmf.sample_count as f64;
            by_residue.iter().map(|&c| c as f64 / m).collect()
        }
        None => crate::oracle::pmf_statistics(pmf, &[q])?
            .mod_q
            .remove(&q)
            .expect("requested modulus present"),
    };
    let uniform = 1.0 / q as f64;
    let max_dev = freqs.iter().map(|f| (f - uniform).abs()).fold(0.0, f64::max);
    Ok(ModQHistogram {
        q,
        sample_count: pmf.sample_count,
        freqs,
        max_dev,
    })
}

/// Residue frequencies of `S_n mod q` over `samples` draws.
pub fn mod_q_histogram(params: &GraphParams, samples: u64, q: u64) -> Result<ModQHistogram> {
    if q < 2 {
        return param_err(format!("modulus must be at least 2, got {q}"));
    }
    mod_q_from_pmf(&empirical_pmf(params, samples)?, q)
}
