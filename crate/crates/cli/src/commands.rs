use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use trillt::limit::{empirical_pmf, mod_q_from_pmf, sup_discrepancy, DiscrepancyReport};
use trillt::moments::{MomentAccumulator, MomentReport};
use trillt::oracle::{EnumerationTally, HARD_MAX_EXACT_N, MAX_EXACT_N};
use trillt::probe::{build_matching_plan, run_decomposition_trials, run_h_experiments};
use trillt::sampler::triangle_histogram;
use trillt::spectral::{decay_profile, CharFunAccumulator, DecayRow, DecayStatus};
use trillt::{normalize_count, Error, GraphParams, PmfKind, PmfTable, RegionSplit, Result};

use crate::grid::parse_grid;
use crate::manifest::{OutputSet, RunManifest};
use crate::{Command, ProbeCommand};

struct Run {
    argv: Vec<String>,
    threads: usize,
    start: Instant,
}

impl Run {
    fn finish(
        &self,
        outputs: OutputSet,
        command: &str,
        params: serde_json::Value,
        seed: Option<u64>,
        samples: Option<u64>,
    ) -> Result<()> {
        let manifest = RunManifest {
            command_line: self.argv.clone(),
            command: command.to_string(),
            params,
            seed,
            samples,
            threads: self.threads,
            wall_time_secs: self.start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
        };
        let path = outputs.finish(manifest)?;
        println!("manifest: {}", path.display());
        Ok(())
    }
}

pub fn run(command: &Command, argv: Vec<String>, threads: usize) -> Result<()> {
    let run = Run {
        argv,
        threads,
        start: Instant::now(),
    };
    match command {
        Command::Pmf(a) => cmd_pmf(&run, a),
        Command::Llt(a) => cmd_llt(&run, a),
        Command::Charfun(a) => cmd_charfun(&run, a),
        Command::Moments(a) => cmd_moments(&run, a),
        Command::Modq(a) => cmd_modq(&run, a),
        Command::Probe(ProbeCommand::Decomposition(a)) => cmd_decomposition(&run, a),
        Command::Probe(ProbeCommand::Hvector(a)) => cmd_hvector(&run, a),
    }
}

fn positive_samples(samples: u64) -> Result<u64> {
    if samples == 0 {
        return Err(Error::Parameter("sample count must be positive".into()));
    }
    Ok(samples)
}

fn exact_guard(n: usize, allow_large: bool) -> Result<()> {
    let limit = if allow_large { HARD_MAX_EXACT_N } else { MAX_EXACT_N };
    if n > limit {
        let pairs = n * (n - 1) / 2;
        return Err(Error::Parameter(format!(
            "cost guard: exact enumeration at n = {n} visits 2^{pairs} graphs; \
             the limit is n <= {MAX_EXACT_N} (n = {HARD_MAX_EXACT_N} with --allow-large)"
        )));
    }
    Ok(())
}

fn pmf_table(params: &GraphParams, exact: bool, allow_large: bool, samples: Option<u64>) -> Result<PmfTable> {
    if exact {
        exact_guard(params.n, allow_large)?;
        EnumerationTally::enumerate(params.n, allow_large)?.pmf(params.p)
    } else {
        let samples = positive_samples(samples.unwrap_or(0))?;
        empirical_pmf(params, samples)
    }
}

fn cmd_pmf(run: &Run, a: &crate::PmfArgs) -> Result<()> {
    let params = GraphParams::new(a.common.n, a.common.p, a.common.seed)?;
    if a.allow_large && !a.exact {
        return Err(Error::Parameter("--allow-large only applies to --exact".into()));
    }
    if a.exact {
        exact_guard(params.n, a.allow_large)?;
    } else {
        positive_samples(a.samples.unwrap_or(0))?;
    }
    let mut outputs = OutputSet::new(&a.out)?;
    let table = pmf_table(&params, a.exact, a.allow_large, a.samples)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    outputs.write(".csv", &csv)?;
    outputs.write_json(".json", &table)?;
    println!(
        "n = {} p = {} kind = {:?} support = {}..={} mass = {:.15}",
        table.n,
        table.p,
        table.kind,
        table.support.first().copied().unwrap_or(0),
        table.support.last().copied().unwrap_or(0),
        table.total_mass()
    );
    let samples = (table.kind == PmfKind::Empirical).then_some(table.sample_count);
    run.finish(
        outputs,
        "pmf",
        json!({"n": params.n, "p": params.p, "exact": a.exact, "samples": samples}),
        (!a.exact).then_some(params.seed),
        samples,
    )
}

/// One line of a sweep: the report without its per-point table.
#[derive(Debug, Serialize)]
struct LltSummary {
    n: usize,
    p: f64,
    kind: PmfKind,
    sample_count: u64,
    mean: f64,
    sigma: f64,
    sup_discrepancy: f64,
    argmax_k: i64,
    argmax_x: f64,
    mc_error_bound: f64,
}

impl From<&DiscrepancyReport> for LltSummary {
    fn from(r: &DiscrepancyReport) -> Self {
        Self {
            n: r.n,
            p: r.p,
            kind: r.kind,
            sample_count: r.sample_count,
            mean: r.mean,
            sigma: r.sigma,
            sup_discrepancy: r.sup_discrepancy,
            argmax_k: r.argmax_k,
            argmax_x: r.argmax_x,
            mc_error_bound: r.mc_error_bound,
        }
    }
}

fn print_llt(r: &DiscrepancyReport) {
    println!(
        "n = {:>4}  delta = {:.6}  argmax k = {} (x = {:.4})  mc error = {:.6}",
        r.n, r.sup_discrepancy, r.argmax_k, r.argmax_x, r.mc_error_bound
    );
}

fn check_llt_n(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Parameter(format!("the local limit comparison needs n >= 4, got {n}")));
    }
    Ok(())
}

fn cmd_llt(run: &Run, a: &crate::LltArgs) -> Result<()> {
    if let Some(ns) = &a.sweep {
        let samples = positive_samples(a.samples.unwrap_or(0))?;
        for &n in ns {
            check_llt_n(n)?;
            GraphParams::new(n, a.p, a.seed)?;
        }
        let mut outputs = OutputSet::new(&a.out)?;
        let mut lines = Vec::new();
        for &n in ns {
            let params = GraphParams::new(n, a.p, a.seed)?;
            let report = sup_discrepancy(&empirical_pmf(&params, samples)?, n, a.p)?;
            print_llt(&report);
            serde_json::to_writer(&mut lines, &LltSummary::from(&report))?;
            lines.push(b'\n');
        }
        outputs.write(".jsonl", &lines)?;
        return run.finish(
            outputs,
            "llt",
            json!({"sweep": ns, "p": a.p, "samples": samples}),
            Some(a.seed),
            Some(samples),
        );
    }

    let n = a.n.expect("clap requires --n without --sweep");
    check_llt_n(n)?;
    let params = GraphParams::new(n, a.p, a.seed)?;
    if a.exact {
        exact_guard(n, false)?;
    } else {
        positive_samples(a.samples.unwrap_or(0))?;
    }
    let table = pmf_table(&params, a.exact, false, a.samples)?;
    let report = sup_discrepancy(&table, n, a.p)?;
    let mut outputs = OutputSet::new(&a.out)?;
    outputs.write_json(".json", &report)?;
    let mut csv = Vec::new();
    report.write_gap_csv(&mut csv)?;
    outputs.write(".gap.csv", &csv)?;
    print_llt(&report);
    let samples = (!a.exact).then_some(report.sample_count);
    run.finish(
        outputs,
        "llt",
        json!({"n": n, "p": a.p, "exact": a.exact, "samples": samples}),
        (!a.exact).then_some(a.seed),
        samples,
    )
}

#[derive(Debug, Serialize)]
struct DecaySummary {
    n: usize,
    p: f64,
    sample_count: u64,
    a_const: f64,
    d_const: f64,
    r2_r3_boundary: f64,
    noise_floor: f64,
    /// Largest `|psi - exp(-t^2/2)|` over the central region.
    max_r1_gaussian_gap: Option<f64>,
    pass: usize,
    inconclusive: usize,
    fail: usize,
    rows: Vec<DecayRow>,
}

fn histogram_values(params: &GraphParams, samples: u64) -> Result<Vec<(f64, u64)>> {
    triangle_histogram(params, samples)?
        .into_iter()
        .map(|(k, c)| Ok((normalize_count(k, params.n, params.p)?, c)))
        .collect()
}

fn cmd_charfun(run: &Run, a: &crate::CharfunArgs) -> Result<()> {
    let params = GraphParams::new(a.common.n, a.common.p, a.common.seed)?;
    let samples = positive_samples(a.samples)?;
    let grid = parse_grid(&a.grid)?;
    let split = RegionSplit::for_triangles(params.n, params.p, a.a)?;
    if !(a.d > 0.0) {
        return Err(Error::Parameter(format!("decay constant D must be positive, got {}", a.d)));
    }
    if let Some(t) = grid.iter().find(|t| t.abs() > split.max_frequency()) {
        return Err(Error::Parameter(format!(
            "frequency {t} is outside [-pi sigma, pi sigma] = ±{}",
            split.max_frequency()
        )));
    }
    let values = histogram_values(&params, samples)?;
    let mut outputs = OutputSet::new(&a.out)?;
    let mut acc = CharFunAccumulator::new(&grid);
    for &(r, c) in &values {
        acc.push_weighted(r, c);
    }
    let profile = acc.finish(&split)?;
    let rows = decay_profile(&profile, a.d);
    let count = |s: DecayStatus| rows.iter().filter(|r| r.status == s).count();
    let summary = DecaySummary {
        n: params.n,
        p: params.p,
        sample_count: samples,
        a_const: a.a,
        d_const: a.d,
        r2_r3_boundary: split.r2_r3_boundary(),
        noise_floor: profile.noise_floor(),
        max_r1_gaussian_gap: rows
            .iter()
            .filter(|r| r.status == DecayStatus::Reference)
            .map(|r| r.gaussian_gap)
            .reduce(f64::max),
        pass: count(DecayStatus::Pass),
        inconclusive: count(DecayStatus::Inconclusive),
        fail: count(DecayStatus::Fail),
        rows,
    };
    let mut csv = Vec::new();
    profile.write_csv(&mut csv)?;
    outputs.write(".csv", &csv)?;
    outputs.write_json(".decay.json", &summary)?;
    println!(
        "n = {} points = {} R2/R3 boundary = {:.4} noise floor = {:.2e}",
        params.n,
        grid.len(),
        summary.r2_r3_boundary,
        summary.noise_floor
    );
    if let Some(gap) = summary.max_r1_gaussian_gap {
        println!("max |psi - exp(-t^2/2)| over R1 = {gap:.6}");
    }
    println!(
        "decay: pass = {} inconclusive = {} fail = {}",
        summary.pass, summary.inconclusive, summary.fail
    );
    run.finish(
        outputs,
        "charfun",
        json!({"n": params.n, "p": params.p, "samples": samples, "grid": a.grid, "a": a.a, "d": a.d}),
        Some(params.seed),
        Some(samples),
    )
}

fn cmd_moments(run: &Run, a: &crate::MomentsArgs) -> Result<()> {
    let params = GraphParams::new(a.common.n, a.common.p, a.common.seed)?;
    let samples = positive_samples(a.samples)?;
    let mut acc = MomentAccumulator::new(a.k_max)?;
    normalize_count(0, params.n, params.p)?;
    let mut outputs = OutputSet::new(&a.out)?;
    for (r, c) in histogram_values(&params, samples)? {
        acc.push_weighted(r, c);
    }
    let report = MomentReport::new(params.n, params.p, &acc.finish()?)?;
    for (k, est) in &report.empirical_moments {
        println!(
            "E[R^{k}] = {:.6} ± {:.6} (gaussian {})",
            est.value, est.std_error, report.predicted_moments[k]
        );
    }
    outputs.write_json(".json", &report)?;
    run.finish(
        outputs,
        "moments",
        json!({"n": params.n, "p": params.p, "samples": samples, "k_max": a.k_max}),
        Some(params.seed),
        Some(samples),
    )
}

fn cmd_modq(run: &Run, a: &crate::ModqArgs) -> Result<()> {
    let params = GraphParams::new(a.common.n, a.common.p, a.common.seed)?;
    let samples = positive_samples(a.samples)?;
    if let Some(q) = a.q.iter().find(|&&q| q < 2) {
        return Err(Error::Parameter(format!("modulus must be at least 2, got {q}")));
    }
    let mut outputs = OutputSet::new(&a.out)?;
    let table = empirical_pmf(&params, samples)?;
    let hists = a
        .q
        .iter()
        .map(|&q| mod_q_from_pmf(&table, q))
        .collect::<Result<Vec<_>>>()?;
    for h in &hists {
        println!("q = {}  max |freq - 1/q| = {:.6}", h.q, h.max_dev);
    }
    outputs.write_json(".json", &hists)?;
    run.finish(
        outputs,
        "modq",
        json!({"n": params.n, "p": params.p, "samples": samples, "q": a.q}),
        Some(params.seed),
        Some(samples),
    )
}

fn cmd_decomposition(run: &Run, a: &crate::DecompositionArgs) -> Result<()> {
    let params = GraphParams::new(a.common.n, a.common.p, a.common.seed)?;
    if params.n % 2 == 1 {
        return Err(Error::Parameter(format!(
            "probe decomposition needs an even vertex count, got n = {}",
            params.n
        )));
    }
    let plan = build_matching_plan(params.n, a.k)?;
    if a.trials == 0 {
        return Err(Error::Parameter("trial budget must be positive".into()));
    }
    let mut outputs = OutputSet::new(&a.out)?;
    let report = run_decomposition_trials(&params, &plan, a.trials)?;
    if let Some(d) = &report.decomposition {
        println!(
            "n = {} k = {} Var[Z] = {:.3} (bound 6nk^3 = {}) bad-L frequency = {}",
            params.n, d.k, d.z_var, d.z_var_bound, d.bad_l_freq
        );
    }
    outputs.write_json(".json", &report)?;
    run.finish(
        outputs,
        "probe decomposition",
        json!({"n": params.n, "p": params.p, "k": a.k, "trials": a.trials}),
        Some(params.seed),
        Some(a.trials),
    )
}

fn cmd_hvector(run: &Run, a: &crate::HvectorArgs) -> Result<()> {
    let (n, p) = (a.common.n, a.common.p);
    GraphParams::new(n, p, a.common.seed)?;
    if a.u_size == 0 || a.u_size + 2 > n {
        return Err(Error::Parameter(format!(
            "--usize must be in 1..={} for n = {n}, got {}",
            n.saturating_sub(2),
            a.u_size
        )));
    }
    if a.trials == 0 {
        return Err(Error::Parameter("trial budget must be positive".into()));
    }
    let mut outputs = OutputSet::new(&a.out)?;
    let report = run_h_experiments(n, p, a.u_size, a.trials, a.common.seed)?;
    if let Some(h) = &report.hvector {
        println!(
            "n = {n} |U| = {} gamma = {:.4} (target 0.1) Lambda frequency = {:.4}",
            h.u_size, h.lambda_e_freq, h.lambda_freq
        );
        if let Some(g) = h.good_pair_freq {
            println!("good-pair frequency = {g:.5}");
        }
        let mut csv = Vec::new();
        h.write_coordinate_csv(&mut csv)?;
        outputs.write(".coords.csv", &csv)?;
    }
    outputs.write_json(".json", &report)?;
    run.finish(
        outputs,
        "probe hvector",
        json!({"n": n, "p": p, "usize": a.u_size, "trials": a.trials}),
        Some(a.common.seed),
        Some(a.trials),
    )
}
