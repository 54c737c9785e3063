//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::{dense_solve, max_rel_diff, random_k};
use heatmc::chain::{run, run_from, ChainContext, ChainState, Checkpoint, MemorySink, RunSink, StepStatus, TraceRecord};
use heatmc::config::{parse_config, RunConfig};
use heatmc::forward::{pseudo_transient_solve, solve_forward};
use heatmc::harness::{invert, prepare_data, InvertOptions, TRACE_FILE};
use heatmc::metrics::gamma_slope;
use heatmc::priors::{mixed_roughness, roughness};
use heatmc::{Field, GridSpec, Result};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const TILTED: &str = r#"{"kind": "tilted_plane"}"#;
const WELL: &str = r#"{"kind": "gaussian_well"}"#;
const SEEDS: [u64; 3] = [1, 2, 3];
const LONG: u64 = 200_000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// What the criteria need from a run, without keeping every record.
#[derive(Default)]
struct Series {
    gamma: Vec<u64>,
    delta: Vec<f64>,
    alpha_one: u64,
    scaled: Vec<(u64, f64)>,
}

impl RunSink for Series {
    fn record(&mut self, r: &TraceRecord) -> Result<()> {
        if self.gamma.is_empty() {
            self.gamma.push(0);
        }
        self.gamma.push(r.gamma);
        self.delta.push(r.delta);
        self.alpha_one += u64::from(r.alpha == 1.0);
        if let (StepStatus::Evaluated, Some(s)) = (r.status, r.scaled_alpha) {
            self.scaled.push((r.iteration, s));
        }
        Ok(())
    }
}

struct RunOut {
    series: Series,
    rate: f64,
    beta: f64,
    secs: f64,
}

fn config(phantom: &str, chain: &str, n: usize) -> RunConfig {
    let text = format!(r#"{{"grid": {{"n": {n}, "m": {n}}}, "chain": {{{chain}}}, "data": {{"phantom": {phantom}}}}}"#);
    parse_config(&text).unwrap_or_else(|e| panic!("bad config {text}: {e}"))
}

fn z2(seed: u64, iterations: u64) -> String {
    format!(r#""iterations": {iterations}, "seed": {seed}, "acceptance_rule": "normalized", "normalizer": {{"scheme": "z2"}}"#)
}

fn dual(seed: u64, iterations: u64, lambdas: [f64; 3]) -> String {
    let [l1, l2, l3] = lambdas;
    format!(
        r#""iterations": {iterations}, "seed": {seed}, "acceptance_rule": "dual",
           "sensitivities": {{"lambda1": {l1}, "lambda2": {l2}, "lambda3": {l3}, "allow_lambda_order_violation": true}}"#
    )
}

fn chain_run(cfg: &RunConfig) -> RunOut {
    let (data, truth) = prepare_data(cfg).unwrap();
    let ctx = ChainContext { cfg: &cfg.chain, grid: &cfg.grid, d_observed: &data, truth: truth.as_ref() };
    let mut series = Series::default();
    let started = Instant::now();
    let (_, summary) = run(&ctx, &mut series).unwrap();
    RunOut {
        series,
        rate: summary.acceptance_rate,
        beta: summary.final_beta.expect("synthetic runs have a truth field"),
        secs: started.elapsed().as_secs_f64(),
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn forward_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2024);
    let (mut worst_lu, mut worst_pt) = (0.0f64, 0.0f64);
    for _ in 0..25 {
        let (n, m) = (rng.random_range(3..=10), rng.random_range(3..=10));
        let grid = GridSpec::with_size(n, m);
        let k = random_k(&mut rng, n, m);
        let oracle = dense_solve(&k, &grid);
        let direct = solve_forward(&k, &grid).unwrap();
        let pt = pseudo_transient_solve(&k, &grid, 1.0, 1e-9).unwrap();
        worst_lu = worst_lu.max(max_rel_diff(direct.0.as_slice(), oracle.as_slice()));
        worst_pt = worst_pt.max(max_rel_diff(pt.0.as_slice(), oracle.as_slice()));
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst_lu <= 1e-10 && worst_pt <= 1e-6 && secs < 10.0,
        format!("max rel err direct {worst_lu:.2e} (<= 1e-10), pseudo-transient {worst_pt:.2e} (<= 1e-6), {secs:.1} s (< 10 s)"),
    )
}

fn saturation() -> Verdict {
    let out = chain_run(&config(TILTED, &dual(1, 100_000, [1.0, 100.0, 15.0]), 20));
    let slope = gamma_slope(&out.series.gamma).unwrap();
    let ones = out.series.alpha_one as f64 / 100_000.0;
    verdict(
        slope >= 0.85 && ones >= 0.80 && out.secs <= 900.0,
        format!(
            "Gamma slope {slope:.3} (>= 0.85), alpha = 1 fraction {ones:.3} (>= 0.80), {:.0} s (<= 900 s)",
            out.secs
        ),
    )
}

fn z2_rate_band(runs: &[RunOut]) -> Verdict {
    let in_band = runs.iter().filter(|r| (0.35..=0.75).contains(&r.rate)).count();
    let secs: f64 = runs.iter().map(|r| r.secs).sum();
    let rates: Vec<String> = runs.iter().map(|r| format!("{:.3}", r.rate)).collect();
    verdict(
        in_band >= 2 && secs <= 1800.0,
        format!("rates [{}], {in_band}/3 in [0.35, 0.75] (>= 2), {secs:.0} s (<= 1800 s)", rates.join(", ")),
    )
}

fn beta_comparison(well_z2: &[RunOut]) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    let cases: [(&str, &str, [f64; 3]); 2] = [("tilted plane", TILTED, [1.0, 100.0, 15.0]), ("gaussian well", WELL, [1.0, 10.0, 15.0])];
    for (name, phantom, lambdas) in cases {
        let mut wins = 0;
        let mut pairs = Vec::new();
        for (i, &seed) in SEEDS.iter().enumerate() {
            let normalized = match phantom {
                WELL => well_z2[i].beta,
                _ => chain_run(&config(phantom, &z2(seed, LONG), 20)).beta,
            };
            let baseline = chain_run(&config(phantom, &dual(seed, LONG, lambdas), 20)).beta;
            wins += usize::from(normalized < baseline);
            pairs.push(format!("{normalized:.3}/{baseline:.3}"));
        }
        pass &= wins >= 2;
        parts.push(format!("{name}: z2/dual beta [{}] {wins}/3 (>= 2)", pairs.join(", ")));
    }
    verdict(pass, parts.join("; "))
}

fn fast_drop(runs: &[RunOut]) -> Verdict {
    let mut ratios = Vec::new();
    for r in runs {
        let d = &r.series.delta;
        let head = median(&d[..d.len() / 100]);
        let tail = median(&d[d.len() - d.len() / 10..]);
        ratios.push(tail / head);
    }
    let shown: Vec<String> = ratios.iter().map(|x| format!("{x:.2e}")).collect();
    verdict(ratios.iter().all(|&x| x < 0.5), format!("tail/head median ratios [{}] (< 0.5 each)", shown.join(", ")))
}

fn z1_bound() -> Verdict {
    let cfg = config(WELL, r#""iterations": 20000, "seed": 5, "normalizer": {"scheme": "z1"}"#, 20);
    let out = chain_run(&cfg);
    let w0 = cfg.chain.normalizer.w0;
    // the first step has no memory yet and is evaluated unnormalized
    let checked: Vec<f64> = out.series.scaled.iter().filter(|(it, _)| *it > 1).map(|&(_, s)| s).collect();
    let violations = checked.iter().filter(|&&s| !(s >= w0 - 1e-9 && s <= 1.0 + 1e-9)).count();
    let (lo, hi) = checked.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    verdict(
        violations == 0 && checked.len() >= 10_000,
        format!("{} values in [{lo:.4}, {hi:.4}], {violations} outside [{w0} - 1e-9, 1 + 1e-9]", checked.len()),
    )
}

fn markov_replay() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for scheme in ["z2", "hybrid", "z1"] {
        let chain = format!(r#""iterations": 4000, "seed": 8, "checkpoint_every": 2000, "normalizer": {{"scheme": "{scheme}"}}"#);
        let cfg = config(WELL, &chain, 12);
        let (data, truth) = prepare_data(&cfg).unwrap();
        let ctx = ChainContext { cfg: &cfg.chain, grid: &cfg.grid, d_observed: &data, truth: truth.as_ref() };
        let mut full = MemorySink::default();
        run(&ctx, &mut full).unwrap();
        let mid = full.checkpoints.iter().find(|s| s.iteration == 2000).unwrap().clone();
        let path = dir.path().join(format!("{scheme}.json"));
        Checkpoint::new(cfg.hash(), mid).save(&path).unwrap();
        let mut state: ChainState = Checkpoint::load(&path).unwrap().state;
        state.normalizer = state.normalizer.markov_snapshot();
        let mut rest = MemorySink::default();
        run_from(&mut state, &ctx, &mut rest).unwrap();
        let exact = rest.records.as_slice() == &full.records[2000..];
        if scheme == "z1" {
            let first = rest.records.iter().zip(&full.records[2000..]).position(|(a, b)| a != b);
            let note = first.map_or(String::from("no divergence in window"), |i| format!("diverges at {}", 2001 + i));
            parts.push(format!("z1 {note} (documented only)"));
        } else {
            pass &= exact;
            parts.push(format!("{scheme} {}", if exact { "bit-exact" } else { "MISMATCH" }));
        }
    }
    verdict(pass, parts.join(", "))
}

fn prior_identities() -> Verdict {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(77);
    let (hx, hy) = (1.0 / 19.0, 1.0 / 13.0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (n, m) = (rng.random_range(3..=20), rng.random_range(3..=20));
        let c: f64 = rng.random_range(0.1..5.0);
        let k = Field::from_fn(n, m, |_, _| rng.random_range(0.2..3.0));
        let flat = Field::filled(n, m, rng.random_range(0.2..3.0));
        let (a, b, g) = (rng.random_range(0.5..2.0), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let affine = Field::from_fn(n, m, |i, j| a + b * i as f64 + g * j as f64);
        let scaled = Field::from_fn(n, m, |i, j| c * k.get(i, j));

        let t = roughness(&k);
        let mr = mixed_roughness(&k, hx, hy).unwrap();
        worst = worst
            .max(roughness(&flat))
            .max(mixed_roughness(&flat, hx, hy).unwrap())
            .max(mixed_roughness(&affine, hx, hy).unwrap())
            .max((roughness(&scaled) - c * c * t).abs() / t.max(1.0))
            .max((mixed_roughness(&scaled, hx, hy).unwrap() - c * c * mr).abs() / mr.max(1.0));
    }
    verdict(
        worst <= 1e-12,
        format!("prior identities worst {worst:.2e} (<= 1e-12); exact-value and oracle suites run under cargo test"),
    )
}

fn determinism() -> Verdict {
    let cfg = config(WELL, r#""iterations": 3000, "seed": 11"#, 10);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    invert(&cfg, a.path(), &InvertOptions::default()).unwrap();
    invert(&cfg, b.path(), &InvertOptions::default()).unwrap();
    let read = |d: &std::path::Path| std::fs::read(d.join(TRACE_FILE)).unwrap();
    let (x, y) = (read(a.path()), read(b.path()));
    verdict(x == y && !x.is_empty(), format!("trace CSVs {} bytes, identical: {}", x.len(), x == y))
}

fn report(results: &mut Vec<bool>, id: u32, name: &str, started: Instant, v: Verdict) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("{tag} {id} {name}: {} [{:.1} s]", v.detail, started.elapsed().as_secs_f64());
    results.push(v.pass);
}

fn main() {
    let mut results = Vec::new();

    let t = Instant::now();
    report(&mut results, 1, "forward solver oracle", t, forward_oracle());

    let t = Instant::now();
    report(&mut results, 2, "dual-rule saturation", t, saturation());

    let t = Instant::now();
    let well_z2: Vec<RunOut> = SEEDS.iter().map(|&s| chain_run(&config(WELL, &z2(s, LONG), 20))).collect();
    report(&mut results, 3, "z2 acceptance-rate band", t, z2_rate_band(&well_z2));

    let t = Instant::now();
    report(&mut results, 4, "z2 beats dual on final beta", t, beta_comparison(&well_z2));

    let t = Instant::now();
    report(&mut results, 5, "delta fast drop", t, fast_drop(&well_z2));

    let t = Instant::now();
    report(&mut results, 6, "z1 scaled alpha bound", t, z1_bound());

    let t = Instant::now();
    report(&mut results, 7, "markov replay", t, markov_replay());

    let t = Instant::now();
    report(&mut results, 8, "unit and property suites", t, prior_identities());

    let t = Instant::now();
    report(&mut results, 9, "invert determinism", t, determinism());

    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
