//! Experiment orchestration behind the `forward` and `invert` subcommands:
//! run directories, CSV traces, checkpoints and manifests.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::{run_from, ChainContext, ChainState, Checkpoint, RunSink, RunSummary, TraceRecord};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::{BoundaryVector, ConductivityField};
use crate::forward::{boundary_trace, observe, solve_forward};
use crate::grid::GridSpec;
use crate::io::{self, sci};
use crate::rng::{chain_rng, GENERATOR_NAME};

pub const SEED_ENV: &str = "HEATMC_SEED";

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.csv";
pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.csv";

pub const TRACE_HEADER: &str = "iter,status,anchor_row,anchor_col,omega,D1,D2,D3,z0,alpha_h,alpha,u_min,u_max,u,accepted";
pub const METRICS_HEADER: &str = "iter,alpha,accepted,D1,D2,D3,z0,delta,beta,gamma";

/// Solves the forward problem for a conductivity CSV and returns the boundary data.
pub fn forward_from_file(k_path: &Path, grid: &GridSpec) -> Result<BoundaryVector> {
    let k = ConductivityField::new(io::read_field_csv(k_path)?)?;
    let u = solve_forward(&k, grid)?;
    Ok(boundary_trace(&u))
}

/// Observed data and optional ground truth for a config.
pub fn prepare_data(cfg: &RunConfig) -> Result<(BoundaryVector, Option<ConductivityField>)> {
    let truth = cfg.truth()?;
    let d = match (&cfg.data.phantom, &cfg.data.boundary_file) {
        (Some(_), _) => {
            let k = truth.as_ref().expect("phantom always yields a truth field");
            observe(&solve_forward(k, &cfg.grid)?, cfg.chain.misfit_domain)
        }
        (None, Some(path)) => io::read_boundary_csv(path)?,
        (None, None) => return Err(Error::config("data", "no data source")),
    };
    Ok((d, truth))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

pub fn trace_row(r: &TraceRecord) -> String {
    let mut s = String::with_capacity(256);
    write!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.iteration,
        r.status.name(),
        r.anchor.0,
        r.anchor.1,
        sci(r.omega),
        sci(r.terms.d1),
        sci(r.terms.d2),
        sci(r.terms.d3),
        sci(r.z0),
        fmt_opt(r.alpha_h),
        sci(r.alpha),
        sci(r.u_bounds.0),
        sci(r.u_bounds.1),
        fmt_opt(r.u),
        r.accepted as u8,
    )
    .unwrap();
    s
}

pub fn metrics_row(r: &TraceRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.iteration,
        sci(r.alpha),
        r.accepted as u8,
        sci(r.terms.d1),
        sci(r.terms.d2),
        sci(r.terms.d3),
        sci(r.z0),
        sci(r.delta),
        fmt_opt(r.beta),
        r.gamma,
    )
}

/// Streams trace and metrics rows to CSV and checkpoints to disk.
pub struct CsvRunSink {
    trace: BufWriter<File>,
    metrics: BufWriter<File>,
    trace_path: PathBuf,
    metrics_path: PathBuf,
    checkpoint_path: PathBuf,
    config_hash: String,
}

impl CsvRunSink {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self> {
        Self::open(dir, config_hash, None)
    }

    /// Opens the CSVs of a run. With `resume_at`, existing files keep their
    /// rows up to that iteration and new rows are appended; otherwise the
    /// files start over.
    pub fn open(dir: &Path, config_hash: &str, resume_at: Option<u64>) -> Result<Self> {
        let open = |name: &str, header: &str| -> Result<(BufWriter<File>, PathBuf)> {
            let path = dir.join(name);
            let kept = match resume_at {
                Some(at) => rows_through(&path, header, at)?,
                None => None,
            };
            let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
            match kept {
                Some(text) => w.write_all(text.as_bytes()),
                None => writeln!(w, "{header}"),
            }
            .map_err(|e| Error::io(&path, e))?;
            Ok((w, path))
        };
        let (trace, trace_path) = open(TRACE_FILE, TRACE_HEADER)?;
        let (metrics, metrics_path) = open(METRICS_FILE, METRICS_HEADER)?;
        Ok(Self {
            trace,
            metrics,
            trace_path,
            metrics_path,
            checkpoint_path: dir.join(CHECKPOINT_FILE),
            config_hash: config_hash.to_owned(),
        })
    }

    pub fn finish(mut self) -> Result<()> {
        self.trace.flush().map_err(|e| Error::io(&self.trace_path, e))?;
        self.metrics.flush().map_err(|e| Error::io(&self.metrics_path, e))
    }
}

impl RunSink for CsvRunSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        writeln!(self.trace, "{}", trace_row(rec)).map_err(|e| Error::io(&self.trace_path, e))?;
        writeln!(self.metrics, "{}", metrics_row(rec)).map_err(|e| Error::io(&self.metrics_path, e))
    }

    fn checkpoint(&mut self, state: &ChainState) -> Result<()> {
        // keep the CSVs at least as far along as the checkpoint
        self.trace.flush().map_err(|e| Error::io(&self.trace_path, e))?;
        self.metrics.flush().map_err(|e| Error::io(&self.metrics_path, e))?;
        Checkpoint::new(self.config_hash.clone(), state.clone()).save(&self.checkpoint_path)
    }
}

/// Header plus the complete rows of an existing CSV with `iter <= at`, or
/// `None` when the file is absent or has a different header.
fn rows_through(path: &Path, header: &str, at: u64) -> Result<Option<String>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = text.split_inclusive('\n');
    if lines.next().map(str::trim_end) != Some(header) {
        return Ok(None);
    }
    let columns = header.split(',').count();
    let mut out = format!("{header}\n");
    for line in lines {
        // a run killed mid-write can leave a torn last line
        if !line.ends_with('\n') || line.split(',').count() != columns {
            break;
        }
        match line.split(',').next().and_then(|v| v.parse::<u64>().ok()) {
            Some(iter) if iter <= at => out.push_str(line),
            _ => break,
        }
    }
    Ok(Some(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// The run aborted; listed outputs may be truncated.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub error: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub seed_source: String,
    pub chain_index: u32,
    pub generator: String,
    pub scheme: String,
    pub acceptance_rule: String,
    pub iterations: u64,
    pub record_stride: u64,
    pub resumed_from: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub code_version: String,
    /// Every output file of the run, relative to the run directory.
    pub files: Vec<String>,
    pub summary: Option<RunSummary>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Parse { what: "manifest", path: path.clone(), message: e.to_string() })
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        io::write_text(&path, &(serde_json::to_string_pretty(self)? + "\n"))
    }
}

/// Options for [`invert`].
#[derive(Debug, Clone, Default)]
pub struct InvertOptions {
    /// Number of independent chains; chain `c` uses the base seed's stream jumped `c` times.
    pub chains: u32,
    /// Continue from this checkpoint instead of starting fresh.
    pub resume: Option<PathBuf>,
    /// Where the seed came from, for the manifest.
    pub seed_source: Option<String>,
}

/// Runs the configured inversion into `out_dir`. With more than one chain,
/// chain `c` writes to `out_dir/chain-<c>`; chains run concurrently.
pub fn invert(cfg: &RunConfig, out_dir: &Path, opts: &InvertOptions) -> Result<Vec<RunManifest>> {
    let chains = opts.chains.max(1);
    if chains > 1 && opts.resume.is_some() {
        return Err(Error::config("resume", "resuming is only supported for a single chain"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (d, truth) = prepare_data(cfg)?;
    if chains == 1 {
        return Ok(vec![run_chain(cfg, &d, truth.as_ref(), out_dir, 0, opts)?]);
    }
    let dirs: Vec<PathBuf> = (0..chains).map(|c| out_dir.join(format!("chain-{c:02}"))).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = dirs
            .iter()
            .enumerate()
            .map(|(c, dir)| {
                let (d, truth) = (&d, truth.as_ref());
                scope.spawn(move || {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    run_chain(cfg, d, truth, dir, c as u32, opts)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}

fn run_chain(
    cfg: &RunConfig,
    d: &BoundaryVector,
    truth: Option<&ConductivityField>,
    dir: &Path,
    chain_index: u32,
    opts: &InvertOptions,
) -> Result<RunManifest> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let hash = cfg.hash();
    let ctx = ChainContext { cfg: &cfg.chain, grid: &cfg.grid, d_observed: d, truth };

    let mut files = vec![CONFIG_FILE.to_string(), DATA_FILE.to_string()];
    io::write_text(&dir.join(CONFIG_FILE), &(cfg.to_pretty_json() + "\n"))?;
    io::write_boundary_csv(&dir.join(DATA_FILE), d)?;
    if let Some(t) = truth {
        io::write_field_csv(&dir.join(TRUTH_FILE), t.field())?;
        files.push(TRUTH_FILE.into());
    }

    let (mut state, resumed_from) = match &opts.resume {
        Some(path) => {
            let cp = Checkpoint::load(path)?;
            if cp.config_hash != hash {
                return Err(Error::Checkpoint(format!(
                    "config hash {} does not match checkpoint {}",
                    hash, cp.config_hash
                )));
            }
            let at = cp.state.iteration;
            (cp.state, Some(at))
        }
        None => {
            let fresh = ChainState::init(&ctx)?;
            let rng = chain_rng(cfg.chain.seed, chain_index);
            (ChainState { rng, ..fresh }, None)
        }
    };

    let mut manifest = RunManifest {
        status: RunStatus::Partial,
        error: None,
        config_hash: hash.clone(),
        seed: cfg.chain.seed,
        seed_source: opts.seed_source.clone().unwrap_or_else(|| "config".into()),
        chain_index,
        generator: GENERATOR_NAME.into(),
        scheme: cfg.chain.normalizer.scheme.name().into(),
        acceptance_rule: cfg.chain.acceptance_rule.name().into(),
        iterations: cfg.chain.iterations,
        record_stride: cfg.chain.record_stride,
        resumed_from,
        started_at,
        finished_at: String::new(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        files: files.clone(),
        summary: None,
    };
    files.extend([TRACE_FILE.into(), METRICS_FILE.into(), CHECKPOINT_FILE.into()]);
    manifest.files = files.clone();
    // written up front so an interrupted run still describes itself
    manifest.save(dir)?;

    let outcome = (|| -> Result<RunSummary> {
        let mut sink = CsvRunSink::open(dir, &hash, resumed_from)?;
        let summary = run_from(&mut state, &ctx, &mut sink)?;
        sink.checkpoint(&state)?;
        sink.finish()?;
        io::write_field_csv(&dir.join(RECONSTRUCTION_FILE), state.k_current.field())?;
        Ok(summary)
    })();

    manifest.finished_at = chrono::Utc::now().to_rfc3339();
    match outcome {
        Ok(summary) => {
            manifest.status = RunStatus::Complete;
            manifest.files.push(RECONSTRUCTION_FILE.into());
            manifest.summary = Some(summary);
            manifest.save(dir)?;
            Ok(manifest)
        }
        Err(err) => {
            manifest.error = Some(err.to_string());
            manifest.save(dir)?;
            Err(err)
        }
    }
}

/// Reads the metrics CSV of a run back into records of `(iter, alpha, accepted, delta, beta, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iter: u64,
    pub alpha: f64,
    pub accepted: bool,
    pub delta: f64,
    pub beta: Option<f64>,
    pub gamma: u64,
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: String| Error::Parse { what: "metrics CSV", path: path.to_owned(), message: format!("line {line}: {msg}") };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => return Err(bad(1, format!("expected header `{METRICS_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(bad(no + 1, format!("expected 10 columns, got {}", cols.len())));
        }
        let f = |k: usize| cols[k].parse::<f64>().map_err(|e| bad(no + 1, format!("column {k}: {e}")));
        let u = |k: usize| cols[k].parse::<u64>().map_err(|e| bad(no + 1, format!("column {k}: {e}")));
        rows.push(MetricsRow {
            iter: u(0)?,
            alpha: f(1)?,
            accepted: u(2)? == 1,
            delta: f(7)?,
            beta: if cols[8].is_empty() { None } else { Some(f(8)?) },
            gamma: u(9)?,
        });
    }
    Ok(rows)
}
