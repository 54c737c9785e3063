//! The Metropolis-Hastings chain over conductivity fields.
//!
//! One step: propose a 2x2 block shift, solve the forward problem for the
//! candidate, form the difference terms, evaluate the configured acceptance
//! rule, draw `u` and accept iff `alpha > u`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acceptance::{
    alpha_baseline, alpha_dual, alpha_normalized, diff_terms_from_parts, misfit, DiffTerms, Sensitivities,
};
use crate::error::{Error, Result};
use crate::field::{BoundaryVector, ConductivityField};
use crate::forward::{observation_len, observe, solve_unchecked, MisfitDomain};
use crate::grid::GridSpec;
use crate::io;
use crate::metrics::{beta_at, delta_at};
use crate::normalizers::{NormalizerConfig, NormalizerState};
use crate::priors::PriorValues;
use crate::proposal::{propose, Anchor, ProposalConfig};
use crate::rng::{chain_rng, ChainRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceRule {
    /// `min{1, exp(-D1)}`.
    Baseline,
    /// Max over the smoothness and mixed-partial branches.
    Dual,
    /// `min{cutoff, z0 * exp(-sum l_i z_i D_i)}`.
    #[default]
    Normalized,
}

impl AcceptanceRule {
    pub fn name(self) -> &'static str {
        match self {
            AcceptanceRule::Baseline => "baseline",
            AcceptanceRule::Dual => "dual",
            AcceptanceRule::Normalized => "normalized",
        }
    }
}

/// Starting conductivity: a constant, or a field CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialK {
    Constant(f64),
    File { file: PathBuf },
}

impl Default for InitialK {
    fn default() -> Self {
        InitialK::Constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub iterations: u64,
    pub seed: u64,
    pub initial_k: InitialK,
    pub acceptance_rule: AcceptanceRule,
    pub record_stride: u64,
    /// Write a checkpoint every this many iterations; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub misfit_domain: MisfitDomain,
    pub sensitivities: Sensitivities,
    pub proposal: ProposalConfig,
    pub normalizer: NormalizerConfig,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            seed: 0,
            initial_k: InitialK::default(),
            acceptance_rule: AcceptanceRule::Normalized,
            record_stride: 1,
            checkpoint_every: 0,
            misfit_domain: MisfitDomain::Boundary,
            sensitivities: Sensitivities::default(),
            proposal: ProposalConfig::default(),
            normalizer: NormalizerConfig::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::config("chain.iterations", "must be >= 1"));
        }
        if self.record_stride < 1 {
            return Err(Error::config("chain.record_stride", "must be >= 1"));
        }
        if let InitialK::Constant(v) = self.initial_k {
            if !(v > self.proposal.k_min) {
                return Err(Error::config("chain.initial_k", format!("must exceed k_min {}, got {v}", self.proposal.k_min)));
            }
        }
        self.sensitivities.validate()?;
        self.proposal.validate()?;
        self.normalizer.validate()
    }
}

/// Inputs that stay fixed for the whole run.
#[derive(Debug, Clone, Copy)]
pub struct ChainContext<'a> {
    pub cfg: &'a ChainConfig,
    pub grid: &'a GridSpec,
    pub d_observed: &'a BoundaryVector,
    /// Ground truth, when known, for the reconstruction error.
    pub truth: Option<&'a ConductivityField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub k_current: ConductivityField,
    /// Always the observation of the forward solution for `k_current`.
    pub d_current: BoundaryVector,
    pub misfit_current: f64,
    pub prior_current: PriorValues,
    pub normalizer: NormalizerState,
    pub iteration: u64,
    pub accept_count: u64,
    pub infeasible_count: u64,
    pub solve_failures: u64,
    pub rng: ChainRng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Evaluated,
    /// The candidate crossed the positivity floor.
    Infeasible,
    /// The forward solve for the candidate failed.
    SolveFailed,
}

impl StepStatus {
    pub fn name(self) -> &'static str {
        match self {
            StepStatus::Evaluated => "evaluated",
            StepStatus::Infeasible => "infeasible",
            StepStatus::SolveFailed => "solve_failed",
        }
    }
}

/// Everything observable about one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based index of the step.
    pub iteration: u64,
    pub status: StepStatus,
    pub anchor: Anchor,
    pub omega: f64,
    pub terms: DiffTerms,
    pub z0: f64,
    /// `exp(-sum l_i z_i D_i)`; only for the normalized rule.
    pub alpha_h: Option<f64>,
    /// `z0 * alpha_h` before the cutoff; only for the normalized rule.
    pub scaled_alpha: Option<f64>,
    pub alpha: f64,
    pub u: Option<f64>,
    pub u_bounds: (f64, f64),
    pub accepted: bool,
    /// Data discrepancy of the state after this step.
    pub delta: f64,
    pub beta: Option<f64>,
    /// Cumulative acceptances after this step.
    pub gamma: u64,
}

impl ChainState {
    pub fn init(ctx: &ChainContext<'_>) -> Result<Self> {
        ctx.cfg.validate()?;
        ctx.grid.validate()?;
        let k0 = match &ctx.cfg.initial_k {
            InitialK::Constant(v) => ConductivityField::constant(ctx.grid.n, ctx.grid.m, *v)?,
            InitialK::File { file } => ConductivityField::with_floor(io::read_field_csv(file)?, ctx.cfg.proposal.k_min)?,
        };
        Self::init_with(ctx, k0, chain_rng(ctx.cfg.seed, 0))
    }

    /// Starts a chain from an explicit field and random stream.
    pub fn init_with(ctx: &ChainContext<'_>, k0: ConductivityField, rng: ChainRng) -> Result<Self> {
        let grid = ctx.grid;
        k0.field().check_shape(grid.n, grid.m)?;
        let expected = observation_len(grid.n, grid.m, ctx.cfg.misfit_domain);
        if ctx.d_observed.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} observed values for {}x{} ({:?})", grid.n, grid.m, ctx.cfg.misfit_domain),
                got: format!("{}", ctx.d_observed.len()),
            });
        }
        if let Some(truth) = ctx.truth {
            truth.field().check_shape(grid.n, grid.m)?;
        }
        let u = solve_unchecked(&k0, grid)?;
        let d_current = observe(&u, ctx.cfg.misfit_domain);
        let misfit_current = misfit(ctx.d_observed, &d_current, ctx.cfg.sensitivities.sigma)?;
        let prior_current = PriorValues::of(&k0, grid.hx(), grid.hy())?;
        Ok(Self {
            k_current: k0,
            d_current,
            misfit_current,
            prior_current,
            normalizer: NormalizerState::new(),
            iteration: 0,
            accept_count: 0,
            infeasible_count: 0,
            solve_failures: 0,
            rng,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iteration == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.iteration as f64
        }
    }

    /// Advances the chain by one iteration.
    pub fn step(&mut self, ctx: &ChainContext<'_>) -> TraceRecord {
        let cfg = ctx.cfg;
        self.iteration += 1;
        let proposal = propose(&self.k_current, &mut self.rng, &cfg.proposal);

        let mut record = TraceRecord {
            iteration: self.iteration,
            status: StepStatus::Evaluated,
            anchor: proposal.anchor,
            omega: proposal.omega,
            terms: DiffTerms::default(),
            z0: 1.0,
            alpha_h: None,
            scaled_alpha: None,
            alpha: 0.0,
            u: None,
            u_bounds: (0.0, 1.0),
            accepted: false,
            delta: 0.0,
            beta: None,
            gamma: 0,
        };

        let evaluated = match proposal.candidate {
            None => {
                self.infeasible_count += 1;
                record.status = StepStatus::Infeasible;
                None
            }
            Some(cand) => match self.evaluate(ctx, cand) {
                Ok(e) => Some(e),
                Err(err) => {
                    log::debug!("forward solve failed at iteration {}: {err}", self.iteration);
                    self.solve_failures += 1;
                    record.status = StepStatus::SolveFailed;
                    None
                }
            },
        };

        if let Some(eval) = evaluated {
            let t = eval.terms;
            record.terms = t;
            let ncfg = &cfg.normalizer;
            let mut alpha_h = None;
            record.alpha = match cfg.acceptance_rule {
                AcceptanceRule::Baseline => alpha_baseline(&t),
                AcceptanceRule::Dual => alpha_dual(&t, &cfg.sensitivities),
                AcceptanceRule::Normalized => {
                    let z = self.normalizer.z_terms(&t, &cfg.sensitivities, ncfg);
                    let na = alpha_normalized(&t, &z, &cfg.sensitivities, ncfg.cutoff);
                    record.z0 = z.z0;
                    record.scaled_alpha = Some(na.scaled);
                    alpha_h = Some(na.alpha_h);
                    na.alpha
                }
            };
            record.alpha_h = alpha_h;

            let (lo, hi) = if ncfg.restricted() { self.normalizer.restricted_bounds(ncfg) } else { (0.0, 1.0) };
            let u = lo + (hi - lo) * self.rng.random::<f64>();
            record.u = Some(u);
            record.u_bounds = (lo, hi);
            record.accepted = record.alpha > u;

            match alpha_h {
                Some(ah) => self.normalizer.update(ah, &t, record.accepted, record.alpha, ncfg),
                None => self.normalizer.record_alpha(record.alpha),
            }

            if record.accepted {
                self.accept_count += 1;
                self.k_current = eval.k;
                self.d_current = eval.d;
                self.misfit_current = eval.misfit;
                self.prior_current = eval.prior;
            }
        }

        record.gamma = self.accept_count;
        record.delta = delta_at(ctx.d_observed, &self.d_current).expect("lengths checked at init");
        record.beta = ctx.truth.map(|truth| beta_at(truth, &self.k_current).expect("shape checked at init"));
        record
    }

    fn evaluate(&self, ctx: &ChainContext<'_>, k: ConductivityField) -> Result<Evaluated> {
        let grid = ctx.grid;
        let u = solve_unchecked(&k, grid)?;
        let d = observe(&u, ctx.cfg.misfit_domain);
        let misfit_cand = misfit(ctx.d_observed, &d, ctx.cfg.sensitivities.sigma)?;
        let prior = PriorValues::of(&k, grid.hx(), grid.hy())?;
        let terms = diff_terms_from_parts(misfit_cand, self.misfit_current, &prior, &self.prior_current);
        Ok(Evaluated { k, d, misfit: misfit_cand, prior, terms })
    }
}

struct Evaluated {
    k: ConductivityField,
    d: BoundaryVector,
    misfit: f64,
    prior: PriorValues,
    terms: DiffTerms,
}

/// Receives the thinned trace and periodic checkpoints of a run.
pub trait RunSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()>;

    fn checkpoint(&mut self, _state: &ChainState) -> Result<()> {
        Ok(())
    }
}

/// Keeps every recorded step in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<TraceRecord>,
    pub checkpoints: Vec<ChainState>,
}

impl RunSink for MemorySink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }

    fn checkpoint(&mut self, state: &ChainState) -> Result<()> {
        self.checkpoints.push(state.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: u64,
    pub accept_count: u64,
    pub acceptance_rate: f64,
    pub infeasible_count: u64,
    pub solve_failures: u64,
    pub final_delta: f64,
    pub final_beta: Option<f64>,
    pub wall_time_secs: f64,
}

/// Runs the chain from `state` until `cfg.iterations` steps have been taken.
pub fn run_from(state: &mut ChainState, ctx: &ChainContext<'_>, sink: &mut dyn RunSink) -> Result<RunSummary> {
    let started = Instant::now();
    let cfg = ctx.cfg;
    let mut last = None;
    while state.iteration < cfg.iterations {
        let rec = state.step(ctx);
        if rec.iteration % cfg.record_stride == 0 || rec.iteration == cfg.iterations {
            sink.record(&rec)?;
        }
        if cfg.checkpoint_every > 0 && rec.iteration % cfg.checkpoint_every == 0 {
            sink.checkpoint(state)?;
        }
        last = Some(rec);
    }
    let (final_delta, final_beta) = match last {
        Some(r) => (r.delta, r.beta),
        None => (
            delta_at(ctx.d_observed, &state.d_current)?,
            ctx.truth.map(|t| beta_at(t, &state.k_current)).transpose()?,
        ),
    };
    Ok(RunSummary {
        iterations: state.iteration,
        accept_count: state.accept_count,
        acceptance_rate: state.acceptance_rate(),
        infeasible_count: state.infeasible_count,
        solve_failures: state.solve_failures,
        final_delta,
        final_beta,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Initializes a chain and runs it to completion.
pub fn run(ctx: &ChainContext<'_>, sink: &mut dyn RunSink) -> Result<(ChainState, RunSummary)> {
    let mut state = ChainState::init(ctx)?;
    let summary = run_from(&mut state, ctx, sink)?;
    Ok((state, summary))
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk checkpoint: the full chain state plus the hash of the config
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub state: ChainState,
}

impl Checkpoint {
    pub fn new(config_hash: impl Into<String>, state: ChainState) -> Self {
        Self { version: CHECKPOINT_VERSION, config_hash: config_hash.into(), state }
    }

    /// Writes to a sibling temp file and renames it into place, so an
    /// interrupted write never leaves a truncated checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cp: Checkpoint = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Parse { what: "checkpoint", path: path.to_owned(), message: e.to_string() })?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("version {} (expected {CHECKPOINT_VERSION})", cp.version)));
        }
        Ok(cp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_forward;
    use crate::normalizers::Scheme;
    use crate::phantoms::PhantomSpec;

    fn setup(n: usize, rule: AcceptanceRule, scheme: Scheme) -> (ChainConfig, GridSpec, BoundaryVector, ConductivityField) {
        let grid = GridSpec::with_size(n, n);
        let truth = PhantomSpec::default_tilted_plane().build(n, n).unwrap();
        let d = observe(&solve_forward(&truth, &grid).unwrap(), MisfitDomain::Boundary);
        let cfg = ChainConfig {
            iterations: 200,
            seed: 42,
            acceptance_rule: rule,
            normalizer: NormalizerConfig::for_scheme(scheme),
            ..ChainConfig::default()
        };
        (cfg, grid, d, truth)
    }

    #[test]
    fn init_constant_start() {
        let (cfg, grid, d, _) = setup(20, AcceptanceRule::Normalized, Scheme::Z2);
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: None };
        let st = ChainState::init(&ctx).unwrap();
        assert!(st.k_current.field().as_slice().iter().all(|&v| v == 1.0));
        assert_eq!((st.iteration, st.accept_count), (0, 0));
    }

    #[test]
    fn init_rejects_wrong_data_length() {
        let (cfg, grid, _, _) = setup(6, AcceptanceRule::Normalized, Scheme::Z2);
        let d = BoundaryVector(vec![0.0; 5]);
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: None };
        assert!(matches!(ChainState::init(&ctx), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejection_leaves_state_unchanged() {
        let (cfg, grid, d, truth) = setup(8, AcceptanceRule::Baseline, Scheme::None);
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: Some(&truth) };
        let mut st = ChainState::init(&ctx).unwrap();
        let mut rejected = 0;
        for _ in 0..300 {
            let before = (st.k_current.clone(), st.d_current.clone(), st.prior_current);
            let rec = st.step(&ctx);
            if !rec.accepted {
                rejected += 1;
                assert_eq!((st.k_current.clone(), st.d_current.clone(), st.prior_current), before);
            }
        }
        assert!(rejected > 0);
    }

    #[test]
    fn cached_observation_stays_coherent() {
        let (cfg, grid, d, _) = setup(8, AcceptanceRule::Normalized, Scheme::Z2);
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: None };
        let mut st = ChainState::init(&ctx).unwrap();
        for _ in 0..150 {
            st.step(&ctx);
            let fresh = observe(&solve_forward(&st.k_current, &grid).unwrap(), MisfitDomain::Boundary);
            assert_eq!(fresh, st.d_current);
        }
    }

    #[test]
    fn gamma_moves_in_unit_steps() {
        let (cfg, grid, d, _) = setup(8, AcceptanceRule::Dual, Scheme::None);
        let cfg = ChainConfig { sensitivities: Sensitivities { allow_lambda_order_violation: true, ..Sensitivities::new(1.0, 100.0, 15.0) }, ..cfg };
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: None };
        let mut sink = MemorySink::default();
        let (st, summary) = run(&ctx, &mut sink).unwrap();
        let mut prev = 0;
        for r in &sink.records {
            assert!(r.gamma == prev || r.gamma == prev + 1);
            assert_eq!(r.gamma - prev, r.accepted as u64);
            prev = r.gamma;
        }
        assert_eq!(summary.acceptance_rate, st.accept_count as f64 / 200.0);
        assert!(st.accept_count <= st.iteration);
    }

    #[test]
    fn single_iteration_run_records_once() {
        let (cfg, grid, d, _) = setup(6, AcceptanceRule::Normalized, Scheme::Z2);
        let cfg = ChainConfig { iterations: 1, record_stride: 7, ..cfg };
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: None };
        let mut sink = MemorySink::default();
        run(&ctx, &mut sink).unwrap();
        assert_eq!(sink.records.len(), 1);
        assert!(ChainConfig { iterations: 0, ..ChainConfig::default() }.validate().is_err());
    }

    #[test]
    fn identical_candidate_is_accepted_under_baseline() {
        // omega_max tiny enough that the quantized shift is zero
        let (cfg, grid, d, _) = setup(6, AcceptanceRule::Baseline, Scheme::None);
        let cfg = ChainConfig { proposal: ProposalConfig { omega_max: 1e-14, ..Default::default() }, ..cfg };
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: None };
        let mut st = ChainState::init(&ctx).unwrap();
        for _ in 0..20 {
            let rec = st.step(&ctx);
            assert_eq!(rec.omega, 0.0);
            assert_eq!(rec.alpha, 1.0);
            assert!(rec.accepted);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let (cfg, grid, d, _) = setup(6, AcceptanceRule::Normalized, Scheme::Z1);
        let ctx = ChainContext { cfg: &cfg, grid: &grid, d_observed: &d, truth: None };
        let mut st = ChainState::init(&ctx).unwrap();
        for _ in 0..40 {
            st.step(&ctx);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        Checkpoint::new("abc", st.clone()).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.state, st);
        assert_eq!(back.config_hash, "abc");
    }
}
