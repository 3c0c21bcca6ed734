//! Seeded initialization, multi-start campaigns and result emission.
//!
//! A run is identified by `(cell, seed)`; its randomness comes from the
//! ChaCha8 stream `(seed, INIT_STREAM)`, so results never depend on the
//! number of worker threads. Rows are returned in job order.
//!
//! Configuration files are TOML documents with the top-level keys of
//! [`ExperimentConfig`]; every key is optional.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::BundleState;
use crate::error::{Error, Result};
use crate::manifolds::{Grassmann, Manifold, Stiefel};
use crate::numeric;
use crate::objectives::{self, LepGrassmann, LepSpec, LepStiefel, Objective, RhfObjective, RhfReference};
use crate::oracle::{self, CatalogEntry};
use crate::random;
use crate::saddle::{self, RetractionMode, RunRecord, SolverConfig, Variant};

pub const SCHEMA_VERSION: u32 = 1;

/// Stream index reserved for initial states.
pub const INIT_STREAM: u64 = 1;

// ---------------------------------------------------------------------------
// Initialization

fn random_plane<M: Manifold + ?Sized>(m: &M, x: crate::manifolds::Point, k: usize, rng: &mut dyn RngCore) -> Result<BundleState> {
    let tangents: Vec<DMatrix<f64>> = (0..k).map(|_| m.random_tangent(&x, rng)).collect();
    BundleState::from_tangents(m, x, &tangents)
}

/// Random point, then the span of k projected Gaussians.
pub fn init_random<M: Manifold + ?Sized>(m: &M, k: usize, seed: u64) -> Result<BundleState> {
    let mut rng = random::stream(seed, INIT_STREAM);
    let x = m.random_point(&mut rng)?;
    random_plane(m, x, k, &mut rng)
}

/// Plane spanned by horizontal lifts ΓX of random Grassmann tangents at XXᵀ.
fn lifted_plane(st: &Stiefel, x: crate::manifolds::Point, k: usize, rng: &mut dyn RngCore) -> Result<BundleState> {
    let g = Grassmann::new(st.n, st.p)?;
    let px = g.point_from_frame(x.ambient().clone())?;
    let tangents: Vec<DMatrix<f64>> = (0..k).map(|_| g.random_tangent(&px, rng) * x.ambient()).collect();
    BundleState::from_tangents(st, x, &tangents)
}

/// Stiefel state with the same X as [`init_random`] on the Grassmannian for the same seed.
pub fn init_random_stiefel(st: &Stiefel, k: usize, seed: u64) -> Result<BundleState> {
    let mut rng = random::stream(seed, INIT_STREAM);
    let x = st.random_point(&mut rng)?;
    lifted_plane(st, x, k, &mut rng)
}

fn perturbed_frame(x_ref: &DMatrix<f64>, beta: f64, rng: &mut dyn RngCore) -> Result<DMatrix<f64>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("perturbation level must be nonnegative, got {beta}")));
    }
    let g = random::gaussian(rng, x_ref.nrows(), x_ref.ncols());
    Ok(numeric::thin_qr(&(x_ref + g * beta))?.into_inner())
}

/// X = QR(X_ref + β·G) on the Grassmannian, plane re-drawn at the new point.
pub fn init_perturbed_grassmann(g: &Grassmann, x_ref: &DMatrix<f64>, beta: f64, k: usize, seed: u64) -> Result<BundleState> {
    let mut rng = random::stream(seed, INIT_STREAM);
    let x = g.point_from_frame(perturbed_frame(x_ref, beta, &mut rng)?)?;
    random_plane(g, x, k, &mut rng)
}

/// X = QR(X_ref + β·G) on the Stiefel manifold, plane from horizontal lifts.
pub fn init_perturbed_stiefel(st: &Stiefel, x_ref: &DMatrix<f64>, beta: f64, k: usize, seed: u64) -> Result<BundleState> {
    let mut rng = random::stream(seed, INIT_STREAM);
    let x = st.point(perturbed_frame(x_ref, beta, &mut rng)?)?;
    lifted_plane(st, x, k, &mut rng)
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LepPerturb,
    LepAllIndex,
    LepSweep,
    RhfScan,
    OracleDump,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::LepPerturb => "lep-perturb",
            Experiment::LepAllIndex => "lep-all-index",
            Experiment::LepSweep => "lep-sweep",
            Experiment::RhfScan => "rhf-scan",
            Experiment::OracleDump => "oracle-dump",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    Grassmann,
    Stiefel,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Grassmann => "grassmann",
            Formulation::Stiefel => "stiefel",
        })
    }
}

/// Reference critical point for perturbation studies: `gm` or `sp-index-m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Reference {
    Gm,
    SpIndex(usize),
}

impl Reference {
    /// Lowest configuration of the requested index: {1..p−1, p+m}, or {1..p} for the minimizer.
    pub fn config(&self, n: usize, p: usize) -> Result<Vec<usize>> {
        match *self {
            Reference::Gm | Reference::SpIndex(0) => Ok((1..=p).collect()),
            Reference::SpIndex(m) if m <= n - p => Ok((1..p).chain(std::iter::once(p + m)).collect()),
            Reference::SpIndex(m) => Err(Error::invalid(format!("no reference configuration of index {m} for n={n}, p={p}"))),
        }
    }
}

impl FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "gm" {
            return Ok(Reference::Gm);
        }
        t.strip_prefix("sp-index-")
            .and_then(|m| m.parse().ok())
            .map(Reference::SpIndex)
            .ok_or_else(|| Error::invalid(format!("unknown reference '{s}' (expected gm or sp-index-<m>)")))
    }
}

impl TryFrom<String> for Reference {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Reference> for String {
    fn from(r: Reference) -> String {
        r.to_string()
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Gm => f.write_str("gm"),
            Reference::SpIndex(m) => write!(f, "sp-index-{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Linear eigenvalue problem size, target subspace dimension, spectrum ratio and generator seed.
    pub n: usize,
    pub p: usize,
    pub xi: f64,
    pub lep_seed: u64,
    /// Scale s of f(P) = s·Tr(PA).
    pub grassmann_scale: f64,
    pub formulations: Vec<Formulation>,
    pub references: Vec<Reference>,
    pub betas: Vec<f64>,
    /// Target indices (all-index and RHF campaigns).
    pub ks: Vec<usize>,
    /// Target index of perturbation and sweep campaigns.
    pub target_index: usize,
    /// Spread the seed range over `ks` round-robin instead of running every seed for every k.
    pub pooled: bool,
    pub seed_start: u64,
    pub seeds: u64,
    pub eta_x: f64,
    pub eta_p: f64,
    /// Step size for the Stiefel formulation, both components.
    pub eta_stiefel: Option<f64>,
    /// Step sizes tried for both components in a sweep.
    pub eta_grid: Vec<f64>,
    pub maxit: Option<usize>,
    pub tol: f64,
    pub retraction: RetractionMode,
    pub variant: Variant,
    pub compute_spectrum: bool,
    pub match_tol: f64,
    pub fcidump: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::LepAllIndex,
            n: 10,
            p: 2,
            xi: 1.01,
            lep_seed: 0,
            grassmann_scale: 0.5,
            formulations: vec![Formulation::Grassmann],
            references: vec![Reference::Gm],
            betas: vec![1e-3],
            ks: vec![1],
            target_index: 1,
            pooled: false,
            seed_start: 0,
            seeds: 10,
            eta_x: 1.0,
            eta_p: 1.0,
            eta_stiefel: None,
            eta_grid: Vec::new(),
            maxit: Some(20_000),
            tol: 1e-8,
            retraction: RetractionMode::Simple,
            variant: Variant::Representative,
            compute_spectrum: false,
            match_tol: oracle::DEFAULT_MATCH_TOL,
            fcidump: Vec::new(),
            output: None,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        toml::from_str(&text).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment != Experiment::OracleDump && self.seeds == 0 {
            return Err(Error::invalid("seed range is empty"));
        }
        if matches!(self.experiment, Experiment::LepPerturb | Experiment::LepSweep) {
            if self.betas.is_empty() || self.betas.iter().any(|b| !(*b > 0.0)) {
                return Err(Error::invalid("perturbation levels must be positive"));
            }
            if self.references.is_empty() || self.formulations.is_empty() {
                return Err(Error::invalid("need at least one reference and one formulation"));
            }
        }
        if self.experiment == Experiment::LepSweep && self.eta_grid.is_empty() {
            return Err(Error::invalid("sweep needs a nonempty eta_grid"));
        }
        if self.experiment == Experiment::RhfScan && self.fcidump.is_empty() {
            return Err(Error::invalid("rhf-scan needs at least one fcidump path"));
        }
        if matches!(self.experiment, Experiment::LepAllIndex | Experiment::RhfScan) && self.ks.is_empty() {
            return Err(Error::invalid("ks is empty"));
        }
        if !(self.match_tol > 0.0) {
            return Err(Error::invalid("match_tol must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be positive"));
        }
        self.solver(0).validate(usize::MAX)
    }

    /// Solver settings for target index k.
    pub fn solver(&self, k: usize) -> SolverConfig {
        SolverConfig {
            k,
            eta_x: self.eta_x,
            eta_p: self.eta_p,
            maxit: self.maxit,
            tol: self.tol,
            retraction: self.retraction,
            variant: self.variant,
            rng_seed: 0,
            x_retraction: None,
            dense_operator: false,
            compute_spectrum: self.compute_spectrum,
            check_invariants: false,
        }
    }

    fn solver_for(&self, k: usize, formulation: Formulation, seed: u64) -> SolverConfig {
        let mut cfg = self.solver(k);
        cfg.rng_seed = seed;
        if let (Formulation::Stiefel, Some(eta)) = (formulation, self.eta_stiefel) {
            cfg.eta_x = eta;
            cfg.eta_p = eta;
        }
        cfg
    }

    pub fn lep_spec(&self) -> Result<LepSpec> {
        objectives::make_lep(self.n, self.p, self.xi, self.lep_seed)
    }

    fn seed_range(&self) -> std::ops::Range<u64> {
        self.seed_start..self.seed_start + self.seeds
    }
}

// ---------------------------------------------------------------------------
// Results

/// Rounds to 12 significant digits, the precision of every emitted float.
pub fn round12(v: f64) -> f64 {
    if v.is_finite() {
        fmt12(v).parse().unwrap_or(v)
    } else {
        v
    }
}

fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub cell: String,
    pub seed: u64,
    pub k: usize,
    /// Cell parameter: bond length for RHF scans, perturbation level otherwise.
    pub param: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective at the terminal point (total energy for RHF).
    pub terminal_value: Option<f64>,
    pub grad_norm: Option<f64>,
    pub classified_index: Option<usize>,
    pub degenerate: Option<usize>,
    pub matched_config: Option<Vec<usize>>,
    pub matched_index: Option<usize>,
    pub success: bool,
    pub error: Option<String>,
}

impl RunRow {
    fn failed(cell: &str, seed: u64, k: usize, param: Option<f64>, err: &Error) -> Self {
        RunRow {
            cell: cell.to_string(),
            seed,
            k,
            param,
            converged: false,
            iterations: 0,
            terminal_value: None,
            grad_norm: None,
            classified_index: None,
            degenerate: None,
            matched_config: None,
            matched_index: None,
            success: false,
            error: Some(err.to_string()),
        }
    }

    fn from_record(cell: &str, seed: u64, k: usize, param: Option<f64>, rec: &RunRecord, value: f64) -> Self {
        RunRow {
            cell: cell.to_string(),
            seed,
            k,
            param: param.map(round12),
            converged: rec.converged,
            iterations: rec.iterations,
            terminal_value: Some(round12(value)),
            grad_norm: Some(round12(rec.grad_norm)),
            classified_index: rec.classification.map(|c| c.index),
            degenerate: rec.classification.map(|c| c.degenerate),
            matched_config: None,
            matched_index: None,
            success: false,
            error: rec.diagnostic.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub cell: String,
    pub runs: usize,
    pub converged: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean iteration count over converged runs.
    pub mean_iterations: Option<f64>,
}

/// Per-cell statistics, cells in order of first appearance.
pub fn aggregate(rows: &[RunRow]) -> Vec<CellAggregate> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (usize, usize, usize, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.cell.clone()).or_insert_with(|| {
            order.push(r.cell.clone());
            (0, 0, 0, 0)
        });
        e.0 += 1;
        if r.converged {
            e.1 += 1;
            e.3 += r.iterations;
        }
        if r.success {
            e.2 += 1;
        }
    }
    order
        .into_iter()
        .map(|cell| {
            let (runs, conv, succ, iters) = acc[&cell];
            CellAggregate {
                cell,
                runs,
                converged: conv,
                successes: succ,
                success_rate: round12(succ as f64 / runs as f64),
                mean_iterations: (conv > 0).then(|| round12(iters as f64 / conv as f64)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<CellAggregate>,
}

impl CampaignResult {
    pub fn new(experiment: Experiment, rows: Vec<RunRow>) -> Self {
        let aggregates = aggregate(&rows);
        CampaignResult { schema_version: SCHEMA_VERSION, experiment, rows, aggregates }
    }

    pub fn cell(&self, name: &str) -> Option<&CellAggregate> {
        self.aggregates.iter().find(|a| a.cell == name)
    }
}

pub const CSV_COLUMNS: [&str; 14] = [
    "cell",
    "seed",
    "k",
    "param",
    "converged",
    "iterations",
    "terminal_value",
    "grad_norm",
    "classified_index",
    "degenerate",
    "matched_config",
    "matched_index",
    "success",
    "error",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn optf(v: Option<f64>) -> String {
    v.map(fmt12).unwrap_or_default()
}

fn csv_err(e: impl fmt::Display) -> Error {
    Error::invalid(format!("csv: {e}"))
}

/// One row per run; `matched_config` is space-separated.
pub fn csv_string(result: &CampaignResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in &result.rows {
        let config = r.matched_config.as_ref().map(|c| c.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
        w.write_record([
            r.cell.clone(),
            r.seed.to_string(),
            r.k.to_string(),
            optf(r.param),
            r.converged.to_string(),
            r.iterations.to_string(),
            optf(r.terminal_value),
            optf(r.grad_norm),
            opt(&r.classified_index),
            opt(&r.degenerate),
            config.unwrap_or_default(),
            opt(&r.matched_index),
            r.success.to_string(),
            opt(&r.error),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn json_string(result: &CampaignResult) -> Result<String> {
    serde_json::to_string_pretty(result).map_err(|e| Error::invalid(format!("json: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

pub fn emit(result: &CampaignResult, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let text = match format {
        Format::Csv => csv_string(result)?,
        Format::Json => json_string(result)?,
    };
    std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load_json(path: impl AsRef<Path>) -> Result<CampaignResult> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::io(path.as_ref(), e))
}

// ---------------------------------------------------------------------------
// Campaigns

struct Job {
    cell: String,
    seed: u64,
    k: usize,
    param: Option<f64>,
    eta: Option<(f64, f64)>,
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))
            .map(|pool| pool.install(f)),
    }
}

/// Runs jobs cell by cell, handing each finished cell to `sink` in order.
fn run_cells<F>(jobs: Vec<Job>, threads: Option<usize>, sink: &mut dyn FnMut(&[RunRow]) -> Result<()>, run: F) -> Result<Vec<RunRow>>
where
    F: Fn(&Job) -> RunRow + Sync,
{
    let mut cells: Vec<Vec<Job>> = Vec::new();
    for job in jobs {
        match cells.last_mut() {
            Some(c) if c[0].cell == job.cell => c.push(job),
            _ => cells.push(vec![job]),
        }
    }
    let mut rows = Vec::new();
    for cell in cells {
        let out: Vec<RunRow> = in_pool(threads, || cell.par_iter().map(&run).collect())?;
        sink(&out)?;
        rows.extend(out);
    }
    Ok(rows)
}

/// A LEP instance in one of its two formulations.
enum Lep {
    Grassmann(Grassmann, LepGrassmann),
    Stiefel(Stiefel, LepStiefel),
}

impl Lep {
    fn new(spec: &LepSpec, formulation: Formulation, scale: f64) -> Result<Self> {
        Ok(match formulation {
            Formulation::Grassmann => Lep::Grassmann(Grassmann::new(spec.n, spec.p)?, LepGrassmann::new(&spec.a, scale)),
            Formulation::Stiefel => Lep::Stiefel(Stiefel::new(spec.n, spec.p)?, LepStiefel::new(&spec.a)),
        })
    }

    fn random(&self, k: usize, seed: u64) -> Result<BundleState> {
        match self {
            Lep::Grassmann(g, _) => init_random(g, k, seed),
            Lep::Stiefel(st, _) => init_random_stiefel(st, k, seed),
        }
    }

    fn perturbed(&self, x_ref: &DMatrix<f64>, beta: f64, k: usize, seed: u64) -> Result<BundleState> {
        match self {
            Lep::Grassmann(g, _) => init_perturbed_grassmann(g, x_ref, beta, k, seed),
            Lep::Stiefel(st, _) => init_perturbed_stiefel(st, x_ref, beta, k, seed),
        }
    }

    fn solve(&self, s0: &BundleState, cfg: &SolverConfig) -> Result<RunRecord> {
        match self {
            Lep::Grassmann(g, f) => saddle::solve(g, f, s0, cfg),
            Lep::Stiefel(st, f) => saddle::solve(st, f, s0, cfg),
        }
    }

    /// Orthonormal n×p frame of the terminal subspace.
    fn subspace(&self, s: &BundleState) -> DMatrix<f64> {
        match self {
            Lep::Grassmann(..) => s.x.frame().cloned().unwrap_or_else(|| s.x.ambient().clone()),
            Lep::Stiefel(..) => s.x.ambient().clone(),
        }
    }

    /// Terminal value on the common scale ½·Σσ of the catalog.
    fn catalog_value(&self, s: &BundleState) -> f64 {
        let y = self.subspace(s);
        match self {
            Lep::Grassmann(_, f) => f.value(&(&y * y.transpose())) * 0.5 / f.scale(),
            Lep::Stiefel(_, f) => f.value(&y),
        }
    }
}

fn lep_row(lep: &Lep, job: &Job, s0: Result<BundleState>, cfg: &SolverConfig, candidates: &[CatalogEntry], tol: f64, target: Option<&[usize]>) -> RunRow {
    let rec = s0.and_then(|s| lep.solve(&s, cfg));
    let rec = match rec {
        Ok(r) => r,
        Err(e) => return RunRow::failed(&job.cell, job.seed, job.k, job.param, &e),
    };
    let mut row = RunRow::from_record(&job.cell, job.seed, job.k, job.param, &rec, lep.catalog_value(&rec.terminal));
    if rec.converged {
        match oracle::match_frame(candidates, &lep.subspace(&rec.terminal), tol) {
            Ok(Some(e)) => {
                row.matched_config = Some(e.config.clone());
                row.matched_index = Some(e.index);
            }
            Ok(None) => {}
            Err(e) => row.error = Some(e.to_string()),
        }
    }
    row.success = match target {
        Some(t) => row.matched_config.as_deref() == Some(t),
        None => row.matched_index == Some(job.k),
    };
    row
}

/// Runs the campaign described by `cfg`.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    run_campaign_with(cfg, &mut |_| Ok(()))
}

/// As [`run_campaign`], handing each completed cell to `sink` as soon as it finishes.
pub fn run_campaign_with(cfg: &ExperimentConfig, sink: &mut dyn FnMut(&[RunRow]) -> Result<()>) -> Result<CampaignResult> {
    cfg.validate()?;
    let rows = match cfg.experiment {
        Experiment::OracleDump => Vec::new(),
        Experiment::LepAllIndex => {
            let spec = cfg.lep_spec()?;
            let catalog = oracle::enumerate_catalog(&spec)?;
            let formulation = cfg.formulations.first().copied().unwrap_or(Formulation::Grassmann);
            let lep = Lep::new(&spec, formulation, cfg.grassmann_scale)?;
            let mut jobs = Vec::new();
            for (i, &k) in cfg.ks.iter().enumerate() {
                for seed in cfg.seed_range() {
                    if cfg.pooled && (seed - cfg.seed_start) as usize % cfg.ks.len() != i {
                        continue;
                    }
                    jobs.push(Job { cell: format!("{formulation}/k={k}"), seed, k, param: None, eta: None });
                }
            }
            run_cells(jobs, cfg.threads, sink, |job| {
                let solver = cfg.solver_for(job.k, formulation, job.seed);
                lep_row(&lep, job, lep.random(job.k, job.seed), &solver, &catalog.entries, cfg.match_tol, None)
            })?
        }
        Experiment::LepPerturb | Experiment::LepSweep => {
            let spec = cfg.lep_spec()?;
            let k = cfg.target_index;
            let target = Reference::SpIndex(k).config(spec.n, spec.p)?;
            let sweep = cfg.experiment == Experiment::LepSweep;
            let mut rows = Vec::new();
            let formulations: &[Formulation] = if sweep { &cfg.formulations[..1] } else { &cfg.formulations };
            let references: &[Reference] = if sweep { &cfg.references[..1] } else { &cfg.references };
            let betas: &[f64] = if sweep { &cfg.betas[..1] } else { &cfg.betas };
            for &formulation in formulations {
                let lep = Lep::new(&spec, formulation, cfg.grassmann_scale)?;
                for reference in references {
                    let ref_config = reference.config(spec.n, spec.p)?;
                    let x_ref = spec.config_frame(&ref_config)?;
                    let mut configs = vec![target.clone(), (1..=spec.p).collect(), ref_config.clone()];
                    configs.sort();
                    configs.dedup();
                    let candidates: Vec<CatalogEntry> =
                        configs.iter().map(|c| oracle::catalog_entry(&spec, c)).collect::<Result<_>>()?;
                    let mut jobs = Vec::new();
                    for &beta in betas {
                        let etas: Vec<Option<(f64, f64)>> = if sweep {
                            cfg.eta_grid.iter().flat_map(|&a| cfg.eta_grid.iter().map(move |&b| Some((a, b)))).collect()
                        } else {
                            vec![None]
                        };
                        for eta in etas {
                            let cell = match eta {
                                Some((a, b)) => format!("{formulation}/{reference}/beta={beta:e}/eta_x={a}/eta_p={b}"),
                                None => format!("{formulation}/{reference}/beta={beta:e}"),
                            };
                            for seed in cfg.seed_range() {
                                jobs.push(Job { cell: cell.clone(), seed, k, param: Some(beta), eta });
                            }
                        }
                    }
                    rows.extend(run_cells(jobs, cfg.threads, sink, |job| {
                        let mut solver = cfg.solver_for(job.k, formulation, job.seed);
                        if let Some((a, b)) = job.eta {
                            solver.eta_x = a;
                            solver.eta_p = b;
                        }
                        let beta = job.param.unwrap_or(0.0);
                        let s0 = lep.perturbed(&x_ref, beta, job.k, job.seed);
                        lep_row(&lep, job, s0, &solver, &candidates, cfg.match_tol, Some(&target))
                    })?);
                }
            }
            rows
        }
        Experiment::RhfScan => {
            let mut rows = Vec::new();
            for path in &cfg.fcidump {
                let fixture = RhfFixture::load(path)?;
                let g = fixture.manifold()?;
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let mut jobs = Vec::new();
                for (i, &k) in cfg.ks.iter().enumerate() {
                    for seed in cfg.seed_range() {
                        if cfg.pooled && (seed - cfg.seed_start) as usize % cfg.ks.len() != i {
                            continue;
                        }
                        jobs.push(Job { cell: format!("{stem}/k={k}"), seed, k, param: fixture.bond_length(), eta: None });
                    }
                }
                rows.extend(run_cells(jobs, cfg.threads, sink, |job| {
                    let mut solver = cfg.solver_for(job.k, Formulation::Grassmann, job.seed);
                    solver.compute_spectrum = true;
                    let rec = init_random(&g, job.k, job.seed).and_then(|s| saddle::solve(&g, &fixture.objective, &s, &solver));
                    match rec {
                        Ok(rec) => {
                            let e = fixture.objective.total_energy(rec.terminal.x.ambient());
                            let mut row = RunRow::from_record(&job.cell, job.seed, job.k, job.param, &rec, e);
                            row.success = rec.converged && rec.classified_index() == Some(job.k);
                            row
                        }
                        Err(e) => RunRow::failed(&job.cell, job.seed, job.k, job.param, &e),
                    }
                })?);
            }
            rows
        }
    };
    Ok(CampaignResult::new(cfg.experiment, rows))
}

// ---------------------------------------------------------------------------
// RHF

/// An FCIDUMP file together with its optional JSON sidecar of reference energies.
#[derive(Debug, Clone)]
pub struct RhfFixture {
    pub path: PathBuf,
    pub objective: RhfObjective,
    pub reference: Option<RhfReference>,
}

impl RhfFixture {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let data = objectives::parse_fcidump(&path)?;
        let objective = RhfObjective::new(data)?;
        let sidecar = path.with_extension("json");
        let reference = if sidecar.exists() { Some(RhfReference::load(&sidecar)?) } else { None };
        Ok(RhfFixture { path, objective, reference })
    }

    pub fn manifold(&self) -> Result<Grassmann> {
        Grassmann::new(self.objective.norb(), self.objective.n_occ())
    }

    pub fn bond_length(&self) -> Option<f64> {
        self.reference.as_ref().map(|r| r.bond_length_bohr)
    }

    /// Starting state at the core-Hamiltonian guess with an empty plane.
    pub fn core_guess_state(&self) -> Result<BundleState> {
        let g = self.manifold()?;
        let x = g.point_from_frame(self.objective.core_guess()?)?;
        BundleState::from_frame(&g, x, DMatrix::zeros(g.ambient_dim(), 0))
    }

    /// Riemannian gradient descent from the core guess.
    pub fn ground_state(&self, eta: f64, tol: f64, maxit: usize) -> Result<RunRecord> {
        let g = self.manifold()?;
        let cfg = SolverConfig { k: 0, maxit: Some(maxit), tol, ..SolverConfig::default() }.with_eta(eta);
        saddle::solve(&g, &self.objective, &self.core_guess_state()?, &cfg)
    }
}

/// One distinct stationary energy of a given index at a given geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub fixture: String,
    pub bond_length: Option<f64>,
    pub index: usize,
    pub energy: f64,
    pub count: usize,
}

/// Distinct converged energies per fixture and classified index (merged within `energy_tol`).
pub fn rhf_series(result: &CampaignResult, energy_tol: f64) -> Vec<SeriesPoint> {
    let mut out: Vec<SeriesPoint> = Vec::new();
    for r in result.rows.iter().filter(|r| r.converged) {
        let (Some(index), Some(energy)) = (r.classified_index, r.terminal_value) else { continue };
        let fixture = r.cell.split('/').next().unwrap_or_default().to_string();
        match out
            .iter_mut()
            .find(|p| p.fixture == fixture && p.index == index && (p.energy - energy).abs() <= energy_tol)
        {
            Some(p) => p.count += 1,
            None => out.push(SeriesPoint { fixture, bond_length: r.param, index, energy, count: 1 }),
        }
    }
    out.sort_by(|a, b| {
        (a.fixture.as_str(), a.index)
            .cmp(&(b.fixture.as_str(), b.index))
            .then(a.energy.total_cmp(&b.energy))
    });
    out
}

pub fn series_csv(points: &[SeriesPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fixture", "bond_length", "index", "energy", "count"]).map_err(csv_err)?;
    for p in points {
        w.write_record([p.fixture.clone(), optf(p.bond_length), p.index.to_string(), fmt12(p.energy), p.count.to_string()])
            .map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_state() {
        let g = Grassmann::new(6, 2).unwrap();
        let a = init_random(&g, 2, 7).unwrap();
        let b = init_random(&g, 2, 7).unwrap();
        assert_eq!(a, b);
        a.check(&g).unwrap();
        let c = init_random(&g, 2, 8).unwrap();
        assert!((a.x.ambient() - c.x.ambient()).norm() > 0.0);
    }

    #[test]
    fn stiefel_and_grassmann_share_the_initial_subspace() {
        let g = Grassmann::new(6, 2).unwrap();
        let st = Stiefel::new(6, 2).unwrap();
        let a = init_random(&g, 1, 3).unwrap();
        let b = init_random_stiefel(&st, 1, 3).unwrap();
        let x = b.x.ambient();
        assert!((x * x.transpose() - a.x.ambient()).norm() < 1e-12);
        b.check(&st).unwrap();
        // Horizontal plane: XᵀV = 0.
        assert!((x.transpose() * b.plane_vector(&st, 0)).norm() < 1e-12);
    }

    #[test]
    fn perturbation_limits() {
        let spec = objectives::make_lep(8, 2, 1.1, 0).unwrap();
        let g = Grassmann::new(8, 2).unwrap();
        let y = spec.config_frame(&[1, 3]).unwrap();
        let s = init_perturbed_grassmann(&g, &y, 1e-14, 1, 0).unwrap();
        assert!(crate::bundle::projector_distance(s.x.frame().unwrap(), &y) < 1e-12);
        let s = init_perturbed_grassmann(&g, &y, 1e-3, 1, 0).unwrap();
        let d = crate::bundle::projector_distance(s.x.frame().unwrap(), &y);
        assert!(d > 0.0 && d < 0.1);
    }

    #[test]
    fn references() {
        assert_eq!("gm".parse::<Reference>().unwrap(), Reference::Gm);
        assert_eq!("sp-index-3".parse::<Reference>().unwrap(), Reference::SpIndex(3));
        assert!("saddle".parse::<Reference>().is_err());
        assert_eq!(Reference::SpIndex(1).config(10, 2).unwrap(), vec![1, 3]);
        assert_eq!(Reference::Gm.config(10, 3).unwrap(), vec![1, 2, 3]);
        let spec = objectives::make_lep(10, 3, 1.01, 0).unwrap();
        for m in 0..=7 {
            let c = Reference::SpIndex(m).config(10, 3).unwrap();
            assert_eq!(oracle::config_index(&spec.sigma, &c), m);
        }
    }

    #[test]
    fn config_round_trip_and_validation() {
        let text = "experiment = \"lep-perturb\"\nn = 12\nreferences = [\"gm\", \"sp-index-1\"]\nbetas = [1e-3, 1e-2]\nseeds = 5\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.experiment, Experiment::LepPerturb);
        assert_eq!(cfg.references, vec![Reference::Gm, Reference::SpIndex(1)]);
        assert_eq!(cfg.p, 2);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        let bad = ExperimentConfig { seeds: 0, ..ExperimentConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { experiment: Experiment::LepPerturb, betas: vec![0.0], ..ExperimentConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_campaign_emits_header_only() {
        let r = CampaignResult::new(Experiment::LepAllIndex, Vec::new());
        assert_eq!(csv_string(&r).unwrap().lines().count(), 1);
        assert!(r.aggregates.is_empty());
    }

    #[test]
    fn small_campaign_is_deterministic_across_thread_counts() {
        let cfg = ExperimentConfig { n: 5, p: 2, xi: 1.5, seeds: 6, ks: vec![0, 1], eta_x: 2.0, eta_p: 2.0, ..ExperimentConfig::default() };
        let a = run_campaign(&ExperimentConfig { threads: Some(1), ..cfg.clone() }).unwrap();
        let b = run_campaign(&ExperimentConfig { threads: Some(3), ..cfg }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 12);
        assert_eq!(a.aggregates, aggregate(&a.rows));
        let back: CampaignResult = serde_json::from_str(&json_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
        assert_eq!(csv_string(&a).unwrap().lines().count(), 13);
        assert!(a.rows.iter().all(|r| r.converged && r.success));
    }

    #[test]
    fn round12_keeps_twelve_digits() {
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(-1.1267427044518272), -1.12674270445);
        assert_eq!(round12(0.0), 0.0);
    }
}
