//! `csd`: seeded experiment campaigns and property checks.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csd_core::harness::{self, CampaignResult, Experiment, ExperimentConfig, Format, Formulation, Reference, RunRow};
use csd_core::saddle::{RetractionMode, Variant};
use csd_core::{checks, oracle, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "csd", version, about = "Constrained saddle dynamics on manifolds: campaigns and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multi-start runs from perturbed reference critical points.
    LepPerturb(CampaignArgs),
    /// Random-start runs over a list of target indices, matched against the catalog.
    LepAllIndex(CampaignArgs),
    /// Perturbed-start runs over a grid of step sizes.
    LepSweep(CampaignArgs),
    /// Excited-state search on FCIDUMP fixtures; also writes per-index energy series.
    RhfScan(CampaignArgs),
    /// Writes the analytic critical-point catalog of the eigenvalue problem.
    OracleDump(CampaignArgs),
    /// Runs the randomized property suites; exits nonzero if any property fails.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormulationArg {
    Grassmann,
    Stiefel,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RetractionArg {
    Bundle,
    Simple,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Projector,
    Representative,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum FormatArg {
    #[default]
    Csv,
    Json,
}

/// Flags override the matching keys of `--config`; unset flags keep the file's value.
#[derive(Debug, Args)]
struct CampaignArgs {
    /// TOML file with ExperimentConfig keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Spectrum ratio: σᵢ = xi^(i−n).
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    lep_seed: Option<u64>,
    /// Scale s of the Grassmann objective s·Tr(PA).
    #[arg(long)]
    grassmann_scale: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    formulations: Vec<FormulationArg>,
    /// Comma-separated references: gm or sp-index-<m>.
    #[arg(long, value_delimiter = ',')]
    references: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    /// Target indices, e.g. `0-16` or `0,1,3`.
    #[arg(long, value_parser = parse_indices)]
    ks: Option<IndexList>,
    #[arg(long)]
    target_index: Option<usize>,
    /// Spread the seed range over the target indices round-robin.
    #[arg(long)]
    pooled: bool,
    #[arg(long)]
    seed_start: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// Sets both step sizes.
    #[arg(long, conflicts_with_all = ["eta_x", "eta_p"])]
    eta: Option<f64>,
    #[arg(long)]
    eta_x: Option<f64>,
    #[arg(long)]
    eta_p: Option<f64>,
    #[arg(long)]
    eta_stiefel: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    eta_grid: Vec<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    retraction: Option<RetractionArg>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Classify terminals by their Hessian spectrum.
    #[arg(long)]
    compute_spectrum: bool,
    #[arg(long)]
    match_tol: Option<f64>,
    /// FCIDUMP file; repeat for several.
    #[arg(long)]
    fcidump: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Format of the final result file.
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    /// Energies closer than this merge into one series point (rhf-scan).
    #[arg(long, default_value_t = 1e-6)]
    energy_tol: f64,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Random trials per property.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// FCIDUMP files or directories for the integral checks; defaults to ./fixtures when present.
    #[arg(long)]
    fixtures: Vec<PathBuf>,
    /// Also write the outcomes as JSON.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct IndexList(Vec<usize>);

fn parse_indices(s: &str) -> std::result::Result<IndexList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = |_| format!("invalid index list '{s}'");
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
                if a > b {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(bad)?),
        }
    }
    if out.is_empty() {
        return Err("no indices given".into());
    }
    Ok(IndexList(out))
}

impl CampaignArgs {
    fn resolve(&self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = experiment;
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field.clone() { cfg.$field = v; })* };
        }
        set!(n, p, xi, lep_seed, grassmann_scale, target_index, seed_start, seeds, eta_x, eta_p, tol, match_tol);
        if let Some(ks) = &self.ks {
            cfg.ks = ks.0.clone();
        }
        if let Some(eta) = self.eta {
            cfg.eta_x = eta;
            cfg.eta_p = eta;
        }
        if self.eta_stiefel.is_some() {
            cfg.eta_stiefel = self.eta_stiefel;
        }
        if self.maxit.is_some() {
            cfg.maxit = self.maxit;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if !self.formulations.is_empty() {
            cfg.formulations = self
                .formulations
                .iter()
                .map(|f| match f {
                    FormulationArg::Grassmann => Formulation::Grassmann,
                    FormulationArg::Stiefel => Formulation::Stiefel,
                })
                .collect();
        }
        if !self.references.is_empty() {
            cfg.references = self.references.iter().map(|r| r.parse::<Reference>()).collect::<Result<_>>()?;
        }
        if !self.betas.is_empty() {
            cfg.betas = self.betas.clone();
        }
        if !self.eta_grid.is_empty() {
            cfg.eta_grid = self.eta_grid.clone();
        }
        if !self.fcidump.is_empty() {
            cfg.fcidump = self.fcidump.clone();
        }
        if let Some(r) = self.retraction {
            cfg.retraction = match r {
                RetractionArg::Bundle => RetractionMode::Bundle,
                RetractionArg::Simple => RetractionMode::Simple,
            };
        }
        if let Some(v) = self.variant {
            cfg.variant = match v {
                VariantArg::Projector => Variant::Projector,
                VariantArg::Representative => Variant::Representative,
            };
        }
        cfg.pooled |= self.pooled;
        cfg.compute_spectrum |= self.compute_spectrum;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Appends finished cells to `progress.csv` so an interrupted campaign keeps its rows.
fn progress_sink(dir: Option<&Path>, experiment: Experiment) -> Result<impl FnMut(&[RunRow]) -> Result<()>> {
    let path = dir.map(|d| d.join("progress.csv"));
    if let Some(p) = &path {
        write_file(p, &harness::csv_string(&CampaignResult::new(experiment, Vec::new()))?)?;
    }
    Ok(move |rows: &[RunRow]| {
        let Some(p) = &path else { return Ok(()) };
        let text = harness::csv_string(&CampaignResult::new(experiment, rows.to_vec()))?;
        let body = text.split_once('\n').map_or("", |(_, rest)| rest);
        let mut f = OpenOptions::new().append(true).open(p).map_err(|e| Error::io(p, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(p, e))
    })
}

fn run_experiment(args: &CampaignArgs, experiment: Experiment) -> Result<()> {
    let cfg = args.resolve(experiment)?;
    let dir = cfg.output.clone();
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    if experiment == Experiment::OracleDump {
        let catalog = oracle::enumerate_catalog(&cfg.lep_spec()?)?;
        println!("index  value           config");
        for e in &catalog.entries {
            println!("{:>5}  {:.12}  {:?}", e.index, e.value, e.config);
        }
        if let Some(d) = &dir {
            let json = serde_json::to_string_pretty(&catalog.to_json()).map_err(|e| Error::invalid(format!("json: {e}")))?;
            write_file(&d.join("catalog.json"), &json)?;
        }
        return Ok(());
    }

    let mut sink = progress_sink(dir.as_deref(), experiment)?;
    let result = harness::run_campaign_with(&cfg, &mut sink)?;

    println!("{:<40} {:>6} {:>9} {:>9} {:>8} {:>10}", "cell", "runs", "converged", "successes", "rate", "mean_iter");
    for a in &result.aggregates {
        let mean = a.mean_iterations.map_or("-".to_string(), |m| format!("{m:.1}"));
        println!("{:<40} {:>6} {:>9} {:>9} {:>8.3} {:>10}", a.cell, a.runs, a.converged, a.successes, a.success_rate, mean);
    }

    if let Some(d) = &dir {
        let (format, name) = match args.format {
            FormatArg::Csv => (Format::Csv, "result.csv"),
            FormatArg::Json => (Format::Json, "result.json"),
        };
        harness::emit(&result, format, d.join(name))?;
        if experiment == Experiment::RhfScan {
            write_file(&d.join("series.csv"), &harness::series_csv(&harness::rhf_series(&result, args.energy_tol))?)?;
        }
    }
    Ok(())
}

fn fixture_files(given: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let roots: Vec<PathBuf> = if given.is_empty() {
        let default = PathBuf::from("fixtures");
        if default.is_dir() {
            vec![default]
        } else {
            eprintln!("note: no fixtures found; skipping integral checks");
            Vec::new()
        }
    } else {
        given.to_vec()
    };
    let mut files = Vec::new();
    for root in roots {
        if root.is_dir() {
            let entries = fs::read_dir(&root).map_err(|e| Error::io(&root, e))?;
            for entry in entries {
                let path = entry.map_err(|e| Error::io(&root, e))?.path();
                if path.extension().is_some_and(|e| e == "fcidump") {
                    files.push(path);
                }
            }
        } else {
            files.push(root);
        }
    }
    files.sort();
    Ok(files)
}

fn run_check(args: &CheckArgs) -> Result<bool> {
    if args.trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let outcomes = checks::run_all(args.trials, &fixture_files(&args.fixtures)?)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} properties, {failed} failed", outcomes.len());
    if let Some(path) = &args.output {
        let json = serde_json::to_string_pretty(&outcomes).map_err(|e| Error::invalid(format!("json: {e}")))?;
        write_file(path, &json)?;
    }
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::LepPerturb(a) => run_experiment(a, Experiment::LepPerturb).map(|_| true),
        Command::LepAllIndex(a) => run_experiment(a, Experiment::LepAllIndex).map(|_| true),
        Command::LepSweep(a) => run_experiment(a, Experiment::LepSweep).map(|_| true),
        Command::RhfScan(a) => run_experiment(a, Experiment::RhfScan).map(|_| true),
        Command::OracleDump(a) => run_experiment(a, Experiment::OracleDump).map(|_| true),
        Command::Check(a) => run_check(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
