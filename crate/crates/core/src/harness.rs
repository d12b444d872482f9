//! Experiment recipes behind the `ltm` binary.
//!
//! Every command is a plain function returning its data, and [`execute`]
//! maps an [`ExperimentConfig`] onto them and renders the output. The CLI
//! flags and the JSON config file fill the same struct.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run, Mode, RunOptions, TrajectoryRecord};
use crate::ensembles::{branching_root_expectation, permutation, sample_directed_cm, DEFAULT_NODE_CAP};
use crate::graph::{Network, StateVector};
use crate::ingest::{self, assign, seed_count, AssignmentSpec, Format, SweepRow, Table};
use crate::meanfield::{
    concentration_constants, fixed_points, iterate, local_indicators, FixedPoint, LimitPoint, LocalIndicators,
    MeanFieldMaps, RecursionTrajectory,
};
use crate::rng::{purpose, stream};
use crate::statistics::{expected_assignment, extract, synthesize_mixture, NetworkStatistics};
use crate::threshold::ThresholdCdf;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    #[default]
    Stats,
    Recursion,
    Simulate,
    Sweep,
    Concentration,
    Branching,
    Sample,
}

fn default_horizon() -> usize {
    100
}

fn default_replicas() -> usize {
    10
}

fn default_t() -> u32 {
    3
}

/// One experiment. Exactly one statistics source is used, in the order
/// `stats`, `mixture`, `input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Edge list.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Statistics JSON as written by `stats`.
    #[serde(default)]
    pub stats: Option<PathBuf>,
    /// `w:k:r,...` population; in-degrees independent with the out-degree law.
    #[serde(default)]
    pub mixture: Option<String>,
    /// Threshold CDF for edge-list inputs, e.g. `0.3@1/5,0.7@1/2`.
    #[serde(default)]
    pub threshold_cdf: Option<String>,
    /// Network size for ensemble draws.
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub n_grid: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub upsilon: Option<f64>,
    /// `a:b:count` (inclusive) or a comma list.
    #[serde(default)]
    pub upsilon_grid: Option<String>,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    /// Depth for `branching` and `concentration`.
    #[serde(default = "default_t")]
    pub t: u32,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub freeze_zero_outdegree: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            input: None,
            stats: None,
            mixture: None,
            threshold_cdf: None,
            n: None,
            n_grid: None,
            mode: Mode::Ltm,
            upsilon: None,
            upsilon_grid: None,
            xi: None,
            horizon: default_horizon(),
            replicas: default_replicas(),
            seed: 0,
            t: default_t(),
            format: Format::Csv,
            out: None,
            freeze_zero_outdegree: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("replicas must be at least 1".into()));
        }
        for (name, v) in [("upsilon", self.upsilon), ("xi", self.xi)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
                }
            }
        }
        if let Some(g) = &self.upsilon_grid {
            parse_grid(g)?;
        }
        Ok(())
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            freeze_zero_out_degree: self.freeze_zero_outdegree,
            ..RunOptions::new(self.mode, self.horizon)
        }
    }
}

/// `a:b:count` gives `count` evenly spaced points from `a` to `b`; anything
/// else is read as a comma-separated list. Values must lie in `[0, 1]`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad grid {spec:?}"));
    let grid: Vec<f64> = if let [a, b, c] = spec.split(':').collect::<Vec<_>>()[..] {
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let c: usize = c.trim().parse().map_err(|_| bad())?;
        match c {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..c).map(|i| a + (b - a) * i as f64 / (c - 1) as f64).collect(),
        }
    } else {
        spec.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(bad());
    }
    Ok(grid)
}

/// `w:k:r,...`
pub fn parse_mixture(spec: &str) -> Result<Vec<(f64, u32, u32)>> {
    spec.split(',')
        .map(|part| {
            let bad = || Error::InvalidArgument(format!("bad mixture term {part:?}"));
            match part.trim().split(':').collect::<Vec<_>>()[..] {
                [w, k, r] => Ok((
                    w.parse().map_err(|_| bad())?,
                    k.parse().map_err(|_| bad())?,
                    r.parse().map_err(|_| bad())?,
                )),
                _ => Err(bad()),
            }
        })
        .collect()
}

fn parse_n_grid(spec: &str) -> Result<Vec<u64>> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad size {v:?}")))
        })
        .collect()
}

/// Where statistics come from.
#[derive(Debug, Clone)]
pub enum Source {
    Stats(NetworkStatistics),
    Mixture(Vec<(f64, u32, u32)>),
    Graph { topology: Network, cdf: Option<ThresholdCdf> },
}

impl Source {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        if let Some(p) = &cfg.stats {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            return Ok(Source::Stats(serde_json::from_str(&text)?));
        }
        if let Some(m) = &cfg.mixture {
            return Ok(Source::Mixture(parse_mixture(m)?));
        }
        if let Some(p) = &cfg.input {
            let cdf = cfg.threshold_cdf.as_deref().map(str::parse).transpose()?;
            return Ok(Source::Graph {
                topology: ingest::read_edge_list(p)?.topology()?,
                cdf,
            });
        }
        Err(Error::InvalidArgument("one of --stats, --mixture or --input is required".into()))
    }

    /// Statistics for the recursion. Edge lists without a CDF use the
    /// all-zero thresholds of a bare topology.
    pub fn statistics(&self, upsilon: Option<f64>, n: Option<u64>) -> Result<NetworkStatistics> {
        match self {
            Source::Stats(s) => Ok(s.clone()),
            Source::Mixture(m) => synthesize_mixture(m, upsilon.unwrap_or(0.0), n.unwrap_or(1_000_000)),
            Source::Graph { topology, cdf } => match cdf {
                Some(cdf) => expected_assignment(topology, cdf, upsilon.unwrap_or(0.0)),
                None => Ok(extract(topology)),
            },
        }
    }

    /// Statistics realizable at size `n`.
    fn design(&self, upsilon: Option<f64>, n: u64) -> Result<NetworkStatistics> {
        match self {
            Source::Stats(s) => {
                s.counts(n)?;
                Ok(s.clone())
            }
            Source::Mixture(m) => synthesize_mixture(m, upsilon.unwrap_or(0.0), n),
            Source::Graph { .. } => Err(Error::InvalidArgument("ensemble draws need --stats or --mixture".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalRow {
    pub degree: u32,
    pub p_in: f64,
    pub p_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub nodes: Option<u64>,
    pub mean_degree: f64,
    pub upsilon: f64,
    pub xi: f64,
    pub indicators: Option<LocalIndicators>,
    pub marginals: Vec<MarginalRow>,
    pub statistics: NetworkStatistics,
}

impl Table for StatsReport {
    fn header(&self) -> &'static str {
        "degree,p_in,p_out"
    }

    fn rows(&self, out: &mut String) {
        use std::fmt::Write;
        for r in &self.marginals {
            let _ = writeln!(out, "{},{},{}", r.degree, r.p_in, r.p_out);
        }
    }
}

pub fn cmd_stats(stats: &NetworkStatistics) -> StatsReport {
    let p_in = stats.in_degree_marginal();
    let p_out = stats.out_degree_marginal();
    let degrees: std::collections::BTreeSet<u32> = p_in.keys().chain(p_out.keys()).copied().collect();
    StatsReport {
        nodes: stats.n(),
        mean_degree: stats.mean_degree(),
        upsilon: stats.upsilon(),
        xi: stats.xi(),
        indicators: MeanFieldMaps::from_stats(stats).ok().map(|m| local_indicators(&m)),
        marginals: degrees
            .into_iter()
            .map(|d| MarginalRow {
                degree: d,
                p_in: p_in.get(&d).copied().unwrap_or(0.0),
                p_out: p_out.get(&d).copied().unwrap_or(0.0),
            })
            .collect(),
        statistics: stats.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionReport {
    pub trajectory: RecursionTrajectory,
    pub fixed_points: Vec<FixedPoint>,
    pub discontinuities: Vec<f64>,
    pub limit: Vec<LimitPoint>,
}

impl Table for RecursionReport {
    fn header(&self) -> &'static str {
        self.trajectory.header()
    }

    fn rows(&self, out: &mut String) {
        self.trajectory.rows(out)
    }
}

pub fn cmd_recursion(maps: &MeanFieldMaps, xi: f64, upsilon: f64, horizon: usize, grid: &[f64]) -> Result<RecursionReport> {
    let trajectory = iterate(maps, xi, upsilon, horizon)?;
    let profile = fixed_points(maps)?;
    Ok(RecursionReport {
        trajectory,
        limit: profile.tabulate(maps, grid),
        fixed_points: profile.fixed_points,
        discontinuities: profile.discontinuities,
    })
}

pub fn cmd_simulate(net: &Network, opts: RunOptions) -> TrajectoryRecord {
    run(net, opts)
}

/// Networks swept over the seed grid.
pub enum SweepSource<'a> {
    /// A fresh configuration-model wiring per point; thresholds from the
    /// statistics, states re-drawn with `round(n upsilon)` ones.
    Ensemble { stats: &'a NetworkStatistics, n: u64 },
    /// A fixed topology with thresholds and states assigned per point.
    Graph { topology: &'a Network, cdf: &'a ThresholdCdf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Recursion prediction at `xi = upsilon`.
    pub staircase: Vec<LimitPoint>,
}

impl Table for SweepReport {
    fn header(&self) -> &'static str {
        self.rows.header()
    }

    fn rows(&self, out: &mut String) {
        self.rows.rows(out)
    }
}

/// Seed for grid point `i`, replica `rep`; independent of the grid length
/// and replica count.
fn point_seed(master: u64, i: usize, rep: usize) -> u64 {
    stream(master, &[i as u64, rep as u64]).next_u64()
}

fn sweep_point(source: &SweepSource, upsilon: f64, seed: u64, opts: RunOptions) -> Result<TrajectoryRecord> {
    let net = match source {
        SweepSource::Ensemble { stats, n } => {
            let wired = sample_directed_cm(stats, *n, seed)?.network;
            let n = wired.node_count();
            let ones = seed_count(n, upsilon);
            let pi = permutation(n, &mut stream(seed, &[purpose::STATES]));
            let bits: Vec<bool> = (0..n).map(|i| pi[i] < ones).collect();
            wired.with_initial_state(StateVector::from_bools(&bits))?
        }
        SweepSource::Graph { topology, cdf } => assign(
            topology,
            &AssignmentSpec {
                cdf: (*cdf).clone(),
                upsilon,
                seed,
            },
        )?,
    };
    Ok(run(&net, opts))
}

pub fn cmd_sweep(source: &SweepSource, grid: &[f64], replicas: usize, seed: u64, opts: RunOptions) -> Result<SweepReport> {
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|i| (0..replicas).map(move |r| (i, r))).collect();
    let one = |&(i, rep): &(usize, usize)| -> Result<SweepRow> {
        let rec = sweep_point(source, grid[i], point_seed(seed, i, rep), opts)?;
        Ok(SweepRow {
            upsilon: grid[i],
            rep,
            z_t: rec.final_z(),
            a_t: rec.final_a(),
        })
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<SweepRow> = {
        use rayon::prelude::*;
        jobs.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<SweepRow> = jobs.iter().map(one).collect::<Result<_>>()?;

    let base = match source {
        SweepSource::Ensemble { stats, .. } => (*stats).clone(),
        SweepSource::Graph { topology, cdf } => expected_assignment(topology, cdf, 0.0)?,
    };
    let maps = MeanFieldMaps::from_stats(&base)?;
    let staircase = fixed_points(&maps)?.tabulate(&maps, grid);
    Ok(SweepReport { rows, staircase })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n: u64,
    pub t: u32,
    pub mean_dev: f64,
    pub median_dev: f64,
    pub max_dev: f64,
    /// `gamma_t / n`
    pub mean_bound: f64,
    /// `2 exp(-epsilon^2 beta n)` at `epsilon = 2 median_dev`.
    pub tail_bound: f64,
    pub vacuous: bool,
}

impl Table for Vec<ConcentrationRow> {
    fn header(&self) -> &'static str {
        "n,t,mean_dev,median_dev,max_dev,mean_bound,tail_bound,vacuous"
    }

    fn rows(&self, out: &mut String) {
        use std::fmt::Write;
        for r in self {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n, r.t, r.mean_dev, r.median_dev, r.max_dev, r.mean_bound, r.tail_bound, r.vacuous
            );
        }
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Per-replica `max_{s <= t} |z(s) - y(s)|` on configuration-model draws.
pub fn deviations(stats: &NetworkStatistics, n: u64, t: u32, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    let maps = MeanFieldMaps::from_stats(stats)?;
    let rec = iterate(&maps, stats.xi(), stats.upsilon(), t as usize)?;
    let one = |rep: usize| -> Result<f64> {
        let net = sample_directed_cm(stats, n, point_seed(seed, n as usize, rep))?.network;
        let tr = run(&net, RunOptions::new(Mode::Ltm, t as usize));
        Ok((0..=t as usize).map(|s| (tr.z_at(s) - rec.y_at(s)).abs()).fold(0.0, f64::max))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..replicas).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..replicas).map(one).collect()
    }
}

pub fn cmd_concentration(source: &Source, upsilon: Option<f64>, n_grid: &[u64], t: u32, replicas: usize, seed: u64) -> Result<Vec<ConcentrationRow>> {
    n_grid
        .iter()
        .map(|&n| {
            let stats = source.design(upsilon, n)?;
            let mut dev = deviations(&stats, n, t, replicas, seed)?;
            let mean_dev = dev.iter().sum::<f64>() / dev.len() as f64;
            let max_dev = dev.iter().copied().fold(0.0, f64::max);
            let median_dev = median(&mut dev);
            let bounds = concentration_constants(&stats, t)?;
            let eps = (2.0 * median_dev).max(1e-12);
            Ok(ConcentrationRow {
                n,
                t,
                mean_dev,
                median_dev,
                max_dev,
                mean_bound: (bounds.ln_gamma_t - (n as f64).ln()).exp(),
                tail_bound: bounds.tail(eps, n as f64).min(1.0),
                vacuous: bounds.vacuous(eps, n as f64),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingRow {
    pub t: u32,
    pub mean: f64,
    pub std_err: f64,
    pub y: f64,
    pub used: usize,
    pub discarded: usize,
}

impl BranchingRow {
    /// `|mean - y|` in standard errors; exact agreement counts as 0.
    pub fn z_score(&self) -> f64 {
        let d = (self.mean - self.y).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }
}

impl Table for Vec<BranchingRow> {
    fn header(&self) -> &'static str {
        "t,mean,std_err,y,used,discarded"
    }

    fn rows(&self, out: &mut String) {
        use std::fmt::Write;
        for r in self {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.t, r.mean, r.std_err, r.y, r.used, r.discarded);
        }
    }
}

/// Branching-process root means for `0..=t_max` against `y(t)`. Each depth
/// uses its own substream of `seed`.
pub fn cmd_branching(stats: &NetworkStatistics, t_max: u32, replicas: usize, seed: u64) -> Result<Vec<BranchingRow>> {
    let maps = MeanFieldMaps::from_stats(stats)?;
    let rec = iterate(&maps, stats.xi(), stats.upsilon(), t_max as usize)?;
    (0..=t_max)
        .map(|t| {
            let e = branching_root_expectation(stats, t, replicas, point_seed(seed, t as usize, 0), DEFAULT_NODE_CAP)?;
            Ok(BranchingRow {
                t,
                mean: e.mean,
                std_err: e.std_err,
                y: rec.y_at(t as usize),
                used: e.used,
                discarded: e.discarded,
            })
        })
        .collect()
}

fn side_path(out: &Path, tag: &str, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn emit(table: &impl Table, cfg: &ExperimentConfig) -> Result<String> {
    let text = ingest::render(table, cfg.format)?;
    if let Some(p) = &cfg.out {
        ingest::write_text(&text, Some(p))?;
    }
    Ok(text)
}

/// CSV output carries the main table; a second table goes to
/// `<out>.<tag>.csv`, or after a blank line when printing.
fn emit_with_side(main: &impl Table, side: &impl Table, tag: &str, cfg: &ExperimentConfig) -> Result<String> {
    let mut text = emit(main, cfg)?;
    if cfg.format == Format::Csv {
        let extra = ingest::render(side, Format::Csv)?;
        match &cfg.out {
            Some(p) => ingest::write_text(&extra, Some(&side_path(p, tag, cfg.format)))?,
            None => {
                text.push('\n');
                text.push_str(&extra);
            }
        }
    }
    Ok(text)
}

/// The network a `simulate` run starts from.
fn simulation_network(source: &Source, cfg: &ExperimentConfig) -> Result<Network> {
    match source {
        Source::Graph { topology, cdf } => {
            let cdf = cdf
                .clone()
                .ok_or_else(|| Error::InvalidArgument("--threshold-cdf is required with --input".into()))?;
            assign(
                topology,
                &AssignmentSpec {
                    cdf,
                    upsilon: cfg.upsilon.unwrap_or(0.0),
                    seed: cfg.seed,
                },
            )
        }
        _ => {
            let n = cfg.n.ok_or_else(|| Error::InvalidArgument("--n is required for ensemble draws".into()))?;
            let stats = source.design(cfg.upsilon, n)?;
            Ok(sample_directed_cm(&stats, n, cfg.seed)?.network)
        }
    }
}

/// Runs one configured experiment, writes `cfg.out` if set, and returns the
/// rendered text.
pub fn execute(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let source = Source::resolve(cfg)?;
    match cfg.experiment {
        Experiment::Stats => {
            let stats = match &source {
                Source::Graph { topology, cdf: Some(cdf) } => extract(&assign(
                    topology,
                    &AssignmentSpec {
                        cdf: cdf.clone(),
                        upsilon: cfg.upsilon.unwrap_or(0.0),
                        seed: cfg.seed,
                    },
                )?),
                _ => source.statistics(cfg.upsilon, cfg.n)?,
            };
            emit(&cmd_stats(&stats), cfg)
        }
        Experiment::Recursion => {
            let stats = source.statistics(cfg.upsilon, cfg.n)?;
            let maps = MeanFieldMaps::from_stats(&stats)?;
            let upsilon = cfg.upsilon.unwrap_or(stats.upsilon());
            let xi = cfg.xi.unwrap_or(stats.xi());
            let grid = match &cfg.upsilon_grid {
                Some(g) => parse_grid(g)?,
                None => parse_grid("0:1:101")?,
            };
            let report = cmd_recursion(&maps, xi, upsilon, cfg.horizon, &grid)?;
            emit_with_side(&report, &report.limit, "profile", cfg)
        }
        Experiment::Simulate => {
            let net = simulation_network(&source, cfg)?;
            emit(&cmd_simulate(&net, cfg.run_options()), cfg)
        }
        Experiment::Sweep => {
            let grid = parse_grid(
                cfg.upsilon_grid
                    .as_deref()
                    .ok_or_else(|| Error::InvalidArgument("--upsilon-grid is required".into()))?,
            )?;
            let report = match &source {
                Source::Graph { topology, cdf } => {
                    let cdf = cdf
                        .as_ref()
                        .ok_or_else(|| Error::InvalidArgument("--threshold-cdf is required with --input".into()))?;
                    cmd_sweep(&SweepSource::Graph { topology, cdf }, &grid, cfg.replicas, cfg.seed, cfg.run_options())?
                }
                _ => {
                    let n = cfg.n.ok_or_else(|| Error::InvalidArgument("--n is required for ensemble draws".into()))?;
                    let stats = source.design(cfg.upsilon, n)?;
                    cmd_sweep(&SweepSource::Ensemble { stats: &stats, n }, &grid, cfg.replicas, cfg.seed, cfg.run_options())?
                }
            };
            emit_with_side(&report, &report.staircase, "staircase", cfg)
        }
        Experiment::Concentration => {
            let grid = match (&cfg.n_grid, cfg.n) {
                (Some(g), _) => parse_n_grid(g)?,
                (None, Some(n)) => vec![n],
                (None, None) => return Err(Error::InvalidArgument("--n-grid or --n is required".into())),
            };
            let upsilon = cfg.upsilon.or(cfg.xi);
            emit(&cmd_concentration(&source, upsilon, &grid, cfg.t, cfg.replicas, cfg.seed)?, cfg)
        }
        Experiment::Branching => {
            let stats = source.statistics(cfg.upsilon, cfg.n)?;
            emit(&cmd_branching(&stats, cfg.t, cfg.replicas, cfg.seed)?, cfg)
        }
        Experiment::Sample => {
            let out = cfg
                .out
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--out is required for sample".into()))?;
            let n = cfg.n.ok_or_else(|| Error::InvalidArgument("--n is required for ensemble draws".into()))?;
            let stats = source.design(cfg.upsilon, n)?;
            let sample = sample_directed_cm(&stats, n, cfg.seed)?;
            ingest::export_sample(&sample, out)?;
            Ok(format!(
                "wrote {} and {}\n",
                out.with_extension("edges").display(),
                out.with_extension("json").display()
            ))
        }
    }
}

/// Machine-readable failure record printed by the CLI.
pub fn error_record(e: &Error) -> String {
    let mut m = BTreeMap::new();
    m.insert("error", e.kind().to_string());
    m.insert("message", e.to_string());
    serde_json::to_string(&m).expect("string map")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::{synthesize, DegreeLaw};
    use crate::threshold::Fraction;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_grid("0:2:3").is_err());
        assert!(parse_grid("a").is_err());
        assert_eq!(parse_mixture("0.45:14:3,0.55:11:9").unwrap(), vec![(0.45, 14, 3), (0.55, 11, 9)]);
        assert!(parse_mixture("0.45:14").is_err());
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment":"sweep","mixture":"1:7:3","n":100}"#).unwrap();
        assert_eq!(cfg.horizon, 100);
        assert_eq!(cfg.replicas, 10);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":"sweep","bogus":1}"#).is_err());
    }

    #[test]
    fn recursion_at_full_seed_stays_at_one() {
        let maps = MeanFieldMaps::homogeneous(7, 3).unwrap();
        let r = cmd_recursion(&maps, 1.0, 1.0, 20, &[0.0, 1.0]).unwrap();
        assert!(r.trajectory.x.iter().all(|&x| x == 1.0));
        assert_eq!(r.discontinuities.len(), 1);
        assert!((r.discontinuities[0] - 0.256).abs() < 0.002);
    }

    #[test]
    fn sweep_is_reproducible_and_extendable() {
        let stats = synthesize_mixture(&[(1.0, 4, 2)], 0.0, 200).unwrap();
        let src = SweepSource::Ensemble { stats: &stats, n: 200 };
        let opts = RunOptions::new(Mode::Ltm, 30);
        let a = cmd_sweep(&src, &[0.2, 0.6], 2, 5, opts).unwrap();
        let b = cmd_sweep(&src, &[0.2, 0.6], 3, 5, opts).unwrap();
        assert_eq!(a, cmd_sweep(&src, &[0.2, 0.6], 2, 5, opts).unwrap());
        let kept: Vec<_> = b.rows.iter().filter(|r| r.rep < 2).copied().collect();
        assert_eq!(kept, a.rows);
    }

    #[test]
    fn concentration_at_t0_is_exact() {
        let src = Source::Mixture(vec![(1.0, 3, 2)]);
        let rows = cmd_concentration(&src, Some(0.6), &[300], 0, 5, 1).unwrap();
        assert_eq!(rows[0].max_dev, 0.0);
        assert!(rows[0].vacuous);
    }

    #[test]
    fn branching_saturated_seed() {
        let cdf = ThresholdCdf::step(Fraction::new(2, 3).unwrap());
        let s = synthesize(&cdf, &DegreeLaw::regular(3), 1.0, 10).unwrap();
        let rows = cmd_branching(&s, 3, 200, 0).unwrap();
        assert!(rows.iter().all(|r| r.mean == 1.0 && r.y == 1.0 && r.z_score() == 0.0));
    }

    #[test]
    fn stats_table_for_two_cycle() {
        let net = Network::build(&[(0, 1), (1, 0)], vec![1, 1], StateVector::from_bools(&[true, false])).unwrap();
        let rep = cmd_stats(&extract(&net));
        assert_eq!(ingest::render(&rep, Format::Csv).unwrap(), "degree,p_in,p_out\n1,1,1\n");
    }

    #[test]
    fn errors_are_machine_readable() {
        let cfg = ExperimentConfig::new(Experiment::Recursion);
        let e = execute(&cfg).unwrap_err();
        let rec: BTreeMap<String, String> = serde_json::from_str(&error_record(&e)).unwrap();
        assert_eq!(rec["error"], "invalid_argument");
    }
}
