//! End-to-end drivers: recovery with a prior mode and optional correction,
//! synthetic benchmarks and rolling-window recovery.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{fmt_f64, CacheSet, SparsityPrior};
use crate::data::SampleMatrix;
use crate::error::{Error, Result};
use crate::metrics::{metrics, RecoveryMetrics};
use crate::plm::{lambda_max, plm_graph, plm_l1_fit, DEFAULT_LAMBDA_FRACTION};
use crate::recovery::{
    bond_ratio, correct_graph, default_tolerance, n_dependent_epsilon, pair_confidences, pairs, self_consistent_from,
    ConfidenceGraph, Correction, TraceStep, SELF_CONSISTENT_MAX_ITER,
};
use crate::synth::{
    exact_sample_small, generate_instance, gibbs_sample, hide_nodes, induced_edges, random_visible, CouplingMode,
    Edge, TopologySpec, DEFAULT_BURN_IN, DEFAULT_THIN,
};

/// How the sparsity prior ε is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum PriorMode {
    /// `ε = 1`.
    Flat,
    /// A given ε.
    Fixed(f64),
    /// Self-consistent iteration started at the given ε.
    SelfConsistent(f64),
    /// `ε(N)` from the given asymptotic ratio `r_g`.
    NDependent(f64),
}

impl FromStr for PriorMode {
    type Err = Error;

    /// Parses `flat`, `fixed=E`, `selfcon=E0` or `ndep=RG`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown prior '{s}', expected flat, fixed=E, selfcon=E0 or ndep=RG"));
        if s == "flat" {
            return Ok(PriorMode::Flat);
        }
        let (key, val) = s.split_once('=').ok_or_else(bad)?;
        let v: f64 = val
            .parse()
            .map_err(|_| Error::InvalidInput(format!("prior value '{val}' is not a number")))?;
        let mode = match key {
            "fixed" => PriorMode::Fixed(v),
            "selfcon" => PriorMode::SelfConsistent(v),
            "ndep" => PriorMode::NDependent(v),
            _ => return Err(bad()),
        };
        mode.validate()?;
        Ok(mode)
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMode::Flat => write!(f, "flat"),
            PriorMode::Fixed(e) => write!(f, "fixed={e}"),
            PriorMode::SelfConsistent(e) => write!(f, "selfcon={e}"),
            PriorMode::NDependent(r) => write!(f, "ndep={r}"),
        }
    }
}

impl PriorMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorMode::Flat => Ok(()),
            PriorMode::Fixed(e) | PriorMode::SelfConsistent(e) => SparsityPrior::new(e).map(|_| ()),
            PriorMode::NDependent(r) => n_dependent_epsilon(r, 1).map(|_| ()),
        }
    }
}

/// Parses `none`, `avg`, `min` or `prod`.
pub fn parse_correction(s: &str) -> Result<Option<Correction>> {
    match s {
        "none" => Ok(None),
        "avg" => Ok(Some(Correction::Avg)),
        "min" => Ok(Some(Correction::Min)),
        "prod" => Ok(Some(Correction::Prod)),
        _ => Err(Error::InvalidInput(format!(
            "unknown correction '{s}', expected none, avg, min or prod"
        ))),
    }
}

/// Settings shared by recovery runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub prior: PriorMode,
    pub correction: Option<Correction>,
    pub window: Option<usize>,
    pub stride: Option<usize>,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            prior: PriorMode::Flat,
            correction: None,
            window: None,
            stride: None,
            seed: 0,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.window == Some(0) || self.stride == Some(0) {
            return Err(Error::InvalidInput("window and stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Facts about a recovery run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub n_samples: usize,
    pub n_nodes: usize,
    pub prior: PriorMode,
    pub correction: Option<Correction>,
    pub epsilon: f64,
    pub epsilon_trace: Vec<TraceStep>,
    pub self_consistent_converged: Option<bool>,
    pub two_cycle: bool,
    pub n_edges_uncorrected: usize,
    pub n_edges: usize,
    pub bond_ratio: f64,
}

/// Result of [`run_recover`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub graph: ConfidenceGraph,
    pub metadata: RunMetadata,
}

/// Recovers the graph of `data` under `config`.
pub fn run_recover(config: &RecoveryConfig, data: &SampleMatrix) -> Result<RecoveryOutcome> {
    run_recover_with(config, data, &CacheSet::new())
}

/// [`run_recover`] with a caller-supplied cache.
pub fn run_recover_with(config: &RecoveryConfig, data: &SampleMatrix, cache: &CacheSet) -> Result<RecoveryOutcome> {
    config.validate()?;
    let n = data.n_nodes();
    let conf = pair_confidences(data, cache)?;
    let base = ConfidenceGraph::from_confidences(n, &conf, SparsityPrior::FLAT);
    let mut trace = Vec::new();
    let mut sc_converged = None;
    let mut two_cycle = false;
    let graph = match config.prior {
        PriorMode::Flat => base,
        PriorMode::Fixed(e) => base.with_prior(SparsityPrior::new(e)?),
        PriorMode::NDependent(r) => base.with_prior(SparsityPrior::new(n_dependent_epsilon(r, data.n_samples())?)?),
        PriorMode::SelfConsistent(e0) => {
            let sc = self_consistent_from(&base, e0, SELF_CONSISTENT_MAX_ITER, default_tolerance(n))?;
            trace = sc.trace;
            sc_converged = Some(sc.converged);
            two_cycle = sc.two_cycle;
            sc.graph
        }
    };
    let n_edges_uncorrected = graph.n_edges();
    let graph = match config.correction {
        Some(method) => correct_graph(data, &graph, graph.prior(), method)?,
        None => graph,
    };
    let metadata = RunMetadata {
        seed: config.seed,
        n_samples: data.n_samples(),
        n_nodes: n,
        prior: config.prior,
        correction: config.correction,
        epsilon: graph.epsilon_used(),
        epsilon_trace: trace,
        self_consistent_converged: sc_converged,
        two_cycle,
        n_edges_uncorrected,
        n_edges: graph.n_edges(),
        bond_ratio: graph.bond_ratio(),
    };
    Ok(RecoveryOutcome { graph, metadata })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `eta.csv`, `edges.json` and `metadata.json` into `dir`.
pub fn write_recovery(outcome: &RecoveryOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    outcome.graph.write_eta_csv(create(dir, "eta.csv")?)?;
    outcome.graph.write_edges_json(create(dir, "edges.json")?)?;
    let mut w = create(dir, "metadata.json")?;
    serde_json::to_writer_pretty(&mut w, &outcome.metadata)?;
    w.flush()?;
    Ok(())
}

/// Prior used by a benchmark method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchPrior {
    Mode(PriorMode),
    /// `ε` equal to the bond ratio of the true graph.
    TrueRatio,
}

/// A recovery method compared in benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Ms {
        prior: BenchPrior,
        correction: Option<Correction>,
    },
    /// PLM+ℓ1 at `lambda_fraction · λ_max`.
    Plm { lambda_fraction: f64 },
}

impl Method {
    /// Short label used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Method::Ms { prior, correction } => {
                let p = match prior {
                    BenchPrior::Mode(m) => m.to_string(),
                    BenchPrior::TrueRatio => "true".to_string(),
                };
                match correction {
                    Some(c) => format!("ms:{p}:{}", format!("{c:?}").to_lowercase()),
                    None => format!("ms:{p}"),
                }
            }
            Method::Plm { lambda_fraction } => format!("plm:{lambda_fraction}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Parses `plm`, `plm:F`, `ms:PRIOR` or `ms:PRIOR:CORRECTION`, where
    /// `PRIOR` is a prior mode or `true`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match parts.next() {
            Some("plm") => {
                let f = match parts.next() {
                    Some(v) => v
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad PLM fraction in '{s}'")))?,
                    None => DEFAULT_LAMBDA_FRACTION,
                };
                if !(f >= 0.0 && f64::is_finite(f)) || parts.next().is_some() {
                    return Err(Error::InvalidInput(format!("bad method '{s}'")));
                }
                Ok(Method::Plm { lambda_fraction: f })
            }
            Some("ms") => {
                let prior = match parts.next() {
                    Some("true") => BenchPrior::TrueRatio,
                    Some(p) => BenchPrior::Mode(p.parse()?),
                    None => BenchPrior::Mode(PriorMode::Flat),
                };
                let correction = match parts.next() {
                    Some(c) => parse_correction(c)?,
                    None => None,
                };
                if parts.next().is_some() {
                    return Err(Error::InvalidInput(format!("bad method '{s}'")));
                }
                Ok(Method::Ms { prior, correction })
            }
            _ => Err(Error::InvalidInput(format!("unknown method '{s}', expected ms:... or plm[:F]"))),
        }
    }
}

/// How configurations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Gibbs { burn_in: usize, thin: usize },
    /// Independent draws by enumeration, for at most 20 nodes.
    Exact,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::Gibbs {
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
        }
    }
}

/// A synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub topology: TopologySpec,
    pub coupling: CouplingMode,
    pub sample_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Number of randomly chosen visible nodes; all nodes when `None`.
    pub visible: Option<usize>,
    pub sampler: Sampler,
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n_samples: usize,
    pub seed: u64,
    pub method: String,
    pub n_visible: usize,
    pub true_edges: usize,
    pub predicted_edges: usize,
    /// Fraction of visible pairs predicted as edges.
    pub density: f64,
    /// ε used by MS methods, λ for PLM.
    pub parameter: f64,
    pub metrics: RecoveryMetrics,
}

struct Prepared {
    data: SampleMatrix,
    truth: Vec<Edge>,
}

fn prepare(cfg: &BenchmarkConfig, n_samples: usize, seed: u64) -> Result<Prepared> {
    let inst = generate_instance(&cfg.topology, cfg.coupling, seed)?;
    let full = match cfg.sampler {
        Sampler::Gibbs { burn_in, thin } => gibbs_sample(&inst, n_samples, burn_in, thin, seed)?,
        Sampler::Exact => exact_sample_small(&inst, n_samples, seed)?,
    };
    let truth = inst.edge_list();
    match cfg.visible {
        Some(k) if k < inst.n => {
            let vis = random_visible(inst.n, k, seed)?;
            Ok(Prepared {
                data: hide_nodes(&full, &vis)?,
                truth: induced_edges(&truth, &vis),
            })
        }
        _ => Ok(Prepared { data: full, truth }),
    }
}

fn evaluate(method: &Method, p: &Prepared, cache: &CacheSet) -> Result<(Vec<Edge>, f64)> {
    let n = p.data.n_nodes();
    match method {
        Method::Ms { prior, correction } => {
            let mode = match prior {
                BenchPrior::Mode(m) => *m,
                BenchPrior::TrueRatio => PriorMode::Fixed(bond_ratio(p.truth.len(), n).min(1.0)),
            };
            let cfg = RecoveryConfig {
                prior: mode,
                correction: *correction,
                ..RecoveryConfig::default()
            };
            let out = run_recover_with(&cfg, &p.data, cache)?;
            Ok((out.graph.edges(), out.metadata.epsilon))
        }
        Method::Plm { lambda_fraction } => {
            let lambda = lambda_fraction * lambda_max(&p.data);
            let fit = plm_l1_fit(&p.data, lambda)?;
            Ok((plm_graph(&fit), lambda))
        }
    }
}

/// Runs every `(N, seed)` combination in parallel and every method on each;
/// rows are ordered by `N`, then seed, then method.
pub fn run_synthetic_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    if cfg.sample_sizes.is_empty() || cfg.seeds.is_empty() || cfg.methods.is_empty() {
        return Err(Error::InvalidInput("benchmark needs sample sizes, seeds and methods".into()));
    }
    let cache = CacheSet::new();
    let jobs: Vec<(usize, u64)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n_samples, seed)| -> Result<Vec<BenchmarkRow>> {
            let p = prepare(cfg, n_samples, seed)?;
            let nv = p.data.n_nodes();
            let total = (nv * (nv - 1) / 2) as f64;
            cfg.methods
                .iter()
                .map(|m| {
                    let (pred, parameter) = evaluate(m, &p, &cache)?;
                    Ok(BenchmarkRow {
                        n_samples,
                        seed,
                        method: m.label(),
                        n_visible: nv,
                        true_edges: p.truth.len(),
                        predicted_edges: pred.len(),
                        density: pred.len() as f64 / total,
                        parameter,
                        metrics: metrics(&p.truth, &pred, nv),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Writes benchmark rows as CSV.
pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n_samples",
        "seed",
        "method",
        "n_visible",
        "true_edges",
        "predicted_edges",
        "density",
        "parameter",
        "tp",
        "tn",
        "fp",
        "fn",
        "tpr",
        "tnr",
        "fpr",
        "fnr",
    ])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.n_samples.to_string(),
            r.seed.to_string(),
            r.method.clone(),
            r.n_visible.to_string(),
            r.true_edges.to_string(),
            r.predicted_edges.to_string(),
            fmt_f64(r.density),
            fmt_f64(r.parameter),
            m.tp.to_string(),
            m.tn.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            fmt_f64(m.tpr),
            fmt_f64(m.tnr),
            fmt_f64(m.fpr),
            fmt_f64(m.fnr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-window recovery results.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingResult {
    pub window: usize,
    pub starts: Vec<usize>,
    pub outcomes: Vec<RecoveryOutcome>,
    /// `r(t) = n_b/n_nb` of each window's graph.
    pub ratios: Vec<f64>,
    /// Row-major `n × n` mean of η over windows; zero diagonal.
    pub mean_eta: Vec<f64>,
}

/// Recovers a graph on each window `[t, t + window)` for
/// `t = 0, stride, 2·stride, …`, dropping any partial final window.
pub fn rolling_windows(
    data: &SampleMatrix,
    window: usize,
    stride: usize,
    config: &RecoveryConfig,
) -> Result<RollingResult> {
    let starts = crate::timeseries::window_starts(data.n_samples(), window, stride)?;
    let cache = CacheSet::new();
    let outcomes = starts
        .par_iter()
        .map(|&t| run_recover_with(config, &data.row_window(t, window)?, &cache))
        .collect::<Result<Vec<_>>>()?;
    let n = data.n_nodes();
    let mut mean_eta = vec![0.0; n * n];
    for (i, j) in pairs(n) {
        let m = outcomes.iter().map(|o| o.graph.eta(i, j)).sum::<f64>() / outcomes.len() as f64;
        mean_eta[i * n + j] = m;
        mean_eta[j * n + i] = m;
    }
    Ok(RollingResult {
        window,
        ratios: outcomes.iter().map(|o| o.graph.bond_ratio()).collect(),
        starts,
        outcomes,
        mean_eta,
    })
}

/// Writes `ratios.csv` (`start,n_edges,bond_ratio,epsilon`), `mean_eta.csv`
/// and `windows.json` with each window's edge list into `dir`.
pub fn write_rolling(res: &RollingResult, dir: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct WindowRecord<'a> {
        start: usize,
        metadata: &'a RunMetadata,
        edges: Vec<Edge>,
    }
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_writer(create(dir, "ratios.csv")?);
    w.write_record(["start", "n_edges", "bond_ratio", "epsilon"])?;
    for ((t, o), r) in res.starts.iter().zip(&res.outcomes).zip(&res.ratios) {
        w.write_record([
            t.to_string(),
            o.graph.n_edges().to_string(),
            fmt_f64(*r),
            fmt_f64(o.metadata.epsilon),
        ])?;
    }
    w.flush()?;
    let n = res.outcomes.first().map_or(0, |o| o.graph.n_nodes());
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(dir, "mean_eta.csv")?);
    for i in 0..n {
        w.write_record((0..n).map(|j| fmt_f64(res.mean_eta[i * n + j])))?;
    }
    w.flush()?;
    let records: Vec<WindowRecord> = res
        .starts
        .iter()
        .zip(&res.outcomes)
        .map(|(&start, o)| WindowRecord {
            start,
            metadata: &o.metadata,
            edges: o.graph.edges(),
        })
        .collect();
    let mut w = create(dir, "windows.json")?;
    serde_json::to_writer_pretty(&mut w, &records)?;
    w.flush()?;
    Ok(())
}
