//! Graph recovery: pairwise classification of every spin pair, the
//! self-consistent sparsity prior and the conditioning corrections.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{decide, fmt_f64, CacheSet, Confidence, SparsityPrior};
use crate::data::SampleMatrix;
use crate::error::{Error, Result};
use crate::evidence::PairStats;

/// Conditional subsamples with fewer rows than this are dropped.
pub const MIN_BRANCH_ROWS: u64 = 10;

/// Iteration cap of [`self_consistent_epsilon`].
pub const SELF_CONSISTENT_MAX_ITER: usize = 100;

/// Joint state counts of spins `i` and `j`.
pub fn pair_stats(data: &SampleMatrix, i: usize, j: usize) -> Result<PairStats> {
    let n = data.n_nodes();
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidInput(format!(
            "pair ({i}, {j}) is not a pair of distinct nodes among {n}"
        )));
    }
    Ok(data.pair_counts(i, j))
}

/// Pairwise confidences with the thresholded adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceGraph {
    n_nodes: usize,
    /// Row-major `n × n`, symmetric, zero diagonal.
    log_odds: Vec<f64>,
    eta: Vec<f64>,
    adjacency: Vec<bool>,
    epsilon_used: f64,
    /// Combined conditioned gap `η̃¹` of every edge a correction examined.
    corrected: Option<Vec<Option<f64>>>,
}

/// Iterates over `(i, j)` with `i < j` in row-major order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

impl ConfidenceGraph {
    /// Builds the graph from per-pair confidences listed in [`pairs`] order.
    pub fn from_confidences(n_nodes: usize, conf: &[Confidence], prior: SparsityPrior) -> Self {
        assert_eq!(conf.len(), n_nodes * n_nodes.saturating_sub(1) / 2, "one confidence per pair");
        let mut log_odds = vec![0.0; n_nodes * n_nodes];
        let mut eta = vec![0.0; n_nodes * n_nodes];
        for ((i, j), c) in pairs(n_nodes).zip(conf) {
            for (a, b) in [(i, j), (j, i)] {
                log_odds[a * n_nodes + b] = c.log_odds;
                eta[a * n_nodes + b] = c.eta;
            }
        }
        let mut g = ConfidenceGraph {
            n_nodes,
            log_odds,
            eta,
            adjacency: vec![false; n_nodes * n_nodes],
            epsilon_used: prior.epsilon(),
            corrected: None,
        };
        g.rethreshold(prior);
        g
    }

    fn rethreshold(&mut self, prior: SparsityPrior) {
        let n = self.n_nodes;
        for (i, j) in pairs(n) {
            let b = decide(self.eta[i * n + j], prior);
            self.adjacency[i * n + j] = b;
            self.adjacency[j * n + i] = b;
        }
        self.epsilon_used = prior.epsilon();
        self.corrected = None;
    }

    /// The same confidences thresholded under another prior.
    pub fn with_prior(&self, prior: SparsityPrior) -> Self {
        let mut g = self.clone();
        g.rethreshold(prior);
        g
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn eta(&self, i: usize, j: usize) -> f64 {
        self.eta[i * self.n_nodes + j]
    }

    pub fn confidence(&self, i: usize, j: usize) -> Confidence {
        Confidence {
            eta: self.eta(i, j),
            log_odds: self.log_odds[i * self.n_nodes + j],
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n_nodes + j]
    }

    pub fn epsilon_used(&self) -> f64 {
        self.epsilon_used
    }

    pub fn prior(&self) -> SparsityPrior {
        SparsityPrior::new(self.epsilon_used).expect("stored prior is valid")
    }

    /// `η̃¹` of edge `(i, j)` if a correction examined it.
    pub fn corrected_gap(&self, i: usize, j: usize) -> Option<f64> {
        self.corrected.as_ref().and_then(|c| c[i * self.n_nodes + j])
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected.is_some()
    }

    /// Edges `(i, j)`, `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.n_nodes).filter(|&(i, j)| self.has_edge(i, j)).collect()
    }

    pub fn n_edges(&self) -> usize {
        pairs(self.n_nodes).filter(|&(i, j)| self.has_edge(i, j)).count()
    }

    /// Nodes adjacent to both `i` and `j`.
    pub fn common_neighbours(&self, i: usize, j: usize) -> Vec<usize> {
        (0..self.n_nodes)
            .filter(|&k| k != i && k != j && self.has_edge(i, k) && self.has_edge(j, k))
            .collect()
    }

    /// `r = n_b / n_nb`; infinite for a complete graph.
    pub fn bond_ratio(&self) -> f64 {
        bond_ratio(self.n_edges(), self.n_nodes)
    }

    /// Fraction of pairs joined by an edge.
    pub fn density(&self) -> f64 {
        let total = self.n_nodes * (self.n_nodes - 1) / 2;
        self.n_edges() as f64 / total as f64
    }

    /// Writes the `n × n` η matrix as headerless CSV; the diagonal is 0.
    pub fn write_eta_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.n_nodes {
            w.write_record((0..self.n_nodes).map(|j| fmt_f64(self.eta(i, j))))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes all pairs as a JSON array of `{i, j, eta, bond}` objects,
    /// with `corrected` added when a correction examined the pair.
    pub fn write_edges_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.edge_records())?;
        Ok(())
    }

    pub fn edge_records(&self) -> Vec<EdgeRecord> {
        pairs(self.n_nodes)
            .map(|(i, j)| EdgeRecord {
                i,
                j,
                eta: self.eta(i, j),
                bond: self.has_edge(i, j),
                corrected: self.corrected_gap(i, j),
            })
            .collect()
    }
}

/// `n_b / n_nb` for a graph with `edges` edges on `n` nodes.
pub fn bond_ratio(edges: usize, n: usize) -> f64 {
    let total = n * n.saturating_sub(1) / 2;
    let absent = total - edges;
    if absent == 0 {
        f64::INFINITY
    } else {
        edges as f64 / absent as f64
    }
}

/// One line of the JSON edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub eta: f64,
    pub bond: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corrected: Option<f64>,
}

/// Reads an η matrix written by [`ConfidenceGraph::write_eta_csv`].
pub fn read_eta_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    row: r + 1,
                    col: c + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Confidences of every pair, in [`pairs`] order, computed in parallel.
pub fn pair_confidences(data: &SampleMatrix, cache: &CacheSet) -> Result<Vec<Confidence>> {
    let n = data.n_nodes();
    if n < 2 {
        return Err(Error::InvalidInput("recovery needs at least two nodes".into()));
    }
    let all: Vec<(usize, usize)> = pairs(n).collect();
    all.par_iter()
        .map(|&(i, j)| cache.confidence(&data.pair_counts(i, j)).map_err(|e| e.at_pair(i, j)))
        .collect()
}

/// Classifies every pair independently.
pub fn recover(data: &SampleMatrix, prior: SparsityPrior) -> Result<ConfidenceGraph> {
    recover_with(data, prior, &CacheSet::new())
}

/// [`recover`] with a caller-supplied cache.
pub fn recover_with(data: &SampleMatrix, prior: SparsityPrior, cache: &CacheSet) -> Result<ConfidenceGraph> {
    let conf = pair_confidences(data, cache)?;
    Ok(ConfidenceGraph::from_confidences(data.n_nodes(), &conf, prior))
}

/// One step of the self-consistent iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub epsilon: f64,
    pub bond_ratio: f64,
}

/// Outcome of [`self_consistent_epsilon`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConsistent {
    pub epsilon: f64,
    pub graph: ConfidenceGraph,
    pub trace: Vec<TraceStep>,
    pub converged: bool,
    /// Set when the iteration alternated between two values.
    pub two_cycle: bool,
}

/// Default tolerance `1/(n(n−1))`.
pub fn default_tolerance(n_nodes: usize) -> f64 {
    1.0 / (n_nodes as f64 * (n_nodes as f64 - 1.0))
}

/// Iterates `ε ← r(graph(ε))` from `eps0`.
pub fn self_consistent_epsilon(
    data: &SampleMatrix,
    eps0: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SelfConsistent> {
    let conf = pair_confidences(data, &CacheSet::new())?;
    let base = ConfidenceGraph::from_confidences(data.n_nodes(), &conf, SparsityPrior::FLAT);
    self_consistent_from(&base, eps0, max_iter, tol)
}

/// [`self_consistent_epsilon`] on already computed confidences.
pub fn self_consistent_from(base: &ConfidenceGraph, eps0: f64, max_iter: usize, tol: f64) -> Result<SelfConsistent> {
    let mut eps = SparsityPrior::new(eps0)?.epsilon();
    let mut trace: Vec<TraceStep> = Vec::new();
    let mut graphs: Vec<ConfidenceGraph> = Vec::new();
    for _ in 0..max_iter.max(1) {
        let g = base.with_prior(SparsityPrior::new(eps)?);
        let r = g.bond_ratio();
        trace.push(TraceStep {
            epsilon: eps,
            bond_ratio: r,
        });
        if (r - eps).abs() < tol {
            return Ok(SelfConsistent {
                epsilon: eps,
                graph: g,
                trace,
                converged: true,
                two_cycle: false,
            });
        }
        graphs.push(g);
        let t = trace.len();
        if t >= 3 && trace[t - 1].epsilon == trace[t - 3].epsilon {
            // alternating between two priors: keep the sparser one
            let pick = if trace[t - 1].bond_ratio <= trace[t - 2].bond_ratio { t - 1 } else { t - 2 };
            return Ok(SelfConsistent {
                epsilon: trace[pick].epsilon,
                graph: graphs.swap_remove(pick),
                trace,
                converged: false,
                two_cycle: true,
            });
        }
        if !r.is_finite() {
            break;
        }
        eps = r;
    }
    let last = graphs.len() - 1;
    Ok(SelfConsistent {
        epsilon: trace[last].epsilon,
        graph: graphs.swap_remove(last),
        trace,
        converged: false,
        two_cycle: false,
    })
}

/// `ε(N) = r_g + (1 − r_g) e^{−N/50}`.
pub fn n_dependent_epsilon(r_g: f64, n_samples: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_g) {
        return Err(Error::InvalidInput(format!("r_g must lie in [0, 1], got {r_g}")));
    }
    Ok(r_g + (1.0 - r_g) * (-(n_samples as f64) / 50.0).exp())
}

/// `η̃_{ij|k}`: the ν-weighted posterior gaps of `(i, j)` on the subsamples
/// with `S_k = +1` and `S_k = −1`. Branches below [`MIN_BRANCH_ROWS`] rows
/// are dropped and the weights renormalised; `None` if both are dropped.
pub fn conditioned_confidence(
    data: &SampleMatrix,
    i: usize,
    j: usize,
    k: usize,
    prior: SparsityPrior,
) -> Result<Option<f64>> {
    conditioned_confidence_with(data, i, j, k, prior, &CacheSet::new())
}

/// [`conditioned_confidence`] with a caller-supplied cache.
pub fn conditioned_confidence_with(
    data: &SampleMatrix,
    i: usize,
    j: usize,
    k: usize,
    prior: SparsityPrior,
    cache: &CacheSet,
) -> Result<Option<f64>> {
    let n = data.n_nodes();
    if i == j || j == k || i == k || i.max(j).max(k) >= n {
        return Err(Error::InvalidInput(format!(
            "({i}, {j} | {k}) needs three distinct nodes among {n}"
        )));
    }
    let mut weighted = 0.0;
    let mut rows = 0u64;
    for up in [true, false] {
        let [a, b, c, d] = data.pair_counts_given(i, j, k, up);
        let branch = PairStats {
            n_pp: a,
            n_pm: b,
            n_mp: c,
            n_mm: d,
        };
        let size = branch.n();
        if size < MIN_BRANCH_ROWS {
            continue;
        }
        let gap = cache.confidence(&branch).map_err(|e| e.at_pair(i, j))?.posterior_gap(prior);
        weighted += size as f64 * gap;
        rows += size;
    }
    Ok((rows > 0).then(|| weighted / rows as f64))
}

/// `P(Δᵏ_ij)`: the weight of common neighbour `k` of `i` and `j`.
pub fn neighbour_weight(graph: &ConfidenceGraph, prior: SparsityPrior, i: usize, j: usize, k: usize) -> Result<f64> {
    let common = graph.common_neighbours(i, j);
    if common.is_empty() {
        return Err(Error::Topology(format!("nodes {i} and {j} have no common neighbour")));
    }
    if !common.contains(&k) {
        return Err(Error::Topology(format!("node {k} is not a common neighbour of {i} and {j}")));
    }
    let weights = triangle_weights(graph, prior, i, j, &common);
    let pos = common.iter().position(|&x| x == k).expect("checked above");
    Ok(weights[pos])
}

fn triangle_weights(graph: &ConfidenceGraph, prior: SparsityPrior, i: usize, j: usize, common: &[usize]) -> Vec<f64> {
    let raw: Vec<f64> = common
        .iter()
        .map(|&k| graph.confidence(i, k).bond_probability(prior) * graph.confidence(j, k).bond_probability(prior))
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / common.len() as f64; common.len()]
    }
}

/// How conditioned gaps over common neighbours are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    /// Weighted by `P(Δᵏ)`.
    Avg,
    /// The smallest gap.
    Min,
    /// `2 Π (1 + η̃_k)/2 − 1`.
    Prod,
}

/// Combines conditioned gaps `gaps` with neighbour weights `weights`.
pub fn combine(method: Correction, gaps: &[f64], weights: &[f64]) -> f64 {
    match method {
        Correction::Avg => {
            let total: f64 = weights.iter().sum();
            gaps.iter().zip(weights).map(|(g, w)| g * w).sum::<f64>() / total
        }
        Correction::Min => gaps.iter().copied().fold(f64::INFINITY, f64::min),
        Correction::Prod => 2.0 * gaps.iter().map(|g| (1.0 + g) / 2.0).product::<f64>() - 1.0,
    }
}

/// Re-examines every edge with at least one common neighbour by
/// conditioning on those neighbours; an edge survives iff the combined gap
/// is non-negative. Edges are only ever removed.
pub fn correct_graph(
    data: &SampleMatrix,
    graph: &ConfidenceGraph,
    prior: SparsityPrior,
    method: Correction,
) -> Result<ConfidenceGraph> {
    if data.n_nodes() != graph.n_nodes() {
        return Err(Error::InvalidInput(format!(
            "graph has {} nodes but data has {}",
            graph.n_nodes(),
            data.n_nodes()
        )));
    }
    let cache = CacheSet::new();
    let edges = graph.edges();
    let verdicts = edges
        .par_iter()
        .map(|&(i, j)| -> Result<Option<f64>> {
            let common = graph.common_neighbours(i, j);
            if common.is_empty() {
                return Ok(None);
            }
            let weights = triangle_weights(graph, prior, i, j, &common);
            let mut gaps = Vec::with_capacity(common.len());
            let mut kept_w = Vec::with_capacity(common.len());
            for (&k, &w) in common.iter().zip(&weights) {
                if let Some(g) = conditioned_confidence_with(data, i, j, k, prior, &cache)? {
                    gaps.push(g);
                    kept_w.push(w);
                }
            }
            if gaps.is_empty() {
                return Ok(None);
            }
            Ok(Some(combine(method, &gaps, &kept_w)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = graph.n_nodes();
    let mut out = graph.clone();
    let mut corrected = vec![None; n * n];
    for (&(i, j), v) in edges.iter().zip(verdicts) {
        if let Some(g) = v {
            corrected[i * n + j] = Some(g);
            corrected[j * n + i] = Some(g);
            if g < 0.0 {
                out.adjacency[i * n + j] = false;
                out.adjacency[j * n + i] = false;
            }
        }
    }
    out.corrected = Some(corrected);
    Ok(out)
}
