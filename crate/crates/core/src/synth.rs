//! Synthetic benchmarks: topologies, couplings and equilibrium samples of
//!
//! ```text
//! P(S) = exp(Σ_i h_i S_i + Σ_{i<j} J_ij S_i S_j) / Z
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleMatrix;
use crate::error::{Error, Result};

/// Default number of discarded Gibbs sweeps.
pub const DEFAULT_BURN_IN: usize = 1000;
/// Default number of sweeps between kept samples.
pub const DEFAULT_THIN: usize = 10;
/// Default dilution of [`TopologySpec::DilutedGrid`].
pub const DEFAULT_DILUTION: f64 = 0.3;
/// Largest system [`exact_sample_small`] enumerates.
pub const MAX_EXACT_NODES: usize = 20;

/// Undirected edge `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

/// Benchmark topology with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    /// `n/2` disjoint pairs.
    Dimers { n: usize },
    /// One hub linked to all other `n − 1` nodes.
    Star { n: usize },
    /// Each pair present with probability `c/(n − 1)`.
    ErdosRenyi { n: usize, c: f64 },
    /// Open `side × side` square lattice.
    Grid2d { side: usize },
    /// Square lattice with each edge removed with probability `p`.
    DilutedGrid { side: usize, p: f64 },
    /// A given edge list.
    Custom { n: usize, edges: Vec<Edge> },
}

impl TopologySpec {
    pub fn n_nodes(&self) -> usize {
        match self {
            TopologySpec::Dimers { n }
            | TopologySpec::Star { n }
            | TopologySpec::ErdosRenyi { n, .. }
            | TopologySpec::Custom { n, .. } => *n,
            TopologySpec::Grid2d { side } | TopologySpec::DilutedGrid { side, .. } => side * side,
        }
    }

    pub fn tag(&self) -> TopologyTag {
        match self {
            TopologySpec::Dimers { .. } => TopologyTag::Dimers,
            TopologySpec::Star { .. } => TopologyTag::Star,
            TopologySpec::ErdosRenyi { c, .. } => TopologyTag::ErdosRenyi { c: *c },
            TopologySpec::Grid2d { .. } => TopologyTag::Grid2d,
            TopologySpec::DilutedGrid { p, .. } => TopologyTag::DilutedGrid { p: *p },
            TopologySpec::Custom { .. } => TopologyTag::Custom,
        }
    }
}

/// Topology label stored with an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyTag {
    Dimers,
    Star,
    ErdosRenyi { c: f64 },
    Grid2d,
    DilutedGrid { p: f64 },
    Custom,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn grid_edges(side: usize) -> Vec<Edge> {
    let mut e = Vec::with_capacity(2 * side * side.saturating_sub(1));
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                e.push((v, v + 1));
            }
            if r + 1 < side {
                e.push((v, v + side));
            }
        }
    }
    e
}

/// Edge set of `spec`, deterministic in `seed`, sorted.
pub fn generate_topology(spec: &TopologySpec, seed: u64) -> Result<Vec<Edge>> {
    let mut rng = rng_for(seed, 1);
    let mut edges = match spec {
        TopologySpec::Dimers { n } => {
            if *n == 0 || n % 2 != 0 {
                return Err(Error::Topology(format!("dimers need an even n, got {n}")));
            }
            let mut nodes: Vec<usize> = (0..*n).collect();
            nodes.shuffle(&mut rng);
            nodes.chunks(2).map(|p| (p[0].min(p[1]), p[0].max(p[1]))).collect()
        }
        TopologySpec::Star { n } => {
            if *n < 2 {
                return Err(Error::Topology(format!("a star needs n >= 2, got {n}")));
            }
            (1..*n).map(|j| (0, j)).collect()
        }
        TopologySpec::ErdosRenyi { n, c } => {
            if *n < 2 || !(*c >= 0.0 && *c <= (*n - 1) as f64) {
                return Err(Error::Topology(format!(
                    "Erdős–Rényi graph needs n >= 2 and 0 <= c <= n - 1, got n = {n}, c = {c}"
                )));
            }
            let p = c / (*n - 1) as f64;
            let mut e = Vec::new();
            for i in 0..*n {
                for j in i + 1..*n {
                    if rng.gen::<f64>() < p {
                        e.push((i, j));
                    }
                }
            }
            e
        }
        TopologySpec::Grid2d { side } => {
            if *side < 2 {
                return Err(Error::Topology(format!("grid side must be >= 2, got {side}")));
            }
            grid_edges(*side)
        }
        TopologySpec::DilutedGrid { side, p } => {
            if *side < 2 || !(0.0..=1.0).contains(p) {
                return Err(Error::Topology(format!(
                    "diluted grid needs side >= 2 and p in [0, 1], got side = {side}, p = {p}"
                )));
            }
            grid_edges(*side).into_iter().filter(|_| rng.gen::<f64>() >= *p).collect()
        }
        TopologySpec::Custom { n, edges } => {
            let mut out = Vec::with_capacity(edges.len());
            for &(a, b) in edges {
                if a == b || a >= *n || b >= *n {
                    return Err(Error::Topology(format!("edge ({a}, {b}) invalid on {n} nodes")));
                }
                out.push((a.min(b), a.max(b)));
            }
            out.sort_unstable();
            out.dedup();
            out
        }
    };
    edges.sort_unstable();
    Ok(edges)
}

/// Coupling distribution on the edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingMode {
    /// `±β` with equal probability.
    Bimodal { beta: f64 },
    /// `+β` on every edge.
    Ferromagnetic { beta: f64 },
}

/// One weighted edge of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Couplings and fields of a synthetic Ising system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingInstance {
    pub n: usize,
    pub edges: Vec<WeightedEdge>,
    pub fields: Vec<f64>,
    pub topology_tag: TopologyTag,
    pub seed: u64,
}

impl IsingInstance {
    /// Replaces the zero default fields.
    pub fn with_fields(mut self, fields: Vec<f64>) -> Result<Self> {
        if fields.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "expected {} fields, got {}",
                self.n,
                fields.len()
            )));
        }
        self.fields = fields;
        Ok(self)
    }

    /// Dense symmetric coupling matrix, row-major.
    pub fn coupling_matrix(&self) -> Vec<f64> {
        let mut j = vec![0.0; self.n * self.n];
        for e in &self.edges {
            j[e.i * self.n + e.j] = e.weight;
            j[e.j * self.n + e.i] = e.weight;
        }
        j
    }

    pub fn edge_list(&self) -> Vec<Edge> {
        self.edges.iter().map(|e| (e.i, e.j)).collect()
    }

    fn neighbours(&self) -> Vec<Vec<(usize, f64)>> {
        let mut nb = vec![Vec::new(); self.n];
        for e in &self.edges {
            nb[e.i].push((e.j, e.weight));
            nb[e.j].push((e.i, e.weight));
        }
        nb
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: IsingInstance = serde_json::from_str(s)?;
        if inst.fields.len() != inst.n || inst.edges.iter().any(|e| e.i >= inst.n || e.j >= inst.n || e.i == e.j) {
            return Err(Error::InvalidInput("inconsistent instance".into()));
        }
        Ok(inst)
    }
}

/// Draws couplings on `edges` of an `n`-node topology. Fields are zero.
pub fn assign_couplings(
    n: usize,
    edges: &[Edge],
    mode: CouplingMode,
    tag: TopologyTag,
    seed: u64,
) -> Result<IsingInstance> {
    let beta = match mode {
        CouplingMode::Bimodal { beta } | CouplingMode::Ferromagnetic { beta } => beta,
    };
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    let mut rng = rng_for(seed, 2);
    let edges = edges
        .iter()
        .map(|&(i, j)| {
            if i == j || i >= n || j >= n {
                return Err(Error::Topology(format!("edge ({i}, {j}) invalid on {n} nodes")));
            }
            let weight = match mode {
                CouplingMode::Bimodal { .. } => {
                    if rng.gen::<bool>() {
                        beta
                    } else {
                        -beta
                    }
                }
                CouplingMode::Ferromagnetic { .. } => beta,
            };
            Ok(WeightedEdge {
                i: i.min(j),
                j: i.max(j),
                weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IsingInstance {
        n,
        edges,
        fields: vec![0.0; n],
        topology_tag: tag,
        seed,
    })
}

/// Topology and couplings in one step.
pub fn generate_instance(spec: &TopologySpec, mode: CouplingMode, seed: u64) -> Result<IsingInstance> {
    let edges = generate_topology(spec, seed)?;
    assign_couplings(spec.n_nodes(), &edges, mode, spec.tag(), seed)
}

/// `P(S_i = +1 | local field x) = 1 / (1 + e^{−2x})`.
#[inline]
pub fn heat_bath_up_probability(local_field: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * local_field).exp())
}

/// Single-site heat-bath sampling. After `burn_in` sweeps, one configuration
/// is kept every `thin` sweeps until `n_samples` are collected.
pub fn gibbs_sample(
    inst: &IsingInstance,
    n_samples: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if n_samples == 0 || thin == 0 {
        return Err(Error::InvalidInput("need n_samples >= 1 and thin >= 1".into()));
    }
    let n = inst.n;
    let nb = inst.neighbours();
    let mut rng = rng_for(seed, 3);
    let mut s: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    let sweep = |s: &mut Vec<f64>, rng: &mut ChaCha8Rng| {
        for i in 0..n {
            let x = inst.fields[i] + nb[i].iter().map(|&(j, w)| w * s[j]).sum::<f64>();
            s[i] = if rng.gen::<f64>() < heat_bath_up_probability(x) { 1.0 } else { -1.0 };
        }
    };
    for _ in 0..burn_in {
        sweep(&mut s, &mut rng);
    }
    let mut kept: Vec<Vec<bool>> = Vec::with_capacity(n_samples);
    while kept.len() < n_samples {
        for _ in 0..thin {
            sweep(&mut s, &mut rng);
        }
        kept.push(s.iter().map(|&v| v > 0.0).collect());
    }
    SampleMatrix::from_fn(n_samples, n, |r, c| kept[r][c])
}

/// Independent draws from the exactly enumerated distribution (`n ≤ 20`).
pub fn exact_sample_small(inst: &IsingInstance, n_samples: usize, seed: u64) -> Result<SampleMatrix> {
    let n = inst.n;
    if n == 0 || n > MAX_EXACT_NODES {
        return Err(Error::InvalidInput(format!(
            "exact sampling supports 1..={MAX_EXACT_NODES} nodes, got {n}"
        )));
    }
    let states = 1usize << n;
    let spin = |x: usize, i: usize| if x >> i & 1 == 1 { 1.0 } else { -1.0 };
    let energies: Vec<f64> = (0..states)
        .map(|x| {
            let h: f64 = (0..n).map(|i| inst.fields[i] * spin(x, i)).sum();
            let j: f64 = inst.edges.iter().map(|e| e.weight * spin(x, e.i) * spin(x, e.j)).sum();
            h + j
        })
        .collect();
    let top = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cdf = Vec::with_capacity(states);
    let mut acc = 0.0;
    for e in &energies {
        acc += (e - top).exp();
        cdf.push(acc);
    }
    let mut rng = rng_for(seed, 4);
    let draws: Vec<usize> = (0..n_samples)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(states - 1)
        })
        .collect();
    SampleMatrix::from_fn(n_samples, n, |r, c| draws[r] >> c & 1 == 1)
}

/// Keeps only the `visible` columns, in the given order.
pub fn hide_nodes(data: &SampleMatrix, visible: &[usize]) -> Result<SampleMatrix> {
    if visible.is_empty() {
        return Err(Error::InvalidInput("at least one node must stay visible".into()));
    }
    data.select_columns(visible)
}

/// `k` distinct nodes out of `n`, sorted, chosen uniformly.
pub fn random_visible(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot keep {k} of {n} nodes")));
    }
    let mut rng = rng_for(seed, 5);
    let mut v = rand::seq::index::sample(&mut rng, n, k).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// Edges of `truth` among `visible` nodes, relabelled to column positions.
pub fn induced_edges(truth: &[Edge], visible: &[usize]) -> Vec<Edge> {
    let mut pos = std::collections::HashMap::new();
    for (p, &v) in visible.iter().enumerate() {
        pos.insert(v, p);
    }
    let mut out: Vec<Edge> = truth
        .iter()
        .filter_map(|&(i, j)| match (pos.get(&i), pos.get(&j)) {
            (Some(&a), Some(&b)) => Some((a.min(b), a.max(b))),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degrees(n: usize, e: &[Edge]) -> Vec<usize> {
        let mut d = vec![0; n];
        for &(i, j) in e {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    #[test]
    fn topology_edge_counts() {
        let d = generate_topology(&TopologySpec::Dimers { n: 64 }, 3).unwrap();
        assert_eq!(d.len(), 32);
        assert!(degrees(64, &d).iter().all(|&k| k == 1));
        let s = generate_topology(&TopologySpec::Star { n: 64 }, 3).unwrap();
        assert_eq!(s.len(), 63);
        assert_eq!(*degrees(64, &s).iter().max().unwrap(), 63);
        let g = generate_topology(&TopologySpec::Grid2d { side: 8 }, 0).unwrap();
        assert_eq!(g.len(), 2 * 8 * 7);
        assert!(generate_topology(&TopologySpec::Dimers { n: 7 }, 0).is_err());
        assert!(generate_topology(&TopologySpec::ErdosRenyi { n: 5, c: 9.0 }, 0).is_err());
    }

    #[test]
    fn topology_is_seed_deterministic() {
        let spec = TopologySpec::ErdosRenyi { n: 40, c: 3.0 };
        assert_eq!(generate_topology(&spec, 11).unwrap(), generate_topology(&spec, 11).unwrap());
        assert_ne!(generate_topology(&spec, 11).unwrap(), generate_topology(&spec, 12).unwrap());
        let diluted = generate_topology(&TopologySpec::DilutedGrid { side: 10, p: DEFAULT_DILUTION }, 1).unwrap();
        assert!(diluted.len() < 180 && diluted.len() > 90);
    }

    #[test]
    fn couplings() {
        let e = [(0, 1), (1, 2), (0, 2)];
        let f = assign_couplings(3, &e, CouplingMode::Ferromagnetic { beta: 0.5 }, TopologyTag::Custom, 0).unwrap();
        assert!(f.edges.iter().all(|w| w.weight == 0.5));
        let many: Vec<Edge> = (0..1000).map(|k| (k, k + 1)).collect();
        let b = assign_couplings(1001, &many, CouplingMode::Bimodal { beta: 1.5 }, TopologyTag::Custom, 7).unwrap();
        let plus = b.edges.iter().filter(|w| w.weight == 1.5).count() as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&plus));
        assert!(b.edges.iter().all(|w| w.weight.abs() == 1.5));
        let with = f.clone().with_fields(vec![0.1, -0.2, 0.3]).unwrap();
        assert_eq!(with.fields, vec![0.1, -0.2, 0.3]);
        assert!(f.with_fields(vec![0.0]).is_err());
        assert!(assign_couplings(3, &e, CouplingMode::Bimodal { beta: 0.0 }, TopologyTag::Custom, 0).is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = generate_instance(&TopologySpec::ErdosRenyi { n: 12, c: 2.0 }, CouplingMode::Bimodal { beta: 0.5 }, 9).unwrap();
        let back = IsingInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn heat_bath_conditional() {
        // two spins, J = 0.7, h = (0.2, -0.1): conditional of S1 given S2 = -1
        let (j, h1) = (0.7f64, 0.2f64);
        let up = (h1 - j).exp();
        let down = (-h1 + j).exp();
        assert!((heat_bath_up_probability(h1 + j * -1.0) - up / (up + down)).abs() < 1e-15);
    }

    #[test]
    fn sampler_determinism_and_free_spins() {
        let inst = assign_couplings(5, &[], CouplingMode::Ferromagnetic { beta: 1.0 }, TopologyTag::Custom, 0).unwrap();
        let a = gibbs_sample(&inst, 400, 10, 1, 5).unwrap();
        assert_eq!(a, gibbs_sample(&inst, 400, 10, 1, 5).unwrap());
        for j in 0..5 {
            assert!(a.magnetization(j).abs() < 4.0 / 20.0);
        }
    }

    #[test]
    fn exact_sampler_small_cases() {
        let coin = assign_couplings(1, &[], CouplingMode::Ferromagnetic { beta: 1.0 }, TopologyTag::Custom, 0).unwrap();
        let d = exact_sample_small(&coin, 10_000, 1).unwrap();
        assert!(d.magnetization(0).abs() < 0.04);
        let pair = assign_couplings(2, &[(0, 1)], CouplingMode::Ferromagnetic { beta: 1.0 }, TopologyTag::Custom, 0).unwrap();
        let d = exact_sample_small(&pair, 20_000, 2).unwrap();
        let s = d.pair_counts(0, 1);
        let agree = (s.n_pp + s.n_mm) as f64 / 20_000.0;
        let want = 1f64.exp() / (1f64.exp() + (-1f64).exp());
        assert!((agree - want).abs() < 4.0 * (want * (1.0 - want) / 20_000.0).sqrt());
        let big = assign_couplings(21, &[], CouplingMode::Ferromagnetic { beta: 1.0 }, TopologyTag::Custom, 0).unwrap();
        assert!(exact_sample_small(&big, 1, 0).is_err());
    }

    #[test]
    fn hiding_nodes() {
        let d = SampleMatrix::from_fn(30, 6, |r, c| (r * c) % 4 == 1).unwrap();
        assert_eq!(hide_nodes(&d, &[0, 1, 2, 3, 4, 5]).unwrap(), d);
        assert_eq!(hide_nodes(&d, &[4, 1]).unwrap().n_nodes(), 2);
        assert!(hide_nodes(&d, &[]).is_err());
        let v = random_visible(250, 64, 3).unwrap();
        assert_eq!(v.len(), 64);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(induced_edges(&[(0, 3), (3, 5), (1, 2)], &[3, 5, 7]), vec![(0, 1)]);
    }
}
