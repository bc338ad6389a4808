//! ℓ1-regularised pseudo-likelihood baseline.
//!
//! Node `i` is regressed on all other spins by minimising
//!
//! ```text
//! (1/N) Σ_μ ln[1 + exp(−2 S_i^μ (h_i + Σ_{j≠i} J_ij S_j^μ))] + λ Σ_{j≠i} |J_ij|
//! ```
//!
//! with a monotone accelerated proximal gradient method and backtracking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SampleMatrix;
use crate::error::{Error, Result};
use crate::synth::Edge;

/// Stop once an accepted step lowers the objective by less than this.
pub const PLM_TOL: f64 = 1e-9;
/// Iteration cap per node.
pub const PLM_MAX_ITER: usize = 5000;
/// Default regulariser as a fraction of λ_max.
pub const DEFAULT_LAMBDA_FRACTION: f64 = 0.5;

/// Node-wise regression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmFit {
    pub n_nodes: usize,
    /// Row-major `n × n`; row `i` holds the regression of node `i`.
    pub couplings: Vec<f64>,
    pub fields: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    /// Objective values of each node's accepted iterates.
    #[serde(skip)]
    pub objective_traces: Vec<Vec<f64>>,
}

impl PlmFit {
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n_nodes + j]
    }

    /// `Σ |J_ij|` over all off-diagonal entries.
    pub fn l1_norm(&self) -> f64 {
        self.couplings.iter().map(|x| x.abs()).sum()
    }
}

fn dense(data: &SampleMatrix) -> Vec<f64> {
    let (n, p) = (data.n_samples(), data.n_nodes());
    let mut x = vec![0.0; n * p];
    for r in 0..n {
        for c in 0..p {
            x[r * p + c] = data.get(r, c) as f64;
        }
    }
    x
}

/// Nodes whose column is constant; they are left out of λ_max.
pub fn constant_nodes(data: &SampleMatrix) -> Vec<usize> {
    (0..data.n_nodes())
        .filter(|&j| data.magnetization(j).abs() == 1.0)
        .collect()
}

/// Smallest λ at which zero couplings with optimal intercepts satisfy the
/// optimality conditions for every non-constant node:
/// `max_{i, j≠i} |(1/N) Σ_μ S_j^μ (S_i^μ − m_i)|`.
pub fn lambda_max(data: &SampleMatrix) -> f64 {
    let p = data.n_nodes();
    let n = data.n_samples() as f64;
    let m: Vec<f64> = (0..p).map(|j| data.magnetization(j)).collect();
    let mut best = 0.0f64;
    for i in 0..p {
        if m[i].abs() == 1.0 {
            continue;
        }
        for (j, &mj) in m.iter().enumerate() {
            if j == i {
                continue;
            }
            let s = data.pair_counts(i, j);
            let c = (s.n_pp as f64 + s.n_mm as f64 - s.n_pm as f64 - s.n_mp as f64) / n;
            best = best.max((c - m[i] * mj).abs());
        }
    }
    best
}

struct NodeProblem<'a> {
    x: &'a [f64],
    n: usize,
    p: usize,
    target: usize,
    lambda: f64,
}

impl NodeProblem<'_> {
    /// Smooth part and its gradient; `w[target]` is the intercept.
    fn loss_grad(&self, w: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (n, p, t) = (self.n, self.p, self.target);
        let mut loss = 0.0;
        let mut resid = vec![0.0; if grad.is_some() { n } else { 0 }];
        for r in 0..n {
            let row = &self.x[r * p..(r + 1) * p];
            let mut field = w[t];
            for (j, (&s, &wj)) in row.iter().zip(w).enumerate() {
                if j != t {
                    field += wj * s;
                }
            }
            let s_i = row[t];
            let z = -2.0 * s_i * field;
            // ln(1 + e^z) evaluated stably
            loss += if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            if !resid.is_empty() {
                resid[r] = s_i - field.tanh();
            }
        }
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (r, &e) in resid.iter().enumerate() {
                let row = &self.x[r * p..(r + 1) * p];
                for j in 0..p {
                    g[j] -= if j == t { e } else { e * row[j] };
                }
            }
            g.iter_mut().for_each(|v| *v /= n as f64);
        }
        loss / n as f64
    }

    fn penalty(&self, w: &[f64]) -> f64 {
        self.lambda * w.iter().enumerate().filter(|&(j, _)| j != self.target).map(|(_, v)| v.abs()).sum::<f64>()
    }

    fn prox(&self, v: &mut [f64], step: f64) {
        let thr = self.lambda * step;
        for (j, x) in v.iter_mut().enumerate() {
            if j != self.target {
                *x = x.signum() * (x.abs() - thr).max(0.0);
            }
        }
    }

    /// Returns the minimiser, whether it converged and the objective trace.
    fn solve(&self, init_field: f64) -> (Vec<f64>, bool, Vec<f64>) {
        let p = self.p;
        let mut x = vec![0.0; p];
        x[self.target] = init_field;
        let mut f_x = self.loss_grad(&x, None) + self.penalty(&x);
        let mut trace = vec![f_x];
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut lip = 1.0f64;
        let mut grad = vec![0.0; p];
        for _ in 0..PLM_MAX_ITER {
            let f_y = self.loss_grad(&y, Some(&mut grad));
            // backtracking on the quadratic upper bound
            let mut z;
            loop {
                z = y.iter().zip(&grad).map(|(a, g)| a - g / lip).collect::<Vec<f64>>();
                self.prox(&mut z, 1.0 / lip);
                let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
                let bound = f_y
                    + diff.iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>()
                    + 0.5 * lip * diff.iter().map(|d| d * d).sum::<f64>();
                if self.loss_grad(&z, None) <= bound + 1e-15 * bound.abs() || lip > 1e12 {
                    break;
                }
                lip *= 2.0;
            }
            let f_z = self.loss_grad(&z, None) + self.penalty(&z);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            if f_z <= f_x {
                let gain = f_x - f_z;
                let x_prev = std::mem::replace(&mut x, z);
                f_x = f_z;
                trace.push(f_x);
                if gain < PLM_TOL {
                    return (x, true, trace);
                }
                let mom = (t - 1.0) / t_next;
                y = x.iter().zip(&x_prev).map(|(a, b)| a + mom * (a - b)).collect();
                t = t_next;
            } else {
                // momentum overshot: restart from the current iterate
                y = x.clone();
                t = 1.0;
            }
            lip = (lip * 0.9).max(1e-6);
        }
        (x, false, trace)
    }
}

/// Fits every node at regulariser `lambda`.
pub fn plm_l1_fit(data: &SampleMatrix, lambda: f64) -> Result<PlmFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let p = data.n_nodes();
    if p < 2 {
        return Err(Error::InvalidInput("PLM needs at least two nodes".into()));
    }
    let x = dense(data);
    let n = data.n_samples();
    let rows: Vec<(Vec<f64>, bool, Vec<f64>)> = (0..p)
        .into_par_iter()
        .map(|i| {
            let m = data.magnetization(i).clamp(-1.0 + 1e-6, 1.0 - 1e-6);
            let prob = NodeProblem {
                x: &x,
                n,
                p,
                target: i,
                lambda,
            };
            prob.solve(m.atanh())
        })
        .collect();
    let mut couplings = vec![0.0; p * p];
    let mut fields = vec![0.0; p];
    let mut converged = true;
    let mut traces = Vec::with_capacity(p);
    for (i, (w, ok, tr)) in rows.into_iter().enumerate() {
        for j in 0..p {
            if j == i {
                fields[i] = w[j];
            } else {
                couplings[i * p + j] = w[j];
            }
        }
        converged &= ok;
        traces.push(tr);
    }
    Ok(PlmFit {
        n_nodes: p,
        couplings,
        fields,
        lambda,
        converged,
        objective_traces: traces,
    })
}

/// Edges where the symmetrised coupling `(J_ij + J_ji)/2` is non-zero.
pub fn plm_graph(fit: &PlmFit) -> Vec<Edge> {
    let p = fit.n_nodes;
    let mut out = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if 0.5 * (fit.coupling(i, j) + fit.coupling(j, i)) != 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}
