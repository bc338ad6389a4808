//! Windowed statistics of time-ordered samples.
//!
//! For a window of length `N_w` starting at `t`:
//!
//! ```text
//! m_i(t)      = (1/N_w) Σ_{t'=t}^{t+N_w−1} S_i(t')
//! C_ij(t)     = (1/N_w) Σ S_i(t') S_j(t') − m_i(t) m_j(t)
//! c_ij(t, τ)  = (1/N_w) Σ S_i(t') S_j(t' + τ)
//! ```
//!
//! The r.m.s. aggregates over `n` nodes are
//! `c_diag = sqrt((1/n) Σ_i c_ii²)` and
//! `c_off = sqrt((2/(n(n−1))) Σ_{i<j} c_ij²)`.

use serde::{Deserialize, Serialize};

use crate::data::SampleMatrix;
use crate::error::{Error, Result};

/// Window start positions `0, stride, 2·stride, …` with no partial window.
pub fn window_starts(n_samples: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidInput("window and stride must be >= 1".into()));
    }
    if window > n_samples {
        return Err(Error::InvalidInput(format!(
            "window {window} longer than the {n_samples} samples"
        )));
    }
    Ok((0..=n_samples - window).step_by(stride).collect())
}

/// `(c_diag, c_off)` of a row-major `n × n` matrix.
pub fn rms_aggregates(m: &[f64], n: usize) -> (f64, f64) {
    let diag = (0..n).map(|i| m[i * n + i].powi(2)).sum::<f64>() / n as f64;
    let off = if n > 1 {
        let s: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[i * n + j].powi(2)).sum();
        2.0 * s / (n as f64 * (n as f64 - 1.0))
    } else {
        0.0
    };
    (diag.sqrt(), off.sqrt())
}

/// Statistics of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub start: usize,
    /// Row-major `n × n` connected correlations `C_ij(t)`.
    pub connected: Vec<f64>,
    /// `(c_diag, c_off)` of `C(t)`.
    pub connected_rms: (f64, f64),
    /// One row-major `n × n` matrix `c(t, τ)` per requested lag.
    pub delayed: Vec<Vec<f64>>,
    /// `(c_diag, c_off)` of each `c(t, τ)`.
    pub delayed_rms: Vec<(f64, f64)>,
}

/// Windowed equal-time and delayed correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedStats {
    pub n_nodes: usize,
    pub window: usize,
    pub taus: Vec<usize>,
    pub windows: Vec<WindowStats>,
}

/// Computes [`WindowedStats`] on windows `0, stride, …` that leave room for
/// the largest lag.
pub fn windowed_correlations(data: &SampleMatrix, window: usize, taus: &[usize], stride: usize) -> Result<WindowedStats> {
    let max_tau = taus.iter().copied().max().unwrap_or(0);
    let n_samples = data.n_samples();
    if window == 0 || window + max_tau > n_samples {
        return Err(Error::InvalidInput(format!(
            "window {window} plus lag {max_tau} overruns {n_samples} samples"
        )));
    }
    let n = data.n_nodes();
    let x: Vec<Vec<f64>> = (0..n_samples).map(|r| data.row(r).iter().map(|&v| v as f64).collect()).collect();
    let starts = window_starts(n_samples - max_tau, window, stride)?;
    let nw = window as f64;
    let windows = starts
        .into_iter()
        .map(|t| {
            let rows = &x[t..t + window];
            let mean: Vec<f64> = (0..n).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / nw).collect();
            let mut connected = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let s = rows.iter().map(|r| r[i] * r[j]).sum::<f64>() / nw - mean[i] * mean[j];
                    connected[i * n + j] = s;
                    connected[j * n + i] = s;
                }
            }
            let delayed: Vec<Vec<f64>> = taus
                .iter()
                .map(|&tau| {
                    let mut c = vec![0.0; n * n];
                    for i in 0..n {
                        for j in 0..n {
                            c[i * n + j] = (t..t + window).map(|tp| x[tp][i] * x[tp + tau][j]).sum::<f64>() / nw;
                        }
                    }
                    c
                })
                .collect();
            WindowStats {
                start: t,
                connected_rms: rms_aggregates(&connected, n),
                delayed_rms: delayed.iter().map(|c| rms_aggregates(c, n)).collect(),
                connected,
                delayed,
            }
        })
        .collect();
    Ok(WindowedStats {
        n_nodes: n,
        window,
        taus: taus.to_vec(),
        windows,
    })
}
