//! Confusion-matrix metrics for recovered graphs and ROC sweeps.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::{fmt_f64, CacheSet, SparsityPrior};
use crate::data::SampleMatrix;
use crate::error::{Error, Result};
use crate::plm::{lambda_max, plm_graph, plm_l1_fit};
use crate::recovery::{pair_confidences, ConfidenceGraph};
use crate::synth::Edge;

/// Counts over the `n(n−1)/2` pairs and the derived rates.
///
/// With no true edges TPR is reported as 1 and FNR as 0; with no true
/// non-edges TNR is 1 and FPR 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub fnr: f64,
}

fn normalise(e: &Edge) -> Edge {
    (e.0.min(e.1), e.0.max(e.1))
}

/// Compares `predicted` against `truth` on `n` nodes.
pub fn metrics(truth: &[Edge], predicted: &[Edge], n: usize) -> RecoveryMetrics {
    let t: HashSet<Edge> = truth.iter().map(normalise).collect();
    let p: HashSet<Edge> = predicted.iter().map(normalise).collect();
    let total = n * n.saturating_sub(1) / 2;
    let tp = t.intersection(&p).count();
    let fp = p.len() - tp;
    let fn_ = t.len() - tp;
    let tn = total - tp - fp - fn_;
    let rate = |a: usize, b: usize, empty: f64| if a + b == 0 { empty } else { a as f64 / (a + b) as f64 };
    RecoveryMetrics {
        tp,
        tn,
        fp,
        fn_,
        tpr: rate(tp, fn_, 1.0),
        fnr: rate(fn_, tp, 0.0),
        tnr: rate(tn, fp, 1.0),
        fpr: rate(fp, tn, 0.0),
    }
}

/// Parameter swept by [`roc_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    /// Pairwise confidences thresholded at each prior ε.
    MsOverEpsilon,
    /// PLM+ℓ1 refitted at each λ, given in units of λ_max.
    PlmOverLambda,
}

/// One metrics row per grid value.
pub fn roc_sweep(
    data: &SampleMatrix,
    truth: &[Edge],
    method: SweepMethod,
    grid: &[f64],
) -> Result<Vec<(f64, RecoveryMetrics)>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    let n = data.n_nodes();
    match method {
        SweepMethod::MsOverEpsilon => {
            let conf = pair_confidences(data, &CacheSet::new())?;
            let base = ConfidenceGraph::from_confidences(n, &conf, SparsityPrior::FLAT);
            grid.iter()
                .map(|&e| {
                    let g = base.with_prior(SparsityPrior::new(e)?);
                    Ok((e, metrics(truth, &g.edges(), n)))
                })
                .collect()
        }
        SweepMethod::PlmOverLambda => {
            let lm = lambda_max(data);
            grid.iter()
                .map(|&f| {
                    let fit = plm_l1_fit(data, f * lm)?;
                    Ok((f, metrics(truth, &plm_graph(&fit), n)))
                })
                .collect()
        }
    }
}

/// Writes `parameter,tpr,tnr,fpr,fnr` rows.
pub fn write_roc_csv<W: Write>(rows: &[(f64, RecoveryMetrics)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "tpr", "tnr", "fpr", "fnr"])?;
    for (p, m) in rows {
        w.write_record([fmt_f64(*p), fmt_f64(m.tpr), fmt_f64(m.tnr), fmt_f64(m.fpr), fmt_f64(m.fnr)])?;
    }
    w.flush()?;
    Ok(())
}
