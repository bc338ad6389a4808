//! Bond / no-bond decision for a spin pair.
//!
//! The confidence `η = (P_b − P_nb)/(P_b + P_nb)` compares the summed
//! evidence of the five coupled models with that of the five uncoupled ones.
//! A prior odds ratio `ε = P0(b)/P0(nb)` shifts the decision threshold to
//! `(1 − ε)/(1 + ε)`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{log_evidence, Moments, PairStats};
use crate::model_zoo::ModelId;
use crate::scalar::{log_sum_exp, Real};

/// True iff `(m1, m2, c12)` lies in the closed physical tetrahedron.
pub fn physical<T: Real>(stats: &Moments<T>) -> bool {
    stats.is_physical()
}

/// Confidence in a bond for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence<T = f64> {
    /// `η ∈ [−1, 1]`.
    pub eta: T,
    /// `ln(P_b / P_nb)`, from which η and every prior-shifted gap follow.
    pub log_odds: T,
}

impl<T: Real> Confidence<T> {
    pub fn from_log_odds(log_odds: T) -> Self {
        Confidence {
            eta: (log_odds * T::lit(0.5)).tanh(),
            log_odds,
        }
    }

    /// `η̃ = P(b|Ŝ) − P(nb|Ŝ)` under the sparsity prior.
    pub fn posterior_gap(&self, prior: SparsityPrior) -> T {
        let ln_eps = T::lit(prior.epsilon()).ln();
        ((ln_eps + self.log_odds) * T::lit(0.5)).tanh()
    }

    /// `P(b|Ŝ) = (1 + η̃)/2`.
    pub fn bond_probability(&self, prior: SparsityPrior) -> T {
        (T::one() + self.posterior_gap(prior)) * T::lit(0.5)
    }
}

/// Prior odds `ε = P0(b)/P0(nb)` of a bond.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SparsityPrior {
    epsilon: f64,
}

impl SparsityPrior {
    pub const FLAT: SparsityPrior = SparsityPrior { epsilon: 1.0 };

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "sparsity prior must be finite and non-negative, got {epsilon}"
            )));
        }
        Ok(SparsityPrior { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `(1 − ε)/(1 + ε)`, written so that it is non-increasing in ε under
    /// rounding.
    pub fn threshold(&self) -> f64 {
        2.0 / (1.0 + self.epsilon) - 1.0
    }
}

impl Default for SparsityPrior {
    fn default() -> Self {
        SparsityPrior::FLAT
    }
}

/// Confidence of a bond between the two spins described by `stats`.
///
/// Evidences are combined as `ln Σ exp(N·ℓ_i)` with the maximum factored out,
/// so nothing overflows for any `N`.
pub fn confidence<T: Real>(stats: &Moments<T>) -> Result<Confidence<T>> {
    if !physical(stats) {
        return Err(Error::InvalidStats(format!(
            "({}, {}, {}) lies outside the physical region",
            stats.m1, stats.m2, stats.c12
        )));
    }
    let mut bond = [T::zero(); 5];
    let mut free = [T::zero(); 5];
    for model in ModelId::ALL {
        let v = log_evidence(model, stats)? * stats.n;
        let k = model.slot();
        if model.has_bond() {
            bond[k - 5] = v;
        } else {
            free[k] = v;
        }
    }
    // sorted, so any permutation of the models gives the same sums
    let by_value = |a: &T, b: &T| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
    bond.sort_by(by_value);
    free.sort_by(by_value);
    Ok(Confidence::from_log_odds(log_sum_exp(&bond) - log_sum_exp(&free)))
}

/// Confidence of pair counts, in `f64`.
pub fn confidence_of(stats: &PairStats) -> Result<Confidence> {
    confidence(&stats.moments::<f64>())
}

/// `η̃` for the pair under `prior`; its sign is that of `η − (1−ε)/(1+ε)`.
pub fn posterior_gap<T: Real>(stats: &Moments<T>, prior: SparsityPrior) -> Result<T> {
    Ok(confidence(stats)?.posterior_gap(prior))
}

/// Bond iff `η ≥ (1 − ε)/(1 + ε)`; ties count as bonds. A prior of
/// `ε = 0` gives zero prior mass to bonds and so never yields one.
pub fn decide<T: Real>(eta: T, prior: SparsityPrior) -> bool {
    prior.epsilon() > 0.0 && eta >= T::lit(prior.threshold())
}

type CountKey = (u64, u64, u64);

/// Memoised confidences for one sample size, keyed by integer counts.
#[derive(Debug)]
pub struct DecisionCache {
    sample_size: u64,
    map: RwLock<HashMap<CountKey, Confidence>>,
}

impl DecisionCache {
    pub fn new(sample_size: u64) -> Self {
        DecisionCache {
            sample_size,
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn sample_size(&self) -> u64 {
        self.sample_size
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Confidence of `stats`, computed on first use.
    pub fn confidence(&self, stats: &PairStats) -> Result<Confidence> {
        if stats.n() != self.sample_size {
            return Err(Error::SampleSizeMismatch {
                expected: self.sample_size as usize,
                got: stats.n() as usize,
            });
        }
        let key = (stats.n_pp, stats.n_pm, stats.n_mp);
        if let Some(c) = self.map.read().expect("cache lock").get(&key) {
            return Ok(*c);
        }
        let c = confidence_of(stats)?;
        self.map.write().expect("cache lock").insert(key, c);
        Ok(c)
    }

    /// Fills the cache with every count triple for this sample size.
    pub fn precompute(&self) -> Result<()> {
        let all: Vec<PairStats> = all_count_tuples(self.sample_size).collect();
        let computed = all
            .par_iter()
            .map(|s| confidence_of(s).map(|c| ((s.n_pp, s.n_pm, s.n_mp), c)))
            .collect::<Result<Vec<_>>>()?;
        self.map.write().expect("cache lock").extend(computed);
        Ok(())
    }
}

/// A [`DecisionCache`] per sample size, for callers that classify subsamples
/// of varying length.
#[derive(Debug, Default)]
pub struct CacheSet {
    caches: RwLock<HashMap<u64, Arc<DecisionCache>>>,
}

impl CacheSet {
    pub fn new() -> Self {
        CacheSet::default()
    }

    /// The cache for sample size `n`, created on first use.
    pub fn for_size(&self, n: u64) -> Arc<DecisionCache> {
        if let Some(c) = self.caches.read().expect("cache lock").get(&n) {
            return Arc::clone(c);
        }
        let mut w = self.caches.write().expect("cache lock");
        Arc::clone(w.entry(n).or_insert_with(|| Arc::new(DecisionCache::new(n))))
    }

    pub fn confidence(&self, stats: &PairStats) -> Result<Confidence> {
        self.for_size(stats.n()).confidence(stats)
    }
}

/// Every `(n_pp, n_pm, n_mp, n_mm)` summing to `n`, in lexicographic order.
pub fn all_count_tuples(n: u64) -> impl Iterator<Item = PairStats> {
    (0..=n).flat_map(move |a| {
        (0..=n - a).flat_map(move |b| {
            (0..=n - a - b).map(move |c| PairStats {
                n_pp: a,
                n_pm: b,
                n_mp: c,
                n_mm: n - a - b - c,
            })
        })
    })
}

/// One row of the decision table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub stats: PairStats,
    pub m1: f64,
    pub m2: f64,
    pub c12: f64,
    pub eta: f64,
}

/// The full classifier table for sample size `n`, `C(n+3, 3)` rows.
pub fn decision_table(n: u64) -> Result<Vec<TableRow>> {
    if n == 0 {
        return Err(Error::InvalidInput("decision table needs N >= 1".into()));
    }
    let all: Vec<PairStats> = all_count_tuples(n).collect();
    all.par_iter()
        .map(|s| {
            let c = confidence_of(s)?;
            Ok(TableRow {
                stats: *s,
                m1: s.m1(),
                m2: s.m2(),
                c12: s.c12(),
                eta: c.eta,
            })
        })
        .collect()
}

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the table as CSV with columns
/// `n_pp,n_pm,n_mp,n_mm,m1,m2,c12,eta`.
pub fn write_decision_table<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_pp", "n_pm", "n_mp", "n_mm", "m1", "m2", "c12", "eta"])?;
    for r in rows {
        let s = r.stats;
        w.write_record([
            s.n_pp.to_string(),
            s.n_pm.to_string(),
            s.n_mp.to_string(),
            s.n_mm.to_string(),
            fmt_f64(r.m1),
            fmt_f64(r.m2),
            fmt_f64(r.c12),
            fmt_f64(r.eta),
        ])?;
    }
    w.flush()?;
    Ok(())
}
