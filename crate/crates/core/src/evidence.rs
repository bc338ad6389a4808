//! Saddle-point evidence of a spin pair under each of the ten models.
//!
//! For a model with parameters θ the per-sample log evidence is
//!
//! ```text
//! (1/N) ln P(Ŝ|M) ≈ φ·θ* − ln Z(θ*) + (Θ/2N) ln[2π / (N (1 + δ/N))] − (1/N) ln 𝒩
//! ```
//!
//! where θ* solves `φ − (1 + δ/N) ∇ln Z(θ) + ∇ε/N = 0`.
//! [`exact_log_evidence`] evaluates the un-approximated integral by
//! quadrature and serves as a reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_zoo::{
    fisher_logdet_given_lnz, fisher_matrix, grad_log_partition, log_partition, ModelId,
    ThetaVector, STATES,
};
use crate::quadrature::{integrate_log, QuadratureSpec};
use crate::scalar::Real;

/// Integer counts of the four joint states of a spin pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairStats {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
}

impl PairStats {
    pub fn new(n_pp: u64, n_pm: u64, n_mp: u64, n_mm: u64) -> Result<Self> {
        let s = PairStats {
            n_pp,
            n_pm,
            n_mp,
            n_mm,
        };
        if s.n() == 0 {
            return Err(Error::InvalidStats("pair statistics need N >= 1".into()));
        }
        Ok(s)
    }

    /// Counts in the order (+,+), (+,−), (−,+), (−,−).
    pub fn counts(&self) -> [u64; 4] {
        [self.n_pp, self.n_pm, self.n_mp, self.n_mm]
    }

    pub fn n(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    pub fn m1<T: Real>(&self) -> T {
        self.signed(1, 1, -1, -1)
    }

    pub fn m2<T: Real>(&self) -> T {
        self.signed(1, -1, 1, -1)
    }

    pub fn c12<T: Real>(&self) -> T {
        self.signed(1, -1, -1, 1)
    }

    fn signed<T: Real>(&self, a: i64, b: i64, c: i64, d: i64) -> T {
        let num = a * self.n_pp as i64 + b * self.n_pm as i64 + c * self.n_mp as i64 + d * self.n_mm as i64;
        T::lit(num as f64) / T::lit(self.n() as f64)
    }

    pub fn moments<T: Real>(&self) -> Moments<T> {
        Moments {
            m1: self.m1(),
            m2: self.m2(),
            c12: self.c12(),
            n: T::lit(self.n() as f64),
        }
    }
}

/// Real-valued pair statistics `(m1, m2, c12)` with sample size `N`.
///
/// Counts always give achievable moments; this type also admits arbitrary
/// points of the tetrahedron, which the evidence formulas accept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments<T> {
    pub m1: T,
    pub m2: T,
    pub c12: T,
    pub n: T,
}

impl<T: Real> Moments<T> {
    pub fn new(m1: T, m2: T, c12: T, n: usize) -> Self {
        Moments {
            m1,
            m2,
            c12,
            n: T::count(n),
        }
    }

    /// True when the point lies in the closed tetrahedron
    /// `−1 + |m1 + m2| ≤ c12 ≤ 1 − |m1 − m2|`, up to a few ulps.
    pub fn is_physical(&self) -> bool {
        let tol = T::lit(8.0) * T::epsilon();
        let lo = -T::one() + (self.m1 + self.m2).abs();
        let hi = T::one() - (self.m1 - self.m2).abs();
        lo - tol <= self.c12 && self.c12 <= hi + tol
    }

    /// The same point with the two spins exchanged.
    pub fn swapped(&self) -> Self {
        Moments {
            m1: self.m2,
            m2: self.m1,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = self.m1.is_finite() && self.m2.is_finite() && self.c12.is_finite();
        if !finite || !(self.n >= T::one()) || !self.n.is_finite() {
            return Err(Error::InvalidStats(format!(
                "moments ({}, {}, {}) with N = {}",
                self.m1, self.m2, self.c12, self.n
            )));
        }
        Ok(())
    }
}

/// `B = 1 + δ/N`.
fn inflation<T: Real>(model: ModelId, n: T) -> T {
    T::one() + model.spec().delta::<T>() / n
}

/// Left-hand side of the saddle-point equations,
/// `φ − B ∇ln Z(θ) + ∇ε/N`.
pub fn saddle_residual<T: Real>(
    model: ModelId,
    moments: &Moments<T>,
    theta: &ThetaVector<T>,
) -> Result<ThetaVector<T>> {
    let spec = model.spec();
    let b = inflation(model, moments.n);
    let phi = spec.phi(moments.m1, moments.m2, moments.c12);
    let grad = grad_log_partition(model, theta)?;
    let de = spec.epsilon_gradient::<T>();
    Ok(ThetaVector::from_fn(spec.theta_dim(), |k| {
        phi[k] - b * grad[k] + de[k] / moments.n
    }))
}

/// Maximum number of Newton iterations for the coupled models.
pub const NEWTON_MAX_ITER: usize = 200;

/// Solves the saddle-point equations of `model` at `moments`.
///
/// Separable models use `atanh(φ/B)` directly. Models 9 and 10 run a damped
/// Newton iteration from the origin with a step-halving line search.
pub fn saddle_point<T: Real>(model: ModelId, moments: &Moments<T>) -> Result<ThetaVector<T>> {
    moments.validate()?;
    let b = inflation(model, moments.n);
    let at = |x: T| (x / b).atanh();
    let Moments { m1, m2, c12, .. } = *moments;
    let theta = match model.index() {
        1 => ThetaVector::zeros(0),
        2 => ThetaVector::new(&[at(m1)]),
        3 => ThetaVector::new(&[at(m2)]),
        4 => ThetaVector::new(&[at((m1 + m2) * T::lit(0.5))]),
        5 => ThetaVector::new(&[at(m1), at(m2)]),
        6 => ThetaVector::new(&[at(c12)]),
        7 => ThetaVector::new(&[at(m1), at(c12)]),
        8 => ThetaVector::new(&[at(m2), at(c12)]),
        _ => return newton(model, moments, b),
    };
    if !theta.is_finite() {
        return Err(Error::SaddleNotConverged {
            model,
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok(theta)
}

fn norm<T: Real>(v: &ThetaVector<T>) -> T {
    v.max_abs()
}

fn newton<T: Real>(model: ModelId, moments: &Moments<T>, b: T) -> Result<ThetaVector<T>> {
    let dim = model.spec().theta_dim();
    let tol = T::newton_tol();
    let mut theta = ThetaVector::zeros(dim);
    let mut r = saddle_residual(model, moments, &theta)?;
    let mut rn = norm(&r);
    for iter in 0..NEWTON_MAX_ITER {
        if rn < tol {
            return Ok(theta);
        }
        // Jacobian of the residual is −B·F
        let f = fisher_matrix(model, &theta)?;
        let step = match solve(&f, &r, dim) {
            Some(s) => ThetaVector::from_fn(dim, |k| s[k] / b),
            None => break,
        };
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let trial = ThetaVector::from_fn(dim, |k| theta[k] + lambda * step[k]);
            if trial.is_finite() {
                let tr = saddle_residual(model, moments, &trial)?;
                let tn = norm(&tr);
                if tn < rn {
                    theta = trial;
                    r = tr;
                    rn = tn;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        if !accepted {
            return Err(Error::SaddleNotConverged {
                model,
                iterations: iter + 1,
                residual: rn.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    if rn < tol {
        return Ok(theta);
    }
    Err(Error::SaddleNotConverged {
        model,
        iterations: NEWTON_MAX_ITER,
        residual: rn.to_f64().unwrap_or(f64::NAN),
    })
}

/// Gaussian elimination with partial pivoting on the leading `dim × dim`
/// block.
fn solve<T: Real>(a: &[[T; 3]; 3], rhs: &ThetaVector<T>, dim: usize) -> Option<[T; 3]> {
    let mut m = *a;
    let mut x = [T::zero(); 3];
    for (k, slot) in x.iter_mut().enumerate().take(dim) {
        *slot = rhs[k];
    }
    for col in 0..dim {
        let piv = (col..dim).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(m[piv][col].abs() > T::zero()) {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..dim {
            let factor = m[row][col] / m[col][col];
            for c in col..dim {
                m[row][c] = m[row][c] - factor * m[col][c];
            }
            x[row] = x[row] - factor * x[col];
        }
    }
    for col in (0..dim).rev() {
        let mut s = x[col];
        for c in col + 1..dim {
            s = s - m[col][c] * x[c];
        }
        x[col] = s / m[col][col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Per-sample log evidence at a known saddle point.
pub fn log_evidence_at<T: Real>(
    model: ModelId,
    moments: &Moments<T>,
    theta: &ThetaVector<T>,
) -> Result<T> {
    let spec = model.spec();
    let n = moments.n;
    let phi = spec.phi(moments.m1, moments.m2, moments.c12);
    let fit = phi.dot(theta) - log_partition(model, theta)?;
    let dim = T::count(spec.theta_dim());
    let b = inflation(model, n);
    let two_pi = T::lit(2.0) * T::PI();
    let penalty = dim / (T::lit(2.0) * n) * (two_pi / (n * b)).ln() - T::lit(spec.norm).ln() / n;
    Ok(fit + penalty)
}

/// Per-sample saddle-point log evidence `(1/N) ln P(Ŝ|M)`.
pub fn log_evidence<T: Real>(model: ModelId, moments: &Moments<T>) -> Result<T> {
    let theta = saddle_point(model, moments)?;
    log_evidence_at(model, moments, &theta)
}

/// Evidence of all ten models at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceResult<T> {
    /// `(1/N) ln P(Ŝ|M_i)` indexed by [`ModelId::slot`]; NaN when the saddle
    /// failed.
    pub per_sample_log_evidence: [T; 10],
    pub saddle_points: [ThetaVector<T>; 10],
    pub converged: [bool; 10],
}

impl<T: Real> EvidenceResult<T> {
    pub fn get(&self, model: ModelId) -> T {
        self.per_sample_log_evidence[model.slot()]
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    /// The first model whose saddle point failed, if any.
    pub fn first_failure(&self) -> Option<ModelId> {
        ModelId::ALL.into_iter().find(|m| !self.converged[m.slot()])
    }
}

/// Computes all ten evidences. Failures are recorded in `converged`.
pub fn evidence_all<T: Real>(moments: &Moments<T>) -> EvidenceResult<T> {
    let mut out = EvidenceResult {
        per_sample_log_evidence: [T::nan(); 10],
        saddle_points: [ThetaVector::zeros(0); 10],
        converged: [false; 10],
    };
    for model in ModelId::ALL {
        let k = model.slot();
        let res = saddle_point(model, moments)
            .and_then(|th| log_evidence_at(model, moments, &th).map(|v| (th, v)));
        if let Ok((th, v)) = res {
            if v.is_finite() {
                out.per_sample_log_evidence[k] = v;
                out.saddle_points[k] = th;
                out.converged[k] = true;
            }
        }
    }
    out
}

/// Per-sample log of the evidence integral
/// `∫ dθ e^{N φ·θ} Z(θ)^{−N} √det F(θ) / 𝒩`, evaluated by nested
/// Gauss–Legendre quadrature. `ln Z` is obtained by summing the four spin
/// states directly.
pub fn exact_log_evidence(model: ModelId, moments: &Moments<f64>, grid: &QuadratureSpec) -> Result<f64> {
    moments.validate()?;
    let spec = model.spec();
    let n = moments.n;
    if spec.theta_dim() == 0 {
        return Ok(-(4f64.ln()));
    }
    let phi = spec.phi(moments.m1, moments.m2, moments.c12);
    let feats: Vec<[f64; 4]> = spec
        .params
        .iter()
        .map(|p| STATES.map(|(s1, s2)| p.feature(s1, s2)))
        .collect();
    let log_integrand = |x: &[f64]| -> f64 {
        let theta = ThetaVector::new(x);
        let mut e = [0.0; 4];
        for (s, slot) in e.iter_mut().enumerate() {
            *slot = feats.iter().zip(x).map(|(f, t)| f[s] * t).sum();
        }
        let lnz = crate::scalar::log_sum_exp(&e);
        let half_logdet = 0.5 * fisher_logdet_given_lnz(model, &theta, lnz);
        n * (phi.dot(&theta) - lnz) + half_logdet
    };
    let coarse = integrate_log(&log_integrand, spec.theta_dim(), grid, 1.0 / n.sqrt());
    let value = (coarse - spec.norm.ln()) / n;
    if let Some(tol) = grid.verify_tol {
        let fine_spec = QuadratureSpec {
            nodes_per_panel: grid.nodes_per_panel * 2,
            ..*grid
        };
        let fine = (integrate_log(&log_integrand, spec.theta_dim(), &fine_spec, 1.0 / n.sqrt())
            - spec.norm.ln())
            / n;
        if !((fine - value).abs() <= tol) {
            return Err(Error::QuadratureNotConverged {
                model,
                coarse: value,
                fine,
            });
        }
        return Ok(fine);
    }
    if !value.is_finite() {
        return Err(Error::QuadratureNotConverged {
            model,
            coarse: value,
            fine: f64::NAN,
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(k: u8) -> ModelId {
        ModelId::new(k).unwrap()
    }

    fn mo(m1: f64, m2: f64, c: f64, n: usize) -> Moments<f64> {
        Moments::new(m1, m2, c, n)
    }

    #[test]
    fn counts_to_moments() {
        let s = PairStats::new(25, 0, 0, 25).unwrap();
        assert_eq!(s.moments::<f64>(), mo(0.0, 0.0, 1.0, 50));
        let s = PairStats::new(1, 1, 0, 0).unwrap();
        assert_eq!((s.m1::<f64>(), s.m2::<f64>(), s.c12::<f64>()), (1.0, 0.0, 0.0));
        assert!(PairStats::new(0, 0, 0, 0).is_err());
    }

    #[test]
    fn symmetric_point_saddle_is_origin() {
        let th = saddle_point(m(10), &mo(0.0, 0.0, 0.0, 50)).unwrap();
        assert!(th.max_abs() < 1e-12);
    }

    #[test]
    fn separable_closed_form() {
        let th = saddle_point(m(2), &mo(0.5, 0.0, 0.0, 100)).unwrap();
        assert!((th[0] - (0.5f64 / 1.01).atanh()).abs() < 1e-15);
        assert!((th[0] - 0.5427).abs() < 1e-4);
        let r = saddle_residual(m(2), &mo(0.5, 0.0, 0.0, 100), &th).unwrap();
        assert!(r.max_abs() < 1e-12);
    }

    #[test]
    fn m1_evidence_is_minus_ln4() {
        for s in [mo(0.3, -0.1, 0.2, 10), mo(0.0, 0.0, 0.0, 5000)] {
            assert_eq!(log_evidence(m(1), &s).unwrap(), -(4f64.ln()));
        }
    }

    #[test]
    fn m6_pure_penalty() {
        let v = log_evidence(m(6), &mo(0.0, 0.0, 0.0, 50)).unwrap();
        let pi = std::f64::consts::PI;
        let want = -(4f64.ln()) + (2.0 * pi / (50.0 * 1.02 * pi * pi)).ln() / 100.0;
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn exchange_m7_m8() {
        let a = log_evidence(m(7), &mo(0.4, 0.0, 0.3, 200)).unwrap();
        let b = log_evidence(m(8), &mo(0.0, 0.4, 0.3, 200)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn boundary_stats_stay_finite() {
        let e = evidence_all(&mo(1.0, 1.0, 1.0, 20));
        assert!(e.all_converged(), "{e:?}");
        let e = evidence_all(&mo(1.0, -1.0, -1.0, 500));
        assert!(e.all_converged(), "{e:?}");
    }

    #[test]
    fn evidence_runs_in_f32() {
        let e = evidence_all(&Moments::<f32>::new(0.2, -0.1, 0.3, 100));
        assert!(e.all_converged());
        let d = evidence_all(&mo(0.2, -0.1, 0.3, 100));
        for k in 0..10 {
            assert!((e.per_sample_log_evidence[k] as f64 - d.per_sample_log_evidence[k]).abs() < 1e-4);
        }
    }

    #[test]
    fn linear_solver() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x = solve(&a, &ThetaVector::new(&[1.0, 2.0, 3.0]), 3).unwrap();
        for (row, want) in a.iter().zip([1.0, 2.0, 3.0]) {
            let got: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((got - want).abs() < 1e-14);
        }
    }

    /// Real-valued state counts `n_s = N (1 + s1 m1 + s2 m2 + s1 s2 c) / 4`.
    fn cell_counts(s: &Moments<f64>) -> [f64; 4] {
        STATES.map(|(a, b)| s.n * (1.0 + a * s.m1 + b * s.m2 + a * b * s.c12) / 4.0)
    }

    fn lg(x: f64) -> f64 {
        statrs::function::gamma::ln_gamma(x)
    }

    /// Exact evidence of the full model: a Dirichlet(½) integral.
    fn dirichlet_m10(s: &Moments<f64>) -> f64 {
        let n = cell_counts(s);
        (n.iter().map(|&k| lg(k + 0.5)).sum::<f64>() - lg(s.n + 2.0) + lg(2.0) - 4.0 * lg(0.5)) / s.n
    }

    /// Exact evidence of the shared-field model: three classes, the mixed
    /// one made of two equiprobable states.
    fn dirichlet_m9(s: &Moments<f64>) -> f64 {
        let [pp, pm, mp, mm] = cell_counts(s);
        let mix = pm + mp;
        (lg(pp + 0.5) + lg(mm + 0.5) + lg(mix + 0.5) - lg(s.n + 1.5) + lg(1.5) - 3.0 * lg(0.5)
            - mix * std::f64::consts::LN_2)
            / s.n
    }

    /// Exact evidence of the single-field model: a Beta(½, ½) integral.
    fn beta_m2(s: &Moments<f64>) -> f64 {
        let up = s.n * (1.0 + s.m1) / 2.0;
        let down = s.n - up;
        let ln_beta = lg(up + 0.5) + lg(down + 0.5) - lg(s.n + 1.0);
        -std::f64::consts::LN_2 + (ln_beta - std::f64::consts::PI.ln()) / s.n
    }

    #[test]
    fn quadrature_matches_closed_form_integrals() {
        let spec = QuadratureSpec::default();
        let pts = [
            mo(0.2, -0.1, 0.15, 50),
            mo(0.0, 0.0, 0.0, 50),
            mo(0.6, 0.4, 0.0, 500),
            mo(0.8, 0.8, 0.6, 500),
            mo(-0.4, 0.2, 0.4, 500),
        ];
        for s in &pts {
            let q10 = exact_log_evidence(m(10), s, &spec).unwrap();
            assert!((q10 - dirichlet_m10(s)).abs() < 1e-8, "{s:?} {q10} {}", dirichlet_m10(s));
            let q9 = exact_log_evidence(m(9), s, &spec).unwrap();
            assert!((q9 - dirichlet_m9(s)).abs() < 1e-8, "{s:?} {q9} {}", dirichlet_m9(s));
            let q2 = exact_log_evidence(m(2), s, &spec).unwrap();
            assert!((q2 - beta_m2(s)).abs() < 1e-8, "{s:?}");
        }
    }

    #[test]
    fn quadrature_verification_mode() {
        let spec = QuadratureSpec {
            verify_tol: Some(1e-10),
            ..QuadratureSpec::default()
        };
        let s = mo(0.1, 0.3, -0.2, 80);
        assert!(exact_log_evidence(m(7), &s, &spec).is_ok());
        assert_eq!(exact_log_evidence(m(1), &s, &spec).unwrap(), -(4f64.ln()));
    }

    #[test]
    fn bad_moments_rejected() {
        assert!(saddle_point(m(2), &mo(f64::NAN, 0.0, 0.0, 10)).is_err());
        let zero_n = Moments { m1: 0.0, m2: 0.0, c12: 0.0, n: 0.0 };
        assert!(log_evidence(m(3), &zero_n).is_err());
    }
}
