//! The ten exponential-family models of a two-spin system.
//!
//! Each model keeps a subset of the parameters `(h1, h2, J)` (or a shared
//! field `h` acting on both spins). For every model the Fisher information
//! determinant is tied to the partition function by
//! `½ ln det F(θ) = −δ ln Z(θ) + ε(θ)` with `ε` at most linear in `J`, which
//! is what makes the saddle-point evidence closed form.
//!
//! Models 1–5 have no coupling, models 6–10 do.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ln_cosh, ln_one_plus_tanh_product, log_sum_exp, tanh_gap, Real};

/// Index of one of the ten two-spin models, `M1..=M10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelId(u8);

impl ModelId {
    pub const ALL: [ModelId; 10] = [
        ModelId(1),
        ModelId(2),
        ModelId(3),
        ModelId(4),
        ModelId(5),
        ModelId(6),
        ModelId(7),
        ModelId(8),
        ModelId(9),
        ModelId(10),
    ];

    pub fn new(index: u8) -> Option<ModelId> {
        (1..=10).contains(&index).then_some(ModelId(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Zero-based position in [`ModelId::ALL`].
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn has_bond(self) -> bool {
        self.0 >= 6
    }

    pub fn spec(self) -> &'static ModelSpec {
        &MODELS[self.slot()]
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

/// Which parameter a component of θ stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    /// Field on spin 1.
    H1,
    /// Field on spin 2.
    H2,
    /// Field shared by both spins.
    H,
    /// Coupling.
    J,
}

impl Param {
    /// Feature `f(s1, s2)` multiplying this parameter in the exponent.
    #[inline]
    pub fn feature(self, s1: f64, s2: f64) -> f64 {
        match self {
            Param::H1 => s1,
            Param::H2 => s2,
            Param::H => s1 + s2,
            Param::J => s1 * s2,
        }
    }

    /// Empirical average of the feature given `(m1, m2, c12)`.
    #[inline]
    pub fn statistic<T: Real>(self, m1: T, m2: T, c12: T) -> T {
        match self {
            Param::H1 => m1,
            Param::H2 => m2,
            Param::H => m1 + m2,
            Param::J => c12,
        }
    }
}

/// Static description of one model row.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub id: ModelId,
    /// Ordered parameters; `theta_dim() == params.len()`.
    pub params: &'static [Param],
    /// δ expressed in halves (δ = `delta_halves / 2`).
    pub delta_halves: u8,
    /// Constant part of ε(θ), in nats.
    pub eps_const: f64,
    /// Coefficient of `J` in ε(θ).
    pub eps_linear_in_j: f64,
    /// Jeffreys normalisation ∫ √det F dθ (1 for the parameterless model).
    pub norm: f64,
}

impl ModelSpec {
    pub fn theta_dim(&self) -> usize {
        self.params.len()
    }

    pub fn has_bond(&self) -> bool {
        self.id.has_bond()
    }

    pub fn delta<T: Real>(&self) -> T {
        T::lit(self.delta_halves as f64 * 0.5)
    }

    /// Position of the coupling in θ, if the model has one.
    pub fn coupling_index(&self) -> Option<usize> {
        self.params.iter().position(|&p| p == Param::J)
    }

    /// Sufficient statistics φ of this model.
    pub fn phi<T: Real>(&self, m1: T, m2: T, c12: T) -> ThetaVector<T> {
        ThetaVector::from_fn(self.theta_dim(), |k| self.params[k].statistic(m1, m2, c12))
    }

    /// ε(θ) = `eps_const + eps_linear_in_j · J`.
    pub fn epsilon<T: Real>(&self, theta: &ThetaVector<T>) -> T {
        let lin = match self.coupling_index() {
            Some(k) if self.eps_linear_in_j != 0.0 => T::lit(self.eps_linear_in_j) * theta[k],
            _ => T::zero(),
        };
        T::lit(self.eps_const) + lin
    }

    /// ∂ε/∂θ, constant in θ.
    pub fn epsilon_gradient<T: Real>(&self) -> ThetaVector<T> {
        ThetaVector::from_fn(self.theta_dim(), |k| {
            if self.params[k] == Param::J {
                T::lit(self.eps_linear_in_j)
            } else {
                T::zero()
            }
        })
    }

    fn check_dim<T>(&self, theta: &ThetaVector<T>) -> Result<()> {
        if theta.len != self.theta_dim() {
            return Err(Error::DimensionMismatch {
                model: self.id,
                expected: self.theta_dim(),
                got: theta.len,
            });
        }
        Ok(())
    }
}

const TWO_LN2: f64 = 2.0 * LN_2;

/// The ten model rows, `MODELS[k]` is `M(k+1)`.
pub static MODELS: [ModelSpec; 10] = [
    ModelSpec {
        id: ModelId(1),
        params: &[],
        delta_halves: 2,
        eps_const: TWO_LN2,
        eps_linear_in_j: 0.0,
        norm: 1.0,
    },
    ModelSpec {
        id: ModelId(2),
        params: &[Param::H1],
        delta_halves: 2,
        eps_const: TWO_LN2,
        eps_linear_in_j: 0.0,
        norm: PI,
    },
    ModelSpec {
        id: ModelId(3),
        params: &[Param::H2],
        delta_halves: 2,
        eps_const: TWO_LN2,
        eps_linear_in_j: 0.0,
        norm: PI,
    },
    ModelSpec {
        id: ModelId(4),
        params: &[Param::H],
        delta_halves: 1,
        eps_const: 1.5 * LN_2,
        eps_linear_in_j: 0.0,
        norm: SQRT_2 * PI,
    },
    ModelSpec {
        id: ModelId(5),
        params: &[Param::H1, Param::H2],
        delta_halves: 2,
        eps_const: TWO_LN2,
        eps_linear_in_j: 0.0,
        norm: PI * PI,
    },
    ModelSpec {
        id: ModelId(6),
        params: &[Param::J],
        delta_halves: 2,
        eps_const: TWO_LN2,
        eps_linear_in_j: 0.0,
        norm: PI,
    },
    ModelSpec {
        id: ModelId(7),
        params: &[Param::H1, Param::J],
        delta_halves: 2,
        eps_const: TWO_LN2,
        eps_linear_in_j: 0.0,
        norm: PI * PI,
    },
    ModelSpec {
        id: ModelId(8),
        params: &[Param::H2, Param::J],
        delta_halves: 2,
        eps_const: TWO_LN2,
        eps_linear_in_j: 0.0,
        norm: PI * PI,
    },
    ModelSpec {
        id: ModelId(9),
        params: &[Param::H, Param::J],
        delta_halves: 3,
        eps_const: 3.5 * LN_2,
        eps_linear_in_j: 0.5,
        norm: 2.0 * PI,
    },
    ModelSpec {
        id: ModelId(10),
        params: &[Param::H1, Param::H2, Param::J],
        delta_halves: 4,
        eps_const: 4.0 * LN_2,
        eps_linear_in_j: 0.0,
        norm: PI * PI,
    },
];

/// Parameter vector of length 0..=3, stored inline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThetaVector<T> {
    values: [T; 3],
    len: usize,
}

impl<T: Real> ThetaVector<T> {
    pub fn new(values: &[T]) -> Self {
        assert!(values.len() <= 3, "at most three parameters");
        let mut v = [T::zero(); 3];
        v[..values.len()].copy_from_slice(values);
        ThetaVector {
            values: v,
            len: values.len(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_fn(len, |_| T::zero())
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> T) -> Self {
        assert!(len <= 3, "at most three parameters");
        let mut v = [T::zero(); 3];
        for (k, slot) in v.iter_mut().enumerate().take(len) {
            *slot = f(k);
        }
        ThetaVector { values: v, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values[..self.len]
    }

    pub fn dot(&self, other: &Self) -> T {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn max_abs(&self) -> T {
        self.as_slice()
            .iter()
            .fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }
}

impl<T> std::ops::Index<usize> for ThetaVector<T> {
    type Output = T;
    fn index(&self, k: usize) -> &T {
        assert!(k < self.len, "index {k} out of range for length {}", self.len);
        &self.values[k]
    }
}

impl<T> std::ops::IndexMut<usize> for ThetaVector<T> {
    fn index_mut(&mut self, k: usize) -> &mut T {
        assert!(k < self.len, "index {k} out of range for length {}", self.len);
        &mut self.values[k]
    }
}

/// ln Z(θ) using the closed forms of the model table, evaluated stably.
pub fn log_partition<T: Real>(model: ModelId, theta: &ThetaVector<T>) -> Result<T> {
    let spec = model.spec();
    spec.check_dim(theta)?;
    let ln4 = T::lit(2.0 * LN_2);
    let t = theta.as_slice();
    let v = match model.0 {
        1 => ln4,
        2..=3 | 6 => ln4 + ln_cosh(t[0]),
        4 => ln4 + ln_cosh(t[0]) * T::lit(2.0),
        5 | 7 | 8 => ln4 + ln_cosh(t[0]) + ln_cosh(t[1]),
        // 4 cosh²h cosh J + 4 sinh²h sinh J
        9 => {
            let (h, j) = (t[0], t[1]);
            ln4 + ln_cosh(h) * T::lit(2.0) + ln_cosh(j) + ln_one_plus_tanh_product(&[h, h, j])
        }
        // 4 cosh h1 cosh h2 cosh J + 4 sinh h1 sinh h2 sinh J
        10 => {
            ln4 + ln_cosh(t[0])
                + ln_cosh(t[1])
                + ln_cosh(t[2])
                + ln_one_plus_tanh_product(&[t[0], t[1], t[2]])
        }
        _ => unreachable!(),
    };
    Ok(v)
}

/// ∇ ln Z(θ), the model averages of the features.
pub fn grad_log_partition<T: Real>(model: ModelId, theta: &ThetaVector<T>) -> Result<ThetaVector<T>> {
    let spec = model.spec();
    spec.check_dim(theta)?;
    let two = T::lit(2.0);
    let t = theta.as_slice();
    let g = match model.0 {
        1 => ThetaVector::zeros(0),
        2..=3 | 6 => ThetaVector::new(&[t[0].tanh()]),
        4 => ThetaVector::new(&[two * t[0].tanh()]),
        5 | 7 | 8 => ThetaVector::new(&[t[0].tanh(), t[1].tanh()]),
        9 => {
            let (h, j) = (t[0], t[1]);
            let (th, tj) = (h.tanh(), j.tanh());
            let d = ln_one_plus_tanh_product(&[h, h, j]).exp();
            let sech2_h = sech2(h);
            let sech2_j = sech2(j);
            ThetaVector::new(&[
                two * th + two * tj * th * sech2_h / d,
                tj + sech2_j * th * th / d,
            ])
        }
        10 => {
            let tt = [t[0].tanh(), t[1].tanh(), t[2].tanh()];
            let d = ln_one_plus_tanh_product(&[t[0], t[1], t[2]]).exp();
            ThetaVector::from_fn(3, |k| {
                let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                tt[k] + sech2(t[k]) * tt[a] * tt[b] / d
            })
        }
        _ => unreachable!(),
    };
    Ok(g)
}

/// `1 − tanh² x` without cancellation.
#[inline]
fn sech2<T: Real>(x: T) -> T {
    let u = tanh_gap(x);
    u * (T::lit(2.0) - u)
}

/// ln det F(θ) from the closed-form determinant column of the model table.
pub fn fisher_logdet<T: Real>(model: ModelId, theta: &ThetaVector<T>) -> Result<T> {
    let lnz = log_partition(model, theta)?;
    Ok(fisher_logdet_given_lnz(model, theta, lnz))
}

/// The determinant column written in terms of a supplied `ln Z`.
pub fn fisher_logdet_given_lnz<T: Real>(model: ModelId, theta: &ThetaVector<T>, lnz: T) -> T {
    let ln2 = T::LN_2();
    let ln4 = ln2 + ln2;
    match model.0 {
        1 => T::zero(),
        // (4/Z)²
        2 | 3 | 5 | 6 | 7 | 8 => T::lit(2.0) * (ln4 - lnz),
        // 8/Z
        4 => T::lit(3.0) * ln2 - lnz,
        // 2⁷ e^J / Z³
        9 => T::lit(7.0) * ln2 + theta[1] - T::lit(3.0) * lnz,
        // (4/Z)⁴
        10 => T::lit(4.0) * (ln4 - lnz),
        _ => unreachable!(),
    }
}

/// The four joint spin states in the order (+,+), (+,−), (−,+), (−,−).
pub const STATES: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Log-probabilities of the four joint states under `model` at θ.
pub fn state_log_probs<T: Real>(model: ModelId, theta: &ThetaVector<T>) -> Result<[T; 4]> {
    let spec = model.spec();
    spec.check_dim(theta)?;
    let mut e = [T::zero(); 4];
    for (slot, &(s1, s2)) in e.iter_mut().zip(STATES.iter()) {
        *slot = spec
            .params
            .iter()
            .zip(theta.as_slice())
            .fold(T::zero(), |acc, (p, &th)| acc + th * T::lit(p.feature(s1, s2)));
    }
    let lz = log_sum_exp(&e);
    Ok(e.map(|x| x - lz))
}

/// Fisher information matrix ∂²ln Z, computed as the feature covariance
/// under the model distribution. Only the leading `Θ × Θ` block is used.
pub fn fisher_matrix<T: Real>(model: ModelId, theta: &ThetaVector<T>) -> Result<[[T; 3]; 3]> {
    let spec = model.spec();
    let lp = state_log_probs(model, theta)?;
    let d = spec.theta_dim();
    let mut mean = [T::zero(); 3];
    let mut second = [[T::zero(); 3]; 3];
    for (&(s1, s2), &l) in STATES.iter().zip(lp.iter()) {
        let p = l.exp();
        for a in 0..d {
            let fa = T::lit(spec.params[a].feature(s1, s2));
            mean[a] = mean[a] + p * fa;
            for b in 0..d {
                let fb = T::lit(spec.params[b].feature(s1, s2));
                second[a][b] = second[a][b] + p * fa * fb;
            }
        }
    }
    let mut f = [[T::zero(); 3]; 3];
    for a in 0..d {
        for b in 0..d {
            f[a][b] = second[a][b] - mean[a] * mean[b];
        }
    }
    Ok(f)
}
