//! Log-space quadrature for log-concave integrands in up to three
//! dimensions.
//!
//! Each axis is integrated by locating the maximum of the (log) integrand
//! along the line, then laying Gauss–Legendre panels outward on both sides
//! until the integrand has fallen by `cutoff` nats below the peak. Inner
//! integrals are nested, so the outer integrand is itself the log of an
//! inner integral. Panel sums are accumulated with log-sum-exp, so the
//! result never overflows.

use serde::{Deserialize, Serialize};

use crate::scalar::log_sum_exp;

/// Settings of [`integrate_log`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per panel.
    pub nodes_per_panel: usize,
    /// Stop walking outward once the log integrand is this far below the
    /// line maximum.
    pub cutoff: f64,
    /// Target decrease of the log integrand across one panel.
    pub panel_drop: f64,
    /// Integration box `[−half_width, half_width]` on every axis.
    pub half_width: f64,
    /// When set, [`crate::evidence::exact_log_evidence`] repeats the
    /// computation with twice the nodes and fails if the per-sample values
    /// differ by more than this.
    pub verify_tol: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_per_panel: 6,
            cutoff: 25.0,
            panel_drop: 8.0,
            half_width: 60.0,
            verify_tol: None,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "at least one node");
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_k and its derivative
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = kf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[k - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[k - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Clone, Copy)]
struct LineState {
    peak: f64,
    scale: f64,
}

struct Integrator<'a> {
    f: &'a dyn Fn(&[f64]) -> f64,
    dim: usize,
    spec: QuadratureSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    x: [f64; 3],
    state: [LineState; 3],
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

impl Integrator<'_> {
    fn eval(&mut self, level: usize, t: f64) -> f64 {
        self.x[level] = t;
        let v = if level + 1 == self.dim {
            (self.f)(&self.x[..self.dim])
        } else {
            self.line(level + 1)
        };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Locates the maximum along one axis, returns `(x, g(x), scale)`.
    fn find_peak(&mut self, level: usize) -> (f64, f64, f64) {
        let (lo, hi) = (-self.spec.half_width, self.spec.half_width);
        let st = self.state[level];
        let mut s = if st.scale.is_finite() && st.scale > 0.0 {
            st.scale
        } else {
            1.0
        };
        let mut b = st.peak.clamp(lo, hi);
        let mut gb = self.eval(level, b);
        let mut a = (b - s).max(lo);
        let mut ga = self.eval(level, a);
        let mut c = (b + s).min(hi);
        let mut gc = self.eval(level, c);
        // walk uphill until bracketed or a wall is hit
        let mut guard = 0;
        while ga > gb && a > lo && guard < 200 {
            c = b;
            gc = gb;
            b = a;
            gb = ga;
            s *= 2.0;
            a = (b - s).max(lo);
            ga = self.eval(level, a);
            guard += 1;
        }
        while gc > gb && c < hi && guard < 200 {
            a = b;
            ga = gb;
            b = c;
            gb = gc;
            s *= 2.0;
            c = (b + s).min(hi);
            gc = self.eval(level, c);
            guard += 1;
        }
        if ga > gb {
            return (a, ga, (b - a).max(1e-12));
        }
        if gc > gb {
            return (c, gc, (c - b).max(1e-12));
        }
        // golden section until the bracket ends are within a small log
        // distance of the best point
        for _ in 0..200 {
            if (gb - ga).max(gb - gc) < 0.02 || c - a < 1e-12 {
                break;
            }
            let left = b - a > c - b;
            let t = if left { b - GOLDEN * (b - a) } else { b + GOLDEN * (c - b) };
            let gt = self.eval(level, t);
            if gt >= gb {
                if left {
                    c = b;
                    gc = gb;
                } else {
                    a = b;
                    ga = gb;
                }
                b = t;
                gb = gt;
            } else if left {
                a = t;
                ga = gt;
            } else {
                c = t;
                gc = gt;
            }
        }
        let curv = 2.0 * ((gc - gb) / (c - b) - (gb - ga) / (b - a)) / (c - a);
        let scale = if curv < 0.0 && curv.is_finite() {
            (-1.0 / curv).sqrt()
        } else {
            (c - a).max(1e-6)
        };
        (b, gb, scale)
    }

    fn panel(&mut self, level: usize, from: f64, to: f64, out: &mut Vec<f64>) {
        let mid = 0.5 * (from + to);
        let half = 0.5 * (to - from).abs();
        if half == 0.0 {
            return;
        }
        let ln_half = half.ln();
        for q in 0..self.nodes.len() {
            let t = mid + half * self.nodes[q];
            let w = self.weights[q];
            let g = self.eval(level, t);
            out.push(g + w.ln() + ln_half);
        }
    }

    fn walk(&mut self, level: usize, peak: f64, gpeak: f64, scale: f64, dir: f64, out: &mut Vec<f64>) {
        let bound = dir * self.spec.half_width;
        let drop = self.spec.panel_drop;
        let mut e = peak;
        let mut ge = gpeak;
        let mut w = scale;
        let mut panels = 0;
        while (bound - e) * dir > 0.0 && panels < 10_000 {
            let mut next = if dir > 0.0 { (e + w).min(bound) } else { (e - w).max(bound) };
            let mut gn = self.eval(level, next);
            let mut shrink = 0;
            while ge - gn > 2.0 * drop && shrink < 40 {
                w *= 0.5;
                next = e + dir * w;
                gn = self.eval(level, next);
                shrink += 1;
            }
            self.panel(level, e, next, out);
            panels += 1;
            if gn < gpeak - self.spec.cutoff {
                break;
            }
            if ge - gn < 0.5 * drop {
                w *= 2.0;
            }
            e = next;
            ge = gn;
        }
    }

    fn line(&mut self, level: usize) -> f64 {
        let (peak, gpeak, scale) = self.find_peak(level);
        if gpeak == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut terms = Vec::with_capacity(8 * self.nodes.len());
        self.walk(level, peak, gpeak, scale, 1.0, &mut terms);
        self.walk(level, peak, gpeak, scale, -1.0, &mut terms);
        self.state[level] = LineState { peak, scale };
        log_sum_exp(&terms)
    }
}

/// `ln ∫ exp(f(x)) dx` over `[−L, L]^dim` for a log-concave `f`.
///
/// `scale_hint` is an initial guess for the width of the peak.
pub fn integrate_log(f: &dyn Fn(&[f64]) -> f64, dim: usize, spec: &QuadratureSpec, scale_hint: f64) -> f64 {
    assert!((1..=3).contains(&dim), "dimension 1..=3");
    let (nodes, weights) = gauss_legendre(spec.nodes_per_panel);
    let mut it = Integrator {
        f,
        dim,
        spec: *spec,
        nodes,
        weights,
        x: [0.0; 3],
        state: [LineState {
            peak: 0.0,
            scale: scale_hint,
        }; 3],
    };
    it.line(0)
}
