//! Acceptance criteria A1 to A10. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; the process fails if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ising_select::classifier::{confidence, confidence_of, decide, CacheSet, SparsityPrior};
use ising_select::evidence::{
    exact_log_evidence, log_evidence, saddle_point, saddle_residual, Moments, PairStats,
};
use ising_select::model_zoo::ModelId;
use ising_select::pipeline::{
    run_recover, run_synthetic_benchmark, BenchmarkConfig, BenchmarkRow, Method, PriorMode, RecoveryConfig, Sampler,
};
use ising_select::quadrature::QuadratureSpec;
use ising_select::recovery::{correct_graph, recover, Correction};
use ising_select::synth::{
    exact_sample_small, generate_instance, generate_topology, gibbs_sample, CouplingMode, IsingInstance,
    TopologySpec, DEFAULT_BURN_IN, DEFAULT_THIN,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn seeds() -> Vec<u64> {
    (1..=20).collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn rows_for<'a>(rows: &'a [BenchmarkRow], method: &'a str, n: usize) -> impl Iterator<Item = &'a BenchmarkRow> {
    rows.iter().filter(move |r| r.method == method && r.n_samples == n)
}

fn gibbs() -> Sampler {
    Sampler::Gibbs {
        burn_in: DEFAULT_BURN_IN,
        thin: DEFAULT_THIN,
    }
}

fn method(s: &str) -> Method {
    s.parse().unwrap()
}

// ---------------------------------------------------------------- A1

fn a1() -> Outcome {
    let start = Instant::now();
    let axis: Vec<f64> = (0..9).map(|k| -0.8 + 0.2 * k as f64).collect();
    let mut points = Vec::new();
    for &m1 in &axis {
        for &m2 in &axis {
            for &c in &axis {
                let lo = -1.0 + (m1 + m2).abs();
                let hi = 1.0 - (m1 - m2).abs();
                if c >= lo - 1e-12 && c <= hi + 1e-12 {
                    points.push((m1, m2, c));
                }
            }
        }
    }
    let spec = QuadratureSpec::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [50usize, 500] {
        let bound = 10.0 / (n * n) as f64;
        let errs: Vec<(f64, f64, (f64, f64, f64), ModelId)> = points
            .par_iter()
            .flat_map_iter(|&(m1, m2, c)| {
                let mo = Moments::new(m1, m2, c, n);
                // smallest cell probability, 0 on the boundary of the tetrahedron
                let cells = [1.0 + m1 + m2 + c, 1.0 + m1 - m2 - c, 1.0 - m1 + m2 - c, 1.0 - m1 - m2 + c];
                let min_cell = cells.iter().fold(f64::INFINITY, |a, &b| a.min(b)) / 4.0;
                ModelId::ALL.into_iter().map(move |m| {
                    let lap = log_evidence(m, &mo).unwrap();
                    let ex = exact_log_evidence(m, &mo, &spec).unwrap();
                    ((lap - ex).abs(), min_cell, (m1, m2, c), m)
                })
            })
            .collect();
        let fails = errs.iter().filter(|e| e.0 > bound).count();
        let worst = errs.iter().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        let interior: Vec<_> = errs.iter().filter(|e| e.1 >= 0.05).collect();
        let int_fails = interior.iter().filter(|e| e.0 > bound).count();
        let int_worst = interior.iter().map(|e| e.0).fold(0.0, f64::max);
        pass &= fails == 0;
        lines.push(format!(
            "N={n}: bound {bound:.1e}, {} points x 10 models, worst {:.2e} at {:?} {}, {fails} violations; \
             cells >= 0.05: worst {int_worst:.2e}, {int_fails} violations",
            points.len(),
            worst.0,
            worst.2,
            worst.3
        ));
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(120);
    lines.push(format!("runtime {:.1}s", t.as_secs_f64()));
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- A2
// A direct transcription of the reference script, with its own
// root finders standing in for a generic nonlinear solver.

fn port_solve_1d(a: f64, b: f64) -> f64 {
    // a − B tanh(x) = 0 by bisection on tanh(x) = a/B
    let target = a / b;
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.tanh() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn port_fsolve(f: &dyn Fn(&[f64]) -> Vec<f64>, dim: usize) -> Vec<f64> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![0.0; dim];
    let mut fx = f(&x);
    for _ in 0..500 {
        if norm(&fx) < 1e-14 {
            break;
        }
        let h = 1e-7;
        let mut jac = vec![vec![0.0; dim]; dim];
        for c in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for r in 0..dim {
                jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let step = gauss(jac, fx.iter().map(|v| -v).collect());
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let ft = f(&trial);
            if norm(&ft) < norm(&fx) || t < 1e-12 {
                x = trial;
                fx = ft;
                break;
            }
            t *= 0.5;
        }
    }
    x
}

fn port_eta(m1: f64, m2: f64, c: f64, n: f64) -> f64 {
    use std::f64::consts::PI;
    let a = [PI, 2f64.sqrt() * PI, 2.0 * PI, PI * PI];
    let dlt = [1.0, 0.5, 1.5, 2.0];
    let lc = |x: f64| (2.0 * x.cosh()).ln();
    let mind = |a: f64, delta: f64| {
        let b = 1.0 + delta / n;
        let x = port_solve_1d(a, b);
        a * x - lc(x)
    };
    let fh1 = mind(m1, dlt[0]);
    let fh2 = mind(m2, dlt[0]);
    let fj = mind(c, dlt[0]);
    let fh = mind((m1 + m2) / 2.0, dlt[1]);

    let b2 = 1.0 + dlt[2] / n;
    let m2sys = |v: &[f64]| {
        let (t1, t2) = (v[0].tanh(), v[1].tanh());
        vec![
            m1 + m2 - 2.0 * b2 * t1 - 2.0 * b2 * (1.0 - t1 * t1) * t1 * t2 / (1.0 + t1 * t1 * t2),
            c + 1.0 / (2.0 * n) - b2 * t2 - b2 * ((1.0 - t2 * t2) * t1 * t1) / (1.0 + t1 * t1 * t2),
        ]
    };
    let x = port_fsolve(&m2sys, 2);
    let (h, j) = (x[0], x[1]);
    let phi = {
        let fh = h * (m1 + m2) - 2.0 * lc(h);
        let fj = j * c - lc(j);
        let sigma = (1.0 + j.tanh() * h.tanh().powi(2)) / 2.0;
        fh + fj - sigma.ln()
    };

    let b3 = 1.0 + dlt[3] / n;
    let m3sys = |v: &[f64]| {
        let (t1, t2, t3) = (v[0].tanh(), v[1].tanh(), v[2].tanh());
        let d = 1.0 + t1 * t2 * t3;
        vec![
            m1 - b3 * t1 - b3 * ((1.0 - t1 * t1) * t2 * t3) / d,
            m2 - b3 * t2 - b3 * ((1.0 - t2 * t2) * t1 * t3) / d,
            c - b3 * t3 - b3 * ((1.0 - t3 * t3) * t1 * t2) / d,
        ]
    };
    let x = port_fsolve(&m3sys, 3);
    let psi = {
        let f1 = x[0] * m1 - lc(x[0]);
        let f2 = x[1] * m2 - lc(x[1]);
        let f3 = x[2] * c - lc(x[2]);
        let sigma = (1.0 + x[0].tanh() * x[1].tanh() * x[2].tanh()) / 2.0;
        f1 + f2 + f3 - sigma.ln()
    };

    let l = |d: f64, p: f64| (2.0 * PI / (n * (1.0 + d / n) * p)).ln();
    let pm0 = -(4f64.ln());
    let pm1a = fh1 - 2f64.ln() + l(dlt[0], a[0] * a[0]) / (2.0 * n);
    let pm1b = fh2 - 2f64.ln() + l(dlt[0], a[0] * a[0]) / (2.0 * n);
    let pm1c = fj - 2f64.ln() + l(dlt[0], a[0] * a[0]) / (2.0 * n);
    let pm1d = 2.0 * fh + l(dlt[1], a[1] * a[1]) / (2.0 * n);
    let pm2a = fh1 + fh2 + l(dlt[0], a[3]) / n;
    let pm2b = fh1 + fj + l(dlt[0], a[3]) / n;
    let pm2c = fh2 + fj + l(dlt[0], a[3]) / n;
    let pm2d = phi + l(dlt[2], a[2]) / n;
    let pm3 = psi + 3.0 * l(dlt[3], a[3].powf(2.0 / 3.0)) / (2.0 * n);
    let log_pm = [pm0, pm1a, pm1b, pm1d, pm2a, pm1c, pm2b, pm2c, pm2d, pm3];
    // shift by the maximum before exponentiating
    let top = log_pm.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let pm: Vec<f64> = log_pm.iter().map(|v| (n * (v - top)).exp()).collect();
    let nb: f64 = pm[..5].iter().sum();
    let b: f64 = pm[5..].iter().sum();
    (b - nb) / (b + nb)
}

fn random_counts(rng: &mut ChaCha8Rng, n: u64) -> PairStats {
    let mut cuts = [rng.gen_range(0..=n), rng.gen_range(0..=n), rng.gen_range(0..=n)];
    cuts.sort_unstable();
    PairStats::new(cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1], n - cuts[2]).unwrap()
}

fn a2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut at = None;
    for n in [50u64, 200] {
        for _ in 0..100 {
            let s = random_counts(&mut rng, n);
            let lib = confidence_of(&s).unwrap().eta;
            let port = port_eta(s.m1(), s.m2(), s.c12(), n as f64);
            let d = (lib - port).abs();
            if !(d <= worst) {
                worst = d;
                at = Some(s.counts());
            }
        }
    }
    outcome(worst < 1e-6, format!("max |delta eta| = {worst:.2e} at counts {at:?} over 200 triples"))
}

// ---------------------------------------------------------------- A3

fn a3() -> Outcome {
    let start = Instant::now();
    let cfg = BenchmarkConfig {
        topology: TopologySpec::Dimers { n: 64 },
        coupling: CouplingMode::Bimodal { beta: 1.5 },
        sample_sizes: vec![2000],
        seeds: seeds(),
        methods: vec![method("ms:selfcon=1")],
        visible: None,
        sampler: gibbs(),
    };
    let rows = run_synthetic_benchmark(&cfg).unwrap();
    let tpr = mean(rows.iter().map(|r| r.metrics.tpr));
    let tnr = mean(rows.iter().map(|r| r.metrics.tnr));
    let t = start.elapsed();
    outcome(
        tpr >= 0.95 && tnr >= 0.99 && t < Duration::from_secs(600),
        format!("mean TPR {tpr:.4} (>= 0.95), mean TNR {tnr:.4} (>= 0.99), runtime {:.1}s", t.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- A4

fn a4() -> Outcome {
    let spec = TopologySpec::ErdosRenyi { n: 64, c: 3.0 };
    let total = 64 * 63 / 2;
    let r = mean((0..100).map(|s| {
        let e = generate_topology(&spec, s).unwrap().len();
        e as f64 / (total - e) as f64
    }));
    outcome((r - 0.0507).abs() <= 0.005, format!("mean bond ratio {r:.4} (0.0507 +- 0.005)"))
}

// ---------------------------------------------------------------- A5

fn a5() -> Outcome {
    let cfg = BenchmarkConfig {
        topology: TopologySpec::ErdosRenyi { n: 64, c: 3.0 },
        coupling: CouplingMode::Bimodal { beta: 0.5 },
        sample_sizes: vec![100, 2000],
        seeds: seeds(),
        methods: vec![method("ms:true")],
        visible: None,
        sampler: gibbs(),
    };
    let rows = run_synthetic_benchmark(&cfg).unwrap();
    let tpr = |n| mean(rows_for(&rows, "ms:true", n).map(|r| r.metrics.tpr));
    let tnr = |n| mean(rows_for(&rows, "ms:true", n).map(|r| r.metrics.tnr));
    let (t1, t2, n1, n2) = (tpr(100), tpr(2000), tnr(100), tnr(2000));
    outcome(
        t2 > t1 && n2 < n1,
        format!("TPR {t1:.4} -> {t2:.4}, TNR {n1:.4} -> {n2:.4} (N = 100 -> 2000)"),
    )
}

// ---------------------------------------------------------------- A6

fn a6() -> Outcome {
    let cfg = BenchmarkConfig {
        topology: TopologySpec::Star { n: 64 },
        coupling: CouplingMode::Bimodal { beta: 0.5 },
        sample_sizes: vec![2000],
        seeds: seeds(),
        methods: vec![method("ms:flat"), method("ms:flat:min")],
        visible: None,
        sampler: gibbs(),
    };
    let rows = run_synthetic_benchmark(&cfg).unwrap();
    let fpr = |m| mean(rows_for(&rows, m, 2000).map(|r| r.metrics.fpr));
    let fnr = |m| mean(rows_for(&rows, m, 2000).map(|r| r.metrics.fnr));
    let (f0, f1) = (fpr("ms:flat"), fpr("ms:flat:min"));
    let (n0, n1) = (fnr("ms:flat"), fnr("ms:flat:min"));
    outcome(
        f1 <= 0.5 * f0 && n1 - n0 <= 0.05,
        format!("FPR {f0:.4} -> {f1:.4} (<= half), FNR {n0:.4} -> {n1:.4} (increase <= 0.05)"),
    )
}

// ---------------------------------------------------------------- A7

fn a7() -> Outcome {
    let cfg = BenchmarkConfig {
        topology: TopologySpec::ErdosRenyi { n: 250, c: 3.0 },
        coupling: CouplingMode::Bimodal { beta: 0.5 },
        sample_sizes: vec![200],
        seeds: seeds(),
        methods: vec![method("ms:selfcon=1"), method("plm:0.5")],
        visible: Some(64),
        sampler: gibbs(),
    };
    let rows = run_synthetic_benchmark(&cfg).unwrap();
    let ms = mean(rows_for(&rows, "ms:selfcon=1", 200).map(|r| r.density));
    let plm = mean(rows_for(&rows, "plm:0.5", 200).map(|r| r.density));
    outcome(ms < plm, format!("mean density MS {ms:.4} < PLM {plm:.4}"))
}

// ---------------------------------------------------------------- A8

fn exact_correlations(inst: &IsingInstance) -> Vec<f64> {
    let n = inst.n;
    let j = inst.coupling_matrix();
    let mut z = 0.0;
    let mut acc = vec![0.0; n * n];
    for state in 0u32..1 << n {
        let s: Vec<f64> = (0..n).map(|i| if state >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let mut e = 0.0;
        for a in 0..n {
            e += inst.fields[a] * s[a];
            for b in a + 1..n {
                e += j[a * n + b] * s[a] * s[b];
            }
        }
        let w = e.exp();
        z += w;
        for a in 0..n {
            for b in 0..n {
                acc[a * n + b] += w * s[a] * s[b];
            }
        }
    }
    acc.iter().map(|v| v / z).collect()
}

fn a8() -> Outcome {
    let start = Instant::now();
    let spec = TopologySpec::ErdosRenyi { n: 8, c: 3.0 };
    let inst = generate_instance(&spec, CouplingMode::Bimodal { beta: 0.5 }, 8).unwrap();
    let exact = exact_correlations(&inst);
    let n_samples = 20000;
    let d = gibbs_sample(&inst, n_samples, DEFAULT_BURN_IN, DEFAULT_THIN, 8).unwrap();
    let mut worst = 0.0f64;
    for a in 0..8 {
        for b in a + 1..8 {
            let s = d.pair_counts(a, b);
            let emp: f64 = s.c12();
            let c = exact[a * 8 + b];
            let se = ((1.0 - c * c) / n_samples as f64).sqrt();
            worst = worst.max((emp - c).abs() / se);
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 4.0 && t < Duration::from_secs(60),
        format!(
            "{} edges, worst deviation {worst:.2} standard errors over 28 pairs, runtime {:.2}s",
            inst.edges.len(),
            t.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- A9

fn a9() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [50u64, 500] {
        let nf = n as f64;
        let lo = ((0.1 * nf).ceil()) as u64;
        let hi = ((0.9 * nf).floor()) as u64;
        let cache = CacheSet::new();
        let pts: Vec<PairStats> = (lo..=hi)
            .flat_map(|n1| (lo..=hi).map(move |n2| (n1, n2)))
            .flat_map(|(n1, n2)| {
                (n1 + n2).saturating_sub(n)..=n1.min(n2)
            }
            .filter_map(move |k| {
                let s = PairStats::new(k, n1 - k, n2 - k, n + k - n1 - n2).ok()?;
                let (m1, m2, c): (f64, f64, f64) = (s.m1(), s.m2(), s.c12());
                ((c - m1 * m2).abs() <= 1.0 / nf).then_some(s)
            }))
            .collect();
        let bad: Vec<_> = pts
            .par_iter()
            .filter(|s| cache.confidence(s).unwrap().eta >= 0.0)
            .collect();
        pass &= bad.is_empty();
        lines.push(format!("N={n}: {} independence points, {} with eta >= 0", pts.len(), bad.len()));
    }
    for n in [50u64, 500] {
        let half = n / 2;
        let etas: Vec<(f64, f64)> = (0..=half)
            .map(|k| {
                let s = PairStats::new(k, half - k, half - k, k).unwrap();
                (s.c12(), confidence_of(&s).unwrap().eta)
            })
            .collect();
        let up = etas.iter().filter(|e| e.0 >= 0.0).collect::<Vec<_>>();
        let down = etas.iter().rev().filter(|e| e.0 <= 0.0).collect::<Vec<_>>();
        let mono = up.windows(2).all(|w| w[1].1 >= w[0].1) && down.windows(2).all(|w| w[1].1 >= w[0].1);
        pass &= mono;
        lines.push(format!("N={n}: eta(0,0,c) non-decreasing in |c|: {mono}"));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- A10

fn a10() -> Outcome {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    let mut sym = true;
    let mut resid = true;
    for n in [50u64, 500] {
        for _ in 0..200 {
            let s = random_counts(&mut rng, n);
            let mo: Moments<f64> = s.moments();
            let e = confidence(&mo).unwrap().eta;
            let e_sw = confidence(&mo.swapped()).unwrap().eta;
            let e_fl = confidence(&Moments::new(-mo.m1, -mo.m2, mo.c12, n as usize)).unwrap().eta;
            sym &= (e - e_sw).abs() <= 1e-12 && (e - e_fl).abs() <= 1e-12;
            for m in ModelId::ALL {
                let th = saddle_point(m, &mo).unwrap();
                resid &= saddle_residual(m, &mo, &th).unwrap().max_abs() < 1e-8;
            }
            let ev = |k: u8, x: &Moments<f64>| log_evidence(ModelId::new(k).unwrap(), x).unwrap();
            let sw = mo.swapped();
            sym &= (ev(2, &mo) - ev(3, &sw)).abs() <= 1e-12 && (ev(7, &mo) - ev(8, &sw)).abs() <= 1e-12;
        }
    }
    checks.push(("symmetries", sym));
    checks.push(("saddle residuals", resid));

    let inst = generate_instance(&TopologySpec::ErdosRenyi { n: 10, c: 3.0 }, CouplingMode::Bimodal { beta: 0.8 }, 3)
        .unwrap();
    let d = gibbs_sample(&inst, 300, 100, 2, 3).unwrap();
    checks.push(("sampler determinism", d == gibbs_sample(&inst, 300, 100, 2, 3).unwrap()));
    checks.push((
        "exact sampler determinism",
        exact_sample_small(&inst, 50, 1).unwrap() == exact_sample_small(&inst, 50, 1).unwrap(),
    ));

    let cfg = RecoveryConfig {
        prior: PriorMode::SelfConsistent(1.0),
        correction: Some(Correction::Avg),
        ..RecoveryConfig::default()
    };
    let write = |o: &ising_select::pipeline::RecoveryOutcome| {
        let mut a = Vec::new();
        o.graph.write_eta_csv(&mut a).unwrap();
        o.graph.write_edges_json(&mut a).unwrap();
        a.extend(serde_json::to_vec(&o.metadata).unwrap());
        a
    };
    checks.push((
        "recovery output determinism",
        write(&run_recover(&cfg, &d).unwrap()) == write(&run_recover(&cfg, &d).unwrap()),
    ));

    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| recover(&d, SparsityPrior::FLAT).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| recover(&d, SparsityPrior::FLAT).unwrap());
    checks.push(("parallel equals serial", serial == parallel));

    let g = recover(&d, SparsityPrior::FLAT).unwrap();
    let only_removes = [Correction::Avg, Correction::Min, Correction::Prod].into_iter().all(|m| {
        let c = correct_graph(&d, &g, SparsityPrior::FLAT, m).unwrap();
        c.edges().iter().all(|&(i, j)| g.has_edge(i, j))
    });
    checks.push(("corrections only remove edges", only_removes));

    let grid = [0.0, 0.01, 0.05, 0.1, 0.3, 0.6, 1.0];
    let nested = grid.windows(2).all(|w| {
        let a = g.with_prior(SparsityPrior::new(w[0]).unwrap());
        let b = g.with_prior(SparsityPrior::new(w[1]).unwrap());
        a.edges().iter().all(|&(i, j)| b.has_edge(i, j))
    });
    checks.push(("edge sets nested in epsilon", nested));
    let flat_rule = (0..10)
        .flat_map(|i| (i + 1..10).map(move |j| (i, j)))
        .all(|(i, j)| g.has_edge(i, j) == decide(g.eta(i, j), SparsityPrior::FLAT));
    checks.push(("flat prior decides on sign of eta", flat_rule));

    let bench = BenchmarkConfig {
        topology: TopologySpec::Dimers { n: 8 },
        coupling: CouplingMode::Bimodal { beta: 1.0 },
        sample_sizes: vec![100],
        seeds: vec![1, 2],
        methods: vec![method("ms:selfcon=1"), method("plm")],
        visible: None,
        sampler: gibbs(),
    };
    checks.push((
        "benchmark determinism",
        run_synthetic_benchmark(&bench).unwrap() == run_synthetic_benchmark(&bench).unwrap(),
    ));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks hold", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("A1", "Laplace vs exact evidence", a1),
        ("A2", "reference script parity", a2),
        ("A3", "dimer gas recovery", a3),
        ("A4", "Erdos-Renyi sparsity", a4),
        ("A5", "monotonicity in N", a5),
        ("A6", "conditioning correction on a star", a6),
        ("A7", "density under partial observation", a7),
        ("A8", "Gibbs sampler fidelity", a8),
        ("A9", "classifier geometry", a9),
        ("A10", "invariant suite", a10),
    ];
    let mut failures = 0;
    for (id, name, run) in criteria {
        if filter.as_deref().is_some_and(|f| f != id) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!(
            "{id} {} {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
