//! Acceptance criteria. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p gafs-core --test acceptance -- --nocapture` to
//! see the report lines.

use std::time::Instant;

use gafs_core::data::{scale_features, DataMatrix, DEFAULT_DELTA};
use gafs_core::eval::metrics::contingency;
use gafs_core::eval::{acc, evaluate_selection, nmi, EvalOptions, LabelVector};
use gafs_core::graph::build_graph;
use gafs_core::model::{graph_penalty, ModelParams, ObjectiveContext};
use gafs_core::optim::{minimize, LbfgsConfig, Termination};
use gafs_core::select::{fit, near_zero_columns, top_features, FeatureCount, GafsConfig};
use gafs_core::synthetic::{generate, SyntheticData, SyntheticSpec};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} ({name}): {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(lo..hi))
}

fn random_params(rng: &mut ChaCha8Rng, d: usize, m: usize) -> ModelParams {
    ModelParams {
        w1: uniform(rng, m, d, -1.0, 1.0),
        w2: uniform(rng, d, m, -1.0, 1.0),
        b1: Array1::from_shape_fn(m, |_| rng.random_range(-0.5..0.5)),
        b2: Array1::from_shape_fn(d, |_| rng.random_range(-0.5..0.5)),
    }
}

/// Random `d × n` data scaled into the sigmoid range, with its kNN graph.
fn random_instance(seed: u64, d: usize, n: usize, lambda: f64, gamma: f64) -> ObjectiveContext {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DataMatrix::new(uniform(&mut rng, d, n, -2.0, 2.0)).unwrap();
    let x = scale_features(&raw, DEFAULT_DELTA).unwrap();
    let g = build_graph(&x, 5).unwrap();
    ObjectiveContext::new(
        x.values().clone(),
        Some(g.laplacian().clone()),
        lambda,
        gamma,
    )
    .unwrap()
}

#[test]
fn criterion_01_gradient_matches_finite_differences() {
    let start = Instant::now();
    let (d, n, m) = (12, 30, 5);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for seed in 0..10 {
        let ctx = random_instance(seed, d, n, 0.01, 0.001);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let p = random_params(&mut rng, d, m);
        let analytic = ctx.gradient(&p).unwrap().flatten();
        let theta = p.flatten();
        for (i, &a) in analytic.iter().enumerate() {
            if a.abs() <= 1e-8 {
                continue;
            }
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let fp = ctx
                .objective(&ModelParams::unflatten(&plus, d, m).unwrap())
                .unwrap();
            let fm = ctx
                .objective(&ModelParams::unflatten(&minus, d, m).unwrap())
                .unwrap();
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - a).abs() / a.abs());
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "gradient vs finite differences",
        worst < 1e-5 && secs < 5.0,
        format!("max rel err {worst:.3e} over {checked} coords, {secs:.2}s"),
    );
}

#[test]
fn criterion_02_trace_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let m = rng.random_range(1..=6);
        let y = uniform(&mut rng, m, n, 0.0, 1.0);
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let w = rng.random_range(-0.2..1.0);
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
        let mut l = -&a;
        for i in 0..n {
            l[[i, i]] = a.row(i).sum();
        }
        let trace = graph_penalty(y.view(), l.view()).unwrap();
        let mut brute = 0.0;
        for i in 0..n {
            for j in 0..n {
                let diff = &y.column(i) - &y.column(j);
                brute += 0.5 * diff.dot(&diff) * a[[i, j]];
            }
        }
        worst = worst.max((trace - brute).abs());
    }
    report(
        2,
        "trace identity",
        worst < 1e-10,
        format!("max abs diff {worst:.3e}"),
    );
}

#[test]
fn criterion_03_exact_stationary_baseline() {
    let raw = DataMatrix::new(Array2::from_elem((6, 10), 3.7)).unwrap();
    let x = scale_features(&raw, DEFAULT_DELTA).unwrap();
    assert!(x.values().iter().all(|&v| v == 0.5));
    let g = build_graph(&x, 3).unwrap();
    let ctx = ObjectiveContext::new(x.values().clone(), Some(g.laplacian().clone()), 0.05, 0.002)
        .unwrap();
    let p = ModelParams::zeros(6, 4);
    let (f, grad) = ctx.value_and_gradient(&p).unwrap();
    let nonzero = grad.flatten().iter().filter(|&&v| v != 0.0).count();
    report(
        3,
        "stationary baseline",
        f.abs() <= 1e-12 && nonzero == 0,
        format!("objective {f:e}, {nonzero} nonzero gradient entries"),
    );
}

#[test]
fn criterion_04_optimizer_contract() {
    let ctx = random_instance(4, 12, 30, 0.01, 0.001);
    let init = gafs_core::select::init_params(12, 5, 4);
    let func = |v: &[f64]| {
        let p = ModelParams::unflatten(v, 12, 5).unwrap();
        let (f, g) = ctx.value_and_gradient(&p).unwrap();
        (f, g.flatten())
    };
    let cfg = LbfgsConfig::default();
    assert_eq!(
        (cfg.max_iterations, cfg.memory, cfg.relative_tolerance),
        (400, 100, 1e-5)
    );
    let (_, trace) = minimize(func, init.flatten(), &cfg).unwrap();
    let monotone = trace.objective.windows(2).all(|w| w[1] <= w[0]);
    let decreased = trace.final_objective() < trace.objective[0];

    let rosen = |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        (
            f,
            vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ],
        )
    };
    let tight = LbfgsConfig {
        relative_tolerance: 1e-30,
        gradient_tolerance: 1e-10,
        max_iterations: 1000,
        ..LbfgsConfig::default()
    };
    let (xr, rtrace) = minimize(rosen, vec![-1.2, 1.0], &tight).unwrap();
    let dist = ((xr[0] - 1.0).powi(2) + (xr[1] - 1.0).powi(2)).sqrt();
    report(
        4,
        "optimizer contract",
        monotone && decreased && dist < 1e-6 && rtrace.termination != Termination::LineSearchFailure,
        format!(
            "GAFS: {} iters, {} -> {}, stop={}, monotone={monotone}; Rosenbrock dist {dist:.2e} ({} iters)",
            trace.iterations(),
            trace.objective[0],
            trace.final_objective(),
            trace.termination,
            rtrace.iterations()
        ),
    );
}

#[test]
fn criterion_05_graph_laplacian_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for trial in 0..100 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(2..=25);
        let k = rng.random_range(1..n);
        let raw = uniform(&mut rng, d, n, -1.0, 1.0);
        let x = DataMatrix::new(raw.clone()).unwrap();
        let g = build_graph(&x, k).unwrap();
        let a = g.adjacency();
        let symmetric = (0..n).all(|i| (0..n).all(|j| a[[i, j]] == a[[j, i]]));
        let zero_diag = (0..n).all(|i| a[[i, i]] == 0.0);
        let null = g
            .laplacian()
            .rows()
            .into_iter()
            .all(|r| r.sum().abs() <= 1e-12);
        let scales: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let rescaled = Array2::from_shape_fn((d, n), |(r, c)| raw[[r, c]] * scales[c]);
        let g2 = build_graph(&DataMatrix::new(rescaled).unwrap(), k).unwrap();
        let invariant = g
            .adjacency()
            .iter()
            .zip(g2.adjacency())
            .all(|(p, q)| (p - q).abs() <= 1e-12 && ((*p == 0.0) == (*q == 0.0)));
        if !(symmetric && zero_diag && null && invariant) {
            failures.push(format!(
                "trial {trial}: sym={symmetric} diag={zero_diag} null={null} inv={invariant}"
            ));
        }
    }
    report(
        5,
        "graph/Laplacian suite",
        failures.is_empty(),
        format!("{} failures {:?}", failures.len(), failures),
    );
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn criterion_06_hungarian_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=5);
        let n = rng.random_range(1..=40);
        let pred =
            LabelVector::with_classes((0..n).map(|_| rng.random_range(0..k)).collect(), k).unwrap();
        let truth =
            LabelVector::with_classes((0..n).map(|_| rng.random_range(0..k)).collect(), k).unwrap();
        let table = contingency(&pred, &truth).unwrap();
        let best = permutations(table.len())
            .iter()
            .map(|p| p.iter().enumerate().map(|(c, &g)| table[c][g]).sum::<u64>())
            .max()
            .unwrap();
        if acc(&pred, &truth).unwrap() != best as f64 / n as f64 {
            mismatches += 1;
        }
    }
    report(
        6,
        "Hungarian vs brute force",
        mismatches == 0,
        format!("{mismatches} mismatches in 100 cases"),
    );
}

#[test]
fn criterion_07_metric_bounds_and_identities() {
    let t = LabelVector::new(vec![0, 1, 2, 0, 1, 2, 2]).unwrap();
    let ident = acc(&t, &t).unwrap() == 1.0 && (nmi(&t, &t).unwrap() - 1.0).abs() < 1e-15;
    let a = LabelVector::new(vec![0, 0, 1, 1]).unwrap();
    let b = LabelVector::new(vec![0, 1, 0, 1]).unwrap();
    let indep = nmi(&a, &b).unwrap().abs() < 1e-15;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out_of_range = 0;
    let mut asymmetric = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let k1 = rng.random_range(1..=6);
        let k2 = rng.random_range(1..=6);
        let p = LabelVector::with_classes((0..n).map(|_| rng.random_range(0..k1)).collect(), k1)
            .unwrap();
        let q = LabelVector::with_classes((0..n).map(|_| rng.random_range(0..k2)).collect(), k2)
            .unwrap();
        let (ac, nm) = (acc(&p, &q).unwrap(), nmi(&p, &q).unwrap());
        if !(0.0..=1.0).contains(&ac) || !(0.0..=1.0).contains(&nm) {
            out_of_range += 1;
        }
        if (nm - nmi(&q, &p).unwrap()).abs() > 1e-12 {
            asymmetric += 1;
        }
    }
    report(
        7,
        "metric bounds and identities",
        ident && indep && out_of_range == 0 && asymmetric == 0,
        format!("identity={ident} independent={indep} out_of_range={out_of_range} asymmetric={asymmetric}"),
    );
}

const SYNTH_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn synthetic(seed: u64) -> (SyntheticData, DataMatrix) {
    let s = generate(&SyntheticSpec::default(), seed).unwrap();
    let x = scale_features(&s.data, DEFAULT_DELTA).unwrap();
    (s, x)
}

fn synth_config(seed: u64, lambda: f64, gamma: f64) -> GafsConfig {
    GafsConfig {
        hidden_size: 10,
        neighbors: 5,
        lambda,
        gamma,
        seed,
        n_features: FeatureCount::Count(10),
        ..GafsConfig::default()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn criterion_08_synthetic_feature_recovery() {
    let mut good_seeds = 0;
    let mut details = Vec::new();
    let mut slowest = 0.0f64;
    for seed in SYNTH_SEEDS {
        let (s, x) = synthetic(seed);
        let start = Instant::now();
        let fit = fit(&x, &synth_config(seed, 0.01, 1e-3)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        let top = top_features(&fit.ranking, 10).unwrap();
        let hits = top.iter().filter(|f| s.informative.contains(f)).count();
        if hits >= 8 && secs < 60.0 {
            good_seeds += 1;
        }
        details.push(format!(
            "seed {seed}: {hits}/10 in {secs:.1}s ({} iters, {})",
            fit.trace.iterations(),
            fit.trace.termination
        ));
    }
    report(
        8,
        "synthetic feature recovery",
        good_seeds >= 4 && slowest < 60.0,
        format!("{good_seeds}/5 seeds with >=8 hits; {}", details.join("; ")),
    );
}

fn kmeans_acc_on_top(x: &DataMatrix, labels: &LabelVector, features: &[usize], seed: u64) -> f64 {
    let opts = EvalOptions {
        repetitions: 20,
        seed,
        ..EvalOptions::default()
    };
    evaluate_selection(x, labels, features, &opts)
        .unwrap()
        .acc_mean
}

#[test]
fn criterion_09_locality_term_and_sparsity_trend() {
    let mut with_graph = Vec::new();
    let mut without_graph = Vec::new();
    let lambdas = [1e-4, 1e-2, 1.0];
    let mut zero_counts: Vec<Vec<f64>> = vec![Vec::new(); lambdas.len()];
    for seed in SYNTH_SEEDS {
        let (s, x) = synthetic(seed);
        for (gamma, sink) in [(1e-3, &mut with_graph), (0.0, &mut without_graph)] {
            let fit = fit(&x, &synth_config(seed, 0.01, gamma)).unwrap();
            let top = top_features(&fit.ranking, 10).unwrap();
            sink.push(kmeans_acc_on_top(&x, &s.labels, &top, seed));
        }
        for (i, &lambda) in lambdas.iter().enumerate() {
            let fit = fit(&x, &synth_config(seed, lambda, 1e-3)).unwrap();
            zero_counts[i].push(near_zero_columns(&fit.params, 1e-3) as f64);
        }
    }
    let (mw, mwo) = (median(with_graph.clone()), median(without_graph.clone()));
    let medians: Vec<f64> = zero_counts.iter().cloned().map(median).collect();
    let trend = medians.windows(2).all(|w| w[1] >= w[0]);
    report(
        9,
        "locality term and sparsity trend",
        mw >= mwo && trend,
        format!("median ACC gamma=1e-3 {mw:.4} vs gamma=0 {mwo:.4}; zero-column medians over lambda {lambdas:?}: {medians:?}"),
    );
}

#[test]
fn criterion_10_selected_beats_all_features() {
    let mut selected = Vec::new();
    let mut all = Vec::new();
    let mut truth = Vec::new();
    for seed in SYNTH_SEEDS {
        let (s, x) = synthetic(seed);
        let fit = fit(&x, &synth_config(seed, 0.01, 1e-3)).unwrap();
        let top = top_features(&fit.ranking, 10).unwrap();
        let everything: Vec<usize> = (0..x.d()).collect();
        selected.push(kmeans_acc_on_top(&x, &s.labels, &top, seed));
        all.push(kmeans_acc_on_top(&x, &s.labels, &everything, seed));
        truth.push(kmeans_acc_on_top(&x, &s.labels, &s.informative, seed));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ms, ma, mt) = (mean(&selected), mean(&all), mean(&truth));
    report(
        10,
        "selected features vs all features",
        ms >= ma - 0.02,
        format!("mean ACC top-10 {ms:.4} vs all-100 {ma:.4} (true informative set {mt:.4})"),
    );
}
