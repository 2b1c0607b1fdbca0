//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each;
//! exits non-zero if any fails.

use std::process::Command;
use std::thread;
use std::time::Instant;

use boltzkern::data::{default_gamma_grid, gaussian_nw_baseline, generate_sinc, prepare, SplitSpec};
use boltzkern::evaluation::evaluate_at;
use boltzkern::regression::{endpoint_mask, llr_predict, EndpointRule, RegressionDataset, Split, DEFAULT_NW_EPS};
use boltzkern::rff::{closed_form_kernel, kernel_estimate, kernel_estimate_cosine, ClosedFormKernel, FrequencySet};
use boltzkern::spectral::{
    block_gibbs_sample, exact_joint_distribution, sample_frequencies, visibles_of, GibbsSchedule, SpinState,
};
use boltzkern::training::{
    discrete_score_against, gaussian_log_density, gaussian_score, loo_mse_loss, loss_kernel_gradient,
    parameter_gradient, train, TrainHistory,
};
use boltzkern::{derived_rng, Sampler, SamplerBackend, SpectralModelParams, TrainConfig};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn random_params<R: Rng>(d: usize, nv: usize, nh: usize, scale: f64, rng: &mut R) -> SpectralModelParams {
    let p = SpectralModelParams::zeros(d, nv, nh);
    let flat: Vec<f64> = (0..p.num_parameters()).map(|_| scale * gauss(rng)).collect();
    p.with_flat(&flat).unwrap()
}

fn random_matrix<R: Rng>(n: usize, d: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || gauss(rng))
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn criterion_1() -> Outcome {
    let mut rng = derived_rng(101, 0);
    let s = 10_000;
    let bound = 3.0 / (s as f64).sqrt();
    let (mut within, mut total, mut worst) = (0, 0, 0.0f64);
    for _ in 0..20 {
        let params = random_params(3, 4, 4, 0.5, &mut rng);
        let table = exact_joint_distribution(&params).unwrap();
        let states = table.sample(s, &mut rng);
        let freqs = sample_frequencies(&params, &visibles_of(&states), &mut rng).unwrap();
        for _ in 0..50 {
            let x = Array1::from_shape_simple_fn(3, || gauss(&mut rng));
            let xp = Array1::from_shape_simple_fn(3, || gauss(&mut rng));
            let est = kernel_estimate(x.view(), xp.view(), &freqs).unwrap();
            let exact = closed_form_kernel((&x - &xp).view(), &params).unwrap();
            let err = (est - exact).abs();
            worst = worst.max(err);
            within += usize::from(err <= bound);
            total += 1;
        }
    }
    let frac = within as f64 / total as f64;
    outcome(
        frac >= 0.99,
        format!("{within}/{total} pairs within 3/sqrt(S)={bound:.3}, max error {worst:.4}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = derived_rng(102, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(1..=6);
        let s = rng.random_range(1..=64);
        let freqs = FrequencySet::new(random_matrix(s, d, &mut rng) * 2.0).unwrap();
        let x = Array1::from_shape_simple_fn(d, || gauss(&mut rng));
        let xp = Array1::from_shape_simple_fn(d, || gauss(&mut rng));
        let a = kernel_estimate(x.view(), xp.view(), &freqs).unwrap();
        let b = kernel_estimate_cosine(x.view(), xp.view(), &freqs).unwrap();
        worst = worst.max((a - b).abs());
    }
    outcome(
        worst <= 1e-10,
        format!("max |phi.phi' - mean cos| = {worst:.2e} over 1000 cases"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = derived_rng(103, 0);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(3..=6);
        let mut k = Array2::from_elem((n, n), 1.0);
        for i in 0..n {
            for j in 0..i {
                let v = rng.random_range(-1.0..1.0);
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        let y = Array1::from_shape_simple_fn(n, || gauss(&mut rng));
        let g = loss_kernel_gradient(k.view(), y.view(), DEFAULT_NW_EPS).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut kp = k.clone();
                kp[[i, j]] += h;
                let mut km = k.clone();
                km[[i, j]] -= h;
                let fd = (loo_mse_loss(kp.view(), y.view(), DEFAULT_NW_EPS).unwrap()
                    - loo_mse_loss(km.view(), y.view(), DEFAULT_NW_EPS).unwrap())
                    / (2.0 * h);
                worst = worst.max(rel_err(g[[i, j]], fd, 1e-6));
            }
        }
    }
    outcome(
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over 100 instances"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = derived_rng(104, 0);
    // Gaussian blocks: a, U and z in flat order.
    let mut worst_g = 0.0f64;
    for _ in 0..50 {
        let params = random_params(3, 4, 4, 0.5, &mut rng);
        let v: Vec<i8> = (0..4).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let omega = Array1::from_shape_simple_fn(3, || 1.5 * gauss(&mut rng));
        let score = gaussian_score(omega.view(), &v, &params).unwrap();
        let mut analytic = SpectralModelParams::zeros(3, 4, 4);
        analytic.a = score.a;
        analytic.u = score.u;
        analytic.z = score.z;
        let flat = params.to_flat();
        for (k, expect) in analytic.to_flat().into_iter().enumerate() {
            let h = 1e-4;
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let f = |p: &[f64]| gaussian_log_density(omega.view(), &v, &params.with_flat(p).unwrap()).unwrap();
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            worst_g = worst_g.max(rel_err(expect, fd, 1e-3));
        }
    }
    // Discrete blocks against the enumerated 256-state table.
    let mut worst_d = 0.0f64;
    for _ in 0..20 {
        let params = random_params(2, 4, 4, 0.5, &mut rng);
        let table = exact_joint_distribution(&params).unwrap();
        let stats = table.sufficient_statistics();
        let state = SpinState::from_index(rng.random_range(0..256), 4, 4);
        let score = discrete_score_against(&state, &params, &stats).unwrap();
        let mut analytic = SpectralModelParams::zeros(2, 4, 4);
        analytic.b = score.b;
        analytic.c = score.c;
        analytic.w = score.w;
        let flat = params.to_flat();
        let log_p = |p: &[f64]| {
            exact_joint_distribution(&params.with_flat(p).unwrap())
                .unwrap()
                .prob(&state)
                .ln()
        };
        for (k, expect) in analytic.to_flat().into_iter().enumerate() {
            let h = 1e-5;
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let fd = (log_p(&plus) - log_p(&minus)) / (2.0 * h);
            worst_d = worst_d.max(rel_err(expect, fd, 1e-3));
        }
    }
    outcome(
        worst_g <= 1e-6 && worst_d <= 1e-5,
        format!("gaussian max rel {worst_g:.2e} (<=1e-6), discrete max rel {worst_d:.2e} (<=1e-5)"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = derived_rng(105, 0);
    let x = random_matrix(6, 2, &mut rng);
    let y = Array1::from_shape_simple_fn(6, || gauss(&mut rng));
    let params = random_params(2, 2, 2, 0.5, &mut rng);
    let exact_loss = |p: &SpectralModelParams| {
        let k = ClosedFormKernel::new(p).unwrap().matrix(x.view()).unwrap();
        loo_mse_loss(k.values(), y.view(), DEFAULT_NW_EPS).unwrap()
    };
    let k = ClosedFormKernel::new(&params).unwrap().matrix(x.view()).unwrap();
    let table = exact_joint_distribution(&params).unwrap();
    let (draws, per_draw) = (100, 1000);
    let grads: Vec<Vec<f64>> = (0..draws)
        .map(|_| {
            let states = table.sample(per_draw, &mut rng);
            let freqs = sample_frequencies(&params, &visibles_of(&states), &mut rng).unwrap();
            parameter_gradient(
                k.values(),
                y.view(),
                DEFAULT_NW_EPS,
                &freqs,
                &states,
                x.view(),
                &params,
                false,
            )
            .unwrap()
            .to_flat()
        })
        .collect();
    let flat = params.to_flat();
    let mut worst_z = 0.0f64;
    let mut failed = 0;
    for c in 0..flat.len() {
        let mean = grads.iter().map(|g| g[c]).sum::<f64>() / draws as f64;
        let var = grads.iter().map(|g| (g[c] - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        let h = 1e-5;
        let mut plus = flat.clone();
        plus[c] += h;
        let mut minus = flat.clone();
        minus[c] -= h;
        let fd = (exact_loss(&params.with_flat(&plus).unwrap()) - exact_loss(&params.with_flat(&minus).unwrap()))
            / (2.0 * h);
        let z = (mean - fd).abs() / se.max(1e-15);
        worst_z = worst_z.max(z);
        failed += usize::from(z > 3.0);
    }
    outcome(
        failed == 0,
        format!(
            "{} samples, {failed}/{} coordinates beyond 3 SE, max |z| {worst_z:.2}",
            draws * per_draw,
            flat.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = derived_rng(106, 0);
    let params = random_params(2, 4, 4, 0.5, &mut rng);
    let table = exact_joint_distribution(&params).unwrap();
    let n = 200_000;
    let samples = block_gibbs_sample(&params, n, GibbsSchedule::default(), &mut rng).unwrap();
    let mut counts = vec![0usize; table.probs.len()];
    for s in &samples {
        counts[s.index()] += 1;
    }
    let tv = 0.5
        * counts
            .iter()
            .zip(&table.probs)
            .map(|(&c, p)| (c as f64 / n as f64 - p).abs())
            .sum::<f64>();
    outcome(tv <= 0.02, format!("TV distance {tv:.4} with {n} kept samples"))
}

struct SincRuns {
    train: RegressionDataset,
    test: RegressionDataset,
    runs: Vec<(SpectralModelParams, TrainHistory)>,
}

fn sinc_runs() -> SincRuns {
    let table = generate_sinc(300, 2, 0.05, 0).unwrap();
    let (train, test, _) = prepare(&table, &SplitSpec::default()).unwrap();
    let data = &train;
    let runs = thread::scope(|scope| {
        let handles: Vec<_> = (0..5).map(|seed| scope.spawn(move || train_sinc(data, seed))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    SincRuns { train, test, runs }
}

fn train_sinc(data: &RegressionDataset, seed: u64) -> (SpectralModelParams, TrainHistory) {
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    train(data, &config).unwrap()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn criterion_7(s: &SincRuns) -> Outcome {
    let ratios: Vec<f64> = s
        .runs
        .iter()
        .map(|(_, h)| {
            let l = h.losses();
            median(&l[l.len() - 50..]) / median(&l[..50])
        })
        .collect();
    let passing = ratios.iter().filter(|&&r| r <= 0.8).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(
        passing >= 4,
        format!(
            "late/early median loss ratios [{}], {passing}/5 <= 0.8",
            shown.join(", ")
        ),
    )
}

fn test_metric(params: &SpectralModelParams, s: &SincRuns, n_features: usize, seed: u64, rmse: bool) -> f64 {
    let mut sampler = Sampler::new(SamplerBackend::Exact).unwrap();
    let rows = evaluate_at(
        "sinc",
        params,
        &s.train,
        &s.test,
        n_features,
        &mut sampler,
        DEFAULT_NW_EPS,
        seed,
    )
    .unwrap();
    let row = rows
        .iter()
        .find(|r| r.split == Split::Test && r.method == boltzkern::evaluation::Method::Klnw)
        .unwrap();
    if rmse {
        row.rmse
    } else {
        row.r2
    }
}

fn criterion_8(s: &SincRuns) -> Outcome {
    let baseline = gaussian_nw_baseline(&s.train, &s.test, &default_gamma_grid(), DEFAULT_NW_EPS).unwrap();
    let mut all = true;
    let mut parts = Vec::new();
    for (seed, (params, history)) in s.runs.iter().enumerate() {
        let trained = test_metric(params, s, 2000, 1000 + seed as u64, false);
        let untrained = test_metric(&history.initial_params, s, 2000, 1000 + seed as u64, false);
        let ok = trained >= untrained + 0.05 && trained >= baseline.test_r2 - 0.05;
        all &= ok;
        parts.push(format!("{untrained:.3}->{trained:.3}"));
    }
    outcome(
        all,
        format!(
            "test R2 untrained->trained at S=2000 [{}], Gaussian NW baseline {:.3} (gamma {})",
            parts.join(", "),
            baseline.test_r2,
            baseline.gamma
        ),
    )
}

fn criterion_9(s: &SincRuns) -> Outcome {
    let params = &s.runs[0].0;
    let means: Vec<(usize, f64)> = [100, 500, 2000]
        .iter()
        .map(|&n| {
            (
                n,
                (0..5).map(|seed| test_metric(params, s, n, seed, true)).sum::<f64>() / 5.0,
            )
        })
        .collect();
    let shown: Vec<String> = means.iter().map(|(n, m)| format!("S={n}: {m:.4}")).collect();
    outcome(means[2].1 <= means[0].1, format!("mean test RMSE {}", shown.join(", ")))
}

fn criterion_10() -> Outcome {
    let mut rng = derived_rng(110, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = random_matrix(50, 3, &mut rng);
        let beta = Array1::from_shape_simple_fn(3, || gauss(&mut rng));
        let alpha = gauss(&mut rng);
        let y = x.dot(&beta) + alpha;
        let train = RegressionDataset {
            x,
            y,
            feature_means: Array1::zeros(3),
            feature_stds: Array1::ones(3),
            split: Split::Train,
        };
        let freqs = FrequencySet::new(random_matrix(200, 3, &mut rng)).unwrap();
        for _ in 0..10 {
            let q = Array1::from_shape_simple_fn(3, || 0.5 * gauss(&mut rng));
            let p = llr_predict(q.view(), &train, &freqs, DEFAULT_NW_EPS).unwrap();
            worst = worst.max((p.value - (alpha + q.dot(&beta))).abs());
        }
    }
    let fit = Array2::from_shape_simple_fn((100_000, 8), || rng.random::<f64>());
    let rule = EndpointRule::fit(fit.view()).unwrap();
    let queries = Array2::from_shape_simple_fn((100_000, 8), || rng.random::<f64>());
    let mask = endpoint_mask(queries.view(), &rule).unwrap();
    let frac = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
    let expected = 1.0 - 0.98f64.powi(8);
    outcome(
        worst <= 1e-8 && (frac - expected).abs() <= 0.02,
        format!("LLR affine max error {worst:.2e}; endpoint fraction {frac:.4} vs {expected:.4}"),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_boltzkern"))
            .args(["train", "--data", "sinc", "--iterations", "20", "--seed", "5", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        out
    };
    let (a, b) = (run("a"), run("b"));
    let files = ["history.csv", "params_init.json", "params_final.json"];
    let same: Vec<bool> = files
        .iter()
        .map(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap())
        .collect();
    outcome(
        same.iter().all(|&s| s),
        format!("{} byte-identical: {same:?}", files.join(", ")),
    )
}

type Check = fn() -> Outcome;
type SincCheck = fn(&SincRuns) -> Outcome;

fn main() {
    let started = Instant::now();
    let independent: [(usize, &str, Check); 8] = [
        (1, "kernel oracle equivalence", criterion_1),
        (2, "trig identity", criterion_2),
        (3, "loss gradient finite differences", criterion_3),
        (4, "score correctness", criterion_4),
        (5, "end-to-end gradient", criterion_5),
        (6, "Gibbs sampler fidelity", criterion_6),
        (10, "LLR exactness and endpoint rule", criterion_10),
        (11, "determinism", criterion_11),
    ];
    let mut results: Vec<(usize, &str, Option<Outcome>, f64)> = thread::scope(|scope| {
        let sinc = scope.spawn(|| {
            let t = Instant::now();
            let runs = sinc_runs();
            let elapsed = t.elapsed().as_secs_f64();
            let checks: [(usize, &str, SincCheck); 3] = [
                (7, "training trend", criterion_7),
                (8, "learned-kernel benefit", criterion_8),
                (9, "S monotonicity", criterion_9),
            ];
            checks
                .into_iter()
                .map(|(id, name, f)| {
                    let t = Instant::now();
                    let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| f(&runs))).ok();
                    (
                        id,
                        name,
                        res,
                        t.elapsed().as_secs_f64() + if id == 7 { elapsed } else { 0.0 },
                    )
                })
                .collect::<Vec<_>>()
        });
        let handles: Vec<_> = independent
            .into_iter()
            .map(|(id, name, f)| {
                (
                    id,
                    name,
                    scope.spawn(move || {
                        let t = Instant::now();
                        let res = f();
                        (res, t.elapsed().as_secs_f64())
                    }),
                )
            })
            .collect();
        let mut out: Vec<_> = handles
            .into_iter()
            .map(|(id, name, h)| match h.join() {
                Ok((res, secs)) => (id, name, Some(res), secs),
                Err(_) => (id, name, None, 0.0),
            })
            .collect();
        match sinc.join() {
            Ok(rows) => out.extend(rows),
            Err(_) => {
                for (id, name) in [
                    (7, "training trend"),
                    (8, "learned-kernel benefit"),
                    (9, "S monotonicity"),
                ] {
                    out.push((id, name, None, 0.0));
                }
            }
        }
        out
    });
    results.sort_by_key(|r| r.0);
    let mut failures = 0;
    for (id, name, res, secs) in &results {
        match res {
            Some(o) => {
                failures += usize::from(!o.pass);
                println!(
                    "criterion {id:>2} {:<4} {name} ({secs:.1}s): {}",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.detail
                );
            }
            None => {
                failures += 1;
                println!("criterion {id:>2} FAIL {name}: panicked");
            }
        }
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failures,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
