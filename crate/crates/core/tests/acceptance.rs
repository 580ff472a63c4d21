//! End-to-end acceptance checks. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scalaw::cli::run_cli_with;
use scalaw::{
    bootstrap_laws, derive_frontier, fit, generate_synthetic, loo_cv, objective, objective_gradient, render_plot, BootstrapOptions,
    ComputeFrontier, ExperimentDataset, FitConfig, FitCoords, OffsetMode, PlotInput, PlotKind, PlotSpec, ScalingLaw,
};

use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Published central frontier coefficients (F, gamma, a) for both models.
const PUBLISHED_BASELINE: (f64, f64, f64) = (1.03, 0.268, 0.294);
const PUBLISHED_EQUIVARIANT: (f64, f64, f64) = (0.14, 0.236, 0.678);

fn frontiers() -> (ComputeFrontier, ComputeFrontier) {
    (derive_frontier(&baseline_law(), BASELINE_XI).unwrap(), derive_frontier(&equivariant_law(), EQUIVARIANT_XI).unwrap())
}

fn derived_rows() -> Outcome {
    let (base, eq) = frontiers();
    let mut detail = Vec::new();
    for (name, fr, (a, b, gamma, f)) in [("baseline", base, (0.294, 0.706, 0.268, 1.03)), ("equivariant", eq, (0.678, 0.322, 0.236, 0.14))]
    {
        ensure((fr.a - a).abs() <= 0.005, || format!("{name} a = {} (want {a})", fr.a))?;
        ensure((fr.b - b).abs() <= 0.005, || format!("{name} b = {} (want {b})", fr.b))?;
        ensure((fr.gamma - gamma).abs() <= 0.005, || format!("{name} gamma = {} (want {gamma})", fr.gamma))?;
        ensure((fr.f / f - 1.0).abs() <= 0.02, || format!("{name} F = {} (want {f} +-2%)", fr.f))?;
        detail.push(format!("{name}: a={:.4} b={:.4} gamma={:.4} F={:.4}", fr.a, fr.b, fr.gamma, fr.f));
    }
    Ok(detail.join("; "))
}

fn published_frontier(fitted: &ComputeFrontier, (f, gamma, a): (f64, f64, f64)) -> ComputeFrontier {
    ComputeFrontier::from_coefficients(fitted.xi, fitted.g, a, gamma, f, 0.0).unwrap()
}

fn loss_gap() -> Outcome {
    let (base, eq) = frontiers();
    let (pb, pe) = (published_frontier(&base, PUBLISHED_BASELINE), published_frontier(&eq, PUBLISHED_EQUIVARIANT));
    let mut ratios = Vec::new();
    let mut derived = Vec::new();
    for c in [1e16, 1e17, 1e18, 1e19] {
        let r = pb.optimal_loss(c) / pe.optimal_loss(c);
        ensure((1.7..=2.3).contains(&r), || format!("ratio {r:.3} at C={c:e}"))?;
        ratios.push(format!("{c:e}: {r:.3}"));
        derived.push(format!("{c:e}: {:.3}", base.optimal_loss(c) / eq.optimal_loss(c)));
    }
    println!("      info: ratios from frontiers derived from the rounded fitted laws: {}", derived.join(", "));
    Ok(format!("published-coefficient ratios {}", ratios.join(", ")))
}

fn noiseless_recovery() -> Outcome {
    let law = baseline_law();
    let ds = generate_synthetic(&synthetic(law, 40, 0.0, 11)).unwrap();
    let r = fit(&ds, &FitConfig::default()).map_err(|e| e.to_string())?;
    ensure((r.law.alpha - law.alpha).abs() <= 1e-3, || format!("alpha {}", r.law.alpha))?;
    ensure((r.law.beta - law.beta).abs() <= 1e-3, || format!("beta {}", r.law.beta))?;
    ensure(r.objective <= 1e-10, || format!("objective {:e}", r.objective))?;
    Ok(format!("alpha={:.6} beta={:.6} objective={:.2e}", r.law.alpha, r.law.beta, r.objective))
}

fn noisy_recovery() -> Outcome {
    let law = baseline_law();
    let mut passed = 0;
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..10 {
        let ds = generate_synthetic(&synthetic(law, 40, 0.01, 100 + seed)).unwrap();
        let Ok(r) = fit(&ds, &FitConfig::default()) else { continue };
        let de = (r.law.alpha - law.alpha).abs().max((r.law.beta - law.beta).abs());
        let dp = (r.law.a.ln() - law.a.ln()).abs().max((r.law.b.ln() - law.b.ln()).abs());
        worst = (worst.0.max(de), worst.1.max(dp));
        if de <= 0.05 && dp <= 0.3 {
            passed += 1;
        }
    }
    ensure(passed >= 9, || format!("{passed}/10 seeds recovered"))?;
    Ok(format!("{passed}/10 seeds; worst exponent error {:.4}, worst log-prefactor error {:.4}", worst.0, worst.1))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut quadratic, mut linear) = (0usize, 0usize);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let mode = if k % 2 == 0 { OffsetMode::FixedZero } else { OffsetMode::Free };
        let truth = ScalingLaw::new(
            rng.random_range(-4.0f64..6.0).exp(),
            rng.random_range(-4.0f64..6.0).exp(),
            if mode == OffsetMode::Free { rng.random_range(1e-6..1e-3) } else { 0.0 },
            rng.random_range(0.2..1.2),
            rng.random_range(0.2..1.2),
        )
        .unwrap();
        let ds = generate_synthetic(&synthetic(truth, 20, 0.05, 1000 + k)).unwrap();
        let mut x = FitCoords::from_law(&truth, mode).to_vec();
        for v in x.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        let coords = FitCoords::from_slice(&x);
        let law = coords.to_law();
        // Threshold between the two middle residuals: both branches are populated
        // and no residual sits on the kink, where differencing loses accuracy.
        let mut res: Vec<f64> =
            ds.records.iter().map(|r| (law.eval(r.model_params as f64, r.train_tokens as f64).unwrap() / r.test_loss).ln().abs()).collect();
        res.sort_by(f64::total_cmp);
        let delta = 0.5 * (res[res.len() / 2 - 1] + res[res.len() / 2]);
        quadratic += res.iter().filter(|&&r| r <= delta).count();
        linear += res.iter().filter(|&&r| r > delta).count();

        let g = objective_gradient(&coords, &ds, delta).map_err(|e| e.to_string())?;
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-6;
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fp = objective(&FitCoords::from_slice(&xp).to_law(), &ds, delta).unwrap();
            let fm = objective(&FitCoords::from_slice(&xm).to_law(), &ds, delta).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let rel = (g[i] - fd).abs() / scale;
            worst = worst.max(rel);
            ensure(rel <= 1e-5, || format!("config {k}, coordinate {i}: analytic {} vs FD {fd}", g[i]))?;
        }
    }
    ensure(quadratic > 0 && linear > 0, || "one Huber branch never exercised".into())?;
    Ok(format!("100 configs, worst relative error {worst:.2e}; {quadratic} quadratic / {linear} linear residuals"))
}

fn argmin_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (base, eq) = frontiers();
    let mut laws = vec![(baseline_law(), base), (equivariant_law(), eq)];
    for _ in 0..5 {
        let law = ScalingLaw::new(
            rng.random_range(-3.0f64..6.0).exp(),
            rng.random_range(-3.0f64..6.0).exp(),
            rng.random_range(0.0..1e-3),
            rng.random_range(0.2..1.2),
            rng.random_range(0.2..1.2),
        )
        .unwrap();
        let xi = rng.random_range(4.0..100.0);
        laws.push((law, derive_frontier(&law, xi).unwrap()));
    }
    let mut checked = 0;
    let mut worst_gap = f64::INFINITY;
    for (law, fr) in &laws {
        let mut budgets = 0;
        while budgets < 10 {
            let c = 10f64.powf(rng.random_range(14.0..24.0));
            let (n_star, d_star) = (fr.optimal_params(c), fr.optimal_tokens(c));
            // The grid must stay inside N, D >= 1.
            if n_star / 100.0 < 1.0 || d_star / 100.0 < 1.0 {
                continue;
            }
            budgets += 1;
            let l_star = law.eval(n_star, d_star).unwrap();
            ensure((fr.optimal_loss(c) / l_star - 1.0).abs() <= 1e-9, || format!("L*({c:e}) disagrees with eval_law"))?;
            for i in 0..100 {
                let n = n_star * 10f64.powf(-2.0 + 4.0 * i as f64 / 99.0);
                let l = law.eval(n, c / (fr.xi * n)).unwrap();
                ensure(l_star <= l * (1.0 + 1e-9), || format!("grid point N={n:e} beats N*={n_star:e} at C={c:e}: {l} < {l_star}"))?;
                worst_gap = worst_gap.min(l / l_star - 1.0);
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} (law, budget) pairs; smallest grid excess {worst_gap:.2e}"))
}

fn loo_oracle() -> Outcome {
    let ds = generate_synthetic(&synthetic(baseline_law(), 12, 0.02, 77)).unwrap();
    let candidates = FitConfig::candidates(&[1e-3, 1e-1], &[OffsetMode::FixedZero, OffsetMode::Free]);
    let outcome = loo_cv(&ds, &candidates).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (c, config) in candidates.iter().enumerate() {
        let mut total = 0.0;
        for i in 0..ds.len() {
            let kept: Vec<_> = ds.records.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r.clone()).collect();
            let fold = ExperimentDataset::from_records(kept).unwrap();
            let law = fit(&fold, config).map_err(|e| e.to_string())?.law;
            let r = &ds.records[i];
            total += (law.eval(r.model_params as f64, r.train_tokens as f64).unwrap().ln() - r.test_loss.ln()).abs();
        }
        let brute = total / ds.len() as f64;
        let rel = (outcome.scores[c] - brute).abs() / brute;
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || format!("candidate {c}: loo_cv {} vs loop {brute}", outcome.scores[c]))?;
    }
    Ok(format!("4 candidates x 12 folds, worst relative difference {worst:.1e}, chosen index {}", outcome.chosen_index))
}

fn bootstrap_determinism() -> Outcome {
    let ds = generate_synthetic(&synthetic(baseline_law(), 30, 0.05, 8)).unwrap();
    let options = BootstrapOptions::new(200, 42, BASELINE_XI);
    let config = FitConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| bootstrap_laws(&ds, &config, &options).unwrap())
    };
    let serial = run(1);
    for threads in [2, 4, 7] {
        ensure(run(threads) == serial, || format!("{threads}-thread summary differs from serial"))?;
    }
    ensure(bootstrap_laws(&ds, &config, &options).unwrap() == serial, || "default pool differs".into())?;
    Ok("200 resamples identical at 1, 2, 4, 7 threads and the default pool".into())
}

/// Points per synthetic dataset in the coverage trials.
const COVERAGE_POINTS: usize = 40;

fn bootstrap_coverage() -> Outcome {
    let law = baseline_law();
    let mut covered = 0;
    for trial in 0..50u64 {
        let ds = generate_synthetic(&synthetic(law, COVERAGE_POINTS, 0.05, 5000 + trial)).unwrap();
        let s = bootstrap_laws(&ds, &FitConfig::default(), &BootstrapOptions::new(1000, trial, BASELINE_XI)).map_err(|e| e.to_string())?;
        let (_, lo, hi) = s.get("alpha").unwrap();
        if lo <= law.alpha && law.alpha <= hi {
            covered += 1;
        }
    }
    ensure(covered >= 42, || format!("alpha covered in {covered}/50 trials"))?;
    Ok(format!("alpha covered in {covered}/50 trials"))
}

fn allocation_slopes() -> Outcome {
    let (base, eq) = frontiers();
    let spec = PlotSpec {
        x_range: Some((1e16, 1e19)),
        ..PlotSpec::new(
            PlotKind::Allocation,
            vec![
                PlotInput::Frontier { label: "baseline".into(), frontier: base },
                PlotInput::Frontier { label: "equivariant".into(), frontier: eq },
            ],
        )
    };
    let svg = render_plot(&spec).map_err(|e| e.to_string())?;
    let axes = plot_areas(&svg);
    ensure(axes.len() == 1, || format!("{} plot areas", axes.len()))?;
    let mut detail = Vec::new();
    for ((series, pts), (fr, published)) in curves(&svg).iter().zip([(base, 0.294), (eq, 0.678)]) {
        ensure(pts.len() >= 200, || format!("{series}: {} samples", pts.len()))?;
        let s = curve_log_slope(&axes[0], pts);
        ensure((s - fr.a).abs() <= 0.01 && (s - published).abs() <= 0.01, || format!("{series}: slope {s} vs a = {}", fr.a))?;
        detail.push(format!("{series} slope {s:.4} (a = {:.4})", fr.a));
    }
    ensure(detail.len() == 2, || "expected two curves".into())?;
    Ok(detail.join(", "))
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv: Vec<String> =
        std::iter::once("scalaw".to_string()).chain(args.iter().map(|a| a.replace("{dir}", dir.to_str().unwrap()))).collect();
    let code = run_cli_with(argv, &mut out, &mut err);
    ensure(code == 0, || format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)))
}

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let spec = synthetic(baseline_law(), 30, 0.05, 2024);
    std::fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    cli(dir, &["synth", "--spec", "{dir}/spec.json", "--out", "{dir}/runs.csv"])?;
    cli(dir, &["fit", "--data", "{dir}/runs.csv", "--delta", "0.001", "--offset", "zero", "--out", "{dir}/law.json"])?;
    cli(
        dir,
        &[
            "bootstrap",
            "--data",
            "{dir}/runs.csv",
            "--n",
            "1000",
            "--seed",
            "9",
            "--out",
            "{dir}/bootstrap.json",
            "--table-csv",
            "{dir}/table.csv",
        ],
    )?;
    cli(dir, &["frontier", "--law", "{dir}/law.json", "--xi", "6", "--budgets", "1e16..1e19:7", "--out", "{dir}/frontier.json"])?;
    cli(dir, &["plot", "--kind", "compute_frontier", "--inputs", "{dir}/frontier.json,{dir}/runs.csv", "--out", "{dir}/frontier.svg"])?;
    cli(
        dir,
        &["plot", "--kind", "allocation", "--inputs", "{dir}/frontier.json", "--x-range", "1e16,1e19", "--out", "{dir}/allocation.svg"],
    )?;
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    Ok(files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())).collect())
}

fn reproducible_pipeline() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    ensure(first.len() == 8, || format!("{} artifacts", first.len()))?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical: {}", first.len(), first.iter().map(|f| f.0.as_str()).collect::<Vec<_>>().join(", ")))
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Check; 11] = [
        ("1  frontier coefficients from the published central fits", derived_rows),
        ("2  baseline/equivariant optimal-loss ratio in [1.7, 2.3]", loss_gap),
        ("3  noiseless recovery from the default start grid", noiseless_recovery),
        ("4  noisy recovery over 10 seeds", noisy_recovery),
        ("5  analytic gradient vs central differences", gradient_check),
        ("6  closed-form allocation minimizes loss on iso-FLOP grids", argmin_property),
        ("7  leave-one-out scores vs brute-force refits", loo_oracle),
        ("8a bootstrap determinism across thread counts", bootstrap_determinism),
        ("8b bootstrap 95% coverage of alpha [slow]", bootstrap_coverage),
        ("9  allocation plot slopes", allocation_slopes),
        ("10 seeded pipeline reproducibility", reproducible_pipeline),
    ];
    let only = std::env::var("SCALAW_ACCEPTANCE_ONLY").ok();
    let mut failed = 0;
    for (name, check) in criteria {
        if only.as_deref().is_some_and(|o| !o.split(',').any(|id| name.split_whitespace().next() == Some(id.trim()))) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{name}] ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{name}] ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
