//! Acceptance gate. Runs every criterion in order and prints one line each.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nnsubspace::model::{CountingModel, LinearFunction, NetworkQoi, QuadraticFunction};
use nnsubspace::netcore::{self, Dataset, DenseNetwork, QoiSpec, ScoreKind, SyntheticSpec, TrainConfig};
use nnsubspace::numkit::{dot, norm, sym_eig, Mat, RandomSource, EIG_TOLERANCE};
use nnsubspace::propagate::{self, PropagationConfig};
use nnsubspace::subspace::{self, NoiseModel};
use nnsubspace::surface;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sample_budget() -> Outcome {
    let m = subspace::sample_count(10.0, 10.0, 784).map_err(|e| e.to_string())?;
    check(m == 667, format!("M(10, 10, 784) = {m}"))
}

fn linear_oracle() -> Outcome {
    let d = 50;
    let mut rng = RandomSource::new(11);
    let a = rng.gaussian(d);
    let model = LinearFunction {
        coefficients: a.clone(),
        offset: 0.3,
    };
    let expected = Mat::outer(&a, &a);
    let unit: Vec<f64> = a.iter().map(|v| v / norm(&a)).collect();
    let noise = NoiseModel::unbounded(rng.gaussian(d), 1.0).unwrap();
    let (mut worst_c, mut worst_ratio, mut worst_align) = (0.0f64, 0.0f64, 1.0f64);
    for m in [1, 2, 17, 200] {
        let (c, _) = subspace::estimate_c(&model, &noise, m, &mut RandomSource::new(m as u64)).unwrap();
        worst_c = worst_c.max(c.sub(&expected).unwrap().frobenius_norm() / expected.frobenius_norm());
        let spectrum = subspace::decompose(&c, m).unwrap();
        worst_ratio = worst_ratio.max(spectrum.eigenvalues[1] / spectrum.eigenvalues[0]);
        worst_align = worst_align.min(dot(&spectrum.direction(0), &unit).abs());
    }
    check(
        worst_c <= 1e-10 && worst_ratio <= 1e-10 && worst_align >= 1.0 - 1e-10,
        format!(
            "‖C − aaᵀ‖/‖aaᵀ‖ = {worst_c:.2e}, λ₂/λ₁ = {worst_ratio:.2e}, alignment = 1 − {:.2e}",
            1.0 - worst_align
        ),
    )
}

fn quadratic_oracle() -> Outcome {
    let d = 10;
    let scales: Vec<f64> = (0..d).map(|i| 4.0 * 0.5f64.powi(i)).collect();
    let model = QuadraticFunction { scales: scales.clone() };
    let noise = NoiseModel::unbounded(vec![0.0; d as usize], 1.0).unwrap();
    let m = 10_000;
    let (c, _) = subspace::estimate_c(&model, &noise, m, &mut RandomSource::new(3)).unwrap();
    let spectrum = subspace::decompose(&c, m).unwrap();
    let checked = 4;
    let mut worst_rel = 0.0f64;
    let mut worst_align = 1.0f64;
    for (i, a) in scales.iter().enumerate().take(checked) {
        let exact = a.powi(4);
        worst_rel = worst_rel.max((spectrum.eigenvalues[i] - exact).abs() / exact);
        worst_align = worst_align.min(spectrum.direction(i)[i].abs());
    }
    check(
        worst_rel <= 0.10 && worst_align >= 0.99,
        format!("top {checked} eigenvalues: max rel err {worst_rel:.4}, min axis alignment {worst_align:.6}"),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = RandomSource::new(5);
    let mut worst = 0.0f64;
    let pairs = 24;
    for k in 0..pairs {
        let d = 3 + rng.index(14);
        let mut sizes = vec![d];
        for _ in 0..1 + rng.index(2) {
            sizes.push(4 + rng.index(12));
        }
        sizes.push(2 + rng.index(5));
        let net = DenseNetwork::random(&sizes, &mut rng).unwrap();
        let kind = if k % 2 == 0 {
            ScoreKind::SoftmaxProbability
        } else {
            ScoreKind::Logit
        };
        let spec = QoiSpec::new(&net, rng.index(net.output_dim()), kind).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let grad = net.grad_qoi(&x, &spec).unwrap();
        let fd = common::fd_gradient(|p| net.qoi(p, &spec).unwrap(), &x, 1e-5);
        worst = worst.max(common::max_relative_error(&grad, &fd));
    }
    check(
        worst < 1e-6,
        format!("{pairs} net/input pairs, max relative error {worst:.2e}"),
    )
}

fn eigensolver() -> Outcome {
    let mut rng = RandomSource::new(13);
    let (mut worst_rec, mut worst_orth) = (0.0f64, 0.0f64);
    for k in 0..100 {
        let n = 1 + k * 49 / 99;
        let a = common::random_symmetric(n, &mut rng);
        let eig = sym_eig(&a, EIG_TOLERANCE).map_err(|e| e.to_string())?;
        let w = &eig.eigenvectors;
        let lw = w.matmul(&Mat::from_diag(&eig.eigenvalues)).unwrap();
        let rec = lw.matmul(&w.transpose()).unwrap();
        worst_rec = worst_rec.max(rec.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm());
        let wtw = w.transpose().matmul(w).unwrap();
        let orth = wtw
            .sub(&Mat::identity(n))
            .unwrap()
            .as_slice()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        worst_orth = worst_orth.max(orth);
    }
    let mut worst_oracle = 0.0f64;
    for _ in 0..20 {
        let a = common::random_symmetric(5, &mut rng);
        let oracle = common::char_poly_eigenvalues(&a).ok_or("characteristic polynomial roots not separated")?;
        let eig = sym_eig(&a, EIG_TOLERANCE).unwrap();
        for (x, y) in eig.eigenvalues.iter().zip(&oracle) {
            worst_oracle = worst_oracle.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    check(
        worst_rec <= 1e-8 && worst_orth <= 1e-10 && worst_oracle <= 1e-8,
        format!(
            "100 matrices n ≤ 50: reconstruction {worst_rec:.2e}, orthogonality {worst_orth:.2e}; 5×5 char-poly oracle {worst_oracle:.2e}"
        ),
    )
}

fn polynomial_recovery() -> Outcome {
    let mut rng = RandomSource::new(17);
    let truth = [0.7, -1.3, 2.1, 0.45, -0.8, 1.6];
    // Monomials for two variables up to degree 2: 1, x1, x2, x1², x1x2, x2².
    let f = |x: &[f64]| {
        truth[0]
            + truth[1] * x[0]
            + truth[2] * x[1]
            + truth[3] * x[0] * x[0]
            + truth[4] * x[0] * x[1]
            + truth[5] * x[1] * x[1]
    };
    let points: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)])
        .collect();
    let values: Vec<f64> = points.iter().map(|p| f(p)).collect();
    let fitted = surface::fit(&points, &values, 2).map_err(|e| e.to_string())?;
    let coef_err = fitted
        .coefficients
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let r2_err = (fitted.r_squared - 1.0).abs();
    check(
        coef_err <= 1e-9 && r2_err <= 1e-12,
        format!("max coefficient error {coef_err:.2e}, |R² − 1| = {r2_err:.2e}"),
    )
}

struct Desk {
    network: DenseNetwork,
    test: Dataset,
}

impl Desk {
    fn model(&self, x0: &[f64]) -> NetworkQoi<'_> {
        let spec = QoiSpec::predicted_at(&self.network, x0, ScoreKind::SoftmaxProbability).unwrap();
        NetworkQoi::new(&self.network, spec)
    }
}

fn rs_vs_mc(desk: &Desk) -> Outcome {
    let sigma = 0.1;
    let images = 10;
    let cfg = PropagationConfig {
        sigma,
        ..Default::default()
    };
    let (mut worst_mean, mut worst_std) = (0.0f64, 0.0f64);
    for i in 0..images {
        let x0 = desk.test.inputs()[i].clone();
        let model = desk.model(&x0);
        let noise = NoiseModel::new(x0, sigma, 0.0, 1.0).unwrap();
        let mut outcome = propagate::run_workflow(&model, &noise, &cfg).map_err(|e| e.to_string())?;
        let mc =
            propagate::direct_mc(&model, &noise, 50_000, 50, &mut RandomSource::new(99)).map_err(|e| e.to_string())?;
        outcome.report.attach_mc(mc);
        let cmp = outcome.report.comparison.unwrap();
        worst_mean = worst_mean.max(cmp.rel_err_mean);
        worst_std = worst_std.max(cmp.rel_err_std);
    }
    check(
        worst_mean <= 0.05 && worst_std <= 0.15,
        format!("{images} inputs, σ = {sigma}: worst mean rel err {worst_mean:.4}, worst std rel err {worst_std:.4}"),
    )
}

fn cost_claim() -> Outcome {
    let spec = SyntheticSpec {
        dim: 784,
        classes: 10,
        train_count: 500,
        test_count: 10,
        spread: 0.5,
        lo: 0.0,
        hi: 1.0,
        seed: 21,
    };
    let (train, test) = netcore::synthetic_blobs(&spec).unwrap();
    let network = netcore::train_sgd(
        &train,
        &TrainConfig {
            hidden: vec![16],
            epochs: 3,
            learning_rate: 0.05,
            batch_size: 32,
            seed: 1,
        },
    )
    .unwrap()
    .network;
    let x0 = test.inputs()[0].clone();
    let qoi = QoiSpec::predicted_at(&network, &x0, ScoreKind::SoftmaxProbability).unwrap();
    let model = CountingModel::new(NetworkQoi::new(&network, qoi));
    let noise = NoiseModel::new(x0, 0.1, 0.0, 1.0).unwrap();
    let cfg = PropagationConfig {
        sigma: 0.1,
        ..Default::default()
    };
    let mut outcome = propagate::run_workflow(&model, &noise, &cfg).map_err(|e| e.to_string())?;
    let workflow_calls = model.cost();
    let mc50 = propagate::direct_mc(&model, &noise, 50_000, 50, &mut RandomSource::new(1)).unwrap();
    let mc100 = propagate::direct_mc(&model, &noise, 100_000, 50, &mut RandomSource::new(1)).unwrap();
    let report = &outcome.report;
    let expected_m = (100.0 * 784f64.ln()).ceil() as u64;
    let ok_counts = workflow_calls.forward_calls == expected_m
        && workflow_calls.gradient_calls == expected_m
        && report.rs_stats.cost == workflow_calls
        && report.stage_costs.propagation.evaluations() == 0
        && mc50.cost.evaluations() == 50_000
        && mc50.cost.gradient_calls == 0;
    outcome.report.attach_mc(mc50);
    let r50 = outcome.report.comparison.unwrap().cost_ratio_unweighted;
    outcome.report.attach_mc(mc100);
    let r100 = outcome.report.comparison.unwrap().cost_ratio_unweighted;
    let w50 = 50_000.0 / workflow_calls.weighted();
    check(
        ok_counts && r50 >= 70.0 && r100 >= 100.0,
        format!(
            "workflow {} evaluations ({} with gradient, M = {expected_m}); ratio {r50:.1} at N = 5e4, {r100:.1} at N = 1e5 (weighted {w50:.1})",
            workflow_calls.forward_calls, workflow_calls.gradient_calls
        ),
    )
}

fn adversarial(desk: &Desk) -> Outcome {
    let (sigma, epsilon, inputs) = (0.1, 0.5, 20);
    let cfg = PropagationConfig {
        sigma,
        ..Default::default()
    };
    let mut wins = 0;
    for i in 0..inputs {
        let x0 = desk.test.inputs()[i].clone();
        let model = desk.model(&x0);
        let noise = NoiseModel::new(x0, sigma, 0.0, 1.0).unwrap();
        let (_, active, _) =
            propagate::estimate_subspace(&model, &noise, &cfg, &RandomSource::new(0)).map_err(|e| e.to_string())?;
        let outcome = subspace::adversarial_perturb(&model, &noise, &active, epsilon).map_err(|e| e.to_string())?;
        let mut random = subspace::random_direction_changes(&model, &noise, epsilon, 200, &mut RandomSource::new(2))
            .map_err(|e| e.to_string())?;
        random.sort_by(f64::total_cmp);
        // Nearest-rank 95th percentile of 200 values.
        let p95 = random[189];
        if (outcome.score_after - outcome.score_before).abs() > p95 {
            wins += 1;
        }
    }
    check(
        wins * 5 >= inputs * 4,
        format!("ε = {epsilon}: w₁ beats the random 95th percentile on {wins}/{inputs} inputs"),
    )
}

fn near_linearity(desk: &Desk) -> Outcome {
    let (sigma, inputs) = (0.05, 20);
    let cfg = PropagationConfig {
        sigma,
        heldout_count: 500,
        rs_sample_count: 2000,
        ..Default::default()
    };
    let mut scores = Vec::new();
    for i in 0..inputs {
        let x0 = desk.test.inputs()[i].clone();
        let model = desk.model(&x0);
        let noise = NoiseModel::new(x0, sigma, 0.0, 1.0).unwrap();
        let outcome = propagate::run_workflow(&model, &noise, &cfg).map_err(|e| e.to_string())?;
        scores.push(outcome.report.heldout_r_squared.unwrap());
    }
    let passing = scores.iter().filter(|&&r| r >= 0.8).count();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        passing * 5 >= inputs * 4,
        format!("σ = {sigma}: held-out R² ≥ 0.8 on {passing}/{inputs} inputs (min {min:.3})"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{
  "dataset": {"synthetic": {"dim": 32, "classes": 3, "train_count": 600, "test_count": 20, "spread": 0.4, "seed": 5}},
  "weights": "net.bin",
  "train": {"hidden": [16, 16], "epochs": 5, "learning_rate": 0.05, "batch_size": 32, "seed": 3},
  "image_index": 4,
  "propagation": {"sigma": 0.1, "rs_sample_count": 5000, "heldout_count": 200}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let run = |command: &str, out: &Path| -> Result<(), String> {
        let status = Command::new(env!("CARGO_BIN_EXE_nnsubspace"))
            .args([command, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        if status.status.success() {
            Ok(())
        } else {
            Err(format!("{command} failed: {}", String::from_utf8_lossy(&status.stderr)))
        }
    };
    let (first, second) = (dir.path().join("a"), dir.path().join("b"));
    run("train", dir.path())?;
    run("analyze", &first)?;
    run("analyze", &second)?;
    let mut names: Vec<_> = fs::read_dir(&first)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        if fs::read(first.join(name)).ok() != fs::read(second.join(name)).ok() {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    let has_report = names.iter().any(|n| n == "report.json");
    let csvs = names.iter().filter(|n| n.to_string_lossy().ends_with(".csv")).count();
    check(
        differing.is_empty() && has_report && csvs >= 4,
        format!("{} files compared ({csvs} CSV), differing: {differing:?}", names.len()),
    )
}

fn main() {
    let started = Instant::now();
    let mut passed: Vec<bool> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] criterion {n:>2} {name}: {detail} ({secs:.1}s)");
        passed.push(outcome.is_ok());
    };

    record(1, "sample budget", &mut sample_budget);
    record(2, "linear oracle subspace", &mut linear_oracle);
    record(3, "quadratic oracle spectrum", &mut quadratic_oracle);
    record(4, "gradient correctness", &mut gradient_check);
    record(5, "eigensolver", &mut eigensolver);
    record(6, "exact polynomial recovery", &mut polynomial_recovery);
    let desk = panic::catch_unwind(|| {
        let (network, test) = common::desk_model();
        Desk { network, test }
    });
    match &desk {
        Ok(desk) => {
            record(7, "surface vs direct Monte Carlo", &mut || rs_vs_mc(desk));
        }
        Err(_) => record(7, "surface vs direct Monte Carlo", &mut || {
            Err("desk model training failed".into())
        }),
    }
    record(8, "evaluation cost", &mut cost_claim);
    match &desk {
        Ok(desk) => {
            record(9, "adversarial effectiveness", &mut || adversarial(desk));
            record(10, "near-linearity at small noise", &mut || near_linearity(desk));
        }
        Err(_) => {
            record(9, "adversarial effectiveness", &mut || {
                Err("desk model training failed".into())
            });
            record(10, "near-linearity at small noise", &mut || {
                Err("desk model training failed".into())
            });
        }
    }
    record(11, "determinism", &mut determinism);

    let failed = passed.iter().filter(|ok| !**ok).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        passed.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
