use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::{CliError, RunConfig};
use crate::export;
use crate::model::{NetworkQoi, ScalarModel};
use crate::netcore::{self, DenseNetwork, QoiSpec};
use crate::numkit::{NeumaierSum, RandomSource};
use crate::propagate::{self, PropagateError};
use crate::subspace::{self, ActiveSubspace, NoiseModel};

const VERSION: &str = concat!("nnsubspace ", env!("CARGO_PKG_VERSION"));

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", out.display())))
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn workflow_error(e: PropagateError) -> CliError {
    let (stage, message) = match e {
        PropagateError::Config(_) => return CliError::Config(e.to_string()),
        PropagateError::Subspace(inner) => ("subspace estimation", inner.to_string()),
        PropagateError::Surface(inner) => ("response surface", inner.to_string()),
        PropagateError::Propagation(inner) => ("surrogate propagation", inner),
        PropagateError::MonteCarlo(inner) => ("direct Monte Carlo", inner.to_string()),
    };
    CliError::Workflow { stage, message }
}

fn load_network(cfg: &RunConfig) -> Result<DenseNetwork, CliError> {
    if !cfg.weights.exists() {
        return Err(CliError::Config(format!(
            "weights file not found: {}",
            cfg.weights.display()
        )));
    }
    netcore::load_weights(&cfg.weights)
        .map_err(|e| CliError::Config(format!("cannot load {}: {e}", cfg.weights.display())))
}

/// Network, noise model and tracked class for the configured center.
struct Setup {
    network: DenseNetwork,
    noise: NoiseModel,
    qoi: QoiSpec,
}

impl Setup {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let network = load_network(cfg)?;
        let (x0, (lo, hi)) = cfg.center()?;
        if x0.len() != network.input_dim() {
            return Err(CliError::Config(format!(
                "network expects {} inputs but the dataset has {}",
                network.input_dim(),
                x0.len()
            )));
        }
        let kind = cfg.propagation.score_kind;
        let qoi = match cfg.propagation.class_index {
            Some(k) => QoiSpec::new(&network, k, kind),
            None => QoiSpec::predicted_at(&network, &x0, kind),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let noise = NoiseModel::new(x0, cfg.propagation.sigma, lo, hi).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { network, noise, qoi })
    }

    fn model(&self) -> NetworkQoi<'_> {
        NetworkQoi::new(&self.network, self.qoi)
    }

    fn subspace(&self, cfg: &RunConfig) -> Result<(subspace::Spectrum, ActiveSubspace), CliError> {
        let base = RandomSource::new(cfg.propagation.seed);
        let (spectrum, active, _) = propagate::estimate_subspace(&self.model(), &self.noise, &cfg.propagation, &base)
            .map_err(workflow_error)?;
        Ok((spectrum, active))
    }
}

pub fn train(cfg: &RunConfig, _out: &Path) -> Result<(), CliError> {
    let (train, test) = cfg.load_datasets()?;
    let train_cfg = cfg
        .train
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `train` section".into()))?;
    let outcome = netcore::train_sgd(&train, train_cfg).map_err(|e| CliError::Workflow {
        stage: "training",
        message: e.to_string(),
    })?;
    let test_accuracy = if test.is_empty() {
        None
    } else {
        Some(
            netcore::accuracy(&outcome.network, &test).map_err(|e| CliError::Workflow {
                stage: "evaluation",
                message: e.to_string(),
            })?,
        )
    };
    if let Some(parent) = cfg.weights.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_out(parent)?;
    }
    netcore::save_weights(&outcome.network, &cfg.weights).map_err(|e| CliError::Io(e.to_string()))?;
    let summary = json!({
        "train_accuracy": outcome.train_accuracy,
        "test_accuracy": test_accuracy,
        "epochs": train_cfg.epochs,
        "final_loss": outcome.epoch_losses.last(),
        "weights": cfg.weights,
    });
    println!("{}", serde_json::to_string(&summary).expect("serializable"));
    Ok(())
}

pub fn analyze(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let setup = Setup::new(cfg)?;
    prepare_out(out)?;
    let outcome = propagate::run_workflow(&setup.model(), &setup.noise, &cfg.propagation).map_err(workflow_error)?;

    write(
        out,
        "report.json",
        &to_json(&json!({
            "version": VERSION,
            "seed": cfg.propagation.seed,
            "qoi": setup.qoi,
            "config": cfg,
            "report": outcome.report,
        })),
    )?;
    write(
        out,
        "histogram.csv",
        &export::histogram_csv(&outcome.report.rs_stats.histogram),
    )?;
    if let Some(spectrum) = &outcome.spectrum {
        write(out, "spectrum.csv", &export::spectrum_csv(spectrum))?;
        write(
            out,
            "eigenvectors.csv",
            &export::eigenvectors_csv(&spectrum.eigenvectors),
        )?;
    }
    if let Some(samples) = &outcome.samples {
        write(
            out,
            "summary.csv",
            &export::summary_csv(&outcome.active_variables, &samples.values()),
        )?;
    }
    if let Some(surface) = &outcome.report.surface {
        write(out, "surface.json", &(surface.to_json() + "\n"))?;
        let (lo, hi) = outcome
            .active_variables
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x[0]), hi.max(x[0]))
            });
        write(out, "curve.csv", &export::curve_csv(surface, lo, hi, 101))?;
    }
    Ok(())
}

pub fn compare(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    if cfg.propagation.seed == cfg.propagation.mc_seed {
        eprintln!(
            "warning: seed collision: workflow and direct Monte Carlo both use seed {}",
            cfg.propagation.seed
        );
        return Err(CliError::Config(
            "propagation.seed and propagation.mc_seed must differ".into(),
        ));
    }
    let setup = Setup::new(cfg)?;
    prepare_out(out)?;
    let model = setup.model();
    let mut outcome = propagate::run_workflow(&model, &setup.noise, &cfg.propagation).map_err(workflow_error)?;
    let mc = propagate::direct_mc(
        &model,
        &setup.noise,
        cfg.propagation.mc_sample_count,
        cfg.propagation.histogram_bins,
        &mut RandomSource::new(cfg.propagation.mc_seed),
    )
    .map_err(workflow_error)?;
    outcome.report.attach_mc(mc);
    let report = &outcome.report;
    write(
        out,
        "compare.json",
        &to_json(&json!({
            "version": VERSION,
            "qoi": setup.qoi,
            "config": cfg,
            "rank": report.rank,
            "gradient_sample_count": report.gradient_sample_count,
            "rs_stats": report.rs_stats,
            "mc_stats": report.mc_stats,
            "comparison": report.comparison,
        })),
    )
}

/// Nearest-rank percentile of unsorted data.
fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

pub fn adversarial(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let adv = cfg
        .adversarial
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `adversarial` section".into()))?;
    if !(adv.epsilon >= 0.0 && adv.epsilon.is_finite()) {
        return Err(CliError::Config(format!(
            "epsilon {} must be finite and >= 0",
            adv.epsilon
        )));
    }
    let setup = Setup::new(cfg)?;
    prepare_out(out)?;
    let (_, active) = setup.subspace(cfg)?;
    let model = setup.model();
    let outcome =
        subspace::adversarial_perturb(&model, &setup.noise, &active, adv.epsilon).map_err(|e| CliError::Workflow {
            stage: "adversarial perturbation",
            message: e.to_string(),
        })?;
    let change = (outcome.score_before - outcome.score_after).abs();
    let random_p95 = if adv.random_directions > 0 {
        let mut changes = subspace::random_direction_changes(
            &model,
            &setup.noise,
            adv.epsilon,
            adv.random_directions,
            &mut RandomSource::new(adv.seed),
        )
        .map_err(|e| CliError::Workflow {
            stage: "random baseline",
            message: e.to_string(),
        })?;
        Some(percentile(&mut changes, 0.95))
    } else {
        None
    };
    write(
        out,
        "adversarial.json",
        &to_json(&json!({
            "version": VERSION,
            "qoi": setup.qoi,
            "epsilon": outcome.epsilon,
            "sign": outcome.sign,
            "rank": active.rank,
            "score_before": outcome.score_before,
            "score_after": outcome.score_after,
            "score_change": change,
            "random_directions": adv.random_directions,
            "random_p95": random_p95,
            "exceeds_random_p95": random_p95.map(|p| change > p),
            "predicted_after": setup.network.predict(&outcome.x_adv).ok(),
        })),
    )?;
    write(out, "original.csv", &export::feature_csv("value", setup.noise.center()))?;
    write(out, "perturbed.csv", &export::feature_csv("value", &outcome.x_adv))
}

pub fn attribute(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let setup = Setup::new(cfg)?;
    let d = setup.noise.dim();
    if let Some(r) = cfg.attribution.rank {
        if r == 0 || r > d {
            return Err(CliError::Config(format!("attribution rank {r} outside [1, {d}]")));
        }
    }
    prepare_out(out)?;
    let (spectrum, active) = setup.subspace(cfg)?;
    let rank = cfg.attribution.rank.unwrap_or(active.rank);
    let scores = subspace::attribution(&spectrum, rank).map_err(|e| CliError::Workflow {
        stage: "attribution",
        message: e.to_string(),
    })?;
    let eigen_sum = spectrum.eigenvalues[..rank]
        .iter()
        .copied()
        .collect::<NeumaierSum>()
        .value();
    let score_sum = scores.iter().copied().collect::<NeumaierSum>().value();
    write(out, "attribution.csv", &export::feature_csv("score", &scores))?;
    write(
        out,
        "attribution.json",
        &to_json(&json!({
            "version": VERSION,
            "qoi": setup.qoi,
            "rank": rank,
            "selected_rank": active.rank,
            "clear_gap": active.clear_gap,
            "eigenvalue_sum": eigen_sum,
            "score_sum": score_sum,
            "top_eigenvalues": &spectrum.eigenvalues[..spectrum.eigenvalues.len().min(10)],
            "model_dimension": setup.model().dim(),
        })),
    )
}
