//! End-to-end propagation: subspace estimation, surface fitting, surrogate
//! sampling, and the direct Monte Carlo baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CountingModel, EvaluationCost, ScalarModel};
use crate::netcore::ScoreKind;
use crate::numkit::{NeumaierSum, RandomSource};
use crate::subspace::{self, ActiveSubspace, GradientSampleSet, NoiseModel, Spectrum, SubspaceError};
use crate::surface::{self, PolySurface, SurfaceError};

#[derive(Debug, Error)]
pub enum PropagateError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("subspace estimation: {0}")]
    Subspace(#[source] SubspaceError),
    #[error("response surface: {0}")]
    Surface(#[source] SurfaceError),
    #[error("surrogate propagation: {0}")]
    Propagation(String),
    #[error("direct Monte Carlo: {0}")]
    MonteCarlo(#[source] SubspaceError),
}

/// Denominator floor for relative errors.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub gap_threshold: f64,
    pub r_max: usize,
    pub degree: usize,
    pub rs_sample_count: usize,
    pub mc_sample_count: usize,
    /// Extra network evaluations used only to score the surface out of sample; 0 disables.
    pub heldout_count: usize,
    pub seed: u64,
    pub mc_seed: u64,
    pub score_kind: ScoreKind,
    /// Class tracked by the QoI; defaults to the prediction at the center.
    pub class_index: Option<usize>,
    pub histogram_bins: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 10.0,
            sigma: 0.0,
            gap_threshold: 10.0,
            r_max: 5,
            degree: 2,
            rs_sample_count: 50_000,
            mc_sample_count: 50_000,
            heldout_count: 0,
            seed: 0,
            mc_seed: 1,
            score_kind: ScoreKind::SoftmaxProbability,
            class_index: None,
            histogram_bins: 50,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<(), PropagateError> {
        let fail = |m: &str| Err(PropagateError::Config(m.into()));
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return fail("alpha and beta must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail("sigma must be finite and non-negative");
        }
        if !(self.gap_threshold > 1.0) {
            return fail("gap_threshold must exceed 1");
        }
        if self.r_max == 0 || self.degree == 0 || self.rs_sample_count == 0 || self.histogram_bins == 0 {
            return fail("r_max, degree, rs_sample_count and histogram_bins must be >= 1");
        }
        if self.mc_sample_count < 2 {
            return fail("mc_sample_count must be >= 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Uniform-width bins over `[min, max]`, the last bin closed on the right.
///
/// If every value is identical the result is one degenerate bin `[v, v]`;
/// a range too narrow for distinct edges gets fewer bins.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, PropagateError> {
    if values.is_empty() || bins == 0 {
        return Err(PropagateError::Config("histogram needs values and >= 1 bin".into()));
    }
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(min.is_finite() && max.is_finite()) {
        return Err(PropagateError::Propagation(
            "non-finite value in histogram input".into(),
        ));
    }
    if min == max {
        return Ok(Histogram {
            edges: vec![min, max],
            counts: vec![values.len() as u64],
        });
    }
    // A range only a few ulps wide cannot hold `bins` distinct edges.
    let mut bins = bins;
    let (width, edges) = loop {
        let width = (max - min) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| min + width * i as f64).collect();
        edges.push(max);
        if bins == 1 || edges.windows(2).all(|w| w[0] < w[1]) {
            break (width, edges);
        }
        bins /= 2;
    };
    let mut counts = vec![0u64; bins];
    for &v in values {
        let i = (((v - min) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputStats {
    pub mean: f64,
    /// Population (1/N) standard deviation.
    pub std: f64,
    pub histogram: Histogram,
    pub sample_count: usize,
    pub cost: EvaluationCost,
}

impl OutputStats {
    pub fn from_values(values: &[f64], bins: usize, cost: EvaluationCost) -> Result<Self, PropagateError> {
        let n = values.len() as f64;
        let mean = values.iter().copied().collect::<NeumaierSum>().value() / n;
        let var = values
            .iter()
            .map(|v| (v - mean).powi(2))
            .collect::<NeumaierSum>()
            .value()
            / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            histogram: histogram(values, bins)?,
            sample_count: values.len(),
            cost,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub rel_err_mean: f64,
    pub rel_err_std: f64,
    /// Model evaluations of direct MC over those of the workflow.
    pub cost_ratio_unweighted: f64,
    /// Same ratio with each gradient weighted as two forward passes.
    pub cost_ratio_weighted: f64,
}

pub fn compare(rs: &OutputStats, mc: &OutputStats) -> Comparison {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(RELATIVE_ERROR_FLOOR);
    Comparison {
        rel_err_mean: rel(rs.mean, mc.mean),
        rel_err_std: rel(rs.std, mc.std),
        cost_ratio_unweighted: mc.cost.evaluations() as f64 / rs.cost.evaluations().max(1) as f64,
        cost_ratio_weighted: mc.cost.weighted() / rs.cost.weighted().max(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageCosts {
    /// Gradient sampling plus any held-out validation evaluations.
    pub subspace_and_fit: EvaluationCost,
    /// Surrogate sampling; zero by construction.
    pub propagation: EvaluationCost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationReport {
    pub dimension: usize,
    pub sigma: f64,
    pub gradient_sample_count: usize,
    pub top_eigenvalues: Vec<f64>,
    pub eigenvalue_sum: f64,
    pub rank: Option<usize>,
    pub clear_gap: Option<bool>,
    /// `λ_r / λ_{r+1}`; null when `λ_{r+1}` vanishes.
    pub gap_ratio: Option<f64>,
    pub low_confidence_subspace: bool,
    pub surface: Option<PolySurface>,
    pub heldout_r_squared: Option<f64>,
    pub rs_stats: OutputStats,
    pub mc_stats: Option<OutputStats>,
    pub comparison: Option<Comparison>,
    pub stage_costs: StageCosts,
    pub std_estimator: &'static str,
    /// Set when the workflow skipped subspace estimation.
    pub short_circuit: Option<&'static str>,
}

impl PropagationReport {
    pub fn attach_mc(&mut self, mc: OutputStats) {
        self.comparison = Some(compare(&self.rs_stats, &mc));
        self.mc_stats = Some(mc);
    }
}

/// Everything the workflow produced, for export.
#[derive(Debug, Clone)]
pub struct WorkflowOutcome {
    pub report: PropagationReport,
    pub spectrum: Option<Spectrum>,
    pub subspace: Option<ActiveSubspace>,
    pub samples: Option<GradientSampleSet>,
    /// Active variables of each gradient sample, aligned with `samples`.
    pub active_variables: Vec<Vec<f64>>,
}

const TOP_EIGENVALUES: usize = 10;

/// Runs the three stages:
///
/// 1. `M = ⌈α·β·ln d⌉` gradient samples, `C`, spectrum, rank;
/// 2. a degree-`p` surface over `Sᵀξ` fitted to the stored sample values;
/// 3. `N_rs` fresh `ξ` draws pushed through projection and surface only.
///
/// Random streams of `cfg.seed`: 0 gradient sampling, 1 surrogate sampling,
/// 2 held-out validation. With `σ = 0` the output is the constant `f(x0)` and
/// the subspace stages are skipped.
pub fn run_workflow<M: ScalarModel + ?Sized>(
    model: &M,
    noise: &NoiseModel,
    cfg: &PropagationConfig,
) -> Result<WorkflowOutcome, PropagateError> {
    cfg.validate()?;
    if (noise.sigma() - cfg.sigma).abs() > 0.0 {
        return Err(PropagateError::Config(format!(
            "noise model sigma {} differs from configured sigma {}",
            noise.sigma(),
            cfg.sigma
        )));
    }
    let d = noise.dim();
    if model.dim() != d {
        return Err(PropagateError::Config(format!(
            "model dimension {} differs from noise dimension {d}",
            model.dim()
        )));
    }
    let base = RandomSource::new(cfg.seed);
    let counted = CountingModel::new(model);

    if cfg.sigma == 0.0 {
        let value = counted
            .value(noise.center())
            .map_err(|e| PropagateError::Propagation(e.to_string()))?;
        let rs_stats = OutputStats::from_values(&vec![value; cfg.rs_sample_count], cfg.histogram_bins, counted.cost())?;
        let report = PropagationReport {
            dimension: d,
            sigma: 0.0,
            gradient_sample_count: 0,
            top_eigenvalues: vec![],
            eigenvalue_sum: 0.0,
            rank: None,
            clear_gap: None,
            gap_ratio: None,
            low_confidence_subspace: false,
            surface: None,
            heldout_r_squared: None,
            rs_stats,
            mc_stats: None,
            comparison: None,
            stage_costs: StageCosts {
                subspace_and_fit: counted.cost(),
                propagation: EvaluationCost::default(),
            },
            std_estimator: "population",
            short_circuit: Some("zero_noise"),
        };
        return Ok(WorkflowOutcome {
            report,
            spectrum: None,
            subspace: None,
            samples: None,
            active_variables: vec![],
        });
    }

    // Stage I
    let (spectrum, active, samples) = estimate_subspace(&counted, noise, cfg, &base)?;
    let m = samples.len();

    // Stage II
    let active_variables: Vec<Vec<f64>> = samples
        .records
        .iter()
        .map(|r| subspace::project(&active, &r.xi))
        .collect::<Result<_, _>>()
        .map_err(PropagateError::Subspace)?;
    let fitted = surface::fit(&active_variables, &samples.values(), cfg.degree).map_err(PropagateError::Surface)?;

    let heldout_r_squared = if cfg.heldout_count > 0 {
        let mut rng = base.derive(2);
        let mut points = Vec::with_capacity(cfg.heldout_count);
        let mut values = Vec::with_capacity(cfg.heldout_count);
        for i in 0..cfg.heldout_count {
            let (xi, x) = subspace::draw_noise(noise, &mut rng);
            values.push(
                counted
                    .value(&x)
                    .map_err(|e| PropagateError::Propagation(format!("held-out sample {i}: {e}")))?,
            );
            points.push(subspace::project(&active, &xi).map_err(PropagateError::Subspace)?);
        }
        Some(surface::r_squared(&fitted, &points, &values).map_err(PropagateError::Surface)?)
    } else {
        None
    };
    let stage_one_cost = counted.cost();

    // Stage III
    let mut rng = base.derive(1);
    let mut values = Vec::with_capacity(cfg.rs_sample_count);
    for _ in 0..cfg.rs_sample_count {
        let (xi, _) = subspace::draw_noise(noise, &mut rng);
        let xr = subspace::project(&active, &xi).map_err(PropagateError::Subspace)?;
        values.push(fitted.eval(&xr).map_err(PropagateError::Surface)?);
    }
    let propagation_cost = EvaluationCost {
        forward_calls: counted.cost().forward_calls - stage_one_cost.forward_calls,
        gradient_calls: counted.cost().gradient_calls - stage_one_cost.gradient_calls,
    };
    let rs_stats = OutputStats::from_values(&values, cfg.histogram_bins, counted.cost())?;

    let report = PropagationReport {
        dimension: d,
        sigma: cfg.sigma,
        gradient_sample_count: m,
        top_eigenvalues: spectrum.eigenvalues.iter().take(TOP_EIGENVALUES).copied().collect(),
        eigenvalue_sum: spectrum.eigenvalues.iter().copied().collect::<NeumaierSum>().value(),
        rank: Some(active.rank),
        clear_gap: Some(active.clear_gap),
        gap_ratio: active.gap_ratio,
        low_confidence_subspace: !active.clear_gap,
        surface: Some(fitted),
        heldout_r_squared,
        rs_stats,
        mc_stats: None,
        comparison: None,
        stage_costs: StageCosts {
            subspace_and_fit: stage_one_cost,
            propagation: propagation_cost,
        },
        std_estimator: "population",
        short_circuit: None,
    };
    Ok(WorkflowOutcome {
        report,
        spectrum: Some(spectrum),
        subspace: Some(active),
        samples: Some(samples),
        active_variables,
    })
}

/// Gradient sampling, decomposition, and rank selection on stream 0 of
/// `base`; the shared first stage of every subspace-based command.
pub fn estimate_subspace<M: ScalarModel + ?Sized>(
    model: &M,
    noise: &NoiseModel,
    cfg: &PropagationConfig,
    base: &RandomSource,
) -> Result<(Spectrum, ActiveSubspace, GradientSampleSet), PropagateError> {
    let d = noise.dim();
    let m = subspace::sample_count(cfg.alpha, cfg.beta, d).map_err(PropagateError::Subspace)?;
    let r_max = cfg.r_max.min(d.saturating_sub(1)).max(1);
    let (c, samples) = subspace::estimate_c(model, noise, m, &mut base.derive(0)).map_err(PropagateError::Subspace)?;
    let spectrum = subspace::decompose(&c, m).map_err(PropagateError::Subspace)?;
    let active = subspace::select_rank(&spectrum, cfg.gap_threshold, r_max).map_err(PropagateError::Subspace)?;
    log::info!(
        "M = {m}, rank {} (gap {:?}, clear {})",
        active.rank,
        active.gap_ratio,
        active.clear_gap
    );
    Ok((spectrum, active, samples))
}

/// Output statistics from `n` noisy inputs evaluated through the full model.
pub fn direct_mc<M: ScalarModel + ?Sized>(
    model: &M,
    noise: &NoiseModel,
    n: usize,
    bins: usize,
    rng: &mut RandomSource,
) -> Result<OutputStats, PropagateError> {
    if n < 2 {
        return Err(PropagateError::Config("direct Monte Carlo needs >= 2 samples".into()));
    }
    let counted = CountingModel::new(model);
    let mut values = Vec::with_capacity(n);
    for sample in 0..n {
        let (_, x) = subspace::draw_noise(noise, rng);
        let v = counted
            .value(&x)
            .map_err(|source| PropagateError::MonteCarlo(SubspaceError::Model { sample, source }))?;
        values.push(v);
    }
    OutputStats::from_values(&values, bins, counted.cost())
}
