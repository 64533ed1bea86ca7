//! Active-subspace estimation from sampled input gradients.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, ScalarModel};
use crate::numkit::{self, Mat, NeumaierSum, NumError, RandomSource};

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model evaluation failed at sample {sample}: {source}")]
    Model {
        sample: usize,
        #[source]
        source: ModelError,
    },
    #[error("non-finite gradient at sample {sample}")]
    NonFiniteGradient { sample: usize },
    #[error("gradient matrix is not positive semi-definite (eigenvalue {eigenvalue:e}, leading {leading:e})")]
    NotPositiveSemidefinite { eigenvalue: f64, leading: f64 },
    #[error("degenerate spectrum: the quantity of interest is locally constant")]
    DegenerateSpectrum,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Numerical(#[from] NumError),
}

/// Number of gradient samples `⌈α·β·ln d⌉`.
pub fn sample_count(alpha: f64, beta: f64, dim: usize) -> Result<usize, SubspaceError> {
    if dim < 2 {
        return Err(SubspaceError::InvalidArgument(format!("dimension {dim} < 2")));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(SubspaceError::InvalidArgument("alpha and beta must be positive".into()));
    }
    Ok((alpha * beta * (dim as f64).ln()).ceil() as usize)
}

/// Additive Gaussian input noise `x = clip(x0 + σ·ξ, lo, hi)`, `ξ ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseModel {
    center: Vec<f64>,
    sigma: f64,
    lo: f64,
    hi: f64,
}

impl NoiseModel {
    pub fn new(center: Vec<f64>, sigma: f64, lo: f64, hi: f64) -> Result<Self, SubspaceError> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(SubspaceError::InvalidArgument(format!(
                "sigma {sigma} must be finite and >= 0"
            )));
        }
        if !(lo < hi) {
            return Err(SubspaceError::InvalidArgument(format!("bounds [{lo}, {hi}] are empty")));
        }
        if center.is_empty() {
            return Err(SubspaceError::InvalidArgument("empty center".into()));
        }
        if let Some(i) = center.iter().position(|v| !(v.is_finite() && (lo..=hi).contains(v))) {
            return Err(SubspaceError::InvalidArgument(format!(
                "center component {i} = {} outside [{lo}, {hi}]",
                center[i]
            )));
        }
        Ok(Self { center, sigma, lo, hi })
    }

    /// Noise without truncation.
    pub fn unbounded(center: Vec<f64>, sigma: f64) -> Result<Self, SubspaceError> {
        Self::new(center, sigma, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `clip(x0 + scale·direction, lo, hi)`.
    pub fn displaced(&self, direction: &[f64], scale: f64) -> Vec<f64> {
        self.center
            .iter()
            .zip(direction)
            .map(|(c, d)| (c + scale * d).clamp(self.lo, self.hi))
            .collect()
    }
}

/// One standard-normal draw `ξ` and its truncated input `x`.
pub fn draw_noise(noise: &NoiseModel, rng: &mut RandomSource) -> (Vec<f64>, Vec<f64>) {
    let xi = rng.gaussian(noise.dim());
    let x = noise.displaced(&xi, noise.sigma);
    (xi, x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSampleSet {
    pub records: Vec<GradientRecord>,
    pub noise: NoiseModel,
}

impl GradientSampleSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }
}

/// Monte Carlo estimate of `C = E[∇f ∇fᵀ]` from `m` noisy inputs.
///
/// Gradients are those of `f` at the truncated point; the clip is not
/// differentiated. Entries are accumulated with compensated summation over
/// the upper triangle and mirrored, so the result is exactly symmetric.
pub fn estimate_c<M: ScalarModel + ?Sized>(
    model: &M,
    noise: &NoiseModel,
    m: usize,
    rng: &mut RandomSource,
) -> Result<(Mat, GradientSampleSet), SubspaceError> {
    if m == 0 {
        return Err(SubspaceError::InvalidArgument("sample count must be >= 1".into()));
    }
    let d = noise.dim();
    if model.dim() != d {
        return Err(SubspaceError::DimensionMismatch {
            expected: model.dim(),
            actual: d,
        });
    }
    let mut records = Vec::with_capacity(m);
    for sample in 0..m {
        let (xi, x) = draw_noise(noise, rng);
        let (value, gradient) = model
            .value_and_gradient(&x)
            .map_err(|source| SubspaceError::Model { sample, source })?;
        if gradient.len() != d {
            return Err(SubspaceError::DimensionMismatch {
                expected: d,
                actual: gradient.len(),
            });
        }
        if !value.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(SubspaceError::NonFiniteGradient { sample });
        }
        records.push(GradientRecord { xi, x, value, gradient });
    }
    let c = outer_product_mean(records.iter().map(|r| r.gradient.as_slice()), d, m);
    Ok((
        c,
        GradientSampleSet {
            records,
            noise: noise.clone(),
        },
    ))
}

/// `(1/m) Σ g gᵀ` with per-entry compensated sums.
pub fn outer_product_mean<'a>(grads: impl Iterator<Item = &'a [f64]>, d: usize, m: usize) -> Mat {
    let mut acc = vec![NeumaierSum::new(); d * (d + 1) / 2];
    for g in grads {
        let mut k = 0;
        for i in 0..d {
            let gi = g[i];
            for &gj in &g[i..] {
                acc[k].add(gi * gj);
                k += 1;
            }
        }
    }
    let mut c = Mat::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            let v = acc[k].value() / m as f64;
            c[(i, j)] = v;
            c[(j, i)] = v;
            k += 1;
        }
    }
    c
}

/// Eigenvalues (descending) and eigenvectors of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
    pub sample_count: usize,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn direction(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }
}

/// Relative size of a negative eigenvalue still attributed to round-off.
pub const PSD_TOLERANCE: f64 = 1e-9;

pub fn decompose(c: &Mat, sample_count: usize) -> Result<Spectrum, SubspaceError> {
    let eig = numkit::sym_eig(c, numkit::EIG_TOLERANCE)?;
    let leading = eig.eigenvalues[0].max(0.0);
    let mut eigenvalues = eig.eigenvalues;
    for v in &mut eigenvalues {
        if *v < 0.0 {
            if *v < -PSD_TOLERANCE * leading {
                return Err(SubspaceError::NotPositiveSemidefinite {
                    eigenvalue: *v,
                    leading,
                });
            }
            *v = 0.0;
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: eig.eigenvectors,
        sample_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSubspace {
    pub rank: usize,
    /// `d × r`, columns are the leading eigenvectors.
    pub projection: Mat,
    /// `λ_r / λ_{r+1}`; `None` when `λ_{r+1} = 0`.
    pub gap_ratio: Option<f64>,
    /// False when no ratio reached the threshold and rank 1 was used as fallback.
    pub clear_gap: bool,
}

impl ActiveSubspace {
    pub fn dim(&self) -> usize {
        self.projection.rows()
    }

    /// Leading direction `w₁`.
    pub fn leading_direction(&self) -> Vec<f64> {
        self.projection.column(0)
    }

    /// Builds a subspace from the first `rank` eigenvectors without gap search.
    pub fn with_rank(spectrum: &Spectrum, rank: usize) -> Result<Self, SubspaceError> {
        let d = spectrum.dim();
        if rank == 0 || rank > d {
            return Err(SubspaceError::InvalidArgument(format!("rank {rank} outside [1, {d}]")));
        }
        Ok(Self {
            rank,
            projection: spectrum.eigenvectors.leading_columns(rank),
            gap_ratio: gap(&spectrum.eigenvalues, rank),
            clear_gap: true,
        })
    }
}

fn gap(eigenvalues: &[f64], r: usize) -> Option<f64> {
    let next = *eigenvalues.get(r)?;
    if next <= 0.0 {
        None
    } else {
        Some(eigenvalues[r - 1] / next)
    }
}

/// Picks the smallest `r ≤ r_max` with `λ_r / λ_{r+1} ≥ gap_threshold`.
///
/// A zero `λ_{r+1}` counts as an infinite ratio. Without any such gap the
/// rank falls back to 1 and `clear_gap` is false.
pub fn select_rank(spectrum: &Spectrum, gap_threshold: f64, r_max: usize) -> Result<ActiveSubspace, SubspaceError> {
    let d = spectrum.dim();
    if !(gap_threshold > 1.0) {
        return Err(SubspaceError::InvalidArgument(format!(
            "gap threshold {gap_threshold} must exceed 1"
        )));
    }
    if r_max == 0 || r_max >= d {
        return Err(SubspaceError::InvalidArgument(format!(
            "r_max {r_max} outside [1, {})",
            d
        )));
    }
    let lam = &spectrum.eigenvalues;
    let trace: f64 = lam.iter().sum();
    if !(trace > 0.0) || lam.iter().all(|&l| l <= 1e-14 * trace) {
        return Err(SubspaceError::DegenerateSpectrum);
    }
    let found = (1..=r_max).find(|&r| lam[r] <= 0.0 || lam[r - 1] / lam[r] >= gap_threshold);
    let (rank, clear_gap) = match found {
        Some(r) => (r, true),
        None => (1, false),
    };
    Ok(ActiveSubspace {
        rank,
        projection: spectrum.eigenvectors.leading_columns(rank),
        gap_ratio: gap(lam, rank),
        clear_gap,
    })
}

/// Active variables `x_r = Sᵀ ξ`.
pub fn project(subspace: &ActiveSubspace, xi: &[f64]) -> Result<Vec<f64>, SubspaceError> {
    subspace
        .projection
        .matvec_transposed(xi)
        .map_err(|_| SubspaceError::DimensionMismatch {
            expected: subspace.dim(),
            actual: xi.len(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarialOutcome {
    pub x_adv: Vec<f64>,
    pub epsilon: f64,
    /// `+1` or `−1`: the multiple of `w₁` that was applied.
    pub sign: f64,
    pub score_before: f64,
    pub score_after: f64,
}

/// Moves `x0` by `±ε·w₁`, keeping the sign that lowers the score.
pub fn adversarial_perturb<M: ScalarModel + ?Sized>(
    model: &M,
    noise: &NoiseModel,
    subspace: &ActiveSubspace,
    epsilon: f64,
) -> Result<AdversarialOutcome, SubspaceError> {
    if !(epsilon >= 0.0) {
        return Err(SubspaceError::InvalidArgument(format!(
            "epsilon {epsilon} must be >= 0"
        )));
    }
    if subspace.dim() != noise.dim() {
        return Err(SubspaceError::DimensionMismatch {
            expected: noise.dim(),
            actual: subspace.dim(),
        });
    }
    let eval = |x: &[f64]| {
        model
            .value(x)
            .map_err(|source| SubspaceError::Model { sample: 0, source })
    };
    let w1 = subspace.leading_direction();
    let score_before = eval(noise.center())?;
    if epsilon == 0.0 {
        return Ok(AdversarialOutcome {
            x_adv: noise.center().to_vec(),
            epsilon,
            sign: 1.0,
            score_before,
            score_after: score_before,
        });
    }
    let plus = noise.displaced(&w1, epsilon);
    let minus = noise.displaced(&w1, -epsilon);
    let (f_plus, f_minus) = (eval(&plus)?, eval(&minus)?);
    let (x_adv, sign, score_after) = if f_minus < f_plus {
        (minus, -1.0, f_minus)
    } else {
        (plus, 1.0, f_plus)
    };
    Ok(AdversarialOutcome {
        x_adv,
        epsilon,
        sign,
        score_before,
        score_after,
    })
}

/// `|f(clip(x0 + ε·u)) − f(x0)|` for `count` uniformly random unit directions `u`.
pub fn random_direction_changes<M: ScalarModel + ?Sized>(
    model: &M,
    noise: &NoiseModel,
    epsilon: f64,
    count: usize,
    rng: &mut RandomSource,
) -> Result<Vec<f64>, SubspaceError> {
    let eval = |x: &[f64], sample| model.value(x).map_err(|source| SubspaceError::Model { sample, source });
    let base = eval(noise.center(), 0)?;
    (0..count)
        .map(|i| {
            let mut u = rng.gaussian(noise.dim());
            let n = numkit::norm(&u);
            u.iter_mut().for_each(|v| *v /= n);
            Ok((eval(&noise.displaced(&u, epsilon), i)? - base).abs())
        })
        .collect()
}

/// Activity scores `score_j = Σ_{i≤r} λᵢ wᵢⱼ²`.
pub fn attribution(spectrum: &Spectrum, r: usize) -> Result<Vec<f64>, SubspaceError> {
    let d = spectrum.dim();
    if r == 0 || r > d {
        return Err(SubspaceError::InvalidArgument(format!("rank {r} outside [1, {d}]")));
    }
    let w = &spectrum.eigenvectors;
    Ok((0..d)
        .map(|j| {
            (0..r)
                .map(|i| spectrum.eigenvalues[i] * w[(j, i)] * w[(j, i)])
                .collect::<NeumaierSum>()
                .value()
        })
        .collect())
}
