//! Least-squares polynomial response surfaces over the active variables.
//!
//! Monomials are ordered by total degree, then by descending lexicographic
//! order of their exponent vectors: for two variables `(u, v)` and degree 2
//! the basis is `1, u, v, u², uv, v²`.

use serde::Serialize;
use thiserror::Error;

use crate::numkit::{self, Mat, NeumaierSum, NumError};

#[derive(Debug, Error, PartialEq)]
pub enum SurfaceError {
    #[error("degree must be >= 1 and rank >= 1 (got rank {rank}, degree {degree})")]
    InvalidShape { rank: usize, degree: usize },
    #[error("{got} samples cannot determine {needed} coefficients")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {index} has {actual} active variables, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("rank-{rank} degree-{degree} surface fit is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { rank: usize, degree: usize, condition: f64 },
    #[error("target has zero variance but residuals up to {max_residual:e}")]
    ZeroVarianceTarget { max_residual: f64 },
    #[error("empty sample set")]
    Empty,
    #[error(transparent)]
    Numerical(NumError),
}

/// Residual magnitude treated as an exact fit of a zero-variance target.
const ZERO_RESIDUAL: f64 = 1e-12;
/// Total sum of squares treated as a zero-variance target.
const ZERO_VARIANCE: f64 = 1e-24;

/// `C(r + p, p)`.
pub fn term_count(rank: usize, degree: usize) -> usize {
    (1..=degree).fold(1usize, |acc, k| acc * (rank + k) / k)
}

/// Exponent vectors of every monomial up to `degree` in `rank` variables.
pub fn monomials(rank: usize, degree: usize) -> Vec<Vec<u32>> {
    fn of_degree(vars: usize, total: u32) -> Vec<Vec<u32>> {
        if vars == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in (0..=total).rev() {
            for mut rest in of_degree(vars - 1, total - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    (0..=degree as u32).flat_map(|k| of_degree(rank, k)).collect()
}

fn evaluate_basis(exponents: &[Vec<u32>], x: &[f64]) -> Vec<f64> {
    exponents
        .iter()
        .map(|e| e.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product())
        .collect()
}

/// Monomial features of `x_r` up to degree `degree`.
pub fn poly_features(x: &[f64], degree: usize) -> Result<Vec<f64>, SurfaceError> {
    if x.is_empty() || degree == 0 {
        return Err(SurfaceError::InvalidShape { rank: x.len(), degree });
    }
    Ok(evaluate_basis(&monomials(x.len(), degree), x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolySurface {
    pub rank: usize,
    pub degree: usize,
    pub coefficients: Vec<f64>,
    /// Exponent vector of each coefficient's monomial.
    pub monomials: Vec<Vec<u32>>,
    /// Training-set coefficient of determination.
    pub r_squared: f64,
    pub residual_rms: f64,
}

impl PolySurface {
    pub fn from_coefficients(rank: usize, degree: usize, coefficients: Vec<f64>) -> Result<Self, SurfaceError> {
        if rank == 0 || degree == 0 {
            return Err(SurfaceError::InvalidShape { rank, degree });
        }
        let needed = term_count(rank, degree);
        if coefficients.len() != needed {
            return Err(SurfaceError::DimensionMismatch {
                index: 0,
                expected: needed,
                actual: coefficients.len(),
            });
        }
        Ok(Self {
            rank,
            degree,
            coefficients,
            monomials: monomials(rank, degree),
            r_squared: f64::NAN,
            residual_rms: f64::NAN,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, SurfaceError> {
        if x.len() != self.rank {
            return Err(SurfaceError::DimensionMismatch {
                index: 0,
                expected: self.rank,
                actual: x.len(),
            });
        }
        Ok(numkit::dot(&self.coefficients, &evaluate_basis(&self.monomials, x)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surface serializes")
    }
}

fn check_points(points: &[Vec<f64>], values: &[f64], rank: usize) -> Result<(), SurfaceError> {
    if points.is_empty() {
        return Err(SurfaceError::Empty);
    }
    if points.len() != values.len() {
        return Err(SurfaceError::DimensionMismatch {
            index: points.len().min(values.len()),
            expected: points.len(),
            actual: values.len(),
        });
    }
    if let Some((index, p)) = points.iter().enumerate().find(|(_, p)| p.len() != rank) {
        return Err(SurfaceError::DimensionMismatch {
            index,
            expected: rank,
            actual: p.len(),
        });
    }
    Ok(())
}

/// Least-squares fit of a degree-`degree` polynomial to `(points[i], values[i])`.
pub fn fit(points: &[Vec<f64>], values: &[f64], degree: usize) -> Result<PolySurface, SurfaceError> {
    let rank = points.first().map_or(0, Vec::len);
    if rank == 0 || degree == 0 {
        return Err(SurfaceError::InvalidShape { rank, degree });
    }
    check_points(points, values, rank)?;
    let exps = monomials(rank, degree);
    let needed = exps.len();
    if points.len() < needed {
        return Err(SurfaceError::TooFewSamples {
            needed,
            got: points.len(),
        });
    }
    let mut design = Vec::with_capacity(points.len() * needed);
    for p in points {
        design.extend(evaluate_basis(&exps, p));
    }
    let design = Mat::from_row_major(points.len(), needed, design).map_err(SurfaceError::Numerical)?;
    let coefficients = numkit::lstsq(&design, values).map_err(|e| match e {
        NumError::IllConditioned { condition } => SurfaceError::IllConditioned {
            rank,
            degree,
            condition,
        },
        other => SurfaceError::Numerical(other),
    })?;
    let mut surface = PolySurface {
        rank,
        degree,
        coefficients,
        monomials: exps,
        r_squared: f64::NAN,
        residual_rms: f64::NAN,
    };
    let residuals = residuals(&surface, points, values)?;
    surface.residual_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    surface.r_squared = r_squared_from(&residuals, values)?;
    Ok(surface)
}

fn residuals(surface: &PolySurface, points: &[Vec<f64>], values: &[f64]) -> Result<Vec<f64>, SurfaceError> {
    points
        .iter()
        .zip(values)
        .map(|(p, v)| Ok(v - surface.eval(p)?))
        .collect()
}

fn r_squared_from(residuals: &[f64], values: &[f64]) -> Result<f64, SurfaceError> {
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / values.len() as f64;
    let ss_tot = values
        .iter()
        .map(|v| (v - mean).powi(2))
        .collect::<NeumaierSum>()
        .value();
    let ss_res = residuals.iter().map(|r| r * r).collect::<NeumaierSum>().value();
    if ss_tot <= ZERO_VARIANCE {
        let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        return if max_residual <= ZERO_RESIDUAL {
            Ok(1.0)
        } else {
            Err(SurfaceError::ZeroVarianceTarget { max_residual })
        };
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// `1 − SS_res / SS_tot` of `surface` on held-out samples; negative when the
/// surface predicts worse than the held-out mean.
pub fn r_squared(surface: &PolySurface, points: &[Vec<f64>], values: &[f64]) -> Result<f64, SurfaceError> {
    check_points(points, values, surface.rank)?;
    r_squared_from(&residuals(surface, points, values)?, values)
}
