//! CSV renderings of analysis artifacts.
//!
//! Every file has a header row and comma-separated fields; floats carry 17
//! significant digits so they read back bit-exact.

use std::fmt::Write;

use crate::numkit::Mat;
use crate::propagate::Histogram;
use crate::subspace::Spectrum;
use crate::surface::PolySurface;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `index,eigenvalue` with 1-based indices.
pub fn spectrum_csv(spectrum: &Spectrum) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, l) in spectrum.eigenvalues.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, fmt_float(*l)).unwrap();
    }
    out
}

/// One row per input feature; column `i` is eigenvector `wᵢ`.
pub fn eigenvectors_csv(vectors: &Mat) -> String {
    let header: Vec<String> = (1..=vectors.cols()).map(|i| format!("w{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..vectors.rows() {
        let row: Vec<String> = vectors.row(i).iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Summary-plot data: `sample_index,x_r1,…,x_rr,f_value`.
pub fn summary_csv(active_variables: &[Vec<f64>], values: &[f64]) -> String {
    let r = active_variables.first().map_or(0, Vec::len);
    let mut out = String::from("sample_index");
    for i in 1..=r {
        write!(out, ",x_r{i}").unwrap();
    }
    out.push_str(",f_value\n");
    for (i, (xr, f)) in active_variables.iter().zip(values).enumerate() {
        write!(out, "{i}").unwrap();
        for v in xr {
            write!(out, ",{}", fmt_float(*v)).unwrap();
        }
        writeln!(out, ",{}", fmt_float(*f)).unwrap();
    }
    out
}

/// The fitted surface along the first active variable (others held at 0),
/// on `points` evenly spaced values spanning `[lo, hi]`.
pub fn curve_csv(surface: &PolySurface, lo: f64, hi: f64, points: usize) -> String {
    let mut out = String::from("x_r1,fitted\n");
    let points = points.max(2);
    let mut x = vec![0.0; surface.rank];
    for k in 0..points {
        x[0] = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let y = surface.eval(&x).expect("rank matches");
        writeln!(out, "{},{}", fmt_float(x[0]), fmt_float(y)).unwrap();
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(out, "{},{},{c}", fmt_float(h.edges[i]), fmt_float(h.edges[i + 1])).unwrap();
    }
    out
}

/// `feature_index,<column>` for a per-feature vector.
pub fn feature_csv(column: &str, values: &[f64]) -> String {
    let mut out = format!("feature_index,{column}\n");
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{i},{}", fmt_float(*v)).unwrap();
    }
    out
}
