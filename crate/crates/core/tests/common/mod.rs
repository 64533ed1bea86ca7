#![allow(dead_code, clippy::needless_range_loop)]

use nnsubspace::netcore::{self, Dataset, DenseNetwork, SyntheticSpec, TrainConfig};
use nnsubspace::numkit::{Mat, RandomSource};

/// Desk-scale data: 64 features on `[0, 1]`, four overlapping classes.
pub fn desk_spec() -> SyntheticSpec {
    SyntheticSpec {
        dim: 64,
        classes: 4,
        train_count: 2000,
        test_count: 200,
        spread: 0.5,
        lo: 0.0,
        hi: 1.0,
        seed: 7,
    }
}

pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        hidden: vec![32, 32],
        epochs: 20,
        learning_rate: 0.05,
        batch_size: 32,
        seed: 1,
    }
}

/// Trained desk network and its test split.
pub fn desk_model() -> (DenseNetwork, Dataset) {
    let (train, test) = netcore::synthetic_blobs(&desk_spec()).unwrap();
    let outcome = netcore::train_sgd(&train, &desk_train_config()).unwrap();
    (outcome.network, test)
}

pub fn random_symmetric(n: usize, rng: &mut RandomSource) -> Mat {
    let g = rng.gaussian(n * n);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = 0.5 * (g[i * n + j] + g[j * n + i]);
        }
    }
    Mat::from_row_major(n, n, data).unwrap()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

fn char_poly(a: &Mat, lambda: f64) -> f64 {
    let n = a.rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] - if i == j { lambda } else { 0.0 }).collect())
        .collect();
    determinant(&rows)
}

/// Eigenvalues (descending) as sign changes of `det(A − λI)` on a grid over
/// the Gershgorin interval, each refined by bisection.
///
/// Returns `None` if the grid never separates all `n` roots.
pub fn char_poly_eigenvalues(a: &Mat) -> Option<Vec<f64>> {
    let n = a.rows();
    let radius = (0..n)
        .map(|i| a[(i, i)].abs() + (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (lo, hi) = (-radius - 1.0, radius + 1.0);
    let mut steps = 2000;
    while steps <= 2_048_000 {
        let h = (hi - lo) / steps as f64;
        let mut roots = Vec::new();
        let mut prev = char_poly(a, lo);
        for k in 1..=steps {
            let x = lo + k as f64 * h;
            let cur = char_poly(a, x);
            if cur == 0.0 {
                roots.push(x);
            } else if prev != 0.0 && prev.signum() != cur.signum() {
                let (mut l, mut r, fl) = (x - h, x, prev);
                for _ in 0..200 {
                    let mid = 0.5 * (l + r);
                    if mid <= l || mid >= r {
                        break;
                    }
                    let fm = char_poly(a, mid);
                    if fm == 0.0 {
                        l = mid;
                        r = mid;
                        break;
                    }
                    if fm.signum() == fl.signum() {
                        l = mid;
                    } else {
                        r = mid;
                    }
                }
                roots.push(0.5 * (l + r));
            }
            prev = cur;
        }
        if roots.len() == n {
            roots.reverse();
            return Some(roots);
        }
        steps *= 4;
    }
    None
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let up = f(&xp);
            xp[i] = orig - h;
            let down = f(&xp);
            xp[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
}
