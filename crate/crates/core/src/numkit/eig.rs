use super::{Mat, NumError};

/// Largest tolerated `‖A − Aᵀ‖_F / ‖A‖_F` for an input to [`sym_eig`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Relative off-diagonal Frobenius norm at which the Jacobi sweeps stop.
pub const DEFAULT_TOLERANCE: f64 = 1e-11;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
///
/// `eigenvalues` are sorted in non-increasing order and column `i` of
/// `eigenvectors` belongs to `eigenvalues[i]`. Each eigenvector's first
/// component with magnitude above `1e-12` is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over all `(p, q)` pairs in row order, annihilating `a[p][q]` with a
/// plane rotation, until the off-diagonal Frobenius norm is at most
/// `tol · ‖a‖_F`.
pub fn sym_eig(a: &Mat, tol: f64) -> Result<SymEigen, NumError> {
    if !a.is_square() {
        return Err(NumError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Err(NumError::Empty);
    }
    a.check_finite()?;
    let asymmetry = a.relative_asymmetry();
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(NumError::Asymmetric { asymmetry });
    }

    // Work on the exactly symmetrized copy.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    // Row i of `vt` accumulates eigenvector i.
    let mut vt = Mat::identity(n);
    let scale = a.frobenius_norm();
    let target = tol * scale;

    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&w, n) <= target {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut w, &mut vt, n, p, q, sweep);
            }
        }
    }
    if !converged && off_diagonal_norm(&w, n) > target {
        return Err(NumError::NotConverged { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j * n + j].total_cmp(&w[i * n + i]));

    let eigenvalues = order.iter().map(|&i| w[i * n + i]).collect();
    let mut eigenvectors = Mat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = vt.row(src);
        let flip = v.iter().find(|c| c.abs() > 1e-12).is_some_and(|&c| c < 0.0);
        for (row, &c) in v.iter().enumerate() {
            eigenvectors[(row, col)] = if flip { -c } else { c };
        }
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(w: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for &v in &w[i * n + i + 1..(i + 1) * n] {
            acc += v * v;
        }
    }
    (2.0 * acc).sqrt()
}

#[inline]
fn rotate(w: &mut [f64], vt: &mut Mat, n: usize, p: usize, q: usize, sweep: usize) {
    let apq = w[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = w[p * n + p];
    let aqq = w[q * n + q];

    // Late sweeps: drop elements already below the diagonal's precision.
    let g = 100.0 * apq.abs();
    if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        w[p * n + q] = 0.0;
        w[q * n + p] = 0.0;
        return;
    }

    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let (head, tail) = w.split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (wp, wq) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let kp = *wp;
        let kq = *wq;
        *wp = c * kp - s * kq;
        *wq = s * kp + c * kq;
    }
    row_p[p] = app - t * apq;
    row_q[q] = aqq + t * apq;
    row_p[q] = 0.0;
    row_q[p] = 0.0;
    for k in 0..n {
        if k != p && k != q {
            w[k * n + p] = w[p * n + k];
            w[k * n + q] = w[q * n + k];
        }
    }
    w[q * n + p] = 0.0;
    w[p * n + q] = 0.0;

    let (vhead, vtail) = vt.two_rows_mut(p, q);
    for (vp, vq) in vhead.iter_mut().zip(vtail.iter_mut()) {
        let kp = *vp;
        let kq = *vq;
        *vp = c * kp - s * kq;
        *vq = s * kp + c * kq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &SymEigen) -> Mat {
        let w = &e.eigenvectors;
        let lam = Mat::from_diag(&e.eigenvalues);
        w.matmul(&lam).unwrap().matmul(&w.transpose()).unwrap()
    }

    #[test]
    fn diagonal_input_sorts_and_permutes() {
        let e = sym_eig(&Mat::from_diag(&[3.0, 1.0, 2.0]), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.eigenvectors.column(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(e.eigenvectors.column(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(e.eigenvectors.column(2), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn textbook_two_by_two() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eig(&a, DEFAULT_TOLERANCE).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w1 = e.eigenvectors.column(0);
        let w2 = e.eigenvectors.column(1);
        assert!((w1[0] - h).abs() < 1e-14 && (w1[1] - h).abs() < 1e-14);
        assert!((w2[0] - h).abs() < 1e-14 && (w2[1] + h).abs() < 1e-14);
        let r = reconstruct(&e).sub(&a).unwrap().frobenius_norm();
        assert!(r < 1e-14);
    }

    #[test]
    fn one_by_one_and_zero_matrix() {
        let e = sym_eig(&Mat::from_diag(&[-4.0]), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(e.eigenvalues, vec![-4.0]);
        let z = sym_eig(&Mat::zeros(3, 3), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(z.eigenvalues, vec![0.0; 3]);
        assert_eq!(z.eigenvectors, Mat::identity(3));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            sym_eig(&Mat::zeros(2, 3), DEFAULT_TOLERANCE),
            Err(NumError::NotSquare { rows: 2, cols: 3 })
        ));
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            sym_eig(&a, DEFAULT_TOLERANCE),
            Err(NumError::Asymmetric { .. })
        ));
        let mut nan = Mat::identity(2);
        nan[(1, 1)] = f64::INFINITY;
        assert!(matches!(
            sym_eig(&nan, DEFAULT_TOLERANCE),
            Err(NumError::NonFinite { row: 1, col: 1 })
        ));
    }

    #[test]
    fn tiny_asymmetry_is_tolerated() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0 + 1e-15, 2.0]]).unwrap();
        assert!(sym_eig(&a, DEFAULT_TOLERANCE).is_ok());
    }
}
