use super::{Mat, NumError};

/// Condition-number estimate above which a design matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Linear least squares `argmin_c ‖phi·c − y‖₂` by Householder QR.
///
/// Columns are scaled to unit norm before factorization. The conditioning
/// estimate is `‖R‖_F · ‖R⁻¹‖_F` of the scaled triangular factor, which bounds
/// the 2-norm condition number from above by at most a factor `k`.
pub fn lstsq(phi: &Mat, y: &[f64]) -> Result<Vec<f64>, NumError> {
    let (n, k) = (phi.rows(), phi.cols());
    if y.len() != n {
        return Err(NumError::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if k == 0 || n == 0 {
        return Err(NumError::Empty);
    }
    if n < k {
        return Err(NumError::Underdetermined { rows: n, cols: k });
    }
    phi.check_finite()?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(NumError::NonFinite { row: i, col: 0 });
    }

    // Column-major working copy, equilibrated.
    let mut scale = vec![0.0; k];
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| phi.column(j)).collect();
    for (j, col) in cols.iter_mut().enumerate() {
        let nrm = super::norm(col);
        if nrm == 0.0 {
            return Err(NumError::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        scale[j] = nrm;
        col.iter_mut().for_each(|v| *v /= nrm);
    }
    let mut rhs = y.to_vec();

    for j in 0..k {
        let x = &cols[j][j..];
        let xnorm = super::norm(x);
        if xnorm == 0.0 {
            return Err(NumError::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        let alpha = if x[0] > 0.0 { -xnorm } else { xnorm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm2 = super::dot(&v, &v);
        if vnorm2 > 0.0 {
            for col in cols.iter_mut().skip(j) {
                reflect(&mut col[j..], &v, vnorm2);
            }
            reflect(&mut rhs[j..], &v, vnorm2);
        }
    }

    let r = |i: usize, j: usize| cols[j][i];
    let condition = condition_estimate(k, r);
    if !(condition <= MAX_CONDITION) {
        return Err(NumError::IllConditioned { condition });
    }

    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = rhs[i];
        for j in i + 1..k {
            acc -= r(i, j) * z[j];
        }
        z[i] = acc / r(i, i);
    }
    Ok(z.iter().zip(&scale).map(|(zi, s)| zi / s).collect())
}

fn reflect(target: &mut [f64], v: &[f64], vnorm2: f64) {
    let f = 2.0 * super::dot(v, target) / vnorm2;
    for (t, vi) in target.iter_mut().zip(v) {
        *t -= f * vi;
    }
}

fn condition_estimate(k: usize, r: impl Fn(usize, usize) -> f64) -> f64 {
    if (0..k).any(|i| r(i, i) == 0.0) {
        return f64::INFINITY;
    }
    let mut r_norm2 = 0.0;
    for i in 0..k {
        for j in i..k {
            r_norm2 += r(i, j) * r(i, j);
        }
    }
    // Columns of R⁻¹ by back substitution against unit vectors.
    let mut inv_norm2 = 0.0;
    let mut col = vec![0.0; k];
    for e in 0..k {
        col.iter_mut().for_each(|c| *c = 0.0);
        for i in (0..=e).rev() {
            let mut acc = if i == e { 1.0 } else { 0.0 };
            for j in i + 1..=e {
                acc -= r(i, j) * col[j];
            }
            col[i] = acc / r(i, i);
        }
        inv_norm2 += col.iter().map(|c| c * c).sum::<f64>();
    }
    (r_norm2 * inv_norm2).sqrt()
}
