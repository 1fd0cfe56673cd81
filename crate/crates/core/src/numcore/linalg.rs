//! Small dense routines on row-major `n x n` slices.

/// Lower Cholesky factor of a symmetric matrix, or `None` if a pivot is not
/// strictly positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (li, lj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let s: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
            let v = a[i * n + j] - s;
            if i == j {
                if !(v > 0.0) || !v.is_finite() {
                    return None;
                }
                l[i * n + i] = v.sqrt();
            } else {
                l[i * n + j] = v / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L z = b` for lower-triangular `L`.
pub fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = l[i * n..i * n + i].iter().zip(&z).map(|(x, y)| x * y).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    z
}

/// Solves `L^T x = z` for lower-triangular `L`.
pub fn solve_lower_transposed(l: &[f64], n: usize, z: &[f64]) -> Vec<f64> {
    let mut x = z.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[i * n + i];
        let xi = x[i];
        for k in 0..i {
            x[k] -= l[i * n + k] * xi;
        }
    }
    x
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    solve_lower_transposed(l, n, &solve_lower(l, n, b))
}

/// Inverse of `A` from its Cholesky factor, returned as a full symmetric matrix.
pub fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    // W = L^{-1}, row by row.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        let (done, rest) = w.split_at_mut(i * n);
        let row = &mut rest[..n];
        row[i] = 1.0;
        for k in 0..i {
            let c = l[i * n + k];
            if c != 0.0 {
                for (r, wk) in row[..=k].iter_mut().zip(&done[k * n..k * n + k + 1]) {
                    *r -= c * wk;
                }
            }
        }
        let d = l[i * n + i];
        for r in row[..=i].iter_mut() {
            *r /= d;
        }
    }
    // A^{-1} = W^T W; fill the lower triangle, then mirror.
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let prow = &mut p[i * n..i * n + i + 1];
        for k in i..n {
            let c = w[k * n + i];
            if c != 0.0 {
                for (pj, wkj) in prow.iter_mut().zip(&w[k * n..k * n + i + 1]) {
                    *pj += c * wkj;
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            p[j * n + i] = p[i * n + j];
        }
    }
    p
}

/// `ln det A` from the Cholesky factor.
pub fn cholesky_log_det(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum::<f64>() * 2.0
}

/// Copies the principal submatrix of `a` (size `n`) indexed by `idx`.
pub fn principal_submatrix(a: &[f64], n: usize, idx: &[usize]) -> Vec<f64> {
    let m = idx.len();
    let mut out = vec![0.0; m * m];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            out[r * m + c] = a[i * n + j];
        }
    }
    out
}

/// Removes row and column `k` from the inverse `p` of a symmetric matrix,
/// yielding the inverse of the matrix with that row and column deleted.
pub fn inverse_remove(p: &[f64], m: usize, k: usize) -> Vec<f64> {
    let pkk = p[k * m + k];
    let pk: Vec<f64> = (0..m).map(|j| p[k * m + j]).collect();
    let mut out = Vec::with_capacity((m - 1) * (m - 1));
    for i in (0..m).filter(|&i| i != k) {
        let f = pk[i] / pkk;
        for j in (0..m).filter(|&j| j != k) {
            out.push(p[i * m + j] - f * pk[j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    c[i * n + j] += a[i * n + k] * b[k * n + j];
                }
            }
        }
        c
    }

    fn spd(n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
            }
            a[i * n + i] += 1.0;
        }
        a
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let n = 7;
        let a = spd(n);
        let l = cholesky(&a, n).unwrap();
        let p = cholesky_inverse(&l, n);
        let id = matmul(&a, &p, n);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * n + j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_round_trip() {
        let n = 5;
        let a = spd(n);
        let l = cholesky(&a, n).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let x = cholesky_solve(&l, n, &b);
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn not_pd_is_rejected() {
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
        assert!(cholesky(&[0.0], 1).is_none());
    }

    #[test]
    fn removal_matches_fresh_inverse() {
        let n = 6;
        let a = spd(n);
        let p = cholesky_inverse(&cholesky(&a, n).unwrap(), n);
        let kept: Vec<usize> = (0..n).filter(|&i| i != 2).collect();
        let sub = principal_submatrix(&a, n, &kept);
        let fresh = cholesky_inverse(&cholesky(&sub, n - 1).unwrap(), n - 1);
        let removed = inverse_remove(&p, n, 2);
        for (x, y) in fresh.iter().zip(&removed) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn log_det_of_diagonal() {
        let a = [2.0, 0.0, 0.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        assert!((cholesky_log_det(&l, 2) - 6f64.ln()).abs() < 1e-14);
    }
}
