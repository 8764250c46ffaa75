//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `rcond * sigma_max`. Also returns `sigma_min / sigma_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut x = DVector::zeros(a.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rcond * smax && s > 0.0 {
            let coef = u.column(k).dot(b) / s;
            x += vt.row(k).transpose() * coef;
        }
    }
    (x, ratio)
}

/// Unit right singular vector for the smallest singular value, and that value.
pub fn null_vector(a: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let (k, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .map(|(k, s)| (k, *s))
        .unwrap();
    (vt.row(k).transpose(), s)
}

/// Characteristic polynomial `det(lambda I - a)` as coefficients
/// `[c_0, c_1, ..., c_n]` (ascending, `c_n = 1`) by Faddeev–LeVerrier.
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &id * c[n - k + 1];
        c[n - k] = -(a * &m).trace() / k as f64;
    }
    c
}

/// Taylor coefficients of polynomial `p` (ascending) about `x0`.
pub fn taylor_shift(p: &[f64], x0: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    let n = q.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            q[j] += x0 * q[j + 1];
        }
    }
    q
}

/// Algebraic multiplicity of eigenvalue 1: number of leading Taylor
/// coefficients of the characteristic polynomial at 1 that vanish within
/// `tol * scale^(n-k)`, `scale = max(1, |a|_F)`.
pub fn unit_root_multiplicity(a: &DMatrix<f64>, tol: f64) -> usize {
    let n = a.nrows();
    let scale = a.norm().max(1.0);
    let t = taylor_shift(&char_poly(a), 1.0);
    let mut m = 0;
    for (k, v) in t.iter().enumerate().take(n) {
        if v.abs() <= tol * scale.powi((n - k) as i32) {
            m += 1;
        } else {
            break;
        }
    }
    m
}

/// Planar rotation `R` with `R v = (|v|, 0)`.
pub fn align_rotation(v: &[f64]) -> DMatrix<f64> {
    let phi = v[1].atan2(v[0]);
    let (s, c) = phi.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_poly_of_diag() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, -3.0]));
        let c = char_poly(&a);
        // (l-2)(l-1)(l+3) = l^3 - 7 l + 6
        let expect = [6.0, -7.0, 0.0, 1.0];
        for (x, y) in c.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn taylor_shift_matches_expansion() {
        // p = x^2 - 3x + 2 about 1: p(1+u) = u^2 - u
        let t = taylor_shift(&[2.0, -3.0, 1.0], 1.0);
        assert!((t[0]).abs() < 1e-15 && (t[1] + 1.0).abs() < 1e-15 && (t[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_multiplicity_jordan_block() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0 + 1e-11, 5.0, 0.0, 1.0 - 2e-11]);
        assert_eq!(unit_root_multiplicity(&j, 1e-6), 2);
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(unit_root_multiplicity(&d, 1e-6), 1);
    }

    #[test]
    fn lstsq_minimum_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (x, r) = lstsq(&a, &DVector::from_vec(vec![2.0, 2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn rotation_aligns() {
        let r = align_rotation(&[-1.0, 1.0]);
        let v = &r * DVector::from_vec(vec![-1.0, 1.0]);
        assert!((v[0] - 2f64.sqrt()).abs() < 1e-14 && v[1].abs() < 1e-14);
    }
}
