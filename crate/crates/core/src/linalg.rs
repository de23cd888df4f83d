//! Dense complex helpers shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Products go through the
//! packed complex gemm of `matrixmultiply`; when both operands are real a
//! single real product is formed instead, which also keeps real iterates
//! exactly real.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{NspError, Result};

pub type CMat = DMatrix<Complex64>;

/// Above this many scalar multiply-adds a product of two real matrices is
/// formed with the real gemm.
const REAL_GEMM_THRESHOLD: usize = 12 * 12 * 12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn max_abs_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c64(x, 0.0))
}

/// `op(a) * op(b)` where `op` optionally conjugate-transposes; the
/// conjugation is materialized (quadratic cost) since the gemm kernel only
/// takes strides.
fn zgemm(a: &CMat, a_adj: bool, b: &CMat, b_adj: bool) -> CMat {
    let (am, ak) = if a_adj { (a.ncols(), a.nrows()) } else { (a.nrows(), a.ncols()) };
    let (bk, bn) = if b_adj { (b.ncols(), b.nrows()) } else { (b.nrows(), b.ncols()) };
    assert_eq!(ak, bk, "inner dimensions differ");
    if am * ak * bn >= REAL_GEMM_THRESHOLD && is_real(a) && is_real(b) {
        let ar = a.map(|z| z.re);
        let br = b.map(|z| z.re);
        let re = match (a_adj, b_adj) {
            (false, false) => &ar * &br,
            (true, false) => ar.tr_mul(&br),
            (false, true) => &ar * br.transpose(),
            (true, true) => ar.transpose() * br.transpose(),
        };
        return from_real(&re);
    }
    let ac;
    let a = if a_adj {
        ac = a.map(|z| z.conj());
        &ac
    } else {
        a
    };
    let bc;
    let b = if b_adj {
        bc = b.map(|z| z.conj());
        &bc
    } else {
        b
    };
    // Column-major storage: element (i, j) sits at i + j * nrows.
    let strides = |m: &CMat, adj: bool| {
        let ld = m.nrows() as isize;
        if adj {
            (ld, 1)
        } else {
            (1, ld)
        }
    };
    let (rsa, csa) = strides(a, a_adj);
    let (rsb, csb) = strides(b, b_adj);
    let mut c = CMat::zeros(am, bn);
    if am == 0 || bn == 0 || ak == 0 {
        return c;
    }
    // SAFETY: Complex64 is `repr(C)` with fields (re, im), the layout of
    // `[f64; 2]`; the pointers cover the stated shapes and strides, and `c`
    // is a fresh contiguous column-major buffer.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            am,
            ak,
            bn,
            [1.0, 0.0],
            a.as_ptr().cast(),
            rsa,
            csa,
            b.as_ptr().cast(),
            rsb,
            csb,
            [0.0, 0.0],
            c.as_mut_ptr().cast(),
            1,
            am as isize,
        );
    }
    c
}

/// `a * b`.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    zgemm(a, false, b, false)
}

/// `a^H * b`.
pub fn matmul_ah(a: &CMat, b: &CMat) -> CMat {
    zgemm(a, true, b, false)
}

/// `a * b^H`.
pub fn matmul_bh(a: &CMat, b: &CMat) -> CMat {
    zgemm(a, false, b, true)
}

pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Real inner product `Re tr(a^H b)`.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Skew-Hermitian part `(m - m^H) / 2`.
pub fn skew(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] - m[(j, i)].conj()) * 0.5)
}

/// Hermitian part `(m + m^H) / 2`.
pub fn herm(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Frobenius deviation of `m^H m` from the identity.
pub fn unitarity_defect(m: &CMat) -> f64 {
    let g = matmul_ah(m, m);
    let n = g.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (g[(i, j)] - c64(target, 0.0)).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Unitary factor of a QR factorization normalized so that the triangular
/// factor has a real positive diagonal. With `real = true` the input must be
/// real and the computation is carried out in real arithmetic.
pub fn qr_unitary_positive(m: &CMat, real: bool) -> Result<CMat> {
    let n = m.ncols();
    if real {
        let qr = m.map(|z| z.re).qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            let d = r[(j, j)];
            if d == 0.0 || !d.is_finite() {
                return Err(NspError::RetractionFailed);
            }
            if d < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Ok(from_real(&q))
    } else {
        let qr = m.clone().qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            let d = r[(j, j)];
            let mag = d.norm();
            if mag == 0.0 || !mag.is_finite() {
                return Err(NspError::RetractionFailed);
            }
            let phase = d / mag;
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
        }
        Ok(q)
    }
}

/// Matrix of independent standard normal entries (real and imaginary parts
/// both drawn when `complex`).
pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, complex: bool, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if complex { rng.sample(StandardNormal) } else { 0.0 };
        c64(re, im)
    })
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gemm_products_match_generic_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(complex_a, complex_b) in &[(true, true), (false, true), (true, false), (false, false)] {
            for &n in &[3, 30] {
                let a = gaussian(n, n + 2, complex_a, &mut rng);
                let b = gaussian(n + 2, n + 1, complex_b, &mut rng);
                assert!((matmul(&a, &b) - &a * &b).norm() < 1e-11);
                let c = gaussian(n, n + 1, complex_b, &mut rng);
                assert!((matmul_ah(&a, &c) - a.adjoint() * &c).norm() < 1e-11);
                let d = gaussian(n + 4, n + 2, complex_b, &mut rng);
                assert!((matmul_bh(&a, &d) - &a * d.adjoint()).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn real_products_stay_exactly_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(20, 20, false, &mut rng);
        let b = gaussian(20, 20, false, &mut rng);
        assert!(is_real(&matmul(&a, &b)));
        assert!(is_real(&matmul_ah(&a, &b)));
    }

    #[test]
    fn positive_qr_is_unitary_with_positive_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = gaussian(6, 6, true, &mut rng);
        let q = qr_unitary_positive(&m, false).unwrap();
        assert!(unitarity_defect(&q) < 1e-13);
        let r = matmul_ah(&q, &m);
        for j in 0..6 {
            assert!(r[(j, j)].re > 0.0);
            assert!(r[(j, j)].im.abs() < 1e-12);
        }
        let mr = gaussian(6, 6, false, &mut rng);
        let qr = qr_unitary_positive(&mr, true).unwrap();
        assert!(is_real(&qr));
        assert!(unitarity_defect(&qr) < 1e-13);
    }
}
