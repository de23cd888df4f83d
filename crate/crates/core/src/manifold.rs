//! Product manifold `U(n) × U(n)` (or `O(n) × O(n)` for real pencils).
//!
//! Tangent vectors at `(Q, Z)` are stored in ambient coordinates as pairs
//! `(Q Ω_Q, Z Ω_Z)` with skew-Hermitian `Ω`; the metric is
//! `Re tr(u_Q^H v_Q) + Re tr(u_Z^H v_Z)`.

use std::ops::{Add, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NspError, Result};
use crate::linalg::{self, CMat};
use crate::pencil::Field;

/// Pair of `n × n` matrices: a tangent or ambient vector on the product.
#[derive(Clone, Debug, PartialEq)]
pub struct MatPair {
    pub q: CMat,
    pub z: CMat,
}

impl MatPair {
    pub fn new(q: CMat, z: CMat) -> MatPair {
        MatPair { q, z }
    }

    pub fn zeros(n: usize) -> MatPair {
        MatPair { q: CMat::zeros(n, n), z: CMat::zeros(n, n) }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn inner(&self, other: &MatPair) -> f64 {
        linalg::re_inner(&self.q, &other.q) + linalg::re_inner(&self.z, &other.z)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().chain(self.z.iter()).all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_real(&self) -> bool {
        linalg::is_real(&self.q) && linalg::is_real(&self.z)
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(&self.q) && linalg::all_finite(&self.z)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &MatPair) {
        self.q.zip_apply(&other.q, |x, y| *x += y * alpha);
        self.z.zip_apply(&other.z, |x, y| *x += y * alpha);
    }

    pub fn scaled(&self, alpha: f64) -> MatPair {
        MatPair { q: self.q.map(|x| x * alpha), z: self.z.map(|x| x * alpha) }
    }
}

impl Add for &MatPair {
    type Output = MatPair;
    fn add(self, rhs: &MatPair) -> MatPair {
        MatPair { q: &self.q + &rhs.q, z: &self.z + &rhs.z }
    }
}

impl Sub for &MatPair {
    type Output = MatPair;
    fn sub(self, rhs: &MatPair) -> MatPair {
        MatPair { q: &self.q - &rhs.q, z: &self.z - &rhs.z }
    }
}

impl Mul<f64> for &MatPair {
    type Output = MatPair;
    fn mul(self, rhs: f64) -> MatPair {
        self.scaled(rhs)
    }
}

impl Neg for &MatPair {
    type Output = MatPair;
    fn neg(self) -> MatPair {
        self.scaled(-1.0)
    }
}

/// Checked real inner product of two tangent vectors.
pub fn inner(u: &MatPair, v: &MatPair) -> Result<f64> {
    if u.q.shape() != v.q.shape() || u.z.shape() != v.z.shape() {
        return Err(NspError::DimensionMismatch {
            expected: format!("{:?}", u.q.shape()),
            found: format!("{:?}", v.q.shape()),
        });
    }
    Ok(u.inner(v))
}

/// Point `(Q, Z)` with unitary (orthogonal when real) factors.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldPoint {
    field: Field,
    q: CMat,
    z: CMat,
}

/// Haar-distributed unitary (or orthogonal) matrix.
pub fn haar_unitary<R: rand::Rng + ?Sized>(n: usize, field: Field, rng: &mut R) -> CMat {
    loop {
        let g = linalg::gaussian(n, n, !field.is_real(), rng);
        // A Gaussian matrix is rank deficient with probability zero.
        if let Ok(q) = linalg::qr_unitary_positive(&g, field.is_real()) {
            return q;
        }
    }
}

impl ManifoldPoint {
    /// Validates shapes and unitarity (to `1e-10`).
    pub fn new(field: Field, q: CMat, z: CMat) -> Result<ManifoldPoint> {
        let n = q.nrows();
        if q.shape() != (n, n) || z.shape() != (n, n) {
            return Err(NspError::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{:?} and {:?}", q.shape(), z.shape()),
            });
        }
        let p = ManifoldPoint { field, q, z };
        if field.is_real() && !(linalg::is_real(&p.q) && linalg::is_real(&p.z)) {
            return Err(NspError::InvalidArgument("real point with complex factors".into()));
        }
        if p.unitarity_defect() > 1e-10 {
            return Err(NspError::InvalidArgument("factors are not unitary".into()));
        }
        Ok(p)
    }

    /// Skips the unitarity check. The cost and its Euclidean derivatives are
    /// defined for any pair of square matrices, which finite-difference
    /// checks along ambient directions rely on; retraction and the
    /// Riemannian quantities assume a point on the manifold.
    pub fn new_unchecked(field: Field, q: CMat, z: CMat) -> ManifoldPoint {
        ManifoldPoint { field, q, z }
    }

    pub fn identity(n: usize, field: Field) -> ManifoldPoint {
        ManifoldPoint { field, q: linalg::identity(n), z: linalg::identity(n) }
    }

    pub fn random(n: usize, field: Field, seed: u64) -> ManifoldPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ManifoldPoint::random_with(n, field, &mut rng)
    }

    pub fn random_with<R: rand::Rng + ?Sized>(n: usize, field: Field, rng: &mut R) -> ManifoldPoint {
        let q = haar_unitary(n, field, rng);
        let z = haar_unitary(n, field, rng);
        ManifoldPoint { field, q, z }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn q(&self) -> &CMat {
        &self.q
    }

    pub fn z(&self) -> &CMat {
        &self.z
    }

    /// Same point regarded as an element of `U(n) × U(n)`.
    pub fn to_complex(&self) -> ManifoldPoint {
        ManifoldPoint { field: Field::Complex, ..self.clone() }
    }

    /// Real dimension: `2n²` for the unitary product, `n(n-1)` for the
    /// orthogonal one.
    pub fn dimension(&self) -> usize {
        dimension(self.n(), self.field)
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.q).max(linalg::unitarity_defect(&self.z))
    }

    /// Orthogonal projection of an ambient pair onto the tangent space:
    /// `Q skew(Q^H M)` in each component.
    pub fn project_tangent(&self, m: &MatPair) -> MatPair {
        let pq = linalg::matmul(&self.q, &linalg::skew(&linalg::matmul_ah(&self.q, &m.q)));
        let pz = linalg::matmul(&self.z, &linalg::skew(&linalg::matmul_ah(&self.z, &m.z)));
        MatPair { q: pq, z: pz }
    }

    /// Norm of the Hermitian part of `Q^H u` in each component; zero for
    /// tangent vectors.
    pub fn tangent_defect(&self, u: &MatPair) -> f64 {
        let hq = linalg::herm(&linalg::matmul_ah(&self.q, &u.q));
        let hz = linalg::herm(&linalg::matmul_ah(&self.z, &u.z));
        (linalg::frob_sq(&hq) + linalg::frob_sq(&hz)).sqrt()
    }

    /// QR-based retraction `R_x(v) = (qf(Q + v_Q), qf(Z + v_Z))` with the
    /// triangular factor normalized to a positive diagonal. Returns `self`
    /// exactly for the zero vector.
    pub fn retract(&self, v: &MatPair) -> Result<ManifoldPoint> {
        if v.q.shape() != self.q.shape() || v.z.shape() != self.z.shape() {
            return Err(NspError::DimensionMismatch {
                expected: format!("{:?}", self.q.shape()),
                found: format!("{:?}", v.q.shape()),
            });
        }
        if !v.is_finite() {
            return Err(NspError::NonFinite("tangent vector"));
        }
        if v.is_zero() {
            return Ok(self.clone());
        }
        let real = self.field.is_real() && v.is_real();
        let q = linalg::qr_unitary_positive(&(&self.q + &v.q), real)?;
        let z = linalg::qr_unitary_positive(&(&self.z + &v.z), real)?;
        let field = if real { Field::Real } else { Field::Complex };
        Ok(ManifoldPoint { field, q, z })
    }
}

pub fn dimension(n: usize, field: Field) -> usize {
    if field.is_real() {
        n * (n - 1)
    } else {
        2 * n * n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_points_are_unitary() {
        for field in [Field::Real, Field::Complex] {
            let x = ManifoldPoint::random(7, field, 42);
            assert!(x.unitarity_defect() < 1e-13);
            assert_eq!(x.field(), field);
        }
        assert!(linalg::is_real(ManifoldPoint::random(5, Field::Real, 1).q()));
    }

    #[test]
    fn projection_is_idempotent_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = ManifoldPoint::random(5, Field::Complex, 3);
        let m = MatPair::new(
            linalg::gaussian(5, 5, true, &mut rng),
            linalg::gaussian(5, 5, true, &mut rng),
        );
        let p = x.project_tangent(&m);
        let pp = x.project_tangent(&p);
        assert!((&p - &pp).norm() < 1e-13 * m.norm());
        assert!(x.tangent_defect(&p) < 1e-13 * m.norm());
    }

    #[test]
    fn retraction_of_zero_is_identity_map() {
        let x = ManifoldPoint::random(4, Field::Complex, 5);
        assert_eq!(x.retract(&MatPair::zeros(4)).unwrap(), x);
    }

    #[test]
    fn retraction_is_first_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = ManifoldPoint::random(4, Field::Complex, 6);
        let m = MatPair::new(
            linalg::gaussian(4, 4, true, &mut rng),
            linalg::gaussian(4, 4, true, &mut rng),
        );
        let v = x.project_tangent(&m);
        let t = 1e-6;
        let y = x.retract(&v.scaled(t)).unwrap();
        let dq = (y.q() - x.q()).map(|z| z / t);
        assert!((dq - &v.q).norm() < 1e-4 * v.norm());
        assert!(y.unitarity_defect() < 1e-13);
    }

    #[test]
    fn dimensions() {
        assert_eq!(dimension(8, Field::Complex), 128);
        assert_eq!(dimension(8, Field::Real), 56);
    }
}
