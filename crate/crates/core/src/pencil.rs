//! Square matrix pencils `A + λB` and their triangular projections.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};
use crate::linalg::{self, c64, CMat};

/// Scalar field of a pencil. Real pencils are stored with zero imaginary
/// parts and optimized over orthogonal rather than unitary factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn is_real(self) -> bool {
        self == Field::Real
    }

    pub fn join(self, other: Field) -> Field {
        if self.is_real() && other.is_real() {
            Field::Real
        } else {
            Field::Complex
        }
    }
}

impl std::str::FromStr for Field {
    type Err = NspError;

    fn from_str(s: &str) -> Result<Field> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(NspError::InvalidArgument(format!("unknown field '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pencil {
    field: Field,
    a: CMat,
    b: CMat,
}

/// Which part of a triangular projection's complement to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualKind {
    /// Everything removed by the minimal-weight projection.
    Min,
    /// Everything removed when the given diagonal position is zeroed.
    Fixed(usize),
    /// Only the strictly lower triangle.
    StrictLower,
    /// Only the diagonal.
    Diagonal,
}

/// Nearest singular upper-triangular pencil to a given pencil.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularProjection {
    pub projected: Pencil,
    /// Diagonal position (0-based) that was zeroed.
    pub zero_index: usize,
    pub squared_distance: f64,
    /// More than one diagonal position attained the minimal weight.
    pub tie: bool,
}

/// Index of the smallest entry, preferring the smallest index, and whether
/// the minimum is attained more than once.
pub fn argmin_weight(weights: &[f64]) -> (usize, bool) {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate().skip(1) {
        if w < weights[best] {
            best = i;
        }
    }
    let tie = weights
        .iter()
        .enumerate()
        .any(|(i, &w)| i != best && w == weights[best]);
    (best, tie)
}

/// `|m_A,ii|^2 + |m_B,ii|^2` for every `i`.
pub fn diagonal_weights_of(a: &CMat, b: &CMat) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| a[(i, i)].norm_sqr() + b[(i, i)].norm_sqr())
        .collect()
}

/// Sum of squared moduli strictly below the diagonal of both matrices.
pub fn strict_lower_mass_of(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            acc += a[(i, j)].norm_sqr() + b[(i, j)].norm_sqr();
        }
    }
    acc
}

impl Pencil {
    pub fn new(field: Field, a: CMat, b: CMat) -> Result<Pencil> {
        if a.nrows() != a.ncols() {
            return Err(NspError::DimensionMismatch {
                expected: "square A".into(),
                found: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        if b.shape() != a.shape() {
            return Err(NspError::DimensionMismatch {
                expected: format!("{}x{}", a.nrows(), a.ncols()),
                found: format!("{}x{}", b.nrows(), b.ncols()),
            });
        }
        if a.nrows() == 0 {
            return Err(NspError::InvalidArgument("pencil size must be positive".into()));
        }
        if !linalg::all_finite(&a) || !linalg::all_finite(&b) {
            return Err(NspError::NonFinite("pencil entries"));
        }
        if field.is_real() {
            for m in [&a, &b] {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)].im != 0.0 {
                            return Err(NspError::NonRealEntry { row: i, col: j });
                        }
                    }
                }
            }
        }
        Ok(Pencil { field, a, b })
    }

    pub fn complex(a: CMat, b: CMat) -> Result<Pencil> {
        Pencil::new(Field::Complex, a, b)
    }

    pub fn real(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Pencil> {
        Pencil::new(Field::Real, linalg::from_real(a), linalg::from_real(b))
    }

    /// Builds a real pencil from row-major data.
    pub fn from_real_rows(n: usize, a: &[f64], b: &[f64]) -> Result<Pencil> {
        if a.len() != n * n || b.len() != n * n {
            return Err(NspError::DimensionMismatch {
                expected: format!("{} entries", n * n),
                found: format!("{} and {}", a.len(), b.len()),
            });
        }
        Pencil::real(
            &DMatrix::from_row_slice(n, n, a),
            &DMatrix::from_row_slice(n, n, b),
        )
    }

    /// Gaussian random pencil: entries (and, for complex pencils, their real
    /// and imaginary parts independently) are standard normal.
    pub fn random(n: usize, field: Field, seed: u64) -> Result<Pencil> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Pencil::random_with(n, field, &mut rng)
    }

    pub fn random_with<R: rand::Rng + ?Sized>(n: usize, field: Field, rng: &mut R) -> Result<Pencil> {
        let complex = !field.is_real();
        let a = linalg::gaussian(n, n, complex, rng);
        let b = linalg::gaussian(n, n, complex, rng);
        Pencil::new(field, a, b)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn into_parts(self) -> (Field, CMat, CMat) {
        (self.field, self.a, self.b)
    }

    /// Same matrices viewed over the complex field.
    pub fn to_complex(&self) -> Pencil {
        Pencil { field: Field::Complex, ..self.clone() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        (linalg::frob_sq(&self.a) + linalg::frob_sq(&self.b)).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Pencil {
        let s = c64(factor, 0.0);
        Pencil {
            field: self.field,
            a: self.a.map(|z| z * s),
            b: self.b.map(|z| z * s),
        }
    }

    pub fn sub(&self, other: &Pencil) -> Result<Pencil> {
        self.check_same_size(other)?;
        Ok(Pencil {
            field: self.field.join(other.field),
            a: &self.a - &other.a,
            b: &self.b - &other.b,
        })
    }

    pub fn distance(&self, other: &Pencil) -> Result<f64> {
        Ok(self.sub(other)?.frobenius_norm())
    }

    fn check_same_size(&self, other: &Pencil) -> Result<()> {
        if self.n() != other.n() {
            return Err(NspError::DimensionMismatch {
                expected: format!("size {}", self.n()),
                found: format!("size {}", other.n()),
            });
        }
        Ok(())
    }

    /// `(Q A Z, Q B Z)`.
    pub fn transformed(&self, q: &CMat, z: &CMat) -> Result<Pencil> {
        let n = self.n();
        if q.shape() != (n, n) || z.shape() != (n, n) {
            return Err(NspError::DimensionMismatch {
                expected: format!("{n}x{n} factors"),
                found: format!("{:?} and {:?}", q.shape(), z.shape()),
            });
        }
        let field = if linalg::is_real(q) && linalg::is_real(z) {
            self.field
        } else {
            Field::Complex
        };
        let a = linalg::matmul(&linalg::matmul(q, &self.a), z);
        let b = linalg::matmul(&linalg::matmul(q, &self.b), z);
        Ok(Pencil { field, a, b })
    }

    pub fn diagonal_weights(&self) -> Vec<f64> {
        diagonal_weights_of(&self.a, &self.b)
    }

    pub fn strict_lower_mass(&self) -> f64 {
        strict_lower_mass_of(&self.a, &self.b)
    }

    pub fn max_abs_imag(&self) -> f64 {
        linalg::max_abs_imag(&self.a).max(linalg::max_abs_imag(&self.b))
    }

    /// Whether the strictly lower mass is at most `tol^2`.
    pub fn is_upper_triangular(&self, tol: f64) -> bool {
        self.strict_lower_mass() <= tol * tol
    }

    /// Projection onto singular upper-triangular pencils: the strictly lower
    /// part is removed together with the diagonal pair of smallest weight
    /// (smallest position on ties).
    pub fn nearest_triangular_singular(&self) -> TriangularProjection {
        let (k, tie) = argmin_weight(&self.diagonal_weights());
        let mut proj = self.project_fixed_unchecked(k);
        proj.tie = tie;
        proj
    }

    /// Projection onto upper-triangular pencils with a zero diagonal pair at
    /// position `k` (0-based).
    pub fn project_triangular(&self, k: usize) -> Result<TriangularProjection> {
        if k >= self.n() {
            return Err(NspError::IndexOutOfRange { index: k, n: self.n() });
        }
        Ok(self.project_fixed_unchecked(k))
    }

    fn project_fixed_unchecked(&self, k: usize) -> TriangularProjection {
        let n = self.n();
        let keep = |i: usize, j: usize| i < j || (i == j && i != k);
        let zero = Complex64::new(0.0, 0.0);
        let a = CMat::from_fn(n, n, |i, j| if keep(i, j) { self.a[(i, j)] } else { zero });
        let b = CMat::from_fn(n, n, |i, j| if keep(i, j) { self.b[(i, j)] } else { zero });
        let squared_distance = self.strict_lower_mass() + self.diagonal_weights()[k];
        TriangularProjection {
            projected: Pencil { field: self.field, a, b },
            zero_index: k,
            squared_distance,
            tie: false,
        }
    }

    /// Part of the pencil removed by the requested projection.
    pub fn residual(&self, kind: ResidualKind) -> Result<Pencil> {
        let n = self.n();
        let k = match kind {
            ResidualKind::Min => Some(self.nearest_triangular_singular().zero_index),
            ResidualKind::Fixed(k) => {
                if k >= n {
                    return Err(NspError::IndexOutOfRange { index: k, n });
                }
                Some(k)
            }
            _ => None,
        };
        let take = |i: usize, j: usize| match kind {
            ResidualKind::StrictLower => i > j,
            ResidualKind::Diagonal => i == j,
            _ => i > j || (i == j && Some(i) == k),
        };
        let zero = Complex64::new(0.0, 0.0);
        let a = CMat::from_fn(n, n, |i, j| if take(i, j) { self.a[(i, j)] } else { zero });
        let b = CMat::from_fn(n, n, |i, j| if take(i, j) { self.b[(i, j)] } else { zero });
        Ok(Pencil { field: self.field, a, b })
    }

    /// Largest ratio `σ_min / σ_max` of `A + λB` over `samples - 1` points on
    /// the unit circle plus the point at infinity. A regular pencil of size
    /// `n` cannot have all these ratios vanish once `samples >= n + 1`, so
    /// values near machine precision indicate singularity.
    pub fn singularity_defect(&self, samples: usize) -> Result<f64> {
        let n = self.n();
        if samples < n + 1 {
            return Err(NspError::InvalidArgument(format!(
                "singularity defect needs at least {} samples, got {samples}",
                n + 1
            )));
        }
        let ratio = |m: &CMat| {
            let s = linalg::singular_values(m);
            let hi = s[0];
            let lo = *s.last().unwrap_or(&0.0);
            if hi == 0.0 {
                0.0
            } else {
                lo / hi
            }
        };
        // Irrational offset keeps the sample points away from structured
        // eigenvalues such as roots of unity.
        let offset = 0.5 * (5f64.sqrt() - 1.0);
        let finite = samples - 1;
        let mut worst = ratio(&self.b);
        for j in 0..finite {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + offset) / finite as f64;
            let lambda = Complex64::from_polar(1.0, theta);
            let m = &self.a + self.b.map(|z| z * lambda);
            worst = worst.max(ratio(&m));
        }
        Ok(worst)
    }

    /// Default number of samples used for [`Pencil::singularity_defect`].
    pub fn default_defect_samples(&self) -> usize {
        self.n() + 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upper(n: usize, seed: u64) -> Pencil {
        let p = Pencil::random(n, Field::Complex, seed).unwrap();
        let (_, a, b) = p.into_parts();
        let a = a.upper_triangle();
        let b = b.upper_triangle();
        Pencil::complex(a, b).unwrap()
    }

    #[test]
    fn rejects_mismatched_and_non_real_input() {
        let a = CMat::zeros(2, 2);
        let b = CMat::zeros(3, 3);
        assert!(matches!(
            Pencil::complex(a.clone(), b),
            Err(NspError::DimensionMismatch { .. })
        ));
        let mut c = a.clone();
        c[(1, 0)] = c64(0.0, 1.0);
        assert_eq!(
            Pencil::new(Field::Real, c, a),
            Err(NspError::NonRealEntry { row: 1, col: 0 })
        );
    }

    #[test]
    fn argmin_prefers_smallest_index() {
        assert_eq!(argmin_weight(&[3.0, 1.0, 1.0, 2.0]), (1, true));
        assert_eq!(argmin_weight(&[3.0, 2.0, 1.0]), (2, false));
    }

    #[test]
    fn projection_distance_matches_entrywise_difference() {
        let p = Pencil::random(5, Field::Complex, 11).unwrap();
        let proj = p.nearest_triangular_singular();
        let d = p.distance(&proj.projected).unwrap();
        assert!((d * d - proj.squared_distance).abs() <= 1e-14 * proj.squared_distance);
        let w = p.diagonal_weights();
        assert!(w.iter().all(|&x| x >= w[proj.zero_index]));
    }

    #[test]
    fn projected_pencil_is_triangular_with_zero_pair() {
        let p = Pencil::random(4, Field::Real, 2).unwrap();
        let proj = p.project_triangular(2).unwrap();
        assert!(proj.projected.is_upper_triangular(0.0));
        assert_eq!(proj.projected.diagonal_weights()[2], 0.0);
        assert_eq!(proj.projected.field(), Field::Real);
        assert!(p.project_triangular(4).is_err());
    }

    #[test]
    fn residual_plus_projection_recovers_pencil() {
        let p = Pencil::random(4, Field::Complex, 7).unwrap();
        for kind in [ResidualKind::Min, ResidualKind::Fixed(3)] {
            let r = p.residual(kind).unwrap();
            let k = match kind {
                ResidualKind::Fixed(k) => k,
                _ => p.nearest_triangular_singular().zero_index,
            };
            let proj = p.project_triangular(k).unwrap().projected;
            let back = Pencil::complex(proj.a() + r.a(), proj.b() + r.b()).unwrap();
            assert!(back.distance(&p).unwrap() == 0.0);
        }
        let lower = p.residual(ResidualKind::StrictLower).unwrap();
        assert!((lower.frobenius_norm().powi(2) - p.strict_lower_mass()).abs() < 1e-12);
        let diag = p.residual(ResidualKind::Diagonal).unwrap();
        let total: f64 = p.diagonal_weights().iter().sum();
        assert!((diag.frobenius_norm().powi(2) - total).abs() < 1e-12);
    }

    #[test]
    fn defect_separates_singular_from_regular() {
        let p = upper(6, 3);
        assert!(p.singularity_defect(p.default_defect_samples()).unwrap() > 1e-6);
        let s = p.nearest_triangular_singular().projected;
        assert!(s.singularity_defect(s.default_defect_samples()).unwrap() < 1e-14);
        assert!(p.singularity_defect(6).is_err());
    }

    #[test]
    fn transformed_by_identity_is_unchanged() {
        let p = Pencil::random(3, Field::Real, 1).unwrap();
        let i = linalg::identity(3);
        let t = p.transformed(&i, &i).unwrap();
        assert_eq!(t, p);
    }
}
