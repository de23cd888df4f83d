//! Cost functions on `U(n) × U(n)` and their derivatives.
//!
//! For `x = (Q, Z)` let `M_A = QAZ`, `M_B = QBZ` and let `w_i` be the
//! diagonal weights `|M_A,ii|² + |M_B,ii|²`. Every variant equals the
//! strictly lower mass of `(M_A, M_B)` plus a function of `w`:
//!
//! * `Direct`: `min_i w_i` (smallest index on ties),
//! * `Branch(k)`: `w_k`,
//! * `Smoothed { alpha }`: the Boltzmann softmin `Σ w_i e^{α w_i} / Σ e^{α w_i}`.

use std::cell::OnceCell;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};
use crate::linalg::{self, CMat};
use crate::manifold::{ManifoldPoint, MatPair};
use crate::pencil::{self, Pencil};
use crate::trust_region::{LocalModel, Problem};

const TWO: Complex64 = Complex64 { re: 2.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Direct,
    /// Diagonal position (0-based) forced to vanish.
    Branch(usize),
    Smoothed { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveEvaluation {
    pub value: f64,
    /// Position of the smallest diagonal weight.
    pub min_diag_index: usize,
    /// Another position attains exactly the same minimal weight.
    pub tie: bool,
}

#[derive(Clone, Debug)]
pub struct Objective {
    pencil: Pencil,
    variant: Variant,
    norm: f64,
}

/// Boltzmann softmin value, softmax weights and gradient.
#[derive(Clone, Debug)]
struct Softmin {
    value: f64,
    p: Vec<f64>,
    grad: Vec<f64>,
    alpha: f64,
    x: Vec<f64>,
}

impl Softmin {
    fn new(x: &[f64], alpha: f64) -> Softmin {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let e: Vec<f64> = x.iter().map(|&xi| (alpha * (xi - lo)).exp()).collect();
        let total: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|ei| ei / total).collect();
        let value = lo + p.iter().zip(x).map(|(pi, xi)| pi * (xi - lo)).sum::<f64>();
        let grad = p
            .iter()
            .zip(x)
            .map(|(pi, xi)| if *pi == 0.0 { 0.0 } else { pi * (1.0 + alpha * (xi - value)) })
            .collect();
        Softmin { value, p, grad, alpha, x: x.to_vec() }
    }

    /// Hessian-vector product. The Hessian entries are
    /// `α p_i [(δ_ij - p_j)(1 + α(x_i - S)) + δ_ij - g_j]`.
    fn hess_apply(&self, v: &[f64]) -> Vec<f64> {
        let pv: f64 = self.p.iter().zip(v).map(|(a, b)| a * b).sum();
        let gv: f64 = self.grad.iter().zip(v).map(|(a, b)| a * b).sum();
        (0..v.len())
            .map(|i| {
                let pi = self.p[i];
                if pi == 0.0 {
                    return 0.0;
                }
                let c = 1.0 + self.alpha * (self.x[i] - self.value);
                self.alpha * pi * ((v[i] - pv) * c + v[i] - gv)
            })
            .collect()
    }
}

/// `Σ x_i e^{α x_i} / Σ e^{α x_i}`, evaluated with shifted exponents.
pub fn softmin_boltzmann(x: &[f64], alpha: f64) -> f64 {
    Softmin::new(x, alpha).value
}

pub fn softmin_gradient(x: &[f64], alpha: f64) -> Vec<f64> {
    Softmin::new(x, alpha).grad
}

/// Dense symmetric Hessian of the softmin.
pub fn softmin_hessian(x: &[f64], alpha: f64) -> DMatrix<f64> {
    let s = Softmin::new(x, alpha);
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        h.set_column(j, &nalgebra::DVector::from_vec(s.hess_apply(&e)));
    }
    h
}

impl Objective {
    pub fn new(pencil: Pencil, variant: Variant) -> Result<Objective> {
        match variant {
            Variant::Branch(k) if k >= pencil.n() => {
                return Err(NspError::IndexOutOfRange { index: k, n: pencil.n() })
            }
            Variant::Smoothed { alpha } if !(alpha.is_finite() && alpha < 0.0) => {
                return Err(NspError::InvalidArgument(format!(
                    "softmin parameter must be finite and negative, got {alpha}"
                )))
            }
            _ => {}
        }
        let norm = pencil.frobenius_norm();
        Ok(Objective { pencil, variant, norm })
    }

    pub fn direct(pencil: Pencil) -> Objective {
        let norm = pencil.frobenius_norm();
        Objective { pencil, variant: Variant::Direct, norm }
    }

    pub fn pencil(&self) -> &Pencil {
        &self.pencil
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn local(&self, x: &ManifoldPoint) -> Result<LocalEvaluation<'_>> {
        LocalEvaluation::new(self, x)
    }

    pub fn value(&self, x: &ManifoldPoint) -> Result<ObjectiveEvaluation> {
        Ok(self.local(x)?.evaluation)
    }

    /// Gradient in the ambient space of `n × n` matrix pairs. For the direct
    /// variant an exact tie among minimal weights is reported as an error.
    pub fn euclidean_gradient(&self, x: &ManifoldPoint) -> Result<MatPair> {
        let local = self.local(x)?;
        local.check_differentiable()?;
        Ok(local.derivs().egrad.clone())
    }

    pub fn euclidean_hessian_vec(&self, x: &ManifoldPoint, d: &MatPair) -> Result<MatPair> {
        let local = self.local(x)?;
        local.check_differentiable()?;
        local.check_shape(d)?;
        local.ehess(d)
    }

    pub fn riemannian_gradient(&self, x: &ManifoldPoint) -> Result<MatPair> {
        let local = self.local(x)?;
        local.check_differentiable()?;
        Ok(local.derivs().rgrad.clone())
    }

    pub fn riemannian_hessian_vec(&self, x: &ManifoldPoint, u: &MatPair) -> Result<MatPair> {
        let local = self.local(x)?;
        local.check_differentiable()?;
        local.check_shape(u)?;
        local.rhess(u)
    }
}

impl Problem for Objective {
    type Local<'a> = LocalEvaluation<'a>;

    fn local<'a>(&'a self, x: &ManifoldPoint) -> Result<LocalEvaluation<'a>> {
        LocalEvaluation::new(self, x)
    }
}

struct Derivs {
    az: CMat,
    bz: CMat,
    ra: CMat,
    rb: CMat,
    egrad: MatPair,
    rgrad: MatPair,
    sym_q: CMat,
    sym_z: CMat,
}

/// Objective state at one point. Products of the pencil with the factors
/// are shared by the value, gradient and Hessian; derivatives are formed on
/// first use.
pub struct LocalEvaluation<'a> {
    objective: &'a Objective,
    point: ManifoldPoint,
    qa: CMat,
    qb: CMat,
    ma: CMat,
    mb: CMat,
    evaluation: ObjectiveEvaluation,
    /// Coefficient of each diagonal weight in the cost's first variation.
    coeff: Vec<f64>,
    softmin: Option<Softmin>,
    derivs: OnceCell<Derivs>,
}

impl<'a> LocalEvaluation<'a> {
    fn new(objective: &'a Objective, x: &ManifoldPoint) -> Result<LocalEvaluation<'a>> {
        let p = &objective.pencil;
        if x.n() != p.n() {
            return Err(NspError::DimensionMismatch {
                expected: format!("size {}", p.n()),
                found: format!("size {}", x.n()),
            });
        }
        let qa = linalg::matmul(x.q(), p.a());
        let qb = linalg::matmul(x.q(), p.b());
        let ma = linalg::matmul(&qa, x.z());
        let mb = linalg::matmul(&qb, x.z());
        let weights = pencil::diagonal_weights_of(&ma, &mb);
        let lower = pencil::strict_lower_mass_of(&ma, &mb);
        let (kmin, tie) = pencil::argmin_weight(&weights);
        let n = p.n();
        let unit = |k: usize| {
            let mut c = vec![0.0; n];
            c[k] = 1.0;
            c
        };
        let (diag_part, coeff, softmin) = match objective.variant {
            Variant::Direct => (weights[kmin], unit(kmin), None),
            Variant::Branch(k) => (weights[k], unit(k), None),
            Variant::Smoothed { alpha } => {
                let s = Softmin::new(&weights, alpha);
                (s.value, s.grad.clone(), Some(s))
            }
        };
        let value = lower + diag_part;
        if !value.is_finite() || coeff.iter().any(|c| !c.is_finite()) {
            return Err(NspError::NonFinite("objective value"));
        }
        Ok(LocalEvaluation {
            objective,
            point: x.clone(),
            qa,
            qb,
            ma,
            mb,
            evaluation: ObjectiveEvaluation { value, min_diag_index: kmin, tie },
            coeff,
            softmin,
            derivs: OnceCell::new(),
        })
    }

    pub fn evaluation(&self) -> ObjectiveEvaluation {
        self.evaluation
    }

    pub fn point(&self) -> &ManifoldPoint {
        &self.point
    }

    /// `(QAZ, QBZ)` at this point.
    pub fn transformed(&self) -> (&CMat, &CMat) {
        (&self.ma, &self.mb)
    }

    fn check_differentiable(&self) -> Result<()> {
        if self.objective.variant == Variant::Direct && self.evaluation.tie {
            let w = pencil::diagonal_weights_of(&self.ma, &self.mb);
            let m = w[self.evaluation.min_diag_index];
            let idx = (0..w.len()).filter(|&i| w[i] == m).collect();
            return Err(NspError::NonDifferentiable(idx));
        }
        Ok(())
    }

    fn check_shape(&self, d: &MatPair) -> Result<()> {
        let n = self.point.n();
        if d.q.shape() != (n, n) || d.z.shape() != (n, n) {
            return Err(NspError::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{:?}", d.q.shape()),
            });
        }
        Ok(())
    }

    /// Strict lower part of `m` plus `diag(coeff ∘ diag(m))`.
    fn weighted(&self, m: &CMat, coeff: &[f64]) -> CMat {
        let n = m.nrows();
        CMat::from_fn(n, n, |i, j| {
            if i > j {
                m[(i, j)]
            } else if i == j {
                m[(i, i)] * coeff[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn derivs(&self) -> &Derivs {
        self.derivs.get_or_init(|| {
            let p = &self.objective.pencil;
            let x = &self.point;
            let az = linalg::matmul(p.a(), x.z());
            let bz = linalg::matmul(p.b(), x.z());
            let ra = self.weighted(&self.ma, &self.coeff);
            let rb = self.weighted(&self.mb, &self.coeff);
            let gq = (linalg::matmul_bh(&ra, &az) + linalg::matmul_bh(&rb, &bz)) * TWO;
            let gz = (linalg::matmul_ah(&self.qa, &ra) + linalg::matmul_ah(&self.qb, &rb)) * TWO;
            let egrad = MatPair::new(gq, gz);
            let sym_q = linalg::herm(&linalg::matmul_ah(x.q(), &egrad.q));
            let sym_z = linalg::herm(&linalg::matmul_ah(x.z(), &egrad.z));
            let rgrad = x.project_tangent(&egrad);
            Derivs { az, bz, ra, rb, egrad, rgrad, sym_q, sym_z }
        })
    }

    fn ehess(&self, d: &MatPair) -> Result<MatPair> {
        let p = &self.objective.pencil;
        let dv = self.derivs();
        let dqa = linalg::matmul(&d.q, p.a());
        let dqb = linalg::matmul(&d.q, p.b());
        let daz = linalg::matmul(p.a(), &d.z);
        let dbz = linalg::matmul(p.b(), &d.z);
        let dma = linalg::matmul(&d.q, &dv.az) + linalg::matmul(&self.qa, &d.z);
        let dmb = linalg::matmul(&d.q, &dv.bz) + linalg::matmul(&self.qb, &d.z);
        let mut dra = self.weighted(&dma, &self.coeff);
        let mut drb = self.weighted(&dmb, &self.coeff);
        if let Some(s) = &self.softmin {
            let n = self.ma.nrows();
            let dx: Vec<f64> = (0..n)
                .map(|i| {
                    2.0 * ((self.ma[(i, i)].conj() * dma[(i, i)]).re
                        + (self.mb[(i, i)].conj() * dmb[(i, i)]).re)
                })
                .collect();
            let dw = s.hess_apply(&dx);
            for i in 0..n {
                dra[(i, i)] += self.ma[(i, i)] * dw[i];
                drb[(i, i)] += self.mb[(i, i)] * dw[i];
            }
        }
        let hq = (linalg::matmul_bh(&dra, &dv.az)
            + linalg::matmul_bh(&dv.ra, &daz)
            + linalg::matmul_bh(&drb, &dv.bz)
            + linalg::matmul_bh(&dv.rb, &dbz))
            * TWO;
        let hz = (linalg::matmul_ah(&dqa, &dv.ra)
            + linalg::matmul_ah(&self.qa, &dra)
            + linalg::matmul_ah(&dqb, &dv.rb)
            + linalg::matmul_ah(&self.qb, &drb))
            * TWO;
        let h = MatPair::new(hq, hz);
        if !h.is_finite() {
            return Err(NspError::NonFinite("Hessian-vector product"));
        }
        Ok(h)
    }

    /// `Proj(∇²f[u] - u · herm(X^H ∇f))` componentwise.
    fn rhess(&self, u: &MatPair) -> Result<MatPair> {
        let h = self.ehess(u)?;
        let dv = self.derivs();
        let corrected = MatPair::new(
            h.q - linalg::matmul(&u.q, &dv.sym_q),
            h.z - linalg::matmul(&u.z, &dv.sym_z),
        );
        Ok(self.point.project_tangent(&corrected))
    }
}

impl LocalModel for LocalEvaluation<'_> {
    fn cost(&self) -> f64 {
        self.evaluation.value
    }

    fn point(&self) -> &ManifoldPoint {
        &self.point
    }

    fn gradient(&self) -> Result<MatPair> {
        let g = self.derivs().rgrad.clone();
        if !g.is_finite() {
            return Err(NspError::NonFinite("gradient"));
        }
        Ok(g)
    }

    fn hessian_vec(&self, u: &MatPair) -> Result<MatPair> {
        self.rhess(u)
    }

    /// Each gradient block is at most `2 |(A, B)| sqrt(f)` in norm.
    fn gradient_scale(&self) -> f64 {
        2.0 * self.objective.norm * self.evaluation.value.max(0.0).sqrt()
    }

    fn nondifferentiable(&self) -> bool {
        self.objective.variant == Variant::Direct && self.evaluation.tie
    }
}
