//! Generalized Schur form, reordering of diagonal pairs, closed-form
//! solutions for extreme minimal indices and genericity repair.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{NspError, Result};
use crate::linalg::{self, c64, CMat};
use crate::manifold::ManifoldPoint;
use crate::objectives::Objective;
use crate::pencil::{Field, Pencil};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `Q A Z = S` and `Q B Z = T` with `S`, `T` upper triangular and `Q`, `Z`
/// unitary.
#[derive(Clone, Debug)]
pub struct SchurForm {
    pub q: CMat,
    pub z: CMat,
    pub s: CMat,
    pub t: CMat,
}

impl SchurForm {
    pub fn pencil(&self) -> Pencil {
        Pencil::complex(self.s.clone(), self.t.clone()).expect("Schur factors are square")
    }

    pub fn point(&self) -> ManifoldPoint {
        ManifoldPoint::new_unchecked(Field::Complex, self.q.clone(), self.z.clone())
    }

    /// `|(QAZ, QBZ) - (S, T)|_F` for the given pencil.
    pub fn residual(&self, p: &Pencil) -> f64 {
        let a = linalg::matmul(&linalg::matmul(&self.q, p.a()), &self.z) - &self.s;
        let b = linalg::matmul(&linalg::matmul(&self.q, p.b()), &self.z) - &self.t;
        (linalg::frob_sq(&a) + linalg::frob_sq(&b)).sqrt()
    }
}

/// Plane rotation `[c s; -conj(s) c]` with real `c`, mapping `(f, g)` to
/// `(r, 0)`.
#[derive(Clone, Copy, Debug)]
struct Rot {
    c: f64,
    s: Complex64,
}

impl Rot {
    fn zeroing(f: Complex64, g: Complex64) -> Rot {
        if g == ZERO {
            return Rot { c: 1.0, s: ZERO };
        }
        if f == ZERO {
            return Rot { c: 0.0, s: g.conj() / g.norm() };
        }
        let fa = f.norm();
        let nrm = fa.hypot(g.norm());
        Rot { c: fa / nrm, s: (f / fa) * g.conj() / nrm }
    }

    /// Rows `i`, `j` of `m` are replaced by `G [row_i; row_j]`.
    fn rows(&self, m: &mut CMat, i: usize, j: usize) {
        for k in 0..m.ncols() {
            let x = m[(i, k)];
            let y = m[(j, k)];
            m[(i, k)] = x * self.c + self.s * y;
            m[(j, k)] = -self.s.conj() * x + y * self.c;
        }
    }

    /// Columns `p`, `q` of `m` are replaced by `[col_p col_q] W` with
    /// `W = [c s; -conj(s) c]`.
    fn cols(&self, m: &mut CMat, p: usize, q: usize) {
        for k in 0..m.nrows() {
            let x = m[(k, p)];
            let y = m[(k, q)];
            m[(k, p)] = x * self.c - self.s.conj() * y;
            m[(k, q)] = self.s * x + y * self.c;
        }
    }

    /// Column rotation that zeroes `m[(row, p)]` against `m[(row, q)]`.
    fn zeroing_in_row(m: &CMat, row: usize, p: usize, q: usize) -> Rot {
        Rot::zeroing(m[(row, q)], m[(row, p)])
    }
}

struct Qz {
    h: CMat,
    t: CMat,
    q: CMat,
    z: CMat,
}

impl Qz {
    fn left(&mut self, g: Rot, i: usize, j: usize) {
        g.rows(&mut self.h, i, j);
        g.rows(&mut self.t, i, j);
        g.rows(&mut self.q, i, j);
    }

    fn right(&mut self, g: Rot, p: usize, q: usize) {
        g.cols(&mut self.h, p, q);
        g.cols(&mut self.t, p, q);
        g.cols(&mut self.z, p, q);
    }

    /// Moves a zero `t[(j, j)]` down to `t[(hi, hi)]` and then splits off an
    /// infinite eigenvalue at the bottom of the active block.
    fn chase_zero(&mut self, lo: usize, j: usize, hi: usize) {
        self.t[(j, j)] = ZERO;
        for jj in j..hi {
            let g = Rot::zeroing(self.t[(jj, jj + 1)], self.t[(jj + 1, jj + 1)]);
            self.left(g, jj, jj + 1);
            self.t[(jj + 1, jj + 1)] = ZERO;
            if jj > lo {
                let g = Rot::zeroing_in_row(&self.h, jj + 1, jj - 1, jj);
                self.right(g, jj - 1, jj);
                self.h[(jj + 1, jj - 1)] = ZERO;
                self.t[(jj, jj - 1)] = ZERO;
            }
        }
        if hi > lo {
            let g = Rot::zeroing_in_row(&self.h, hi, hi - 1, hi);
            self.right(g, hi - 1, hi);
            self.h[(hi, hi - 1)] = ZERO;
            self.t[(hi, hi - 1)] = ZERO;
        }
    }

    /// Eigenvalue of the trailing 2x2 block closest to its last diagonal
    /// ratio.
    fn wilkinson_shift(&self, hi: usize) -> Complex64 {
        let (h, t) = (&self.h, &self.t);
        let i = hi - 1;
        let (h11, h12, h21, h22) = (h[(i, i)], h[(i, hi)], h[(hi, i)], h[(hi, hi)]);
        let (t11, t12, t22) = (t[(i, i)], t[(i, hi)], t[(hi, hi)]);
        // det(H - σT) = aσ² + bσ + c
        let a = t11 * t22;
        let b = -(h11 * t22 + h22 * t11) + h21 * t12;
        let c = h11 * h22 - h12 * h21;
        let disc = (b * b - a * c * 4.0).sqrt();
        let r1 = (-b + disc) / (a * 2.0);
        let r2 = (-b - disc) / (a * 2.0);
        let target = h22 / t22;
        if (r1 - target).norm() <= (r2 - target).norm() {
            r1
        } else {
            r2
        }
    }

    fn sweep(&mut self, lo: usize, hi: usize, shift: Complex64) {
        let f = self.h[(lo, lo)] - shift * self.t[(lo, lo)];
        let g = self.h[(lo + 1, lo)];
        let rot = Rot::zeroing(f, g);
        self.left(rot, lo, lo + 1);
        for k in lo..hi {
            // T gained t[(k+1, k)].
            let rot = Rot::zeroing_in_row(&self.t, k + 1, k, k + 1);
            self.right(rot, k, k + 1);
            self.t[(k + 1, k)] = ZERO;
            if k + 2 <= hi {
                // H gained h[(k+2, k)].
                let rot = Rot::zeroing(self.h[(k + 1, k)], self.h[(k + 2, k)]);
                self.left(rot, k + 1, k + 2);
                self.h[(k + 2, k)] = ZERO;
            }
        }
    }
}

/// Complex generalized Schur decomposition by Hessenberg-triangular
/// reduction followed by single-shift QZ iterations.
pub fn generalized_schur(p: &Pencil) -> Result<SchurForm> {
    let n = p.n();
    let qr = p.b().clone().qr();
    let u = qr.q();
    let mut st = Qz {
        h: linalg::matmul_ah(&u, p.a()),
        t: linalg::matmul_ah(&u, p.b()),
        q: u.adjoint(),
        z: linalg::identity(n),
    };
    for j in 0..n {
        for i in (j + 1)..n {
            st.t[(i, j)] = ZERO;
        }
    }
    // Hessenberg-triangular reduction.
    for j in 0..n.saturating_sub(2) {
        for i in ((j + 2)..n).rev() {
            let g = Rot::zeroing(st.h[(i - 1, j)], st.h[(i, j)]);
            st.left(g, i - 1, i);
            st.h[(i, j)] = ZERO;
            let g = Rot::zeroing_in_row(&st.t, i, i - 1, i);
            st.right(g, i - 1, i);
            st.t[(i, i - 1)] = ZERO;
        }
    }

    let h_norm = st.h.norm().max(f64::MIN_POSITIVE);
    let t_norm = st.t.norm().max(f64::MIN_POSITIVE);
    let h_tol = f64::EPSILON * h_norm;
    let t_tol = f64::EPSILON * t_norm;
    let max_sweeps = 60 * n.max(1);
    let mut sweeps = 0;
    let mut since_deflation = 0;
    let mut hi = n.saturating_sub(1);

    while hi > 0 {
        if st.h[(hi, hi - 1)].norm() <= h_tol {
            st.h[(hi, hi - 1)] = ZERO;
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        let mut lo = hi - 1;
        while lo > 0 {
            if st.h[(lo, lo - 1)].norm() <= h_tol {
                st.h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if let Some(j) = (lo..=hi).find(|&j| st.t[(j, j)].norm() <= t_tol) {
            st.chase_zero(lo, j, hi);
            continue;
        }
        if sweeps >= max_sweeps {
            return Err(NspError::QzNoConvergence(sweeps));
        }
        sweeps += 1;
        since_deflation += 1;
        let mut shift = st.wilkinson_shift(hi);
        if since_deflation % 11 == 0 {
            let scale = st.h[(hi, hi - 1)].norm() / st.t[(hi, hi)].norm();
            shift += c64(scale, 0.5 * scale);
        }
        if !(shift.re.is_finite() && shift.im.is_finite()) {
            shift = st.h[(hi, hi)] / st.t[(hi, hi)];
        }
        st.sweep(lo, hi, shift);
    }

    for j in 0..n {
        for i in (j + 1)..n {
            st.h[(i, j)] = ZERO;
            st.t[(i, j)] = ZERO;
        }
    }
    Ok(SchurForm { q: st.q, z: st.z, s: st.h, t: st.t })
}

/// Result of reordering a 2x2 upper-triangular pencil: `U^H (A, B) V`
/// equals `(a, b)`, upper triangular with the diagonal pairs exchanged.
#[derive(Clone, Debug)]
pub struct Swap2x2 {
    pub u: CMat,
    pub v: CMat,
    pub a: CMat,
    pub b: CMat,
}

fn unit_pair(x: Complex64, y: Complex64) -> Option<(Complex64, Complex64)> {
    let nrm = x.norm().hypot(y.norm());
    (nrm > 0.0).then(|| (x / nrm, y / nrm))
}

/// Unitary matrix with second column `(c1, c2)`.
fn with_second_column(c1: Complex64, c2: Complex64) -> CMat {
    CMat::from_row_slice(2, 2, &[c2.conj(), c1, -c1.conj(), c2])
}

/// Exchanges the diagonal pairs of a regular upper-triangular 2x2 pencil.
///
/// `s = -b11 A + a11 B` has a zero first column; the left vector
/// annihilating `s` fixes the new last row, on which `A` and `B` are
/// proportional, and that row fixes the right factor. A vanishing diagonal
/// pair makes the pencil singular and its position is a unitary invariant,
/// so such input is rejected.
pub fn swap_adjacent_2x2(a: &CMat, b: &CMat) -> Result<Swap2x2> {
    if a.shape() != (2, 2) || b.shape() != (2, 2) {
        return Err(NspError::DimensionMismatch {
            expected: "2x2".into(),
            found: format!("{:?}", a.shape()),
        });
    }
    let one = c64(1.0, 0.0);
    let (a11, b11, a22, b22) = (a[(0, 0)], b[(0, 0)], a[(1, 1)], b[(1, 1)]);
    let lead = a11.norm().hypot(b11.norm());
    let trail = a22.norm().hypot(b22.norm());
    if lead == 0.0 || trail == 0.0 {
        return Err(NspError::SingularBlock);
    }
    let s12 = -b11 * a[(0, 1)] + a11 * b[(0, 1)];
    let s22 = -b11 * a22 + a11 * b22;
    let (u1, u2) = unit_pair(s22.conj(), -s12.conj()).unwrap_or((ZERO, one));
    let u = with_second_column(u1, u2);
    // Row u2^H A (or B), whichever is better determined.
    let ra = (u1.conj() * a11, u1.conj() * a[(0, 1)] + u2.conj() * a22);
    let rb = (u1.conj() * b11, u1.conj() * b[(0, 1)] + u2.conj() * b22);
    let row = if ra.0.norm().hypot(ra.1.norm()) >= rb.0.norm().hypot(rb.1.norm()) { ra } else { rb };
    let (v1, v2) = unit_pair(row.0.conj(), row.1.conj()).unwrap_or((ZERO, one));
    let v = with_second_column(v1, v2);
    let mut sa = u.adjoint() * a * &v;
    let mut sb = u.adjoint() * b * &v;
    sa[(1, 0)] = ZERO;
    sb[(1, 0)] = ZERO;
    Ok(Swap2x2 { u, v, a: sa, b: sb })
}

/// Exchanges diagonal pairs `k` and `k + 1` of an upper-triangular pencil,
/// updating the accumulated factors so that `Q A0 Z = (S, T)` still holds.
pub fn swap_in_place(form: &mut SchurForm, k: usize) -> Result<()> {
    let n = form.s.nrows();
    if k + 1 >= n {
        return Err(NspError::IndexOutOfRange { index: k + 1, n });
    }
    let a = form.s.view((k, k), (2, 2)).clone_owned();
    let b = form.t.view((k, k), (2, 2)).clone_owned();
    let sw = swap_adjacent_2x2(&a, &b)?;
    let (l, r) = (sw.u.adjoint(), sw.v);
    for m in [&mut form.s, &mut form.t, &mut form.q] {
        let rows = m.rows(k, 2).clone_owned();
        m.rows_mut(k, 2).copy_from(&(&l * rows));
    }
    for m in [&mut form.s, &mut form.t, &mut form.z] {
        let cols = m.columns(k, 2).clone_owned();
        m.columns_mut(k, 2).copy_from(&(cols * &r));
    }
    form.s[(k + 1, k)] = ZERO;
    form.t[(k + 1, k)] = ZERO;
    Ok(())
}

/// Objective values of the generalized Schur form and of the forms obtained
/// by moving its leading diagonal pair down one position at a time.
pub fn permuted_schur_sweep(objective: &Objective) -> Result<Vec<(ManifoldPoint, f64)>> {
    let p = objective.pencil();
    let mut form = generalized_schur(p)?;
    let mut out = Vec::with_capacity(p.n());
    let x = form.point();
    out.push((x.clone(), objective.value(&x)?.value));
    for k in 0..p.n().saturating_sub(1) {
        swap_in_place(&mut form, k)?;
        let x = form.point();
        out.push((x.clone(), objective.value(&x)?.value));
    }
    Ok(out)
}

/// Best point of [`permuted_schur_sweep`].
pub fn permuted_schur_start(objective: &Objective) -> Result<ManifoldPoint> {
    let sweep = permuted_schur_sweep(objective)?;
    let (x, _) = sweep
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("sweep is non-empty");
    Ok(x)
}

/// Right minimal index read off a singular upper-triangular pencil: the
/// uppermost diagonal position whose weight is at most `tol²`. The default
/// tolerance is `1e-8` times the pencil norm. The reading is exact for
/// generic pencils of this shape (see [`regularize_min_index`]); genericity
/// itself is not checked.
pub fn extract_min_index(t: &Pencil, tol: Option<f64>) -> Result<usize> {
    let tol = tol.unwrap_or(1e-8 * t.frobenius_norm());
    t.diagonal_weights()
        .iter()
        .position(|&w| w <= tol * tol)
        .ok_or(NspError::NoZeroDiagonal(tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremeIndex {
    /// Common constant right null vector (zero pair in the first position).
    Zero,
    /// Common constant left null vector (zero pair in the last position).
    Max,
}

/// Distance to and nearest pencil with a constant right (`Zero`) or left
/// (`Max`) null vector, from the smallest singular triple of `[A; B]` or
/// `[A B]`.
pub fn closed_form_extreme_index(p: &Pencil, which: ExtremeIndex) -> Result<(f64, Pencil)> {
    let n = p.n();
    let stacked = match which {
        ExtremeIndex::Zero => {
            let mut m = CMat::zeros(2 * n, n);
            m.rows_mut(0, n).copy_from(p.a());
            m.rows_mut(n, n).copy_from(p.b());
            m
        }
        ExtremeIndex::Max => {
            let mut m = CMat::zeros(n, 2 * n);
            m.columns_mut(0, n).copy_from(p.a());
            m.columns_mut(n, n).copy_from(p.b());
            m
        }
    };
    let svd = stacked.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let (imin, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let uc = u.column(imin).clone_owned();
    let vr = vt.row(imin).clone_owned();
    let delta = (&uc * &vr).map(|z| z * sigma);
    let fixed = stacked - delta;
    let (a, b) = match which {
        ExtremeIndex::Zero => (fixed.rows(0, n).clone_owned(), fixed.rows(n, n).clone_owned()),
        ExtremeIndex::Max => (fixed.columns(0, n).clone_owned(), fixed.columns(n, n).clone_owned()),
    };
    let out = if p.field().is_real() && linalg::is_real(&a) && linalg::is_real(&b) {
        Pencil::new(Field::Real, a, b)?
    } else {
        Pencil::complex(a, b)?
    };
    Ok((sigma, out))
}

/// Smallest degree `d` of a nonzero polynomial vector `v(λ)` with
/// `(A + λB) v(λ) = 0`, found from rank deficiencies of the block Toeplitz
/// matrices of increasing degree. `None` when the pencil is regular.
pub fn right_minimal_index(p: &Pencil, rel_tol: f64) -> Option<usize> {
    let n = p.n();
    let scale = p.frobenius_norm().max(f64::MIN_POSITIVE);
    for d in 0..n {
        let rows = n * (d + 2);
        let cols = n * (d + 1);
        let mut m = CMat::zeros(rows, cols);
        for j in 0..=d {
            m.view_mut((j * n, j * n), (n, n)).copy_from(p.a());
            m.view_mut(((j + 1) * n, j * n), (n, n)).copy_from(p.b());
        }
        let s = linalg::singular_values(&m);
        if s[cols - 1] <= rel_tol * scale {
            return Some(d);
        }
    }
    None
}

/// Random perturbation of the given Frobenius norm.
fn random_direction<R: Rng>(len: usize, norm: f64, complex: bool, rng: &mut R) -> Vec<Complex64> {
    let g = linalg::gaussian(len, 1, complex, rng);
    let gn = g.norm();
    g.iter().map(|z| z * (norm / gn)).collect()
}

/// Numerical rank test: smallest singular value of a wide or tall matrix
/// above `tol`.
fn full_rank(m: &CMat, tol: f64) -> bool {
    if m.nrows() == 0 || m.ncols() == 0 {
        return true;
    }
    let s = linalg::singular_values(m);
    let r = m.nrows().min(m.ncols());
    s[r - 1] > tol
}

/// Perturbs a singular upper-triangular pencil with its zero diagonal pair
/// at position `k` by at most `eps` (Frobenius) so that its right minimal
/// index is exactly `k`.
///
/// The pencil is split around position `k` into a leading block `T1`, the
/// column `R1` above the zero pair, the row `R3` to its right and a trailing
/// block `T2`. Genericity requires distinct nonzero diagonal pairs and full
/// rank of `[T1(μ) R1(μ)]` and `[R3(μ); T2(μ)]` at every eigenvalue `μ` of
/// the respective block. Only the parts that violate these conditions are
/// perturbed, with random draws repeated up to 100 times.
pub fn regularize_min_index(t: &Pencil, k: usize, eps: f64, seed: u64) -> Result<Pencil> {
    let n = t.n();
    if k >= n {
        return Err(NspError::IndexOutOfRange { index: k, n });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(NspError::InvalidArgument("eps must be positive".into()));
    }
    let complex = !t.field().is_real();
    let norm = t.frobenius_norm();
    let tol = (1e-8 * eps).max(100.0 * f64::EPSILON * norm);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (field, a0, b0) = t.clone().into_parts();
    let mut a = a0.clone();
    let mut b = b0.clone();
    for j in 0..n {
        for i in (j + 1)..n {
            a[(i, j)] = ZERO;
            b[(i, j)] = ZERO;
        }
    }
    a[(k, k)] = ZERO;
    b[(k, k)] = ZERO;

    let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let diag_ok = |a: &CMat, b: &CMat| {
        others.iter().all(|&i| a[(i, i)].norm().hypot(b[(i, i)].norm()) > tol)
            && others.iter().enumerate().all(|(pos, &i)| {
                others[pos + 1..].iter().all(|&j| {
                    let cross = (a[(i, i)] * b[(j, j)] - a[(j, j)] * b[(i, i)]).norm();
                    let si = a[(i, i)].norm().hypot(b[(i, i)].norm());
                    let sj = a[(j, j)].norm().hypot(b[(j, j)].norm());
                    cross > tol * si * sj / norm.max(tol)
                })
            })
    };
    let attempts = 100;
    if !others.is_empty() && !diag_ok(&a, &b) {
        let per = eps / (3.0 * (others.len() as f64).sqrt());
        let mut done = false;
        for _ in 0..attempts {
            let mut a1 = a.clone();
            let mut b1 = b.clone();
            for &i in &others {
                let d = random_direction(2, per * 0.999, complex, &mut rng);
                a1[(i, i)] += d[0];
                b1[(i, i)] += d[1];
            }
            if diag_ok(&a1, &b1) {
                a = a1;
                b = b1;
                done = true;
                break;
            }
        }
        if !done {
            return Err(NspError::ResamplingExhausted(attempts));
        }
    }

    // Eigenvalues of a diagonal block as (alpha, beta) with det(alpha A + ... )
    // represented projectively: A + μB is singular at μ = -a_ii / b_ii.
    let block_at = |a: &CMat, b: &CMat, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, ai: Complex64, bi: Complex64| {
        let r = rows.len();
        let c = cols.len();
        CMat::from_fn(r, c, |i, j| {
            let (ii, jj) = (rows.start + i, cols.start + j);
            a[(ii, jj)] * ai + b[(ii, jj)] * bi
        })
    };
    // At a finite eigenvalue μ the pencil value is A + μB; at infinity it is B.
    let eval_points = |a: &CMat, b: &CMat, idx: &[usize]| -> Vec<(Complex64, Complex64)> {
        idx.iter()
            .map(|&i| {
                if b[(i, i)].norm() <= tol {
                    (ZERO, c64(1.0, 0.0))
                } else {
                    (c64(1.0, 0.0), -a[(i, i)] / b[(i, i)])
                }
            })
            .collect()
    };
    let lead: Vec<usize> = (0..k).collect();
    let trail: Vec<usize> = (k + 1..n).collect();

    let lead_ok = |a: &CMat, b: &CMat| {
        eval_points(a, b, &lead)
            .into_iter()
            .all(|(ai, bi)| full_rank(&block_at(a, b, 0..k, 0..k + 1, ai, bi), tol))
    };
    let trail_ok = |a: &CMat, b: &CMat| {
        eval_points(a, b, &trail)
            .into_iter()
            .all(|(ai, bi)| full_rank(&block_at(a, b, k..n, k + 1..n, ai, bi), tol))
    };

    let budget = eps / 3.0 * 0.999;
    if !lead_ok(&a, &b) {
        let infinite = eval_points(&a, &b, &lead).iter().any(|p| p.0 == ZERO);
        let mut done = false;
        for _ in 0..attempts {
            let mut a1 = a.clone();
            let mut b1 = b.clone();
            let d = random_direction(if infinite { 2 * k } else { k }, budget, complex, &mut rng);
            for i in 0..k {
                a1[(i, k)] += d[i];
                if infinite {
                    b1[(i, k)] += d[k + i];
                }
            }
            if lead_ok(&a1, &b1) {
                a = a1;
                b = b1;
                done = true;
                break;
            }
        }
        if !done {
            return Err(NspError::ResamplingExhausted(attempts));
        }
    }
    if !trail_ok(&a, &b) {
        let m = n - k - 1;
        let infinite = eval_points(&a, &b, &trail).iter().any(|p| p.0 == ZERO);
        let mut done = false;
        for _ in 0..attempts {
            let mut a1 = a.clone();
            let mut b1 = b.clone();
            let d = random_direction(if infinite { 2 * m } else { m }, budget, complex, &mut rng);
            for j in 0..m {
                a1[(k, k + 1 + j)] += d[j];
                if infinite {
                    b1[(k, k + 1 + j)] += d[m + j];
                }
            }
            if trail_ok(&a1, &b1) {
                a = a1;
                b = b1;
                done = true;
                break;
            }
        }
        if !done {
            return Err(NspError::ResamplingExhausted(attempts));
        }
    }
    Pencil::new(field, a, b)
}

/// Real part of a matrix, for tests on real data.
#[doc(hidden)]
pub fn real_part(m: &CMat) -> DMatrix<f64> {
    m.map(|z| z.re)
}
