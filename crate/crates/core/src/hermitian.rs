//! Dense complex matrices and Hermitian spectral tools.
//!
//! Everything here works through eigenvalues: log-determinants, inverses of
//! positive-definite matrices and the Euclidean projection onto the
//! trace-constrained PSD cone `{Q ⪰ 0, tr Q ≤ P}`. Eigendecompositions use the
//! cyclic complex Jacobi method, which is exact to a few ulps on the small
//! matrices (dim ≤ 64) this crate deals with.

use std::f64::consts::LN_2;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, precondition, Result};

pub type C64 = Complex64;

/// Largest dimension accepted by the spectral routines.
pub const MAX_DIM: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl TryFrom<MatrixRecord> for ComplexMatrix {
    type Error = crate::error::Error;
    fn try_from(r: MatrixRecord) -> Result<Self> {
        ComplexMatrix::new(r.rows, r.cols, r.entries)
    }
}

impl From<ComplexMatrix> for MatrixRecord {
    fn from(m: ComplexMatrix) -> Self {
        MatrixRecord { rows: m.rows, cols: m.cols, entries: m.data }
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return param(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return param("matrix entries must be finite");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Real matrix from nested rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return param("ragged rows");
        }
        let data = rows.iter().flat_map(|row| row.iter().map(|&x| C64::new(x, 0.0))).collect();
        Self::new(r, c, data)
    }

    /// Column vector.
    pub fn column(v: &[C64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `self · v` for a column vector given as a slice.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Real part of `tr(self · other)`, the Hermitian inner product when one
    /// factor is Hermitian.
    pub fn trace_product_re(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = 0.0;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += (self[(i, k)] * other[(k, i)]).re;
            }
        }
        acc
    }

    /// Max entrywise deviation from Hermitian symmetry.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(A + Aᴴ)/2` with an exactly real diagonal.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = C64::new(self[(i, i)].re, 0.0);
            for j in i + 1..n {
                let v = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        out
    }

    /// Spectral (largest singular value) norm.
    pub fn operator_norm(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let gram = if self.cols <= self.rows {
            &self.conj_transpose() * self
        } else {
            self * &self.conj_transpose()
        };
        hermitian_eigenvalues(&gram).first().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Default PSD / Hermitian tolerance: `1e-9 · dim · max|entry|`.
pub fn default_tolerance(m: &ComplexMatrix) -> f64 {
    1e-9 * m.rows().max(1) as f64 * m.max_abs()
}

/// A Hermitian positive semi-definite matrix.
///
/// The stored entries are exactly Hermitian. The smallest eigenvalue is
/// `≥ -psd_tolerance`; eigenvalues in `[-tol, 0)` are treated as zero downstream.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermitianPsd {
    matrix: ComplexMatrix,
    psd_tolerance: f64,
}

impl HermitianPsd {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let tol = default_tolerance(&m);
        Self::with_tolerance(m, tol)
    }

    pub fn with_tolerance(m: ComplexMatrix, psd_tolerance: f64) -> Result<Self> {
        if !m.is_square() {
            return param(format!("PSD matrix must be square, got {}x{}", m.rows, m.cols));
        }
        if m.hermitian_deviation() > psd_tolerance {
            return precondition("matrix is not Hermitian within tolerance");
        }
        let h = m.hermitian_part();
        let lmin = hermitian_eigenvalues(&h).last().copied().unwrap_or(0.0);
        if lmin < -psd_tolerance {
            return precondition(format!("matrix is not PSD: smallest eigenvalue {lmin:e}"));
        }
        Ok(Self { matrix: h, psd_tolerance })
    }

    /// Wrap a matrix already known to be Hermitian PSD (internal fast path).
    pub(crate) fn trusted(m: ComplexMatrix) -> Self {
        let psd_tolerance = default_tolerance(&m);
        Self { matrix: m.hermitian_part(), psd_tolerance }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn psd_tolerance(&self) -> f64 {
        self.psd_tolerance
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub basis: ComplexMatrix,
}

impl HermEigen {
    /// `basis · diag(f(λ)) · basisᴴ`, exactly Hermitian.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.basis[(i, k)] * w;
                for j in i..n {
                    out[(i, j)] += vik * self.basis[(j, k)].conj();
                }
            }
        }
        for i in 0..n {
            out[(i, i)].im = 0.0;
            for j in i + 1..n {
                out[(j, i)] = out[(i, j)].conj();
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }
}

/// Eigendecomposition of a Hermitian matrix (descending eigenvalues).
pub fn herm_eig(h: &ComplexMatrix) -> Result<HermEigen> {
    if !h.is_square() {
        return param(format!("eigendecomposition needs a square matrix, got {}x{}", h.rows, h.cols));
    }
    if h.rows > MAX_DIM {
        return param(format!("dimension {} exceeds {MAX_DIM}", h.rows));
    }
    if h.hermitian_deviation() > default_tolerance(h) {
        return precondition("matrix is not Hermitian within tolerance");
    }
    Ok(jacobi(&h.hermitian_part(), true))
}

/// Eigenvalues only (descending). Input is assumed Hermitian; only its upper
/// triangle and real diagonal are read for dims 1 and 2.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
    match h.rows {
        0 => Vec::new(),
        1 => vec![h[(0, 0)].re],
        2 => {
            let a = h[(0, 0)].re;
            let d = h[(1, 1)].re;
            let b = h[(0, 1)].norm();
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            vec![mid + rad, mid - rad]
        }
        _ => jacobi(&h.hermitian_part(), false).values,
    }
}

fn jacobi(h: &ComplexMatrix, want_vectors: bool) -> HermEigen {
    let n = h.rows;
    let mut a = h.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-16 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let g = apq.norm();
                    if g == 0.0 {
                        continue;
                    }
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (2.0 * g);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let ph = (apq / g).conj();
                    // J = diag(1, e^{-iφ}) · rotation; A ← Jᴴ A J.
                    let jpp = C64::new(c, 0.0);
                    let jpq = C64::new(s, 0.0);
                    let jqp = ph * (-s);
                    let jqq = ph * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * jpp + akq * jqp;
                        a[(k, q)] = akp * jpq + akq * jqq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                    }
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    a[(p, p)].im = 0.0;
                    a[(q, q)].im = 0.0;
                    if want_vectors {
                        for k in 0..n {
                            let vkp = v[(k, p)];
                            let vkq = v[(k, q)];
                            v[(k, p)] = vkp * jpp + vkq * jqp;
                            v[(k, q)] = vkp * jpq + vkq * jqq;
                        }
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let basis = if want_vectors {
        let mut b = ComplexMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            for r in 0..n {
                b[(r, col)] = v[(r, src)];
            }
        }
        b
    } else {
        ComplexMatrix::zeros(0, 0)
    };
    HermEigen { values, basis }
}

/// `log₂ det(I + a)` through the eigenvalues of `a`, negatives clipped to zero.
pub fn logdet_id_plus(a: &HermitianPsd) -> f64 {
    logdet_id_plus_raw(a.matrix())
}

pub(crate) fn logdet_id_plus_raw(a: &ComplexMatrix) -> f64 {
    hermitian_eigenvalues(a).iter().map(|&l| l.max(0.0).ln_1p()).sum::<f64>() / LN_2
}

/// Euclidean projection of `x` onto `{λ ≥ 0, Σλ ≤ budget}`.
pub fn project_capped_simplex(x: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Projection lands on the face Σλ = budget: λᵢ = max(xᵢ - θ, 0).
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let cand = (cum - budget) / (k as f64 + 1.0);
        if s - cand > 0.0 {
            theta = cand;
        } else {
            break;
        }
    }
    x.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Frobenius-nearest element of `{Q ⪰ 0, tr Q ≤ p_budget}`.
///
/// Inputs that are already feasible (PSD within the default tolerance, trace
/// within `1e-12·max(1,P)` of the budget) are returned unchanged, which makes
/// the map exactly idempotent.
pub fn project_trace_ball(h: &ComplexMatrix, p_budget: f64) -> Result<HermitianPsd> {
    if !(p_budget > 0.0) || !p_budget.is_finite() {
        return param(format!("power budget must be positive, got {p_budget}"));
    }
    let eig = herm_eig(h)?;
    let tol = default_tolerance(h);
    let hp = h.hermitian_part();
    let lmin = eig.values.last().copied().unwrap_or(0.0);
    if lmin >= -tol && hp.trace().re <= p_budget + 1e-12 * p_budget.max(1.0) {
        return Ok(HermitianPsd { matrix: hp, psd_tolerance: tol });
    }
    let lam = project_capped_simplex(&eig.values, p_budget);
    let projected = HermEigen { values: lam, basis: eig.basis };
    Ok(HermitianPsd::trusted(projected.reconstruct()))
}

/// Inverse of a Hermitian positive-definite matrix through its eigenvalues.
pub(crate) fn hpd_inverse(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(h)?;
    let lmin = eig.values.last().copied().unwrap_or(0.0);
    if lmin <= default_tolerance(h) {
        return precondition("matrix is singular");
    }
    Ok(eig.reconstruct_with(|l| 1.0 / l))
}

/// A square-root factor `L` with `L·Lᴴ = q` (eigenvalues clipped at zero).
pub(crate) fn psd_factor(q: &ComplexMatrix) -> ComplexMatrix {
    let eig = jacobi(&q.hermitian_part(), true);
    let n = q.rows;
    let mut l = ComplexMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for i in 0..n {
            l[(i, k)] = eig.basis[(i, k)] * s;
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(rng.random_range(-2.0..2.0), 0.0);
            for j in i + 1..n {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn diagonal_eigen() {
        let e = herm_eig(&ComplexMatrix::from_diag(&[1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        // basis is a permutation of the identity
        assert!((e.basis[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.basis[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_y_eigenvalues() {
        let m = ComplexMatrix::new(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap();
        let e = herm_eig(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::new(2, 2, vec![c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]).unwrap();
        assert!(matches!(herm_eig(&m), Err(crate::Error::Precondition(_))));
    }

    /// Real roots of the characteristic polynomial of a 3x3 Hermitian matrix,
    /// found by bisection on sign changes (independent of Jacobi).
    fn charpoly_roots_3x3(m: &ComplexMatrix) -> Vec<f64> {
        let t = m.trace().re;
        let mut c2 = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                c2 += (m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)]).re;
            }
        }
        let det = (m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]))
            .re;
        let p = |x: f64| x * x * x - t * x * x + c2 * x - det;
        let bound = 1.0 + m.frobenius_norm();
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut prev_x = -bound;
        let mut prev = p(prev_x);
        for k in 1..=steps {
            let x = -bound + 2.0 * bound * k as f64 / steps as f64;
            let v = p(x);
            if prev == 0.0 {
                roots.push(prev_x);
            } else if prev * v < 0.0 {
                let (mut lo, mut hi) = (prev_x, x);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if p(lo) * p(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_x = x;
            prev = v;
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        roots
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let m = random_hermitian(3, &mut rng);
        let roots = charpoly_roots_3x3(&m);
        assert_eq!(roots.len(), 3);
        let e = herm_eig(&m).unwrap();
        for (a, b) in e.values.iter().zip(&roots) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn reconstruction_and_unitarity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..1000 {
            let n = 1 + trial % 8;
            let m = random_hermitian(n, &mut rng);
            let e = herm_eig(&m).unwrap();
            let tol = 1e-10 * n as f64;
            assert!((&e.reconstruct() - &m).frobenius_norm() <= tol);
            let gram = &e.basis.conj_transpose() * &e.basis;
            assert!((&gram - &ComplexMatrix::identity(n)).frobenius_norm() <= tol);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn logdet_examples() {
        let z = HermitianPsd::new(ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(logdet_id_plus(&z), 0.0);
        let a = HermitianPsd::new(ComplexMatrix::from_diag(&[3.0, 0.0])).unwrap();
        assert!((logdet_id_plus(&a) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn logdet_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let b = random_hermitian(2, &mut rng);
            let a = &b * &b.conj_transpose();
            let psd = HermitianPsd::new(a.clone()).unwrap();
            let m = &ComplexMatrix::identity(2) + psd.matrix();
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
            assert!((logdet_id_plus(&psd) - det.log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn logdet_monotone_on_diagonal_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let d: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..5.0)).collect();
            let bump: Vec<f64> = d.iter().map(|x| x + rng.random_range(0.0..2.0)).collect();
            let lo = logdet_id_plus(&HermitianPsd::new(ComplexMatrix::from_diag(&d)).unwrap());
            let hi = logdet_id_plus(&HermitianPsd::new(ComplexMatrix::from_diag(&bump)).unwrap());
            assert!(lo >= 0.0 && hi >= lo);
        }
    }

    #[test]
    fn projection_examples() {
        let h = ComplexMatrix::from_diag(&[0.6, 0.4]);
        let p = project_trace_ball(&h, 2.0).unwrap();
        assert_eq!(p.matrix(), &h);

        let p = project_trace_ball(&ComplexMatrix::from_diag(&[3.0, 1.0]), 2.0).unwrap();
        assert!((p.matrix() - &ComplexMatrix::from_diag(&[2.0, 0.0])).frobenius_norm() < 1e-14);

        let p = project_trace_ball(&ComplexMatrix::from_diag(&[1.0, -0.5]), 5.0).unwrap();
        assert!((p.matrix() - &ComplexMatrix::from_diag(&[1.0, 0.0])).frobenius_norm() < 1e-14);

        assert!(project_trace_ball(&h, 0.0).is_err());
        assert!(project_trace_ball(&h, -1.0).is_err());
    }

    /// Brute-force QP over eigenvalue pairs for diag inputs.
    #[test]
    fn projection_matches_grid_qp() {
        let (a, b, budget) = (3.0, 1.0, 2.0);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = 2000;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let x = budget * i as f64 / steps as f64;
                let y = budget * j as f64 / steps as f64;
                let d = (x - a).powi(2) + (y - b).powi(2);
                if d < best.0 {
                    best = (d, x, y);
                }
            }
        }
        let lam = project_capped_simplex(&[a, b], budget);
        assert!((lam[0] - best.1).abs() < 2e-3 && (lam[1] - best.2).abs() < 2e-3);
    }

    #[test]
    fn projection_idempotent_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..300 {
            let n = 1 + trial % 5;
            let m = random_hermitian(n, &mut rng).scale(3.0);
            let budget = rng.random_range(0.1..4.0);
            let once = project_trace_ball(&m, budget).unwrap();
            let twice = project_trace_ball(once.matrix(), budget).unwrap();
            assert_eq!(once.matrix(), twice.matrix());
            assert!(once.trace() <= budget + 1e-9);
            let lmin = *hermitian_eigenvalues(once.matrix()).last().unwrap();
            assert!(lmin >= -1e-9);
        }
    }

    #[test]
    fn operator_norm_of_diag() {
        let m = ComplexMatrix::from_real_rows(&[&[2.0, 0.0, 0.0], &[0.0, -3.0, 0.0]]).unwrap();
        assert!((m.operator_norm() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_and_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random_hermitian(4, &mut rng);
        let a = &(&b * &b.conj_transpose()) + &ComplexMatrix::identity(4);
        let inv = hpd_inverse(&a).unwrap();
        assert!((&(&a * &inv) - &ComplexMatrix::identity(4)).frobenius_norm() < 1e-12);
        let l = psd_factor(&a);
        assert!((&(&l * &l.conj_transpose()) - &a).frobenius_norm() < 1e-12);
        assert!(hpd_inverse(&ComplexMatrix::from_diag(&[1.0, 0.0])).is_err());
    }
}
