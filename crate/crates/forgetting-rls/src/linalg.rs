//! Minimal dense linear algebra for small symmetric systems (n <= 10).
//!
//! Everything here is sized for the 6-dimensional regressors used by the
//! estimators: plain `Vec<f64>` storage, cyclic Jacobi rotations for
//! symmetric eigenvalues, and Gauss-Jordan elimination with partial
//! pivoting for inversion. No attempt is made to scale past n ~ 10.

use thiserror::Error;

/// Matrices with a smaller eigenvalue than this are refused by [`invert`];
/// callers must treat them as singular rather than propagate garbage.
pub const SINGULARITY_FLOOR: f64 = 1e-12;

/// Maximum relative asymmetry tolerated when constructing a [`SymMatrix`].
pub const SYMMETRY_RTOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 50;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is numerically singular (min eigenvalue {min_eigenvalue:.3e})")]
    NearSingular { min_eigenvalue: f64 },
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not symmetric (max relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Real vector of fixed dimension with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite("Vector::new"));
        }
        Ok(Self { data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; n] }
    }

    /// i-th standard basis vector in dimension n.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut data = vec![0.0; n];
        data[i] = 1.0;
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, k: f64) -> Vector {
        Vector {
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// self += k * other
    pub fn add_scaled_in_place(&mut self, other: &Vector, k: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Square matrix without structural constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct GenMatrix {
    n: usize,
    data: Vec<f64>, // row-major
}

impl GenMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::DimensionMismatch(format!(
                    "row {i} has length {} in a {n}x{n} matrix",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite("GenMatrix::from_rows"));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn transpose(&self) -> GenMatrix {
        let mut out = GenMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.n, v.dim());
        let data = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v.get(j)).sum())
            .collect();
        Vector { data }
    }

    pub fn mat_mul(&self, other: &GenMatrix) -> GenMatrix {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = GenMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.set(i, j, out.get(i, j) + a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn add(&self, other: &GenMatrix) -> GenMatrix {
        debug_assert_eq!(self.n, other.n);
        GenMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &GenMatrix) -> GenMatrix {
        debug_assert_eq!(self.n, other.n);
        GenMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> GenMatrix {
        GenMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// General (non-symmetric) inverse by Gauss-Jordan with partial pivoting.
    pub fn invert(&self) -> Result<GenMatrix> {
        gauss_jordan(self)
    }
}

/// Symmetric matrix. Construction validates symmetry to [`SYMMETRY_RTOL`]
/// relative tolerance; storage is kept exactly symmetric thereafter.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>, // row-major, exactly symmetric
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let g = GenMatrix::from_rows(rows)?;
        Self::from_gen(&g)
    }

    /// Accepts a general matrix that is symmetric to within [`SYMMETRY_RTOL`]
    /// and stores its exactly-symmetrized form (A + A^T)/2.
    pub fn from_gen(g: &GenMatrix) -> Result<Self> {
        let n = g.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = g.get(i, j);
                let b = g.get(j, i);
                let scale = a.abs().max(b.abs()).max(1.0);
                worst = worst.max((a - b).abs() / scale);
            }
        }
        if worst > SYMMETRY_RTOL {
            return Err(LinalgError::NotSymmetric(worst));
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = 0.5 * (g.get(i, j) + g.get(j, i));
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_gen(&self) -> GenMatrix {
        GenMatrix {
            n: self.n,
            data: self.data.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mat_vec(&self, v: &Vector) -> Vector {
        self.to_gen_ref_mat_vec(v)
    }

    fn to_gen_ref_mat_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.n, v.dim());
        let data = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v.get(j)).sum())
            .collect();
        Vector { data }
    }

    /// x^T A x
    pub fn quad_form(&self, x: &Vector) -> f64 {
        x.dot(&self.mat_vec(x))
    }

    pub fn scale_in_place(&mut self, k: f64) {
        for v in &mut self.data {
            *v *= k;
        }
    }

    /// A += k * I
    pub fn add_scaled_identity(&mut self, k: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += k;
        }
    }

    /// A += k * u u^T (symmetry preserved exactly)
    pub fn add_outer(&mut self, u: &Vector, k: f64) {
        debug_assert_eq!(self.n, u.dim());
        for i in 0..self.n {
            for j in 0..self.n {
                self.data[i * self.n + j] += k * u.get(i) * u.get(j);
            }
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// u v^T
pub fn outer(u: &Vector, v: &Vector) -> Result<GenMatrix> {
    if u.dim() != v.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "outer: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    let n = u.dim();
    let mut m = GenMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, u.get(i) * v.get(j));
        }
    }
    Ok(m)
}

/// u u^T as a symmetric matrix.
pub fn outer_self(u: &Vector) -> SymMatrix {
    let n = u.dim();
    let mut m = SymMatrix::zeros(n);
    m.add_outer(u, 1.0);
    m
}

/// Inverse of a symmetric positive-definite matrix.
///
/// Refuses matrices whose smallest eigenvalue is at or below
/// [`SINGULARITY_FLOOR`]; the result is exactly symmetrized.
pub fn invert(a: &SymMatrix) -> Result<SymMatrix> {
    let eigs = sym_eigenvalues(a)?;
    let min_eigenvalue = eigs[0];
    if min_eigenvalue <= SINGULARITY_FLOOR {
        return Err(LinalgError::NearSingular { min_eigenvalue });
    }
    invert_unchecked(a)
}

/// Inversion without the eigenvalue gate, for callers that have already
/// established conditioning (the estimator checks eigenvalues every step).
pub(crate) fn invert_unchecked(a: &SymMatrix) -> Result<SymMatrix> {
    let inv = gauss_jordan(&a.to_gen())?;
    // Symmetrize: elimination roundoff breaks exact symmetry.
    let n = inv.dim();
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.data[i * n + j] = 0.5 * (inv.get(i, j) + inv.get(j, i));
        }
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite("invert"));
    }
    Ok(m)
}

fn gauss_jordan(a: &GenMatrix) -> Result<GenMatrix> {
    let n = a.dim();
    let mut work = a.clone();
    let mut inv = GenMatrix::identity(n);
    for col in 0..n {
        // partial pivoting
        let mut pivot_row = col;
        let mut pivot_val = work.get(col, col).abs();
        for r in (col + 1)..n {
            let v = work.get(r, col).abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 {
            return Err(LinalgError::NearSingular {
                min_eigenvalue: 0.0,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                let (x, y) = (work.get(col, j), work.get(pivot_row, j));
                work.set(col, j, y);
                work.set(pivot_row, j, x);
                let (x, y) = (inv.get(col, j), inv.get(pivot_row, j));
                inv.set(col, j, y);
                inv.set(pivot_row, j, x);
            }
        }
        let p = work.get(col, col);
        for j in 0..n {
            work.set(col, j, work.get(col, j) / p);
            inv.set(col, j, inv.get(col, j) / p);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work.get(r, col);
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                work.set(r, j, work.get(r, j) - f * work.get(col, j));
                inv.set(r, j, inv.get(r, j) - f * inv.get(col, j));
            }
        }
    }
    Ok(inv)
}

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
///
/// Convergence is declared when the off-diagonal Frobenius norm drops below
/// 1e-12 (scaled by the matrix norm for matrices far from unit scale).
pub fn sym_eigenvalues(a: &SymMatrix) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite("sym_eigenvalues"));
    }
    let n = a.dim();
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![a.get(0, 0)]);
    }
    let tol = 1e-12 * a.frobenius_norm().max(1.0);
    let mut w = a.clone();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += 2.0 * w.get(p, q) * w.get(p, q);
                }
            }
            s.sqrt()
        };
        if off < tol {
            let mut eigs: Vec<f64> = (0..n).map(|i| w.get(i, i)).collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return Ok(eigs);
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = 0.5 * (w.get(q, q) - w.get(p, p)) / apq;
                // tan of the rotation angle; guard against theta^2 overflow
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = w.get(p, p);
                let aqq = w.get(q, q);
                w.data[p * n + p] = app - t * apq;
                w.data[q * n + q] = aqq + t * apq;
                w.data[p * n + q] = 0.0;
                w.data[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = w.get(k, p);
                    let akq = w.get(k, q);
                    let new_kp = akp - s * (akq + tau * akp);
                    let new_kq = akq + s * (akp - tau * akq);
                    w.data[k * n + p] = new_kp;
                    w.data[p * n + k] = new_kp;
                    w.data[k * n + q] = new_kq;
                    w.data[q * n + k] = new_kq;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS))
}
