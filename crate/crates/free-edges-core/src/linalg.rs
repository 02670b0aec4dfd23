//! Dense complex-Hermitian linear algebra and the matrix identities
//! (Schur complement, matrix inversion lemma, dilation) used by the solvers.
//!
//! Complex Hermitian eigenvalues are computed through the real-symmetric
//! embedding `[[Re, -Im], [Im, Re]]` (every eigenvalue doubles, so we keep
//! every other one), which needs nothing beyond a symmetric tridiagonal QL
//! sweep. Eigenvectors, needed only for small matrices, come from a cyclic
//! complex Jacobi iteration.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex;
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex<f64>;

/// Scale-aware floor below which a matrix counts as numerically singular.
pub fn invertibility_floor(fro_norm: f64) -> f64 {
    1e-12 * fro_norm.max(1.0)
}

/// Scale-aware margin for strict positive definiteness.
pub fn positivity_margin(fro_norm: f64) -> f64 {
    1e-10 * fro_norm.max(1.0)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("shape mismatch: {context} (expected {expected_rows}x{expected_cols}, got {rows}x{cols})")]
    ShapeMismatch {
        context: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is not Hermitian: relative asymmetry {asymmetry:.3e}")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("singular block in {context}: smallest singular value {smallest_sv:.3e} below floor {floor:.3e}")]
    SingularBlock {
        context: &'static str,
        smallest_sv: f64,
        floor: f64,
    },
    #[error("singular matrix in {context}")]
    Singular { context: &'static str },
    #[error("eigensolver failed to converge: dim {dim}, norm {norm:.3e}")]
    EigNoConvergence { dim: usize, norm: f64 },
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a row-major entry slice. Panics if the length is wrong.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        Self {
            rows,
            cols,
            data: entries.to_vec(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        Self {
            rows,
            cols,
            data: entries.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hermitian part `(M + M*)/2` of a square matrix.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        let adj = self.adjoint();
        self.add(&adj).scale_re(0.5)
    }

    /// Relative deviation from self-adjointness, `‖M − M*‖ / max(1, ‖M‖)`.
    pub fn asymmetry(&self) -> f64 {
        let adj = self.adjoint();
        self.sub(&adj).fro_norm() / self.fro_norm().max(1.0)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let s = self[(i, j)];
                if s.re == 0.0 && s.im == 0.0 {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out[(i * other.rows + p, j * other.cols + q)] = s * other[(p, q)];
                    }
                }
            }
        }
        out
    }

    /// Solve `self · X = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self, LinalgError> {
        assert!(self.is_square());
        assert_eq!(self.rows, rhs.rows, "rhs row mismatch");
        let n = self.rows;
        let k = rhs.cols;
        let mut a = self.data.clone();
        let mut x = rhs.data.clone();
        let floor = 1e-14 * self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            // pivot
            let mut piv = col;
            let mut best = a[col * n + col].norm();
            for r in col + 1..n {
                let v = a[r * n + col].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= floor {
                return Err(LinalgError::Singular { context: "solve" });
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                for j in 0..k {
                    x.swap(col * k + j, piv * k + j);
                }
            }
            let inv_p = a[col * n + col].inv();
            for r in col + 1..n {
                let f = a[r * n + col] * inv_p;
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= f * v;
                }
                for j in 0..k {
                    let v = x[col * k + j];
                    x[r * k + j] -= f * v;
                }
            }
        }
        // back substitution
        for col in (0..n).rev() {
            let inv_p = a[col * n + col].inv();
            for j in 0..k {
                let mut s = x[col * k + j];
                for r in col + 1..n {
                    s -= a[col * n + r] * x[r * k + j];
                }
                x[col * k + j] = s * inv_p;
            }
        }
        Ok(Self {
            rows: n,
            cols: k,
            data: x,
        })
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        self.solve(&Self::identity(self.rows))
    }

    /// Smallest singular value, via the Hermitian eigenproblem of the Gram
    /// matrix on the smaller side.
    pub fn smallest_singular_value(&self) -> Result<f64, LinalgError> {
        let vals = self.singular_values()?;
        Ok(vals[0])
    }

    /// The `min(rows, cols)` singular values, ascending.
    pub fn singular_values(&self) -> Result<Vec<f64>, LinalgError> {
        let gram = if self.rows <= self.cols {
            self.mul(&self.adjoint())
        } else {
            self.adjoint().mul(self)
        };
        let herm = HermitianMatrix::new_unchecked(gram);
        let vals = herm.eigvals()?;
        Ok(vals.iter().map(|&v| v.max(0.0).sqrt()).collect())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            s.push('[');
            for j in 0..self.cols {
                let z = self[(i, j)];
                if j > 0 {
                    s.push_str(", ");
                }
                s.push_str(&format!("{:.6}{:+.6}i", z.re, z.im));
            }
            s.push_str("]\n");
        }
        s
    }
}

impl core::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Complex matrix with enforced self-adjointness.
///
/// The constructor symmetrizes inputs whose asymmetry is round-off level
/// (below 1e-12 relative) and rejects anything worse.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: ComplexMatrix,
}

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::ShapeMismatch {
                context: "HermitianMatrix::new",
                expected_rows: m.rows,
                expected_cols: m.rows,
                rows: m.rows,
                cols: m.cols,
            });
        }
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let asym = m.asymmetry();
        if asym > 1e-12 {
            return Err(LinalgError::NotHermitian { asymmetry: asym });
        }
        Ok(Self {
            mat: m.hermitian_part(),
        })
    }

    /// Symmetrize without the asymmetry gate. For internal use where the
    /// input is Hermitian by construction up to round-off.
    pub fn new_unchecked(m: ComplexMatrix) -> Self {
        assert!(m.is_square());
        Self {
            mat: m.hermitian_part(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: ComplexMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(dim),
        }
    }

    pub fn scaled_identity(dim: usize, t: f64) -> Self {
        Self {
            mat: ComplexMatrix::identity(dim).scale_re(t),
        }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = ComplexMatrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn fro_norm(&self) -> f64 {
        self.mat.fro_norm()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.add(&other.mat),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.sub(&other.mat),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self {
            mat: self.mat.scale_re(s),
        }
    }

    pub fn add_scaled_identity(&self, t: f64) -> Self {
        let mut m = self.mat.clone();
        for i in 0..m.rows {
            m[(i, i)] += C64::new(t, 0.0);
        }
        Self { mat: m }
    }

    /// All eigenvalues, ascending.
    pub fn eigvals(&self) -> Result<Vec<f64>, LinalgError> {
        eigvals_herm(&self.mat)
    }

    /// Smallest and largest eigenvalue.
    pub fn eig_extremes(&self) -> Result<(f64, f64), LinalgError> {
        let vals = self.eigvals()?;
        Ok((vals[0], vals[vals.len() - 1]))
    }

    /// Eigendecomposition with orthonormal eigenvectors (ascending values;
    /// vectors are the columns of the returned matrix). Cyclic Jacobi —
    /// intended for small matrices.
    pub fn eigh(&self) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
        eigh_jacobi(&self.mat)
    }

    /// Positive semidefinite square root. Eigenvalues below round-off are
    /// clamped to zero; a clearly negative eigenvalue is an error.
    pub fn sqrt_psd(&self) -> Result<ComplexMatrix, LinalgError> {
        let (vals, vecs) = self.eigh()?;
        let floor = -1e-10 * self.fro_norm().max(1.0);
        for &v in &vals {
            if v < floor {
                return Err(LinalgError::Singular {
                    context: "sqrt_psd of a non-PSD matrix",
                });
            }
        }
        let d = self.dim();
        let mut scaled = vecs.clone();
        for j in 0..d {
            let s = C64::new(vals[j].max(0.0).sqrt(), 0.0);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        Ok(scaled.mul(&vecs.adjoint()))
    }

    /// Strict positive definiteness with a scale-aware margin.
    pub fn is_positive_definite(&self) -> Result<bool, LinalgError> {
        let (lo, _) = self.eig_extremes()?;
        Ok(lo > positivity_margin(self.fro_norm()))
    }

    pub fn is_negative_definite(&self) -> Result<bool, LinalgError> {
        let (_, hi) = self.eig_extremes()?;
        Ok(hi < -positivity_margin(self.fro_norm()))
    }

    pub fn inverse(&self) -> Result<ComplexMatrix, LinalgError> {
        self.mat.inverse()
    }
}

impl core::ops::Index<(usize, usize)> for HermitianMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.mat[idx]
    }
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn eig_extremes(m: &HermitianMatrix) -> Result<(f64, f64), LinalgError> {
    m.eig_extremes()
}

// ── Hermitian eigenvalues via real-symmetric embedding ──────────────

/// Eigenvalues (ascending) of a complex Hermitian matrix given as a square
/// `ComplexMatrix` assumed self-adjoint.
pub fn eigvals_herm(m: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    let d = m.rows;
    if d == 0 {
        return Ok(Vec::new());
    }
    // Real-symmetric embedding [[Re, -Im], [Im, Re]]: each eigenvalue of m
    // appears exactly twice.
    let n = 2 * d;
    let mut a = vec![0.0f64; n * n];
    for i in 0..d {
        for j in 0..d {
            let z = m[(i, j)];
            a[i * n + j] = z.re;
            a[i * n + (j + d)] = -z.im;
            a[(i + d) * n + j] = z.im;
            a[(i + d) * n + (j + d)] = z.re;
        }
    }
    let (mut diag, mut off) = tridiagonalize(&mut a, n);
    tql_eigenvalues(&mut diag, &mut off).map_err(|_| LinalgError::EigNoConvergence {
        dim: d,
        norm: m.fro_norm(),
    })?;
    diag.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(diag.iter().step_by(2).copied().collect())
}

/// Householder reduction of a dense symmetric matrix (row-major, size n) to
/// tridiagonal form, eigenvalues-only variant.
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut ff = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in j + 1..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    ff += e[j] * a[i * n + j];
                }
                let hh = ff / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    e[0] = 0.0;
    (d, e)
}

/// QL with implicit shifts on a symmetric tridiagonal matrix; eigenvalues
/// land in `d` (unsorted).
fn tql_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<(), ()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(());
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

// ── Complex Jacobi eigendecomposition (small matrices) ──────────────

fn eigh_jacobi(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    let d = m.rows;
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(d);
    let norm = m.fro_norm();
    let tol = 1e-15 * norm.max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            // collect, sort, permute
            let mut idx: Vec<usize> = (0..d).collect();
            let vals: Vec<f64> = (0..d).map(|i| a[(i, i)].re).collect();
            idx.sort_by(|&x, &y| vals[x].partial_cmp(&vals[y]).unwrap());
            let sorted: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
            let vecs = ComplexMatrix::from_fn(d, d, |i, j| v[(i, idx[j])]);
            return Ok((sorted, vecs));
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= tol / (d as f64) {
                    continue;
                }
                let phase = apq / r;
                // rotate the pq plane: first absorb the phase into column q,
                // then a real Givens rotation zeroes the (now real) coupling.
                let cph = phase.conj();
                for i in 0..d {
                    a[(i, q)] *= cph;
                    v[(i, q)] *= cph;
                }
                for j in 0..d {
                    a[(q, j)] *= phase;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..d {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip.scale(c) - aiq.scale(s);
                    a[(i, q)] = aip.scale(s) + aiq.scale(c);
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip.scale(c) - viq.scale(s);
                    v[(i, q)] = vip.scale(s) + viq.scale(c);
                }
                for j in 0..d {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj.scale(c) - aqj.scale(s);
                    a[(q, j)] = apj.scale(s) + aqj.scale(c);
                }
            }
        }
    }
    Err(LinalgError::EigNoConvergence { dim: d, norm })
}

// ── Block matrices, Schur complements, Woodbury, dilation ───────────

/// Hermitian 2x2 block matrix `[[A, B], [B*, D]]`.
#[derive(Debug, Clone)]
pub struct BlockMatrix2x2 {
    pub a: HermitianMatrix,
    pub b: ComplexMatrix,
    pub d: HermitianMatrix,
}

impl BlockMatrix2x2 {
    pub fn new(
        a: HermitianMatrix,
        b: ComplexMatrix,
        d: HermitianMatrix,
    ) -> Result<Self, LinalgError> {
        if b.rows() != a.dim() || b.cols() != d.dim() {
            return Err(LinalgError::ShapeMismatch {
                context: "BlockMatrix2x2::new",
                expected_rows: a.dim(),
                expected_cols: d.dim(),
                rows: b.rows(),
                cols: b.cols(),
            });
        }
        Ok(Self { a, b, d })
    }

    pub fn assemble(&self) -> HermitianMatrix {
        let d1 = self.a.dim();
        let d2 = self.d.dim();
        let mut m = ComplexMatrix::zeros(d1 + d2, d1 + d2);
        for i in 0..d1 {
            for j in 0..d1 {
                m[(i, j)] = self.a[(i, j)];
            }
            for j in 0..d2 {
                m[(i, d1 + j)] = self.b[(i, j)];
                m[(d1 + j, i)] = self.b[(i, j)].conj();
            }
        }
        for i in 0..d2 {
            for j in 0..d2 {
                m[(d1 + i, d1 + j)] = self.d[(i, j)];
            }
        }
        HermitianMatrix::new_unchecked(m)
    }

    fn check_d_invertible(&self) -> Result<(), LinalgError> {
        let floor = invertibility_floor(self.d.fro_norm());
        let sv = self.d.as_matrix().smallest_singular_value()?;
        if sv <= floor {
            return Err(LinalgError::SingularBlock {
                context: "schur_complement: block D",
                smallest_sv: sv,
                floor,
            });
        }
        Ok(())
    }

    /// Schur complement `M/D = A − B D⁻¹ B*` and whether `D ≻ 0` together
    /// with `M/D ≻ 0` (equivalent to `M ≻ 0`).
    pub fn schur_complement(&self) -> Result<(HermitianMatrix, bool), LinalgError> {
        self.check_d_invertible()?;
        let dinv_bstar = self.d.as_matrix().solve(&self.b.adjoint())?;
        let schur = HermitianMatrix::new_unchecked(
            self.a.as_matrix().sub(&self.b.mul(&dinv_bstar)),
        );
        let pos = self.d.is_positive_definite()? && schur.is_positive_definite()?;
        Ok((schur, pos))
    }

    /// The 2x2-block inverse formula in terms of `M/D`.
    pub fn block_inverse(&self) -> Result<ComplexMatrix, LinalgError> {
        self.check_d_invertible()?;
        let (schur, _) = self.schur_complement()?;
        let floor = invertibility_floor(schur.fro_norm());
        let sv = schur.as_matrix().smallest_singular_value()?;
        if sv <= floor {
            return Err(LinalgError::SingularBlock {
                context: "block_inverse: Schur complement M/D",
                smallest_sv: sv,
                floor,
            });
        }
        let d1 = self.a.dim();
        let d2 = self.d.dim();
        let schur_inv = schur.inverse()?;
        let dinv = self.d.inverse()?;
        let top_right = schur_inv.mul(&self.b).mul(&dinv).scale_re(-1.0);
        let bottom_left = top_right.adjoint();
        let bottom_right = dinv.add(
            &dinv
                .mul(&self.b.adjoint())
                .mul(&schur_inv)
                .mul(&self.b)
                .mul(&dinv),
        );
        let mut out = ComplexMatrix::zeros(d1 + d2, d1 + d2);
        for i in 0..d1 {
            for j in 0..d1 {
                out[(i, j)] = schur_inv[(i, j)];
            }
            for j in 0..d2 {
                out[(i, d1 + j)] = top_right[(i, j)];
            }
        }
        for i in 0..d2 {
            for j in 0..d1 {
                out[(d1 + i, j)] = bottom_left[(i, j)];
            }
            for j in 0..d2 {
                out[(d1 + i, d1 + j)] = bottom_right[(i, j)];
            }
        }
        Ok(out)
    }
}

/// Matrix inversion lemma: `(1 − B D⁻¹ B*)⁻¹ = 1 + B (D − B*B)⁻¹ B*`,
/// provided all the inverses exist.
pub fn woodbury_inverse(
    b: &ComplexMatrix,
    d: &HermitianMatrix,
) -> Result<HermitianMatrix, LinalgError> {
    if b.cols() != d.dim() {
        return Err(LinalgError::ShapeMismatch {
            context: "woodbury_inverse",
            expected_rows: b.rows(),
            expected_cols: d.dim(),
            rows: b.rows(),
            cols: b.cols(),
        });
    }
    let check = |m: &ComplexMatrix, context: &'static str| -> Result<(), LinalgError> {
        let floor = invertibility_floor(m.fro_norm());
        let sv = m.smallest_singular_value()?;
        if sv <= floor {
            Err(LinalgError::SingularBlock {
                context,
                smallest_sv: sv,
                floor,
            })
        } else {
            Ok(())
        }
    };
    check(d.as_matrix(), "woodbury_inverse: D")?;
    let inner = d.as_matrix().sub(&b.adjoint().mul(b));
    check(&inner, "woodbury_inverse: D - B*B")?;
    let d1 = b.rows();
    let direct = ComplexMatrix::identity(d1).sub(&b.mul(&d.as_matrix().solve(&b.adjoint())?));
    check(&direct, "woodbury_inverse: 1 - B D^-1 B*")?;
    let out = ComplexMatrix::identity(d1).add(&b.mul(&inner.solve(&b.adjoint())?));
    Ok(HermitianMatrix::new_unchecked(out))
}

/// Self-adjoint dilation `[[0, y*], [y, 0]]` of a `d×m` matrix `y`; its
/// nonzero eigenvalues are `±` the nonzero singular values of `y`.
pub fn dilation(y: &ComplexMatrix) -> HermitianMatrix {
    let d = y.rows();
    let m = y.cols();
    let mut out = ComplexMatrix::zeros(m + d, m + d);
    for i in 0..d {
        for j in 0..m {
            out[(m + i, j)] = y[(i, j)];
            out[(j, m + i)] = y[(i, j)].conj();
        }
    }
    HermitianMatrix::new_unchecked(out)
}
