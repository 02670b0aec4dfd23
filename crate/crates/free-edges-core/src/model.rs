//! Problem specification: the free operator `x = Σ aᵢ⊗sᵢ` with Hermitian
//! shift `b`, the independent-entries variance-profile shortcut, and the
//! completely positive maps `Φ(y) = Σ aᵢ y aᵢ*` and `Φ*(z) = Σ aⱼ* z aⱼ`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{ComplexMatrix, HermitianMatrix, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("coefficient {index} has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    ShapeMismatch {
        index: usize,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("shift is not Hermitian: asymmetry norm {asymmetry:.3e}")]
    NotHermitian { asymmetry: f64 },
    #[error("model contains non-finite entries")]
    NonFinite,
    #[error("negative variance at ({row}, {col}): {value}")]
    NegativeVariance { row: usize, col: usize, value: f64 },
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
}

/// The operator `x = Σᵢ aᵢ⊗sᵢ` with coefficients `aᵢ ∈ ℂ^{d×m}` and a
/// Hermitian shift `b ∈ ℂ^{d×d}`; the semicircular family `sᵢ` has no finite
/// representation and enters only through the [`crate::mc`] sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeModel {
    d: usize,
    m: usize,
    coeffs: Vec<ComplexMatrix>,
    shift: HermitianMatrix,
}

impl FreeModel {
    pub fn new(
        d: usize,
        m: usize,
        coeffs: Vec<ComplexMatrix>,
        shift: HermitianMatrix,
    ) -> Result<Self, ModelError> {
        let model = Self {
            d,
            m,
            coeffs,
            shift,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of coefficients; `n = 0` means `x = 0` and the operator is `b⊗1`.
    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[ComplexMatrix] {
        &self.coeffs
    }

    pub fn shift(&self) -> &HermitianMatrix {
        &self.shift
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (index, a) in self.coeffs.iter().enumerate() {
            if a.rows() != self.d || a.cols() != self.m {
                return Err(ModelError::ShapeMismatch {
                    index,
                    expected_rows: self.d,
                    expected_cols: self.m,
                    rows: a.rows(),
                    cols: a.cols(),
                });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite);
            }
        }
        if self.shift.dim() != self.d {
            return Err(ModelError::DimensionMismatch {
                context: "shift",
                expected: self.d,
                got: self.shift.dim(),
            });
        }
        if !self.shift.as_matrix().is_finite() {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    /// `Φ(y) = Σᵢ aᵢ y aᵢ*` on general complex `m×m` input.
    pub fn phi_complex(&self, y: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
        if y.rows() != self.m || y.cols() != self.m {
            return Err(ModelError::DimensionMismatch {
                context: "phi",
                expected: self.m,
                got: y.rows(),
            });
        }
        let mut out = ComplexMatrix::zeros(self.d, self.d);
        for a in &self.coeffs {
            out = out.add(&a.mul(y).mul(&a.adjoint()));
        }
        Ok(out)
    }

    /// `Φ*(z) = Σⱼ aⱼ* z aⱼ` on general complex `d×d` input.
    pub fn phi_star_complex(&self, z: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
        if z.rows() != self.d || z.cols() != self.d {
            return Err(ModelError::DimensionMismatch {
                context: "phi_star",
                expected: self.d,
                got: z.rows(),
            });
        }
        let mut out = ComplexMatrix::zeros(self.m, self.m);
        for a in &self.coeffs {
            out = out.add(&a.adjoint().mul(z).mul(a));
        }
        Ok(out)
    }

    /// `Φ(y)` restricted to Hermitian input; the output is Hermitian since
    /// the map is completely positive.
    pub fn phi(&self, y: &HermitianMatrix) -> Result<HermitianMatrix, ModelError> {
        Ok(HermitianMatrix::new_unchecked(
            self.phi_complex(y.as_matrix())?,
        ))
    }

    pub fn phi_star(&self, z: &HermitianMatrix) -> Result<HermitianMatrix, ModelError> {
        Ok(HermitianMatrix::new_unchecked(
            self.phi_star_complex(z.as_matrix())?,
        ))
    }

    /// `Φ(1)` — the d×d matrix `Σ aᵢaᵢ*`, a cheap upper-bound proxy for the
    /// operator scale.
    pub fn phi_of_identity(&self) -> HermitianMatrix {
        self.phi(&HermitianMatrix::identity(self.m))
            .expect("identity has the right shape")
    }

    pub fn phi_star_of_identity(&self) -> HermitianMatrix {
        self.phi_star(&HermitianMatrix::identity(self.d))
            .expect("identity has the right shape")
    }

    /// True iff shift is diagonal and `Φ`, `Φ*` map diagonal matrices to
    /// diagonal matrices (tested on the standard diagonal basis).
    pub fn is_diagonal_compatible(&self) -> bool {
        let tol = 1e-12;
        let off_diag_norm = |m: &ComplexMatrix| -> f64 {
            let mut s = 0.0;
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    if i != j {
                        s += m[(i, j)].norm_sqr();
                    }
                }
            }
            s.sqrt()
        };
        if off_diag_norm(self.shift.as_matrix()) > tol * self.shift.fro_norm().max(1.0) {
            return false;
        }
        for k in 0..self.m {
            let mut basis = ComplexMatrix::zeros(self.m, self.m);
            basis[(k, k)] = C64::new(1.0, 0.0);
            let img = self.phi_complex(&basis).expect("shape ok");
            if off_diag_norm(&img) > tol * img.fro_norm().max(1.0) {
                return false;
            }
        }
        for k in 0..self.d {
            let mut basis = ComplexMatrix::zeros(self.d, self.d);
            basis[(k, k)] = C64::new(1.0, 0.0);
            let img = self.phi_star_complex(&basis).expect("shape ok");
            if off_diag_norm(&img) > tol * img.fro_norm().max(1.0) {
                return false;
            }
        }
        true
    }

    /// Scale all coefficients by `t` (edges scale by `t²` when `b = 0`).
    pub fn scaled_coefficients(&self, t: f64) -> Self {
        Self {
            d: self.d,
            m: self.m,
            coeffs: self.coeffs.iter().map(|a| a.scale_re(t)).collect(),
            shift: self.shift.clone(),
        }
    }

    /// Replace the shift by `b + c·1`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            d: self.d,
            m: self.m,
            coeffs: self.coeffs.clone(),
            shift: self.shift.add_scaled_identity(c),
        }
    }

    pub fn with_zero_shift(&self) -> Self {
        Self {
            d: self.d,
            m: self.m,
            coeffs: self.coeffs.clone(),
            shift: HermitianMatrix::zeros(self.d),
        }
    }
}

/// Independent-entries model: entry variances `σᵢⱼ²` and a diagonal shift.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    d: usize,
    m: usize,
    sigma2: Vec<f64>, // row-major d×m
    bdiag: Vec<f64>,
}

impl VarianceProfile {
    pub fn new(d: usize, m: usize, sigma2: Vec<f64>, bdiag: Vec<f64>) -> Result<Self, ModelError> {
        assert_eq!(sigma2.len(), d * m, "sigma2 length mismatch");
        assert_eq!(bdiag.len(), d, "bdiag length mismatch");
        for i in 0..d {
            for j in 0..m {
                let v = sigma2[i * m + j];
                if !v.is_finite() {
                    return Err(ModelError::NonFinite);
                }
                if v < 0.0 {
                    return Err(ModelError::NegativeVariance {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        if bdiag.iter().any(|b| !b.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self {
            d,
            m,
            sigma2,
            bdiag,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma2(&self, i: usize, j: usize) -> f64 {
        self.sigma2[i * self.m + j]
    }

    pub fn bdiag(&self) -> &[f64] {
        &self.bdiag
    }

    /// Flat profile `σᵢⱼ² = value` with zero shift.
    pub fn flat(d: usize, m: usize, value: f64) -> Self {
        Self::new(d, m, vec![value; d * m], vec![0.0; d]).expect("flat profile is valid")
    }

    /// Expand into a [`FreeModel`] with one rank-one coefficient `σᵢⱼ·eᵢeⱼ*`
    /// per nonzero variance (zero entries are dropped).
    pub fn to_free_model(&self) -> FreeModel {
        let mut coeffs = Vec::new();
        for i in 0..self.d {
            for j in 0..self.m {
                let s2 = self.sigma2(i, j);
                if s2 == 0.0 {
                    continue;
                }
                let mut a = ComplexMatrix::zeros(self.d, self.m);
                a[(i, j)] = C64::new(s2.sqrt(), 0.0);
                coeffs.push(a);
            }
        }
        FreeModel::new(
            self.d,
            self.m,
            coeffs,
            HermitianMatrix::diag_real(&self.bdiag),
        )
        .expect("profile expansion is always valid")
    }

    /// Permute the rows of `σ²` and `bdiag` (edges are invariant).
    pub fn permuted_rows(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.d);
        let mut sigma2 = vec![0.0; self.d * self.m];
        let mut bdiag = vec![0.0; self.d];
        for (new_i, &old_i) in perm.iter().enumerate() {
            bdiag[new_i] = self.bdiag[old_i];
            for j in 0..self.m {
                sigma2[new_i * self.m + j] = self.sigma2(old_i, j);
            }
        }
        Self {
            d: self.d,
            m: self.m,
            sigma2,
            bdiag,
        }
    }

    pub fn scaled_variances(&self, factor: f64) -> Self {
        Self {
            d: self.d,
            m: self.m,
            sigma2: self.sigma2.iter().map(|v| v * factor).collect(),
            bdiag: self.bdiag.clone(),
        }
    }
}

/// See [`VarianceProfile::to_free_model`].
pub fn from_variance_profile(profile: &VarianceProfile) -> FreeModel {
    profile.to_free_model()
}
