//! Variational spectral-edge solvers.
//!
//! The upper edge is `inf λ_max(h(z))` over the open cone `{z ≻ 0, Φ*(z) ≺ 1}`
//! with `h(z) = b + z⁻¹ + Φ((1 − Φ*(z))⁻¹)`; the lower edge is
//! `sup λ_min(h(z))` over `z ≺ 0`. Any feasible point yields a rigorous
//! one-sided bound, which is what the certificates in [`EdgeResult`] carry.
//!
//! The upper solver is a log-barrier interior method with a softmax-smoothed
//! spectral objective and BFGS inner iterations, followed by a fixed-point
//! polish through the [`crate::cauchy`] continuation (the optimizer satisfies
//! `h(z) = λ·1` at the optimum, so the Cauchy transform pins the last digits).
//! The lower edge runs the continuation directly; every iterate is still a
//! valid certificate.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::cauchy::{self, CauchyError, CauchyOpts};
use crate::linalg::{
    invertibility_floor, positivity_margin, ComplexMatrix, HermitianMatrix, LinalgError, C64,
};
use crate::model::{FreeModel, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Variational,
    Cauchy,
    Dilation,
    Diagonal,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Variational => "variational",
            Method::Cauchy => "cauchy",
            Method::Dilation => "dilation",
            Method::Diagonal => "diagonal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EdgeOpts {
    /// Target accuracy of the edge value.
    pub tol: f64,
    /// Acceptable `‖h(z) − value·1‖_F` at an attained optimum.
    pub flat_tol: f64,
    /// Cap on total barrier (inner) iterations.
    pub max_barrier_iter: usize,
}

impl Default for EdgeOpts {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            flat_tol: 1e-6,
            max_barrier_iter: 500,
        }
    }
}

/// Outcome of an edge computation: the edge estimate plus a strictly feasible
/// certificate whose objective value is a rigorous one-sided bound.
#[derive(Debug, Clone)]
pub struct EdgeResult {
    pub value: f64,
    pub certificate: HermitianMatrix,
    pub certificate_value: f64,
    pub flatness_residual: f64,
    pub iterations: usize,
    pub method: Method,
    /// Set when the optimizer escaped toward the cone boundary or infinity
    /// (the infimum need not be attained, e.g. `n = 0`).
    pub boundary_escape: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EdgeError {
    #[error("certificate z is numerically singular")]
    SingularZ,
    #[error("resolvent 1 - Phi*(z) is numerically singular")]
    SingularResolvent,
    #[error("infeasible certificate for {side:?} edge: {constraint}")]
    Infeasible { side: Side, constraint: String },
    #[error("edge bracket not found after {doublings} doublings")]
    BracketNotFound { doublings: usize },
    #[error("iteration limit reached; best rigorous bound {best_bound}")]
    MaxIterations { best_bound: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl From<CauchyError> for EdgeError {
    fn from(e: CauchyError) -> Self {
        match e {
            CauchyError::BracketNotFound { doublings } => EdgeError::BracketNotFound { doublings },
            CauchyError::Model(m) => EdgeError::Model(m),
            CauchyError::Linalg(l) => EdgeError::Linalg(l),
            _ => EdgeError::SingularResolvent,
        }
    }
}

/// The variational objective `h(z) = b + z⁻¹ + Σᵢ aᵢ(1 − Σⱼ aⱼ*zaⱼ)⁻¹aᵢ*`.
pub fn objective_h(model: &FreeModel, z: &HermitianMatrix) -> Result<HermitianMatrix, EdgeError> {
    let zm = z.as_matrix();
    let floor = invertibility_floor(zm.fro_norm());
    if zm.smallest_singular_value()? <= floor {
        return Err(EdgeError::SingularZ);
    }
    let z_inv = zm.inverse().map_err(|_| EdgeError::SingularZ)?;
    let resolvent = ComplexMatrix::identity(model.m()).sub(&model.phi_star_complex(zm)?);
    if resolvent.smallest_singular_value()? <= invertibility_floor(resolvent.fro_norm()) {
        return Err(EdgeError::SingularResolvent);
    }
    let w = resolvent
        .inverse()
        .map_err(|_| EdgeError::SingularResolvent)?;
    let h = model
        .shift()
        .as_matrix()
        .add(&z_inv)
        .add(&model.phi_complex(&w)?);
    Ok(HermitianMatrix::new_unchecked(h))
}

/// Feasibility-checked objective evaluation: `λ_max(h(z))` for the upper
/// side, `λ_min(h(z))` for the lower side. Any strictly feasible `z` gives a
/// rigorous bound on the corresponding edge.
pub fn eval_certificate(model: &FreeModel, z: &HermitianMatrix, side: Side) -> Result<f64, EdgeError> {
    check_feasible(model, z, side)?;
    let h = objective_h(model, z)?;
    let (lo, hi) = h.eig_extremes()?;
    Ok(match side {
        Side::Upper => hi,
        Side::Lower => lo,
    })
}

fn check_feasible(model: &FreeModel, z: &HermitianMatrix, side: Side) -> Result<(), EdgeError> {
    let margin = positivity_margin(z.fro_norm());
    let (lo, hi) = z.eig_extremes()?;
    match side {
        Side::Upper => {
            if lo <= margin {
                return Err(EdgeError::Infeasible {
                    side,
                    constraint: alloc::format!("z not positive definite (lambda_min = {lo:.3e})"),
                });
            }
            let ps = model.phi_star(z)?;
            let (_, ps_hi) = ps.eig_extremes()?;
            if ps_hi >= 1.0 - positivity_margin(ps.fro_norm()) {
                return Err(EdgeError::Infeasible {
                    side,
                    constraint: alloc::format!(
                        "Phi*(z) not strictly below identity (lambda_max = {ps_hi:.6e})"
                    ),
                });
            }
        }
        Side::Lower => {
            if hi >= -margin {
                return Err(EdgeError::Infeasible {
                    side,
                    constraint: alloc::format!("z not negative definite (lambda_max = {hi:.3e})"),
                });
            }
        }
    }
    Ok(())
}

// ── Hermitian vectorization ─────────────────────────────────────────
//
// Isometry between Hermitian d×d matrices with the Frobenius inner product
// and R^{d²} with the dot product: diagonal entries, then (√2·Re, √2·Im)
// for each off-diagonal pair.

pub(crate) fn herm_to_vec(h: &HermitianMatrix) -> Vec<f64> {
    let d = h.dim();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(h[(i, i)].re);
    }
    let s = core::f64::consts::SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            v.push(s * h[(i, j)].re);
            v.push(s * h[(i, j)].im);
        }
    }
    v
}

pub(crate) fn vec_to_herm(v: &[f64], d: usize) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let s = 1.0 / core::f64::consts::SQRT_2;
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let re = v[k] * s;
            let im = v[k + 1] * s;
            k += 2;
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
        }
    }
    HermitianMatrix::new_unchecked(m)
}

// ── Barrier problems ────────────────────────────────────────────────

/// A spectral optimization problem `min λ_max(h(z))` over an open cone cut
/// out by positive-definiteness constraints.
pub(crate) trait SpectralProblem {
    fn dim(&self) -> usize;
    /// `h(z)`, or `None` when `z` is outside the domain.
    fn objective_matrix(&self, z: &HermitianMatrix) -> Option<HermitianMatrix>;
    /// Adjoint of the derivative of `h` at `z` applied to the weight `p`.
    fn objective_adjoint(&self, z: &HermitianMatrix, p: &HermitianMatrix)
        -> Option<HermitianMatrix>;
    /// Constraint matrices required to stay positive definite.
    fn constraints(&self, z: &HermitianMatrix) -> Vec<HermitianMatrix>;
    /// Gradient of `-Σ logdet S_k(z)`.
    fn barrier_gradient(&self, z: &HermitianMatrix) -> Option<HermitianMatrix>;
}

/// Upper-edge covariance problem over `{z ≻ 0, Φ*(z) ≺ 1}`.
pub(crate) struct CovarianceUpper<'a> {
    pub model: &'a FreeModel,
}

impl CovarianceUpper<'_> {
    fn resolvent_inverse(&self, z: &HermitianMatrix) -> Option<ComplexMatrix> {
        let resolvent =
            ComplexMatrix::identity(self.model.m()).sub(&self.model.phi_star_complex(z.as_matrix()).ok()?);
        resolvent.inverse().ok()
    }
}

impl SpectralProblem for CovarianceUpper<'_> {
    fn dim(&self) -> usize {
        self.model.d()
    }

    fn objective_matrix(&self, z: &HermitianMatrix) -> Option<HermitianMatrix> {
        objective_h(self.model, z).ok()
    }

    fn objective_adjoint(
        &self,
        z: &HermitianMatrix,
        p: &HermitianMatrix,
    ) -> Option<HermitianMatrix> {
        let z_inv = z.inverse().ok()?;
        let w = self.resolvent_inverse(z)?;
        let first = z_inv.mul(p.as_matrix()).mul(&z_inv).scale_re(-1.0);
        let inner = w
            .mul(&self.model.phi_star_complex(p.as_matrix()).ok()?)
            .mul(&w);
        let second = self.model.phi_complex(&inner).ok()?;
        Some(HermitianMatrix::new_unchecked(first.add(&second)))
    }

    fn constraints(&self, z: &HermitianMatrix) -> Vec<HermitianMatrix> {
        let phi_star = self
            .model
            .phi_star(z)
            .expect("dimension checked at construction");
        let resolvent = HermitianMatrix::new_unchecked(
            ComplexMatrix::identity(self.model.m()).sub(phi_star.as_matrix()),
        );
        vec![z.clone(), resolvent]
    }

    fn barrier_gradient(&self, z: &HermitianMatrix) -> Option<HermitianMatrix> {
        let z_inv = z.inverse().ok()?;
        let w = self.resolvent_inverse(z)?;
        let grad = z_inv.scale_re(-1.0).add(&self.model.phi_complex(&w).ok()?);
        Some(HermitianMatrix::new_unchecked(grad))
    }
}

/// Lehner's self-adjoint problem: `min λ_max(a₀ + z⁻¹ + Σ aᵢ z aᵢ)` over
/// `z ≻ 0`, with Hermitian coefficients.
pub(crate) struct LehnerProblem<'a> {
    pub a0: &'a HermitianMatrix,
    pub coeffs: &'a [HermitianMatrix],
}

impl LehnerProblem<'_> {
    pub(crate) fn cov_map(&self, z: &ComplexMatrix) -> ComplexMatrix {
        let d = self.a0.dim();
        let mut out = ComplexMatrix::zeros(d, d);
        for a in self.coeffs {
            out = out.add(&a.as_matrix().mul(z).mul(a.as_matrix()));
        }
        out
    }

    pub(crate) fn h_complex(&self, z: &ComplexMatrix) -> Option<ComplexMatrix> {
        let z_inv = z.inverse().ok()?;
        Some(self.a0.as_matrix().add(&z_inv).add(&self.cov_map(z)))
    }
}

impl SpectralProblem for LehnerProblem<'_> {
    fn dim(&self) -> usize {
        self.a0.dim()
    }

    fn objective_matrix(&self, z: &HermitianMatrix) -> Option<HermitianMatrix> {
        Some(HermitianMatrix::new_unchecked(
            self.h_complex(z.as_matrix())?,
        ))
    }

    fn objective_adjoint(
        &self,
        z: &HermitianMatrix,
        p: &HermitianMatrix,
    ) -> Option<HermitianMatrix> {
        let z_inv = z.inverse().ok()?;
        let first = z_inv.mul(p.as_matrix()).mul(&z_inv).scale_re(-1.0);
        Some(HermitianMatrix::new_unchecked(
            first.add(&self.cov_map(p.as_matrix())),
        ))
    }

    fn constraints(&self, z: &HermitianMatrix) -> Vec<HermitianMatrix> {
        vec![z.clone()]
    }

    fn barrier_gradient(&self, z: &HermitianMatrix) -> Option<HermitianMatrix> {
        let z_inv = z.inverse().ok()?;
        Some(HermitianMatrix::new_unchecked(z_inv.scale_re(-1.0)))
    }
}

// ── Smoothed objective and BFGS ─────────────────────────────────────

/// `(1/β)·log Σ exp(β λ_k)` of a Hermitian matrix plus softmax weights as a
/// density matrix, computed stably.
fn smoothmax(h: &HermitianMatrix, beta: f64) -> Option<(f64, HermitianMatrix)> {
    let (vals, vecs) = h.eigh().ok()?;
    let top = vals.last().copied()?;
    let mut weights: Vec<f64> = vals.iter().map(|&v| ((v - top) * beta).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let value = top + total.ln() / beta;
    let d = h.dim();
    let mut scaled = vecs.clone();
    for j in 0..d {
        for i in 0..d {
            scaled[(i, j)] = scaled[(i, j)].scale(weights[j]);
        }
    }
    let p = HermitianMatrix::new_unchecked(scaled.mul(&vecs.adjoint()));
    Some((value, p))
}

fn logdet_pd(s: &HermitianMatrix) -> Option<f64> {
    let vals = s.eigvals().ok()?;
    let mut acc = 0.0;
    for v in vals {
        if v <= 0.0 {
            return None;
        }
        acc += v.ln();
    }
    Some(acc)
}

/// Minimize `f` with BFGS and Armijo backtracking; `f` returns `None` on
/// infeasible points. Returns (x, fx, iterations used).
pub(crate) fn bfgs_minimize(
    mut f: impl FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    x0: Vec<f64>,
    max_iter: usize,
    grad_tol: f64,
) -> (Vec<f64>, f64, usize) {
    let p = x0.len();
    let mut x = x0;
    let Some((mut fx, mut gx)) = f(&x) else {
        return (x, f64::INFINITY, 0);
    };
    let mut hinv = vec![0.0; p * p];
    for i in 0..p {
        hinv[i * p + i] = 1.0;
    }
    let mut iters = 0;
    for _ in 0..max_iter {
        iters += 1;
        let gnorm = gx.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= grad_tol {
            break;
        }
        // dir = -Hinv g
        let mut dir = vec![0.0; p];
        for i in 0..p {
            let mut s = 0.0;
            for j in 0..p {
                s += hinv[i * p + j] * gx[j];
            }
            dir[i] = -s;
        }
        let mut slope: f64 = dir.iter().zip(&gx).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // reset to steepest descent
            for i in 0..p {
                for j in 0..p {
                    hinv[i * p + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            for i in 0..p {
                dir[i] = -gx[i];
            }
            slope = -gnorm * gnorm;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            if let Some((ft, gt)) = f(&xt) {
                if ft <= fx + 1e-4 * t * slope {
                    accepted = Some((xt, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            break;
        };
        // BFGS update on the inverse Hessian
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let snorm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * snorm * ynorm {
            let rho = 1.0 / sy;
            // Hinv = (I - rho s yT) Hinv (I - rho y sT) + rho s sT
            let mut hy = vec![0.0; p];
            for i in 0..p {
                let mut acc = 0.0;
                for j in 0..p {
                    acc += hinv[i * p + j] * y[j];
                }
                hy[i] = acc;
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..p {
                for j in 0..p {
                    hinv[i * p + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }
        x = xt;
        fx = ft;
        gx = gt;
    }
    (x, fx, iters)
}

/// Log-barrier outer loop: returns the best iterate, its raw objective value,
/// iterations consumed, and a boundary-escape flag.
pub(crate) fn barrier_minimize<P: SpectralProblem>(
    problem: &P,
    z0: HermitianMatrix,
    opts: &EdgeOpts,
) -> (HermitianMatrix, f64, usize, bool) {
    let d = problem.dim();
    let scale = problem
        .objective_matrix(&z0)
        .map(|h| h.fro_norm().max(1.0))
        .unwrap_or(1.0);
    let mut mu = 0.1 * scale;
    let mut z = z0.clone();
    let mut total_iters = 0;
    let z0_norm = z0.fro_norm().max(1.0);
    let mu_floor = opts.tol.max(1e-9) * scale;
    while total_iters < opts.max_barrier_iter {
        let beta = (10.0 / mu).min(1e12);
        let eval = |v: &[f64]| -> Option<(f64, Vec<f64>)> {
            let zc = vec_to_herm(v, d);
            let h = problem.objective_matrix(&zc)?;
            let (sm, p) = smoothmax(&h, beta)?;
            let mut barrier = 0.0;
            for s in problem.constraints(&zc) {
                barrier -= logdet_pd(&s)?;
            }
            let grad_obj = problem.objective_adjoint(&zc, &p)?;
            let grad_bar = problem.barrier_gradient(&zc)?;
            let grad = grad_obj.add(&grad_bar.scale_re(mu));
            Some((sm + mu * barrier, herm_to_vec(&grad)))
        };
        let budget = (opts.max_barrier_iter - total_iters).min(60);
        let (xv, _fv, used) = bfgs_minimize(eval, herm_to_vec(&z), budget, mu * 1e-3);
        total_iters += used;
        let cand = vec_to_herm(&xv, d);
        if problem.objective_matrix(&cand).is_some() {
            z = cand;
        }
        if mu <= mu_floor {
            break;
        }
        mu *= 0.2;
    }
    let value = problem
        .objective_matrix(&z)
        .and_then(|h| h.eig_extremes().ok())
        .map(|(_, hi)| hi)
        .unwrap_or(f64::INFINITY);
    let escape = z.fro_norm() > 1e6 * z0_norm;
    (z, value, total_iters, escape)
}

// ── Public edge solvers ─────────────────────────────────────────────

/// Always-feasible upper-edge starting point `t·1`.
pub(crate) fn upper_start(model: &FreeModel) -> Result<HermitianMatrix, EdgeError> {
    let (_, ps_max) = model.phi_star_of_identity().eig_extremes()?;
    let t = 0.5 / ps_max.max(1.0);
    Ok(HermitianMatrix::scaled_identity(model.d(), t))
}

fn finish_result(
    model: &FreeModel,
    cert: HermitianMatrix,
    side: Side,
    iterations: usize,
    method: Method,
    boundary_escape: bool,
) -> Result<EdgeResult, EdgeError> {
    let h = objective_h(model, &cert)?;
    let (lo, hi) = h.eig_extremes()?;
    let value = match side {
        Side::Upper => hi,
        Side::Lower => lo,
    };
    let flat = h
        .as_matrix()
        .sub(&ComplexMatrix::identity(model.d()).scale_re(value))
        .fro_norm();
    Ok(EdgeResult {
        value,
        certificate: cert,
        certificate_value: value,
        flatness_residual: flat,
        iterations,
        method,
        boundary_escape,
    })
}

/// `λ_max(xx* + b⊗1)` by the barrier interior method with Cauchy polish.
pub fn upper_edge(model: &FreeModel, opts: &EdgeOpts) -> Result<EdgeResult, EdgeError> {
    model.validate()?;
    let z0 = upper_start(model)?;
    let problem = CovarianceUpper { model };
    let (z_bar, raw_value, barrier_iters, escape) = barrier_minimize(&problem, z0.clone(), opts);
    let barrier_cert = if problem.objective_matrix(&z_bar).is_some() {
        z_bar
    } else {
        z0
    };
    // fixed-point polish: the optimizer satisfies h(z) = λ·1 with z = G(λ),
    // so continuation in λ pins the edge far more precisely.
    let copts = CauchyOpts::default();
    match cauchy::edge_from_cauchy_hint(model, Side::Upper, &copts, opts.tol, Some(raw_value)) {
        Ok(polished) if polished.value <= raw_value + opts.tol => Ok(EdgeResult {
            iterations: barrier_iters + polished.iterations,
            method: Method::Variational,
            boundary_escape: escape || polished.boundary_escape,
            ..polished
        }),
        _ => finish_result(
            model,
            barrier_cert,
            Side::Upper,
            barrier_iters,
            Method::Variational,
            escape,
        ),
    }
}

/// `λ_min(xx* + b⊗1)`. Primary path is continuation in `λ` through the
/// Cauchy transform (`z = G(λ)` stays negative definite below the spectrum);
/// the certificate is always a rigorous lower bound.
pub fn lower_edge(model: &FreeModel, opts: &EdgeOpts) -> Result<EdgeResult, EdgeError> {
    model.validate()?;
    let copts = CauchyOpts::default();
    let res = cauchy::edge_from_cauchy(model, Side::Lower, &copts, opts.tol)?;
    Ok(EdgeResult {
        method: Method::Variational,
        ..res
    })
}

/// Lehner's formula `λ_max(a₀⊗1 + Σ aᵢ⊗sᵢ) = inf_{z≻0} λ_max(a₀ + z⁻¹ + Σ aᵢzaᵢ)`
/// for Hermitian coefficients.
pub fn lehner_selfadjoint_max(
    a0: &HermitianMatrix,
    coeffs: &[HermitianMatrix],
    opts: &EdgeOpts,
) -> Result<EdgeResult, EdgeError> {
    let d = a0.dim();
    for a in coeffs {
        if a.dim() != d {
            return Err(EdgeError::Model(ModelError::DimensionMismatch {
                context: "lehner coefficients",
                expected: d,
                got: a.dim(),
            }));
        }
    }
    let problem = LehnerProblem { a0, coeffs };
    // feasible start: z = t·1 with t balancing 1/t against t·Σ‖aᵢ‖²
    let cov_norm = problem
        .cov_map(&ComplexMatrix::identity(d))
        .fro_norm()
        .max(1.0);
    let z0 = HermitianMatrix::scaled_identity(d, 1.0 / cov_norm.sqrt());
    let (z_bar, raw_value, iters, escape) = barrier_minimize(&problem, z0.clone(), opts);
    let cert = if problem.objective_matrix(&z_bar).is_some() {
        z_bar
    } else {
        z0
    };
    let copts = CauchyOpts::default();
    let polish = cauchy::lehner_edge_polish(&problem, &copts, opts.tol, raw_value);
    // the continuation λ is immune to the conditioning of h at a near-singular
    // optimizer, so prefer it as the reported value whenever it improves
    let (cert, value, iterations, escape) = match polish {
        Ok((zp, lam, extra))
            if lam <= raw_value + opts.tol && problem.objective_matrix(&zp).is_some() =>
        {
            (zp, lam, iters + extra, escape)
        }
        _ => {
            let v = problem
                .objective_matrix(&cert)
                .and_then(|h| h.eig_extremes().ok())
                .map(|(_, hi)| hi)
                .unwrap_or(raw_value);
            (cert, v, iters, escape)
        }
    };
    let h = problem
        .objective_matrix(&cert)
        .ok_or(EdgeError::SingularZ)?;
    let (_, cert_value) = h.eig_extremes()?;
    let flat = h
        .as_matrix()
        .sub(&ComplexMatrix::identity(d).scale_re(cert_value))
        .fro_norm();
    Ok(EdgeResult {
        value,
        certificate: cert,
        certificate_value: cert_value,
        flatness_residual: flat,
        iterations,
        method: Method::Variational,
        boundary_escape: escape,
    })
}

/// Independent cross-check for the upper edge via a self-adjoint dilation:
/// shift `b` to a positive matrix, linearize `xx* + b⊗1` into an
/// `(m+2d)`-dimensional Hermitian family, run Lehner's formula, and
/// square back.
pub fn dilated_cross_check(model: &FreeModel, opts: &EdgeOpts) -> Result<EdgeResult, EdgeError> {
    model.validate()?;
    let d = model.d();
    let m = model.m();
    let (b_min, _) = model.shift().eig_extremes()?;
    let c = 1.0 + (-b_min).max(0.0);
    let shifted = model.shift().add_scaled_identity(c);
    let a0_half = shifted.sqrt_psd()?; // a₀ with a₀a₀* = b + c·1
    let r = m + 2 * d;
    // block layout: [0..d) ⊕ [d..d+m) ⊕ [d+m..r)
    let mut tilde_a0 = ComplexMatrix::zeros(r, r);
    for i in 0..d {
        for j in 0..d {
            tilde_a0[(d + m + i, j)] = a0_half[(i, j)];
            tilde_a0[(j, d + m + i)] = a0_half[(i, j)].conj();
        }
    }
    let tilde_a0 = HermitianMatrix::new_unchecked(tilde_a0);
    let mut tilde_coeffs = Vec::with_capacity(model.n());
    for a in model.coeffs() {
        let mut t = ComplexMatrix::zeros(r, r);
        for i in 0..d {
            for j in 0..m {
                t[(d + m + i, d + j)] = a[(i, j)];
                t[(d + j, d + m + i)] = a[(i, j)].conj();
            }
        }
        tilde_coeffs.push(HermitianMatrix::new_unchecked(t));
    }
    let mut lehner_opts = opts.clone();
    lehner_opts.tol = (opts.tol * 0.05).max(1e-11);
    let res = lehner_selfadjoint_max(&tilde_a0, &tilde_coeffs, &lehner_opts)?;
    let value = res.value * res.value - c;
    // produce a d×d certificate on the original model at the computed edge
    let copts = CauchyOpts::default();
    let hint = value + opts.tol.max(1e-9) * value.abs().max(1.0);
    let (certificate, cert_value, flat, extra_iters, escape) =
        match cauchy::certificate_at(model, Side::Upper, hint, &copts) {
            Ok((cert, cv, fl)) => (cert, cv, fl, 0, false),
            Err(_) => {
                let z0 = upper_start(model)?;
                let h = objective_h(model, &z0)?;
                let (_, hi) = h.eig_extremes()?;
                let flat = h
                    .as_matrix()
                    .sub(&ComplexMatrix::identity(d).scale_re(hi))
                    .fro_norm();
                (z0, hi, flat, 0, true)
            }
        };
    Ok(EdgeResult {
        value,
        certificate,
        certificate_value: cert_value,
        flatness_residual: flat,
        iterations: res.iterations + extra_iters,
        method: Method::Dilation,
        boundary_escape: res.boundary_escape || escape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarianceProfile;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn scalar_model() -> FreeModel {
        FreeModel::new(
            1,
            1,
            alloc::vec![ComplexMatrix::from_real(1, 1, &[1.0])],
            HermitianMatrix::zeros(1),
        )
        .unwrap()
    }

    fn mp_model() -> FreeModel {
        VarianceProfile::flat(2, 8, 1.0 / 8.0).to_free_model()
    }

    fn random_model(rng: &mut StdRng, d: usize, m: usize, n: usize) -> FreeModel {
        let coeffs = (0..n)
            .map(|_| {
                ComplexMatrix::from_fn(d, m, |_, _| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        let shift = HermitianMatrix::new_unchecked(ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }));
        FreeModel::new(d, m, coeffs, shift).unwrap()
    }

    fn random_feasible(rng: &mut StdRng, model: &FreeModel, side: Side) -> HermitianMatrix {
        let d = model.d();
        let r = ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let psd = HermitianMatrix::new_unchecked(r.mul(&r.adjoint())).add_scaled_identity(0.05);
        match side {
            Side::Upper => {
                let (_, hi) = model.phi_star(&psd).unwrap().eig_extremes().unwrap();
                psd.scale_re(rng.gen_range(0.1..0.9) / hi.max(1e-6))
            }
            Side::Lower => psd.scale_re(-rng.gen_range(0.2..2.0)),
        }
    }

    #[test]
    fn objective_examples() {
        let model = scalar_model();
        let h = objective_h(&model, &HermitianMatrix::scaled_identity(1, 0.5)).unwrap();
        assert!((h[(0, 0)].re - 4.0).abs() < 1e-14);
        let h = objective_h(&model, &HermitianMatrix::scaled_identity(1, 0.25)).unwrap();
        assert!((h[(0, 0)].re - 16.0 / 3.0).abs() < 1e-14);

        // empty sum: h(z) = b + z⁻¹
        let mut rng = StdRng::seed_from_u64(5);
        let model = random_model(&mut rng, 3, 2, 0);
        let z = random_feasible(&mut rng, &model, Side::Upper);
        let h = objective_h(&model, &z).unwrap();
        let expected = model
            .shift()
            .as_matrix()
            .add(&z.as_matrix().inverse().unwrap());
        assert!(h.as_matrix().sub(&expected).fro_norm() < 1e-11);
    }

    #[test]
    fn certificate_examples() {
        let model = scalar_model();
        let v = eval_certificate(&model, &HermitianMatrix::scaled_identity(1, 0.5), Side::Upper)
            .unwrap();
        assert!((v - 4.0).abs() < 1e-14);
        let v = eval_certificate(&model, &HermitianMatrix::scaled_identity(1, 0.25), Side::Upper)
            .unwrap();
        assert!((v - 16.0 / 3.0).abs() < 1e-14);
        assert!(v >= 4.0);
        let v = eval_certificate(&model, &HermitianMatrix::scaled_identity(1, -1.0), Side::Lower)
            .unwrap();
        assert!((v + 0.5).abs() < 1e-14);

        // infeasible points are rejected with the violated constraint
        assert!(matches!(
            eval_certificate(&model, &HermitianMatrix::scaled_identity(1, -1.0), Side::Upper),
            Err(EdgeError::Infeasible { .. })
        ));
        assert!(matches!(
            eval_certificate(&model, &HermitianMatrix::scaled_identity(1, 2.0), Side::Upper),
            Err(EdgeError::Infeasible { .. })
        ));
        assert!(matches!(
            eval_certificate(&model, &HermitianMatrix::scaled_identity(1, 0.5), Side::Lower),
            Err(EdgeError::Infeasible { .. })
        ));
    }

    #[test]
    fn scalar_upper_edge_is_four() {
        // grid oracle for 1/z + 1/(1−z) on (0,1)
        let mut best = f64::INFINITY;
        let mut t = 1e-4;
        while t < 1.0 {
            best = best.min(1.0 / t + 1.0 / (1.0 - t));
            t += 1e-4;
        }
        assert!((best - 4.0).abs() < 1e-6);

        let res = upper_edge(&scalar_model(), &EdgeOpts::default()).unwrap();
        assert!((res.value - 4.0).abs() < 1e-8, "got {}", res.value);
        assert!(res.certificate_value >= res.value - 1e-9);
        assert!(res.flatness_residual < 1e-6);
        check_feasible(&scalar_model(), &res.certificate, Side::Upper).unwrap();
    }

    #[test]
    fn scalar_lower_edge_is_zero() {
        let res = lower_edge(&scalar_model(), &EdgeOpts::default()).unwrap();
        assert!(res.value.abs() < 1e-6, "got {}", res.value);
        assert!(res.certificate_value <= res.value + 1e-9);
    }

    #[test]
    fn marchenko_pastur_edges() {
        let model = mp_model();
        let opts = EdgeOpts::default();
        let upper = upper_edge(&model, &opts).unwrap();
        assert!((upper.value - 2.25).abs() < 1e-6, "got {}", upper.value);
        let lower = lower_edge(&model, &opts).unwrap();
        assert!((lower.value - 0.25).abs() < 1e-6, "got {}", lower.value);
    }

    #[test]
    fn atomic_shift_edges() {
        // xx* = 0: edges are the extreme eigenvalues of b
        let model = FreeModel::new(2, 1, alloc::vec![], HermitianMatrix::diag_real(&[1.0, 2.0]))
            .unwrap();
        let opts = EdgeOpts::default();
        let upper = upper_edge(&model, &opts).unwrap();
        assert!((upper.value - 2.0).abs() < 1e-7, "got {}", upper.value);
        let lower = lower_edge(&model, &opts).unwrap();
        assert!((lower.value - 1.0).abs() < 1e-7, "got {}", lower.value);
    }

    #[test]
    fn lehner_scalar_examples() {
        let opts = EdgeOpts::default();
        let one = HermitianMatrix::scaled_identity(1, 1.0);
        let res = lehner_selfadjoint_max(&HermitianMatrix::zeros(1), &[one.clone()], &opts)
            .unwrap();
        assert!((res.value - 2.0).abs() < 1e-7, "got {}", res.value);

        let c = 0.7;
        let res = lehner_selfadjoint_max(
            &HermitianMatrix::scaled_identity(1, c),
            &[one.clone()],
            &opts,
        )
        .unwrap();
        assert!((res.value - (c + 2.0)).abs() < 1e-7, "got {}", res.value);

        let res =
            lehner_selfadjoint_max(&HermitianMatrix::zeros(1), &[one.clone(), one], &opts).unwrap();
        let expected = 2.0 * core::f64::consts::SQRT_2;
        assert!((res.value - expected).abs() < 1e-7, "got {}", res.value);
    }

    #[test]
    fn dilation_examples() {
        let opts = EdgeOpts::default();
        let res = dilated_cross_check(&scalar_model(), &opts).unwrap();
        assert!((res.value - 4.0).abs() < 1e-6, "got {}", res.value);

        let free = FreeModel::new(2, 1, alloc::vec![], HermitianMatrix::diag_real(&[1.0, 2.0]))
            .unwrap();
        let res = dilated_cross_check(&free, &opts).unwrap();
        assert!((res.value - 2.0).abs() < 1e-6, "got {}", res.value);

        let mut rng = StdRng::seed_from_u64(9);
        let model = random_model(&mut rng, 2, 3, 2);
        let direct = upper_edge(&model, &opts).unwrap();
        let dilated = dilated_cross_check(&model, &opts).unwrap();
        assert!(
            (direct.value - dilated.value).abs() < 1e-6,
            "direct {} dilated {}",
            direct.value,
            dilated.value
        );
    }

    #[test]
    fn certificates_bound_the_edges() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..5 {
            let model = random_model(&mut rng, 3, 2, 2);
            let opts = EdgeOpts::default();
            let upper = upper_edge(&model, &opts).unwrap();
            let lower = lower_edge(&model, &opts).unwrap();
            assert!(lower.value <= upper.value + 1e-9);
            for _ in 0..10 {
                let z = random_feasible(&mut rng, &model, Side::Upper);
                let bound = eval_certificate(&model, &z, Side::Upper).unwrap();
                assert!(bound >= upper.value - 1e-8);
                let z = random_feasible(&mut rng, &model, Side::Lower);
                let bound = eval_certificate(&model, &z, Side::Lower).unwrap();
                assert!(bound <= lower.value + 1e-8);
            }
        }
    }

    #[test]
    fn shift_and_scale_covariance() {
        let mut rng = StdRng::seed_from_u64(23);
        let model = random_model(&mut rng, 2, 2, 2);
        let opts = EdgeOpts::default();
        let base_u = upper_edge(&model, &opts).unwrap().value;
        let base_l = lower_edge(&model, &opts).unwrap().value;
        for c in [-3.0, 1.0, 10.0] {
            let shifted = model.shifted(c);
            let u = upper_edge(&shifted, &opts).unwrap().value;
            let l = lower_edge(&shifted, &opts).unwrap().value;
            assert!((u - (base_u + c)).abs() < 1e-7, "shift {c}: {u} vs {}", base_u + c);
            assert!((l - (base_l + c)).abs() < 1e-7, "shift {c}: {l} vs {}", base_l + c);
        }

        let centered = model.with_zero_shift();
        let u0 = upper_edge(&centered, &opts).unwrap().value;
        let l0 = lower_edge(&centered, &opts).unwrap().value;
        for t in [0.5, 2.0] {
            let scaled = centered.scaled_coefficients(t);
            let u = upper_edge(&scaled, &opts).unwrap().value;
            let l = lower_edge(&scaled, &opts).unwrap().value;
            let denom = u0.abs().max(1.0);
            assert!((u - t * t * u0).abs() / denom < 1e-7);
            assert!((l - t * t * l0).abs() / l0.abs().max(1.0) < 1e-7);
        }
    }

    #[test]
    fn upper_objective_midpoint_convexity() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..4 {
            let model = random_model(&mut rng, 3, 3, 2);
            for _ in 0..10 {
                let z1 = random_feasible(&mut rng, &model, Side::Upper);
                let z2 = random_feasible(&mut rng, &model, Side::Upper);
                let mid = z1.add(&z2).scale_re(0.5);
                let f = |z: &HermitianMatrix| {
                    objective_h(&model, z).unwrap().eig_extremes().unwrap().1
                };
                assert!(f(&mid) <= 0.5 * f(&z1) + 0.5 * f(&z2) + 1e-10);
            }
        }
    }

    #[test]
    fn vectorization_roundtrip_is_isometric() {
        let mut rng = StdRng::seed_from_u64(41);
        for d in 1..5 {
            let h = HermitianMatrix::new_unchecked(ComplexMatrix::from_fn(d, d, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }));
            let v = herm_to_vec(&h);
            assert_eq!(v.len(), d * d);
            let back = vec_to_herm(&v, d);
            assert!(back.sub(&h).fro_norm() < 1e-14);
            let norm_v = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm_v - h.fro_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_bound_with_scalar_shift() {
        // b = β·1 and xx* ⪰ 0 force lower_edge ≥ β
        let mut rng = StdRng::seed_from_u64(47);
        let beta = 0.4;
        let coeffs = (0..2)
            .map(|_| {
                ComplexMatrix::from_fn(2, 3, |_, _| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        let model =
            FreeModel::new(2, 3, coeffs, HermitianMatrix::scaled_identity(2, beta)).unwrap();
        let res = lower_edge(&model, &EdgeOpts::default()).unwrap();
        assert!(res.value >= beta - 1e-9);
    }
}


