//! Matrix Cauchy transform of `xx* + b⊗1`.
//!
//! `G(λ)` is the unique solution of the self-consistency equation
//! `b + G⁻¹ + Φ((1 − Φ*(G))⁻¹) = λ·1` on the Herglotz branch. The solver is a
//! damped fixed-point iteration with a Newton finish; `series_G` is an
//! independent power-series oracle valid far from the spectrum; and
//! `edge_from_cauchy` locates spectral edges by continuation in real `λ`:
//! a point is outside the spectrum exactly when the iteration converges to a
//! definite `G` of the correct sign.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::edges::{self, EdgeResult, LehnerProblem, Method, Side};
use crate::linalg::{ComplexMatrix, HermitianMatrix, LinalgError, C64};
use crate::model::{FreeModel, ModelError};

#[derive(Debug, Clone)]
pub struct CauchyOpts {
    /// Frobenius tolerance on `h(G) − λ·1`, relative to `max(1, |λ|)`.
    pub fp_tol: f64,
    pub max_iter: usize,
    /// Residual below which the solver switches to Newton.
    pub newton_threshold: f64,
}

impl Default for CauchyOpts {
    fn default() -> Self {
        Self {
            fp_tol: 1e-11,
            max_iter: 2000,
            newton_threshold: 1e-4,
        }
    }
}

/// A converged (or abandoned) evaluation of the Cauchy transform.
#[derive(Debug, Clone)]
pub struct CauchyPoint {
    pub lambda: C64,
    pub g: ComplexMatrix,
    /// `H(λ) = (1 − Φ*(G))⁻¹`, the `m×m` companion transform.
    pub h: ComplexMatrix,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CauchyError {
    #[error("fixed point did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("iterate became singular")]
    SingularIterate,
    #[error("series precondition violated: contraction ratio {ratio:.3e} >= 1")]
    SeriesDiverges { ratio: f64 },
    #[error("edge bracket not found after {doublings} doublings")]
    BracketNotFound { doublings: usize },
    #[error("Herglotz sign violated on a converged branch")]
    SignViolation,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

// ── Dyson maps ──────────────────────────────────────────────────────
//
// Both self-consistency equations we solve have the shape
// `h(z) = λ·1` with `h(z) = a₀ + z⁻¹ + (completely positive map of z-ish)`,
// rewritten as the fixed point `z = (λ·1 − (h(z) − z⁻¹))⁻¹`.

pub(crate) trait DysonMap {
    fn dim(&self) -> usize;
    fn h_of(&self, z: &ComplexMatrix) -> Option<ComplexMatrix>;
    /// `(λ·1 − (h(z) − z⁻¹))⁻¹`, the fixed-point update.
    fn fp_next(&self, lambda: C64, z: &ComplexMatrix) -> Option<ComplexMatrix>;
    /// Fréchet derivative `dh(z)[e]` (complex-linear in `e`).
    fn dh(&self, z: &ComplexMatrix, e: &ComplexMatrix) -> Option<ComplexMatrix>;
}

pub(crate) struct CovarianceDyson<'a> {
    pub model: &'a FreeModel,
}

impl CovarianceDyson<'_> {
    fn w_of(&self, z: &ComplexMatrix) -> Option<ComplexMatrix> {
        let m = self.model.m();
        ComplexMatrix::identity(m)
            .sub(&self.model.phi_star_complex(z).ok()?)
            .inverse()
            .ok()
    }
}

impl DysonMap for CovarianceDyson<'_> {
    fn dim(&self) -> usize {
        self.model.d()
    }

    fn h_of(&self, z: &ComplexMatrix) -> Option<ComplexMatrix> {
        let w = self.w_of(z)?;
        let z_inv = z.inverse().ok()?;
        Some(
            self.model
                .shift()
                .as_matrix()
                .add(&z_inv)
                .add(&self.model.phi_complex(&w).ok()?),
        )
    }

    fn fp_next(&self, lambda: C64, z: &ComplexMatrix) -> Option<ComplexMatrix> {
        let w = self.w_of(z)?;
        let d = self.dim();
        ComplexMatrix::identity(d)
            .scale(lambda)
            .sub(self.model.shift().as_matrix())
            .sub(&self.model.phi_complex(&w).ok()?)
            .inverse()
            .ok()
    }

    fn dh(&self, z: &ComplexMatrix, e: &ComplexMatrix) -> Option<ComplexMatrix> {
        let z_inv = z.inverse().ok()?;
        let w = self.w_of(z)?;
        let first = z_inv.mul(e).mul(&z_inv).scale_re(-1.0);
        let inner = w.mul(&self.model.phi_star_complex(e).ok()?).mul(&w);
        Some(first.add(&self.model.phi_complex(&inner).ok()?))
    }
}

pub(crate) struct SemicircleDyson<'a, 'b> {
    pub problem: &'a LehnerProblem<'b>,
}

impl DysonMap for SemicircleDyson<'_, '_> {
    fn dim(&self) -> usize {
        self.problem.a0.dim()
    }

    fn h_of(&self, z: &ComplexMatrix) -> Option<ComplexMatrix> {
        self.problem.h_complex(z)
    }

    fn fp_next(&self, lambda: C64, z: &ComplexMatrix) -> Option<ComplexMatrix> {
        let d = self.dim();
        ComplexMatrix::identity(d)
            .scale(lambda)
            .sub(self.problem.a0.as_matrix())
            .sub(&self.problem.cov_map(z))
            .inverse()
            .ok()
    }

    fn dh(&self, z: &ComplexMatrix, e: &ComplexMatrix) -> Option<ComplexMatrix> {
        let z_inv = z.inverse().ok()?;
        let first = z_inv.mul(e).mul(&z_inv).scale_re(-1.0);
        Some(first.add(&self.problem.cov_map(e)))
    }
}

fn newton_step<M: DysonMap>(
    map: &M,
    z: &ComplexMatrix,
    residual_mat: &ComplexMatrix,
) -> Option<ComplexMatrix> {
    let d = map.dim();
    let n = d * d;
    let mut jac = ComplexMatrix::zeros(n, n);
    for p in 0..d {
        for q in 0..d {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(p, q)] = C64::new(1.0, 0.0);
            let col = map.dh(z, &e)?;
            let k = p * d + q;
            for i in 0..d {
                for j in 0..d {
                    jac[(i * d + j, k)] = col[(i, j)];
                }
            }
        }
    }
    let mut rhs = ComplexMatrix::zeros(n, 1);
    for i in 0..d {
        for j in 0..d {
            rhs[(i * d + j, 0)] = -residual_mat[(i, j)];
        }
    }
    let sol = jac.solve(&rhs).ok()?;
    let mut step = ComplexMatrix::zeros(d, d);
    for p in 0..d {
        for q in 0..d {
            step[(p, q)] = sol[(p * d + q, 0)];
        }
    }
    Some(step)
}

/// Damped fixed-point iteration with adaptive damping and a Newton finish.
pub(crate) fn solve_dyson<M: DysonMap>(
    map: &M,
    lambda: C64,
    z0: ComplexMatrix,
    opts: &CauchyOpts,
) -> (ComplexMatrix, f64, bool, usize) {
    let d = map.dim();
    let lam_id = ComplexMatrix::identity(d).scale(lambda);
    let tol = opts.fp_tol * lambda.norm().max(1.0);
    let residual_of = |z: &ComplexMatrix| map.h_of(z).map(|h| h.sub(&lam_id).fro_norm());
    let mut z = z0;
    let mut res = match residual_of(&z) {
        Some(r) if r.is_finite() => r,
        _ => return (z, f64::INFINITY, false, 0),
    };
    let mut omega = 1.0f64;
    let mut iters = 0usize;
    // stall detection: inside the spectrum (real λ) the residual plateaus at
    // a floor ≈ dist(λ, spectrum); give up early instead of burning the
    // whole iteration budget there
    let mut best_res = res;
    let mut best_iter = 0usize;
    while iters < opts.max_iter {
        if res <= tol {
            return (z, res, true, iters);
        }
        if res < 0.99 * best_res {
            best_res = res;
            best_iter = iters;
        } else if iters - best_iter > 100 {
            break;
        }
        iters += 1;
        if res < opts.newton_threshold {
            let res_mat = map
                .h_of(&z)
                .map(|h| h.sub(&lam_id))
                .expect("residual was finite");
            if let Some(step) = newton_step(map, &z, &res_mat) {
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..30 {
                    let zt = z.add(&step.scale_re(t));
                    if let Some(rt) = residual_of(&zt) {
                        if rt.is_finite() && rt < res {
                            z = zt;
                            res = rt;
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if accepted {
                    continue;
                }
            }
        }
        // residual decrease along the Herglotz branch is not monotone, so the
        // damped step is always taken; ω only reacts to the trend
        match map.fp_next(lambda, &z) {
            Some(next) => {
                // rounding floor: a machine-precision-stationary point of the
                // map is a true solution whose h-residual is limited by the
                // conditioning of z (e.g. near an atom of the spectrum)
                let disp = next.sub(&z).fro_norm();
                if disp <= 1e-12 * z.fro_norm() && res <= 1e-5 * lambda.norm().max(1.0) {
                    return (z, res, true, iters);
                }
                let zt = z.scale_re(1.0 - omega).add(&next.scale_re(omega));
                match residual_of(&zt) {
                    Some(rt) if rt.is_finite() => {
                        if rt > res {
                            omega = (omega * 0.5).max(1e-8);
                        } else {
                            omega = (omega * 1.2).min(1.0);
                        }
                        z = zt;
                        res = rt;
                    }
                    _ => {
                        omega *= 0.5;
                        if omega < 1e-14 {
                            break;
                        }
                    }
                }
            }
            None => {
                omega *= 0.5;
                if omega < 1e-14 {
                    break;
                }
            }
        }
    }
    let converged = res <= tol;
    (z, res, converged, iters)
}

fn initial_iterate(model: &FreeModel, lambda: C64) -> Result<ComplexMatrix, CauchyError> {
    let d = model.d();
    if lambda.im != 0.0 {
        return Ok(ComplexMatrix::identity(d).scale(lambda.inv()));
    }
    let (_, b_max) = model.shift().eig_extremes()?;
    let mean = spectral_mean(model);
    let x = lambda.re;
    let denom = if x >= mean {
        (x - b_max).max(1e-3)
    } else {
        (x - mean).min(-1e-3)
    };
    Ok(ComplexMatrix::identity(d).scale(C64::new(1.0 / denom, 0.0)))
}

/// Mean of the spectral distribution, `(tr b + tr Φ(1))/d`; always inside the
/// convex hull of the spectrum.
pub(crate) fn spectral_mean(model: &FreeModel) -> f64 {
    let d = model.d() as f64;
    (model.shift().as_matrix().trace().re + model.phi_of_identity().as_matrix().trace().re) / d
}

/// Solve the self-consistency equation for `G(λ)`.
#[allow(non_snake_case)]
pub fn solve_G(
    model: &FreeModel,
    lambda: C64,
    opts: &CauchyOpts,
) -> Result<CauchyPoint, CauchyError> {
    model.validate()?;
    let z0 = initial_iterate(model, lambda)?;
    solve_g_from(model, lambda, z0, opts)
}

pub(crate) fn solve_g_from(
    model: &FreeModel,
    lambda: C64,
    z0: ComplexMatrix,
    opts: &CauchyOpts,
) -> Result<CauchyPoint, CauchyError> {
    let map = CovarianceDyson { model };
    let (g, residual, converged, iterations) = solve_dyson(&map, lambda, z0, opts);
    if converged && lambda.im != 0.0 {
        // fail loudly if the damped iteration left the Herglotz branch
        let im_g = imaginary_part(&g);
        let (lo, hi) = im_g.eig_extremes()?;
        let ok = if lambda.im > 0.0 { hi < 0.0 } else { lo > 0.0 };
        if !ok {
            return Err(CauchyError::SignViolation);
        }
    }
    let h = ComplexMatrix::identity(model.m())
        .sub(&model.phi_star_complex(&g)?)
        .inverse()
        .map_err(|_| CauchyError::SingularIterate)?;
    Ok(CauchyPoint {
        lambda,
        g,
        h,
        residual,
        converged,
        iterations,
    })
}

fn imaginary_part(m: &ComplexMatrix) -> HermitianMatrix {
    // (M − M*)/(2i) is Hermitian
    let skew = m.sub(&m.adjoint()).scale(C64::new(0.0, -0.5));
    HermitianMatrix::new_unchecked(skew)
}

// ── Power-series oracle ─────────────────────────────────────────────

/// Truncated moment expansion `G(λ) ≈ g·Σ_{k≤order} C_k`, `g = (λ−b)⁻¹`,
/// via the coupled recursions
/// `C_{k+1} = Φ(1)·g·C_k + Σ_l Φ(D_l)·g·C_{k−1−l}` and
/// `D_k = Φ*(g·C_k) + Σ_l Φ*(g·C_l)·D_{k−1−l}`.
#[allow(non_snake_case)]
pub fn series_G(
    model: &FreeModel,
    lambda: C64,
    order: usize,
) -> Result<ComplexMatrix, CauchyError> {
    model.validate()?;
    assert!(order <= 500, "series order capped at 500");
    let d = model.d();
    let g = ComplexMatrix::identity(d)
        .scale(lambda)
        .sub(model.shift().as_matrix())
        .inverse()
        .map_err(|_| CauchyError::SingularIterate)?;
    // (λ−b)⁻¹ is normal, so its operator norm is max 1/|λ−βᵢ|
    let g_norm = model
        .shift()
        .eigvals()?
        .iter()
        .map(|&beta| 1.0 / (lambda - C64::new(beta, 0.0)).norm())
        .fold(0.0, f64::max);
    let (_, phi1_max) = model.phi_of_identity().eig_extremes()?;
    let ratio = g_norm * phi1_max;
    if ratio >= 1.0 {
        return Err(CauchyError::SeriesDiverges { ratio });
    }
    let phi1 = model.phi_of_identity().as_matrix().clone();
    let mut c: Vec<ComplexMatrix> = alloc::vec![ComplexMatrix::identity(d)];
    let mut ds: Vec<ComplexMatrix> = Vec::new();
    let mut total = ComplexMatrix::identity(d);
    for k in 0..order {
        // D_k from C_0..C_k and D_0..D_{k-1}
        let mut dk = model.phi_star_complex(&g.mul(&c[k]))?;
        for l in 0..k {
            dk = dk.add(&model.phi_star_complex(&g.mul(&c[l]))?.mul(&ds[k - 1 - l]));
        }
        ds.push(dk);
        // C_{k+1}
        let mut next = phi1.mul(&g.mul(&c[k]));
        for l in 0..k {
            next = next.add(&model.phi_complex(&ds[l])?.mul(&g.mul(&c[k - 1 - l])));
        }
        total = total.add(&next);
        c.push(next);
    }
    Ok(g.mul(&total))
}

// ── Edge location by continuation ───────────────────────────────────

pub(crate) struct Classification {
    pub g: ComplexMatrix,
    pub outside: bool,
    pub iterations: usize,
}

/// A real `λ` is outside the spectrum on the given side iff the iteration
/// converges to a definite `G` of the matching sign.
pub(crate) fn classify(
    model: &FreeModel,
    lambda: f64,
    side: Side,
    warm: Option<&ComplexMatrix>,
    opts: &CauchyOpts,
) -> Classification {
    let lam = C64::new(lambda, 0.0);
    let z0 = match warm {
        Some(z) => z.clone(),
        None => match initial_iterate(model, lam) {
            Ok(z) => z,
            Err(_) => {
                return Classification {
                    g: ComplexMatrix::zeros(model.d(), model.d()),
                    outside: false,
                    iterations: 0,
                }
            }
        },
    };
    let map = CovarianceDyson { model };
    let (g, _res, converged, iterations) = solve_dyson(&map, lam, z0, opts);
    let mut outside = false;
    if converged {
        let norm = g.fro_norm();
        if g.asymmetry() <= 1e-7 * norm.max(1.0) {
            let gh = HermitianMatrix::new_unchecked(g.hermitian_part());
            if let Ok((lo, hi)) = gh.eig_extremes() {
                outside = match side {
                    Side::Upper => lo > 0.0,
                    Side::Lower => hi < 0.0,
                };
            }
        }
    }
    Classification {
        g,
        outside,
        iterations,
    }
}

/// Locate a spectral edge by bisection on the region where the signed
/// fixed point exists. `outside_hint` is an optional rigorous outside bound
/// (e.g. from a feasible variational certificate).
pub(crate) fn edge_from_cauchy_hint(
    model: &FreeModel,
    side: Side,
    opts: &CauchyOpts,
    tol: f64,
    outside_hint: Option<f64>,
) -> Result<EdgeResult, CauchyError> {
    model.validate()?;
    let mean = spectral_mean(model);
    let bound = match outside_hint {
        Some(v) => v,
        None => default_outside_bound(model, side)?,
    };
    // make sure the starting outside point actually classifies as outside;
    // double its distance from the inside point if not
    let mut total_iters = 0usize;
    let outside_pt;
    let mut offset = match side {
        Side::Upper => (bound - mean).max(tol.max(1e-6)),
        Side::Lower => (mean - bound).max(tol.max(1e-6)),
    };
    // first probe nudges slightly past the bound: the bound itself may sit
    // exactly on the edge
    offset *= 1.0 + 1e-9;
    let mut doublings = 0usize;
    loop {
        let lam = match side {
            Side::Upper => mean + offset,
            Side::Lower => mean - offset,
        };
        let cls = classify(model, lam, side, None, opts);
        total_iters += cls.iterations;
        if cls.outside {
            outside_pt = Some((lam, cls.g));
            break;
        }
        doublings += 1;
        if doublings > 60 {
            return Err(CauchyError::BracketNotFound { doublings });
        }
        offset *= 2.0;
    }
    let (mut lam_out, mut g_out) = outside_pt.expect("set on break");
    let mut lam_in = mean;
    while (lam_out - lam_in).abs() > tol {
        let mid = 0.5 * (lam_out + lam_in);
        let mut cls = classify(model, mid, side, Some(&g_out), opts);
        total_iters += cls.iterations;
        if !cls.outside {
            // a bad warm start can spoil convergence; re-check cold before
            // committing the point to the inside of the bracket
            let cold = classify(model, mid, side, None, opts);
            total_iters += cold.iterations;
            cls = cold;
        }
        if cls.outside {
            lam_out = mid;
            g_out = cls.g;
        } else {
            lam_in = mid;
        }
    }
    let certificate = HermitianMatrix::new_unchecked(g_out.hermitian_part());
    let h = edges::objective_h(model, &certificate).map_err(|_| CauchyError::SingularIterate)?;
    let (h_lo, h_hi) = h.eig_extremes()?;
    let cert_value = match side {
        Side::Upper => h_hi,
        Side::Lower => h_lo,
    };
    let flat = h
        .as_matrix()
        .sub(&ComplexMatrix::identity(model.d()).scale_re(cert_value))
        .fro_norm();
    Ok(EdgeResult {
        value: lam_out,
        certificate,
        certificate_value: cert_value,
        flatness_residual: flat,
        iterations: total_iters,
        method: Method::Cauchy,
        boundary_escape: false,
    })
}

/// Outside bound from an a-priori feasible variational point.
fn default_outside_bound(model: &FreeModel, side: Side) -> Result<f64, CauchyError> {
    match side {
        Side::Upper => {
            let z = edges::upper_start(model).map_err(|_| CauchyError::SingularIterate)?;
            let h = edges::objective_h(model, &z).map_err(|_| CauchyError::SingularIterate)?;
            let (_, hi) = h.eig_extremes()?;
            Ok(hi)
        }
        Side::Lower => {
            let z = HermitianMatrix::scaled_identity(model.d(), -1.0);
            let h = edges::objective_h(model, &z).map_err(|_| CauchyError::SingularIterate)?;
            let (lo, _) = h.eig_extremes()?;
            Ok(lo)
        }
    }
}

/// Public entry point: locate an edge purely through the Cauchy transform.
pub fn edge_from_cauchy(
    model: &FreeModel,
    side: Side,
    opts: &CauchyOpts,
    tol: f64,
) -> Result<EdgeResult, CauchyError> {
    edge_from_cauchy_hint(model, side, opts, tol, None)
}

/// Evaluate a definite-signed certificate at a fixed `λ` just outside the
/// spectrum; returns `(z, certificate value, flatness residual)`.
pub(crate) fn certificate_at(
    model: &FreeModel,
    side: Side,
    lambda: f64,
    opts: &CauchyOpts,
) -> Result<(HermitianMatrix, f64, f64), CauchyError> {
    let cls = classify(model, lambda, side, None, opts);
    if !cls.outside {
        return Err(CauchyError::NonConvergence {
            iterations: cls.iterations,
            residual: f64::NAN,
        });
    }
    let certificate = HermitianMatrix::new_unchecked(cls.g.hermitian_part());
    let h = edges::objective_h(model, &certificate).map_err(|_| CauchyError::SingularIterate)?;
    let (h_lo, h_hi) = h.eig_extremes()?;
    let value = match side {
        Side::Upper => h_hi,
        Side::Lower => h_lo,
    };
    let flat = h
        .as_matrix()
        .sub(&ComplexMatrix::identity(model.d()).scale_re(value))
        .fro_norm();
    Ok((certificate, value, flat))
}

/// Bisection polish for the self-adjoint (Lehner) problem: above the
/// spectrum the semicircular Dyson equation has a positive-definite solution
/// with `h(G) = λ·1`, so the optimal `z` is `G` at the edge.
pub(crate) fn lehner_edge_polish(
    problem: &LehnerProblem<'_>,
    opts: &CauchyOpts,
    tol: f64,
    outside_bound: f64,
) -> Result<(HermitianMatrix, f64, usize), CauchyError> {
    let map = SemicircleDyson { problem };
    let d = problem.a0.dim();
    let mean = problem.a0.as_matrix().trace().re / d as f64;
    let mut total_iters = 0usize;
    let classify_lehner = |lam: f64, warm: Option<&ComplexMatrix>| {
        let z0 = match warm {
            Some(z) => z.clone(),
            None => ComplexMatrix::identity(d).scale_re(1.0 / (lam - mean).max(1e-3)),
        };
        let (g, _res, converged, iters) = solve_dyson(&map, C64::new(lam, 0.0), z0, opts);
        let mut outside = false;
        if converged && g.asymmetry() <= 1e-7 * g.fro_norm().max(1.0) {
            let gh = HermitianMatrix::new_unchecked(g.hermitian_part());
            if let Ok((lo, _)) = gh.eig_extremes() {
                outside = lo > 0.0;
            }
        }
        (g, outside, iters)
    };
    let mut offset = (outside_bound - mean).max(tol.max(1e-9)) * (1.0 + 1e-9);
    let mut doublings = 0usize;
    let (mut lam_out, mut g_out);
    loop {
        let lam = mean + offset;
        let (g, outside, iters) = classify_lehner(lam, None);
        total_iters += iters;
        if outside {
            lam_out = lam;
            g_out = g;
            break;
        }
        doublings += 1;
        if doublings > 60 {
            return Err(CauchyError::BracketNotFound { doublings });
        }
        offset *= 2.0;
    }
    let mut lam_in = mean;
    while lam_out - lam_in > tol {
        let mid = 0.5 * (lam_out + lam_in);
        let (mut g, mut outside, iters) = classify_lehner(mid, Some(&g_out));
        total_iters += iters;
        if !outside {
            let (g2, out2, it2) = classify_lehner(mid, None);
            total_iters += it2;
            g = g2;
            outside = out2;
        }
        if outside {
            lam_out = mid;
            g_out = g;
        } else {
            lam_in = mid;
        }
    }
    Ok((
        HermitianMatrix::new_unchecked(g_out.hermitian_part()),
        lam_out,
        total_iters,
    ))
}
