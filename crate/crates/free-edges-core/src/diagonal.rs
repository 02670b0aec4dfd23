//! Scalar-vector specialization of the variational formulas for
//! independent-entry (variance-profile) models.
//!
//! For diagonal data the matrix problem collapses to `d` real unknowns:
//! the upper edge is `inf` over `v ≻ 0` (with column loads `Σₖ σₖⱼ²vₖ < 1`)
//! of `maxᵢ [bᵢ + 1/vᵢ + Σⱼ σᵢⱼ²/(1 − Σₖ σₖⱼ²vₖ)]`, and the lower edge the
//! mirrored `sup`/`min` over `v ≺ 0`. Restricting the matrix variational
//! problem to diagonal `z` loses nothing, which is exactly what the
//! cross-checks against the full solvers exercise.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::edges::{self, EdgeError, EdgeOpts, EdgeResult, Method, Side};
use crate::linalg::{ComplexMatrix, HermitianMatrix};
use crate::model::VarianceProfile;

/// One feasible point of the diagonal variational problem.
#[derive(Debug, Clone)]
pub struct DiagonalIterate {
    pub v: Vec<f64>,
    /// Entrywise objective `bᵢ + 1/vᵢ + Σⱼ σᵢⱼ²/(1 − Σₖ σₖⱼ²vₖ)`.
    pub objective: Vec<f64>,
    pub feasible: bool,
}

/// `Σₖ σₖⱼ² vₖ` per column.
fn column_loads(profile: &VarianceProfile, v: &[f64]) -> Vec<f64> {
    let (d, m) = (profile.d(), profile.m());
    let mut s = alloc::vec![0.0; m];
    for k in 0..d {
        for (j, sj) in s.iter_mut().enumerate() {
            *sj += profile.sigma2(k, j) * v[k];
        }
    }
    s
}

/// Raw objective values without feasibility gating; `None` when a
/// denominator vanishes.
fn objective_raw(profile: &VarianceProfile, v: &[f64]) -> Option<Vec<f64>> {
    let (d, m) = (profile.d(), profile.m());
    let loads = column_loads(profile, v);
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        if v[i] == 0.0 {
            return None;
        }
        let mut acc = profile.bdiag()[i] + 1.0 / v[i];
        for j in 0..m {
            let denom = 1.0 - loads[j];
            if denom == 0.0 {
                return None;
            }
            acc += profile.sigma2(i, j) / denom;
        }
        if !acc.is_finite() {
            return None;
        }
        out.push(acc);
    }
    Some(out)
}

fn check_feasible(profile: &VarianceProfile, v: &[f64], side: Side) -> Result<(), EdgeError> {
    assert_eq!(v.len(), profile.d(), "v must have length d");
    match side {
        Side::Upper => {
            for (i, &vi) in v.iter().enumerate() {
                if vi <= 0.0 {
                    return Err(EdgeError::Infeasible {
                        side,
                        constraint: alloc::format!("v[{i}] = {vi:.3e} not positive"),
                    });
                }
            }
            for (j, load) in column_loads(profile, v).iter().enumerate() {
                if *load >= 1.0 - 1e-9 {
                    return Err(EdgeError::Infeasible {
                        side,
                        constraint: alloc::format!("column {j} load {load:.6e} reaches 1"),
                    });
                }
            }
        }
        Side::Lower => {
            for (i, &vi) in v.iter().enumerate() {
                if vi >= 0.0 {
                    return Err(EdgeError::Infeasible {
                        side,
                        constraint: alloc::format!("v[{i}] = {vi:.3e} not negative"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Entrywise variational objective at a feasible `v`.
pub fn diag_objective(
    profile: &VarianceProfile,
    v: &[f64],
    side: Side,
) -> Result<Vec<f64>, EdgeError> {
    check_feasible(profile, v, side)?;
    objective_raw(profile, v).ok_or(EdgeError::SingularZ)
}

/// Feasibility-checked iterate with its objective vector.
pub fn diag_iterate(
    profile: &VarianceProfile,
    v: Vec<f64>,
    side: Side,
) -> Result<DiagonalIterate, EdgeError> {
    let objective = diag_objective(profile, &v, side)?;
    Ok(DiagonalIterate {
        v,
        objective,
        feasible: true,
    })
}

// ── Scalar continuation ─────────────────────────────────────────────
//
// Diagonal restriction of the Cauchy fixed point:
// v ← (λ − b − σ²·(1 − (σ²)ᵀv)⁻¹)⁻¹ entrywise. Outside the spectrum the
// iteration converges with all vᵢ of the matching sign.

fn fp_next(profile: &VarianceProfile, lambda: f64, v: &[f64]) -> Option<Vec<f64>> {
    let (d, m) = (profile.d(), profile.m());
    let loads = column_loads(profile, v);
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut denom = lambda - profile.bdiag()[i];
        for j in 0..m {
            let load_denom = 1.0 - loads[j];
            if load_denom == 0.0 {
                return None;
            }
            denom -= profile.sigma2(i, j) / load_denom;
        }
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        out.push(1.0 / denom);
    }
    Some(out)
}

fn newton_step(profile: &VarianceProfile, lambda: f64, v: &[f64]) -> Option<Vec<f64>> {
    let (d, m) = (profile.d(), profile.m());
    let loads = column_loads(profile, v);
    let f = objective_raw(profile, v)?;
    // J_ik = ∂f_i/∂v_k = −δ_ik/vᵢ² + Σⱼ σᵢⱼ²σₖⱼ²/(1−sⱼ)²
    let mut jac = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for k in 0..d {
            let mut entry = if i == k { -1.0 / (v[i] * v[i]) } else { 0.0 };
            for j in 0..m {
                let denom = 1.0 - loads[j];
                entry += profile.sigma2(i, j) * profile.sigma2(k, j) / (denom * denom);
            }
            jac[(i, k)] = crate::linalg::C64::new(entry, 0.0);
        }
    }
    let mut rhs = ComplexMatrix::zeros(d, 1);
    for i in 0..d {
        rhs[(i, 0)] = crate::linalg::C64::new(lambda - f[i], 0.0);
    }
    let sol = jac.solve(&rhs).ok()?;
    Some((0..d).map(|i| sol[(i, 0)].re).collect())
}

fn residual(profile: &VarianceProfile, lambda: f64, v: &[f64]) -> Option<f64> {
    let f = objective_raw(profile, v)?;
    let r = f
        .iter()
        .map(|fi| (fi - lambda).abs())
        .fold(0.0f64, f64::max);
    r.is_finite().then_some(r)
}

fn solve_diag(
    profile: &VarianceProfile,
    lambda: f64,
    v0: Vec<f64>,
    fp_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, bool, usize) {
    let tol = fp_tol * lambda.abs().max(1.0);
    let mut v = v0;
    let mut res = match residual(profile, lambda, &v) {
        Some(r) => r,
        None => return (v, f64::INFINITY, false, 0),
    };
    let mut omega = 1.0f64;
    let mut iters = 0usize;
    // same stall cutoff as the matrix solver: inside the spectrum the
    // residual plateaus at ≈ dist(λ, spectrum), so stop early there
    let mut best_res = res;
    let mut best_iter = 0usize;
    while iters < max_iter {
        if res <= tol {
            return (v, res, true, iters);
        }
        if res < 0.99 * best_res {
            best_res = res;
            best_iter = iters;
        } else if iters - best_iter > 100 {
            break;
        }
        iters += 1;
        if res < 1e-4 * lambda.abs().max(1.0) {
            if let Some(step) = newton_step(profile, lambda, &v) {
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..30 {
                    let vt: Vec<f64> = v.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                    if let Some(rt) = residual(profile, lambda, &vt) {
                        if rt < res {
                            v = vt;
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
        match fp_next(profile, lambda, &v) {
            Some(next) => {
                let disp = next
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                let vnorm = v.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
                if disp <= 1e-12 * vnorm && res <= 1e-5 * lambda.abs().max(1.0) {
                    return (v, res, true, iters);
                }
                let vt: Vec<f64> = v
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| (1.0 - omega) * a + omega * b)
                    .collect();
                match residual(profile, lambda, &vt) {
                    Some(rt) => {
                        if rt > res {
                            omega = (omega * 0.5).max(1e-8);
                        } else {
                            omega = (omega * 1.2).min(1.0);
                        }
                        v = vt;
                        res = rt;
                    }
                    None => {
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
    (v, res, res <= tol, iters)
}

fn profile_mean(profile: &VarianceProfile) -> f64 {
    let d = profile.d();
    let total_var: f64 = (0..d)
        .map(|i| (0..profile.m()).map(|j| profile.sigma2(i, j)).sum::<f64>())
        .sum();
    (profile.bdiag().iter().sum::<f64>() + total_var) / d as f64
}

fn classify(
    profile: &VarianceProfile,
    lambda: f64,
    side: Side,
    warm: Option<&[f64]>,
    max_iter: usize,
) -> (Vec<f64>, bool, usize) {
    let d = profile.d();
    let v0 = match warm {
        Some(v) => v.to_vec(),
        None => {
            let mean = profile_mean(profile);
            let denom = match side {
                Side::Upper => (lambda - mean).max(1e-3),
                Side::Lower => (lambda - mean).min(-1e-3),
            };
            alloc::vec![1.0 / denom; d]
        }
    };
    let (v, _res, converged, iters) = solve_diag(profile, lambda, v0, 1e-11, max_iter);
    let outside = converged
        && match side {
            Side::Upper => v.iter().all(|&x| x > 0.0),
            Side::Lower => v.iter().all(|&x| x < 0.0),
        };
    (v, outside, iters)
}

fn bisect_edge(
    profile: &VarianceProfile,
    side: Side,
    outside_bound: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>, usize), EdgeError> {
    let mean = profile_mean(profile);
    let mut total_iters = 0usize;
    let mut offset = match side {
        Side::Upper => (outside_bound - mean).max(tol.max(1e-6)),
        Side::Lower => (mean - outside_bound).max(tol.max(1e-6)),
    } * (1.0 + 1e-9);
    let mut doublings = 0usize;
    let (mut lam_out, mut v_out);
    loop {
        let lam = match side {
            Side::Upper => mean + offset,
            Side::Lower => mean - offset,
        };
        let (v, outside, iters) = classify(profile, lam, side, None, 2000);
        total_iters += iters;
        if outside {
            lam_out = lam;
            v_out = v;
            break;
        }
        doublings += 1;
        if doublings > 60 {
            return Err(EdgeError::BracketNotFound { doublings });
        }
        offset *= 2.0;
    }
    let mut lam_in = mean;
    while (lam_out - lam_in).abs() > tol {
        let mid = 0.5 * (lam_out + lam_in);
        let (mut v, mut outside, iters) = classify(profile, mid, side, Some(&v_out), 2000);
        total_iters += iters;
        if !outside {
            let (v2, out2, it2) = classify(profile, mid, side, None, 2000);
            total_iters += it2;
            v = v2;
            outside = out2;
        }
        if outside {
            lam_out = mid;
            v_out = v;
        } else {
            lam_in = mid;
        }
    }
    Ok((lam_out, v_out, total_iters))
}

// ── Variational warm start ──────────────────────────────────────────

/// Log-barrier + softmax quasi-Newton on `v = ±exp(u)`; returns a feasible
/// `v` and its rigorous bound.
fn variational_bound(
    profile: &VarianceProfile,
    side: Side,
    opts: &EdgeOpts,
) -> (Vec<f64>, f64, usize, bool) {
    let d = profile.d();
    let m = profile.m();
    let sign = match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    let v_start: Vec<f64> = match side {
        Side::Upper => {
            let col_max = (0..m)
                .map(|j| (0..d).map(|k| profile.sigma2(k, j)).sum::<f64>())
                .fold(0.0f64, f64::max);
            alloc::vec![0.5 / col_max.max(1.0); d]
        }
        Side::Lower => alloc::vec![-1.0; d],
    };
    let u_start: Vec<f64> = v_start.iter().map(|v| v.abs().ln()).collect();
    let scale = objective_raw(profile, &v_start)
        .map(|f| f.iter().map(|x| x.abs()).fold(1.0f64, f64::max))
        .unwrap_or(1.0);
    let mut mu = 0.1 * scale;
    let mu_floor = opts.tol.max(1e-9) * scale;
    let mut u = u_start;
    let mut total = 0usize;
    while total < opts.max_barrier_iter {
        let beta = (10.0 / mu).min(1e12);
        let eval = |uv: &[f64]| -> Option<(f64, Vec<f64>)> {
            let v: Vec<f64> = uv.iter().map(|x| sign * x.exp()).collect();
            if check_feasible(profile, &v, side).is_err() {
                return None;
            }
            let f = objective_raw(profile, &v)?;
            let loads = column_loads(profile, &v);
            // softmax of sign·f (upper: smooth max, lower: smooth −min)
            let top = f
                .iter()
                .map(|x| sign * x)
                .fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = f.iter().map(|&x| ((sign * x - top) * beta).exp()).collect();
            let wsum: f64 = weights.iter().sum();
            let smooth = top + (wsum.ln()) / beta;
            let mut barrier = 0.0;
            if side == Side::Upper {
                for &l in &loads {
                    barrier -= (1.0 - l).ln();
                }
            }
            // gradient wrt v, then chain through dv/du = v
            let mut grad = alloc::vec![0.0; d];
            for k in 0..d {
                let mut g = 0.0;
                for i in 0..d {
                    let w = weights[i] / wsum;
                    let mut df = if i == k { -1.0 / (v[i] * v[i]) } else { 0.0 };
                    for j in 0..m {
                        let denom = 1.0 - loads[j];
                        df += profile.sigma2(i, j) * profile.sigma2(k, j) / (denom * denom);
                    }
                    g += w * sign * df;
                }
                if side == Side::Upper {
                    for j in 0..m {
                        g += mu * profile.sigma2(k, j) / (1.0 - loads[j]);
                    }
                }
                grad[k] = g * v[k];
            }
            Some((smooth + mu * barrier, grad))
        };
        let budget = (opts.max_barrier_iter - total).min(60);
        let (u_new, _f, used) = edges::bfgs_minimize(eval, u.clone(), budget, mu * 1e-3);
        total += used;
        let v_new: Vec<f64> = u_new.iter().map(|x| sign * x.exp()).collect();
        if check_feasible(profile, &v_new, side).is_ok() {
            u = u_new;
        }
        if mu <= mu_floor {
            break;
        }
        mu *= 0.2;
    }
    let v: Vec<f64> = u.iter().map(|x| sign * x.exp()).collect();
    let bound = objective_raw(profile, &v)
        .map(|f| match side {
            Side::Upper => f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Side::Lower => f.iter().copied().fold(f64::INFINITY, f64::min),
        })
        .unwrap_or(match side {
            Side::Upper => f64::INFINITY,
            Side::Lower => f64::NEG_INFINITY,
        });
    let escape = v.iter().any(|x| x.abs() > 1e6);
    (v, bound, total, escape)
}

fn build_result(
    profile: &VarianceProfile,
    lam: f64,
    v: &[f64],
    side: Side,
    iterations: usize,
    escape: bool,
) -> EdgeResult {
    let certificate = HermitianMatrix::diag_real(v);
    let (cert_value, flat) = match objective_raw(profile, v) {
        Some(f) => {
            let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
            let cv = match side {
                Side::Upper => hi,
                Side::Lower => lo,
            };
            (cv, hi - lo)
        }
        None => (lam, f64::NAN),
    };
    EdgeResult {
        value: lam,
        certificate,
        certificate_value: cert_value,
        flatness_residual: flat,
        iterations,
        method: Method::Diagonal,
        boundary_escape: escape,
    }
}

/// Upper spectral edge of the variance-profile model by the diagonal
/// specialization.
pub fn diag_upper_edge(profile: &VarianceProfile, opts: &EdgeOpts) -> Result<EdgeResult, EdgeError> {
    let (_v, bound, var_iters, escape) = variational_bound(profile, Side::Upper, opts);
    let hint = if bound.is_finite() {
        bound
    } else {
        // fall back to the always-feasible starting point's bound
        let d = profile.d();
        let col_max = (0..profile.m())
            .map(|j| (0..d).map(|k| profile.sigma2(k, j)).sum::<f64>())
            .fold(0.0f64, f64::max);
        let v = alloc::vec![0.5 / col_max.max(1.0); d];
        objective_raw(profile, &v)
            .map(|f| f.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .ok_or(EdgeError::SingularZ)?
    };
    let (lam, v_out, cont_iters) = bisect_edge(profile, Side::Upper, hint, opts.tol)?;
    Ok(build_result(
        profile,
        lam,
        &v_out,
        Side::Upper,
        var_iters + cont_iters,
        escape,
    ))
}

/// Lower spectral edge; continuation is primary, the feasible point `v = −1`
/// provides the initial rigorous outside bound.
pub fn diag_lower_edge(profile: &VarianceProfile, opts: &EdgeOpts) -> Result<EdgeResult, EdgeError> {
    let d = profile.d();
    let v = alloc::vec![-1.0; d];
    let bound = objective_raw(profile, &v)
        .map(|f| f.iter().copied().fold(f64::INFINITY, f64::min))
        .ok_or(EdgeError::SingularZ)?;
    let (lam, v_out, iters) = bisect_edge(profile, Side::Lower, bound, opts.tol)?;
    Ok(build_result(profile, lam, &v_out, Side::Lower, iters, false))
}
