//! Acceptance gate: closed-form regressions, cross-method agreement, and
//! property suites. Each criterion prints one pass/fail line.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use free_edges_core::cauchy::{self, CauchyOpts, CauchyPoint};
use free_edges_core::diagonal;
use free_edges_core::edges::{self, EdgeOpts, Side};
use free_edges_core::linalg::{
    dilation, woodbury_inverse, BlockMatrix2x2, ComplexMatrix, HermitianMatrix, C64,
};
use free_edges_core::mc::McConfig;
use free_edges_core::model::{FreeModel, VarianceProfile};
use free_edges::run::mc_edges_parallel;

fn report(criterion: usize, label: &str, ok: bool) {
    println!(
        "criterion {criterion:2} [{}] {label}",
        if ok { "pass" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {label}");
}

fn random_complex(rng: &mut StdRng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn random_hermitian(rng: &mut StdRng, dim: usize) -> HermitianMatrix {
    HermitianMatrix::new_unchecked(random_complex(rng, dim, dim).hermitian_part())
}

fn random_model(rng: &mut StdRng, d: usize, m: usize, n: usize) -> FreeModel {
    let coeffs = (0..n).map(|_| random_complex(rng, d, m)).collect();
    FreeModel::new(d, m, coeffs, random_hermitian(rng, d)).unwrap()
}

/// The shared random-model suite used by criteria 3–7.
fn suite3() -> Vec<FreeModel> {
    let mut rng = StdRng::seed_from_u64(530);
    (0..25)
        .map(|_| {
            let d = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=4);
            let n = rng.gen_range(1..=5);
            random_model(&mut rng, d, m, n)
        })
        .collect()
}

fn scalar_model() -> FreeModel {
    FreeModel::new(
        1,
        1,
        vec![ComplexMatrix::from_real(1, 1, &[1.0])],
        HermitianMatrix::zeros(1),
    )
    .unwrap()
}

#[test]
fn criterion_01_scalar_semicircle() {
    let started = Instant::now();
    let model = scalar_model();
    let opts = EdgeOpts::default();
    let copts = CauchyOpts::default();
    let profile = VarianceProfile::flat(1, 1, 1.0);
    let uppers = [
        edges::upper_edge(&model, &opts).unwrap().value,
        cauchy::edge_from_cauchy(&model, Side::Upper, &copts, opts.tol)
            .unwrap()
            .value,
        edges::dilated_cross_check(&model, &opts).unwrap().value,
        diagonal::diag_upper_edge(&profile, &opts).unwrap().value,
    ];
    // the dilation route bounds the top of the spectrum only
    let lowers = [
        edges::lower_edge(&model, &opts).unwrap().value,
        cauchy::edge_from_cauchy(&model, Side::Lower, &copts, opts.tol)
            .unwrap()
            .value,
        diagonal::diag_lower_edge(&profile, &opts).unwrap().value,
    ];
    let ok_values = uppers.iter().all(|u| (u - 4.0).abs() < 1e-6)
        && lowers.iter().all(|l| l.abs() < 1e-6);
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        &format!("scalar semicircle edges 4/0 by every method ({elapsed:.2}s)"),
        ok_values && elapsed < 1.0,
    );
}

/// Scalar objective of the independent-entries formula for a flat profile
/// with all loads equal by symmetry: f(v) = 1/v + 1/(1 − d·v/m).
fn flat_profile_grid_edge(d: usize, m: usize, side: Side) -> f64 {
    let ratio = d as f64 / m as f64;
    let f = |v: f64| 1.0 / v + 1.0 / (1.0 - ratio * v);
    let (mut lo, mut hi) = match side {
        Side::Upper => (1e-6, 1.0 / ratio - 1e-9),
        Side::Lower => (-60.0, -1e-6),
    };
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..8 {
        // three-point refinement keeps ~1e-9 accuracy with modest work
        let n = 2000;
        best = (f64::INFINITY, 0.0);
        for k in 0..=n {
            let v = lo + (hi - lo) * k as f64 / n as f64;
            let val = match side {
                Side::Upper => f(v),
                Side::Lower => -f(v),
            };
            if val < best.0 {
                best = (val, v);
            }
        }
        let step = (hi - lo) / n as f64;
        lo = best.1 - step;
        hi = best.1 + step;
        if matches!(side, Side::Upper) {
            lo = lo.max(1e-9);
        } else {
            hi = hi.min(-1e-12);
        }
    }
    match side {
        Side::Upper => best.0,
        Side::Lower => -best.0,
    }
}

#[test]
fn criterion_02_marchenko_pastur() {
    let started = Instant::now();
    let opts = EdgeOpts::default();
    let mut ok = true;
    for (d, m) in [(1usize, 4usize), (2, 4), (2, 8), (4, 8)] {
        let ratio = d as f64 / m as f64;
        let upper_exact = (1.0 + ratio.sqrt()).powi(2);
        let lower_exact = (1.0 - ratio.sqrt()).powi(2);
        let profile = VarianceProfile::flat(d, m, 1.0 / m as f64);
        let upper = diagonal::diag_upper_edge(&profile, &opts).unwrap().value;
        let lower = diagonal::diag_lower_edge(&profile, &opts).unwrap().value;
        let grid_upper = flat_profile_grid_edge(d, m, Side::Upper);
        let grid_lower = flat_profile_grid_edge(d, m, Side::Lower);
        ok &= (upper - upper_exact).abs() < 1e-6
            && (lower - lower_exact).abs() < 1e-6
            && (grid_upper - upper_exact).abs() < 1e-6
            && (grid_lower - lower_exact).abs() < 1e-6;
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        2,
        &format!("Marchenko–Pastur edges (1±√(d/m))² with grid oracle ({elapsed:.2}s)"),
        ok && elapsed < 5.0,
    );
}

#[test]
fn criterion_03_cross_method_agreement() {
    let started = Instant::now();
    let opts = EdgeOpts::default();
    let copts = CauchyOpts::default();
    let mut worst_upper = 0.0f64;
    let mut worst_lower = 0.0f64;
    for model in suite3() {
        let var_up = edges::upper_edge(&model, &opts).unwrap().value;
        let cau_up = cauchy::edge_from_cauchy(&model, Side::Upper, &copts, opts.tol)
            .unwrap()
            .value;
        let dil_up = edges::dilated_cross_check(&model, &opts).unwrap().value;
        let var_lo = edges::lower_edge(&model, &opts).unwrap().value;
        let cau_lo = cauchy::edge_from_cauchy(&model, Side::Lower, &copts, opts.tol)
            .unwrap()
            .value;
        for delta in [
            (var_up - cau_up).abs(),
            (var_up - dil_up).abs(),
            (cau_up - dil_up).abs(),
        ] {
            worst_upper = worst_upper.max(delta);
        }
        worst_lower = worst_lower.max((var_lo - cau_lo).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        3,
        &format!(
            "25 random models agree pairwise (upper {worst_upper:.2e}, lower {worst_lower:.2e}, {elapsed:.1}s)"
        ),
        worst_upper <= 1e-5 && worst_lower <= 1e-5 && elapsed < 60.0,
    );
}

/// Converged transform points for criteria 4 and 5: a few real points
/// outside the spectrum plus one in the upper half-plane, per model.
fn sample_points(model: &FreeModel, copts: &CauchyOpts) -> Vec<CauchyPoint> {
    let opts = EdgeOpts::default();
    let upper = edges::upper_edge(model, &opts).unwrap().value;
    let lower = edges::lower_edge(model, &opts).unwrap().value;
    let scale = (upper - lower).abs().max(1.0);
    let lambdas = [
        C64::new(upper + 0.3 * scale, 0.0),
        C64::new(upper + 2.0 * scale, 0.0),
        C64::new(lower - 0.3 * scale, 0.0),
        C64::new(0.5 * (upper + lower), 1.5 * scale),
    ];
    lambdas
        .iter()
        .filter_map(|&lam| cauchy::solve_G(model, lam, copts).ok())
        .filter(|p| p.converged)
        .collect()
}

#[test]
fn criterion_04_transform_residuals() {
    let copts = CauchyOpts::default();
    let mut worst_eq = 0.0f64;
    let mut worst_h = 0.0f64;
    let mut count = 0usize;
    for model in suite3() {
        let d = model.d();
        for point in sample_points(&model, &copts) {
            count += 1;
            let g_inv = point.g.inverse().unwrap();
            let m_block = ComplexMatrix::identity(model.m())
                .sub(&model.phi_star_complex(&point.g).unwrap())
                .inverse()
                .unwrap();
            let h_of_g = model
                .shift()
                .as_matrix()
                .add(&g_inv)
                .add(&model.phi_complex(&m_block).unwrap());
            let eq_res = h_of_g
                .sub(&ComplexMatrix::identity(d).scale(point.lambda))
                .fro_norm()
                / point.lambda.norm().max(1.0);
            let h_res = point.h.sub(&m_block).fro_norm();
            worst_eq = worst_eq.max(eq_res);
            worst_h = worst_h.max(h_res);
        }
    }
    report(
        4,
        &format!(
            "self-consistency residuals on {count} converged points (eq {worst_eq:.2e}, H {worst_h:.2e})"
        ),
        count > 50 && worst_eq <= 1e-9 && worst_h <= 1e-9,
    );
}

#[test]
fn criterion_05_series_oracle() {
    let mut worst = 0.0f64;
    let copts = CauchyOpts::default();
    for model in suite3() {
        let (_, b_max) = model.shift().eig_extremes().unwrap();
        let (_, phi1_max) = model.phi_of_identity().eig_extremes().unwrap();
        let lambda = C64::new(10.0 * (1.0 + b_max + phi1_max), 0.0);
        let series = cauchy::series_G(&model, lambda, 60).unwrap();
        let solved = cauchy::solve_G(&model, lambda, &copts).unwrap();
        worst = worst.max(series.sub(&solved.g).fro_norm());
    }
    report(
        5,
        &format!("order-60 series matches the solver far outside ({worst:.2e})"),
        worst <= 1e-8,
    );
}

#[test]
fn criterion_06_certificate_soundness() {
    let opts = EdgeOpts::default();
    let mut rng = StdRng::seed_from_u64(66);
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_lower = f64::NEG_INFINITY;
    let mut tested = 0usize;
    for model in suite3() {
        let d = model.d();
        let upper = edges::upper_edge(&model, &opts).unwrap().value;
        let lower = edges::lower_edge(&model, &opts).unwrap().value;
        for _ in 0..4 {
            // strictly feasible upper-side z: positive definite, Φ*(z) ≺ 1
            let w = random_complex(&mut rng, d, d);
            let p = HermitianMatrix::new_unchecked(
                w.mul(&w.adjoint()).add(&ComplexMatrix::identity(d).scale_re(0.05)),
            );
            let (_, load) = model.phi_star(&p).unwrap().eig_extremes().unwrap();
            let theta = rng.gen_range(0.2..0.95);
            let z_up = p.scale_re(if load > 0.0 { theta / load } else { 1.0 });
            let bound = edges::eval_certificate(&model, &z_up, Side::Upper).unwrap();
            worst_upper = worst_upper.max(upper - bound); // violation if > 0

            // lower-side z: any negative definite point is feasible
            let w2 = random_complex(&mut rng, d, d);
            let z_lo = HermitianMatrix::new_unchecked(
                w2.mul(&w2.adjoint())
                    .add(&ComplexMatrix::identity(d).scale_re(0.05))
                    .scale_re(-rng.gen_range(0.1..3.0)),
            );
            let bound_lo = edges::eval_certificate(&model, &z_lo, Side::Lower).unwrap();
            worst_lower = worst_lower.max(bound_lo - lower);
            tested += 1;
        }
    }
    report(
        6,
        &format!(
            "{tested}×2 feasible certificates stay one-sided (worst {:.2e}/{:.2e})",
            worst_upper, worst_lower
        ),
        tested == 100 && worst_upper <= 1e-8 && worst_lower <= 1e-8,
    );
}

#[test]
fn criterion_07_shift_and_scale() {
    let opts = EdgeOpts::default();
    let mut ok = true;
    for model in suite3().into_iter().step_by(5) {
        let upper = edges::upper_edge(&model, &opts).unwrap().value;
        let lower = edges::lower_edge(&model, &opts).unwrap().value;
        for c in [-2.5, 3.0] {
            let shifted = model.shifted(c);
            ok &= (edges::upper_edge(&shifted, &opts).unwrap().value - (upper + c)).abs() < 1e-7;
            ok &= (edges::lower_edge(&shifted, &opts).unwrap().value - (lower + c)).abs() < 1e-7;
        }
        let free = model.with_zero_shift();
        let upper0 = edges::upper_edge(&free, &opts).unwrap().value;
        let lower0 = edges::lower_edge(&free, &opts).unwrap().value;
        // relative to the problem scale; the lower edge is often exactly 0
        let scale0 = upper0.abs().max(lower0.abs()).max(1.0);
        for t in [0.7, 1.8] {
            let scaled = free.scaled_coefficients(t);
            let up_t = edges::upper_edge(&scaled, &opts).unwrap().value;
            let lo_t = edges::lower_edge(&scaled, &opts).unwrap().value;
            ok &= (up_t - t * t * upper0).abs() <= 1e-7 * t * t * scale0;
            ok &= (lo_t - t * t * lower0).abs() <= 1e-7 * t * t * scale0;
        }
    }
    report(7, "edges shift by c and scale by t² exactly", ok);
}

#[test]
fn criterion_08_matrix_identity_suites() {
    let mut rng = StdRng::seed_from_u64(88);
    let mut failures = 0usize;

    for _ in 0..100 {
        // Schur positivity: M ≻ 0 ⟺ D ≻ 0 and M/D ≻ 0
        let (da, db) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let w = random_complex(&mut rng, da, da);
        let a = HermitianMatrix::new_unchecked(
            w.mul(&w.adjoint())
                .add(&ComplexMatrix::identity(da).scale_re(rng.gen_range(-0.5..0.5))),
        );
        let wd = random_complex(&mut rng, db, db);
        let d = HermitianMatrix::new_unchecked(
            wd.mul(&wd.adjoint())
                .add(&ComplexMatrix::identity(db).scale_re(rng.gen_range(-0.2..0.5))),
        );
        let b = random_complex(&mut rng, da, db).scale_re(0.5);
        let block = BlockMatrix2x2::new(a, b, d).unwrap();
        let assembled_pd = block.assemble().is_positive_definite().unwrap();
        match block.schur_complement() {
            Ok((_, schur_pd)) => {
                if schur_pd != assembled_pd {
                    failures += 1;
                }
            }
            // singular D: the equivalence presumes D invertible; M ≻ 0 would
            // require D ≻ 0, so the assembled matrix must not be PD here
            Err(_) => {
                if assembled_pd {
                    failures += 1;
                }
            }
        }
    }

    for _ in 0..100 {
        // block inverse formula against the direct inverse
        let (da, db) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let wa = random_complex(&mut rng, da, da);
        let a = HermitianMatrix::new_unchecked(
            wa.mul(&wa.adjoint()).add(&ComplexMatrix::identity(da)),
        );
        let wd = random_complex(&mut rng, db, db);
        let d = HermitianMatrix::new_unchecked(
            wd.mul(&wd.adjoint()).add(&ComplexMatrix::identity(db)),
        );
        let b = random_complex(&mut rng, da, db).scale_re(0.4);
        let block = BlockMatrix2x2::new(a, b, d).unwrap();
        let direct = block.assemble().as_matrix().inverse().unwrap();
        let formula = block.block_inverse().unwrap();
        if formula.sub(&direct).fro_norm() > 1e-10 * direct.fro_norm().max(1.0) {
            failures += 1;
        }
    }

    for _ in 0..100 {
        // Woodbury: (1 − B D⁻¹ B*)⁻¹ = 1 + B (D − B*B)⁻¹ B*
        let (da, db) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let b = random_complex(&mut rng, da, db).scale_re(0.3);
        let wd = random_complex(&mut rng, db, db);
        let d = HermitianMatrix::new_unchecked(
            wd.mul(&wd.adjoint()).add(&ComplexMatrix::identity(db)),
        );
        let lhs = ComplexMatrix::identity(da)
            .sub(&b.mul(&d.as_matrix().solve(&b.adjoint()).unwrap()))
            .inverse()
            .unwrap();
        let rhs = woodbury_inverse(&b, &d).unwrap();
        if rhs.as_matrix().sub(&lhs).fro_norm() > 1e-10 * lhs.fro_norm().max(1.0) {
            failures += 1;
        }
    }

    for _ in 0..100 {
        // dilation spectrum = ±singular values ∪ zeros
        let (rows, cols) = (rng.gen_range(1..=6), rng.gen_range(1..=9));
        let y = random_complex(&mut rng, rows, cols);
        let mut expected: Vec<f64> = Vec::new();
        let svs = y.singular_values().unwrap();
        for &s in &svs {
            expected.push(s);
            expected.push(-s);
        }
        expected.resize(rows + cols, 0.0);
        expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut eigs = dilation(&y).eigvals().unwrap();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let worst = expected
            .iter()
            .zip(&eigs)
            .map(|(e, g)| (e - g).abs())
            .fold(0.0, f64::max);
        if worst > 1e-10 {
            failures += 1;
        }
    }

    report(
        8,
        &format!("matrix-identity property suites, {failures} failures in 400 instances"),
        failures == 0,
    );
}

#[test]
fn criterion_09_monte_carlo_sanity() {
    let started = Instant::now();
    let seed = 2024; // fixed for reproducibility
    let scalar_stats = mc_edges_parallel(
        &scalar_model(),
        &McConfig {
            dim: 500,
            samples: 20,
            seed,
            parallel: true,
        },
    )
    .unwrap();
    let mp_stats = mc_edges_parallel(
        &VarianceProfile::flat(2, 8, 1.0 / 8.0).to_free_model(),
        &McConfig {
            dim: 300,
            samples: 20,
            seed,
            parallel: true,
        },
    )
    .unwrap();
    let ok = (scalar_stats.mean_max - 4.0).abs() < 0.4
        && scalar_stats.mean_min <= 0.15
        && (mp_stats.mean_max - 2.25).abs() < 0.225
        && (mp_stats.mean_min - 0.25).abs() < 0.1;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        9,
        &format!(
            "seeded oracle: scalar {:.3}/{:.3}, MP {:.3}/{:.3} ({elapsed:.0}s)",
            scalar_stats.mean_max, scalar_stats.mean_min, mp_stats.mean_max, mp_stats.mean_min
        ),
        ok && elapsed < 120.0,
    );
}

#[test]
fn criterion_10_diagonal_reduction() {
    let opts = EdgeOpts::default();
    let mut rng = StdRng::seed_from_u64(1010);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let sigma2: Vec<f64> = (0..d * m)
            .map(|_| rng.gen_range(0.05..1.5) / m as f64)
            .collect();
        let bdiag: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let profile = VarianceProfile::new(d, m, sigma2, bdiag).unwrap();
        let model = profile.to_free_model();
        let pairs = [
            (
                diagonal::diag_upper_edge(&profile, &opts).unwrap().value,
                edges::upper_edge(&model, &opts).unwrap().value,
            ),
            (
                diagonal::diag_lower_edge(&profile, &opts).unwrap().value,
                edges::lower_edge(&model, &opts).unwrap().value,
            ),
        ];
        for (diag_val, full_val) in pairs {
            worst = worst.max((diag_val - full_val).abs());
        }
    }
    report(
        10,
        &format!("50 variance profiles: diagonal vs full solvers ({worst:.2e})"),
        worst <= 1e-7,
    );
}
