//! Orchestration: run the requested solvers on a parsed model, collect
//! timings and pairwise agreement, and fan the Monte Carlo oracle out over
//! threads (capped by `FREE_EDGE_THREADS`).

use std::time::Instant;

use free_edges_core::cauchy::{self, CauchyOpts};
use free_edges_core::diagonal;
use free_edges_core::edges::{self, EdgeOpts, EdgeResult, Method, Side};
use free_edges_core::mc::{self, McConfig, McEdgeStats, McError};
use free_edges_core::model::FreeModel;

use crate::report::{AgreementEntry, EdgeSummary, MethodReport, RunReport, SingularValues};
use crate::schema::ModelInput;

/// Threads to use for the oracle: `FREE_EDGE_THREADS` wins, then hardware
/// parallelism, never more than one per sample.
pub fn thread_budget(samples: usize) -> usize {
    let cap = std::env::var("FREE_EDGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    cap.min(samples.max(1))
}

/// Parallel Monte Carlo driver. Per-sample counter streams make the draws
/// independent of scheduling, so the result is identical to the sequential
/// evaluation in `free_edges_core::mc::mc_edges`.
pub fn mc_edges_parallel(model: &FreeModel, cfg: &McConfig) -> Result<McEdgeStats, McError> {
    if cfg.samples == 0 {
        return Err(McError::NoSamples);
    }
    let threads = if cfg.parallel {
        thread_budget(cfg.samples)
    } else {
        1
    };
    if threads <= 1 {
        return mc::mc_edges(model, cfg);
    }
    let mut per_sample = vec![(0.0f64, 0.0f64); cfg.samples];
    let mut first_err: Option<McError> = None;
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let model = &*model;
            handles.push(scope.spawn(move || -> Result<Vec<(usize, (f64, f64))>, McError> {
                let mut chunk = Vec::new();
                let mut idx = t;
                while idx < cfg.samples {
                    chunk.push((idx, mc::sample_extremes(model, cfg.dim, cfg.seed, idx as u64)?));
                    idx += threads;
                }
                Ok(chunk)
            }));
        }
        for h in handles {
            match h.join().expect("oracle worker panicked") {
                Ok(chunk) => {
                    for (idx, v) in chunk {
                        per_sample[idx] = v;
                    }
                }
                Err(e) => {
                    if first_err.is_none() {
                        first_err = Some(e);
                    }
                }
            }
        }
    });
    if let Some(e) = first_err {
        return Err(e);
    }
    // same accumulation order as the sequential driver
    let n = per_sample.len() as f64;
    let mean_max = per_sample.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_min = per_sample.iter().map(|s| s.1).sum::<f64>() / n;
    let sd_max = (per_sample.iter().map(|s| (s.0 - mean_max).powi(2)).sum::<f64>() / n).sqrt();
    let sd_min = (per_sample.iter().map(|s| (s.1 - mean_min).powi(2)).sum::<f64>() / n).sqrt();
    Ok(McEdgeStats {
        mean_max,
        mean_min,
        sd_max,
        sd_min,
        per_sample,
    })
}

fn run_one(input: &ModelInput, method: Method, opts: &EdgeOpts) -> MethodReport {
    let copts = CauchyOpts::default();
    let started = Instant::now();
    let mut note = None;
    let mut error = None;
    let wrap = |r: Result<EdgeResult, String>, error: &mut Option<String>| match r {
        Ok(res) => Some(EdgeSummary::from(&res)),
        Err(e) => {
            if error.is_none() {
                *error = Some(e);
            }
            None
        }
    };
    let (upper, lower) = match method {
        Method::Variational => (
            wrap(
                edges::upper_edge(&input.model, opts).map_err(|e| e.to_string()),
                &mut error,
            ),
            wrap(
                edges::lower_edge(&input.model, opts).map_err(|e| e.to_string()),
                &mut error,
            ),
        ),
        Method::Cauchy => (
            wrap(
                cauchy::edge_from_cauchy(&input.model, Side::Upper, &copts, opts.tol)
                    .map_err(|e| e.to_string()),
                &mut error,
            ),
            wrap(
                cauchy::edge_from_cauchy(&input.model, Side::Lower, &copts, opts.tol)
                    .map_err(|e| e.to_string()),
                &mut error,
            ),
        ),
        Method::Dilation => {
            // the dilation route bounds the largest singular value only
            (
                wrap(
                    edges::dilated_cross_check(&input.model, opts).map_err(|e| e.to_string()),
                    &mut error,
                ),
                None,
            )
        }
        Method::Diagonal => match &input.profile {
            Some(profile) => (
                wrap(
                    diagonal::diag_upper_edge(profile, opts).map_err(|e| e.to_string()),
                    &mut error,
                ),
                wrap(
                    diagonal::diag_lower_edge(profile, opts).map_err(|e| e.to_string()),
                    &mut error,
                ),
            ),
            None => {
                note = Some(
                    "skipped: model does not preserve the diagonal subalgebra".to_string(),
                );
                (None, None)
            }
        },
    };
    MethodReport {
        method: method.name().to_string(),
        upper,
        lower,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        note,
        error,
    }
}

fn agreement_table(methods: &[MethodReport]) -> Vec<AgreementEntry> {
    let mut table = Vec::new();
    for i in 0..methods.len() {
        for j in i + 1..methods.len() {
            let (a, b) = (&methods[i], &methods[j]);
            let delta = |x: &Option<EdgeSummary>, y: &Option<EdgeSummary>| match (x, y) {
                (Some(x), Some(y)) => Some((x.value - y.value).abs()),
                _ => None,
            };
            let upper_delta = delta(&a.upper, &b.upper);
            let lower_delta = delta(&a.lower, &b.lower);
            if upper_delta.is_none() && lower_delta.is_none() {
                continue;
            }
            table.push(AgreementEntry {
                methods: [a.method.clone(), b.method.clone()],
                upper_delta,
                lower_delta,
            });
        }
    }
    table
}

/// Run the requested methods and assemble the report. `singular` reports the
/// extreme singular values as square roots of the edges of `xx*`.
pub fn run_edges(
    input: &ModelInput,
    methods: &[Method],
    opts: &EdgeOpts,
    singular: bool,
) -> RunReport {
    let method_reports: Vec<MethodReport> = methods
        .iter()
        .map(|&m| run_one(input, m, opts))
        .collect();
    let agreement = agreement_table(&method_reports);
    let singular_values = if singular {
        method_reports
            .iter()
            .find(|m| m.upper.is_some() && m.lower.is_some())
            .map(|m| SingularValues {
                s_max: m.upper.as_ref().unwrap().value.max(0.0).sqrt(),
                s_min: m.lower.as_ref().unwrap().value.max(0.0).sqrt(),
            })
    } else {
        None
    };
    RunReport {
        model_digest: input.digest.clone(),
        methods: method_reports,
        agreement,
        singular_values,
        mc: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_model;
    use free_edges_core::linalg::{ComplexMatrix, HermitianMatrix};

    const SCALAR: &str = r#"{"d":1,"m":1,"n":1,"coeffs":[[[[1.0,0.0]]]],"shift":[[[0.0,0.0]]]}"#;

    #[test]
    fn parallel_oracle_matches_sequential() {
        let model = FreeModel::new(
            1,
            1,
            vec![ComplexMatrix::from_real(1, 1, &[1.0])],
            HermitianMatrix::zeros(1),
        )
        .unwrap();
        let cfg = McConfig {
            dim: 30,
            samples: 6,
            seed: 11,
            parallel: true,
        };
        std::env::set_var("FREE_EDGE_THREADS", "3");
        let par = mc_edges_parallel(&model, &cfg).unwrap();
        std::env::remove_var("FREE_EDGE_THREADS");
        let seq = mc::mc_edges(&model, &cfg).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn scalar_report_all_methods_agree() {
        let input = parse_model(SCALAR).unwrap();
        let report = run_edges(
            &input,
            &[
                Method::Variational,
                Method::Cauchy,
                Method::Dilation,
                Method::Diagonal,
            ],
            &EdgeOpts::default(),
            true,
        );
        assert_eq!(report.methods.len(), 4);
        assert!(report.max_disagreement() < 1e-5);
        let sv = report.singular_values.as_ref().unwrap();
        assert!((sv.s_max - 2.0).abs() < 1e-5);
        assert!(sv.s_min.abs() < 1e-2);
        for m in &report.methods {
            assert!(m.error.is_none(), "{:?}", m.error);
            let u = m.upper.as_ref().unwrap();
            assert!((u.value - 4.0).abs() < 1e-6, "{}: {}", m.method, u.value);
        }
        // dilation bounds the top edge only
        let dil = report.methods.iter().find(|m| m.method == "dilation").unwrap();
        assert!(dil.lower.is_none());
        // human rendering carries the essentials
        let text = report.render_human();
        assert!(text.contains("model digest"));
        assert!(text.contains("s_max"));
    }
}
