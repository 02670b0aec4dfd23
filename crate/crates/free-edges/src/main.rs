use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use free_edges::report::McSection;
use free_edges::run::{mc_edges_parallel, run_edges};
use free_edges::schema::{parse_model, ModelInput};
use free_edges_core::cauchy::{self, CauchyError, CauchyOpts};
use free_edges_core::edges::{EdgeOpts, Method};
use free_edges_core::linalg::{ComplexMatrix, HermitianMatrix, C64};
use free_edges_core::mc::McConfig;

const EXIT_INPUT: u8 = 1;
const EXIT_DISAGREE: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "free-edges",
    about = "Spectral edges of xx* + b⊗1 for operator-valued semicircular models",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Variational,
    Cauchy,
    Dilation,
    Diagonal,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Variational => vec![Method::Variational],
            MethodArg::Cauchy => vec![Method::Cauchy],
            MethodArg::Dilation => vec![Method::Dilation],
            MethodArg::Diagonal => vec![Method::Diagonal],
            MethodArg::All => vec![
                Method::Variational,
                Method::Cauchy,
                Method::Dilation,
                Method::Diagonal,
            ],
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute both spectral edges with the requested methods.
    Edges {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Drop the shift (b = 0) and report extreme singular values.
        #[arg(long)]
        singular: bool,
        #[arg(long)]
        json: bool,
        /// Also write the report to this file (byte-identical to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pairwise method disagreement beyond this exits with code 2.
        #[arg(long, default_value_t = 1e-5)]
        agree_tol: f64,
        /// Global σ multipliers, "t1,t2,..." or "start:end:count"; emits
        /// CSV of edges vs parameter instead of a report.
        #[arg(long)]
        sweep: Option<String>,
        /// Print the canonical form of the model file and exit.
        #[arg(long)]
        dump_normalized: bool,
    },
    /// Compare the variational edges against the random-matrix oracle.
    Verify {
        model: PathBuf,
        /// Size N of the matrices substituted for the semicirculars.
        #[arg(long, default_value_t = 200)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the matrix Cauchy transform at one point.
    Cauchy {
        model: PathBuf,
        /// Evaluation point, "RE" or "RE,IM".
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail_input(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INPUT)
}

fn load_model(path: &Path) -> Result<ModelInput, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_model(&text).map_err(|e| e.to_string())
}

/// Print to stdout and, when requested, write the same bytes to a file.
fn emit(text: &str, out: Option<&Path>) -> Result<(), String> {
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>, String> {
    let bad = |s: &str| format!("invalid sweep value \"{s}\"");
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err("sweep range must be start:end:count".into());
        }
        let start: f64 = parts[0].parse().map_err(|_| bad(parts[0]))?;
        let end: f64 = parts[1].parse().map_err(|_| bad(parts[1]))?;
        let count: usize = parts[2].parse().map_err(|_| bad(parts[2]))?;
        if count < 2 {
            return Err("sweep count must be at least 2".into());
        }
        let step = (end - start) / (count - 1) as f64;
        return Ok((0..count).map(|k| start + step * k as f64).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad(s)))
        .collect()
}

fn cmd_edges(
    model_path: &Path,
    method: MethodArg,
    singular: bool,
    json: bool,
    out: Option<&Path>,
    agree_tol: f64,
    sweep: Option<&str>,
    dump_normalized: bool,
) -> ExitCode {
    let mut input = match load_model(model_path) {
        Ok(m) => m,
        Err(e) => return fail_input(&e),
    };
    if dump_normalized {
        return match emit(&input.normalized, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail_input(&e),
        };
    }
    if singular {
        input.model = input.model.with_zero_shift();
        input.profile = input.profile.as_ref().map(|p| {
            let sigma2 = (0..p.d())
                .flat_map(|i| (0..p.m()).map(move |j| p.sigma2(i, j)))
                .collect();
            free_edges_core::model::VarianceProfile::new(p.d(), p.m(), sigma2, vec![0.0; p.d()])
                .expect("zeroed profile stays valid")
        });
    }
    let opts = EdgeOpts::default();
    if let Some(spec) = sweep {
        let params = match parse_sweep(spec) {
            Ok(p) => p,
            Err(e) => return fail_input(&e),
        };
        let mut csv = String::from("param,upper,lower\n");
        for t in params {
            let scaled = ModelInput {
                model: input.model.scaled_coefficients(t),
                profile: None,
                digest: input.digest.clone(),
                normalized: input.normalized.clone(),
            };
            let report = run_edges(&scaled, &[Method::Variational], &opts, false);
            let m = &report.methods[0];
            match (&m.upper, &m.lower) {
                (Some(u), Some(l)) => {
                    csv.push_str(&format!("{t},{},{}\n", u.value, l.value));
                }
                _ => {
                    return fail_input(&format!(
                        "sweep point {t} failed: {}",
                        m.error.as_deref().unwrap_or("no result")
                    ))
                }
            }
        }
        return match emit(&csv, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail_input(&e),
        };
    }
    let report = run_edges(&input, &method.methods(), &opts, singular);
    let text = if json {
        report.to_json()
    } else {
        report.render_human()
    };
    if let Err(e) = emit(&text, out) {
        return fail_input(&e);
    }
    if let Some(m) = report.methods.iter().find(|m| m.error.is_some()) {
        eprintln!(
            "error: method {} failed: {}",
            m.method,
            m.error.as_deref().unwrap_or("")
        );
        return ExitCode::from(EXIT_INPUT);
    }
    if report.max_disagreement() > agree_tol {
        eprintln!(
            "error: methods disagree by {:.3e} (tolerance {agree_tol:.3e})",
            report.max_disagreement()
        );
        return ExitCode::from(EXIT_DISAGREE);
    }
    ExitCode::SUCCESS
}

fn cmd_verify(
    model_path: &Path,
    dim: usize,
    samples: usize,
    seed: u64,
    json: bool,
    out: Option<&Path>,
) -> ExitCode {
    if samples == 0 {
        return fail_input("--samples must be at least 1");
    }
    if dim < 2 {
        return fail_input("--dim must be at least 2");
    }
    let input = match load_model(model_path) {
        Ok(m) => m,
        Err(e) => return fail_input(&e),
    };
    let opts = EdgeOpts::default();
    let mut report = run_edges(&input, &[Method::Variational], &opts, false);
    let entry = &report.methods[0];
    let (upper, lower) = match (&entry.upper, &entry.lower) {
        (Some(u), Some(l)) => (u.value, l.value),
        _ => {
            return fail_input(&format!(
                "variational solve failed: {}",
                entry.error.as_deref().unwrap_or("no result")
            ))
        }
    };
    let cfg = McConfig {
        dim,
        samples,
        seed,
        parallel: true,
    };
    let stats = match mc_edges_parallel(&input.model, &cfg) {
        Ok(s) => s,
        Err(e) => return fail_input(&format!("oracle failed: {e}")),
    };
    // deviations relative to the spectral scale; a shift-only model is
    // reproduced exactly, so its deviation is exactly zero
    let scale = (upper - lower).abs().max(upper.abs()).max(lower.abs()).max(1e-12);
    let deviation_max = (stats.mean_max - upper).abs() / scale;
    let deviation_min = (stats.mean_min - lower).abs() / scale;
    report.mc = Some(McSection {
        dim,
        samples,
        seed,
        mean_max: stats.mean_max,
        mean_min: stats.mean_min,
        sd_max: stats.sd_max,
        sd_min: stats.sd_min,
        deviation_max,
        deviation_min,
        flagged: deviation_max > 0.15 || deviation_min > 0.15,
    });
    let text = if json {
        report.to_json()
    } else {
        report.render_human()
    };
    match emit(&text, out) {
        Ok(()) => ExitCode::SUCCESS, // the oracle is advisory
        Err(e) => fail_input(&e),
    }
}

fn parse_lambda(spec: &str) -> Result<C64, String> {
    let bad = || format!("invalid --lambda \"{spec}\" (expected RE or RE,IM)");
    match spec.split_once(',') {
        None => spec.trim().parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad()),
        Some((re, im)) => {
            let re = re.trim().parse::<f64>().map_err(|_| bad())?;
            let im = im.trim().parse::<f64>().map_err(|_| bad())?;
            Ok(C64::new(re, im))
        }
    }
}

fn matrix_pairs(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Serialize)]
struct CauchyOutput {
    model_digest: String,
    lambda: [f64; 2],
    converged: bool,
    iterations: usize,
    residual: f64,
    sign_check: String,
    g: Vec<Vec<[f64; 2]>>,
    h: Vec<Vec<[f64; 2]>>,
}

fn sign_check_outcome(lambda: C64, g: &ComplexMatrix) -> String {
    if lambda.im != 0.0 {
        // solve_G fails loudly on a branch violation, so reaching here means ok
        let side = if lambda.im > 0.0 { "Im G ≺ 0" } else { "Im G ≻ 0" };
        return format!("herglotz branch ok ({side})");
    }
    let gh = HermitianMatrix::new_unchecked(g.hermitian_part());
    match (gh.is_positive_definite(), gh.is_negative_definite()) {
        (Ok(true), _) => "G ≻ 0: λ is above the spectrum".to_string(),
        (_, Ok(true)) => "G ≺ 0: λ is below the spectrum".to_string(),
        _ => "G is indefinite".to_string(),
    }
}

fn cmd_cauchy(model_path: &Path, lambda: &str, json: bool, out: Option<&Path>) -> ExitCode {
    let input = match load_model(model_path) {
        Ok(m) => m,
        Err(e) => return fail_input(&e),
    };
    let lambda = match parse_lambda(lambda) {
        Ok(l) => l,
        Err(e) => return fail_input(&e),
    };
    let opts = CauchyOpts::default();
    let point = match cauchy::solve_G(&input.model, lambda, &opts) {
        Ok(p) => p,
        Err(e @ (CauchyError::NonConvergence { .. } | CauchyError::SignViolation)) => {
            eprintln!("error: {e} (λ likely inside the spectrum)");
            return ExitCode::from(EXIT_NONCONVERGENCE);
        }
        Err(e) => return fail_input(&e.to_string()),
    };
    if !point.converged {
        eprintln!(
            "error: no convergence after {} iterations, residual {:.3e} (λ likely inside the spectrum)",
            point.iterations, point.residual
        );
        return ExitCode::from(EXIT_NONCONVERGENCE);
    }
    let sign_check = sign_check_outcome(lambda, &point.g);
    let text = if json {
        let payload = CauchyOutput {
            model_digest: input.digest.clone(),
            lambda: [lambda.re, lambda.im],
            converged: point.converged,
            iterations: point.iterations,
            residual: point.residual,
            sign_check,
            g: matrix_pairs(&point.g),
            h: matrix_pairs(&point.h),
        };
        let mut s = serde_json::to_string_pretty(&payload).expect("serialization");
        s.push('\n');
        s
    } else {
        format!(
            "λ = {} + {}i  (converged in {} iterations, residual {:.3e})\n\
             sign check: {}\nG =\n{}\nH =\n{}\n",
            lambda.re,
            lambda.im,
            point.iterations,
            point.residual,
            sign_check,
            point.g.render(),
            point.h.render()
        )
    };
    match emit(&text, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail_input(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Edges {
            model,
            method,
            singular,
            json,
            out,
            agree_tol,
            sweep,
            dump_normalized,
        } => cmd_edges(
            &model,
            method,
            singular,
            json,
            out.as_deref(),
            agree_tol,
            sweep.as_deref(),
            dump_normalized,
        ),
        Cmd::Verify {
            model,
            dim,
            samples,
            seed,
            json,
            out,
        } => cmd_verify(&model, dim, samples, seed, json, out.as_deref()),
        Cmd::Cauchy {
            model,
            lambda,
            json,
            out,
        } => cmd_cauchy(&model, &lambda, json, out.as_deref()),
    }
}
