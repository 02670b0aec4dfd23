//! Model file format: JSON with either explicit matrix coefficients or a
//! variance profile. Complex numbers are `[re, im]` pairs throughout.

use free_edges_core::linalg::{ComplexMatrix, HermitianMatrix, C64};
use free_edges_core::model::{FreeModel, VarianceProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: missing field \"{0}\"")]
    MissingField(&'static str),
    #[error("model file: field \"{field}\" {problem}")]
    BadField { field: &'static str, problem: String },
    #[error("model file must contain exactly one of \"coeffs\" and \"variance_profile\"")]
    AmbiguousForm,
    #[error("model file: {0}")]
    Invalid(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    sigma2: Vec<Vec<f64>>,
    bdiag: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// n matrices, each d rows of m `[re, im]` entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shift: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance_profile: Option<RawProfile>,
}

/// A parsed model plus its canonical serialization and content digest.
#[derive(Debug, Clone)]
pub struct ModelInput {
    pub model: FreeModel,
    /// Present when the input was a variance profile, or when the
    /// coefficient model preserves the diagonal subalgebra and a profile
    /// could be reconstructed for the specialized solver.
    pub profile: Option<VarianceProfile>,
    pub digest: String,
    pub normalized: String,
}

fn complex_rows(
    field: &'static str,
    rows: &[Vec<[f64; 2]>],
    want_rows: usize,
    want_cols: usize,
) -> Result<ComplexMatrix, SchemaError> {
    if rows.len() != want_rows || rows.iter().any(|r| r.len() != want_cols) {
        return Err(SchemaError::BadField {
            field,
            problem: format!("must be a {want_rows}x{want_cols} matrix of [re, im] pairs"),
        });
    }
    Ok(ComplexMatrix::from_fn(want_rows, want_cols, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}

fn build_from_raw(raw: &RawModel) -> Result<(FreeModel, Option<VarianceProfile>), SchemaError> {
    match (&raw.coeffs, &raw.variance_profile) {
        (Some(_), Some(_)) | (None, None) => return Err(SchemaError::AmbiguousForm),
        (None, Some(p)) => {
            for field in [
                raw.d.map(|_| "d"),
                raw.m.map(|_| "m"),
                raw.n.map(|_| "n"),
                raw.shift.as_ref().map(|_| "shift"),
            ]
            .into_iter()
            .flatten()
            {
                return Err(SchemaError::BadField {
                    field,
                    problem: "cannot be combined with \"variance_profile\"".into(),
                });
            }
            let d = p.sigma2.len();
            if d == 0 {
                return Err(SchemaError::BadField {
                    field: "sigma2",
                    problem: "must have at least one row".into(),
                });
            }
            let m = p.sigma2[0].len();
            if m == 0 || p.sigma2.iter().any(|r| r.len() != m) {
                return Err(SchemaError::BadField {
                    field: "sigma2",
                    problem: "rows must be nonempty and of equal length".into(),
                });
            }
            if p.sigma2.iter().flatten().any(|&s| s < 0.0 || !s.is_finite()) {
                return Err(SchemaError::BadField {
                    field: "sigma2",
                    problem: "entries must be finite and nonnegative".into(),
                });
            }
            if p.bdiag.len() != d {
                return Err(SchemaError::BadField {
                    field: "bdiag",
                    problem: format!("must have length {d} (one entry per row of sigma2)"),
                });
            }
            let flat: Vec<f64> = p.sigma2.iter().flatten().copied().collect();
            let profile = VarianceProfile::new(d, m, flat, p.bdiag.clone())
                .map_err(|e| SchemaError::Invalid(e.to_string()))?;
            Ok((profile.to_free_model(), Some(profile)))
        }
        (Some(coeffs), None) => {
            let d = raw.d.ok_or(SchemaError::MissingField("d"))?;
            let m = raw.m.ok_or(SchemaError::MissingField("m"))?;
            let n = raw.n.ok_or(SchemaError::MissingField("n"))?;
            let shift = raw.shift.as_ref().ok_or(SchemaError::MissingField("shift"))?;
            if d == 0 || m == 0 {
                return Err(SchemaError::Invalid("d and m must be positive".into()));
            }
            if coeffs.len() != n {
                return Err(SchemaError::BadField {
                    field: "coeffs",
                    problem: format!("must list n = {n} matrices (got {})", coeffs.len()),
                });
            }
            let mats = coeffs
                .iter()
                .map(|c| complex_rows("coeffs", c, d, m))
                .collect::<Result<Vec<_>, _>>()?;
            let shift_mat = complex_rows("shift", shift, d, d)?;
            if shift_mat.asymmetry() > 1e-12 * shift_mat.fro_norm().max(1.0) {
                return Err(SchemaError::BadField {
                    field: "shift",
                    problem: "must be Hermitian".into(),
                });
            }
            let shift_h = HermitianMatrix::new_unchecked(shift_mat);
            let model = FreeModel::new(d, m, mats, shift_h)
                .map_err(|e| SchemaError::Invalid(e.to_string()))?;
            let profile = reconstruct_profile(&model);
            Ok((model, profile))
        }
    }
}

/// When Φ and Φ* preserve the diagonal subalgebra, the edges only depend on
/// the per-entry variances `σᵢⱼ² = Σₙ |aₙ(i,j)|²`; recover them so the
/// specialized diagonal solver can run on coefficient-form inputs too.
fn reconstruct_profile(model: &FreeModel) -> Option<VarianceProfile> {
    if !model.is_diagonal_compatible() {
        return None;
    }
    let (d, m) = (model.d(), model.m());
    let mut sigma2 = vec![0.0; d * m];
    for a in model.coeffs() {
        for i in 0..d {
            for j in 0..m {
                sigma2[i * m + j] += a[(i, j)].norm_sqr();
            }
        }
    }
    let bdiag: Vec<f64> = (0..d).map(|i| model.shift()[(i, i)].re).collect();
    VarianceProfile::new(d, m, sigma2, bdiag).ok()
}

fn pairs(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn normalize(model: &FreeModel, profile_input: Option<&VarianceProfile>) -> String {
    let raw = match profile_input {
        Some(p) => RawModel {
            variance_profile: Some(RawProfile {
                sigma2: (0..p.d())
                    .map(|i| (0..p.m()).map(|j| p.sigma2(i, j)).collect())
                    .collect(),
                bdiag: p.bdiag().to_vec(),
            }),
            ..RawModel::default()
        },
        None => RawModel {
            d: Some(model.d()),
            m: Some(model.m()),
            n: Some(model.n()),
            coeffs: Some(model.coeffs().iter().map(pairs).collect()),
            shift: Some(pairs(model.shift().as_matrix())),
            variance_profile: None,
        },
    };
    let mut s = serde_json::to_string_pretty(&raw).expect("model serialization is infallible");
    s.push('\n');
    s
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse a model document; the digest is taken over the normalized form, so
/// it is stable under whitespace and key-order changes in the input.
pub fn parse_model(text: &str) -> Result<ModelInput, SchemaError> {
    let raw: RawModel = serde_json::from_str(text)?;
    let profile_form = raw.variance_profile.is_some();
    let (model, profile) = build_from_raw(&raw)?;
    let normalized = normalize(&model, if profile_form { profile.as_ref() } else { None });
    let digest = hex_digest(normalized.as_bytes());
    Ok(ModelInput {
        model,
        profile,
        digest,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{"d":1,"m":1,"n":1,"coeffs":[[[[1.0,0.0]]]],"shift":[[[0.0,0.0]]]}"#;

    #[test]
    fn parses_scalar_model() {
        let input = parse_model(SCALAR).unwrap();
        assert_eq!(input.model.d(), 1);
        assert_eq!(input.model.n(), 1);
        assert!(input.profile.is_some()); // scalar model is diagonal-compatible
        assert_eq!(input.digest.len(), 64);
    }

    #[test]
    fn parses_variance_profile() {
        let text = r#"{"variance_profile":{"sigma2":[[0.125,0.125],[0.125,0.125]],"bdiag":[0.0,0.0]}}"#;
        let input = parse_model(text).unwrap();
        assert_eq!(input.model.d(), 2);
        assert_eq!(input.model.m(), 2);
        let p = input.profile.unwrap();
        assert_eq!(p.sigma2(1, 0), 0.125);
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"d":1,"n":1,"coeffs":[[[[1.0,0.0]]]],"shift":[[[0.0,0.0]]]}"#;
        let err = parse_model(text).unwrap_err();
        assert!(err.to_string().contains("\"m\""), "got: {err}");
    }

    #[test]
    fn exactly_one_form_enforced() {
        assert!(matches!(
            parse_model("{}").unwrap_err(),
            SchemaError::AmbiguousForm
        ));
        let both = r#"{"d":1,"m":1,"n":0,"coeffs":[],"shift":[[[0.0,0.0]]],"variance_profile":{"sigma2":[[1.0]],"bdiag":[0.0]}}"#;
        assert!(matches!(
            parse_model(both).unwrap_err(),
            SchemaError::AmbiguousForm
        ));
    }

    #[test]
    fn normalized_roundtrip_keeps_digest() {
        for text in [
            SCALAR,
            r#"{"variance_profile":{"sigma2":[[0.3,0.7]],"bdiag":[0.25]}}"#,
            r#"{ "m": 2, "d": 1, "n": 1, "shift": [[[0.5, 0.0]]],
                "coeffs": [[[[0.1, -0.3], [0.0, 1.0]]]] }"#,
        ] {
            let a = parse_model(text).unwrap();
            let b = parse_model(&a.normalized).unwrap();
            assert_eq!(a.digest, b.digest);
            assert_eq!(a.normalized, b.normalized);
        }
    }

    #[test]
    fn off_diagonal_model_has_no_profile() {
        let text = r#"{"d":2,"m":2,"n":1,
            "coeffs":[[[[1.0,0.0],[1.0,0.0]],[[0.0,0.0],[1.0,0.0]]]],
            "shift":[[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]}"#;
        let input = parse_model(text).unwrap();
        assert!(input.profile.is_none());
    }

    #[test]
    fn non_hermitian_shift_rejected() {
        let text = r#"{"d":2,"m":1,"n":0,"coeffs":[],
            "shift":[[[0.0,0.0],[1.0,0.0]],[[0.0,0.0],[0.0,0.0]]]}"#;
        let err = parse_model(text).unwrap_err();
        assert!(err.to_string().contains("shift"));
    }
}
