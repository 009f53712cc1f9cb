//! Versioned plain-text serialization of a [`GeeFit`].
//!
//! One record per line, tab-separated: a key followed by its values.
//! Numbers use shortest round-trip scientific notation, so a written fit
//! reads back bit-identically.
//!
//! ```text
//! flexgee-fit 1
//! family binomial
//! link logit
//! ...
//! beta -2.23e0 ...
//! ```

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::correlation::{CorStruct, WorkingCorrelation};
use crate::engine::GeeFit;
use crate::family::{Dispersion, Family, FamilySpec, Link};

pub const MAGIC: &str = "flexgee-fit";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FitFileError {
    #[error("not a fit file (missing `{MAGIC}` header)")]
    NotAFitFile,
    #[error("unsupported fit file version {0}")]
    Version(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing record `{0}`")]
    Missing(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn write_values<W: Write>(w: &mut W, key: &str, values: impl IntoIterator<Item = String>) -> std::io::Result<()> {
    write!(w, "{key}")?;
    for v in values {
        write!(w, "\t{v}")?;
    }
    writeln!(w)
}

pub fn write_fit<W: Write>(fit: &GeeFit, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}\t{VERSION}")?;
    writeln!(w, "family\t{}", fit.family.family())?;
    writeln!(w, "link\t{}", fit.family.link())?;
    match fit.family.dispersion() {
        Dispersion::Estimate => writeln!(w, "dispersion_mode\testimate")?,
        Dispersion::Fixed(phi) => writeln!(w, "dispersion_mode\tfixed\t{}", num(phi))?,
    }
    writeln!(w, "structure\t{}", fit.structure)?;
    writeln!(w, "converged\t{}", fit.converged)?;
    writeln!(w, "iterations\t{}", fit.iterations)?;
    writeln!(w, "dispersion\t{}", num(fit.dispersion))?;
    writeln!(w, "n_clusters\t{}", fit.n_clusters)?;
    writeln!(w, "n_obs\t{}", fit.n_obs)?;
    writeln!(w, "max_cluster_size\t{}", fit.max_cluster_size)?;
    write_values(&mut w, "responses", fit.response_names.iter().cloned())?;
    write_values(&mut w, "labels", fit.labels.iter().cloned())?;
    write_values(&mut w, "beta", fit.beta.iter().map(|&v| num(v)))?;
    // column-major, matching nalgebra storage; matrices are symmetric anyway
    write_values(&mut w, "robust_cov", fit.robust_cov.iter().map(|&v| num(v)))?;
    write_values(&mut w, "model_cov", fit.model_cov.iter().map(|&v| num(v)))?;
    match &fit.correlation {
        WorkingCorrelation::Independence => writeln!(w, "correlation\tindependence")?,
        WorkingCorrelation::Exchangeable { alpha } => writeln!(w, "correlation\texchangeable\t{}", num(*alpha))?,
        WorkingCorrelation::Ar1 { alpha } => writeln!(w, "correlation\tar1\t{}", num(*alpha))?,
        WorkingCorrelation::Unstructured { matrix } => write_values(
            &mut w,
            "correlation",
            ["unstructured".to_string(), matrix.nrows().to_string()]
                .into_iter()
                .chain(matrix.iter().map(|&v| num(v))),
        )?,
    }
    write_values(&mut w, "trace", fit.trace.iter().map(|&v| num(v)))?;
    write_values(&mut w, "fitted", fit.fitted.iter().map(|&v| num(v)))?;
    for warning in &fit.warnings {
        writeln!(w, "warning\t{}", warning.replace(['\t', '\n'], " "))?;
    }
    Ok(())
}

#[derive(Default)]
struct Records {
    family: Option<Family>,
    link: Option<Link>,
    dispersion_mode: Option<Dispersion>,
    structure: Option<CorStruct>,
    converged: Option<bool>,
    iterations: Option<usize>,
    dispersion: Option<f64>,
    n_clusters: Option<usize>,
    n_obs: Option<usize>,
    max_cluster_size: Option<usize>,
    responses: Option<Vec<String>>,
    labels: Option<Vec<String>>,
    beta: Option<Vec<f64>>,
    robust_cov: Option<Vec<f64>>,
    model_cov: Option<Vec<f64>>,
    correlation: Option<WorkingCorrelation>,
    trace: Vec<f64>,
    fitted: Vec<f64>,
    warnings: Vec<String>,
}

pub fn read_fit<R: BufRead>(reader: R) -> Result<GeeFit, FitFileError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(FitFileError::NotAFitFile),
    };
    let mut head = header.split('\t');
    if head.next() != Some(MAGIC) {
        return Err(FitFileError::NotAFitFile);
    }
    let version = head.next().unwrap_or("");
    if version != VERSION.to_string() {
        return Err(FitFileError::Version(version.to_string()));
    }

    let mut rec = Records::default();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| FitFileError::Malformed { line: lineno, message };
        let mut fields = line.split('\t');
        let key = fields.next().unwrap_or("");
        let values: Vec<&str> = fields.collect();
        let one = || values.first().copied().ok_or_else(|| bad(format!("`{key}` has no value")));
        let floats = || {
            values
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad number `{v}` in `{key}`"))))
                .collect::<Result<Vec<f64>, _>>()
        };
        let count = || one()?.parse::<usize>().map_err(|_| bad(format!("bad count in `{key}`")));
        match key {
            "family" => rec.family = Some(one()?.parse().map_err(|e| bad(format!("{e}")))?),
            "link" => rec.link = Some(one()?.parse().map_err(|e| bad(format!("{e}")))?),
            "dispersion_mode" => {
                rec.dispersion_mode = Some(match one()? {
                    "estimate" => Dispersion::Estimate,
                    "fixed" => {
                        let v = values.get(1).ok_or_else(|| bad("fixed dispersion needs a value".into()))?;
                        Dispersion::Fixed(v.parse().map_err(|_| bad(format!("bad number `{v}`")))?)
                    }
                    other => return Err(bad(format!("unknown dispersion mode `{other}`"))),
                })
            }
            "structure" => rec.structure = Some(one()?.parse().map_err(|e| bad(format!("{e}")))?),
            "converged" => rec.converged = Some(one()? == "true"),
            "iterations" => rec.iterations = Some(count()?),
            "dispersion" => rec.dispersion = Some(one()?.parse().map_err(|_| bad("bad dispersion".into()))?),
            "n_clusters" => rec.n_clusters = Some(count()?),
            "n_obs" => rec.n_obs = Some(count()?),
            "max_cluster_size" => rec.max_cluster_size = Some(count()?),
            "responses" => rec.responses = Some(values.iter().map(|s| s.to_string()).collect()),
            "labels" => rec.labels = Some(values.iter().map(|s| s.to_string()).collect()),
            "beta" => rec.beta = Some(floats()?),
            "robust_cov" => rec.robust_cov = Some(floats()?),
            "model_cov" => rec.model_cov = Some(floats()?),
            "trace" => rec.trace = floats()?,
            "fitted" => rec.fitted = floats()?,
            "warning" => rec.warnings.push(values.join("\t")),
            "correlation" => {
                let kind = one()?;
                let scalar = || -> Result<f64, FitFileError> {
                    let v = values.get(1).ok_or_else(|| bad("missing correlation parameter".into()))?;
                    v.parse().map_err(|_| bad(format!("bad number `{v}`")))
                };
                rec.correlation = Some(match kind {
                    "independence" => WorkingCorrelation::Independence,
                    "exchangeable" => WorkingCorrelation::Exchangeable { alpha: scalar()? },
                    "ar1" => WorkingCorrelation::Ar1 { alpha: scalar()? },
                    "unstructured" => {
                        let m: usize = values
                            .get(1)
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| bad("missing unstructured dimension".into()))?;
                        let vals = values[2..]
                            .iter()
                            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad number `{v}`"))))
                            .collect::<Result<Vec<_>, _>>()?;
                        if vals.len() != m * m {
                            return Err(bad(format!("expected {} correlation entries, found {}", m * m, vals.len())));
                        }
                        WorkingCorrelation::Unstructured {
                            matrix: DMatrix::from_vec(m, m, vals),
                        }
                    }
                    other => return Err(bad(format!("unknown correlation `{other}`"))),
                })
            }
            // unknown keys are skipped so later minor additions stay readable
            _ => {}
        }
    }

    let family = FamilySpec::new(
        rec.family.ok_or(FitFileError::Missing("family"))?,
        rec.link.ok_or(FitFileError::Missing("link"))?,
        rec.dispersion_mode.unwrap_or(Dispersion::Estimate),
    )
    .map_err(|e| FitFileError::Malformed {
        line: 0,
        message: e.to_string(),
    })?;
    let labels = rec.labels.ok_or(FitFileError::Missing("labels"))?;
    let q = labels.len();
    let beta = rec.beta.ok_or(FitFileError::Missing("beta"))?;
    let square = |name: &'static str, v: Option<Vec<f64>>| -> Result<DMatrix<f64>, FitFileError> {
        let v = v.ok_or(FitFileError::Missing(name))?;
        if v.len() != q * q {
            return Err(FitFileError::Malformed {
                line: 0,
                message: format!("`{name}` has {} entries, expected {}", v.len(), q * q),
            });
        }
        Ok(DMatrix::from_vec(q, q, v))
    };
    if beta.len() != q {
        return Err(FitFileError::Malformed {
            line: 0,
            message: format!("beta has {} entries but there are {q} labels", beta.len()),
        });
    }
    Ok(GeeFit {
        robust_cov: square("robust_cov", rec.robust_cov)?,
        model_cov: square("model_cov", rec.model_cov)?,
        labels,
        response_names: rec.responses.ok_or(FitFileError::Missing("responses"))?,
        family,
        structure: rec.structure.ok_or(FitFileError::Missing("structure"))?,
        beta: DVector::from_vec(beta),
        dispersion: rec.dispersion.ok_or(FitFileError::Missing("dispersion"))?,
        correlation: rec.correlation.ok_or(FitFileError::Missing("correlation"))?,
        iterations: rec.iterations.unwrap_or(0),
        converged: rec.converged.ok_or(FitFileError::Missing("converged"))?,
        trace: rec.trace,
        fitted: DVector::from_vec(rec.fitted),
        n_clusters: rec.n_clusters.unwrap_or(0),
        n_obs: rec.n_obs.unwrap_or(0),
        max_cluster_size: rec.max_cluster_size.unwrap_or(0),
        warnings: rec.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(corr: WorkingCorrelation, values: &[f64]) -> GeeFit {
        let q = 2;
        let cov = DMatrix::from_fn(q, q, |a, b| values[(a + b) % values.len()]);
        GeeFit {
            labels: vec!["intercept".into(), "x:rtype_2".into()],
            response_names: vec!["stress".into(), "illness".into()],
            family: FamilySpec::probit().with_dispersion(Dispersion::Fixed(1.0)).unwrap(),
            structure: corr.structure(),
            beta: DVector::from_vec(vec![values[0], values[values.len() - 1]]),
            robust_cov: cov.clone(),
            model_cov: cov * 0.5,
            dispersion: 0.93,
            correlation: corr,
            iterations: 7,
            converged: false,
            trace: values.to_vec(),
            fitted: DVector::from_vec(values.to_vec()),
            n_clusters: 3,
            n_obs: 12,
            max_cluster_size: 4,
            warnings: vec!["something odd".into()],
        }
    }

    fn round_trip(fit: &GeeFit) -> GeeFit {
        let mut buf = Vec::new();
        write_fit(fit, &mut buf).unwrap();
        read_fit(buf.as_slice()).unwrap()
    }

    #[test]
    fn unstructured_round_trip() {
        let m = DMatrix::from_fn(3, 3, |a, b| if a == b { 1.0 } else { 0.1 * (a + b) as f64 });
        let fit = sample(WorkingCorrelation::Unstructured { matrix: m }, &[0.1, -2.5e-9, 3.0]);
        assert_eq!(round_trip(&fit), fit);
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(matches!(read_fit("hello\n".as_bytes()), Err(FitFileError::NotAFitFile)));
        assert!(matches!(read_fit("flexgee-fit\t9\n".as_bytes()), Err(FitFileError::Version(_))));
        assert!(matches!(read_fit("flexgee-fit\t1\nfamily\tbinomial\n".as_bytes()), Err(FitFileError::Missing(_))));
    }

    proptest! {
        #[test]
        fn numbers_survive_bit_exact(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..8), alpha in -0.99f64..0.99) {
            let fit = sample(WorkingCorrelation::Exchangeable { alpha }, &values);
            let back = round_trip(&fit);
            prop_assert_eq!(back, fit);
        }
    }
}
