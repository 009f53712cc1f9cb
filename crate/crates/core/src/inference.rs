//! Post-fit quantities: Wald statistics, per-response coefficients
//! recovered from indicator interactions, odds ratios and efficiency gains
//! between two fits.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::design::{interaction_label, rtype_label, INTERCEPT};
use crate::engine::GeeFit;
use crate::normal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("coefficient index {index} out of range (fit has {q} coefficients)")]
    IndexOutOfRange { index: usize, q: usize },
    #[error("unknown coefficient `{0}`")]
    UnknownLabel(String),
    #[error("unknown response `{0}`")]
    UnknownResponse(String),
    #[error("variance of the combined coefficient is negative ({0}); covariance entries are inconsistent")]
    NegativeVariance(f64),
    #[error("the two fits share no comparable coefficients")]
    NoMatchedLabels,
}

/// Which covariance matrix feeds standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceSource {
    #[default]
    Robust,
    ModelBased,
}

impl CovarianceSource {
    fn matrix(self, fit: &GeeFit) -> &DMatrix<f64> {
        match self {
            CovarianceSource::Robust => &fit.robust_cov,
            CovarianceSource::ModelBased => &fit.model_cov,
        }
    }
}

/// `sqrt(var_s + var_s' + 2 cov)`.
pub fn combined_standard_error(var_s: f64, var_s_prime: f64, cov: f64) -> Result<f64, InferenceError> {
    combined_variance(var_s, var_s_prime, cov, 1.0).map(f64::sqrt)
}

fn combined_variance(var_s: f64, var_s_prime: f64, cov: f64, rtype: f64) -> Result<f64, InferenceError> {
    let v = var_s + rtype * rtype * var_s_prime + 2.0 * rtype * cov;
    if v < 0.0 {
        // tiny negatives from rounding are treated as zero
        if v > -1e-12 * (var_s.abs() + var_s_prime.abs()).max(1e-300) {
            return Ok(0.0);
        }
        return Err(InferenceError::NegativeVariance(v));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCoefficient {
    pub response: String,
    pub term: String,
    pub base: usize,
    pub interaction: Option<usize>,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
}

impl DerivedCoefficient {
    pub fn p_value(&self) -> f64 {
        normal::two_sided_p(self.z)
    }

    pub fn odds_ratio(&self) -> f64 {
        odds_ratio(self.estimate)
    }
}

fn check_index(fit: &GeeFit, index: usize) -> Result<(), InferenceError> {
    if index >= fit.n_coefficients() {
        return Err(InferenceError::IndexOutOfRange {
            index,
            q: fit.n_coefficients(),
        });
    }
    Ok(())
}

/// `beta_s + beta_s' * rtype` with its standard error and Wald Z.
pub fn derived_coefficient(
    fit: &GeeFit,
    base: usize,
    interaction: Option<usize>,
    rtype: f64,
    source: CovarianceSource,
) -> Result<DerivedCoefficient, InferenceError> {
    check_index(fit, base)?;
    let cov = source.matrix(fit);
    let (estimate, variance) = match interaction {
        Some(s2) => {
            check_index(fit, s2)?;
            let est = fit.beta[base] + fit.beta[s2] * rtype;
            let var = combined_variance(cov[(base, base)], cov[(s2, s2)], cov[(base, s2)], rtype)?;
            (est, var)
        }
        None => (fit.beta[base], cov[(base, base)].max(0.0)),
    };
    let std_error = variance.sqrt();
    Ok(DerivedCoefficient {
        response: String::new(),
        term: fit.labels[base].clone(),
        base,
        interaction,
        estimate,
        std_error,
        z: wald_z(estimate, std_error),
    })
}

/// Coefficients of every term on the scale of one response: the shared
/// coefficient plus, for non-reference responses, the matching indicator or
/// interaction coefficient when the model has one.
pub fn per_response_coefficients(
    fit: &GeeFit,
    response: &str,
    source: CovarianceSource,
) -> Result<Vec<DerivedCoefficient>, InferenceError> {
    let j = fit
        .response_names
        .iter()
        .position(|r| r == response)
        .ok_or_else(|| InferenceError::UnknownResponse(response.to_string()))?
        + 1;
    let is_extra = |label: &str| label.starts_with("rtype_") || label.contains(":rtype_");
    let mut out = Vec::new();
    for (s, label) in fit.labels.iter().enumerate() {
        if is_extra(label) {
            continue;
        }
        let partner = if j == 1 {
            None
        } else if label == INTERCEPT {
            fit.index_of(&rtype_label(j))
        } else {
            fit.index_of(&interaction_label(label, j))
        };
        let mut d = derived_coefficient(fit, s, partner, 1.0, source)?;
        d.response = response.to_string();
        out.push(d);
    }
    Ok(out)
}

fn wald_z(estimate: f64, se: f64) -> f64 {
    if se > 0.0 {
        estimate / se
    } else if estimate == 0.0 {
        0.0
    } else {
        estimate.signum() * f64::INFINITY
    }
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldRow {
    pub label: String,
    pub estimate: f64,
    pub robust_se: f64,
    pub robust_z: f64,
    pub robust_p: f64,
    pub model_se: f64,
    pub model_z: f64,
    pub model_p: f64,
}

impl WaldRow {
    /// True when a standard error is zero and Z is infinite.
    pub fn has_infinite_z(&self) -> bool {
        self.robust_z.is_infinite() || self.model_z.is_infinite()
    }
}

pub fn wald_statistics(fit: &GeeFit) -> Vec<WaldRow> {
    let rse = fit.robust_se();
    let mse = fit.model_se();
    fit.labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let b = fit.beta[i];
            let rz = wald_z(b, rse[i]);
            let mz = wald_z(b, mse[i]);
            WaldRow {
                label: label.clone(),
                estimate: b,
                robust_se: rse[i],
                robust_z: rz,
                robust_p: normal::two_sided_p(rz),
                model_se: mse[i],
                model_z: mz,
                model_p: normal::two_sided_p(mz),
            }
        })
        .collect()
}

pub fn odds_ratio(estimate: f64) -> f64 {
    estimate.exp()
}

/// Odds ratio of a fitted coefficient, with a warning when the link is not
/// logit and the exponentiated value is not an odds ratio.
pub fn fit_odds_ratio(fit: &GeeFit, label: &str) -> Result<(f64, Option<String>), InferenceError> {
    let i = fit.index_of(label).ok_or_else(|| InferenceError::UnknownLabel(label.to_string()))?;
    let warning = (!fit.family.is_logit())
        .then(|| format!("exp(coefficient) is not an odds ratio under the {} link", fit.family.link()));
    Ok((odds_ratio(fit.beta[i]), warning))
}

/// Percentage decrease of a standard error relative to a reference.
pub fn percent_decrease(se_reference: f64, se_comparison: f64) -> f64 {
    100.0 * (se_reference - se_comparison) / se_reference
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    /// Coefficient label, or `response:term` for per-response coefficients.
    pub key: String,
    pub se_reference: f64,
    pub se_comparison: f64,
    pub gain_percent: f64,
}

/// Efficiency gains over coefficients present in both fits under the same
/// label, plus per-response coefficients matched by response and term.
pub fn efficiency_gain(
    reference: &GeeFit,
    comparison: &GeeFit,
    source: CovarianceSource,
) -> Result<Vec<GainRow>, InferenceError> {
    let mut rows = Vec::new();
    let ref_cov = source.matrix(reference);
    let cmp_cov = source.matrix(comparison);
    for (i, label) in reference.labels.iter().enumerate() {
        if let Some(j) = comparison.index_of(label) {
            let a = ref_cov[(i, i)].max(0.0).sqrt();
            let b = cmp_cov[(j, j)].max(0.0).sqrt();
            rows.push(GainRow {
                key: label.clone(),
                se_reference: a,
                se_comparison: b,
                gain_percent: percent_decrease(a, b),
            });
        }
    }
    for response in &reference.response_names {
        if !comparison.response_names.contains(response) {
            continue;
        }
        let a = per_response_coefficients(reference, response, source)?;
        let b = per_response_coefficients(comparison, response, source)?;
        for da in &a {
            if let Some(db) = b.iter().find(|d| d.term == da.term) {
                rows.push(GainRow {
                    key: format!("{response}:{}", da.term),
                    se_reference: da.std_error,
                    se_comparison: db.std_error,
                    gain_percent: percent_decrease(da.std_error, db.std_error),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(InferenceError::NoMatchedLabels);
    }
    Ok(rows)
}
