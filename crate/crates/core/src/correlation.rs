//! Moment estimators for the dispersion and the working correlation, and
//! assembly of working covariances `V_i = phi * A^{1/2} R A^{1/2}`.
//!
//! Denominators subtract the number of regression coefficients `q`, as in
//! the classic GEE moment estimators:
//!
//! * dispersion: `sum e^2 / (M - q)`
//! * exchangeable: `sum_{l<l'} e_l e_l' / (phi * (sum_i m_i (m_i - 1) / 2 - q))`
//! * AR(1): `sum_l e_l e_{l+1} / (phi * (sum_i (m_i - 1) - q))`
//! * unstructured: `R_lm = sum_i e_il e_im / (phi * (N - q))`
//!
//! AR(1) runs along the stacked cluster order (time-major, response-minor),
//! so for multivariate clusters the lag-1 neighbours alternate between
//! "other response, same time" and "first response, next time". This is a
//! modelling convention, not a multivariate AR process.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::design::Cluster;
use crate::family::{FamilyError, FamilySpec};

/// Off-diagonal correlation estimates are clamped to `[-MAX_CORR, MAX_CORR]`.
pub const MAX_CORR: f64 = 0.99;
/// Minimum eigenvalue below which a ridge is added to `R`.
pub const SINGULAR_EIGEN: f64 = 1e-10;
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("unknown correlation structure `{0}` (expected independence, exchangeable, ar1 or unstructured)")]
    Unknown(String),
    #[error("unstructured correlation needs equal cluster sizes, found sizes {min}..={max}")]
    Unbalanced { min: usize, max: usize },
    #[error("not enough {what} to estimate the {structure} correlation (denominator {denominator})")]
    InsufficientPairs {
        structure: CorStruct,
        what: &'static str,
        denominator: f64,
    },
    #[error("dispersion needs more observations ({n}) than coefficients ({q})")]
    DegreesOfFreedom { n: usize, q: usize },
    #[error("variance function vanished at observation {index} (mu = {mu})")]
    ZeroVariance { index: usize, mu: f64 },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("working correlation dimension {r} does not match cluster size {m}")]
    Dimension { r: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorStruct {
    Independence,
    Exchangeable,
    Ar1,
    Unstructured,
}

impl CorStruct {
    pub const ALL: [CorStruct; 4] = [
        CorStruct::Unstructured,
        CorStruct::Exchangeable,
        CorStruct::Ar1,
        CorStruct::Independence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorStruct::Independence => "independence",
            CorStruct::Exchangeable => "exchangeable",
            CorStruct::Ar1 => "ar1",
            CorStruct::Unstructured => "unstructured",
        }
    }
}

impl fmt::Display for CorStruct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorStruct {
    type Err = CorrelationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independence" | "independent" | "ind" => Ok(CorStruct::Independence),
            "exchangeable" | "exch" => Ok(CorStruct::Exchangeable),
            "ar1" | "ar(1)" => Ok(CorStruct::Ar1),
            "unstructured" | "uns" => Ok(CorStruct::Unstructured),
            other => Err(CorrelationError::Unknown(other.to_string())),
        }
    }
}

/// Fitted working correlation.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkingCorrelation {
    Independence,
    Exchangeable { alpha: f64 },
    Ar1 { alpha: f64 },
    Unstructured { matrix: DMatrix<f64> },
}

impl WorkingCorrelation {
    pub fn structure(&self) -> CorStruct {
        match self {
            WorkingCorrelation::Independence => CorStruct::Independence,
            WorkingCorrelation::Exchangeable { .. } => CorStruct::Exchangeable,
            WorkingCorrelation::Ar1 { .. } => CorStruct::Ar1,
            WorkingCorrelation::Unstructured { .. } => CorStruct::Unstructured,
        }
    }

    /// Correlation matrix for a cluster of size `m`.
    pub fn matrix(&self, m: usize) -> Result<DMatrix<f64>, CorrelationError> {
        Ok(match self {
            WorkingCorrelation::Independence => DMatrix::identity(m, m),
            WorkingCorrelation::Exchangeable { alpha } => {
                DMatrix::from_fn(m, m, |a, b| if a == b { 1.0 } else { *alpha })
            }
            WorkingCorrelation::Ar1 { alpha } => {
                DMatrix::from_fn(m, m, |a, b| alpha.powi(a.abs_diff(b) as i32))
            }
            WorkingCorrelation::Unstructured { matrix } => {
                if matrix.nrows() != m {
                    return Err(CorrelationError::Dimension { r: matrix.nrows(), m });
                }
                matrix.clone()
            }
        })
    }

    /// Number of free correlation parameters for clusters of size `m`.
    pub fn n_parameters(structure: CorStruct, m: usize) -> usize {
        match structure {
            CorStruct::Independence => 0,
            CorStruct::Exchangeable | CorStruct::Ar1 => 1,
            CorStruct::Unstructured => m * m.saturating_sub(1) / 2,
        }
    }

    /// Short scalar summary; `None` for independence and unstructured.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            WorkingCorrelation::Exchangeable { alpha } | WorkingCorrelation::Ar1 { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

/// Result of a correlation estimate with any numerical adjustments made.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub correlation: WorkingCorrelation,
    /// Values before clamping (scalar structures) or the number of clamped
    /// entries (unstructured) are reported through `warnings`.
    pub warnings: Vec<String>,
}

/// `(y - mu) / sqrt(v(mu))`.
pub fn pearson_residuals(
    y: &DVector<f64>,
    mu: &DVector<f64>,
    family: &FamilySpec,
) -> Result<DVector<f64>, CorrelationError> {
    assert_eq!(y.len(), mu.len());
    let mut e = DVector::zeros(y.len());
    for i in 0..y.len() {
        let v = family.variance(mu[i])?;
        if v <= 0.0 {
            return Err(CorrelationError::ZeroVariance { index: i, mu: mu[i] });
        }
        e[i] = (y[i] - mu[i]) / v.sqrt();
    }
    Ok(e)
}

/// `sum e^2 / (M - q)`.
pub fn estimate_dispersion(residuals: &DVector<f64>, q: usize) -> Result<f64, CorrelationError> {
    let n = residuals.len();
    if n <= q {
        return Err(CorrelationError::DegreesOfFreedom { n, q });
    }
    Ok(residuals.norm_squared() / (n - q) as f64)
}

fn clamp_scalar(structure: CorStruct, raw: f64, warnings: &mut Vec<String>) -> f64 {
    if raw.abs() > MAX_CORR {
        warnings.push(format!(
            "{structure} correlation estimate {raw:.6} clamped to {:.2}",
            raw.signum() * MAX_CORR
        ));
        raw.signum() * MAX_CORR
    } else {
        raw
    }
}

/// Moment estimate of the working correlation from Pearson residuals.
pub fn estimate_correlation(
    residuals: &DVector<f64>,
    clusters: &[Cluster],
    structure: CorStruct,
    phi: f64,
    q: usize,
) -> Result<CorrelationEstimate, CorrelationError> {
    let mut warnings = Vec::new();
    let insufficient = |what, denominator| CorrelationError::InsufficientPairs {
        structure,
        what,
        denominator,
    };
    if structure != CorStruct::Independence && clusters.iter().all(|c| c.size() <= 1) {
        // no within-cluster pairs; the working correlation never enters V_i
        warnings.push(format!(
            "every cluster has a single observation; {structure} correlation is not estimable and is set to 0"
        ));
        let correlation = match structure {
            CorStruct::Ar1 => WorkingCorrelation::Ar1 { alpha: 0.0 },
            CorStruct::Unstructured => WorkingCorrelation::Unstructured {
                matrix: DMatrix::identity(1, 1),
            },
            _ => WorkingCorrelation::Exchangeable { alpha: 0.0 },
        };
        return Ok(CorrelationEstimate { correlation, warnings });
    }
    let correlation = match structure {
        CorStruct::Independence => WorkingCorrelation::Independence,
        CorStruct::Exchangeable => {
            let mut num = 0.0;
            let mut pairs = 0.0;
            for c in clusters {
                let e = residuals.rows_range(c.rows.clone());
                let s: f64 = e.sum();
                // sum over unordered pairs = ((sum e)^2 - sum e^2) / 2
                num += 0.5 * (s * s - e.norm_squared());
                let m = c.size() as f64;
                pairs += 0.5 * m * (m - 1.0);
            }
            let denom = pairs - q as f64;
            if denom <= 0.0 {
                return Err(insufficient("within-cluster pairs", denom));
            }
            let raw = num / (phi * denom);
            WorkingCorrelation::Exchangeable {
                alpha: clamp_scalar(structure, raw, &mut warnings),
            }
        }
        CorStruct::Ar1 => {
            let mut num = 0.0;
            let mut pairs = 0.0;
            for c in clusters {
                let e = residuals.rows_range(c.rows.clone());
                for l in 1..e.len() {
                    num += e[l - 1] * e[l];
                }
                pairs += c.size().saturating_sub(1) as f64;
            }
            let denom = pairs - q as f64;
            if denom <= 0.0 {
                return Err(insufficient("adjacent pairs", denom));
            }
            let raw = num / (phi * denom);
            WorkingCorrelation::Ar1 {
                alpha: clamp_scalar(structure, raw, &mut warnings),
            }
        }
        CorStruct::Unstructured => {
            let min = clusters.iter().map(Cluster::size).min().unwrap_or(0);
            let max = clusters.iter().map(Cluster::size).max().unwrap_or(0);
            if min != max {
                return Err(CorrelationError::Unbalanced { min, max });
            }
            let m = max;
            let denom = clusters.len() as f64 - q as f64;
            if denom <= 0.0 || m < 2 {
                return Err(insufficient("clusters", denom));
            }
            let mut acc = DMatrix::<f64>::zeros(m, m);
            for c in clusters {
                let e = residuals.rows_range(c.rows.clone());
                acc.ger(1.0, &e, &e, 1.0);
            }
            let mut r = acc / (phi * denom);
            let mut clamped = 0usize;
            for a in 0..m {
                r[(a, a)] = 1.0;
                for b in 0..a {
                    let mut v = 0.5 * (r[(a, b)] + r[(b, a)]);
                    if v.abs() > MAX_CORR {
                        v = v.signum() * MAX_CORR;
                        clamped += 1;
                    }
                    r[(a, b)] = v;
                    r[(b, a)] = v;
                }
            }
            if clamped > 0 {
                warnings.push(format!(
                    "{clamped} unstructured correlation entries clamped to +/-{MAX_CORR}"
                ));
            }
            WorkingCorrelation::Unstructured { matrix: r }
        }
    };
    Ok(CorrelationEstimate { correlation, warnings })
}

/// Adds a ridge to `R` when its smallest eigenvalue is below
/// [`SINGULAR_EIGEN`]. Returns whether the ridge was applied.
pub fn regularize(r: &mut DMatrix<f64>) -> bool {
    if r.nrows() == 0 {
        return false;
    }
    let min_eig = SymmetricEigen::new(r.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < SINGULAR_EIGEN {
        for i in 0..r.nrows() {
            r[(i, i)] += RIDGE;
        }
        true
    } else {
        false
    }
}

/// `V = phi * A^{1/2} R A^{1/2}` with `A = diag(v(mu))`.
pub fn build_working_covariance(
    r: &DMatrix<f64>,
    mu: &[f64],
    phi: f64,
    family: &FamilySpec,
) -> Result<DMatrix<f64>, CorrelationError> {
    if r.nrows() != mu.len() || r.ncols() != mu.len() {
        return Err(CorrelationError::Dimension {
            r: r.nrows(),
            m: mu.len(),
        });
    }
    let sd = mu
        .iter()
        .map(|&m| family.variance(m).map(f64::sqrt))
        .collect::<Result<Vec<_>, _>>()?;
    let m = mu.len();
    Ok(DMatrix::from_fn(m, m, |a, b| {
        // symmetric by construction: sd[a]*sd[b]*R(a,b) with R symmetric
        let rab = if a <= b { r[(a, b)] } else { r[(b, a)] };
        phi * sd[a] * sd[b] * rab
    }))
}
