//! First-order GEE solver.
//!
//! Fisher scoring on `sum_i D_i' V_i^{-1} (y_i - mu_i) = 0` with
//! `D_i = diag(dmu/deta) X_i`, alternating with moment re-estimation of the
//! dispersion and working correlation. The start value comes from an IRLS
//! fit of the same mean model under independence.
//!
//! Per-cluster work uses the Cholesky factor `L` of the working correlation:
//! with `S = diag(sqrt(v(mu)))`, the whitened quantities
//! `Z = L^{-1} S^{-1} D` and `z = L^{-1} S^{-1} (y - mu)` give the cluster
//! contributions `Z'Z` to the information and `Z'z` to the score. The
//! dispersion cancels from the scoring step and the sandwich, and enters the
//! model-based covariance as `phi * B^{-1}`.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use thiserror::Error;

use crate::correlation::{self, CorStruct, CorrelationError, WorkingCorrelation};
use crate::design::StackedProblem;
use crate::family::{Dispersion, FamilyError, FamilySpec, Link, Family};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeeError {
    #[error("{rows} stacked rows are not enough for {q} coefficients")]
    TooFewRows { rows: usize, q: usize },
    #[error("design matrix is rank deficient; linearly dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("weighted information matrix is singular or not positive definite")]
    SingularInformation,
    #[error("working covariance for cluster `{0}` could not be factorised")]
    ClusterSolve(String),
    #[error("non-finite values in iteration {iteration}{}", cluster.as_ref().map(|c| format!(" (cluster `{c}`)")).unwrap_or_default())]
    NonFinite {
        iteration: usize,
        cluster: Option<String>,
    },
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeeControls {
    /// Convergence threshold on `max |delta beta|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Compute cluster sums on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for GeeControls {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 25,
            parallel: false,
        }
    }
}

/// A fitted marginal model.
#[derive(Debug, Clone, PartialEq)]
pub struct GeeFit {
    pub labels: Vec<String>,
    pub response_names: Vec<String>,
    pub family: FamilySpec,
    pub structure: CorStruct,
    pub beta: DVector<f64>,
    pub robust_cov: DMatrix<f64>,
    pub model_cov: DMatrix<f64>,
    pub dispersion: f64,
    pub correlation: WorkingCorrelation,
    pub iterations: usize,
    pub converged: bool,
    /// `max |delta beta|` per scoring iteration.
    pub trace: Vec<f64>,
    pub fitted: DVector<f64>,
    pub n_clusters: usize,
    pub n_obs: usize,
    pub max_cluster_size: usize,
    pub warnings: Vec<String>,
}

impl GeeFit {
    pub fn n_coefficients(&self) -> usize {
        self.beta.len()
    }

    pub fn robust_se(&self) -> DVector<f64> {
        self.robust_cov.diagonal().map(|v| v.max(0.0).sqrt())
    }

    pub fn model_se(&self) -> DVector<f64> {
        self.model_cov.diagonal().map(|v| v.max(0.0).sqrt())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Distinct working-correlation parameters for the fitted structure.
    pub fn n_correlation_parameters(&self) -> usize {
        WorkingCorrelation::n_parameters(self.structure, self.max_cluster_size)
    }
}

/// Cluster-summed pieces of the estimating equations at a given `beta`.
#[derive(Debug, Clone)]
pub struct ClusterSums {
    /// `B = sum D' V~^{-1} D` with `V~ = A^{1/2} R A^{1/2}`.
    pub information: DMatrix<f64>,
    /// `U = sum D' V~^{-1} (y - mu)`.
    pub score: DVector<f64>,
    /// `sum U_i U_i'`.
    pub meat: DMatrix<f64>,
}

/// Linear predictor and clamped means.
pub fn fitted_means(problem: &StackedProblem, family: &FamilySpec, beta: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let eta = &problem.design * beta;
    let mu = eta.map(|e| family.mean(e));
    (eta, mu)
}

type Factors = BTreeMap<usize, Option<Cholesky<f64, Dyn>>>;

fn factor_correlation(
    problem: &StackedProblem,
    corr: &WorkingCorrelation,
    warnings: &mut Vec<String>,
) -> Result<Factors, GeeError> {
    let mut factors = Factors::new();
    for c in &problem.clusters {
        let m = c.size();
        if factors.contains_key(&m) {
            continue;
        }
        let entry = if matches!(corr, WorkingCorrelation::Independence) {
            None
        } else {
            let mut r = corr.matrix(m)?;
            if correlation::regularize(&mut r) {
                push_unique(
                    warnings,
                    format!(
                        "working correlation (size {m}) is nearly singular; added ridge {}",
                        correlation::RIDGE
                    ),
                );
            }
            Some(Cholesky::new(r).ok_or_else(|| GeeError::ClusterSolve(c.subject.clone()))?)
        };
        factors.insert(m, entry);
    }
    Ok(factors)
}

fn push_unique(warnings: &mut Vec<String>, w: String) {
    if !warnings.contains(&w) {
        warnings.push(w);
    }
}

fn cluster_contribution(
    problem: &StackedProblem,
    family: &FamilySpec,
    eta: &DVector<f64>,
    mu: &DVector<f64>,
    factor: Option<&Cholesky<f64, Dyn>>,
    cluster: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), GeeError> {
    let c = &problem.clusters[cluster];
    let (start, m) = (c.rows.start, c.size());
    let q = problem.n_columns();
    let mut xs = problem.design.rows(start, m).clone_owned();
    let mut rs = DVector::zeros(m);
    for l in 0..m {
        let row = start + l;
        let d = family.link().mean_derivative(eta[row]);
        let v = family.variance(mu[row])?;
        let s = v.sqrt();
        let scale = d / s;
        for col in 0..q {
            xs[(l, col)] *= scale;
        }
        rs[l] = (problem.response[row] - mu[row]) / s;
    }
    if let Some(chol) = factor {
        let l = chol.l_dirty();
        if !l.solve_lower_triangular_mut(&mut xs) || !l.solve_lower_triangular_mut(&mut rs) {
            return Err(GeeError::ClusterSolve(c.subject.clone()));
        }
    }
    let info = xs.tr_mul(&xs);
    let score = xs.tr_mul(&rs);
    if info.iter().chain(score.iter()).any(|v| !v.is_finite()) {
        return Err(GeeError::NonFinite {
            iteration: 0,
            cluster: Some(c.subject.clone()),
        });
    }
    Ok((info, score))
}

fn sums_with_factors(
    problem: &StackedProblem,
    family: &FamilySpec,
    beta: &DVector<f64>,
    factors: &Factors,
    parallel: bool,
) -> Result<ClusterSums, GeeError> {
    let (eta, mu) = fitted_means(problem, family, beta);
    let q = problem.n_columns();
    let one = |i: usize| {
        let m = problem.clusters[i].size();
        cluster_contribution(problem, family, &eta, &mu, factors[&m].as_ref(), i)
    };
    let parts: Vec<(DMatrix<f64>, DVector<f64>)> = if parallel {
        (0..problem.n_clusters()).into_par_iter().map(one).collect::<Result<_, _>>()?
    } else {
        (0..problem.n_clusters()).map(one).collect::<Result<_, _>>()?
    };
    // ordered reduction keeps results independent of the thread count
    let mut information = DMatrix::zeros(q, q);
    let mut score = DVector::zeros(q);
    let mut meat = DMatrix::zeros(q, q);
    for (b, u) in &parts {
        information += b;
        score += u;
        meat.ger(1.0, u, u, 1.0);
    }
    Ok(ClusterSums {
        information,
        score,
        meat,
    })
}

/// Information, score and meat at `beta` for a given working correlation.
pub fn cluster_sums(
    problem: &StackedProblem,
    family: &FamilySpec,
    beta: &DVector<f64>,
    corr: &WorkingCorrelation,
    parallel: bool,
) -> Result<ClusterSums, GeeError> {
    let mut warnings = Vec::new();
    let factors = factor_correlation(problem, corr, &mut warnings)?;
    sums_with_factors(problem, family, beta, &factors, parallel)
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, GeeError> {
    let chol = Cholesky::new(a.clone()).ok_or(GeeError::SingularInformation)?;
    Ok(chol.solve(b))
}

fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GeeError> {
    Ok(Cholesky::new(a.clone()).ok_or(GeeError::SingularInformation)?.inverse())
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// One Fisher-scoring step: `(sum D'V^{-1}D)^{-1} sum D'V^{-1}(y - mu)`.
pub fn beta_update_step(
    beta: &DVector<f64>,
    problem: &StackedProblem,
    family: &FamilySpec,
    corr: &WorkingCorrelation,
) -> Result<DVector<f64>, GeeError> {
    let sums = cluster_sums(problem, family, beta, corr, false)?;
    let delta = solve_spd(&sums.information, &sums.score)?;
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(GeeError::NonFinite {
            iteration: 0,
            cluster: None,
        });
    }
    Ok(delta)
}

/// Sandwich `B^{-1} M B^{-1}`.
pub fn robust_covariance(sums: &ClusterSums) -> Result<DMatrix<f64>, GeeError> {
    let b_inv = inverse_spd(&sums.information)?;
    Ok(symmetrize(&b_inv * &sums.meat * &b_inv))
}

/// Model-based `phi * B^{-1}`.
pub fn model_based_covariance(sums: &ClusterSums, phi: f64) -> Result<DMatrix<f64>, GeeError> {
    Ok(symmetrize(inverse_spd(&sums.information)? * phi))
}

/// Names the columns that are linear combinations of earlier ones
/// (modified Gram-Schmidt with one reorthogonalisation pass).
pub fn dependent_columns(design: &DMatrix<f64>, labels: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in design.column_iter().enumerate() {
        let mut v = col.clone_owned();
        let norm0 = v.norm();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-10 * norm0.max(1.0) {
            dependent.push(labels.get(j).cloned().unwrap_or_else(|| format!("column {j}")));
        } else {
            basis.push(v / norm);
        }
    }
    dependent
}

fn starting_mean(family: &FamilySpec, y: f64) -> f64 {
    match family.family() {
        Family::Gaussian => y,
        Family::Binomial => (y + 0.5) / 2.0,
        Family::Poisson => y + 0.1,
    }
}

/// IRLS fit of the stacked problem under independence, started from the
/// usual data-based means. Used as the GEE starting value.
pub fn glm_irls(problem: &StackedProblem, family: &FamilySpec, controls: &GeeControls) -> Result<DVector<f64>, GeeError> {
    let x = &problem.design;
    let y = &problem.response;
    let (n, q) = (x.nrows(), x.ncols());
    let link: Link = family.link();
    let mut eta = DVector::from_fn(n, |i, _| {
        let mu0 = family.clamp_mean(starting_mean(family, y[i]));
        link.link(mu0).unwrap_or(0.0)
    });
    let mut beta = DVector::zeros(q);
    for iter in 0..controls.max_iter.max(1) {
        let mut xtwx = DMatrix::zeros(q, q);
        let mut xtwz = DVector::zeros(q);
        for i in 0..n {
            let mu = family.mean(eta[i]);
            let d = link.mean_derivative(eta[i]);
            let w = d * d / family.variance(mu)?;
            let z = eta[i] + (y[i] - mu) / d;
            let xi = x.row(i).transpose();
            xtwx.ger(w, &xi, &xi, 1.0);
            xtwz.axpy(w * z, &xi, 1.0);
        }
        let next = solve_spd(&xtwx, &xtwz)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(GeeError::NonFinite {
                iteration: iter,
                cluster: None,
            });
        }
        let change = (&next - &beta).amax();
        beta = next;
        eta = x * &beta;
        if iter > 0 && change < controls.tol {
            break;
        }
    }
    Ok(beta)
}

struct MomentState {
    phi: f64,
    correlation: WorkingCorrelation,
}

fn moment_state(
    problem: &StackedProblem,
    family: &FamilySpec,
    beta: &DVector<f64>,
    structure: CorStruct,
    warnings: &mut Vec<String>,
) -> Result<MomentState, GeeError> {
    let q = problem.n_columns();
    let (_, mu) = fitted_means(problem, family, beta);
    let resid = correlation::pearson_residuals(&problem.response, &mu, family)?;
    let estimated = correlation::estimate_dispersion(&resid, q)?;
    let phi = match family.dispersion() {
        Dispersion::Estimate => estimated,
        Dispersion::Fixed(phi) => phi,
    };
    if structure == CorStruct::Independence {
        return Ok(MomentState {
            phi,
            correlation: WorkingCorrelation::Independence,
        });
    }
    // also catches NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(phi > 0.0) {
        push_unique(
            warnings,
            "degenerate fit: zero dispersion, working correlation set to identity".to_string(),
        );
        let correlation = match structure {
            CorStruct::Exchangeable => WorkingCorrelation::Exchangeable { alpha: 0.0 },
            CorStruct::Ar1 => WorkingCorrelation::Ar1 { alpha: 0.0 },
            _ => {
                let m = problem.clusters.iter().map(|c| c.size()).max().unwrap_or(0);
                WorkingCorrelation::Unstructured {
                    matrix: DMatrix::identity(m, m),
                }
            }
        };
        // still enforce the balance requirement for unstructured
        if structure == CorStruct::Unstructured {
            correlation::estimate_correlation(&resid, &problem.clusters, structure, 1.0, q)?;
        }
        return Ok(MomentState { phi, correlation });
    }
    let est = correlation::estimate_correlation(&resid, &problem.clusters, structure, phi, q)?;
    for w in est.warnings {
        push_unique(warnings, w);
    }
    Ok(MomentState {
        phi,
        correlation: est.correlation,
    })
}

/// Fits the marginal model. Non-convergence is reported through
/// [`GeeFit::converged`], not as an error.
pub fn fit_gee(
    problem: &StackedProblem,
    family: &FamilySpec,
    structure: CorStruct,
    controls: &GeeControls,
) -> Result<GeeFit, GeeError> {
    let (rows, q) = (problem.n_rows(), problem.n_columns());
    if q >= rows {
        return Err(GeeError::TooFewRows { rows, q });
    }
    let dependent = dependent_columns(&problem.design, &problem.labels);
    if !dependent.is_empty() {
        return Err(GeeError::RankDeficient(dependent));
    }
    let mut warnings = Vec::new();
    let mut beta = glm_irls(problem, family, controls)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=controls.max_iter {
        let state = moment_state(problem, family, &beta, structure, &mut warnings)?;
        let factors = factor_correlation(problem, &state.correlation, &mut warnings)?;
        let sums = sums_with_factors(problem, family, &beta, &factors, controls.parallel)
            .map_err(|e| with_iteration(e, iter))?;
        let delta = solve_spd(&sums.information, &sums.score)?;
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(GeeError::NonFinite {
                iteration: iter,
                cluster: None,
            });
        }
        beta += &delta;
        let change = delta.amax();
        trace.push(change);
        iterations = iter;
        if change < controls.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        push_unique(
            &mut warnings,
            format!("Fisher scoring did not converge in {} iterations", controls.max_iter),
        );
    }
    let state = moment_state(problem, family, &beta, structure, &mut warnings)?;
    let factors = factor_correlation(problem, &state.correlation, &mut warnings)?;
    let sums = sums_with_factors(problem, family, &beta, &factors, controls.parallel)?;
    let robust_cov = robust_covariance(&sums)?;
    let model_cov = model_based_covariance(&sums, state.phi)?;
    let (_, fitted) = fitted_means(problem, family, &beta);
    Ok(GeeFit {
        labels: problem.labels.clone(),
        response_names: problem.response_names.clone(),
        family: *family,
        structure,
        beta,
        robust_cov,
        model_cov,
        dispersion: state.phi,
        correlation: state.correlation,
        iterations,
        converged,
        trace,
        fitted,
        n_clusters: problem.n_clusters(),
        n_obs: rows,
        max_cluster_size: problem.clusters.iter().map(|c| c.size()).max().unwrap_or(0),
        warnings,
    })
}

fn with_iteration(err: GeeError, iteration: usize) -> GeeError {
    match err {
        GeeError::NonFinite { cluster, .. } => GeeError::NonFinite { iteration, cluster },
        other => other,
    }
}
