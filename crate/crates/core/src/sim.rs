//! Simulation of correlated bivariate longitudinal binary data and the
//! Monte Carlo comparison of shared-coefficient ("parsimonious") and
//! fully response-specific ("common") marginal models.
//!
//! Marginal means follow the probit model
//!
//! ```text
//! P(Y = 1 | X) = Phi(b0 + b1 x1 + b2 x2 + b3 x1 x2
//!                    + b4 rtype + b5 x1 rtype + b6 x2 rtype + b7 x1 x2 rtype)
//! ```
//!
//! with `rtype = 1` on the first response. The time-varying covariate
//! follows `x1_t = g0 + g1 x1_{t-1} + eps_t`, and `x2` is a subject-level
//! Bernoulli draw.
//!
//! Dependence comes from a latent Gaussian vector per subject: correlation
//! `rho_within` between the same response at different times and
//! `rho_between` between different responses (at the same or different
//! times). `Y_tj = 1` iff `z_tj <= Phi^{-1}(p_tj)`, so the marginal
//! probabilities are exact.
//!
//! Replication `r` draws from ChaCha20 stream `r` of the master seed, so the
//! output does not depend on whether replications run in parallel.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::correlation::CorStruct;
use crate::dataset::{ColumnRoles, LongitudinalDataset, Observation};
use crate::design::{build_problem, ModelSpec};
use crate::engine::{fit_gee, GeeControls};
use crate::family::FamilySpec;
use crate::keyvalue::{self, KeyValues};
use crate::normal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("no successful replications to summarise")]
    NoDraws,
}

fn config_err(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

/// Generator constants and run size.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_subjects: usize,
    pub n_times: usize,
    /// `(b0, ..., b7)`.
    pub beta: [f64; 8],
    pub gamma0: f64,
    pub gamma1: f64,
    /// Standard deviation of `x1` at the first time point.
    pub x1_sd: f64,
    /// Innovation standard deviations for the updates at times 2..=T.
    pub innovation_sd: Vec<f64>,
    pub x2_prob: f64,
    pub rho_within: f64,
    pub rho_between: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_subjects: 300,
            n_times: 3,
            beta: [-0.5, 0.5, 0.9, 0.6, 0.0, 0.0, 0.0, 0.0],
            gamma0: 0.2,
            gamma1: 0.5,
            x1_sd: 0.4,
            innovation_sd: vec![0.25, 0.15],
            x2_prob: 0.5,
            rho_within: 0.5,
            rho_between: 0.25,
            replications: 500,
            seed: 1,
        }
    }
}

pub const N_RESPONSES: usize = 2;

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_subjects == 0 {
            return Err(config_err("subjects must be at least 1"));
        }
        if self.n_times == 0 {
            return Err(config_err("times must be at least 1"));
        }
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        if self.innovation_sd.len() + 1 < self.n_times {
            return Err(config_err(format!(
                "innovation_sd needs {} values for {} time points, got {}",
                self.n_times - 1,
                self.n_times,
                self.innovation_sd.len()
            )));
        }
        if self.x1_sd < 0.0 || self.innovation_sd.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(config_err("standard deviations must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.x2_prob) {
            return Err(config_err("x2_prob must lie in [0, 1]"));
        }
        if self.beta.iter().any(|b| !b.is_finite()) || !self.gamma0.is_finite() || !self.gamma1.is_finite() {
            return Err(config_err("coefficients must be finite"));
        }
        LatentThreshold::new(self.n_times, self.rho_within, self.rho_between)?;
        Ok(())
    }

    /// Applies `key = value` settings on top of `self`.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<(), SimError> {
        let e = |err: keyvalue::ConfigError| SimError::Config(err.to_string());
        for key in kv.keys() {
            match key {
                "subjects" => self.n_subjects = kv.value(key).map_err(e)?,
                "times" => self.n_times = kv.value(key).map_err(e)?,
                "beta" => {
                    let v: Vec<f64> = kv.list(key).map_err(e)?;
                    self.beta = v
                        .try_into()
                        .map_err(|v: Vec<f64>| config_err(format!("beta needs 8 values, got {}", v.len())))?;
                }
                "gamma0" => self.gamma0 = kv.value(key).map_err(e)?,
                "gamma1" => self.gamma1 = kv.value(key).map_err(e)?,
                "x1_sd" => self.x1_sd = kv.value(key).map_err(e)?,
                "innovation_sd" => self.innovation_sd = kv.list(key).map_err(e)?,
                "x2_prob" => self.x2_prob = kv.value(key).map_err(e)?,
                "rho_within" => self.rho_within = kv.value(key).map_err(e)?,
                "rho_between" => self.rho_between = kv.value(key).map_err(e)?,
                "replications" => self.replications = kv.value(key).map_err(e)?,
                "seed" => self.seed = kv.value(key).map_err(e)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 12] = [
        "subjects",
        "times",
        "beta",
        "gamma0",
        "gamma1",
        "x1_sd",
        "innovation_sd",
        "x2_prob",
        "rho_within",
        "rho_between",
        "replications",
        "seed",
    ];

    /// Resolved settings as `key = value` lines.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("subjects".into(), self.n_subjects.to_string()),
            ("times".into(), self.n_times.to_string()),
            ("beta".into(), list(&self.beta)),
            ("gamma0".into(), self.gamma0.to_string()),
            ("gamma1".into(), self.gamma1.to_string()),
            ("x1_sd".into(), self.x1_sd.to_string()),
            ("innovation_sd".into(), list(&self.innovation_sd)),
            ("x2_prob".into(), self.x2_prob.to_string()),
            ("rho_within".into(), self.rho_within.to_string()),
            ("rho_between".into(), self.rho_between.to_string()),
            ("replications".into(), self.replications.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }

    /// Generator for replication `rep`.
    pub fn replication_rng(&self, rep: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }
}

/// Covariate path of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectCovariates {
    pub x1: Vec<f64>,
    pub x2: f64,
}

pub fn generate_covariates<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Vec<SubjectCovariates> {
    (0..config.n_subjects)
        .map(|_| {
            let mut x1 = Vec::with_capacity(config.n_times);
            let z: f64 = rng.sample(StandardNormal);
            x1.push(config.x1_sd * z);
            for t in 1..config.n_times {
                let eps: f64 = rng.sample(StandardNormal);
                let prev = x1[t - 1];
                x1.push(config.gamma0 + config.gamma1 * prev + config.innovation_sd[t - 1] * eps);
            }
            let x2 = if rng.random::<f64>() < config.x2_prob { 1.0 } else { 0.0 };
            SubjectCovariates { x1, x2 }
        })
        .collect()
}

/// Marginal success probability for one observation.
pub fn marginal_probability(x1: f64, x2: f64, rtype: f64, beta: &[f64; 8]) -> f64 {
    let x12 = x1 * x2;
    let eta = beta[0]
        + beta[1] * x1
        + beta[2] * x2
        + beta[3] * x12
        + rtype * (beta[4] + beta[5] * x1 + beta[6] * x2 + beta[7] * x12);
    normal::cdf(eta)
}

/// `rtype` of zero-based generated response `j`: 1 for the first.
pub fn rtype_of(j: usize) -> f64 {
    if j == 0 {
        1.0
    } else {
        0.0
    }
}

/// Probabilities `p[t][j]` for one subject.
pub fn marginal_probabilities(cov: &SubjectCovariates, beta: &[f64; 8]) -> Vec<[f64; N_RESPONSES]> {
    cov.x1
        .iter()
        .map(|&x1| std::array::from_fn(|j| marginal_probability(x1, cov.x2, rtype_of(j), beta)))
        .collect()
}

/// Latent-Gaussian thresholding generator for one subject's `T x 2` block.
#[derive(Debug, Clone)]
pub struct LatentThreshold {
    n_times: usize,
    factor: Cholesky<f64, Dyn>,
}

/// Latent correlation matrix, indexed `t * 2 + j`.
pub fn latent_correlation(n_times: usize, rho_within: f64, rho_between: f64) -> DMatrix<f64> {
    let n = n_times * N_RESPONSES;
    DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else if a % N_RESPONSES == b % N_RESPONSES {
            rho_within
        } else {
            rho_between
        }
    })
}

impl LatentThreshold {
    pub fn new(n_times: usize, rho_within: f64, rho_between: f64) -> Result<Self, SimError> {
        if !(rho_within.abs() < 1.0 && rho_between.abs() < 1.0) {
            return Err(config_err("latent correlations must lie in (-1, 1)"));
        }
        let factor = Cholesky::new(latent_correlation(n_times, rho_within, rho_between))
            .ok_or_else(|| config_err("latent correlation matrix is not positive definite"))?;
        Ok(Self { n_times, factor })
    }

    /// Binary responses `y[t][j]` for one subject.
    pub fn draw<R: Rng + ?Sized>(&self, probs: &[[f64; N_RESPONSES]], rng: &mut R) -> Vec<[f64; N_RESPONSES]> {
        assert_eq!(probs.len(), self.n_times);
        let n = self.n_times * N_RESPONSES;
        let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = self.factor.l_dirty().lower_triangle() * e;
        probs
            .iter()
            .enumerate()
            .map(|(t, p)| std::array::from_fn(|j| if z[t * N_RESPONSES + j] <= normal::quantile(p[j]) { 1.0 } else { 0.0 }))
            .collect()
    }
}

pub fn generate_responses<R: Rng + ?Sized>(
    probs: &[[f64; N_RESPONSES]],
    rho_within: f64,
    rho_between: f64,
    rng: &mut R,
) -> Result<Vec<[f64; N_RESPONSES]>, SimError> {
    Ok(LatentThreshold::new(probs.len(), rho_within, rho_between)?.draw(probs, rng))
}

pub const RESPONSE_NAMES: [&str; 2] = ["y1", "y2"];
pub const COVARIATE_NAMES: [&str; 3] = ["x1", "x2", "x1x2"];

/// One simulated dataset with responses `y1`, `y2` and covariates
/// `x1`, `x2`, `x1x2`; times are numbered from 1.
pub fn simulate_dataset<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<LongitudinalDataset, SimError> {
    let generator = LatentThreshold::new(config.n_times, config.rho_within, config.rho_between)?;
    let covariates = generate_covariates(config, rng);
    let mut rows = Vec::with_capacity(config.n_subjects * config.n_times);
    for (i, cov) in covariates.iter().enumerate() {
        let probs = marginal_probabilities(cov, &config.beta);
        let y = generator.draw(&probs, rng);
        for (t, yt) in y.iter().enumerate() {
            rows.push(Observation {
                subject: (i + 1).to_string(),
                time: t as i64 + 1,
                responses: yt.to_vec(),
                covariates: vec![cov.x1[t], cov.x2, cov.x1[t] * cov.x2],
            });
        }
    }
    let roles = ColumnRoles {
        subject: "id".into(),
        time: "time".into(),
        responses: RESPONSE_NAMES.iter().map(|s| s.to_string()).collect(),
        covariates: COVARIATE_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    LongitudinalDataset::from_observations(&roles, rows).map_err(|e| config_err(e.to_string()))
}

/// Fitted mean model in the Monte Carlo comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelVariant {
    /// Shared intercept and slopes (the generating model).
    Parsimonious,
    /// Response-specific intercept and slopes for every covariate.
    Common,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 2] = [ModelVariant::Parsimonious, ModelVariant::Common];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Parsimonious => "parsimonious",
            ModelVariant::Common => "common",
        }
    }

    /// Model specification. `y2` is listed first so that the design's
    /// response indicator marks `y1`, matching `rtype = 1` on the first
    /// generated response; coefficient `j` then estimates `b_j`.
    pub fn model_spec(self) -> ModelSpec {
        let responses = [RESPONSE_NAMES[1], RESPONSE_NAMES[0]];
        match self {
            ModelVariant::Parsimonious => ModelSpec::shared(&responses, &COVARIATE_NAMES),
            ModelVariant::Common => ModelSpec::fully_separate(&responses, &COVARIATE_NAMES),
        }
    }

    pub fn n_parameters(self) -> usize {
        match self {
            ModelVariant::Parsimonious => 4,
            ModelVariant::Common => 8,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parsimonious" | "shared" => Ok(ModelVariant::Parsimonious),
            "common" | "separate" => Ok(ModelVariant::Common),
            other => Err(config_err(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Which fits to run in each replication.
#[derive(Debug, Clone, PartialEq)]
pub struct McPlan {
    pub variants: Vec<ModelVariant>,
    pub structures: Vec<CorStruct>,
    pub controls: GeeControls,
    pub parallel: bool,
}

impl Default for McPlan {
    fn default() -> Self {
        Self {
            variants: ModelVariant::ALL.to_vec(),
            structures: CorStruct::ALL.to_vec(),
            controls: GeeControls::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Converged { beta: Vec<f64>, robust_se: Vec<f64> },
    NotConverged,
    Failed(String),
}

/// All cell outcomes of one replication, in plan order.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub cells: Vec<CellOutcome>,
    pub elapsed: Vec<Duration>,
}

pub fn run_replication(config: &SimConfig, plan: &McPlan, rep: usize) -> Result<Replication, SimError> {
    let mut rng = config.replication_rng(rep);
    let data = simulate_dataset(config, &mut rng)?;
    let family = FamilySpec::probit();
    let mut cells = Vec::new();
    let mut elapsed = Vec::new();
    for &variant in &plan.variants {
        let problem = build_problem(&data, &variant.model_spec()).map_err(|e| config_err(e.to_string()));
        for &structure in &plan.structures {
            let start = Instant::now();
            let outcome = match &problem {
                Err(e) => CellOutcome::Failed(e.to_string()),
                Ok(problem) => match fit_gee(problem, &family, structure, &plan.controls) {
                    Ok(fit) if fit.converged => CellOutcome::Converged {
                        beta: fit.beta.iter().copied().collect(),
                        robust_se: fit.robust_se().iter().copied().collect(),
                    },
                    Ok(_) => CellOutcome::NotConverged,
                    Err(e) => CellOutcome::Failed(e.to_string()),
                },
            };
            elapsed.push(start.elapsed());
            cells.push(outcome);
        }
    }
    Ok(Replication {
        index: rep,
        cells,
        elapsed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSummary {
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
}

/// Mean, bias and mean squared error of a set of draws.
pub fn summarize_estimates(draws: &[f64], truth: f64) -> Result<EstimateSummary, SimError> {
    if draws.is_empty() {
        return Err(SimError::NoDraws);
    }
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let mse = draws.iter().map(|d| (d - truth).powi(2)).sum::<f64>() / n;
    Ok(EstimateSummary {
        mean,
        bias: mean - truth,
        mse,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    /// Share of converged replications whose 95% robust Wald interval
    /// contains the truth.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub variant: ModelVariant,
    pub structure: CorStruct,
    pub n_converged: usize,
    pub n_not_converged: usize,
    pub n_failed: usize,
    /// Empty when no replication converged.
    pub params: Vec<ParamSummary>,
    pub elapsed: Duration,
}

impl CellSummary {
    pub fn usable(&self) -> bool {
        self.n_converged > 0
    }

    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub replications: usize,
    pub cells: Vec<CellSummary>,
}

impl McSummary {
    pub fn cell(&self, variant: ModelVariant, structure: CorStruct) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.variant == variant && c.structure == structure)
    }

    /// Summary table as CSV. Timing is left out so the bytes depend only
    /// on the configuration.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["parameter", "model", "structure", "mean", "bias", "mse", "n_converged"])?;
        for cell in &self.cells {
            if cell.params.is_empty() {
                w.write_record([
                    "NA",
                    cell.variant.as_str(),
                    cell.structure.as_str(),
                    "NA",
                    "NA",
                    "NA",
                    &cell.n_converged.to_string(),
                ])?;
            }
            for p in &cell.params {
                w.write_record([
                    p.name.clone(),
                    cell.variant.to_string(),
                    cell.structure.to_string(),
                    format!("{:e}", p.mean),
                    format!("{:e}", p.bias),
                    format!("{:e}", p.mse),
                    cell.n_converged.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn parameter_name(j: usize) -> String {
    format!("beta{j}")
}

/// Two-sided 95% normal critical value.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Runs all replications and summarises them.
pub fn monte_carlo(config: &SimConfig, plan: &McPlan) -> Result<(McSummary, Vec<Replication>), SimError> {
    config.validate()?;
    if plan.variants.is_empty() || plan.structures.is_empty() {
        return Err(config_err("at least one model variant and one structure are required"));
    }
    let reps: Vec<Replication> = if plan.parallel {
        (0..config.replications)
            .into_par_iter()
            .map(|r| run_replication(config, plan, r))
            .collect::<Result<_, _>>()?
    } else {
        (0..config.replications)
            .map(|r| run_replication(config, plan, r))
            .collect::<Result<_, _>>()?
    };
    let mut cells = Vec::new();
    let mut slot = 0;
    for &variant in &plan.variants {
        for &structure in &plan.structures {
            let mut draws: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut covered = vec![0usize; variant.n_parameters()];
            let (mut ok, mut not_conv, mut failed) = (0, 0, 0);
            let mut elapsed = Duration::ZERO;
            for rep in &reps {
                elapsed += rep.elapsed[slot];
                match &rep.cells[slot] {
                    CellOutcome::Converged { beta, robust_se } => {
                        ok += 1;
                        for (j, (&b, &se)) in beta.iter().zip(robust_se).enumerate() {
                            draws.entry(j).or_default().push(b);
                            if (b - config.beta[j]).abs() <= Z_975 * se {
                                covered[j] += 1;
                            }
                        }
                    }
                    CellOutcome::NotConverged => not_conv += 1,
                    CellOutcome::Failed(_) => failed += 1,
                }
            }
            let params = draws
                .iter()
                .map(|(&j, d)| {
                    let s = summarize_estimates(d, config.beta[j])?;
                    Ok(ParamSummary {
                        name: parameter_name(j),
                        truth: config.beta[j],
                        mean: s.mean,
                        bias: s.bias,
                        mse: s.mse,
                        coverage: covered[j] as f64 / ok as f64,
                    })
                })
                .collect::<Result<Vec<_>, SimError>>()?;
            cells.push(CellSummary {
                variant,
                structure,
                n_converged: ok,
                n_not_converged: not_conv,
                n_failed: failed,
                params,
                elapsed,
            });
            slot += 1;
        }
    }
    Ok((
        McSummary {
            replications: config.replications,
            cells,
        },
        reps,
    ))
}

/// Long-format dump of every converged estimate.
pub fn write_raw_draws<W: Write>(plan: &McPlan, reps: &[Replication], w: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["replication", "model", "structure", "status", "parameter", "estimate", "robust_se"])?;
    let labels: Vec<(ModelVariant, CorStruct)> = plan
        .variants
        .iter()
        .flat_map(|&v| plan.structures.iter().map(move |&s| (v, s)))
        .collect();
    for rep in reps {
        for ((variant, structure), outcome) in labels.iter().zip(&rep.cells) {
            let head = [rep.index.to_string(), variant.to_string(), structure.to_string()];
            match outcome {
                CellOutcome::Converged { beta, robust_se } => {
                    for (j, (b, se)) in beta.iter().zip(robust_se).enumerate() {
                        w.write_record(head.iter().cloned().chain([
                            "converged".to_string(),
                            parameter_name(j),
                            format!("{b:e}"),
                            format!("{se:e}"),
                        ]))?;
                    }
                }
                CellOutcome::NotConverged => {
                    w.write_record(head.iter().cloned().chain(["not_converged".into(), "".into(), "".into(), "".into()]))?
                }
                CellOutcome::Failed(_) => {
                    w.write_record(head.iter().cloned().chain(["failed".into(), "".into(), "".into(), "".into()]))?
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn noiseless_covariate_recursion() {
        let config = SimConfig {
            n_subjects: 4,
            x1_sd: 0.0,
            innovation_sd: vec![0.0, 0.0],
            ..Default::default()
        };
        let mut rng = config.replication_rng(0);
        for s in generate_covariates(&config, &mut rng) {
            assert_eq!(s.x1[0], 0.0);
            assert!((s.x1[1] - 0.2).abs() < 1e-15);
            assert!((s.x1[2] - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn x2_frequency_is_one_half() {
        let config = SimConfig {
            n_subjects: 100_000,
            ..Default::default()
        };
        let mut rng = config.replication_rng(3);
        let cov = generate_covariates(&config, &mut rng);
        let mean = cov.iter().map(|c| c.x2).sum::<f64>() / cov.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn probability_examples() {
        let truth = SimConfig::default().beta;
        // Phi(-0.5) = 0.308537538725987, Phi(1.5) = 0.933192798731142
        assert!((marginal_probability(0.0, 0.0, 0.0, &truth) - 0.308_537_538_725_987).abs() < 1e-12);
        assert_eq!(marginal_probability(0.3, 1.0, 1.0, &[0.0; 8]), 0.5);
        assert!((marginal_probability(1.0, 1.0, 0.0, &truth) - 0.933_192_798_731_142).abs() < 1e-12);
        let b = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        assert!(marginal_probability(0.0, 0.0, rtype_of(0), &b) > 0.5);
        assert_eq!(marginal_probability(0.0, 0.0, rtype_of(1), &b), 0.5);
    }

    #[test]
    fn latent_matrix_layout_and_pd_check() {
        let r = latent_correlation(3, 0.5, 0.25);
        assert_eq!(r[(0, 2)], 0.5); // y1 at t=1 vs y1 at t=2
        assert_eq!(r[(0, 1)], 0.25); // y1 vs y2 same time
        assert_eq!(r[(0, 3)], 0.25); // y1 t=1 vs y2 t=2
        assert!(LatentThreshold::new(3, 0.5, 0.25).is_ok());
        assert!(LatentThreshold::new(3, 0.1, 0.9).is_err());
    }

    #[test]
    fn independent_when_correlations_are_zero() {
        let gen = LatentThreshold::new(2, 0.0, 0.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let n = 40_000;
        let mut both = 0.0;
        let mut first = 0.0;
        let mut second = 0.0;
        for _ in 0..n {
            let y = gen.draw(&[[0.5, 0.5], [0.5, 0.5]], &mut rng);
            first += y[0][0];
            second += y[1][0];
            both += y[0][0] * y[1][0];
        }
        let n = n as f64;
        let cov = both / n - first / n * second / n;
        assert!(cov.abs() < 4.0 * 0.25 / n.sqrt(), "cov {cov}");
    }

    #[test]
    fn zero_replications_rejected() {
        let config = SimConfig {
            replications: 0,
            ..Default::default()
        };
        assert!(matches!(config.validate(), Err(SimError::Config(_))));
        let short = SimConfig {
            n_times: 5,
            ..Default::default()
        };
        assert!(short.validate().is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize_estimates(&[0.4, 0.6], 0.5).unwrap();
        assert!((s.mean - 0.5).abs() < 1e-15);
        assert!(s.bias.abs() < 1e-15);
        assert!((s.mse - 0.01).abs() < 1e-15);
        let s = summarize_estimates(&[0.7], 0.7).unwrap();
        assert_eq!((s.bias, s.mse), (0.0, 0.0));
        assert_eq!(summarize_estimates(&[], 0.0), Err(SimError::NoDraws));
    }

    #[test]
    fn key_values_override_defaults() {
        let kv = KeyValues::parse("subjects = 50\nbeta = 0,0,0,0,0,0,0,1\nseed=9\n").unwrap();
        let mut c = SimConfig::default();
        c.apply(&kv).unwrap();
        assert_eq!((c.n_subjects, c.seed, c.beta[7]), (50, 9, 1.0));
        let kv = KeyValues::parse("beta = 1,2\n").unwrap();
        assert!(c.apply(&kv).is_err());
    }

    #[test]
    fn variant_specs_line_up_with_generator_coefficients() {
        let spec = ModelVariant::Common.model_spec();
        assert_eq!(spec.n_columns(), 8);
        assert_eq!(spec.responses, vec!["y2", "y1"]);
        assert_eq!(ModelVariant::Parsimonious.model_spec().n_columns(), 4);
    }

    proptest! {
        #[test]
        fn mse_is_variance_plus_bias_squared(draws in prop::collection::vec(-5.0f64..5.0, 1..50), truth in -2.0f64..2.0) {
            let s = summarize_estimates(&draws, truth).unwrap();
            // two-pass variance oracle
            let n = draws.len() as f64;
            let var = draws.iter().map(|d| (d - s.mean).powi(2)).sum::<f64>() / n;
            prop_assert!((s.mse - (var + s.bias * s.bias)).abs() < 1e-10);
            prop_assert!(s.mse + 1e-12 >= s.bias * s.bias);
        }
    }
}
