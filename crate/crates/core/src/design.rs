//! Stacked response vector and design matrix.
//!
//! Every (subject, time) row of a `k`-response dataset becomes `k` stacked
//! rows, ordered subject-major, time-major, response-minor. The covariate
//! row `(1, x_1, ..., x_p)` is replicated on each of the `k` rows. Optional
//! response-type indicators (`rtype_j`, one per non-reference response) and
//! indicator-by-covariate interactions (`cov:rtype_j`) are appended on the
//! right, giving `p + 1 + (k - 1) + (k - 1) * p*` columns. Response 1 is the
//! reference level and never gets an indicator.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dataset::LongitudinalDataset;

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("unknown response `{0}`")]
    UnknownResponse(String),
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("interaction index {index} is out of range 1..={p}")]
    InteractionOutOfRange { index: usize, p: usize },
    #[error("interaction index {0} listed more than once")]
    DuplicateInteraction(usize),
    #[error("interactions require the response-type indicator (rtype)")]
    InteractionsWithoutRtype,
    #[error("model needs at least one response")]
    NoResponses,
    #[error("response `{0}` listed more than once")]
    DuplicateResponse(String),
    #[error("cannot parse interaction list `{0}`")]
    BadInteractionList(String),
}

/// Structural model choice: which responses and covariates enter and which
/// covariate effects are separated across responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub responses: Vec<String>,
    pub covariates: Vec<String>,
    pub include_rtype: bool,
    /// Zero-based indices into `covariates`.
    pub interactions: Vec<usize>,
}

impl ModelSpec {
    /// Shared intercept and shared slopes for every response.
    pub fn shared(responses: &[&str], covariates: &[&str]) -> Self {
        Self {
            responses: responses.iter().map(|s| s.to_string()).collect(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            include_rtype: false,
            interactions: Vec::new(),
        }
    }

    /// Response-specific intercepts and slopes for every covariate.
    pub fn fully_separate(responses: &[&str], covariates: &[&str]) -> Self {
        Self {
            include_rtype: true,
            interactions: (0..covariates.len()).collect(),
            ..Self::shared(responses, covariates)
        }
    }

    /// Adds response-specific intercepts.
    pub fn with_rtype(mut self) -> Self {
        self.include_rtype = true;
        self
    }

    /// Builder-style helper taking one-based interaction indices.
    pub fn with_interactions_one_based(mut self, indices: &[usize]) -> Result<Self, DesignError> {
        let p = self.covariates.len();
        self.include_rtype = true;
        self.interactions = indices
            .iter()
            .map(|&i| {
                if i == 0 || i > p {
                    Err(DesignError::InteractionOutOfRange { index: i, p })
                } else {
                    Ok(i - 1)
                }
            })
            .collect::<Result<_, _>>()?;
        self.validate()?;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.responses.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    pub fn p_star(&self) -> usize {
        self.interactions.len()
    }

    /// Number of columns of the stacked design.
    pub fn n_columns(&self) -> usize {
        let (k, p) = (self.k(), self.p());
        if self.include_rtype {
            p + 1 + (k - 1) + (k - 1) * self.p_star()
        } else {
            p + 1
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if self.responses.is_empty() {
            return Err(DesignError::NoResponses);
        }
        for (i, r) in self.responses.iter().enumerate() {
            if self.responses[..i].contains(r) {
                return Err(DesignError::DuplicateResponse(r.clone()));
            }
        }
        if !self.interactions.is_empty() && !self.include_rtype {
            return Err(DesignError::InteractionsWithoutRtype);
        }
        let p = self.p();
        for (i, &l) in self.interactions.iter().enumerate() {
            if l >= p {
                return Err(DesignError::InteractionOutOfRange { index: l + 1, p });
            }
            if self.interactions[..i].contains(&l) {
                return Err(DesignError::DuplicateInteraction(l + 1));
            }
        }
        Ok(())
    }

    /// Column labels in design order.
    pub fn column_labels(&self) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.n_columns());
        labels.push(INTERCEPT.to_string());
        labels.extend(self.covariates.iter().cloned());
        if self.include_rtype {
            for j in 2..=self.k() {
                labels.push(rtype_label(j));
            }
            for j in 2..=self.k() {
                for &l in &self.interactions {
                    labels.push(interaction_label(&self.covariates[l], j));
                }
            }
        }
        labels
    }
}

/// Label of the indicator for one-based response index `j`.
pub fn rtype_label(j: usize) -> String {
    format!("rtype_{j}")
}

pub fn interaction_label(covariate: &str, j: usize) -> String {
    format!("{covariate}:rtype_{j}")
}

/// Parses one-based index lists such as `8,9`, `1:11` or `1:3,7`.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>, DesignError> {
    let bad = || DesignError::BadInteractionList(text.to_string());
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once(':') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

/// One subject's rows in the stacked problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub subject: String,
    pub rows: Range<usize>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.rows.len()
    }
}

/// Reconstructed response vector, design matrix and cluster layout.
#[derive(Debug, Clone)]
pub struct StackedProblem {
    pub response: DVector<f64>,
    pub design: DMatrix<f64>,
    pub clusters: Vec<Cluster>,
    pub labels: Vec<String>,
    pub response_names: Vec<String>,
}

impl StackedProblem {
    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_columns(&self) -> usize {
        self.design.ncols()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Builds a problem from raw parts, checking shapes and cluster cover.
    pub fn from_parts(
        response: DVector<f64>,
        design: DMatrix<f64>,
        clusters: Vec<Cluster>,
        labels: Vec<String>,
        response_names: Vec<String>,
    ) -> Self {
        assert_eq!(response.len(), design.nrows(), "response/design row mismatch");
        assert_eq!(labels.len(), design.ncols(), "label count mismatch");
        let mut next = 0;
        for c in &clusters {
            assert_eq!(c.rows.start, next, "clusters must tile the rows in order");
            next = c.rows.end;
        }
        assert_eq!(next, response.len(), "clusters must cover every row");
        Self {
            response,
            design,
            clusters,
            labels,
            response_names,
        }
    }

    /// Same problem with clusters reordered; rows are moved with them.
    pub fn permute_clusters(&self, order: &[usize]) -> Self {
        let mut rows = Vec::with_capacity(self.n_rows());
        let mut clusters = Vec::with_capacity(order.len());
        for &c in order {
            let cl = &self.clusters[c];
            let start = rows.len();
            rows.extend(cl.rows.clone());
            clusters.push(Cluster {
                subject: cl.subject.clone(),
                rows: start..rows.len(),
            });
        }
        let response = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.response[r]));
        let design = self.design.select_rows(rows.iter());
        Self::from_parts(response, design, clusters, self.labels.clone(), self.response_names.clone())
    }
}

fn response_columns(data: &LongitudinalDataset, spec: &ModelSpec) -> Result<Vec<usize>, DesignError> {
    spec.responses
        .iter()
        .map(|r| data.response_index(r).ok_or_else(|| DesignError::UnknownResponse(r.clone())))
        .collect()
}

fn covariate_columns(data: &LongitudinalDataset, spec: &ModelSpec) -> Result<Vec<usize>, DesignError> {
    spec.covariates
        .iter()
        .map(|c| data.covariate_index(c).ok_or_else(|| DesignError::UnknownCovariate(c.clone())))
        .collect()
}

/// Stacked response of length `M * k`.
pub fn build_stacked_response(
    data: &LongitudinalDataset,
    spec: &ModelSpec,
) -> Result<DVector<f64>, DesignError> {
    if spec.responses.is_empty() {
        return Err(DesignError::NoResponses);
    }
    let cols = response_columns(data, spec)?;
    let k = cols.len();
    let mut y = DVector::zeros(data.n_rows() * k);
    for r in 0..data.n_rows() {
        let row = data.response_row(r);
        for (j, &c) in cols.iter().enumerate() {
            y[r * k + j] = row[c];
        }
    }
    Ok(y)
}

/// Stacked design of shape `(M * k) x q` and its column labels.
pub fn build_stacked_design(
    data: &LongitudinalDataset,
    spec: &ModelSpec,
) -> Result<(DMatrix<f64>, Vec<String>), DesignError> {
    spec.validate()?;
    let cov_cols = covariate_columns(data, spec)?;
    let (k, p) = (spec.k(), spec.p());
    let q = spec.n_columns();
    let mut x = DMatrix::zeros(data.n_rows() * k, q);
    for r in 0..data.n_rows() {
        let cov = data.covariate_row(r);
        for j in 0..k {
            let row = r * k + j;
            x[(row, 0)] = 1.0;
            for (l, &c) in cov_cols.iter().enumerate() {
                x[(row, 1 + l)] = cov[c];
            }
            if spec.include_rtype && j > 0 {
                // indicator for response j+1 sits at p + j
                x[(row, p + j)] = 1.0;
                let base = p + k + (j - 1) * spec.p_star();
                for (s, &l) in spec.interactions.iter().enumerate() {
                    x[(row, base + s)] = cov[cov_cols[l]];
                }
            }
        }
    }
    Ok((x, spec.column_labels()))
}

pub fn build_problem(data: &LongitudinalDataset, spec: &ModelSpec) -> Result<StackedProblem, DesignError> {
    let response = build_stacked_response(data, spec)?;
    let (design, labels) = build_stacked_design(data, spec)?;
    let k = spec.k();
    let clusters = data
        .blocks()
        .iter()
        .map(|b| Cluster {
            subject: b.id.clone(),
            rows: b.rows.start * k..b.rows.end * k,
        })
        .collect();
    Ok(StackedProblem::from_parts(response, design, clusters, labels, spec.responses.clone()))
}

/// Block design of the per-response parameterisation `g(mu_itj) = X_it beta_j`:
/// response `j` owns columns `j * (p + 1) .. (j + 1) * (p + 1)`, labelled
/// `<response>:<term>`.
pub fn build_per_response_problem(
    data: &LongitudinalDataset,
    responses: &[String],
    covariates: &[String],
) -> Result<StackedProblem, DesignError> {
    let spec = ModelSpec {
        responses: responses.to_vec(),
        covariates: covariates.to_vec(),
        include_rtype: false,
        interactions: Vec::new(),
    };
    spec.validate()?;
    let response = build_stacked_response(data, &spec)?;
    let cov_cols = covariate_columns(data, &spec)?;
    let (k, p) = (spec.k(), spec.p());
    let width = p + 1;
    let mut x = DMatrix::zeros(data.n_rows() * k, k * width);
    for r in 0..data.n_rows() {
        let cov = data.covariate_row(r);
        for j in 0..k {
            let row = r * k + j;
            x[(row, j * width)] = 1.0;
            for (l, &c) in cov_cols.iter().enumerate() {
                x[(row, j * width + 1 + l)] = cov[c];
            }
        }
    }
    let mut labels = Vec::with_capacity(k * width);
    for name in responses {
        labels.push(format!("{name}:{INTERCEPT}"));
        labels.extend(covariates.iter().map(|c| format!("{name}:{c}")));
    }
    let clusters = data
        .blocks()
        .iter()
        .map(|b| Cluster {
            subject: b.id.clone(),
            rows: b.rows.start * k..b.rows.end * k,
        })
        .collect();
    Ok(StackedProblem::from_parts(response, x, clusters, labels, responses.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnRoles, LongitudinalDataset, Observation};
    use proptest::prelude::*;

    fn dataset(n: usize, t: usize, k: usize, p: usize) -> LongitudinalDataset {
        let roles = ColumnRoles {
            subject: "id".into(),
            time: "t".into(),
            responses: (1..=k).map(|j| format!("y{j}")).collect(),
            covariates: (1..=p).map(|l| format!("x{l}")).collect(),
        };
        let rows = (0..n)
            .flat_map(|i| {
                (0..t).map(move |s| Observation {
                    subject: i.to_string(),
                    time: s as i64,
                    responses: (0..k).map(|j| (100 * i + 10 * s + j) as f64).collect(),
                    covariates: (0..p).map(|l| (i as f64 + 1.0) * 0.5 + s as f64 - l as f64).collect(),
                })
            })
            .collect();
        LongitudinalDataset::from_observations(&roles, rows).unwrap()
    }

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|j| format!("{prefix}{j}")).collect()
    }

    #[test]
    fn stacking_order_is_time_major_response_minor() {
        let data = dataset(1, 2, 2, 0);
        let spec = ModelSpec {
            responses: names("y", 2),
            covariates: vec![],
            include_rtype: false,
            interactions: vec![],
        };
        let y = build_stacked_response(&data, &spec).unwrap();
        // y_{1,t=0,a}=0, y_{1,0,b}=1, y_{1,1,a}=10, y_{1,1,b}=11
        assert_eq!(y.as_slice(), &[0.0, 1.0, 10.0, 11.0]);
    }

    #[test]
    fn single_response_stacking_is_identity() {
        let data = dataset(3, 4, 1, 1);
        let spec = ModelSpec::shared(&["y1"], &["x1"]);
        let y = build_stacked_response(&data, &spec).unwrap();
        let original: Vec<f64> = (0..data.n_rows()).map(|r| data.response_row(r)[0]).collect();
        assert_eq!(y.as_slice(), original.as_slice());
    }

    #[test]
    fn mscm_shaped_stack_length() {
        let data = dataset(167, 12, 2, 1);
        let spec = ModelSpec::shared(&["y1", "y2"], &["x1"]);
        assert_eq!(build_stacked_response(&data, &spec).unwrap().len(), 167 * 12 * 2);
    }

    #[test]
    fn table_two_column_counts() {
        let covs: Vec<String> = names("x", 11);
        let refs: Vec<&str> = covs.iter().map(String::as_str).collect();
        let model1 = ModelSpec::fully_separate(&["stress", "illness"], &refs);
        assert_eq!(model1.n_columns(), 24);
        let model2 = ModelSpec::shared(&["stress", "illness"], &refs)
            .with_interactions_one_based(&[8, 9])
            .unwrap();
        assert_eq!(model2.n_columns(), 15);
        let labels = model2.column_labels();
        assert_eq!(labels[12], "rtype_2");
        assert_eq!(labels[13], "x8:rtype_2");
        assert_eq!(labels[14], "x9:rtype_2");
        let shared = ModelSpec::shared(&["a", "b"], &["u", "v"]);
        assert_eq!(shared.n_columns(), 3);
    }

    #[test]
    fn rtype_and_interaction_columns() {
        let data = dataset(2, 2, 3, 2);
        let spec = ModelSpec::shared(&["y1", "y2", "y3"], &["x1", "x2"])
            .with_interactions_one_based(&[2])
            .unwrap();
        let (x, labels) = build_stacked_design(&data, &spec).unwrap();
        assert_eq!(
            labels,
            vec!["intercept", "x1", "x2", "rtype_2", "rtype_3", "x2:rtype_2", "x2:rtype_3"]
        );
        for row in 0..x.nrows() {
            let j = row % 3;
            assert_eq!(x[(row, 3)], (j == 1) as u8 as f64);
            assert_eq!(x[(row, 4)], (j == 2) as u8 as f64);
            assert_eq!(x[(row, 5)], x[(row, 2)] * x[(row, 3)]);
            assert_eq!(x[(row, 6)], x[(row, 2)] * x[(row, 4)]);
        }
    }

    #[test]
    fn spec_errors() {
        let data = dataset(1, 1, 1, 2);
        let spec = ModelSpec::shared(&["nope"], &["x1"]);
        assert!(matches!(build_stacked_response(&data, &spec), Err(DesignError::UnknownResponse(_))));
        let bad = ModelSpec::shared(&["y1"], &["x1", "x2"]).with_interactions_one_based(&[3]);
        assert!(matches!(bad, Err(DesignError::InteractionOutOfRange { index: 3, p: 2 })));
        let mut no_rtype = ModelSpec::shared(&["y1"], &["x1"]);
        no_rtype.interactions = vec![0];
        assert_eq!(no_rtype.validate(), Err(DesignError::InteractionsWithoutRtype));
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_index_list("8,9").unwrap(), vec![8, 9]);
        assert_eq!(parse_index_list("1:3, 7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_index_list("a").is_err());
        assert!(parse_index_list("5:2").is_err());
    }

    #[test]
    fn per_response_design_matches_block_layout() {
        let data = dataset(2, 2, 2, 1);
        let prob = build_per_response_problem(&data, &names("y", 2), &names("x", 1)).unwrap();
        assert_eq!(prob.n_columns(), 4);
        assert_eq!(prob.labels[2], "y2:intercept");
        for row in 0..prob.n_rows() {
            let j = row % 2;
            assert_eq!(prob.design[(row, 2 * j)], 1.0);
            assert_eq!(prob.design[(row, 2 * (1 - j))], 0.0);
        }
    }

    proptest! {
        #[test]
        fn dimension_law(k in 1usize..5, p in 0usize..6, n in 1usize..4, t in 1usize..4, seed in any::<u64>()) {
            let data = dataset(n, t, k, p);
            let mut spec = ModelSpec {
                responses: names("y", k),
                covariates: names("x", p),
                include_rtype: true,
                interactions: Vec::new(),
            };
            // pseudo-random subset of covariates
            spec.interactions = (0..p).filter(|l| (seed >> l) & 1 == 1).collect();
            let p_star = spec.interactions.len();
            let prob = build_problem(&data, &spec).unwrap();
            prop_assert_eq!(prob.n_columns(), p + 1 + (k - 1) + (k - 1) * p_star);
            prop_assert_eq!(prob.n_rows(), data.n_rows() * k);
            prop_assert_eq!(prob.clusters.len(), n);
            for c in &prob.clusters {
                prop_assert_eq!(c.size(), t * k);
            }
            // replication of the first p+1 columns within each (i,t) block
            for r in 0..data.n_rows() {
                for j in 1..k {
                    for c in 0..=p {
                        prop_assert_eq!(prob.design[(r * k + j, c)], prob.design[(r * k, c)]);
                    }
                }
            }
            spec.include_rtype = false;
            spec.interactions.clear();
            prop_assert_eq!(build_problem(&data, &spec).unwrap().n_columns(), p + 1);
        }
    }
}
