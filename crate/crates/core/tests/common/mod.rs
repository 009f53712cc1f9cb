#![allow(dead_code)]

use flexgee::dataset::{ColumnRoles, LongitudinalDataset, Observation};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn roles(responses: &[&str], covariates: &[&str]) -> ColumnRoles {
    ColumnRoles {
        subject: "id".into(),
        time: "time".into(),
        responses: responses.iter().map(|s| s.to_string()).collect(),
        covariates: covariates.iter().map(|s| s.to_string()).collect(),
    }
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Clustered binary data with a subject random intercept: response `y`,
/// covariates `x1` (continuous, time varying) and `x2` (binary, subject level).
pub fn logistic_clusters(n: usize, m: usize, seed: u64) -> LongitudinalDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..n {
        let u = 0.7 * normal(&mut rng);
        let x2 = if rng.random::<f64>() < 0.4 { 1.0 } else { 0.0 };
        for t in 0..m {
            let x1 = normal(&mut rng) + 0.2 * t as f64;
            let p = expit(-0.4 + 0.8 * x1 - 0.6 * x2 + u);
            let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
            rows.push(Observation {
                subject: format!("s{i}"),
                time: t as i64,
                responses: vec![y],
                covariates: vec![x1, x2],
            });
        }
    }
    LongitudinalDataset::from_observations(&roles(&["y"], &["x1", "x2"]), rows).unwrap()
}

/// Clustered continuous data with unequal cluster sizes (between `m_min`
/// and `m_max`), response `y`, covariates `x1`, `x2`.
pub fn gaussian_clusters(n: usize, m_min: usize, m_max: usize, seed: u64) -> LongitudinalDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..n {
        let m = rng.random_range(m_min..=m_max);
        let u = normal(&mut rng);
        let x2 = normal(&mut rng);
        for t in 0..m {
            let x1 = t as f64 + 0.5 * normal(&mut rng);
            let y = 1.0 + 0.5 * x1 - 0.8 * x2 + u + normal(&mut rng) * (1.0 + 0.3 * x1.abs());
            rows.push(Observation {
                subject: format!("s{i}"),
                time: t as i64,
                responses: vec![y],
                covariates: vec![x1, x2],
            });
        }
    }
    LongitudinalDataset::from_observations(&roles(&["y"], &["x1", "x2"]), rows).unwrap()
}

/// Two correlated continuous responses `ya`, `yb` with different
/// coefficients, covariates `x1`, `x2`; balanced clusters of size `t`.
pub fn bivariate_gaussian(n: usize, t: usize, seed: u64) -> LongitudinalDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..n {
        let u = normal(&mut rng);
        let x2 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        for s in 0..t {
            let x1 = normal(&mut rng);
            let ya = 0.5 + 1.0 * x1 + 0.3 * x2 + u + normal(&mut rng);
            let yb = -0.2 + 0.4 * x1 - 0.5 * x2 + 0.6 * u + normal(&mut rng);
            rows.push(Observation {
                subject: format!("s{i}"),
                time: s as i64,
                responses: vec![ya, yb],
                covariates: vec![x1, x2],
            });
        }
    }
    LongitudinalDataset::from_observations(&roles(&["ya", "yb"], &["x1", "x2"]), rows).unwrap()
}

/// Two correlated binary responses `ya`, `yb`, logistic margins.
pub fn bivariate_binary(n: usize, t: usize, seed: u64) -> LongitudinalDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..n {
        let u = 0.8 * normal(&mut rng);
        let x2 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        for s in 0..t {
            let x1 = normal(&mut rng);
            let pa = expit(-0.3 + 0.7 * x1 + 0.4 * x2 + u);
            let pb = expit(0.2 - 0.5 * x1 + 0.1 * x2 + u);
            let ya = if rng.random::<f64>() < pa { 1.0 } else { 0.0 };
            let yb = if rng.random::<f64>() < pb { 1.0 } else { 0.0 };
            rows.push(Observation {
                subject: format!("s{i}"),
                time: s as i64,
                responses: vec![ya, yb],
                covariates: vec![x1, x2],
            });
        }
    }
    LongitudinalDataset::from_observations(&roles(&["ya", "yb"], &["x1", "x2"]), rows).unwrap()
}

/// Logistic maximum likelihood by Newton-Raphson on the log-likelihood,
/// written against plain matrices. Returns `(beta, inverse observed information)`.
pub fn newton_logistic(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let q = x.ncols();
    let mut beta = DVector::zeros(q);
    for _ in 0..100 {
        let mut grad = DVector::zeros(q);
        let mut hess = DMatrix::zeros(q, q);
        for r in 0..x.nrows() {
            let xr = x.row(r).transpose();
            let p = expit(xr.dot(&beta));
            grad += &xr * (y[r] - p);
            hess += &xr * xr.transpose() * (p * (1.0 - p));
        }
        let step = hess.clone().lu().solve(&grad).unwrap();
        beta += &step;
        if step.amax() < 1e-13 {
            break;
        }
    }
    let mut info = DMatrix::zeros(q, q);
    for r in 0..x.nrows() {
        let xr = x.row(r).transpose();
        let p = expit(xr.dot(&beta));
        info += &xr * xr.transpose() * (p * (1.0 - p));
    }
    (beta, info.try_inverse().unwrap())
}

/// Normal-equations least squares. Returns `(beta, sigma^2 (X'X)^{-1}, residuals)`
/// with `sigma^2 = RSS / (n - q)`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let xtx = x.transpose() * x;
    let xtx_inv = xtx.try_inverse().unwrap();
    let beta = &xtx_inv * x.transpose() * y;
    let resid = y - x * &beta;
    let sigma2 = resid.norm_squared() / (x.nrows() - x.ncols()) as f64;
    (beta, xtx_inv * sigma2, resid)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub const MSCM_COVARIATES: [&str; 11] = [
    "married", "education", "employed", "chlth", "mhlth", "race", "csex", "housize", "bstress", "billness", "week",
];

/// Synthetic data in the analysis-ready MSCM layout: responses `stress`,
/// `illness`; days 17..=28; 11 covariates, `week = (day - 22) / 7`.
pub fn mscm_like(n: usize, seed: u64) -> LongitudinalDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..n {
        let u = 0.6 * normal(&mut rng);
        let bin = |rng: &mut ChaCha20Rng, p: f64| if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        let subject: Vec<f64> = vec![
            bin(&mut rng, 0.5),
            bin(&mut rng, 0.6),
            bin(&mut rng, 0.4),
            bin(&mut rng, 0.3),
            bin(&mut rng, 0.3),
            bin(&mut rng, 0.5),
            bin(&mut rng, 0.5),
            bin(&mut rng, 0.4),
            rng.random::<f64>() * 0.5,
            rng.random::<f64>() * 0.5,
        ];
        for day in 17..=28i64 {
            let week = (day - 22) as f64 / 7.0;
            let eta_s = -1.8 - 0.4 * week + 0.3 * subject[7] + 2.0 * subject[8] + u;
            let eta_i = -1.4 - 0.2 * week + 0.2 * subject[3] + 1.5 * subject[9] + u;
            let stress = bin(&mut rng, expit(eta_s));
            let illness = bin(&mut rng, expit(eta_i));
            let mut covariates = subject.clone();
            covariates.push(week);
            rows.push(Observation {
                subject: (i + 1).to_string(),
                time: day,
                responses: vec![stress, illness],
                covariates,
            });
        }
    }
    LongitudinalDataset::from_observations(&roles(&["stress", "illness"], &MSCM_COVARIATES), rows).unwrap()
}

pub fn write_csv(data: &LongitudinalDataset, path: &std::path::Path) {
    data.write_csv(std::fs::File::create(path).unwrap(), b',').unwrap();
}
