//! Invariances of the stacked fit: reparameterisation, cluster order,
//! parallel evaluation and covariance definiteness.

mod common;

use common::*;
use flexgee::design::build_per_response_problem;
use flexgee::engine::dependent_columns;
use flexgee::inference::{per_response_coefficients, CovarianceSource};
use flexgee::{build_problem, fit_gee, CorStruct, FamilySpec, GeeControls, ModelSpec};
use nalgebra::DMatrix;

fn tight() -> GeeControls {
    GeeControls {
        tol: 1e-12,
        max_iter: 200,
        parallel: false,
    }
}

fn rank(x: &DMatrix<f64>) -> usize {
    let svd = x.clone().svd(false, false);
    let top = svd.singular_values.max();
    svd.singular_values.iter().filter(|s| **s > 1e-9 * top).count()
}

#[test]
fn flexible_and_block_designs_span_the_same_space() {
    let data = bivariate_gaussian(40, 3, 1);
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let flex = build_problem(&data, &ModelSpec::fully_separate(&["ya", "yb"], &["x1", "x2"])).unwrap();
    let block = build_per_response_problem(&data, &names(&["ya", "yb"]), &names(&["x1", "x2"])).unwrap();
    assert_eq!(flex.n_columns(), block.n_columns());
    let joint = DMatrix::from_fn(flex.n_rows(), 2 * flex.n_columns(), |r, c| {
        if c < flex.n_columns() {
            flex.design[(r, c)]
        } else {
            block.design[(r, c - flex.n_columns())]
        }
    });
    assert_eq!(rank(&flex.design), flex.n_columns());
    assert_eq!(rank(&joint), flex.n_columns());
    assert!(dependent_columns(&flex.design, &flex.labels).is_empty());
}

fn check_reparameterisation(data: &flexgee::LongitudinalDataset, family: &FamilySpec, structure: CorStruct) {
    let responses = vec!["ya".to_string(), "yb".to_string()];
    let covariates = vec!["x1".to_string(), "x2".to_string()];
    let flex_spec = ModelSpec::fully_separate(&["ya", "yb"], &["x1", "x2"]);
    let flex = fit_gee(&build_problem(data, &flex_spec).unwrap(), family, structure, &tight()).unwrap();
    let block_problem = build_per_response_problem(data, &responses, &covariates).unwrap();
    let block = fit_gee(&block_problem, family, structure, &tight()).unwrap();
    assert!(flex.converged && block.converged);
    assert!((&flex.fitted - &block.fitted).amax() < 1e-8, "{structure}: fitted means differ");
    for response in &responses {
        for d in per_response_coefficients(&flex, response, CovarianceSource::Robust).unwrap() {
            let j = block.index_of(&format!("{response}:{}", d.term)).unwrap();
            assert!((d.estimate - block.beta[j]).abs() < 1e-6, "{structure} {response}:{}", d.term);
            let se = block.robust_cov[(j, j)].sqrt();
            assert!((d.std_error - se).abs() < 1e-6, "{structure} {response}:{} se", d.term);
        }
    }
    assert!((flex.dispersion - block.dispersion).abs() < 1e-8);
}

#[test]
fn full_interaction_fit_equals_per_response_fit_gaussian() {
    let data = bivariate_gaussian(120, 4, 2);
    for structure in CorStruct::ALL {
        check_reparameterisation(&data, &FamilySpec::gaussian(), structure);
    }
}

#[test]
fn full_interaction_fit_equals_per_response_fit_binary() {
    let data = bivariate_binary(200, 3, 3);
    for structure in [CorStruct::Exchangeable, CorStruct::Ar1, CorStruct::Independence] {
        check_reparameterisation(&data, &FamilySpec::logistic(), structure);
    }
}

#[test]
fn cluster_order_does_not_matter() {
    let data = bivariate_binary(90, 3, 4);
    let spec = ModelSpec::shared(&["ya", "yb"], &["x1", "x2"]).with_interactions_one_based(&[1]).unwrap();
    let problem = build_problem(&data, &spec).unwrap();
    let n = problem.n_clusters();
    let order: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
    let shuffled = problem.permute_clusters(&order);
    for structure in CorStruct::ALL {
        let a = fit_gee(&problem, &FamilySpec::logistic(), structure, &tight()).unwrap();
        let b = fit_gee(&shuffled, &FamilySpec::logistic(), structure, &tight()).unwrap();
        assert!((&a.beta - &b.beta).amax() < 1e-10, "{structure}");
        assert!((&a.robust_cov - &b.robust_cov).amax() < 1e-10, "{structure}");
        assert!((a.dispersion - b.dispersion).abs() < 1e-10);
    }
}

#[test]
fn parallel_cluster_sums_reproduce_serial_fit_exactly() {
    let data = bivariate_binary(150, 4, 5);
    let problem = build_problem(&data, &ModelSpec::fully_separate(&["ya", "yb"], &["x1", "x2"])).unwrap();
    let serial = fit_gee(&problem, &FamilySpec::logistic(), CorStruct::Unstructured, &GeeControls::default()).unwrap();
    let parallel = fit_gee(
        &problem,
        &FamilySpec::logistic(),
        CorStruct::Unstructured,
        &GeeControls {
            parallel: true,
            ..GeeControls::default()
        },
    )
    .unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn covariances_are_symmetric_positive_semidefinite() {
    let data = bivariate_binary(100, 3, 6);
    let problem = build_problem(&data, &ModelSpec::fully_separate(&["ya", "yb"], &["x1", "x2"])).unwrap();
    for structure in CorStruct::ALL {
        let fit = fit_gee(&problem, &FamilySpec::logistic(), structure, &GeeControls::default()).unwrap();
        for cov in [&fit.robust_cov, &fit.model_cov] {
            assert!((cov - cov.transpose()).amax() < 1e-12);
            let min = cov.clone().symmetric_eigen().eigenvalues.min();
            assert!(min > -1e-12 * cov.amax(), "{structure}: eigenvalue {min}");
        }
    }
}

#[test]
fn iteration_cap_flags_non_convergence() {
    let data = bivariate_binary(100, 3, 7);
    let problem = build_problem(&data, &ModelSpec::fully_separate(&["ya", "yb"], &["x1", "x2"])).unwrap();
    let fit = fit_gee(
        &problem,
        &FamilySpec::logistic(),
        CorStruct::Exchangeable,
        &GeeControls {
            tol: 1e-15,
            max_iter: 1,
            parallel: false,
        },
    )
    .unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.trace.len(), 1);
    assert!(fit.warnings.iter().any(|w| w.contains("converge")));
}

#[test]
fn rank_deficient_design_names_the_column() {
    let mut data_rows = bivariate_gaussian(20, 3, 8).observations();
    for o in &mut data_rows {
        o.covariates[1] = 2.0 * o.covariates[0];
    }
    let data = flexgee::LongitudinalDataset::from_observations(&roles(&["ya", "yb"], &["x1", "x2"]), data_rows).unwrap();
    let problem = build_problem(&data, &ModelSpec::shared(&["ya", "yb"], &["x1", "x2"])).unwrap();
    match fit_gee(&problem, &FamilySpec::gaussian(), CorStruct::Independence, &GeeControls::default()) {
        Err(flexgee::GeeError::RankDeficient(cols)) => assert_eq!(cols, vec!["x2".to_string()]),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}
