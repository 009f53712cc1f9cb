//! End-to-end runs of the `flexgee` binary.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use tempfile::TempDir;

fn flexgee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexgee")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn csv_rows(path: &str) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

fn mscm_fixture(dir: &TempDir) -> String {
    let path = p(dir, "mscm.csv");
    write_csv(&mscm_like(167, 3), Path::new(&path));
    path
}

#[test]
fn fit_model_two_layout_gives_fifteen_coefficients_and_reports() {
    let dir = TempDir::new().unwrap();
    let data = mscm_fixture(&dir);
    let covs = MSCM_COVARIATES.join(",");
    let (fit, coef, corr) = (p(&dir, "m2.fit"), p(&dir, "m2.csv"), p(&dir, "m2corr.csv"));
    let o = flexgee(&[
        "fit", "--data", &data, "--responses", "stress,illness", "--covariates", &covs, "--rtype",
        "--interaction", "8,9", "--family", "binomial", "--corstr", "exchangeable", "--out", &fit,
        "--coef-csv", &coef, "--corr-csv", &corr,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("# link = logit"));
    assert!(out.contains("# corstr = exchangeable"));
    assert!(out.contains("housize:rtype_2"));
    let rows = csv_rows(&coef);
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[0][0], "term");
    assert_eq!(rows[13][0], "rtype_2");
    assert_eq!(rows[14][0], "housize:rtype_2");
    assert_eq!(rows[15][0], "bstress:rtype_2");
    assert_eq!(csv_rows(&corr).len(), 24);

    // model 1: every covariate separated
    let fit1 = p(&dir, "m1.fit");
    let o = flexgee(&[
        "fit", "--data", &data, "--responses", "stress,illness", "--covariates", &covs, "--rtype",
        "--interaction", "1:11", "--family", "binomial", "--corstr", "exchangeable", "--out", &fit1,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = flexgee(&["report", &fit1, "--compare", &fit, "--derive", "response=illness"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("coefficients for illness"));
    assert!(out.contains("OR"));
    assert!(out.contains("gain %"));
    assert!(out.contains("rtype_2"));

    let o = flexgee(&["report", &fit, "--derive", "illness"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstructured_fit_reports_276_correlation_parameters() {
    let dir = TempDir::new().unwrap();
    let data = mscm_fixture(&dir);
    let covs = MSCM_COVARIATES.join(",");
    let o = flexgee(&[
        "fit", "--data", &data, "--responses", "stress,illness", "--covariates", &covs, "--rtype",
        "--interaction", "8,9", "--family", "binomial", "--corstr", "unstructured", "--out", &p(&dir, "m3.fit"),
    ]);
    let out = stdout(&o);
    assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", stderr(&o));
    assert!(out.contains("unstructured (276 parameters, cluster size 24)"), "{out}");
}

#[test]
fn interaction_index_beyond_covariates_is_a_spec_error() {
    let dir = TempDir::new().unwrap();
    let data = mscm_fixture(&dir);
    let o = flexgee(&[
        "fit", "--data", &data, "--responses", "stress,illness", "--covariates", &MSCM_COVARIATES.join(","),
        "--rtype", "--interaction", "1:12", "--family", "binomial", "--out", &p(&dir, "x.fit"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("design:"), "{}", stderr(&o));
}

#[test]
fn missing_cells_fail_unless_rows_are_dropped() {
    let dir = TempDir::new().unwrap();
    let path = p(&dir, "gaps.csv");
    let mut text = String::from("id,time,ya,yb,x1\n");
    for i in 0..30 {
        for t in 0..3 {
            let ya = if i == 4 && t == 1 { "NA".to_string() } else { ((i + t) % 2).to_string() };
            text += &format!("{i},{t},{ya},{},{}\n", (i * t) % 2, (i as f64 * 0.37 + t as f64).sin());
        }
    }
    std::fs::write(&path, text).unwrap();
    let base = ["fit", "--data", &path, "--responses", "ya,yb", "--covariates", "x1", "--family", "binomial"];
    let fit = p(&dir, "g.fit");
    let mut args = base.to_vec();
    args.extend(["--out", &fit]);
    let o = flexgee(&args);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 15"), "{}", stderr(&o));
    args.push("--drop-incomplete");
    let o = flexgee(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("30 subjects, 89 rows, 178 stacked observations"));
}

#[test]
fn non_convergence_exits_four_and_still_writes_the_fit() {
    let dir = TempDir::new().unwrap();
    let data = mscm_fixture(&dir);
    let fit = p(&dir, "nc.fit");
    let o = flexgee(&[
        "fit", "--data", &data, "--responses", "stress,illness", "--covariates", "week,bstress", "--rtype",
        "--family", "binomial", "--corstr", "exchangeable", "--maxit", "1", "--tol", "1e-14", "--out", &fit,
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("NOT CONVERGED"));
    assert!(stdout(&o).contains("iteration   1"));
    assert!(Path::new(&fit).exists());
    let o = flexgee(&["report", &fit, "--model-based"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("model-based SE"));
}

#[test]
fn config_file_supplies_roles_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let data = mscm_fixture(&dir);
    let cfg = p(&dir, "fit.cfg");
    std::fs::write(
        &cfg,
        format!(
            "data = {data}\nresponses = stress, illness\ncovariates = week, bstress\nrtype = true\nfamily = binomial\ncorstr = ar1\nout = {}\n",
            p(&dir, "c.fit")
        ),
    )
    .unwrap();
    let o = flexgee(&["fit", "--config", &cfg, "--corstr", "exchangeable"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("# corstr = exchangeable"));
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let o = flexgee(&["fit", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_smoke_run_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b, raw) = (p(&dir, "a.csv"), p(&dir, "b.csv"), p(&dir, "raw.csv"));
    let common = ["simulate", "--seed", "1", "--replications", "4", "--subjects", "80"];
    let mut args = common.to_vec();
    args.extend(["--out", &a, "--raw", &raw]);
    let o = flexgee(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("fit time"));
    let mut args = common.to_vec();
    args.extend(["--out", &b, "--serial"]);
    assert_eq!(flexgee(&args).status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rows = csv_rows(&a);
    assert_eq!(rows[0], ["parameter", "model", "structure", "mean", "bias", "mse", "n_converged"]);
    // 4 structures x (4 + 8) parameters
    assert_eq!(rows.len(), 1 + 4 * 12);
    assert!(csv_rows(&raw).len() > 1);

    let o = flexgee(&["simulate", "--replications", "0", "--out", &p(&dir, "z.csv")]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_daily(path: &str, subjects: usize, first_day: i64) {
    let mut text = String::from("id,day,stress,illness,married\n");
    for i in 1..=subjects {
        let start = if i == 2 { first_day } else { 1 };
        for day in start..=28 {
            text += &format!("{i},{day},{},{},{}\n", (i as i64 + day) % 2, (i as i64 * day) % 3 / 2, i % 2);
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn preprocess_builds_baseline_and_week_columns() {
    let dir = TempDir::new().unwrap();
    let (raw, out) = (p(&dir, "daily.csv"), p(&dir, "ready.csv"));
    write_daily(&raw, 5, 1);
    let args = [
        "preprocess", "--data", &raw, "--time", "day", "--responses", "stress,illness", "--covariates", "married",
        "--baseline", "1:16", "--window", "17:28", "--time-offset", "22", "--time-divisor", "7", "--time-name",
        "week", "--out", &out,
    ];
    let o = flexgee(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["id", "day", "stress", "illness", "married", "bstress", "billness", "week"]);
    assert_eq!(rows.len(), 1 + 5 * 12);
    let weeks: Vec<f64> = rows[1..].iter().map(|r| r[7].parse().unwrap()).collect();
    let (lo, hi) = weeks.iter().fold((f64::MAX, f64::MIN), |(a, b), w| (a.min(*w), b.max(*w)));
    assert!((lo + 5.0 / 7.0).abs() < 1e-15 && (hi - 6.0 / 7.0).abs() < 1e-15);

    write_daily(&raw, 5, 17);
    let o = flexgee(&args);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("baseline window: 2"), "{}", stderr(&o));
}
