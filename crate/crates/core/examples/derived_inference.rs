//! Coefficients on the scale of the second response, `beta_s + beta_s'`,
//! with standard errors from the joint covariance; the fit goes through the
//! fit-file format on the way.
//!
//! cargo run --release --example derived_inference

use flexgee::inference::fit_odds_ratio;
use flexgee::sim::simulate_dataset;
use flexgee::{
    build_problem, derived_coefficient, fit_gee, per_response_coefficients, read_fit, write_fit, CorStruct,
    CovarianceSource, FamilySpec, GeeControls, ModelSpec, SimConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig {
        n_subjects: 400,
        ..SimConfig::default()
    };
    let data = simulate_dataset(&config, &mut config.replication_rng(2))?;
    let spec = ModelSpec::shared(&["y2", "y1"], &["x1", "x2", "x1x2"]).with_interactions_one_based(&[1])?;
    let fit = fit_gee(
        &build_problem(&data, &spec)?,
        &FamilySpec::logistic(),
        CorStruct::Ar1,
        &GeeControls::default(),
    )?;

    let mut bytes = Vec::new();
    write_fit(&fit, &mut bytes)?;
    let fit = read_fit(bytes.as_slice())?;

    let x1 = fit.index_of("x1").unwrap();
    let x1_y1 = fit.index_of("x1:rtype_2").unwrap();
    let d = derived_coefficient(&fit, x1, Some(x1_y1), 1.0, CovarianceSource::Robust)?;
    println!("x1 effect on y1: {:.4} (SE {:.4}, Z {:.2}, p {:.3})", d.estimate, d.std_error, d.z, d.p_value());

    for response in ["y2", "y1"] {
        println!("\n{response}");
        for d in per_response_coefficients(&fit, response, CovarianceSource::Robust)? {
            println!("  {:<10} {:>8.4} {:>8.4}  OR {:>7.3}", d.term, d.estimate, d.std_error, d.odds_ratio());
        }
    }

    let (or, warning) = fit_odds_ratio(&fit, "x2")?;
    println!("\nodds ratio for x2: {or:.3}");
    assert!(warning.is_none());
    Ok(())
}
