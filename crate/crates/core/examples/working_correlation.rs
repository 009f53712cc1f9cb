//! The four working-correlation structures fitted to the same bivariate
//! binary panel, with the estimated parameters and robust standard errors.
//!
//! cargo run --release --example working_correlation

use flexgee::sim::simulate_dataset;
use flexgee::{build_problem, fit_gee, CorStruct, FamilySpec, GeeControls, ModelSpec, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig {
        n_subjects: 400,
        ..SimConfig::default()
    };
    let data = simulate_dataset(&config, &mut config.replication_rng(0))?;
    let spec = ModelSpec::shared(&["y2", "y1"], &["x1", "x2", "x1x2"]).with_interactions_one_based(&[1, 2, 3])?;
    let problem = build_problem(&data, &spec)?;

    for structure in CorStruct::ALL {
        let fit = fit_gee(&problem, &FamilySpec::probit(), structure, &GeeControls::default())?;
        println!(
            "{structure}: {} iterations, {} correlation parameters",
            fit.iterations,
            fit.n_correlation_parameters()
        );
        if let Some(alpha) = fit.correlation.alpha() {
            println!("  alpha = {alpha:.4}");
        }
        if structure == CorStruct::Unstructured {
            println!("{:.3}", fit.correlation.matrix(fit.max_cluster_size)?);
        }
        let se = fit.robust_se();
        let row: Vec<String> = fit.labels.iter().zip(se.iter()).map(|(l, s)| format!("{l} {s:.4}")).collect();
        println!("  robust SE: {}", row.join(", "));
        for w in &fit.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
