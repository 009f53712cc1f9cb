//! A small Monte Carlo study: bias and MSE of the parsimonious and common
//! models under each working correlation. Pass the number of replications
//! as the first argument (default 20).
//!
//! cargo run --release --example simulation_study -- 50

use flexgee::{monte_carlo, CorStruct, GeeControls, McPlan, ModelVariant, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replications = match std::env::args().nth(1) {
        Some(n) => n.parse()?,
        None => 20,
    };
    let config = SimConfig {
        replications,
        ..SimConfig::default()
    };
    let plan = McPlan {
        variants: ModelVariant::ALL.to_vec(),
        structures: CorStruct::ALL.to_vec(),
        controls: GeeControls::default(),
        parallel: true,
    };
    let (summary, _draws) = monte_carlo(&config, &plan)?;

    for cell in &summary.cells {
        println!(
            "{} / {}: {} converged, {:.2}s",
            cell.variant,
            cell.structure,
            cell.n_converged,
            cell.elapsed.as_secs_f64()
        );
        for p in &cell.params {
            println!(
                "  {:<6} truth {:>6.2} mean {:>8.4} bias {:>8.4} mse {:>8.5}",
                p.name, p.truth, p.mean, p.bias, p.mse
            );
        }
    }

    let mut csv = Vec::new();
    summary.write_csv(&mut csv)?;
    println!("\n{}", String::from_utf8(csv)?.lines().take(5).collect::<Vec<_>>().join("\n"));
    Ok(())
}
