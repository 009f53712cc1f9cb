//! Families, links and the quantities the solver needs from them.
//!
//! cargo run --example link_functions

use flexgee::{Family, FamilySpec, Link};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let specs = [
        FamilySpec::gaussian(),
        FamilySpec::logistic(),
        FamilySpec::probit(),
        FamilySpec::poisson(),
        FamilySpec::canonical(Family::Poisson),
    ];
    println!("{:<22} {:>8} {:>10} {:>10} {:>10}", "family", "eta", "mu", "dmu/deta", "v(mu)");
    for spec in specs {
        for eta in [-1.0, 0.0, 1.5] {
            let mu = spec.mean(eta);
            let d = spec.link().mean_derivative(eta);
            println!("{:<22} {eta:>8.2} {mu:>10.5} {d:>10.5} {:>10.5}", spec.to_string(), spec.variance(mu)?);
        }
    }

    // round trip through the link
    let mu = 0.3941263315682394;
    println!("\nlogit({mu}) = {:.6}", Link::Logit.link(mu)?);
    println!("probit(0.975) = {:.6}", Link::Probit.link(0.975)?);

    // rejected pairing
    match FamilySpec::new(Family::Poisson, Link::Logit, flexgee::Dispersion::Estimate) {
        Ok(_) => unreachable!(),
        Err(e) => println!("poisson/logit: {e}"),
    }
    Ok(())
}
