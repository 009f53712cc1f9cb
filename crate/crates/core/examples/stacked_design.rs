//! Column layout of the stacked design for shared, partly separated and
//! fully separated coefficient choices.
//!
//! cargo run --example stacked_design

use flexgee::dataset::Observation;
use flexgee::design::{build_problem, parse_index_list};
use flexgee::{ColumnRoles, LongitudinalDataset, ModelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let roles = ColumnRoles {
        subject: "id".into(),
        time: "time".into(),
        responses: vec!["y1".into(), "y2".into(), "y3".into()],
        covariates: vec!["age".into(), "dose".into()],
    };
    let rows = (0..2)
        .flat_map(|i| {
            (0..2).map(move |t| Observation {
                subject: format!("s{i}"),
                time: t,
                responses: vec![0.0, 1.0, 2.0],
                covariates: vec![40.0 + i as f64, t as f64],
            })
        })
        .collect();
    let data = LongitudinalDataset::from_observations(&roles, rows)?;

    let shared = ModelSpec::shared(&["y1", "y2", "y3"], &["age", "dose"]);
    let partial = shared.clone().with_interactions_one_based(&parse_index_list("2")?)?;
    let separate = ModelSpec::fully_separate(&["y1", "y2", "y3"], &["age", "dose"]);

    for (name, spec) in [("shared", shared), ("dose separated", partial), ("fully separate", separate)] {
        let problem = build_problem(&data, &spec)?;
        println!("{name}: {} x {}", problem.n_rows(), problem.n_columns());
        println!("  {}", problem.labels.join(", "));
    }

    let problem = build_problem(&data, &ModelSpec::fully_separate(&["y1", "y2", "y3"], &["age", "dose"]))?;
    println!("\nfirst cluster rows (subject s0):");
    for r in problem.clusters[0].rows.clone() {
        let row: Vec<String> = problem.design.row(r).iter().map(|v| format!("{v:>4}")).collect();
        println!("  y = {}  x = [{}]", problem.response[r], row.join(""));
    }
    Ok(())
}
