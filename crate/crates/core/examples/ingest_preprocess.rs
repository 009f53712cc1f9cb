//! Reads a daily long-format file, derives baseline means over days 1-16
//! and keeps days 17-28 with `week = (day - 22) / 7`.
//!
//! cargo run --example ingest_preprocess

use flexgee::dataset::size_histogram;
use flexgee::{ingest_long, preprocess_baseline, ColumnRoles, IngestOptions, PreprocessSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut text = String::from("id,day,stress,illness,married\n");
    for id in 1..=6 {
        let married = id % 2;
        for day in 1..=28 {
            let stress = u8::from(rng.random_bool(0.2));
            let illness = u8::from(rng.random_bool(0.15));
            text += &format!("{id},{day},{stress},{illness},{married}\n");
        }
    }

    let roles = ColumnRoles {
        subject: "id".into(),
        time: "day".into(),
        responses: vec!["stress".into(), "illness".into()],
        covariates: vec!["married".into()],
    };
    let daily = ingest_long(text.as_bytes(), &roles, IngestOptions::default())?;
    println!("{} subjects, {} rows", daily.n_subjects(), daily.n_rows());

    let spec = PreprocessSpec {
        analysis_window: (17, 28),
        baseline_window: (1, 16),
        baseline_names: vec!["bstress".into(), "billness".into()],
        time_offset: 22.0,
        time_divisor: 7.0,
        time_name: "week".into(),
    };
    let ready = preprocess_baseline(&daily, &spec)?;
    println!("covariates after preprocessing: {:?}", ready.covariate_names());
    println!("rows per subject: {:?}", size_histogram(&ready));

    let mut out = Vec::new();
    ready.write_csv(&mut out, b',')?;
    for line in String::from_utf8(out)?.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
