//! Generate a synthetic cohort and look at what came out.
//!
//! cargo run --release --example synth_cohort -- [seed]

use timeagg::cohort::{write_cohort, write_schema, Outcome};
use timeagg::synthgen::{generate_cohort, GeneratorConfig};

fn main() -> timeagg::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let cfg = GeneratorConfig {
        seed,
        ..GeneratorConfig::default()
    };
    let cohort = generate_cohort(&cfg)?;

    let visits: usize = cohort.patients.iter().map(|p| p.visits().len()).sum();
    println!(
        "{} patients, {} visits, {:.1}% uncontrolled",
        cohort.len(),
        visits,
        100.0 * cohort.prevalence()
    );
    println!(
        "variables: {}",
        cohort.schema.names().collect::<Vec<_>>().join(", ")
    );

    let p = &cohort.patients[0];
    println!("\n{} ({:?}):", p.id(), p.outcome());
    for v in p.visits() {
        let cdai = v
            .observations
            .get("cdai")
            .map_or("-".to_string(), |x| format!("{x:.1}"));
        println!("  day {:>4}  cdai {cdai}", v.day);
    }
    let uncontrolled = cohort
        .patients
        .iter()
        .filter(|p| p.outcome() == Outcome::Uncontrolled)
        .count();
    println!("\nuncontrolled: {uncontrolled}");

    let dir = std::env::temp_dir().join("timeagg-synth");
    std::fs::create_dir_all(&dir).map_err(|e| timeagg::Error::Data(e.to_string()))?;
    write_cohort(dir.join("cohort.jsonl"), &cohort)?;
    write_schema(dir.join("schema.json"), &cohort.schema)?;
    println!("written to {}", dir.display());
    Ok(())
}
