//! Turn one patient's irregular visits into the fixed 3 x F window grid,
//! then impute and standardize it.

use timeagg::cohort::{
    build_grid, impute, standardize, Outcome, Patient, Schema, StandardizationStats, VariableKind,
    Visit, WindowConfig,
};

fn main() -> timeagg::Result<()> {
    let schema = Schema::new([
        ("cdai", VariableKind::Continuous),
        ("esr", VariableKind::Continuous),
        ("prednisone", VariableKind::Binary),
    ])?;
    let patient = Patient::new(
        "demo",
        vec![
            Visit::new(0).with("cdai", 30.0).with("prednisone", 1.0),
            Visit::new(120).with("cdai", 22.0).with("esr", 40.0),
            Visit::new(150).with("cdai", 18.0),
            Visit::new(290).with("cdai", 9.5).with("prednisone", 0.0),
        ],
        Outcome::Controlled,
    )?;
    let cfg = WindowConfig::default();
    let grid = build_grid(&patient, &schema, cfg);
    print_grid("raw (NaN = unobserved)", &grid, &schema);

    let stats = StandardizationStats::fit(std::slice::from_ref(&grid), &schema);
    let filled = impute(&grid, &schema, &stats)?;
    print_grid("forward-filled", &filled, &schema);
    let z = standardize(&[filled], &schema, &stats)?;
    print_grid("standardized", &z[0], &schema);
    Ok(())
}

fn print_grid(title: &str, g: &timeagg::cohort::WindowGrid, schema: &Schema) {
    println!("{title}:");
    println!(
        "  window  {}",
        schema
            .names()
            .map(|n| format!("{n:>12}"))
            .collect::<String>()
    );
    for w in 0..g.n_windows {
        let row: String = (0..g.n_features)
            .map(|j| format!("{:>12.3}", g.get(w, j)))
            .collect();
        println!("  {w:>6}  {row}");
    }
}
