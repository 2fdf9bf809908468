use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cohort, Outcome, Patient, Schema, Visit, WindowGrid};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VisitRecord {
    day: u32,
    #[serde(default)]
    obs: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatientRecord {
    id: String,
    outcome: Outcome,
    visits: Vec<VisitRecord>,
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("{}: bad schema: {e}", path.display())))
}

pub fn write_schema(path: impl AsRef<Path>, schema: &Schema) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(schema)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a JSON-Lines cohort; blank lines are skipped.
pub fn read_cohort(path: impl AsRef<Path>, schema: &Schema) -> Result<Cohort> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut patients = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PatientRecord = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        let visits = rec
            .visits
            .into_iter()
            .map(|v| Visit {
                day: v.day,
                observations: v.obs,
            })
            .collect();
        let p = Patient::new(rec.id, visits, rec.outcome)
            .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        patients.push(p);
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = patients.iter().find(|p| !seen.insert(p.id())) {
        return Err(Error::data(format!(
            "{}: duplicate patient id `{}`",
            path.display(),
            dup.id()
        )));
    }
    Cohort::new(schema.clone(), patients)
}

pub fn write_cohort(path: impl AsRef<Path>, cohort: &Cohort) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for p in &cohort.patients {
        let rec = PatientRecord {
            id: p.id().to_string(),
            outcome: p.outcome(),
            visits: p
                .visits()
                .iter()
                .map(|v| VisitRecord {
                    day: v.day,
                    obs: v.observations.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One row per (patient, window): `patient_id,window,<variables...>`.
pub fn write_grids_csv(
    path: impl AsRef<Path>,
    schema: &Schema,
    grids: &[WindowGrid],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let header: Vec<&str> = ["patient_id", "window"]
        .into_iter()
        .chain(schema.names())
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for g in grids {
        for w in 0..g.n_windows {
            let cells: Vec<String> = (0..g.n_features).map(|j| fmt_cell(g.get(w, j))).collect();
            writeln!(out, "{},{},{}", g.patient_id, w, cells.join(","))
                .map_err(|e| Error::io(path, e))?;
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn fmt_cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}
