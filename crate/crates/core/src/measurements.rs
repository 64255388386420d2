//! Measured cycles per cacheline update and their comparison to the model.

use serde::Deserialize;

use crate::exact::{self, Exact};
use crate::hierarchy::{bandwidth_gbs_exact, predict_level, Level, LevelPrediction};
use crate::kernel::KernelDescription;
use crate::machine::MachineDescription;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub machine: String,
    pub kernel: String,
    pub level: Level,
    pub measured_cycles_per_cl: f64,
    pub notes: Option<String>,
}

#[derive(Deserialize)]
struct Row {
    machine: String,
    kernel: String,
    level: String,
    cycles_per_cl: String,
    #[serde(default)]
    notes: Option<String>,
}

/// Parse measurement CSV. Names are checked against `machines` and `kernels`
/// (case-insensitive); an empty list disables the check.
pub fn load_measurements(
    document: &str,
    machines: &[&str],
    kernels: &[&str],
) -> Result<Vec<MeasurementRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Measurement {
            row: 1,
            reason: e.to_string(),
        })?
        .clone();
    let expected = ["machine", "kernel", "level", "cycles_per_cl"];
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 4
        || names[..4] != expected
        || names.len() > 5
        || (names.len() == 5 && names[4] != "notes")
    {
        return Err(Error::Measurement {
            row: 1,
            reason: format!(
                "header must be `machine,kernel,level,cycles_per_cl[,notes]`, got `{}`",
                names.join(",")
            ),
        });
    }

    let known = |list: &[&str], name: &str| {
        list.is_empty() || list.iter().any(|k| k.eq_ignore_ascii_case(name))
    };
    let mut records = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| Error::Measurement {
            row: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let fail = |reason: String| Err(Error::Measurement { row, reason });
        if record.len() < 4 || record.len() > 5 {
            return fail(format!("expected 4 or 5 fields, found {}", record.len()));
        }
        let parsed: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Measurement {
                row,
                reason: e.to_string(),
            })?;
        if !known(machines, &parsed.machine) {
            return fail(format!("unknown machine `{}`", parsed.machine));
        }
        if !known(kernels, &parsed.kernel) {
            return fail(format!("unknown kernel `{}`", parsed.kernel));
        }
        let level: Level = match parsed.level.parse() {
            Ok(level) => level,
            Err(_) => {
                return fail(format!(
                    "unknown level `{}` (use L1, L2, L3 or MEM)",
                    parsed.level
                ))
            }
        };
        let cycles: f64 = match parsed.cycles_per_cl.parse() {
            Ok(c) => c,
            Err(_) => {
                return fail(format!(
                    "cycles_per_cl `{}` is not a number",
                    parsed.cycles_per_cl
                ))
            }
        };
        if !(cycles.is_finite() && cycles > 0.0) {
            return fail(format!("cycles_per_cl must be > 0, got {cycles}"));
        }
        records.push(MeasurementRecord {
            machine: parsed.machine.to_ascii_lowercase(),
            kernel: parsed.kernel.to_ascii_lowercase(),
            level,
            measured_cycles_per_cl: cycles,
            notes: parsed.notes.filter(|n| !n.is_empty()),
        });
    }
    Ok(records)
}

/// Bundled measurements for the bundled machines and builtin kernels.
pub fn bundled_measurements() -> Result<Vec<MeasurementRecord>> {
    let text = crate::bundled::measurements_text()?;
    load_measurements(
        &text,
        &crate::bundled::MACHINE_NAMES,
        &crate::kernel::BUILTIN_NAMES,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub prediction: LevelPrediction,
    pub measurement: MeasurementRecord,
    /// Whole-cycle prediction (as tabulated) over measured, in percent.
    pub ratio_percent: Exact,
    /// Unrounded prediction over measured, in percent.
    pub exact_ratio_percent: Exact,
    pub real_gbs: Exact,
    /// `None` where it equals the real bandwidth (no write-allocate or
    /// write-back traffic at the exercised bus).
    pub effective_gbs: Option<Exact>,
}

impl ComparisonRow {
    pub fn ratio_f64(&self) -> f64 {
        exact::to_f64(&self.ratio_percent)
    }

    pub fn real_gbs_f64(&self) -> f64 {
        exact::to_f64(&self.real_gbs)
    }

    pub fn effective_gbs_f64(&self) -> Option<f64> {
        self.effective_gbs.as_ref().map(exact::to_f64)
    }

    /// The model predicted more cycles than were measured.
    pub fn model_pessimistic(&self) -> bool {
        self.ratio_percent > exact::int(100)
    }
}

/// Compare every record for `machine` against the model. Records for other
/// machines are skipped; a record naming an unknown kernel is an error.
pub fn compare(
    records: &[MeasurementRecord],
    machine: &MachineDescription,
    kernels: &[KernelDescription],
) -> Result<Vec<ComparisonRow>> {
    records
        .iter()
        .filter(|r| r.machine.eq_ignore_ascii_case(&machine.name))
        .map(|r| {
            let kernel = kernels
                .iter()
                .find(|k| k.name.eq_ignore_ascii_case(&r.kernel))
                .ok_or_else(|| {
                    Error::Config(format!("no kernel description for `{}`", r.kernel))
                })?;
            compare_one(r, machine, kernel)
        })
        .collect()
}

pub fn compare_one(
    record: &MeasurementRecord,
    machine: &MachineDescription,
    kernel: &KernelDescription,
) -> Result<ComparisonRow> {
    let prediction = predict_level(kernel, machine, record.level)?;
    let measured = exact::from_f64(record.measured_cycles_per_cl);
    let hundred = exact::int(100);
    let ratio_percent = exact::int(prediction.total_cycles_rounded) * &hundred / &measured;
    let exact_ratio_percent = &prediction.total_cycles * &hundred / &measured;
    let real_gbs = bandwidth_gbs_exact(&measured, prediction.real_traffic_cachelines, machine);
    let effective_gbs = (prediction.real_traffic_cachelines
        != prediction.effective_traffic_cachelines)
        .then(|| bandwidth_gbs_exact(&measured, prediction.effective_traffic_cachelines, machine));
    Ok(ComparisonRow {
        prediction,
        measurement: record.clone(),
        ratio_percent,
        exact_ratio_percent,
        real_gbs,
        effective_gbs,
    })
}
