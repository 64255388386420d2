//! Text and CSV rendering.

use std::fmt::Write as _;

use crate::balance::BalanceReport;
use crate::cache_sim::{ratio_to_f64, SimReport};
use crate::exact::{self, Exact};
use crate::hierarchy::{cycles_to_bandwidths, LevelPrediction, PredictionTable};
use crate::layer_condition::{StencilPrediction, StreamRegime};
use crate::machine::MachineDescription;
use crate::measurements::ComparisonRow;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

fn fixed(value: &Exact, decimals: u32) -> String {
    format!(
        "{:.*}",
        decimals as usize,
        exact::to_f64(&exact::round_decimals(value, decimals))
    )
}

/// Shortest decimal that round-trips the nearest f64.
fn full(value: &Exact) -> String {
    format!("{}", exact::to_f64(value))
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(vec![]);
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Cycles per cacheline update, kernels down, levels across, whole cycles.
pub fn prediction_grid_text(table: &PredictionTable) -> String {
    let mut rows = vec![std::iter::once(table.machine.clone())
        .chain(table.levels.iter().map(|l| l.to_string()))
        .collect::<Vec<_>>()];
    for kernel_row in &table.rows {
        let Some(first) = kernel_row.first() else {
            continue;
        };
        rows.push(
            std::iter::once(first.kernel.clone())
                .chain(
                    kernel_row
                        .iter()
                        .map(|p| p.total_cycles_rounded.to_string()),
                )
                .collect(),
        );
    }
    pad_table(&rows)
}

/// One line per prediction with the per-bus breakdown.
pub fn prediction_breakdown_text(p: &LevelPrediction) -> String {
    let mut terms = vec![fixed(&p.l1_execution_cycles, 2)];
    terms.extend(
        p.transfer_contributions
            .iter()
            .map(|t| format!("{} ({} {} CL)", fixed(&t.cycles, 2), t.label, t.cachelines)),
    );
    format!(
        "{} {} on {}: {} = {} cycles/CL ({})",
        p.kernel,
        p.level,
        p.machine,
        terms.join(" + "),
        fixed(&p.total_cycles, 2),
        p.total_cycles_rounded
    )
}

const PREDICTION_HEADER: [&str; 5] = [
    "kernel",
    "level",
    "l1_cycles",
    "total_cycles",
    "total_rounded",
];

/// Full-precision predictions, one row per kernel and level. Transfer
/// columns follow the machine's buses; unused buses are 0.
pub fn prediction_csv(table: &PredictionTable, machine: &MachineDescription) -> Result<String> {
    let labels: Vec<String> = crate::hierarchy::crossings(machine)
        .iter()
        .map(|c| c.label())
        .collect();
    let mut header: Vec<String> = PREDICTION_HEADER[..3]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(labels.iter().map(|l| format!("{l}_cycles")));
    header.extend(PREDICTION_HEADER[3..].iter().map(|s| s.to_string()));
    header.extend(["real_gbs".into(), "eff_gbs".into()]);
    let mut out = csv_line(&header);
    for p in table.rows.iter().flatten() {
        let mut fields = vec![
            p.kernel.clone(),
            p.level.to_string(),
            full(&p.l1_execution_cycles),
        ];
        for label in &labels {
            let cycles = p
                .transfer_contributions
                .iter()
                .find(|t| &t.label == label)
                .map_or(Exact::from_integer(0.into()), |t| t.cycles.clone());
            fields.push(full(&cycles));
        }
        let (real, eff) = cycles_to_bandwidths(
            p.total_f64(),
            p.real_traffic_cachelines,
            p.effective_traffic_cachelines,
            machine,
        )?;
        fields.extend([
            full(&p.total_cycles),
            p.total_cycles_rounded.to_string(),
            real.to_string(),
            eff.to_string(),
        ]);
        out.push_str(&csv_line(&fields));
    }
    Ok(out)
}

pub fn balance_text(report: &BalanceReport) -> String {
    format!(
        "machine balance      {:.4} W/F\nalgorithmic balance  {:.4} W/F\nlightspeed           {:.4}\napplicable peak      {} GFlop/s\nprediction           {:.4} GFlop/s ({:.2} MFlop/s)\n",
        report.machine_balance_wf,
        report.algorithmic_balance_wf,
        report.lightspeed,
        report.applicable_peak_gflops,
        report.predicted_gflops,
        report.predicted_mflops()
    )
}

pub fn balance_csv(report: &BalanceReport) -> String {
    let mut out = csv_line(
        &[
            "machine_balance_wf",
            "algorithmic_balance_wf",
            "lightspeed",
            "peak_gflops",
            "predicted_gflops",
        ]
        .map(String::from),
    );
    out.push_str(&csv_line(&[
        report.machine_balance_wf.to_string(),
        report.algorithmic_balance_wf.to_string(),
        report.lightspeed.to_string(),
        report.applicable_peak_gflops.to_string(),
        report.predicted_gflops.to_string(),
    ]));
    out
}

pub fn regime_text(regime: &StreamRegime, n: u32, cache_bytes: u64) -> String {
    format!(
        "n = {n}, outer cache {cache_bytes} B: {} case, {} memory streams (+{} write-allocate); {}\n",
        regime.label(),
        regime.memory_streams,
        regime.rfo_streams,
        regime.condition
    )
}

pub fn stencil_prediction_text(p: &StencilPrediction) -> String {
    format!(
        "{}\npredicted performance {:.1} MFlop/s\n",
        prediction_breakdown_text(&p.prediction),
        p.mflops
    )
}

fn dash(value: Option<&Exact>, decimals: u32) -> String {
    value.map_or_else(|| "-".to_string(), |v| fixed(v, decimals))
}

/// Comparison grid: rows for %, measured cycles, GB/s and effective GB/s;
/// one column per kernel and level. Levels the machine lacks show `n/a`.
pub fn comparison_text(
    machine: &MachineDescription,
    rows: &[ComparisonRow],
    kernels: &[String],
    levels: &[crate::Level],
) -> String {
    let find = |k: &str, l: crate::Level| {
        rows.iter()
            .find(|r| r.prediction.kernel.eq_ignore_ascii_case(k) && r.prediction.level == l)
    };
    let mut header = vec![machine.name.clone()];
    let mut pct = vec!["[%]".to_string()];
    let mut cl = vec!["CL update".to_string()];
    let mut gbs = vec!["GB/s".to_string()];
    let mut eff = vec!["eff. GB/s".to_string()];
    for &level in levels {
        for k in kernels {
            header.push(format!("{level} {k}"));
            if !level.exists_on(machine) {
                for col in [&mut pct, &mut cl, &mut gbs, &mut eff] {
                    col.push("n/a".into());
                }
                continue;
            }
            match find(k, level) {
                Some(r) => {
                    pct.push(fixed(&r.ratio_percent, 1));
                    cl.push(format!("{}", r.measurement.measured_cycles_per_cl));
                    gbs.push(fixed(&r.real_gbs, 1));
                    eff.push(dash(r.effective_gbs.as_ref(), 1));
                }
                None => {
                    for col in [&mut pct, &mut cl, &mut gbs, &mut eff] {
                        col.push("-".into());
                    }
                }
            }
        }
    }
    let mut out = pad_table(&[header, pct, cl, gbs, eff]);
    for r in rows.iter().filter(|r| r.measurement.notes.is_some()) {
        let _ = writeln!(
            out,
            "note: {} {}: {}",
            r.prediction.kernel,
            r.prediction.level,
            r.measurement.notes.as_deref().unwrap_or("")
        );
    }
    out
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = csv_line(
        &[
            "machine",
            "kernel",
            "level",
            "measured_cycles",
            "predicted_cycles",
            "predicted_rounded",
            "ratio_percent",
            "exact_ratio_percent",
            "real_gbs",
            "eff_gbs",
        ]
        .map(String::from),
    );
    for r in rows {
        out.push_str(&csv_line(&[
            r.prediction.machine.clone(),
            r.prediction.kernel.clone(),
            r.prediction.level.to_string(),
            r.measurement.measured_cycles_per_cl.to_string(),
            full(&r.prediction.total_cycles),
            r.prediction.total_cycles_rounded.to_string(),
            full(&r.ratio_percent),
            full(&r.exact_ratio_percent),
            full(&r.real_gbs),
            r.effective_gbs.as_ref().map_or_else(String::new, full),
        ]));
    }
    out
}

pub fn sim_text(report: &SimReport) -> String {
    let mut rows = vec![["crossing", "inward CL/update", "outward CL/update"]
        .map(String::from)
        .to_vec()];
    for (j, label) in report.crossing_labels.iter().enumerate() {
        rows.push(vec![
            label.clone(),
            format!("{:.3}", ratio_to_f64(report.inward_per_update(j))),
            format!("{:.3}", ratio_to_f64(report.outward_per_update(j))),
        ]);
    }
    let mut out = pad_table(&rows);
    let _ = writeln!(
        out,
        "accesses {}, window {}..{}, {} cacheline updates averaged",
        report.total_accesses,
        report.window.0,
        report.window.1,
        ratio_to_f64(report.window_updates)
    );
    out
}

pub fn sim_csv(report: &SimReport) -> String {
    let mut out = csv_line(
        &[
            "crossing",
            "inward_cls_per_update",
            "outward_cls_per_update",
        ]
        .map(String::from),
    );
    for (j, label) in report.crossing_labels.iter().enumerate() {
        out.push_str(&csv_line(&[
            label.clone(),
            ratio_to_f64(report.inward_per_update(j)).to_string(),
            ratio_to_f64(report.outward_per_update(j)).to_string(),
        ]));
    }
    out
}
