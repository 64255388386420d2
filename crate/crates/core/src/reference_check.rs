//! Self-check against the published reference numbers for the two bundled
//! machines. Each check reports PASS or FAIL with the values it compared.

use std::fmt;

use crate::balance::{balance_prediction, QuotePrecision};
use crate::bundled;
use crate::exact;
use crate::hierarchy::{predict_level, prediction_table, Level};
use crate::kernel::KernelDescription;
use crate::layer_condition::{
    hierarchy_prediction, regime_balance_prediction, traffic_preset, StreamRegime,
};
use crate::machine::MachineDescription;
use crate::measurements::{compare, load_measurements};
use crate::Result;

/// Whole-cycle predictions, kernels load/store/copy/triad.
pub const CORE2_GRID: [(Level, [i64; 4]); 3] = [
    (Level::L1, [4, 4, 4, 8]),
    (Level::L2, [6, 8, 10, 16]),
    (Level::Memory, [20, 36, 52, 72]),
];

pub const NEHALEM_GRID: [(Level, [i64; 4]); 4] = [
    (Level::L1, [4, 4, 4, 8]),
    (Level::L2, [6, 8, 10, 16]),
    (Level::L3, [8, 12, 16, 24]),
    (Level::Memory, [15, 26, 36, 51]),
];

/// Published ratio (%), real GB/s and effective GB/s per kernel and level.
pub type ComparisonCell = (Level, &'static str, f64, f64, Option<f64>);

pub const CORE2_COMPARISON: [ComparisonCell; 12] = [
    (Level::L1, "load", 96.0, 43.5, None),
    (Level::L1, "store", 93.8, 42.5, None),
    (Level::L1, "copy", 92.7, 84.1, None),
    (Level::L1, "triad", 99.5, 67.7, None),
    (Level::L2, "load", 83.1, 25.1, None),
    (Level::L2, "store", 94.1, 42.7, Some(21.3)),
    (Level::L2, "copy", 74.9, 40.7, Some(27.2)),
    (Level::L2, "triad", 70.4, 31.9, Some(23.9)),
    (Level::Memory, "load", 67.6, 6.1, None),
    (Level::Memory, "store", 49.9, 5.0, Some(2.5)),
    (Level::Memory, "copy", 58.7, 6.1, Some(4.1)),
    (Level::Memory, "triad", 66.6, 6.7, Some(5.0)),
];

pub const NEHALEM_COMPARISON: [ComparisonCell; 16] = [
    (Level::L1, "load", 97.1, 41.3, None),
    (Level::L1, "store", 95.3, 40.5, None),
    (Level::L1, "copy", 94.1, 79.8, None),
    (Level::L1, "triad", 96.0, 61.2, None),
    (Level::L2, "load", 83.5, 23.7, None),
    (Level::L2, "store", 120.9, 51.5, Some(25.7)),
    (Level::L2, "copy", 91.4, 46.7, Some(31.1)),
    (Level::L2, "triad", 91.7, 39.0, Some(29.3)),
    (Level::L3, "load", 95.3, 20.3, None),
    (Level::L3, "store", 121.4, 34.4, Some(17.2)),
    (Level::L3, "copy", 103.9, 33.2, Some(22.1)),
    (Level::L3, "triad", 96.3, 27.3, Some(20.5)),
    (Level::Memory, "load", 106.8, 12.1, None),
    (Level::Memory, "store", 142.2, 18.6, Some(9.3)),
    (Level::Memory, "copy", 123.0, 17.4, Some(11.6)),
    (Level::Memory, "triad", 119.4, 15.9, Some(11.9)),
];

/// Applicable peak for the Jacobi add/multiply mix on Nehalem, GFlop/s.
pub const JACOBI_APPLICABLE_PEAK_GFLOPS: f64 = 6.65;

/// Stream count, `B_A`, lightspeed, MFlop/s.
pub const STENCIL_BALANCE_ROWS: [(u32, f64, f64, f64); 3] = [
    (6, 0.875, 0.299, 1988.0),
    (4, 0.625, 0.419, 2786.0),
    (2, 0.375, 0.699, 4648.0),
];

pub const JACOBI_NEHALEM_TERMS: [i64; 4] = [24, 8, 10, 20];
pub const JACOBI_NEHALEM_TOTAL: i64 = 62;
pub const JACOBI_NEHALEM_MFLOPS: f64 = 2745.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn check(name: impl Into<String>, pass: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        pass,
        detail,
    }
}

fn bundled_machine(name: &str) -> MachineDescription {
    match name {
        "core2" => bundled::core2(),
        _ => bundled::nehalem(),
    }
}

fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol + 1e-9
}

/// Whole-cycle grid: L1/L2/L3 cells exact, memory cells within one cycle.
pub fn check_grid(machine_name: &str, grid: &[(Level, [i64; 4])]) -> Result<CheckResult> {
    let machine = bundled_machine(machine_name);
    let table = prediction_table(&machine, &KernelDescription::builtins())?;
    let mut mismatches = Vec::new();
    let mut cells = 0;
    for (level, expected) in grid {
        for (kernel, &want) in crate::kernel::BUILTIN_NAMES.iter().zip(expected) {
            cells += 1;
            let got = table.get(kernel, *level).map(|p| p.total_cycles_rounded);
            let tol = if *level == Level::Memory { 1 } else { 0 };
            match got {
                Some(g) if (g - want).abs() <= tol => {
                    if g != want {
                        mismatches
                            .push(format!("{kernel} {level} {g} (published {want}, within 1)"));
                    }
                }
                Some(g) => {
                    return Ok(check(
                        format!("cycle grid {machine_name}"),
                        false,
                        format!("{kernel} {level}: {g} vs {want}"),
                    ))
                }
                None => {
                    return Ok(check(
                        format!("cycle grid {machine_name}"),
                        false,
                        format!("{kernel} {level}: missing"),
                    ))
                }
            }
        }
    }
    let mut detail = format!("{cells} cells");
    if !mismatches.is_empty() {
        detail.push_str("; ");
        detail.push_str(&mismatches.join(", "));
    }
    Ok(check(format!("cycle grid {machine_name}"), true, detail))
}

/// `B_M = 1` on a 11.32 GFlop/s core: triad without and with write-allocate.
pub fn check_balance_example() -> Result<Vec<CheckResult>> {
    let peak = bundled::core2().peak_gflops();
    let kernel = KernelDescription::triad();
    let mut out = Vec::new();
    for (rfo, ba_want, gf_want) in [(false, 1.5, 7.47), (true, 2.0, 5.66)] {
        let ba = crate::balance::algorithmic_balance(&kernel, rfo)?;
        let r = balance_prediction(1.0, ba, peak)?;
        let ok = within(r.machine_balance_wf, 1.0, 0.01)
            && within(ba, ba_want, 0.01)
            && within(r.predicted_gflops, gf_want, 0.01);
        out.push(check(
            format!(
                "balance example triad{}",
                if rfo { " with RFO" } else { "" }
            ),
            ok,
            format!(
                "B_M {:.3}, B_A {:.3}, lightspeed {:.4}, {:.3} GFlop/s (published {gf_want})",
                r.machine_balance_wf, ba, r.lightspeed, r.predicted_gflops
            ),
        ));
    }
    Ok(out)
}

/// Jacobi regimes on Nehalem with 3-figure intermediates.
pub fn check_stencil_balance() -> Result<Vec<CheckResult>> {
    let stencil = bundled::jacobi3d();
    let machine = bundled::nehalem();
    let mut out = Vec::new();
    for (streams, ba_want, ls_want, mflops_want) in STENCIL_BALANCE_ROWS {
        let regime = StreamRegime::with_streams(&stencil, streams)?;
        let r = regime_balance_prediction(
            &stencil,
            &machine,
            &regime,
            JACOBI_APPLICABLE_PEAK_GFLOPS,
            QuotePrecision::SignificantFigures(3),
        )?;
        let ba = exact::to_f64(&exact::round_decimals(
            &exact::from_f64(r.algorithmic_balance_wf),
            3,
        ));
        let ls = exact::to_f64(&exact::round_decimals(&exact::from_f64(r.lightspeed), 3));
        let ok = ba == ba_want && ls == ls_want && within(r.predicted_mflops(), mflops_want, 2.0);
        out.push(check(
            format!("stencil balance {streams} streams"),
            ok,
            format!(
                "B_A {ba:.3}, lightspeed {ls:.3}, {:.1} MFlop/s (published {mflops_want})",
                r.predicted_mflops()
            ),
        ));
    }
    Ok(out)
}

/// Triad with data in L2 on Core 2: 8 cycles L1 + 8 cycles transfer.
pub fn check_triad_l2() -> Result<CheckResult> {
    let p = predict_level(&KernelDescription::triad(), &bundled::core2(), Level::L2)?;
    let l1 = p.l1_execution_cycles.clone();
    let xfer = p.transfer_total();
    let ok = l1 == exact::int(8) && xfer == exact::int(8) && p.total_cycles == exact::int(16);
    Ok(check(
        "triad L2 core2 decomposition",
        ok,
        format!(
            "{} + {} = {}",
            exact::to_f64(&l1),
            exact::to_f64(&xfer),
            exact::to_f64(&p.total_cycles)
        ),
    ))
}

/// Jacobi on Nehalem: 24 + 8 + 10 + 20 = 62 cycles, about 2745 MFlop/s.
pub fn check_jacobi_nehalem() -> Result<CheckResult> {
    let traffic = traffic_preset("jacobi-nehalem").expect("bundled preset");
    let p = hierarchy_prediction(&bundled::jacobi3d(), &bundled::nehalem(), &traffic)?;
    let mut terms = vec![exact::round_to_int(&p.prediction.l1_execution_cycles)];
    terms.extend(
        p.prediction
            .transfer_contributions
            .iter()
            .map(|t| exact::round_to_int(&t.cycles)),
    );
    let ok = terms == JACOBI_NEHALEM_TERMS
        && p.prediction.total_cycles_rounded == JACOBI_NEHALEM_TOTAL
        && within(p.mflops, JACOBI_NEHALEM_MFLOPS, 15.0);
    Ok(check(
        "jacobi nehalem decomposition",
        ok,
        format!(
            "{} = {} cycles ({:.2}), {:.1} MFlop/s (published {JACOBI_NEHALEM_MFLOPS})",
            terms
                .iter()
                .map(i64::to_string)
                .collect::<Vec<_>>()
                .join(" + "),
            p.prediction.total_cycles_rounded,
            p.prediction.total_f64(),
            p.mflops
        ),
    ))
}

/// Ratio, real and effective bandwidth cells, each within 0.3.
pub fn check_comparison(machine_name: &str, cells: &[ComparisonCell]) -> Result<CheckResult> {
    let machine = bundled_machine(machine_name);
    let records = load_measurements(
        bundled::MEASUREMENTS_CSV,
        &bundled::MACHINE_NAMES,
        &crate::kernel::BUILTIN_NAMES,
    )?;
    let rows = compare(&records, &machine, &KernelDescription::builtins())?;
    let mut misses = Vec::new();
    let mut checked = 0;
    for &(level, kernel, pct, gbs, eff) in cells {
        let Some(row) = rows
            .iter()
            .find(|r| r.prediction.level == level && r.prediction.kernel == kernel)
        else {
            misses.push(format!("{kernel} {level}: no measurement"));
            continue;
        };
        let mut cmp = |what: &str, got: Option<f64>, want: Option<f64>| {
            checked += 1;
            let ok = match (got, want) {
                (Some(g), Some(w)) => within(g, w, 0.3),
                (None, None) => true,
                _ => false,
            };
            if !ok {
                misses.push(format!(
                    "{kernel} {level} {what} {} vs {}",
                    got.map_or("-".into(), |g| format!("{g:.2}")),
                    want.map_or("-".into(), |w| format!("{w:.1}"))
                ));
            }
        };
        cmp("%", Some(row.ratio_f64()), Some(pct));
        cmp("GB/s", Some(row.real_gbs_f64()), Some(gbs));
        cmp("eff. GB/s", row.effective_gbs_f64(), eff);
    }
    let detail = if misses.is_empty() {
        format!("{checked} cells within 0.3")
    } else {
        format!(
            "{} of {checked} cells off: {}",
            misses.len(),
            misses.join("; ")
        )
    };
    Ok(check(
        format!("measured comparison {machine_name}"),
        misses.is_empty(),
        detail,
    ))
}

/// Every reference check, in a fixed order.
pub fn run_all() -> Result<Vec<CheckResult>> {
    let mut out = vec![
        check_grid("core2", &CORE2_GRID)?,
        check_grid("nehalem", &NEHALEM_GRID)?,
    ];
    out.extend(check_balance_example()?);
    out.extend(check_stencil_balance()?);
    out.push(check_triad_l2()?);
    out.push(check_jacobi_nehalem()?);
    out.push(check_comparison("core2", &CORE2_COMPARISON)?);
    out.push(check_comparison("nehalem", &NEHALEM_COMPARISON)?);
    Ok(out)
}
