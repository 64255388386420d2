//! Stencil layer conditions and the full-hierarchy stencil prediction.
//!
//! For a 3D Jacobi-style sweep (`k` innermost), the number of operand streams
//! coming from memory depends on what the outer-level cache can hold:
//!
//! * the rows needed for one inner-loop pass do not fit: 6 streams,
//! * the rows fit but the planes needed for reuse across `i` do not: 4,
//! * the planes fit: 2.
//!
//! Stream counts include the store stream; the write-allocate read adds one
//! more stream on top. In 2D the row condition alone selects 4 or 2 streams.

use serde::{Deserialize, Serialize};

use crate::balance::{self, BalanceReport, QuotePrecision};
use crate::exact::{self, Exact};
use crate::hierarchy::{crossings, transfer_cycles_exact, Level, LevelPrediction, Transfer};
use crate::machine::MachineDescription;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilSpec {
    pub name: String,
    pub dimensions: u8,
    /// Cubic (or square) grid edge length; 0 until set.
    #[serde(default)]
    pub grid_points_per_dim: u32,
    pub element_bytes: u32,
    pub flops_per_update: u32,
    pub l1_cycles_per_cl_update: f64,
    pub rows_needed: u32,
    #[serde(default)]
    pub planes_needed: u32,
}

impl StencilSpec {
    pub fn with_grid(&self, n: u32) -> Self {
        StencilSpec {
            grid_points_per_dim: n,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::validation(
                format!("stencil `{}`", self.name),
                reason,
            ))
        };
        match self.dimensions {
            3 => {
                if !(self.planes_needed >= 2 && self.rows_needed > self.planes_needed) {
                    return fail(format!(
                        "3D stencils need rows_needed > planes_needed >= 2, got {} and {}",
                        self.rows_needed, self.planes_needed
                    ));
                }
            }
            2 => {
                if self.rows_needed < 2 {
                    return fail(format!(
                        "rows_needed must be >= 2, got {}",
                        self.rows_needed
                    ));
                }
            }
            d => return fail(format!("dimensions must be 2 or 3, got {d}")),
        }
        if self.element_bytes == 0 || !self.element_bytes.is_power_of_two() {
            return fail("element_bytes must be a positive power of two".into());
        }
        if self.flops_per_update == 0 {
            return fail("flops_per_update must be >= 1".into());
        }
        if !(self.l1_cycles_per_cl_update.is_finite() && self.l1_cycles_per_cl_update >= 0.0) {
            return fail("l1_cycles_per_cl_update must be >= 0".into());
        }
        Ok(())
    }

    fn grid(&self) -> Result<u64> {
        if self.grid_points_per_dim < 3 {
            return Err(Error::Domain(format!(
                "grid_points_per_dim must be >= 3, got {}",
                self.grid_points_per_dim
            )));
        }
        Ok(self.grid_points_per_dim as u64)
    }

    fn row_bytes(&self, n: u64) -> u64 {
        self.rows_needed as u64 * n * self.element_bytes as u64
    }

    fn plane_bytes(&self, n: u64) -> u64 {
        self.planes_needed as u64 * n * n * self.element_bytes as u64
    }
}

pub fn load_stencil(document: &str) -> Result<StencilSpec> {
    let spec: StencilSpec = serde_json::from_str(document).map_err(|source| Error::Parse {
        context: "stencil description".into(),
        source,
    })?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegimeKind {
    Best,
    Middle,
    Worst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRegime {
    pub kind: RegimeKind,
    /// Streams to memory, counting the store stream.
    pub memory_streams: u32,
    /// Extra write-allocate streams.
    pub rfo_streams: u32,
    pub condition: String,
}

impl StreamRegime {
    pub fn label(&self) -> &'static str {
        match self.kind {
            RegimeKind::Worst => "worst",
            RegimeKind::Middle => "middle",
            RegimeKind::Best => "best",
        }
    }

    /// The regime with a given stream count, for table reproduction.
    pub fn with_streams(stencil: &StencilSpec, memory_streams: u32) -> Result<Self> {
        let kind = match (stencil.dimensions, memory_streams) {
            (3, 6) | (2, 4) => RegimeKind::Worst,
            (3, 4) => RegimeKind::Middle,
            (_, 2) => RegimeKind::Best,
            _ => {
                return Err(Error::Domain(format!(
                    "{}D stencils have no {memory_streams}-stream regime",
                    stencil.dimensions
                )))
            }
        };
        Ok(StreamRegime {
            kind,
            memory_streams,
            rfo_streams: 1,
            condition: "selected explicitly".into(),
        })
    }
}

/// Stream regime for the stencil's grid with `cache_bytes` of outer cache.
pub fn classify_regime(stencil: &StencilSpec, cache_bytes: u64) -> Result<StreamRegime> {
    classify_regime_with(stencil, cache_bytes, 1.0)
}

/// As [`classify_regime`], using only `cache_fraction` of the capacity.
/// Fitting means `<=`.
pub fn classify_regime_with(
    stencil: &StencilSpec,
    cache_bytes: u64,
    cache_fraction: f64,
) -> Result<StreamRegime> {
    stencil.validate()?;
    let n = stencil.grid()?;
    if cache_bytes == 0 {
        return Err(Error::Domain("cache size must be positive".into()));
    }
    if !(cache_fraction.is_finite() && cache_fraction > 0.0 && cache_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "cache fraction must be in (0, 1], got {cache_fraction}"
        )));
    }
    let usable = exact::int(cache_bytes as i64) * exact::from_f64(cache_fraction);
    let fits = |bytes: u64| exact::int(bytes as i64) <= usable;

    let rows = stencil.row_bytes(n);
    let regime = |kind, memory_streams, condition: String| StreamRegime {
        kind,
        memory_streams,
        rfo_streams: 1,
        condition,
    };
    if stencil.dimensions == 2 {
        return Ok(if fits(rows) {
            regime(
                RegimeKind::Best,
                2,
                format!("{} rows ({rows} B) fit", stencil.rows_needed),
            )
        } else {
            regime(
                RegimeKind::Worst,
                4,
                format!("{} rows ({rows} B) do not fit", stencil.rows_needed),
            )
        });
    }
    let planes = stencil.plane_bytes(n);
    Ok(if !fits(rows) {
        regime(
            RegimeKind::Worst,
            6,
            format!("{} rows ({rows} B) do not fit", stencil.rows_needed),
        )
    } else if !fits(planes) {
        regime(
            RegimeKind::Middle,
            4,
            format!(
                "rows fit, {} planes ({planes} B) do not",
                stencil.planes_needed
            ),
        )
    } else {
        regime(
            RegimeKind::Best,
            2,
            format!("{} planes ({planes} B) fit", stencil.planes_needed),
        )
    })
}

/// Balance-model prediction for a regime, with machine balance from the
/// single-thread triad bandwidth and a caller-supplied applicable peak.
pub fn regime_balance_prediction(
    stencil: &StencilSpec,
    machine: &MachineDescription,
    regime: &StreamRegime,
    applicable_peak_gflops: f64,
    precision: QuotePrecision,
) -> Result<BalanceReport> {
    let triad = machine.measured_stream_triad_gbs.ok_or_else(|| {
        Error::Config(format!(
            "machine `{}` has no stream_triad_gbs; the regime balance needs a sustained bandwidth",
            machine.name
        ))
    })?;
    let ba = balance::stream_algorithmic_balance_exact(
        regime.memory_streams,
        regime.rfo_streams,
        stencil.flops_per_update,
    )?;
    balance::predict_from_bandwidth_exact(triad, ba, applicable_peak_gflops, precision)
}

/// Named per-crossing cacheline lists.
pub fn traffic_preset(name: &str) -> Option<Vec<u32>> {
    match name {
        // Four planes in L3, seven lines in L1, no L2->L1 write-allocate read.
        "jacobi-nehalem" => Some(vec![4, 5, 3]),
        _ => None,
    }
}

pub const TRAFFIC_PRESETS: [&str; 1] = ["jacobi-nehalem"];

/// Preset name or comma-separated cacheline counts.
pub fn parse_traffic(arg: &str) -> Result<Vec<u32>> {
    if let Some(preset) = traffic_preset(arg) {
        return Ok(preset);
    }
    arg.split(',')
        .map(|s| {
            s.trim().parse::<u32>().map_err(|_| {
                Error::Config(format!(
                    "traffic must be a preset ({}) or a comma-separated list of cacheline counts, got `{arg}`",
                    TRAFFIC_PRESETS.join(", ")
                ))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StencilPrediction {
    pub prediction: LevelPrediction,
    pub mflops: f64,
}

/// Cycles per cacheline update from the stencil's L1 cost plus one transfer
/// per bus, with cachelines per bus given explicitly (L2-L1 first).
pub fn hierarchy_prediction(
    stencil: &StencilSpec,
    machine: &MachineDescription,
    traffic: &[u32],
) -> Result<StencilPrediction> {
    stencil.validate()?;
    if !machine
        .cacheline_bytes
        .is_multiple_of(stencil.element_bytes)
    {
        return Err(Error::validation(
            format!("stencil `{}`", stencil.name),
            "element_bytes must divide the cacheline",
        ));
    }
    let buses = crossings(machine);
    if traffic.len() != buses.len() {
        return Err(Error::Config(format!(
            "traffic lists {} crossings but `{}` has {} ({})",
            traffic.len(),
            machine.name,
            buses.len(),
            buses
                .iter()
                .map(|c| c.label())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let transfers: Vec<Transfer> = buses
        .iter()
        .zip(traffic)
        .map(|(c, &lines)| Transfer {
            label: c.label(),
            cachelines: lines,
            cycles: transfer_cycles_exact(lines, &c.bus_bytes_per_cycle, machine.cacheline_bytes),
        })
        .collect();
    let outermost = buses.iter().zip(traffic).rposition(|(_, &lines)| lines > 0);
    let (level, outer_lines) = match outermost {
        Some(i) => (buses[i].outer, traffic[i]),
        None => (Level::L1, 0),
    };
    let prediction = LevelPrediction::assemble(
        &machine.name,
        &stencil.name,
        level,
        exact::from_f64(stencil.l1_cycles_per_cl_update),
        transfers,
        outer_lines,
        outer_lines,
    );
    let flops_per_cl = exact::int(
        (stencil.flops_per_update * (machine.cacheline_bytes / stencil.element_bytes)) as i64,
    );
    let mflops: Exact =
        flops_per_cl / &prediction.total_cycles * machine.clock_exact() * exact::int(1000);
    Ok(StencilPrediction {
        prediction,
        mflops: exact::to_f64(&mflops),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use proptest::prelude::*;

    const L3: u64 = 8 * 1024 * 1024;

    #[test]
    fn bundled_jacobi() {
        let j = bundled::jacobi3d();
        assert_eq!(
            (j.rows_needed, j.planes_needed, j.flops_per_update),
            (6, 4, 8)
        );
        assert_eq!(j.l1_cycles_per_cl_update, 24.0);
    }

    #[test]
    fn middle_regime_on_8mb() {
        // 4 planes > 8 MB needs n > 512; 6 rows fit up to n = 174762.
        let j = bundled::jacobi3d().with_grid(600);
        let r = classify_regime(&j, L3).unwrap();
        assert_eq!(
            (r.kind, r.memory_streams, r.rfo_streams),
            (RegimeKind::Middle, 4, 1)
        );
    }

    #[test]
    fn best_regime_small_grid() {
        let j = bundled::jacobi3d().with_grid(100);
        assert_eq!(classify_regime(&j, L3).unwrap().memory_streams, 2);
        let whole_grid = 2 * 100u64.pow(3) * 8;
        assert_eq!(
            classify_regime(&j, whole_grid).unwrap().kind,
            RegimeKind::Best
        );
    }

    #[test]
    fn worst_regime_and_boundaries() {
        let j = bundled::jacobi3d().with_grid(1000);
        // 6 rows = 48000 B
        assert_eq!(classify_regime(&j, 47_999).unwrap().memory_streams, 6);
        assert_eq!(classify_regime(&j, 48_000).unwrap().memory_streams, 4);
        // 4 planes = 32 MB
        assert_eq!(
            classify_regime(&j, 32_000_000 - 1).unwrap().memory_streams,
            4
        );
        assert_eq!(classify_regime(&j, 32_000_000).unwrap().memory_streams, 2);
        assert_eq!(
            classify_regime_with(&j, 64_000_000, 0.5)
                .unwrap()
                .memory_streams,
            2
        );
        assert_eq!(
            classify_regime_with(&j, 63_999_999, 0.5)
                .unwrap()
                .memory_streams,
            4
        );
    }

    #[test]
    fn two_dimensional() {
        let mut s = bundled::jacobi3d();
        s.dimensions = 2;
        s.rows_needed = 2;
        s.planes_needed = 0;
        let s = s.with_grid(1000);
        assert_eq!(classify_regime(&s, 16_000).unwrap().memory_streams, 2);
        assert_eq!(classify_regime(&s, 15_999).unwrap().memory_streams, 4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let j = bundled::jacobi3d();
        assert!(classify_regime(&j.with_grid(2), L3).is_err());
        assert!(classify_regime(&j.with_grid(10), 0).is_err());
        let mut bad = j.clone();
        bad.planes_needed = 6;
        assert!(bad.validate().is_err());
        assert!(load_stencil(r#"{"name":"x","dimensions":4,"element_bytes":8,"flops_per_update":1,"l1_cycles_per_cl_update":1,"rows_needed":3}"#).is_err());
    }

    #[test]
    fn regime_balance_on_nehalem() {
        let j = bundled::jacobi3d();
        let m = bundled::nehalem();
        let p = QuotePrecision::SignificantFigures(3);
        for (streams, mflops) in [(6, 1988.0), (4, 2786.0), (2, 4648.0)] {
            let regime = StreamRegime::with_streams(&j, streams).unwrap();
            let r = regime_balance_prediction(&j, &m, &regime, 6.65, p).unwrap();
            assert!(
                (r.predicted_mflops() - mflops).abs() <= 2.0,
                "{}",
                r.predicted_mflops()
            );
        }
        let mut no_triad = m;
        no_triad.measured_stream_triad_gbs = None;
        let regime = StreamRegime::with_streams(&j, 2).unwrap();
        assert!(matches!(
            regime_balance_prediction(&j, &no_triad, &regime, 6.65, p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn jacobi_hierarchy_prediction() {
        let p = hierarchy_prediction(
            &bundled::jacobi3d(),
            &bundled::nehalem(),
            &traffic_preset("jacobi-nehalem").unwrap(),
        )
        .unwrap();
        let parts: Vec<i64> = p
            .prediction
            .transfer_contributions
            .iter()
            .map(|t| exact::round_to_int(&t.cycles))
            .collect();
        assert_eq!(parts, [8, 10, 20]);
        assert_eq!(p.prediction.total_cycles_rounded, 62);
        assert!((p.mflops - 2745.0).abs() <= 15.0, "{}", p.mflops);
    }

    #[test]
    fn zero_traffic_is_l1_bound() {
        let p =
            hierarchy_prediction(&bundled::jacobi3d(), &bundled::nehalem(), &[0, 0, 0]).unwrap();
        assert_eq!(p.prediction.total_cycles, exact::int(24));
        assert_eq!(p.prediction.level, Level::L1);
        assert!(hierarchy_prediction(&bundled::jacobi3d(), &bundled::nehalem(), &[1, 2]).is_err());
    }

    #[test]
    fn traffic_parsing() {
        assert_eq!(parse_traffic("jacobi-nehalem").unwrap(), [4, 5, 3]);
        assert_eq!(parse_traffic("4, 6,3").unwrap(), [4, 6, 3]);
        assert!(parse_traffic("four").is_err());
    }

    proptest! {
        #[test]
        fn larger_cache_never_worse(n in 3u32..3000, cache in 1u64..(1 << 30), extra in 0u64..(1 << 30)) {
            let j = bundled::jacobi3d().with_grid(n);
            let small = classify_regime(&j, cache).unwrap();
            let big = classify_regime(&j, cache + extra).unwrap();
            prop_assert!(big.kind <= small.kind);
            prop_assert!(big.memory_streams <= small.memory_streams);
        }

        #[test]
        fn smaller_grid_never_worse(n in 4u32..3000, shrink in 1u32..100, cache in 1u64..(1 << 30)) {
            let j = bundled::jacobi3d();
            let m = n.saturating_sub(shrink).max(3);
            let big = classify_regime(&j.with_grid(n), cache).unwrap();
            let small = classify_regime(&j.with_grid(m), cache).unwrap();
            prop_assert!(small.kind <= big.kind);
        }

        #[test]
        fn stencil_total_matches_transfer_cycles(t in prop::collection::vec(0u32..10, 3)) {
            let m = bundled::nehalem();
            let p = hierarchy_prediction(&bundled::jacobi3d(), &m, &t).unwrap();
            let mut sum = exact::int(24);
            for (c, lines) in crossings(&m).iter().zip(&t) {
                sum += transfer_cycles_exact(*lines, &c.bus_bytes_per_cycle, 64);
            }
            prop_assert_eq!(p.prediction.total_cycles, sum);
        }
    }
}
