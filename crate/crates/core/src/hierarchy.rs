//! Diagnostic cycles-per-cacheline model.
//!
//! All figures are per cacheline-per-stream update: the time for every
//! stream of the kernel to advance by one cacheline. With the working set in
//! level `n`, the total is the L1 execution time plus, for every bus between
//! level `n` and L1, the cycles needed to move that update's cachelines over
//! the bus. Contributions do not overlap and latency is assumed hidden.
//!
//! The hierarchy is taken as inclusive and write-allocate: a load stream
//! moves one cacheline per crossing, a store stream two (allocate and later
//! evict).

use std::fmt;
use std::str::FromStr;

use num::Zero;

use crate::exact::{self, Exact};
use crate::kernel::{l1_cycles_per_cl_exact, KernelDescription};
use crate::machine::MachineDescription;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    /// Cache level, 1 = L1.
    Cache(u8),
    Memory,
}

impl Level {
    pub const L1: Level = Level::Cache(1);
    pub const L2: Level = Level::Cache(2);
    pub const L3: Level = Level::Cache(3);

    /// Every level available on a machine, L1 first, memory last.
    pub fn all_for(machine: &MachineDescription) -> Vec<Level> {
        machine
            .cache_levels
            .iter()
            .map(|c| Level::Cache(c.level_index))
            .chain(std::iter::once(Level::Memory))
            .collect()
    }

    /// Number of buses between this level and L1.
    pub fn crossings(self, machine: &MachineDescription) -> usize {
        match self {
            Level::Cache(k) => k as usize - 1,
            Level::Memory => machine.cache_levels.len(),
        }
    }

    pub fn exists_on(self, machine: &MachineDescription) -> bool {
        match self {
            Level::Cache(k) => k >= 1 && (k as usize) <= machine.cache_levels.len(),
            Level::Memory => true,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Cache(k) => write!(f, "L{k}"),
            Level::Memory => f.write_str("MEM"),
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        if upper == "MEM" || upper == "MEMORY" {
            return Ok(Level::Memory);
        }
        upper
            .strip_prefix('L')
            .and_then(|n| n.parse::<u8>().ok())
            .filter(|&n| n >= 1)
            .map(Level::Cache)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown hierarchy level `{s}` (use L1, L2, L3 or MEM)"
                ))
            })
    }
}

/// A bus between two adjacent levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub outer: Level,
    pub inner: Level,
    pub bus_bytes_per_cycle: Exact,
    pub store_crossing_cachelines: u32,
    pub inclusive: bool,
}

impl Crossing {
    pub fn label(&self) -> String {
        format!("{}-{}", self.outer, self.inner)
    }
}

/// The machine's buses ordered from L1 outward: L2-L1, L3-L2, ..., MEM-Ln.
pub fn crossings(machine: &MachineDescription) -> Vec<Crossing> {
    let levels = &machine.cache_levels;
    let mut out: Vec<Crossing> = levels
        .windows(2)
        .map(|pair| Crossing {
            outer: Level::Cache(pair[1].level_index),
            inner: Level::Cache(pair[0].level_index),
            bus_bytes_per_cycle: exact::from_f64(
                pair[1]
                    .bus_bytes_per_cycle_to_inner
                    .expect("validated bus width"),
            ),
            store_crossing_cachelines: pair[0].store_crossing_cachelines,
            inclusive: pair[0].inclusive && pair[1].inclusive,
        })
        .collect();
    let last = machine.outermost_cache();
    out.push(Crossing {
        outer: Level::Memory,
        inner: Level::Cache(last.level_index),
        bus_bytes_per_cycle: machine.memory_bytes_per_core_cycle(),
        store_crossing_cachelines: last.store_crossing_cachelines,
        inclusive: last.inclusive,
    });
    out
}

/// Cachelines moved over one bus per cacheline-per-stream update.
pub fn crossing_cachelines(kernel: &KernelDescription, crossing: &Crossing) -> u32 {
    kernel.load_streams + kernel.store_streams * crossing.store_crossing_cachelines
}

pub fn transfer_cycles_exact(
    cachelines: u32,
    bus_bytes_per_cycle: &Exact,
    cacheline_bytes: u32,
) -> Exact {
    exact::int(cachelines as i64) * exact::int(cacheline_bytes as i64) / bus_bytes_per_cycle
}

/// Cycles to move `cachelines` over a bus of the given width.
pub fn transfer_cycles(
    cachelines: u32,
    bus_bytes_per_cycle: f64,
    cacheline_bytes: u32,
) -> Result<f64> {
    if !(bus_bytes_per_cycle.is_finite() && bus_bytes_per_cycle > 0.0) {
        return Err(Error::Domain(format!(
            "bus width must be positive, got {bus_bytes_per_cycle}"
        )));
    }
    if cacheline_bytes == 0 {
        return Err(Error::Domain("cacheline size must be positive".into()));
    }
    Ok(exact::to_f64(&transfer_cycles_exact(
        cachelines,
        &exact::from_f64(bus_bytes_per_cycle),
        cacheline_bytes,
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub label: String,
    pub cachelines: u32,
    pub cycles: Exact,
}

impl Transfer {
    pub fn cycles_f64(&self) -> f64 {
        exact::to_f64(&self.cycles)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelPrediction {
    pub machine: String,
    pub kernel: String,
    pub level: Level,
    pub l1_execution_cycles: Exact,
    /// Ordered from the L2-L1 bus outward.
    pub transfer_contributions: Vec<Transfer>,
    pub total_cycles: Exact,
    pub total_cycles_rounded: i64,
    /// Cachelines over the outermost exercised bus, including allocates and
    /// evictions.
    pub real_traffic_cachelines: u32,
    /// Cachelines the application asked for.
    pub effective_traffic_cachelines: u32,
}

impl LevelPrediction {
    pub(crate) fn assemble(
        machine: &str,
        kernel: &str,
        level: Level,
        l1_execution_cycles: Exact,
        transfer_contributions: Vec<Transfer>,
        real_traffic_cachelines: u32,
        effective_traffic_cachelines: u32,
    ) -> Self {
        let total_cycles = transfer_contributions
            .iter()
            .fold(l1_execution_cycles.clone(), |acc, t| acc + &t.cycles);
        LevelPrediction {
            machine: machine.to_string(),
            kernel: kernel.to_string(),
            level,
            total_cycles_rounded: exact::round_to_int(&total_cycles),
            l1_execution_cycles,
            transfer_contributions,
            total_cycles,
            real_traffic_cachelines,
            effective_traffic_cachelines,
        }
    }

    pub fn total_f64(&self) -> f64 {
        exact::to_f64(&self.total_cycles)
    }

    pub fn l1_f64(&self) -> f64 {
        exact::to_f64(&self.l1_execution_cycles)
    }

    pub fn transfer_total(&self) -> Exact {
        self.transfer_contributions
            .iter()
            .fold(Exact::zero(), |acc, t| acc + &t.cycles)
    }
}

/// Predict cycles per cacheline-per-stream update with the working set in
/// `level`.
pub fn predict_level(
    kernel: &KernelDescription,
    machine: &MachineDescription,
    level: Level,
) -> Result<LevelPrediction> {
    kernel.validate_for(machine)?;
    if !level.exists_on(machine) {
        return Err(Error::Topology {
            machine: machine.name.clone(),
            level: level.to_string(),
        });
    }
    let used = &crossings(machine)[..level.crossings(machine)];
    if let Some(c) = used.iter().find(|c| !c.inclusive) {
        return Err(Error::Unsupported(format!(
            "{} on `{}` is not inclusive; only inclusive hierarchies are modeled",
            c.label(),
            machine.name
        )));
    }
    let transfers: Vec<Transfer> = used
        .iter()
        .map(|c| {
            let lines = crossing_cachelines(kernel, c);
            Transfer {
                label: c.label(),
                cachelines: lines,
                cycles: transfer_cycles_exact(
                    lines,
                    &c.bus_bytes_per_cycle,
                    machine.cacheline_bytes,
                ),
            }
        })
        .collect();
    let effective = kernel.streams();
    let real = transfers.last().map_or(effective, |t| t.cachelines);
    Ok(LevelPrediction::assemble(
        &machine.name,
        &kernel.name,
        level,
        l1_cycles_per_cl_exact(kernel, machine),
        transfers,
        real,
        effective,
    ))
}

#[derive(Debug, Clone)]
pub struct PredictionTable {
    pub machine: String,
    pub levels: Vec<Level>,
    /// One row per kernel, one entry per level in `levels`.
    pub rows: Vec<Vec<LevelPrediction>>,
}

impl PredictionTable {
    pub fn get(&self, kernel: &str, level: Level) -> Option<&LevelPrediction> {
        self.rows
            .iter()
            .flatten()
            .find(|p| p.kernel == kernel && p.level == level)
    }
}

pub fn prediction_table(
    machine: &MachineDescription,
    kernels: &[KernelDescription],
) -> Result<PredictionTable> {
    prediction_table_at(machine, kernels, &Level::all_for(machine))
}

pub fn prediction_table_at(
    machine: &MachineDescription,
    kernels: &[KernelDescription],
    levels: &[Level],
) -> Result<PredictionTable> {
    let rows = kernels
        .iter()
        .map(|k| {
            levels
                .iter()
                .map(|&l| predict_level(k, machine, l))
                .collect()
        })
        .collect::<Result<Vec<Vec<_>>>>()?;
    Ok(PredictionTable {
        machine: machine.name.clone(),
        levels: levels.to_vec(),
        rows,
    })
}

pub(crate) fn bandwidth_gbs_exact(
    cycles: &Exact,
    cachelines: u32,
    machine: &MachineDescription,
) -> Exact {
    exact::int(cachelines as i64) * machine.cacheline_exact() / cycles * machine.clock_exact()
}

/// Real and effective bandwidth in GB/s for an update taking `cycles`.
pub fn cycles_to_bandwidths(
    cycles: f64,
    real_cachelines: u32,
    effective_cachelines: u32,
    machine: &MachineDescription,
) -> Result<(f64, f64)> {
    if !(cycles.is_finite() && cycles > 0.0) {
        return Err(Error::Domain(format!(
            "cycles must be positive, got {cycles}"
        )));
    }
    let c = exact::from_f64(cycles);
    Ok((
        exact::to_f64(&bandwidth_gbs_exact(&c, real_cachelines, machine)),
        exact::to_f64(&bandwidth_gbs_exact(&c, effective_cachelines, machine)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::machine::tests::arb_machine;
    use proptest::prelude::*;

    fn totals(machine: &MachineDescription, level: Level) -> Vec<i64> {
        KernelDescription::builtins()
            .iter()
            .map(|k| {
                predict_level(k, machine, level)
                    .unwrap()
                    .total_cycles_rounded
            })
            .collect()
    }

    #[test]
    fn level_parsing() {
        assert_eq!("L2".parse::<Level>().unwrap(), Level::L2);
        assert_eq!("mem".parse::<Level>().unwrap(), Level::Memory);
        assert_eq!("Memory".parse::<Level>().unwrap(), Level::Memory);
        assert!("L0".parse::<Level>().is_err());
        assert!("cache".parse::<Level>().is_err());
        assert_eq!(Level::L3.to_string(), "L3");
    }

    #[test]
    fn crossing_counts() {
        let nehalem = bundled::nehalem();
        let c = crossings(&nehalem);
        assert_eq!(
            c.iter().map(Crossing::label).collect::<Vec<_>>(),
            ["L2-L1", "L3-L2", "MEM-L3"]
        );
        assert_eq!(crossing_cachelines(&KernelDescription::triad(), &c[0]), 4);
        for crossing in &c {
            assert_eq!(crossing_cachelines(&KernelDescription::load(), crossing), 1);
        }
        assert_eq!(crossing_cachelines(&KernelDescription::copy(), &c[1]), 3);
    }

    #[test]
    fn transfer_cycle_examples() {
        assert_eq!(transfer_cycles(4, 32.0, 64).unwrap(), 8.0);
        assert_eq!(transfer_cycles(1, 64.0, 64).unwrap(), 1.0);
        let nehalem = bundled::nehalem();
        let mem = crossings(&nehalem).pop().unwrap();
        let cycles = exact::to_f64(&transfer_cycles_exact(3, &mem.bus_bytes_per_cycle, 64));
        assert!((cycles - 20.03).abs() < 0.02, "{cycles}");
        assert!(transfer_cycles(1, 0.0, 64).is_err());
    }

    #[test]
    fn triad_in_l2_on_core2() {
        let p = predict_level(&KernelDescription::triad(), &bundled::core2(), Level::L2).unwrap();
        assert_eq!(p.l1_execution_cycles, exact::int(8));
        assert_eq!(p.transfer_contributions.len(), 1);
        assert_eq!(p.transfer_contributions[0].cachelines, 4);
        assert_eq!(p.transfer_contributions[0].cycles, exact::int(8));
        assert_eq!(p.total_cycles, exact::int(16));
        assert_eq!(
            (p.real_traffic_cachelines, p.effective_traffic_cachelines),
            (4, 3)
        );
    }

    #[test]
    fn store_in_l3_on_nehalem() {
        let p = predict_level(&KernelDescription::store(), &bundled::nehalem(), Level::L3).unwrap();
        assert_eq!(p.total_cycles, exact::int(12));
    }

    #[test]
    fn triad_in_memory_on_nehalem() {
        let p = predict_level(
            &KernelDescription::triad(),
            &bundled::nehalem(),
            Level::Memory,
        )
        .unwrap();
        assert!((p.total_f64() - 50.7).abs() < 0.05, "{}", p.total_f64());
        assert_eq!(p.total_cycles_rounded, 51);
    }

    #[test]
    fn core2_grid() {
        let m = bundled::core2();
        assert_eq!(totals(&m, Level::L1), [4, 4, 4, 8]);
        assert_eq!(totals(&m, Level::L2), [6, 8, 10, 16]);
        // Published: 20, 36, 52, 72.
        assert_eq!(totals(&m, Level::Memory), [20, 36, 52, 73]);
    }

    #[test]
    fn nehalem_grid() {
        let m = bundled::nehalem();
        assert_eq!(totals(&m, Level::L1), [4, 4, 4, 8]);
        assert_eq!(totals(&m, Level::L2), [6, 8, 10, 16]);
        assert_eq!(totals(&m, Level::L3), [8, 12, 16, 24]);
        // Published: 15, 26, 36, 51.
        assert_eq!(totals(&m, Level::Memory), [15, 25, 36, 51]);
    }

    #[test]
    fn missing_level_is_topology_error() {
        let err =
            predict_level(&KernelDescription::load(), &bundled::core2(), Level::L3).unwrap_err();
        assert!(matches!(err, Error::Topology { .. }));
        assert!(err.to_string().contains("core2"));
    }

    #[test]
    fn single_level_machine() {
        let mut m = bundled::core2();
        m.cache_levels.truncate(1);
        m.validate().unwrap();
        let table = prediction_table(&m, &[KernelDescription::load()]).unwrap();
        assert_eq!(table.levels, [Level::L1, Level::Memory]);
        let mem = table.get("load", Level::Memory).unwrap();
        assert_eq!(mem.transfer_contributions.len(), 1);
        assert_eq!(mem.transfer_contributions[0].label, "MEM-L1");
    }

    #[test]
    fn non_inclusive_rejected() {
        let mut m = bundled::nehalem();
        m.cache_levels[1].inclusive = false;
        assert!(predict_level(&KernelDescription::load(), &m, Level::L1).is_ok());
        assert!(matches!(
            predict_level(&KernelDescription::load(), &m, Level::L3),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn bandwidth_examples() {
        let m = bundled::core2();
        let (real, eff) = cycles_to_bandwidths(22.72, 4, 3, &m).unwrap();
        assert!(
            (real - 31.9).abs() < 0.05 && (eff - 23.9).abs() < 0.05,
            "{real} {eff}"
        );
        let (real, eff) = cycles_to_bandwidths(8.49, 2, 1, &m).unwrap();
        assert!(
            (real - 42.7).abs() < 0.05 && (eff - 21.3).abs() < 0.05,
            "{real} {eff}"
        );
        let (real, eff) = cycles_to_bandwidths(4.17, 1, 1, &m).unwrap();
        assert!((real - 43.4).abs() < 0.05 && real == eff);
        assert!(cycles_to_bandwidths(0.0, 1, 1, &m).is_err());
    }

    fn arb_kernel() -> impl Strategy<Value = KernelDescription> {
        (0u32..4, 0u32..4, 0u32..3, 0u32..3)
            .prop_filter("needs a stream", |(l, s, _, _)| l + s > 0)
            .prop_map(|(l, s, a, m)| KernelDescription::new("k", l, s, a, m))
    }

    proptest! {
        #[test]
        fn additive_and_monotone(m in arb_machine(), k in arb_kernel()) {
            let mut previous: Option<Exact> = None;
            for level in Level::all_for(&m) {
                let p = predict_level(&k, &m, level).unwrap();
                prop_assert_eq!(&p.total_cycles, &(&p.l1_execution_cycles + p.transfer_total()));
                prop_assert!(p.real_traffic_cachelines >= p.effective_traffic_cachelines);
                if let Some(prev) = &previous {
                    prop_assert!(&p.total_cycles >= prev);
                }
                previous = Some(p.total_cycles);
            }
        }

        #[test]
        fn dropping_store_stream_is_cheaper(m in arb_machine(), loads in 1u32..4, stores in 1u32..4) {
            let with = KernelDescription::new("k", loads, stores, 0, 0);
            let without = KernelDescription::new("k", loads, stores - 1, 0, 0);
            for level in Level::all_for(&m).into_iter().skip(1) {
                let a = predict_level(&with, &m, level).unwrap();
                let b = predict_level(&without, &m, level).unwrap();
                prop_assert!(b.total_cycles < a.total_cycles);
            }
        }

        #[test]
        fn doubling_buses_halves_transfers(m in arb_machine(), k in arb_kernel()) {
            let mut fast = m.clone();
            for c in fast.cache_levels.iter_mut() {
                c.bus_bytes_per_cycle_to_inner = c.bus_bytes_per_cycle_to_inner.map(|b| b * 2.0);
            }
            fast.memory = crate::machine::MemorySystem::new(
                m.memory.memory_clock_mhz,
                m.memory.bytes_per_memory_clock * 2.0,
            );
            let two = exact::int(2);
            for level in Level::all_for(&m) {
                let a = predict_level(&k, &m, level).unwrap();
                let b = predict_level(&k, &fast, level).unwrap();
                prop_assert_eq!(&a.l1_execution_cycles, &b.l1_execution_cycles);
                for (ta, tb) in a.transfer_contributions.iter().zip(&b.transfer_contributions) {
                    prop_assert_eq!(&ta.cycles, &(&tb.cycles * &two));
                }
            }
        }
    }
}
