//! Machine descriptions: everything the model needs to know about a processor.
//!
//! Machine files are JSON:
//!
//! ```json
//! {
//!   "name": "core2",
//!   "clock_ghz": 2.83,
//!   "cacheline_bytes": 64,
//!   "l1": { "load_bytes_per_cycle": 16, "store_bytes_per_cycle": 16,
//!           "concurrent_load_store": true },
//!   "caches": [
//!     { "level": 1, "size_bytes": 32768, "inclusive": true, "write_allocate": true },
//!     { "level": 2, "size_bytes": 6291456, "bus_bytes_per_cycle": 32,
//!       "inclusive": true, "write_allocate": true }
//!   ],
//!   "memory": { "clock_mhz": 800, "bytes_per_clock": 16 },
//!   "peak_flops_per_cycle": 4,
//!   "stream_triad_gbs": 6.8
//! }
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::exact::{self, Exact};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WritePolicy {
    WriteAllocateWriteBack,
}

impl WritePolicy {
    /// Cachelines crossing a bus per store-miss cacheline update.
    pub fn store_crossing_cachelines(self) -> u32 {
        match self {
            // allocate + evict
            WritePolicy::WriteAllocateWriteBack => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheLevel {
    /// 1 = L1.
    pub level_index: u8,
    pub size_bytes: u64,
    /// Bus toward the next-inner level. `None` for L1.
    pub bus_bytes_per_cycle_to_inner: Option<f64>,
    pub write_policy: WritePolicy,
    pub inclusive: bool,
    pub store_crossing_cachelines: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemorySystem {
    pub memory_clock_mhz: f64,
    /// Bus width times channel count.
    pub bytes_per_memory_clock: f64,
    pub peak_bandwidth_gbs: f64,
}

impl MemorySystem {
    pub fn new(memory_clock_mhz: f64, bytes_per_memory_clock: f64) -> Self {
        let peak = exact::to_f64(
            &(exact::from_f64(memory_clock_mhz) * exact::from_f64(bytes_per_memory_clock)
                / exact::int(1000)),
        );
        MemorySystem {
            memory_clock_mhz,
            bytes_per_memory_clock,
            peak_bandwidth_gbs: peak,
        }
    }

    /// Peak bandwidth in GB/s (10^9 bytes), exact.
    pub fn peak_bandwidth_exact(&self) -> Exact {
        exact::from_f64(self.memory_clock_mhz) * exact::from_f64(self.bytes_per_memory_clock)
            / exact::int(1000)
    }
}

/// A validated processor description. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineDescription {
    pub name: String,
    pub clock_ghz: f64,
    pub l1_load_bytes_per_cycle: f64,
    pub l1_store_bytes_per_cycle: f64,
    /// One load and one store retire in the same cycle.
    pub l1_concurrent_load_store: bool,
    /// Ordered from L1 outward.
    pub cache_levels: Vec<CacheLevel>,
    pub memory: MemorySystem,
    pub peak_flops_per_cycle: f64,
    pub measured_stream_triad_gbs: Option<f64>,
    pub cacheline_bytes: u32,
}

impl MachineDescription {
    pub fn cache_level(&self, index: u8) -> Option<&CacheLevel> {
        self.cache_levels.iter().find(|c| c.level_index == index)
    }

    pub fn outermost_cache(&self) -> &CacheLevel {
        self.cache_levels
            .last()
            .expect("validated: at least one cache level")
    }

    pub fn clock_exact(&self) -> Exact {
        exact::from_f64(self.clock_ghz)
    }

    pub fn cacheline_exact(&self) -> Exact {
        exact::int(self.cacheline_bytes as i64)
    }

    /// Memory bandwidth expressed in bytes per core cycle.
    pub fn memory_bytes_per_core_cycle(&self) -> Exact {
        self.memory.peak_bandwidth_exact() / self.clock_exact()
    }

    /// Core cycles to move one cacheline over the memory bus, unrounded.
    pub fn memory_cycles_per_cacheline_exact(&self) -> Exact {
        self.cacheline_exact() / self.memory.peak_bandwidth_exact() * self.clock_exact()
    }

    pub fn memory_cycles_per_cacheline(&self) -> f64 {
        exact::to_f64(&self.memory_cycles_per_cacheline_exact())
    }

    /// Peak floating-point rate in GFlop/s.
    pub fn peak_gflops(&self) -> f64 {
        exact::to_f64(&(exact::from_f64(self.peak_flops_per_cycle) * self.clock_exact()))
    }

    /// Check every invariant. Called by the loaders; useful after building a
    /// description by hand.
    pub fn validate(&self) -> Result<()> {
        let what = || format!("machine `{}`", self.name);
        let fail = |reason: String| Err(Error::validation(what(), reason));

        if !(self.clock_ghz.is_finite() && self.clock_ghz > 0.0) {
            return fail(format!("clock_ghz must be > 0, got {}", self.clock_ghz));
        }
        if self.cacheline_bytes == 0 || !self.cacheline_bytes.is_power_of_two() {
            return fail(format!(
                "cacheline_bytes must be a positive power of two, got {}",
                self.cacheline_bytes
            ));
        }
        for (label, value) in [
            ("l1.load_bytes_per_cycle", self.l1_load_bytes_per_cycle),
            ("l1.store_bytes_per_cycle", self.l1_store_bytes_per_cycle),
            ("peak_flops_per_cycle", self.peak_flops_per_cycle),
            ("memory.clock_mhz", self.memory.memory_clock_mhz),
            ("memory.bytes_per_clock", self.memory.bytes_per_memory_clock),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return fail(format!("{label} must be > 0, got {value}"));
            }
        }
        if let Some(triad) = self.measured_stream_triad_gbs {
            if !(triad.is_finite() && triad > 0.0) {
                return fail(format!("stream_triad_gbs must be > 0, got {triad}"));
            }
        }
        let expected_peak = exact::to_f64(&self.memory.peak_bandwidth_exact());
        if (self.memory.peak_bandwidth_gbs - expected_peak).abs() > 1e-9 * expected_peak {
            return fail(format!(
                "memory peak bandwidth {} GB/s disagrees with clock x width = {expected_peak}",
                self.memory.peak_bandwidth_gbs
            ));
        }

        if self.cache_levels.is_empty() {
            return fail("at least one cache level is required".into());
        }
        for (position, level) in self.cache_levels.iter().enumerate() {
            let expected = position + 1;
            if level.level_index as usize != expected {
                return fail(format!(
                    "cache levels must be numbered 1, 2, ... in order; found level {} at position {expected}",
                    level.level_index
                ));
            }
            if level.size_bytes == 0 {
                return fail(format!("L{} size must be > 0", level.level_index));
            }
            if level.size_bytes < self.cacheline_bytes as u64 {
                return fail(format!(
                    "L{} is smaller than one cacheline",
                    level.level_index
                ));
            }
            if level.level_index >= 2 {
                match level.bus_bytes_per_cycle_to_inner {
                    Some(bus) if bus.is_finite() && bus > 0.0 => {}
                    other => {
                        return fail(format!(
                            "L{} bus_bytes_per_cycle must be > 0, got {other:?}",
                            level.level_index
                        ))
                    }
                }
            }
            if !(1..=2).contains(&level.store_crossing_cachelines)
                || level.store_crossing_cachelines != level.write_policy.store_crossing_cachelines()
            {
                return fail(format!(
                    "L{} store_crossing_cachelines must be {} under write-allocate",
                    level.level_index,
                    level.write_policy.store_crossing_cachelines()
                ));
            }
        }
        for pair in self.cache_levels.windows(2) {
            if pair[1].size_bytes <= pair[0].size_bytes {
                return fail(format!(
                    "cache sizes must strictly increase outward: L{} ({} B) <= L{} ({} B)",
                    pair[1].level_index,
                    pair[1].size_bytes,
                    pair[0].level_index,
                    pair[0].size_bytes
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MachineFile::from(self)).expect("machine serializes")
    }
}

/// Parse and validate a machine document.
pub fn load_machine(document: &str) -> Result<MachineDescription> {
    let file: MachineFile = serde_json::from_str(document).map_err(|source| Error::Parse {
        context: "machine description".into(),
        source,
    })?;
    let machine = file.into_description()?;
    machine.validate()?;
    Ok(machine)
}

pub fn load_machine_file(path: impl AsRef<Path>) -> Result<MachineDescription> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_machine(&text).map_err(|e| match e {
        Error::Parse { source, .. } => Error::Parse {
            context: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Cycles to move one cacheline over the memory bus, in core cycles.
pub fn memory_cycles_per_cacheline(machine: &MachineDescription) -> f64 {
    machine.memory_cycles_per_cacheline()
}

// On-disk schema.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineFile {
    name: String,
    clock_ghz: f64,
    cacheline_bytes: u32,
    l1: L1File,
    caches: Vec<CacheFile>,
    memory: MemoryFile,
    peak_flops_per_cycle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stream_triad_gbs: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct L1File {
    load_bytes_per_cycle: f64,
    store_bytes_per_cycle: f64,
    concurrent_load_store: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheFile {
    level: u8,
    size_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus_bytes_per_cycle: Option<f64>,
    inclusive: bool,
    write_allocate: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemoryFile {
    clock_mhz: f64,
    bytes_per_clock: f64,
}

impl MachineFile {
    fn into_description(self) -> Result<MachineDescription> {
        let name = self.name;
        let cache_levels = self
            .caches
            .into_iter()
            .map(|c| {
                if !c.write_allocate {
                    return Err(Error::validation(
                        format!("machine `{name}`"),
                        format!(
                            "L{}: only write-allocate/write-back caches are supported",
                            c.level
                        ),
                    ));
                }
                let policy = WritePolicy::WriteAllocateWriteBack;
                Ok(CacheLevel {
                    level_index: c.level,
                    size_bytes: c.size_bytes,
                    bus_bytes_per_cycle_to_inner: c.bus_bytes_per_cycle,
                    write_policy: policy,
                    inclusive: c.inclusive,
                    store_crossing_cachelines: policy.store_crossing_cachelines(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !(self.memory.clock_mhz.is_finite() && self.memory.bytes_per_clock.is_finite()) {
            return Err(Error::validation(
                format!("machine `{name}`"),
                "memory clock and width must be finite",
            ));
        }
        Ok(MachineDescription {
            clock_ghz: self.clock_ghz,
            l1_load_bytes_per_cycle: self.l1.load_bytes_per_cycle,
            l1_store_bytes_per_cycle: self.l1.store_bytes_per_cycle,
            l1_concurrent_load_store: self.l1.concurrent_load_store,
            cache_levels,
            memory: MemorySystem::new(self.memory.clock_mhz, self.memory.bytes_per_clock),
            peak_flops_per_cycle: self.peak_flops_per_cycle,
            measured_stream_triad_gbs: self.stream_triad_gbs,
            cacheline_bytes: self.cacheline_bytes,
            name,
        })
    }
}

impl From<&MachineDescription> for MachineFile {
    fn from(m: &MachineDescription) -> Self {
        MachineFile {
            name: m.name.clone(),
            clock_ghz: m.clock_ghz,
            cacheline_bytes: m.cacheline_bytes,
            l1: L1File {
                load_bytes_per_cycle: m.l1_load_bytes_per_cycle,
                store_bytes_per_cycle: m.l1_store_bytes_per_cycle,
                concurrent_load_store: m.l1_concurrent_load_store,
            },
            caches: m
                .cache_levels
                .iter()
                .map(|c| CacheFile {
                    level: c.level_index,
                    size_bytes: c.size_bytes,
                    bus_bytes_per_cycle: c.bus_bytes_per_cycle_to_inner,
                    inclusive: c.inclusive,
                    write_allocate: matches!(c.write_policy, WritePolicy::WriteAllocateWriteBack),
                })
                .collect(),
            memory: MemoryFile {
                clock_mhz: m.memory.memory_clock_mhz,
                bytes_per_clock: m.memory.bytes_per_memory_clock,
            },
            peak_flops_per_cycle: m.peak_flops_per_cycle,
            stream_triad_gbs: m.measured_stream_triad_gbs,
        }
    }
}
