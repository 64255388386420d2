//! Streaming loop kernels and their L1-resident execution cost.

use serde::{Deserialize, Serialize};

use crate::exact::{self, Exact};
use crate::machine::MachineDescription;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDescription {
    pub name: String,
    /// Distinct read-only streams per iteration.
    pub load_streams: u32,
    /// Distinct written streams per iteration.
    pub store_streams: u32,
    pub adds: u32,
    pub mults: u32,
    pub element_bytes: u32,
    /// Cycles per cacheline-per-stream update in L1, when the instruction
    /// analysis is done outside the port model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_cycles_override: Option<f64>,
}

pub const BUILTIN_NAMES: [&str; 4] = ["load", "store", "copy", "triad"];

impl KernelDescription {
    pub fn new(name: &str, load_streams: u32, store_streams: u32, adds: u32, mults: u32) -> Self {
        KernelDescription {
            name: name.to_string(),
            load_streams,
            store_streams,
            adds,
            mults,
            element_bytes: 8,
            l1_cycles_override: None,
        }
    }

    pub fn load() -> Self {
        Self::new("load", 1, 0, 0, 0)
    }

    pub fn store() -> Self {
        Self::new("store", 0, 1, 0, 0)
    }

    pub fn copy() -> Self {
        Self::new("copy", 1, 1, 0, 0)
    }

    /// `A = B + s * C`
    pub fn triad() -> Self {
        Self::new("triad", 2, 1, 1, 1)
    }

    pub fn builtins() -> Vec<Self> {
        vec![Self::load(), Self::store(), Self::copy(), Self::triad()]
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "load" => Some(Self::load()),
            "store" => Some(Self::store()),
            "copy" => Some(Self::copy()),
            "triad" => Some(Self::triad()),
            _ => None,
        }
    }

    pub fn flops_per_iteration(&self) -> u32 {
        self.adds + self.mults
    }

    pub fn streams(&self) -> u32 {
        self.load_streams + self.store_streams
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::validation(format!("kernel `{}`", self.name), reason));
        if self.streams() == 0 {
            return fail("at least one load or store stream is required");
        }
        if self.element_bytes == 0 || !self.element_bytes.is_power_of_two() {
            return fail("element_bytes must be a positive power of two");
        }
        if let Some(cycles) = self.l1_cycles_override {
            if !(cycles.is_finite() && cycles > 0.0) {
                return fail("l1_cycles_override must be > 0");
            }
        }
        Ok(())
    }

    /// Check the kernel against a machine's cacheline size.
    pub fn validate_for(&self, machine: &MachineDescription) -> Result<()> {
        self.validate()?;
        if !machine.cacheline_bytes.is_multiple_of(self.element_bytes) {
            return Err(Error::validation(
                format!("kernel `{}`", self.name),
                format!(
                    "element_bytes {} does not divide the {}-byte cacheline of `{}`",
                    self.element_bytes, machine.cacheline_bytes, machine.name
                ),
            ));
        }
        Ok(())
    }
}

pub fn load_kernel(document: &str) -> Result<KernelDescription> {
    let kernel: KernelDescription =
        serde_json::from_str(document).map_err(|source| Error::Parse {
            context: "kernel description".into(),
            source,
        })?;
    kernel.validate()?;
    Ok(kernel)
}

/// Builtin name or path to a kernel JSON file.
pub fn resolve_kernel(arg: &str) -> Result<KernelDescription> {
    if let Some(kernel) = KernelDescription::builtin(arg) {
        return Ok(kernel);
    }
    let path = std::path::Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return load_kernel(&text);
    }
    Err(Error::Config(format!(
        "`{arg}` is neither a builtin kernel ({}) nor a kernel file",
        BUILTIN_NAMES.join(", ")
    )))
}

/// Loop iterations covered by one cacheline per stream.
pub fn iterations_per_cacheline(kernel: &KernelDescription, machine: &MachineDescription) -> u32 {
    machine.cacheline_bytes / kernel.element_bytes
}

/// Cycles to execute one cacheline-per-stream worth of iterations with all
/// operands in L1. Only load/store port throughput is charged; all other
/// instructions are assumed to overlap.
pub fn l1_cycles_per_cl_exact(kernel: &KernelDescription, machine: &MachineDescription) -> Exact {
    if let Some(cycles) = kernel.l1_cycles_override {
        return exact::from_f64(cycles);
    }
    let line = machine.cacheline_exact();
    let load = exact::int(kernel.load_streams as i64) * &line
        / exact::from_f64(machine.l1_load_bytes_per_cycle);
    let store = exact::int(kernel.store_streams as i64) * &line
        / exact::from_f64(machine.l1_store_bytes_per_cycle);
    if machine.l1_concurrent_load_store {
        load.max(store)
    } else {
        load + store
    }
}

pub fn l1_cycles_per_cl(kernel: &KernelDescription, machine: &MachineDescription) -> f64 {
    exact::to_f64(&l1_cycles_per_cl_exact(kernel, machine))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use proptest::prelude::*;

    #[test]
    fn iterations_per_line() {
        let core2 = bundled::core2();
        assert_eq!(
            iterations_per_cacheline(&KernelDescription::triad(), &core2),
            8
        );
        let mut wide = KernelDescription::load();
        wide.element_bytes = 64;
        assert_eq!(iterations_per_cacheline(&wide, &core2), 1);
        wide.element_bytes = 4;
        assert_eq!(iterations_per_cacheline(&wide, &core2), 16);
    }

    #[test]
    fn l1_column_for_builtins() {
        for machine in [bundled::core2(), bundled::nehalem()] {
            let cycles: Vec<f64> = KernelDescription::builtins()
                .iter()
                .map(|k| l1_cycles_per_cl(k, &machine))
                .collect();
            assert_eq!(cycles, vec![4.0, 4.0, 4.0, 8.0], "{}", machine.name);
        }
    }

    #[test]
    fn override_is_returned_verbatim() {
        let mut k = KernelDescription::new("jacobi", 1, 1, 6, 2);
        k.l1_cycles_override = Some(24.0);
        assert_eq!(l1_cycles_per_cl(&k, &bundled::nehalem()), 24.0);
    }

    #[test]
    fn non_concurrent_ports_add_up() {
        let mut m = bundled::core2();
        m.l1_concurrent_load_store = false;
        assert_eq!(l1_cycles_per_cl(&KernelDescription::triad(), &m), 12.0);
    }

    #[test]
    fn kernel_json() {
        let k = load_kernel(
            r#"{"name":"daxpy","load_streams":2,"store_streams":1,"adds":1,"mults":1,"element_bytes":8}"#,
        )
        .unwrap();
        assert_eq!(k.flops_per_iteration(), 2);
        assert!(load_kernel(r#"{"name":"x","load_streams":0,"store_streams":0,"adds":0,"mults":0,"element_bytes":8}"#).is_err());
        assert!(load_kernel(r#"{"name":"x","load_streams":1,"store_streams":0,"adds":0,"mults":0,"element_bytes":8,"simd":true}"#).is_err());
    }

    #[test]
    fn element_size_must_divide_line() {
        let mut k = KernelDescription::load();
        k.element_bytes = 128;
        assert!(k.validate_for(&bundled::core2()).is_err());
    }

    proptest! {
        #[test]
        fn l1_cycles_monotone_in_streams(
            loads in 0u32..6, stores in 0u32..6, concurrent in any::<bool>(),
        ) {
            prop_assume!(loads + stores > 0);
            let mut m = bundled::nehalem();
            m.l1_concurrent_load_store = concurrent;
            let base = l1_cycles_per_cl_exact(&KernelDescription::new("k", loads, stores, 0, 0), &m);
            let more_loads = l1_cycles_per_cl_exact(&KernelDescription::new("k", loads + 1, stores, 0, 0), &m);
            let more_stores = l1_cycles_per_cl_exact(&KernelDescription::new("k", loads, stores + 1, 0, 0), &m);
            prop_assert!(more_loads >= base);
            prop_assert!(more_stores >= base);
        }
    }
}
