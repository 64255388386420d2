//! Data shipped with the crate: the two reference machines, the 3D Jacobi
//! stencil and the measured cycle counts.
//!
//! Setting `CLPERF_DATA_DIR` makes name lookups consult that directory first
//! (`<dir>/<name>.json`, `<dir>/measurements.csv`).

use std::path::{Path, PathBuf};

use crate::layer_condition::{load_stencil, StencilSpec};
use crate::machine::{load_machine, load_machine_file, MachineDescription};
use crate::{Error, Result};

pub const DATA_DIR_ENV: &str = "CLPERF_DATA_DIR";

pub const CORE2_JSON: &str = include_str!("../data/core2.json");
pub const NEHALEM_JSON: &str = include_str!("../data/nehalem.json");
pub const JACOBI3D_JSON: &str = include_str!("../data/jacobi3d.json");
pub const MEASUREMENTS_CSV: &str = include_str!("../data/measurements.csv");

pub const MACHINE_NAMES: [&str; 2] = ["core2", "nehalem"];

/// Intel Core 2 Q9550: L1 + 6 MB L2, DDR2-800 dual channel.
pub fn core2() -> MachineDescription {
    load_machine(CORE2_JSON).expect("bundled core2.json is valid")
}

/// Intel Core i7 920: L1 + 256 kB L2 + 8 MB L3, DDR3-1066 triple channel.
pub fn nehalem() -> MachineDescription {
    load_machine(NEHALEM_JSON).expect("bundled nehalem.json is valid")
}

pub fn jacobi3d() -> StencilSpec {
    load_stencil(JACOBI3D_JSON).expect("bundled jacobi3d.json is valid")
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

/// Resolve a machine argument: an existing file path, a file in the data
/// directory override, or a bundled machine name.
pub fn resolve_machine(arg: &str) -> Result<MachineDescription> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_machine_file(path);
    }
    if let Some(dir) = data_dir() {
        let candidate = dir.join(format!("{arg}.json"));
        if candidate.is_file() {
            return load_machine_file(candidate);
        }
    }
    match arg {
        "core2" => Ok(core2()),
        "nehalem" => Ok(nehalem()),
        _ => Err(Error::Config(format!(
            "no machine file or bundled machine named `{arg}` (bundled: {})",
            MACHINE_NAMES.join(", ")
        ))),
    }
}

pub fn resolve_stencil(arg: &str) -> Result<StencilSpec> {
    let path = Path::new(arg);
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    if path.is_file() {
        return load_stencil(&read(path)?);
    }
    if let Some(dir) = data_dir() {
        let candidate = dir.join(format!("{arg}.json"));
        if candidate.is_file() {
            return load_stencil(&read(&candidate)?);
        }
    }
    match arg {
        "jacobi3d" | "jacobi" => Ok(jacobi3d()),
        _ => Err(Error::Config(format!(
            "no stencil file or bundled stencil named `{arg}` (bundled: jacobi3d)"
        ))),
    }
}

/// Measurement CSV text: the data-directory override if present, else the
/// bundled dataset.
pub fn measurements_text() -> Result<String> {
    if let Some(dir) = data_dir() {
        let candidate = dir.join("measurements.csv");
        if candidate.is_file() {
            return std::fs::read_to_string(&candidate).map_err(|e| Error::io(&candidate, e));
        }
    }
    Ok(MEASUREMENTS_CSV.to_string())
}

/// All machines known by name, for measurement validation.
pub fn known_machines() -> Vec<MachineDescription> {
    vec![core2(), nehalem()]
}
