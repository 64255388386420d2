//! Analytical cycles-per-cacheline performance model for bandwidth-limited
//! loop kernels on inclusive, write-allocate cache hierarchies.
//!
//! The crate is organized bottom-up:
//!
//! * [`machine`] and [`kernel`] describe the hardware and the loop body.
//! * [`balance`] implements the classic words-per-flop balance metric.
//! * [`hierarchy`] is the diagnostic model: non-overlapping L1 execution plus
//!   per-bus transfer cycles, summed per cacheline update.
//! * [`layer_condition`] classifies stencil stream regimes and predicts a
//!   stencil update from an explicit per-crossing traffic list.
//! * [`cache_sim`] is an independent cacheline-granular LRU simulator used to
//!   check the analytic traffic accounting.
//! * [`measurements`] ingests measured cycle counts and derives ratios and
//!   bandwidths.
//! * [`report`], [`reference_check`] and [`cli`] render results and drive the
//!   command-line tool.

pub mod balance;
pub mod bundled;
pub mod cache_sim;
pub mod cli;
mod error;
pub mod exact;
pub mod hierarchy;
pub mod kernel;
pub mod layer_condition;
pub mod machine;
pub mod measurements;
pub mod reference_check;
pub mod report;

pub use balance::{BalanceReport, QuotePrecision};
pub use cache_sim::{AccessKind, SimHierarchy, SimReport};
pub use error::{Error, Result};
pub use hierarchy::{Level, LevelPrediction, Transfer};
pub use kernel::KernelDescription;
pub use layer_condition::{StencilSpec, StreamRegime};
pub use machine::{CacheLevel, MachineDescription, MemorySystem, WritePolicy};
pub use measurements::{ComparisonRow, MeasurementRecord};

/// Bytes in one "word": a double-precision value.
pub const WORD_BYTES: u32 = 8;
