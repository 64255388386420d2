//! Command-line driver. [`run`] parses arguments, dispatches and renders, and
//! returns the process exit code: 0 on success, 1 on a model or input error,
//! 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::balance::{self, QuotePrecision};
use crate::bundled;
use crate::cache_sim::{simulate_kernel, simulate_stencil, StencilWindow};
use crate::hierarchy::{prediction_table_at, Level};
use crate::kernel::{resolve_kernel, KernelDescription, BUILTIN_NAMES};
use crate::layer_condition::{
    classify_regime_with, hierarchy_prediction, parse_traffic, regime_balance_prediction,
};
use crate::measurements::{compare, load_measurements};
use crate::reference_check;
use crate::report::{self, Format};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "clperf",
    version,
    about = "Cycles-per-cacheline performance model for streaming loop kernels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Text => Format::Text,
            OutputFormat::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted cycles per cacheline update for kernels at each level
    Predict(PredictArgs),
    /// Words-per-flop balance prediction
    Balance(BalanceArgs),
    /// Stencil stream regime and per-bus stencil prediction
    LayerCondition(LayerConditionArgs),
    /// Count cacheline transfers with the LRU hierarchy simulator
    Simulate(SimulateArgs),
    /// Compare measured cycles against the model
    Compare(CompareArgs),
    /// Check the bundled machines against the published reference numbers
    PaperCheck,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Machine file or bundled name (core2, nehalem)
    #[arg(long, short)]
    pub machine: String,
    /// Builtin kernel names or kernel files
    #[arg(long, short, value_delimiter = ',', default_values_t = BUILTIN_NAMES.map(String::from))]
    pub kernels: Vec<String>,
    /// Restrict to these levels (L1, L2, L3, MEM)
    #[arg(long, short, value_delimiter = ',')]
    pub level: Vec<Level>,
    /// Print the per-bus breakdown of every cell
    #[arg(long)]
    pub breakdown: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    /// Machine file or bundled name; supplies bandwidth and peak by default
    #[arg(long, short)]
    pub machine: Option<String>,
    /// Kernel whose algorithmic balance to use
    #[arg(long, short)]
    pub kernel: Option<String>,
    /// Count the write-allocate read of every store stream
    #[arg(long)]
    pub rfo: bool,
    /// Machine balance in words/flop (overrides bandwidth)
    #[arg(long)]
    pub bm: Option<f64>,
    /// Algorithmic balance in words/flop (overrides the kernel)
    #[arg(long)]
    pub ba: Option<f64>,
    /// Sustained bandwidth in GB/s (default: the machine's triad bandwidth)
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Applicable peak in GFlop/s (default: the machine's peak)
    #[arg(long)]
    pub peak: Option<f64>,
    /// Round intermediates to this many significant figures
    #[arg(long)]
    pub sig_figs: Option<u32>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct LayerConditionArgs {
    /// Stencil file or bundled name (jacobi3d)
    #[arg(long, short, default_value = "jacobi3d")]
    pub stencil: String,
    #[arg(long, short)]
    pub machine: String,
    /// Grid points per dimension
    #[arg(long, short)]
    pub n: Option<u32>,
    /// Outer cache size in bytes (default: the machine's last cache level)
    #[arg(long)]
    pub cache_bytes: Option<u64>,
    /// Fraction of the cache the stencil may use
    #[arg(long, default_value_t = 1.0)]
    pub cache_fraction: f64,
    /// Applicable peak in GFlop/s for the balance prediction of the regime
    #[arg(long)]
    pub peak: Option<f64>,
    /// Round balance intermediates to this many significant figures
    #[arg(long)]
    pub sig_figs: Option<u32>,
    /// Cachelines per bus, L2-L1 outward, or a preset (jacobi-nehalem)
    #[arg(long)]
    pub traffic: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, short)]
    pub machine: String,
    /// Streaming kernel to replay
    #[arg(long, short, conflicts_with = "stencil")]
    pub kernel: Option<String>,
    /// Level the streaming working set is sized for
    #[arg(long, short, default_value = "L2")]
    pub level: Level,
    /// Stencil to replay instead of a kernel
    #[arg(long, short)]
    pub stencil: Option<String>,
    /// Stencil grid points per dimension
    #[arg(long, short)]
    pub n: Option<u32>,
    /// Stencil planes to average over after two warm-up planes
    #[arg(long)]
    pub planes: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, short)]
    pub machine: String,
    /// Measurement CSV (default: bundled dataset)
    #[arg(long)]
    pub measurements: Option<String>,
    /// Kernel files for measurements naming non-builtin kernels
    #[arg(long, short, value_delimiter = ',')]
    pub kernels: Vec<String>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

/// Parse `args` (including the program name) and execute.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "clperf: {e}");
            1
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn precision(sig_figs: Option<u32>) -> QuotePrecision {
    sig_figs.map_or(QuotePrecision::Exact, QuotePrecision::SignificantFigures)
}

fn resolve_kernels(names: &[String]) -> Result<Vec<KernelDescription>> {
    names.iter().map(|n| resolve_kernel(n)).collect()
}

/// Run one subcommand, writing to `out`. Returns the exit code for
/// completed commands (`paper-check` returns 1 when a check fails).
pub fn execute(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Predict(a) => {
            let machine = bundled::resolve_machine(&a.machine)?;
            let kernels = resolve_kernels(&a.kernels)?;
            let levels = if a.level.is_empty() {
                Level::all_for(&machine)
            } else {
                a.level.clone()
            };
            let table = prediction_table_at(&machine, &kernels, &levels)?;
            match a.format.into() {
                Format::Text => {
                    write!(out, "{}", report::prediction_grid_text(&table)).map_err(io)?;
                    if a.breakdown {
                        for p in table.rows.iter().flatten() {
                            writeln!(out, "{}", report::prediction_breakdown_text(p))
                                .map_err(io)?;
                        }
                    }
                }
                Format::Csv => {
                    write!(out, "{}", report::prediction_csv(&table, &machine)?).map_err(io)?
                }
            }
        }
        Command::Balance(a) => {
            let machine = a
                .machine
                .as_deref()
                .map(bundled::resolve_machine)
                .transpose()?;
            let peak = match (a.peak, &machine) {
                (Some(p), _) => p,
                (None, Some(m)) => m.peak_gflops(),
                (None, None) => {
                    return Err(Error::Config("balance needs --peak or --machine".into()))
                }
            };
            let ba = match (a.ba, &a.kernel) {
                (Some(ba), _) => ba,
                (None, Some(k)) => balance::algorithmic_balance(&resolve_kernel(k)?, a.rfo)?,
                (None, None) => return Err(Error::Config("balance needs --ba or --kernel".into())),
            };
            let r = match a.bm {
                Some(bm) => balance::balance_prediction(bm, ba, peak)?,
                None => {
                    let bw = match (a.bandwidth, &machine) {
                        (Some(bw), _) => bw,
                        (None, Some(m)) => m.measured_stream_triad_gbs.ok_or_else(|| {
                            Error::Config(format!(
                                "machine `{}` has no stream_triad_gbs; pass --bandwidth",
                                m.name
                            ))
                        })?,
                        (None, None) => {
                            return Err(Error::Config(
                                "balance needs --bm, --bandwidth or --machine".into(),
                            ))
                        }
                    };
                    balance::predict_from_bandwidth(bw, ba, peak, precision(a.sig_figs))?
                }
            };
            let text = match a.format.into() {
                Format::Text => report::balance_text(&r),
                Format::Csv => report::balance_csv(&r),
            };
            write!(out, "{text}").map_err(io)?;
        }
        Command::LayerCondition(a) => {
            let stencil = bundled::resolve_stencil(&a.stencil)?;
            let machine = bundled::resolve_machine(&a.machine)?;
            if let Some(n) =
                a.n.or((stencil.grid_points_per_dim > 0).then_some(stencil.grid_points_per_dim))
            {
                let cache = a
                    .cache_bytes
                    .unwrap_or(machine.outermost_cache().size_bytes);
                let regime = classify_regime_with(&stencil.with_grid(n), cache, a.cache_fraction)?;
                write!(out, "{}", report::regime_text(&regime, n, cache)).map_err(io)?;
                if let Some(peak) = a.peak {
                    let r = regime_balance_prediction(
                        &stencil,
                        &machine,
                        &regime,
                        peak,
                        precision(a.sig_figs),
                    )?;
                    write!(out, "{}", report::balance_text(&r)).map_err(io)?;
                }
            } else if a.traffic.is_none() {
                return Err(Error::Config(
                    "layer-condition needs --n or --traffic".into(),
                ));
            }
            if let Some(t) = &a.traffic {
                let p = hierarchy_prediction(&stencil, &machine, &parse_traffic(t)?)?;
                write!(out, "{}", report::stencil_prediction_text(&p)).map_err(io)?;
            }
        }
        Command::Simulate(a) => {
            let machine = bundled::resolve_machine(&a.machine)?;
            let report = match (&a.kernel, &a.stencil) {
                (_, Some(s)) => {
                    let stencil = bundled::resolve_stencil(s)?;
                    let n =
                        a.n.or((stencil.grid_points_per_dim > 0)
                            .then_some(stencil.grid_points_per_dim))
                            .ok_or_else(|| Error::Config("stencil simulation needs --n".into()))?;
                    let window = a.planes.map_or(
                        StencilWindow::rest_of_sweep(n),
                        StencilWindow::after_two_planes,
                    );
                    simulate_stencil(&stencil, &machine, n, window)?
                }
                (Some(k), None) => simulate_kernel(&resolve_kernel(k)?, &machine, a.level)?,
                (None, None) => {
                    return Err(Error::Config("simulate needs --kernel or --stencil".into()))
                }
            };
            let text = match a.format.into() {
                Format::Text => report::sim_text(&report),
                Format::Csv => report::sim_csv(&report),
            };
            write!(out, "{text}").map_err(io)?;
        }
        Command::Compare(a) => {
            let machine = bundled::resolve_machine(&a.machine)?;
            let mut kernels = KernelDescription::builtins();
            kernels.extend(resolve_kernels(&a.kernels)?);
            let text = match &a.measurements {
                Some(path) => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
                None => bundled::measurements_text()?,
            };
            let kernel_names: Vec<&str> = kernels.iter().map(|k| k.name.as_str()).collect();
            let records = load_measurements(&text, &[], &kernel_names)?;
            let rows = compare(&records, &machine, &kernels)?;
            if rows.is_empty() {
                return Err(Error::Config(format!(
                    "no measurements for machine `{}`",
                    machine.name
                )));
            }
            let rendered = match a.format.into() {
                Format::Text => {
                    let mut names: Vec<String> = Vec::new();
                    for r in &rows {
                        if !names.contains(&r.prediction.kernel) {
                            names.push(r.prediction.kernel.clone());
                        }
                    }
                    let mut levels: Vec<Level> = records.iter().map(|r| r.level).collect();
                    levels.sort();
                    levels.dedup();
                    report::comparison_text(&machine, &rows, &names, &levels)
                }
                Format::Csv => report::comparison_csv(&rows),
            };
            write!(out, "{rendered}").map_err(io)?;
        }
        Command::PaperCheck => {
            let results = reference_check::run_all()?;
            for r in &results {
                writeln!(out, "{r}").map_err(io)?;
            }
            let failed = results.iter().filter(|r| !r.pass).count();
            writeln!(
                out,
                "{} of {} checks passed",
                results.len() - failed,
                results.len()
            )
            .map_err(io)?;
            return Ok(if failed == 0 { 0 } else { 1 });
        }
    }
    Ok(0)
}
