//! Cacheline-granular simulator of an inclusive, write-allocate, write-back
//! hierarchy with fully-associative LRU levels.
//!
//! It only counts transfers. Crossing `j` is the bus between level `j`
//! (0-based, 0 = L1) and the next level out, or memory for the last level.
//! A read miss pulls the line inward over every crossing between the level
//! that holds it and L1. A write behaves like a read and then marks the line
//! dirty. Evicting a dirty line moves it one crossing outward.
//!
//! Every access refreshes the line's recency in all levels, so each level
//! holds the most recently used lines that fit and inclusion follows.

use std::collections::HashMap;

use num::rational::Ratio;

use crate::hierarchy::{Crossing, Level};
use crate::kernel::KernelDescription;
use crate::layer_condition::StencilSpec;
use crate::machine::MachineDescription;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

const NIL: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    line: u64,
    dirty: bool,
    prev: usize,
    next: usize,
}

/// Fully-associative LRU set of cachelines.
#[derive(Debug, Clone)]
struct LruLevel {
    capacity: usize,
    slots: HashMap<u64, usize>,
    nodes: Vec<Node>,
    free: Vec<usize>,
    /// Most recently used.
    head: usize,
    /// Least recently used.
    tail: usize,
}

impl LruLevel {
    fn new(capacity: usize) -> Self {
        LruLevel {
            capacity,
            slots: HashMap::with_capacity(capacity),
            nodes: Vec::with_capacity(capacity),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
        }
    }

    fn contains(&self, line: u64) -> bool {
        self.slots.contains_key(&line)
    }

    fn unlink(&mut self, idx: usize) {
        let (prev, next) = (self.nodes[idx].prev, self.nodes[idx].next);
        if prev == NIL {
            self.head = next;
        } else {
            self.nodes[prev].next = next;
        }
        if next == NIL {
            self.tail = prev;
        } else {
            self.nodes[next].prev = prev;
        }
    }

    fn push_front(&mut self, idx: usize) {
        self.nodes[idx].prev = NIL;
        self.nodes[idx].next = self.head;
        if self.head != NIL {
            self.nodes[self.head].prev = idx;
        }
        self.head = idx;
        if self.tail == NIL {
            self.tail = idx;
        }
    }

    fn touch(&mut self, line: u64) {
        if let Some(&idx) = self.slots.get(&line) {
            if self.head != idx {
                self.unlink(idx);
                self.push_front(idx);
            }
        }
    }

    /// Insert as most recent; returns the evicted line and its dirty flag.
    fn insert(&mut self, line: u64) -> Option<(u64, bool)> {
        debug_assert!(!self.contains(line));
        let mut victim = None;
        if self.slots.len() == self.capacity {
            let idx = self.tail;
            let old = self.nodes[idx].line;
            victim = Some((old, self.nodes[idx].dirty));
            self.unlink(idx);
            self.slots.remove(&old);
            self.free.push(idx);
        }
        let node = Node {
            line,
            dirty: false,
            prev: NIL,
            next: NIL,
        };
        let idx = match self.free.pop() {
            Some(idx) => {
                self.nodes[idx] = node;
                idx
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        };
        self.slots.insert(line, idx);
        self.push_front(idx);
        victim
    }

    /// Remove a line; returns its dirty flag if it was present.
    fn remove(&mut self, line: u64) -> Option<bool> {
        let idx = self.slots.remove(&line)?;
        self.unlink(idx);
        self.free.push(idx);
        Some(self.nodes[idx].dirty)
    }

    fn set_dirty(&mut self, line: u64) {
        let idx = self.slots[&line];
        self.nodes[idx].dirty = true;
    }

    fn lines(&self) -> impl Iterator<Item = u64> + '_ {
        self.slots.keys().copied()
    }
}

/// Transfer counters, indexed by crossing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransferCounters {
    pub inward: Vec<u64>,
    pub outward: Vec<u64>,
    pub accesses: u64,
}

#[derive(Debug, Clone)]
pub struct SimHierarchy {
    levels: Vec<LruLevel>,
    labels: Vec<String>,
    counters: TransferCounters,
}

impl SimHierarchy {
    /// Levels from L1 outward, capacities in cachelines, strictly increasing.
    pub fn new(capacities: &[usize]) -> Result<Self> {
        if capacities.is_empty() || capacities.contains(&0) {
            return Err(Error::Sizing(
                "every simulated level needs at least one cacheline".into(),
            ));
        }
        if capacities.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Sizing(
                "simulated capacities must strictly increase outward".into(),
            ));
        }
        let n = capacities.len();
        let labels = (0..n)
            .map(|j| {
                let outer = if j + 1 < n {
                    Level::Cache(j as u8 + 2)
                } else {
                    Level::Memory
                };
                format!("{}-{}", outer, Level::Cache(j as u8 + 1))
            })
            .collect();
        Ok(SimHierarchy {
            levels: capacities.iter().map(|&c| LruLevel::new(c)).collect(),
            labels,
            counters: TransferCounters {
                inward: vec![0; n],
                outward: vec![0; n],
                accesses: 0,
            },
        })
    }

    /// One simulated level per cache level of the machine.
    pub fn for_machine(machine: &MachineDescription) -> Result<Self> {
        let line = machine.cacheline_bytes as u64;
        let capacities: Vec<usize> = machine
            .cache_levels
            .iter()
            .map(|c| (c.size_bytes / line) as usize)
            .collect();
        Self::new(&capacities)
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn crossing_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counters(&self) -> &TransferCounters {
        &self.counters
    }

    pub fn contains(&self, level: usize, line: u64) -> bool {
        self.levels[level].contains(line)
    }

    pub fn occupancy(&self, level: usize) -> usize {
        self.levels[level].slots.len()
    }

    /// Every line in level `k` is also in level `k + 1`.
    pub fn inclusion_holds(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[0].lines().all(|line| w[1].contains(line)))
    }

    pub fn access(&mut self, line: u64, kind: AccessKind) {
        self.counters.accesses += 1;
        let depth = self.levels.len();
        let found = (0..depth)
            .find(|&i| self.levels[i].contains(line))
            .unwrap_or(depth);
        for j in 0..found {
            self.counters.inward[j] += 1;
        }
        // Fill outer levels first so a back-invalidation can never remove the
        // line being brought in.
        for i in (0..found).rev() {
            if let Some((victim, dirty)) = self.levels[i].insert(line) {
                self.evict(i, victim, dirty);
            }
        }
        for level in &mut self.levels[found..] {
            level.touch(line);
        }
        if kind == AccessKind::Write {
            self.levels[0].set_dirty(line);
        }
    }

    fn evict(&mut self, level: usize, victim: u64, dirty_here: bool) {
        // Back-invalidate inner copies; a dirty inner copy is written out
        // through every crossing up to this level.
        let mut innermost_dirty = if dirty_here { Some(level) } else { None };
        for inner in (0..level).rev() {
            if let Some(true) = self.levels[inner].remove(victim) {
                innermost_dirty = Some(inner);
            }
        }
        if let Some(from) = innermost_dirty {
            for j in from..=level {
                self.counters.outward[j] += 1;
            }
            if level + 1 < self.levels.len() {
                self.levels[level + 1].set_dirty(victim);
            }
        }
    }
}

/// Averages over a steady-state window.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub crossing_labels: Vec<String>,
    pub window_inward: Vec<u64>,
    pub window_outward: Vec<u64>,
    pub total_accesses: u64,
    /// Window bounds in updates (streaming) or plane iterations (stencil).
    pub window: (u64, u64),
    /// Cacheline updates inside the window.
    pub window_updates: Ratio<u64>,
}

impl SimReport {
    fn from_window(
        hierarchy: &SimHierarchy,
        start: &TransferCounters,
        window: (u64, u64),
        window_updates: Ratio<u64>,
    ) -> Self {
        let end = hierarchy.counters();
        let diff = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        SimReport {
            crossing_labels: hierarchy.crossing_labels().to_vec(),
            window_inward: diff(&end.inward, &start.inward),
            window_outward: diff(&end.outward, &start.outward),
            total_accesses: end.accesses,
            window,
            window_updates,
        }
    }

    pub fn inward_per_update(&self, crossing: usize) -> Ratio<u64> {
        Ratio::from_integer(self.window_inward[crossing]) / self.window_updates
    }

    pub fn outward_per_update(&self, crossing: usize) -> Ratio<u64> {
        Ratio::from_integer(self.window_outward[crossing]) / self.window_updates
    }

    pub fn total_per_update(&self, crossing: usize) -> Ratio<u64> {
        self.inward_per_update(crossing) + self.outward_per_update(crossing)
    }

    /// Inward transfers per update over the memory bus.
    pub fn memory_inward_per_update(&self) -> Ratio<u64> {
        self.inward_per_update(self.window_inward.len() - 1)
    }
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Streaming working set (total cachelines) for a target level: larger than
/// every inner level and no larger than the target.
fn streaming_working_set(capacities: &[usize], target: Level, streams: usize) -> Result<usize> {
    let sizing = |reason: String| Err(Error::Sizing(reason));
    match target {
        Level::Memory => {
            let last = *capacities.last().expect("non-empty");
            Ok((2 * last).div_ceil(streams) * streams)
        }
        Level::Cache(k) => {
            let k = k as usize;
            if k == 0 || k > capacities.len() {
                return sizing(format!("no L{k} in the simulated hierarchy"));
            }
            let upper = capacities[k - 1];
            let lower = if k >= 2 { capacities[k - 2] } else { 0 };
            let mid = ((lower + upper) / 2) / streams * streams;
            let top = upper / streams * streams;
            let w = if mid > lower { mid } else { top };
            if w == 0 || w <= lower {
                return sizing(format!(
                    "L{k} ({upper} lines) cannot hold a working set of {streams} streams larger than the inner level ({lower} lines)"
                ));
            }
            Ok(w)
        }
    }
}

/// Replay a streaming kernel with a working set that fits `target` but no
/// inner level, for two passes, and report the second pass.
pub fn simulate_kernel(
    kernel: &KernelDescription,
    machine: &MachineDescription,
    target: Level,
) -> Result<SimReport> {
    kernel.validate_for(machine)?;
    let mut sim = SimHierarchy::for_machine(machine)?;
    let capacities: Vec<usize> = sim.levels.iter().map(|l| l.capacity).collect();
    let streams = kernel.streams() as usize;
    let per_stream = (streaming_working_set(&capacities, target, streams)? / streams) as u64;

    let line_of = |stream: u32, update: u64| stream as u64 * per_stream + update;
    let pass = |sim: &mut SimHierarchy| {
        for u in 0..per_stream {
            for s in 0..kernel.load_streams {
                sim.access(line_of(s, u), AccessKind::Read);
            }
            for s in 0..kernel.store_streams {
                sim.access(line_of(kernel.load_streams + s, u), AccessKind::Write);
            }
        }
    };
    pass(&mut sim);
    let start = sim.counters().clone();
    pass(&mut sim);
    Ok(SimReport::from_window(
        &sim,
        &start,
        (per_stream, 2 * per_stream),
        Ratio::from_integer(per_stream),
    ))
}

/// Which plane iterations of a stencil sweep to average over. Plane
/// iterations are counted across sweeps; sweep `s + 1` reads what sweep `s`
/// wrote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StencilWindow {
    pub warmup_planes: u64,
    pub measured_planes: u64,
}

impl StencilWindow {
    /// Discard the first two planes, measure `measured` planes.
    pub fn after_two_planes(measured: u64) -> Self {
        StencilWindow {
            warmup_planes: 2,
            measured_planes: measured,
        }
    }

    /// Discard two planes, measure the rest of the first sweep.
    pub fn rest_of_sweep(n: u32) -> Self {
        Self::after_two_planes((n as u64).saturating_sub(4).max(1))
    }
}

/// Replay a 3D Jacobi sweep (`k` innermost) over two `n^3` arrays and report
/// per-cacheline-update transfers over the window.
pub fn simulate_stencil(
    stencil: &StencilSpec,
    machine: &MachineDescription,
    grid_n: u32,
    window: StencilWindow,
) -> Result<SimReport> {
    stencil.validate()?;
    if stencil.dimensions != 3 {
        return Err(Error::Domain(
            "stencil simulation needs a 3D stencil".into(),
        ));
    }
    if grid_n < 3 {
        return Err(Error::Domain(format!(
            "grid must be at least 3 points per dimension, got {grid_n}"
        )));
    }
    if window.measured_planes == 0 {
        return Err(Error::Domain(
            "measurement window must cover at least one plane".into(),
        ));
    }
    let line_bytes = machine.cacheline_bytes as u64;
    let elem = stencil.element_bytes as u64;
    if !line_bytes.is_multiple_of(elem) {
        return Err(Error::validation(
            format!("stencil `{}`", stencil.name),
            "element_bytes must divide the cacheline",
        ));
    }
    let mut sim = SimHierarchy::for_machine(machine)?;

    let n = grid_n as u64;
    let array_bytes = n * n * n * elem;
    let bases = [0, array_bytes.div_ceil(line_bytes) * line_bytes];
    let line = |array: usize, i: u64, j: u64, k: u64| {
        (bases[array] + ((i * n + j) * n + k) * elem) / line_bytes
    };

    let interior = n - 2;
    let total_planes = window.warmup_planes + window.measured_planes;
    let mut start = None;
    let mut previous = [u64::MAX; 8];
    for g in 0..total_planes {
        if g == window.warmup_planes {
            start = Some(sim.counters().clone());
        }
        let sweep = (g / interior) as usize;
        let i = g % interior + 1;
        let (src, dst) = (sweep % 2, 1 - sweep % 2);
        for j in 1..n - 1 {
            for k in 1..n - 1 {
                let touched = [
                    line(src, i, j, k),
                    line(src, i - 1, j, k),
                    line(src, i + 1, j, k),
                    line(src, i, j - 1, k),
                    line(src, i, j + 1, k),
                    line(src, i, j, k - 1),
                    line(src, i, j, k + 1),
                    line(dst, i, j, k),
                ];
                // Repeating the previous update's line sequence leaves LRU
                // state and counters unchanged.
                if touched == previous {
                    continue;
                }
                for &l in &touched[..7] {
                    sim.access(l, AccessKind::Read);
                }
                sim.access(touched[7], AccessKind::Write);
                previous = touched;
            }
        }
    }
    let updates = window.measured_planes * interior * interior;
    let per_line = line_bytes / elem;
    Ok(SimReport::from_window(
        &sim,
        &start.expect("window starts inside the run"),
        (window.warmup_planes, total_planes),
        Ratio::new(updates, per_line),
    ))
}

/// Regime stream count (from `candidates`) nearest to the simulated memory
/// reads per cacheline update.
pub fn nearest_stream_count(report: &SimReport, candidates: &[u32]) -> u32 {
    let measured = ratio_f64(report.memory_inward_per_update());
    *candidates
        .iter()
        .min_by(|a, b| {
            let da = (measured - **a as f64).abs();
            let db = (measured - **b as f64).abs();
            da.total_cmp(&db)
        })
        .expect("non-empty candidates")
}

/// Analytic cachelines per update over each of the machine's buses for a
/// working set in `target`: zero beyond the target.
pub fn expected_crossing_counts(
    kernel: &KernelDescription,
    crossings: &[Crossing],
    target: Level,
    machine: &MachineDescription,
) -> Vec<u32> {
    let used = target.crossings(machine);
    crossings
        .iter()
        .enumerate()
        .map(|(j, c)| {
            if j < used {
                crate::hierarchy::crossing_cachelines(kernel, c)
            } else {
                0
            }
        })
        .collect()
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    ratio_f64(r)
}
