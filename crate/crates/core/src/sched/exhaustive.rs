//! Exhaustive minimum-energy scheduling for small instances — the oracle
//! the list scheduler is measured against.
//!
//! Per-task energy does not depend on placement order, so assignments
//! (core, variant, frequency per task) are enumerated in nondecreasing
//! total energy by a uniform-cost search; the first assignments that admit
//! any deadline-feasible packing are optimal. Feasibility and the makespan
//! tie-break use a branch-and-bound search over all packing orders.

use super::{
    candidates, critical_path, fastest_times, finalize, upward_ranks, Candidate, SchedError,
    Schedule, ScheduleEntry, ScheduleMode, Violation,
};
use crate::model::{AnalysisResults, PlatformModel, TaskGraph};
use crate::sched::validate_schedule;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::cmp::Reverse;

/// Envelope the exhaustive search accepts.
const MAX_TASKS: usize = 8;
const MAX_CORES: usize = 3;
const MAX_VARIANTS: usize = 3;
const MAX_FREQS: usize = 3;
/// Safety valve on the assignment search.
const MAX_POPS: usize = 2_000_000;

pub fn schedule_exhaustive(
    graph: &TaskGraph,
    platform: &PlatformModel,
    results: &AnalysisResults,
    deadline_ms: f64,
    mode: ScheduleMode,
) -> Result<Schedule, SchedError> {
    if graph.nodes.len() > MAX_TASKS {
        return Err(SchedError::SearchSpaceTooLarge(format!(
            "{} tasks exceed the exhaustive limit of {MAX_TASKS}",
            graph.nodes.len()
        )));
    }
    if platform.cores.len() > MAX_CORES {
        return Err(SchedError::SearchSpaceTooLarge(format!(
            "{} cores exceed the exhaustive limit of {MAX_CORES}",
            platform.cores.len()
        )));
    }
    for ct in &platform.core_types {
        if ct.freq_levels.len() > MAX_FREQS {
            return Err(SchedError::SearchSpaceTooLarge(format!(
                "core type '{}' has {} frequency levels, limit {MAX_FREQS}",
                ct.name,
                ct.freq_levels.len()
            )));
        }
        for task in &graph.nodes {
            let n = results.variants_of(&task.name, &ct.name).len();
            if n > MAX_VARIANTS {
                return Err(SchedError::SearchSpaceTooLarge(format!(
                    "task '{}' has {n} variants on '{}', limit {MAX_VARIANTS}",
                    task.name, ct.name
                )));
            }
        }
    }

    let cands = candidates(graph, platform, results)?;
    if graph.nodes.is_empty() {
        return Ok(finalize(mode, Vec::new()));
    }

    let inst = Instance::build(graph, &cands);
    let search = assignment_search(&inst, deadline_ms)?;

    match search {
        Some((assignment, order)) => {
            let entries = simulate(&inst, &assignment, &order);
            let schedule = finalize(mode, entries);
            let violations: Vec<String> = validate_schedule(&schedule, graph, platform, results)
                .iter()
                .filter(|v| !matches!(v, Violation::DeadlineMiss { .. }))
                .map(|v| v.to_string())
                .collect();
            if violations.is_empty() {
                Ok(schedule)
            } else {
                Err(SchedError::Internal(violations))
            }
        }
        None => {
            let weights = fastest_times(&cands);
            let ranks = upward_ranks(graph, &weights);
            let best = ranks.values().copied().fold(0.0, f64::max);
            Err(SchedError::Infeasible {
                deadline_ms,
                best_makespan_ms: best,
                critical_path: critical_path(graph, &ranks),
            })
        }
    }
}

/// Index-based view of the instance: tasks sorted by name.
struct Instance<'a> {
    names: Vec<&'a str>,
    options: Vec<Vec<&'a Candidate>>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl<'a> Instance<'a> {
    fn build(graph: &'a TaskGraph, cands: &'a BTreeMap<String, Vec<Candidate>>) -> Self {
        let mut names: Vec<&str> = graph.nodes.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        let index: BTreeMap<&str, usize> =
            names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut options: Vec<Vec<&Candidate>> = Vec::with_capacity(names.len());
        for &name in &names {
            let mut opts: Vec<&Candidate> = cands[name].iter().collect();
            // Nondecreasing energy; the enumeration order already realizes
            // the (core, variant, frequency) tie order, and the sort is
            // stable.
            opts.sort_by(|a, b| a.energy_mj.total_cmp(&b.energy_mj));
            options.push(opts);
        }
        let mut preds = vec![Vec::new(); names.len()];
        let mut succs = vec![Vec::new(); names.len()];
        for (u, v) in &graph.edges {
            let (ui, vi) = (index[u.as_str()], index[v.as_str()]);
            preds[vi].push(ui);
            succs[ui].push(vi);
        }
        for list in preds.iter_mut().chain(succs.iter_mut()) {
            list.sort_unstable();
        }
        Instance {
            names,
            options,
            preds,
            succs,
        }
    }

    fn energy_of(&self, assignment: &[u16]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| self.options[i][j as usize].energy_mj)
            .sum()
    }

    /// Contention-free longest path — a lower bound on any makespan.
    fn critical_lb(&self, assignment: &[u16]) -> f64 {
        let n = self.names.len();
        let mut finish_lb = vec![0.0f64; n];
        let mut order: Vec<usize> = (0..n).collect();
        // Kahn-free: process in an order where preds come first.
        order.sort_by_key(|&i| self.depth(i));
        let mut lb = 0.0f64;
        for &i in &order {
            let ready = self.preds[i]
                .iter()
                .map(|&p| finish_lb[p])
                .fold(0.0, f64::max);
            finish_lb[i] = ready + self.options[i][assignment[i] as usize].time_ms;
            lb = lb.max(finish_lb[i]);
        }
        lb
    }

    fn depth(&self, i: usize) -> usize {
        // Longest predecessor chain length; small n, recursion is fine.
        self.preds[i]
            .iter()
            .map(|&p| 1 + self.depth(p))
            .max()
            .unwrap_or(0)
    }

    /// Key realizing the "lexicographic assignment" tie-break.
    fn lex_key(&self, assignment: &[u16]) -> Vec<(u32, String, u64)> {
        assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let c = self.options[i][j as usize];
                (c.core, c.variant.clone(), c.frequency_mhz.to_bits())
            })
            .collect()
    }
}

type Assignment = Vec<u16>;

/// Uniform-cost search over assignments; returns the minimum-energy
/// feasible assignment (ties: smaller makespan, then lexicographic) along
/// with a packing order realizing its minimal makespan.
fn assignment_search(
    inst: &Instance,
    deadline_ms: f64,
) -> Result<Option<(Assignment, Vec<usize>)>, SchedError> {
    let n = inst.names.len();
    let start: Assignment = vec![0; n];
    let mut heap: BinaryHeap<Reverse<(u64, Assignment)>> = BinaryHeap::new();
    let mut seen: HashSet<Assignment> = HashSet::new();
    heap.push(Reverse((inst.energy_of(&start).to_bits(), start.clone())));
    seen.insert(start);

    struct Best {
        energy: f64,
        makespan: f64,
        key: Vec<(u32, String, u64)>,
        assignment: Assignment,
        order: Vec<usize>,
    }
    let mut best: Option<Best> = None;
    let mut pops = 0usize;

    while let Some(Reverse((energy_bits, state))) = heap.pop() {
        pops += 1;
        if pops > MAX_POPS {
            return Err(SchedError::SearchSpaceTooLarge(format!(
                "assignment search exceeded {MAX_POPS} states"
            )));
        }
        let energy = f64::from_bits(energy_bits);
        if let Some(b) = &best {
            if energy > b.energy {
                break;
            }
        }

        if inst.critical_lb(&state) <= deadline_ms {
            if let Some((makespan, order)) = min_makespan(inst, &state, deadline_ms) {
                let key = inst.lex_key(&state);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        debug_assert!(energy >= b.energy);
                        energy == b.energy
                            && (makespan < b.makespan
                                || (makespan == b.makespan && key < b.key))
                    }
                };
                if better {
                    best = Some(Best {
                        energy,
                        makespan,
                        key,
                        assignment: state.clone(),
                        order,
                    });
                }
            }
        }

        // Expand: bump one task's option index.
        for i in 0..n {
            if (state[i] as usize) + 1 < inst.options[i].len() {
                let mut next = state.clone();
                next[i] += 1;
                if seen.insert(next.clone()) {
                    heap.push(Reverse((inst.energy_of(&next).to_bits(), next)));
                }
            }
        }
    }

    Ok(best.map(|b| (b.assignment, b.order)))
}

/// Minimal makespan over all packing orders of a fixed assignment, with a
/// deterministic order realizing it. `None` if every packing misses the
/// deadline.
fn min_makespan(inst: &Instance, assignment: &[u16], deadline_ms: f64) -> Option<(f64, Vec<usize>)> {
    let n = inst.names.len();
    // Assignment-specific downstream chain lengths for the bound; sinks
    // first, so successors are final when a task is processed.
    let mut tails = vec![0.0f64; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(inst.depth(i)));
    for &i in &order {
        let tail = inst.succs[i].iter().map(|&s| tails[s]).fold(0.0, f64::max);
        tails[i] = inst.options[i][assignment[i] as usize].time_ms + tail;
    }

    struct Dfs<'i, 'a> {
        inst: &'i Instance<'a>,
        assignment: &'i [u16],
        tails: &'i [f64],
        deadline_ms: f64,
        best: f64,
        best_order: Option<Vec<usize>>,
        finish: Vec<f64>,
        core_free: BTreeMap<u32, f64>,
        chosen: Vec<usize>,
        scheduled: u32,
    }

    impl Dfs<'_, '_> {
        fn run(&mut self) {
            let n = self.inst.names.len();
            if self.chosen.len() == n {
                let makespan = self.finish.iter().copied().fold(0.0, f64::max);
                if makespan < self.best {
                    self.best = makespan;
                    self.best_order = Some(self.chosen.clone());
                }
                return;
            }
            let cur_max = self.finish.iter().copied().fold(0.0, f64::max);
            for i in 0..n {
                if self.scheduled & (1 << i) != 0 {
                    continue;
                }
                if self.inst.preds[i]
                    .iter()
                    .any(|&p| self.scheduled & (1 << p) == 0)
                {
                    continue;
                }
                let ready = self.inst.preds[i]
                    .iter()
                    .map(|&p| self.finish[p])
                    .fold(0.0, f64::max);
                // Optimistic completion of i's remaining chain. Branches
                // beyond the deadline can never become feasible packings.
                let lb = cur_max.max(ready + self.tails[i]);
                if lb >= self.best || lb > self.deadline_ms {
                    continue;
                }
                let c = self.inst.options[i][self.assignment[i] as usize];
                let start = ready.max(self.core_free.get(&c.core).copied().unwrap_or(0.0));
                let finish = start + c.time_ms;
                let prev_core = self.core_free.insert(c.core, finish);
                self.finish[i] = finish;
                self.scheduled |= 1 << i;
                self.chosen.push(i);
                self.run();
                self.chosen.pop();
                self.scheduled &= !(1 << i);
                self.finish[i] = 0.0;
                match prev_core {
                    Some(v) => {
                        self.core_free.insert(c.core, v);
                    }
                    None => {
                        self.core_free.remove(&c.core);
                    }
                }
            }
        }
    }

    let mut dfs = Dfs {
        inst,
        assignment,
        tails: &tails,
        deadline_ms,
        best: f64::INFINITY,
        best_order: None,
        finish: vec![0.0; n],
        core_free: BTreeMap::new(),
        chosen: Vec::with_capacity(n),
        scheduled: 0,
    };
    dfs.run();
    match dfs.best_order {
        Some(order) if dfs.best <= deadline_ms => Some((dfs.best, order)),
        _ => None,
    }
}

/// Greedy simulation of a fixed order and assignment into entries.
fn simulate(inst: &Instance, assignment: &[u16], order: &[usize]) -> Vec<ScheduleEntry> {
    let mut finish = vec![0.0f64; inst.names.len()];
    let mut core_free: BTreeMap<u32, f64> = BTreeMap::new();
    let mut entries = Vec::with_capacity(order.len());
    for &i in order {
        let c = inst.options[i][assignment[i] as usize];
        let ready = inst.preds[i].iter().map(|&p| finish[p]).fold(0.0, f64::max);
        let start = ready.max(core_free.get(&c.core).copied().unwrap_or(0.0));
        finish[i] = start + c.time_ms;
        core_free.insert(c.core, finish[i]);
        entries.push(ScheduleEntry {
            task: inst.names[i].to_string(),
            core: c.core,
            variant: c.variant.clone(),
            frequency_mhz: c.frequency_mhz,
            start_ms: start,
            finish_ms: finish[i],
            energy_mj: c.energy_mj,
        });
    }
    entries
}
