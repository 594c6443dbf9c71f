//! Scheduling task variants onto the heterogeneous platform, schedule
//! validation, Pareto exploration, and glue-code generation.
//!
//! Placement is offline, non-preemptive, one DAG instance released at time
//! zero, with a per-entry frequency choice (DVFS fixed for the duration of
//! each task execution). All tie-breaking is lexicographic on
//! (task name, core id, variant id, frequency) so results are deterministic.

mod exhaustive;
mod glue;
mod heuristic;
mod pareto;
mod validate;

pub use exhaustive::schedule_exhaustive;
pub use glue::{emit_glue, sequential_plan, GlueOutput, SequentialPlan};
pub use heuristic::schedule_heuristic;
pub use pareto::{pareto_csv, pareto_front, ParetoPoint};
pub use validate::{validate_schedule, Violation};

use crate::model::{AnalysisResults, ModelError, PlatformModel, TaskGraph};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Static,
    Profiled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub task: String,
    pub core: u32,
    pub variant: String,
    pub frequency_mhz: f64,
    pub start_ms: f64,
    pub finish_ms: f64,
    pub energy_mj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub makespan_ms: f64,
    pub total_energy_mj: f64,
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn entry_for(&self, task: &str) -> Option<&ScheduleEntry> {
        self.entries.iter().find(|e| e.task == task)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("schedule serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("infeasible: best makespan {best_makespan_ms} ms exceeds deadline {deadline_ms} ms (critical path: {})", .critical_path.join(" -> "))]
    Infeasible {
        deadline_ms: f64,
        best_makespan_ms: f64,
        critical_path: Vec<String>,
    },
    #[error("search space too large: {0}")]
    SearchSpaceTooLarge(String),
    #[error("schedule failed validation: {}", .0.join("; "))]
    UnvalidatedSchedule(Vec<String>),
    #[error("results incomplete: no variant for task '{task}' on core type '{core_type}'")]
    IncompleteResults { task: String, core_type: String },
    #[error("scheduler produced an invalid schedule: {}", .0.join("; "))]
    Internal(Vec<String>),
}

/// One placement option for a task: a core, a variant, and a frequency.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Candidate {
    pub core: u32,
    pub core_type: String,
    pub variant: String,
    pub frequency_mhz: f64,
    /// Worst-case execution time plus dispatch overhead, in ms.
    pub time_ms: f64,
    /// Energy of one execution at this frequency, in mJ.
    pub energy_mj: f64,
}

/// Candidates for every task, each list in (core id, variant, frequency)
/// order. Frequencies honour per-entry provenance pinning.
pub(crate) fn candidates(
    graph: &TaskGraph,
    platform: &PlatformModel,
    results: &AnalysisResults,
) -> Result<BTreeMap<String, Vec<Candidate>>, SchedError> {
    let mut cores: Vec<&crate::model::Core> = platform.cores.iter().collect();
    cores.sort_by_key(|c| c.id);
    let mut out = BTreeMap::new();
    for task in &graph.nodes {
        let mut list = Vec::new();
        for core in &cores {
            let ct = platform
                .core_type(&core.core_type)
                .expect("validated platform");
            let variants = results.variants_of(&task.name, &ct.name);
            if variants.is_empty() {
                return Err(SchedError::IncompleteResults {
                    task: task.name.clone(),
                    core_type: ct.name.clone(),
                });
            }
            for variant in variants {
                let entry = results
                    .get(&task.name, &ct.name, variant)
                    .expect("variant listed");
                for &f in entry.admissible_freqs(ct) {
                    list.push(Candidate {
                        core: core.id,
                        core_type: ct.name.clone(),
                        variant: variant.to_string(),
                        frequency_mhz: f,
                        time_ms: ct.time_ms(entry.wcet_cycles, f) + platform.dispatch_ms,
                        energy_mj: entry.energy_at(ct, f),
                    });
                }
            }
        }
        // A task-level deadline bounds the entry duration directly; options
        // that cannot meet it are dropped as long as a compliant one exists
        // (otherwise the certificate reports the miss).
        if let Some(d) = task.contracts.deadline_ms.map(|s| s.value) {
            if list.iter().any(|c| c.time_ms <= d) {
                list.retain(|c| c.time_ms <= d);
            }
        }
        out.insert(task.name.clone(), list);
    }
    Ok(out)
}

/// Fastest achievable time per task (minimum over its candidates).
pub(crate) fn fastest_times(cands: &BTreeMap<String, Vec<Candidate>>) -> BTreeMap<String, f64> {
    cands
        .iter()
        .map(|(task, list)| {
            let t = list
                .iter()
                .map(|c| c.time_ms)
                .fold(f64::INFINITY, f64::min);
            (task.clone(), t)
        })
        .collect()
}

/// Upward rank: longest path to a sink counting each task's fastest time.
pub(crate) fn upward_ranks(
    graph: &TaskGraph,
    weights: &BTreeMap<String, f64>,
) -> BTreeMap<String, f64> {
    let mut ranks: BTreeMap<String, f64> = BTreeMap::new();
    for task in graph.topological_order().iter().rev() {
        let tail = graph
            .successors(task)
            .iter()
            .map(|s| ranks[*s])
            .fold(0.0, f64::max);
        ranks.insert(task.clone(), weights[task] + tail);
    }
    ranks
}

/// The chain of tasks realizing the maximal upward rank.
pub(crate) fn critical_path(graph: &TaskGraph, ranks: &BTreeMap<String, f64>) -> Vec<String> {
    let mut current = match ranks
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
    {
        Some((name, _)) => name.clone(),
        None => return Vec::new(),
    };
    let mut path = vec![current.clone()];
    loop {
        let next = graph
            .successors(&current)
            .into_iter()
            .max_by(|a, b| ranks[*a].total_cmp(&ranks[*b]).then(b.cmp(a)));
        match next {
            Some(n) => {
                path.push(n.to_string());
                current = n.to_string();
            }
            None => return path,
        }
    }
}

/// Assemble entries into a schedule: canonical ordering, makespan, and the
/// energy total (summed in entry order).
pub(crate) fn finalize(mode: ScheduleMode, mut entries: Vec<ScheduleEntry>) -> Schedule {
    entries.sort_by(|a, b| {
        a.start_ms
            .total_cmp(&b.start_ms)
            .then(a.core.cmp(&b.core))
            .then(a.task.cmp(&b.task))
    });
    let makespan_ms = entries.iter().map(|e| e.finish_ms).fold(0.0, f64::max);
    let total_energy_mj = entries.iter().map(|e| e.energy_mj).sum();
    Schedule {
        mode,
        makespan_ms,
        total_energy_mj,
        entries,
    }
}
