//! Energy-aware list scheduling with a deadline guard.
//!
//! Tasks are placed in decreasing upward-rank order. Each placement picks
//! the minimum-energy (core, variant, frequency) option whose finish time
//! still leaves room for the remaining critical path under the deadline;
//! when no option passes that guard the fastest-finishing option is taken.
//! If the guarded pass misses the deadline anyway, a pure fastest-finish
//! pass decides between a feasible (if less frugal) schedule and a genuine
//! infeasibility report.

use super::{
    candidates, critical_path, fastest_times, finalize, upward_ranks, Candidate, SchedError,
    Schedule, ScheduleEntry, ScheduleMode,
};
use crate::model::{AnalysisResults, PlatformModel, TaskGraph};
use crate::sched::validate_schedule;
use std::collections::BTreeMap;

pub fn schedule_heuristic(
    graph: &TaskGraph,
    platform: &PlatformModel,
    results: &AnalysisResults,
    deadline_ms: f64,
    mode: ScheduleMode,
) -> Result<Schedule, SchedError> {
    let cands = candidates(graph, platform, results)?;
    let weights = fastest_times(&cands);
    let ranks = upward_ranks(graph, &weights);

    // Priority order: decreasing rank, lexicographic on ties.
    let mut order: Vec<&str> = graph.nodes.iter().map(|t| t.name.as_str()).collect();
    order.sort_by(|a, b| ranks[*b].total_cmp(&ranks[*a]).then(a.cmp(b)));

    let guarded = place(graph, &order, &cands, |task, placed| {
        let remaining = ranks[task] - weights[task];
        let admissible: Vec<usize> = placed
            .iter()
            .enumerate()
            .filter(|(_, p)| p.finish_ms + remaining <= deadline_ms)
            .map(|(i, _)| i)
            .collect();
        match admissible
            .iter()
            .copied()
            .min_by(|&a, &b| placed[a].energy_mj.total_cmp(&placed[b].energy_mj))
        {
            Some(i) => i,
            // Guard failed everywhere: fall back to the fastest finish.
            None => min_finish(placed),
        }
    });
    let guarded = finalize(mode, guarded);
    if guarded.makespan_ms <= deadline_ms {
        return check(guarded, graph, platform, results);
    }

    // Even the guard could not hold the deadline; try all-fastest.
    let fastest = place(graph, &order, &cands, |_, placed| min_finish(placed));
    let fastest = finalize(mode, fastest);
    if fastest.makespan_ms <= deadline_ms {
        return check(fastest, graph, platform, results);
    }

    Err(SchedError::Infeasible {
        deadline_ms,
        best_makespan_ms: fastest.makespan_ms,
        critical_path: critical_path(graph, &ranks),
    })
}

/// A candidate with its start/finish computed against the current state.
struct Placed {
    start_ms: f64,
    finish_ms: f64,
    energy_mj: f64,
    cand_idx: usize,
}

fn min_finish(placed: &[Placed]) -> usize {
    placed
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.finish_ms.total_cmp(&b.finish_ms))
        .map(|(i, _)| i)
        .expect("candidate list nonempty")
        .to_owned()
}

/// List placement: tasks in `order`, cores append-only, `select` picks the
/// option index. Candidate enumeration order realizes the lexicographic
/// tie-break because `select` uses strict minima.
fn place(
    graph: &TaskGraph,
    order: &[&str],
    cands: &BTreeMap<String, Vec<Candidate>>,
    mut select: impl FnMut(&str, &[Placed]) -> usize,
) -> Vec<ScheduleEntry> {
    let mut core_free: BTreeMap<u32, f64> = BTreeMap::new();
    let mut task_finish: BTreeMap<&str, f64> = BTreeMap::new();
    let mut entries = Vec::with_capacity(order.len());
    for &task in order {
        let ready = graph
            .predecessors(task)
            .iter()
            .map(|p| task_finish[*p])
            .fold(0.0, f64::max);
        let list = &cands[task];
        let placed: Vec<Placed> = list
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let start = ready.max(core_free.get(&c.core).copied().unwrap_or(0.0));
                Placed {
                    start_ms: start,
                    finish_ms: start + c.time_ms,
                    energy_mj: c.energy_mj,
                    cand_idx: i,
                }
            })
            .collect();
        let pick = &placed[select(task, &placed)];
        let c = &list[pick.cand_idx];
        core_free.insert(c.core, pick.finish_ms);
        task_finish.insert(task, pick.finish_ms);
        entries.push(ScheduleEntry {
            task: task.to_string(),
            core: c.core,
            variant: c.variant.clone(),
            frequency_mhz: c.frequency_mhz,
            start_ms: pick.start_ms,
            finish_ms: pick.finish_ms,
            energy_mj: c.energy_mj,
        });
    }
    entries
}

fn check(
    schedule: Schedule,
    graph: &TaskGraph,
    platform: &PlatformModel,
    results: &AnalysisResults,
) -> Result<Schedule, SchedError> {
    // Deadline misses are contract failures for the certificate to report;
    // any structural violation here is a scheduler bug.
    let violations: Vec<String> = validate_schedule(&schedule, graph, platform, results)
        .iter()
        .filter(|v| !matches!(v, super::Violation::DeadlineMiss { .. }))
        .map(|v| v.to_string())
        .collect();
    if violations.is_empty() {
        Ok(schedule)
    } else {
        Err(SchedError::Internal(violations))
    }
}
