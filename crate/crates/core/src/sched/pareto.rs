//! Makespan/energy trade-off exploration over a deadline grid.

use super::{schedule_heuristic, SchedError, Schedule, ScheduleMode};
use crate::model::{AnalysisResults, PlatformModel, TaskGraph};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub makespan_ms: f64,
    pub energy_mj: f64,
    pub schedule: Schedule,
}

/// Schedule once per deadline, keep the non-dominated (makespan, energy)
/// points sorted by makespan. Infeasible grid points are skipped with a
/// note.
pub fn pareto_front(
    graph: &TaskGraph,
    platform: &PlatformModel,
    results: &AnalysisResults,
    deadline_grid_ms: &[f64],
    mode: ScheduleMode,
) -> (Vec<ParetoPoint>, Vec<String>) {
    let mut raw: Vec<ParetoPoint> = Vec::new();
    let mut notes = Vec::new();
    let mut grid = deadline_grid_ms.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    for &deadline in &grid {
        match schedule_heuristic(graph, platform, results, deadline, mode) {
            Ok(schedule) => raw.push(ParetoPoint {
                makespan_ms: schedule.makespan_ms,
                energy_mj: schedule.total_energy_mj,
                schedule,
            }),
            Err(SchedError::Infeasible { .. }) => {
                notes.push(format!("deadline {deadline} ms: infeasible, skipped"));
            }
            Err(other) => {
                notes.push(format!("deadline {deadline} ms: {other}"));
            }
        }
    }

    // Dominance filter: drop any point beaten-or-equalled in both
    // dimensions (and strictly in one) by another; collapse duplicates.
    let mut front: Vec<ParetoPoint> = Vec::new();
    for (i, p) in raw.iter().enumerate() {
        let dominated = raw.iter().enumerate().any(|(j, q)| {
            let beats = q.makespan_ms <= p.makespan_ms
                && q.energy_mj <= p.energy_mj
                && (q.makespan_ms < p.makespan_ms || q.energy_mj < p.energy_mj);
            beats || (j < i && q.makespan_ms == p.makespan_ms && q.energy_mj == p.energy_mj)
        });
        if !dominated {
            front.push(p.clone());
        }
    }
    front.sort_by(|a, b| a.makespan_ms.total_cmp(&b.makespan_ms));
    (front, notes)
}

/// CSV rendering: header `makespan_ms,energy_mj`, one row per point.
pub fn pareto_csv(front: &[ParetoPoint]) -> String {
    let mut out = String::from("makespan_ms,energy_mj\n");
    for p in front {
        let _ = writeln!(out, "{},{}", p.makespan_ms, p.energy_mj);
    }
    out
}
