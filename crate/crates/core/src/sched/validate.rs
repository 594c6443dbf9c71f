//! Structural and contract-level validation of a schedule against the
//! graph, the platform, and the analysis results it claims to realize.

use super::{Schedule, ScheduleEntry};
use crate::model::{AnalysisResults, PlatformModel, TaskGraph};
use std::collections::BTreeMap;
use std::fmt;

/// Relative tolerance for recomputed-vs-stored numeric fields.
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownTask { task: String },
    MissingEntry { task: String },
    DuplicateEntry { task: String },
    UnknownCore { task: String, core: u32 },
    MissingResult { task: String, core_type: String, variant: String },
    UnknownFrequency { task: String, frequency_mhz: f64 },
    TimeMismatch { task: String, stored_ms: f64, recomputed_ms: f64 },
    Overlap { core: u32, first: String, second: String },
    PrecedenceViolation { producer: String, consumer: String },
    DeadlineMiss { subject: String, deadline_ms: f64, actual_ms: f64 },
    EnergyMismatch { subject: String, stored_mj: f64, recomputed_mj: f64 },
    MakespanMismatch { stored_ms: f64, recomputed_ms: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownTask { task } => write!(f, "entry for undeclared task '{task}'"),
            Violation::MissingEntry { task } => write!(f, "task '{task}' is not scheduled"),
            Violation::DuplicateEntry { task } => write!(f, "task '{task}' scheduled twice"),
            Violation::UnknownCore { task, core } => {
                write!(f, "task '{task}' placed on undeclared core {core}")
            }
            Violation::MissingResult { task, core_type, variant } => write!(
                f,
                "no analysis result for ('{task}', '{core_type}', '{variant}')"
            ),
            Violation::UnknownFrequency { task, frequency_mhz } => {
                write!(f, "task '{task}' runs at inadmissible frequency {frequency_mhz} MHz")
            }
            Violation::TimeMismatch { task, stored_ms, recomputed_ms } => write!(
                f,
                "task '{task}' duration {stored_ms} ms does not match recomputed {recomputed_ms} ms"
            ),
            Violation::Overlap { core, first, second } => {
                write!(f, "tasks '{first}' and '{second}' overlap on core {core}")
            }
            Violation::PrecedenceViolation { producer, consumer } => {
                write!(f, "'{consumer}' starts before its producer '{producer}' finishes")
            }
            Violation::DeadlineMiss { subject, deadline_ms, actual_ms } => {
                write!(f, "'{subject}' misses its deadline: {actual_ms} ms > {deadline_ms} ms")
            }
            Violation::EnergyMismatch { subject, stored_mj, recomputed_mj } => write!(
                f,
                "'{subject}' energy {stored_mj} mJ does not match recomputed {recomputed_mj} mJ"
            ),
            Violation::MakespanMismatch { stored_ms, recomputed_ms } => {
                write!(f, "makespan {stored_ms} ms does not match recomputed {recomputed_ms} ms")
            }
        }
    }
}

fn differs(stored: f64, recomputed: f64) -> bool {
    let scale = stored.abs().max(recomputed.abs());
    (stored - recomputed).abs() > REL_TOL * scale.max(1e-300)
}

/// Empty result iff the schedule is structurally sound and meets every
/// deadline recorded in the graph's contracts.
pub fn validate_schedule(
    schedule: &Schedule,
    graph: &TaskGraph,
    platform: &PlatformModel,
    results: &AnalysisResults,
) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut seen: BTreeMap<&str, &ScheduleEntry> = BTreeMap::new();
    for entry in &schedule.entries {
        if graph.task(&entry.task).is_none() {
            violations.push(Violation::UnknownTask {
                task: entry.task.clone(),
            });
            continue;
        }
        if seen.insert(entry.task.as_str(), entry).is_some() {
            violations.push(Violation::DuplicateEntry {
                task: entry.task.clone(),
            });
        }
    }
    for task in &graph.nodes {
        if !seen.contains_key(task.name.as_str()) {
            violations.push(Violation::MissingEntry {
                task: task.name.clone(),
            });
        }
    }

    // Per-entry recomputation.
    for entry in &schedule.entries {
        let Some(core) = platform.core(entry.core) else {
            violations.push(Violation::UnknownCore {
                task: entry.task.clone(),
                core: entry.core,
            });
            continue;
        };
        let ct = platform.core_type(&core.core_type).expect("validated");
        let Some(res) = results.get(&entry.task, &ct.name, &entry.variant) else {
            violations.push(Violation::MissingResult {
                task: entry.task.clone(),
                core_type: ct.name.clone(),
                variant: entry.variant.clone(),
            });
            continue;
        };
        if !res
            .admissible_freqs(ct)
            .contains(&entry.frequency_mhz)
        {
            violations.push(Violation::UnknownFrequency {
                task: entry.task.clone(),
                frequency_mhz: entry.frequency_mhz,
            });
            continue;
        }
        let duration = ct.time_ms(res.wcet_cycles, entry.frequency_mhz) + platform.dispatch_ms;
        let stored = entry.finish_ms - entry.start_ms;
        if differs(stored, duration) {
            violations.push(Violation::TimeMismatch {
                task: entry.task.clone(),
                stored_ms: stored,
                recomputed_ms: duration,
            });
        }
        let energy = res.energy_at(ct, entry.frequency_mhz);
        if differs(entry.energy_mj, energy) {
            violations.push(Violation::EnergyMismatch {
                subject: entry.task.clone(),
                stored_mj: entry.energy_mj,
                recomputed_mj: energy,
            });
        }
    }

    // Core exclusivity.
    let mut by_core: BTreeMap<u32, Vec<&ScheduleEntry>> = BTreeMap::new();
    for entry in &schedule.entries {
        by_core.entry(entry.core).or_default().push(entry);
    }
    for (core, mut entries) in by_core {
        entries.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms).then(a.task.cmp(&b.task)));
        // Sweep with the running latest finish; a window check alone would
        // miss overlaps hidden behind short entries.
        let mut latest: Option<&ScheduleEntry> = None;
        for entry in entries {
            if let Some(prev) = latest {
                if entry.start_ms < prev.finish_ms - REL_TOL {
                    violations.push(Violation::Overlap {
                        core,
                        first: prev.task.clone(),
                        second: entry.task.clone(),
                    });
                }
            }
            if latest.map(|p| entry.finish_ms > p.finish_ms).unwrap_or(true) {
                latest = Some(entry);
            }
        }
    }

    // Precedence.
    for (producer, consumer) in &graph.edges {
        if let (Some(p), Some(c)) = (seen.get(producer.as_str()), seen.get(consumer.as_str())) {
            if c.start_ms < p.finish_ms - REL_TOL {
                violations.push(Violation::PrecedenceViolation {
                    producer: producer.clone(),
                    consumer: consumer.clone(),
                });
            }
        }
    }

    // Aggregates.
    let makespan = schedule.entries.iter().map(|e| e.finish_ms).fold(0.0, f64::max);
    if differs(schedule.makespan_ms, makespan) {
        violations.push(Violation::MakespanMismatch {
            stored_ms: schedule.makespan_ms,
            recomputed_ms: makespan,
        });
    }
    let total: f64 = schedule.entries.iter().map(|e| e.energy_mj).sum();
    if differs(schedule.total_energy_mj, total) {
        violations.push(Violation::EnergyMismatch {
            subject: "(total)".into(),
            stored_mj: schedule.total_energy_mj,
            recomputed_mj: total,
        });
    }

    // Contract deadlines recorded in the graph.
    for task in &graph.nodes {
        if let (Some(d), Some(entry)) = (
            task.contracts.deadline_ms.map(|s| s.value),
            seen.get(task.name.as_str()),
        ) {
            let duration = entry.finish_ms - entry.start_ms;
            if duration > d {
                violations.push(Violation::DeadlineMiss {
                    subject: task.name.clone(),
                    deadline_ms: d,
                    actual_ms: duration,
                });
            }
        }
    }
    if let Some(d) = graph
        .system_contract
        .as_ref()
        .and_then(|c| c.deadline_ms.map(|s| s.value))
    {
        if schedule.makespan_ms > d {
            violations.push(Violation::DeadlineMiss {
                subject: crate::spec::SYSTEM_SUBJECT.into(),
                deadline_ms: d,
                actual_ms: schedule.makespan_ms,
            });
        }
    }

    violations
}
