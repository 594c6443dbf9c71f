//! Generated source artifacts: the sequential profiling harness (first
//! pass on complex targets) and the static dispatch glue realizing a
//! validated schedule. Both renderings are pure functions of their inputs,
//! so regeneration is byte-identical.

use super::{validate_schedule, SchedError, Schedule, Violation};
use crate::model::{AnalysisResults, PlatformModel, TaskGraph};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialPlan {
    /// Topological execution order.
    pub order: Vec<String>,
    /// C-like harness skeleton with one measuring-point pair per task.
    pub harness: String,
}

/// Dependency-respecting sequential execution plan with instrumentation
/// stubs that append one profile CSV row per task run.
pub fn sequential_plan(graph: &TaskGraph) -> SequentialPlan {
    let order = graph.topological_order().to_vec();
    let mut h = String::new();
    let _ = writeln!(h, "/* generated by etsflow {} -- sequential profiling harness */", crate::VERSION);
    let _ = writeln!(h, "/* tasks run one at a time in dependency order; each run appends */");
    let _ = writeln!(h, "/* one CSV row: task,run,time_ms,energy_mj                      */");
    let _ = writeln!(h);
    let _ = writeln!(h, "#include \"etsflow_runtime.h\"");
    let _ = writeln!(h);
    for task in &order {
        let _ = writeln!(h, "extern void task_{task}(void);");
    }
    let _ = writeln!(h);
    let _ = writeln!(h, "void run_sequential(int run_id, FILE *profile) {{");
    for task in &order {
        let _ = writeln!(h, "    measure_begin(\"{task}\");");
        let _ = writeln!(h, "    task_{task}();");
        let _ = writeln!(h, "    measure_end(\"{task}\", run_id, profile);");
    }
    let _ = writeln!(h, "}}");
    SequentialPlan { order, harness: h }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlueOutput {
    /// Generated dispatch skeleton (`glue.c.txt`).
    pub source: String,
    /// Machine-readable schedule table (`schedule.json`).
    pub schedule_json: String,
}

/// Emit the dispatch glue for a validated schedule.
///
/// The schedule is re-validated first; contract-level deadline misses are
/// tolerated here (the certificate reports them), structural violations are
/// not.
pub fn emit_glue(
    schedule: &Schedule,
    graph: &TaskGraph,
    platform: &PlatformModel,
    results: &AnalysisResults,
) -> Result<GlueOutput, SchedError> {
    let violations: Vec<String> = validate_schedule(schedule, graph, platform, results)
        .iter()
        .filter(|v| !matches!(v, Violation::DeadlineMiss { .. }))
        .map(|v| v.to_string())
        .collect();
    if !violations.is_empty() {
        return Err(SchedError::UnvalidatedSchedule(violations));
    }

    let mut s = String::new();
    let _ = writeln!(s, "/* generated by etsflow {} -- static dispatch glue */", crate::VERSION);
    let _ = writeln!(s, "/* mode: {}; makespan {:.6} ms; total energy {:.6} mJ */",
        match schedule.mode {
            super::ScheduleMode::Static => "static",
            super::ScheduleMode::Profiled => "profiled",
        },
        schedule.makespan_ms,
        schedule.total_energy_mj
    );
    let _ = writeln!(s, "/* no fault handling: tasks are assumed to run to completion */");
    let _ = writeln!(s);
    let _ = writeln!(s, "#include \"etsflow_runtime.h\"");
    let _ = writeln!(s);
    for entry in &schedule.entries {
        let _ = writeln!(s, "extern void task_{}_{}(void);", entry.task, variant_ident(&entry.variant));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "static const struct dispatch_entry {{");
    let _ = writeln!(s, "    const char *task;");
    let _ = writeln!(s, "    int core;");
    let _ = writeln!(s, "    const char *variant;");
    let _ = writeln!(s, "    double freq_mhz;");
    let _ = writeln!(s, "    double start_ms;");
    let _ = writeln!(s, "    double finish_ms;");
    let _ = writeln!(s, "}} DISPATCH[{}] = {{", schedule.entries.len().max(1));
    for entry in &schedule.entries {
        let _ = writeln!(
            s,
            "    {{ \"{}\", {}, \"{}\", {:.6}, {:.6}, {:.6} }},",
            entry.task, entry.core, entry.variant, entry.frequency_mhz, entry.start_ms, entry.finish_ms
        );
    }
    if schedule.entries.is_empty() {
        let _ = writeln!(s, "    {{ 0, 0, 0, 0.0, 0.0, 0.0 }},");
    }
    let _ = writeln!(s, "}};");
    let _ = writeln!(s);

    // init(): initial frequency per core, in core order.
    let mut first_freq: BTreeMap<u32, f64> = BTreeMap::new();
    for entry in &schedule.entries {
        first_freq.entry(entry.core).or_insert(entry.frequency_mhz);
    }
    let _ = writeln!(s, "void init(void) {{");
    for (core, freq) in &first_freq {
        let _ = writeln!(s, "    core_set_frequency({core}, {freq:.6});");
    }
    if first_freq.is_empty() {
        let _ = writeln!(s, "    /* empty schedule: nothing to configure */");
    }
    let _ = writeln!(s, "}}");
    let _ = writeln!(s);

    // run(): per-core dispatch in start order.
    let mut by_core: BTreeMap<u32, Vec<&super::ScheduleEntry>> = BTreeMap::new();
    for entry in &schedule.entries {
        by_core.entry(entry.core).or_default().push(entry);
    }
    let _ = writeln!(s, "void run(void) {{");
    let mut first = true;
    for (core, entries) in &by_core {
        if !first {
            let _ = writeln!(s);
        }
        first = false;
        let _ = writeln!(s, "    /* core {core} */");
        let mut current_freq = None;
        for entry in entries {
            let _ = writeln!(s, "    dispatch_wait_until({core}, {:.6});", entry.start_ms);
            if current_freq != Some(entry.frequency_mhz.to_bits()) {
                let _ = writeln!(s, "    core_set_frequency({core}, {:.6});", entry.frequency_mhz);
                current_freq = Some(entry.frequency_mhz.to_bits());
            }
            let _ = writeln!(s, "    task_{}_{}();", entry.task, variant_ident(&entry.variant));
        }
    }
    if by_core.is_empty() {
        let _ = writeln!(s, "    /* empty schedule: nothing to run */");
    }
    let _ = writeln!(s, "}}");

    Ok(GlueOutput {
        source: s,
        schedule_json: schedule.to_json(),
    })
}

fn variant_ident(variant: &str) -> String {
    variant
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}
