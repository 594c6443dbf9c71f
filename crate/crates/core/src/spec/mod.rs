//! The `.ets` application specification language.
//!
//! A spec names the target platform, declares tasks with their dependencies
//! and implementation programs, and attaches energy/time/security contracts
//! to tasks and to the system as a whole:
//!
//! ```text
//! platform "camera-pill"
//!
//! task capture {
//!     deadline 8 ms;
//!     energy 0.5 mJ;
//!     impl "capture.ir";
//! }
//!
//! task encrypt {
//!     after capture;
//!     security constant_time;
//! }
//!
//! system {
//!     deadline 40 ms;
//!     energy 5 mJ;
//! }
//! ```
//!
//! Grammar (whitespace-insensitive, `//` line comments):
//!
//! ```text
//! spec     := "platform" STRING taskdecl* sysdecl?
//! taskdecl := "task" IDENT "{" clause* "}"
//! sysdecl  := "system" "{" clause* "}"
//! clause   := "after" IDENT ("," IDENT)* ";"
//!           | "deadline" NUMBER "ms" ";"
//!           | "energy" NUMBER "mJ" ";"
//!           | "period" NUMBER "ms" ";"
//!           | "security" ("none"|"constant_time"|"constant_energy"|"constant_both") ";"
//!           | "impl" STRING ";"
//! ```
//!
//! Units are fixed (milliseconds, millijoules); any other unit token is a
//! parse error. A task without an `impl` clause defaults to `<name>.ir`.
//! The name `system` is reserved for the system-level contract block.

mod parse;

pub use parse::parse_spec;

use crate::diag::{Diagnostic, Loc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use thiserror::Error;

/// A value together with the source location of its clause keyword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spanned<T> {
    pub value: T,
    pub loc: Loc,
}

impl<T> Spanned<T> {
    pub fn new(value: T, loc: Loc) -> Self {
        Spanned { value, loc }
    }
}

/// Security requirement levels, ordered as a lattice:
/// `none < {constant_time, constant_energy} < constant_both`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecurityLevel {
    None,
    ConstantTime,
    ConstantEnergy,
    ConstantBoth,
}

impl SecurityLevel {
    /// True if the level constrains the timing side channel.
    pub fn requires_time(self) -> bool {
        matches!(self, SecurityLevel::ConstantTime | SecurityLevel::ConstantBoth)
    }

    /// True if the level constrains the energy side channel.
    pub fn requires_energy(self) -> bool {
        matches!(self, SecurityLevel::ConstantEnergy | SecurityLevel::ConstantBoth)
    }

    /// Least upper bound in the lattice.
    pub fn join(self, other: SecurityLevel) -> SecurityLevel {
        match (self.requires_time() || other.requires_time(), self.requires_energy() || other.requires_energy()) {
            (true, true) => SecurityLevel::ConstantBoth,
            (true, false) => SecurityLevel::ConstantTime,
            (false, true) => SecurityLevel::ConstantEnergy,
            (false, false) => SecurityLevel::None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            SecurityLevel::None => "none",
            SecurityLevel::ConstantTime => "constant_time",
            SecurityLevel::ConstantEnergy => "constant_energy",
            SecurityLevel::ConstantBoth => "constant_both",
        }
    }
}

impl fmt::Display for SecurityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Budgets and the security requirement attached to a task or the system.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContractSet {
    pub deadline_ms: Option<Spanned<f64>>,
    pub energy_budget_mj: Option<Spanned<f64>>,
    pub security: Option<Spanned<SecurityLevel>>,
}

impl ContractSet {
    pub fn is_empty(&self) -> bool {
        self.deadline_ms.is_none() && self.energy_budget_mj.is_none() && self.security.is_none()
    }

    /// Effective security level: `none` when undeclared.
    pub fn security_level(&self) -> SecurityLevel {
        self.security.map(|s| s.value).unwrap_or(SecurityLevel::None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDecl {
    pub name: String,
    pub name_loc: Loc,
    /// Names of tasks that must finish before this one starts.
    pub after: Vec<Spanned<String>>,
    /// Path (relative to the spec file) of the task's program.
    pub impl_ref: String,
    pub contracts: ContractSet,
    pub period_ms: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraphSpec {
    pub platform_name: String,
    pub tasks: Vec<TaskDecl>,
    pub system_contract: Option<ContractSet>,
}

/// Subject name used for system-level contract obligations.
pub const SYSTEM_SUBJECT: &str = "system";

/// The kind of an ETS annotation; ordering is `time < energy < security`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoiKind {
    Time,
    Energy,
    Security,
}

impl fmt::Display for PoiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoiKind::Time => write!(f, "time"),
            PoiKind::Energy => write!(f, "energy"),
            PoiKind::Security => write!(f, "security"),
        }
    }
}

/// A point of interest: one declared ETS annotation in the spec text.
#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    /// Task name, or [`SYSTEM_SUBJECT`] for the system contract.
    pub owner: String,
    pub kind: PoiKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpecError {
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: Loc, message: String },
    #[error("{loc}: duplicate task '{name}'")]
    DuplicateTask { name: String, loc: Loc },
    #[error("{loc}: task '{task}' depends on unknown task '{dependency}'")]
    UnknownDependency {
        task: String,
        dependency: String,
        loc: Loc,
    },
    #[error("{loc}: cyclic dependency: {}", render_cycle(.cycle))]
    CyclicDependency { cycle: Vec<String>, loc: Loc },
}

fn render_cycle(cycle: &[String]) -> String {
    let mut s = cycle.join(" -> ");
    if let Some(first) = cycle.first() {
        let _ = write!(s, " -> {first}");
    }
    s
}

impl SpecError {
    pub fn loc(&self) -> Loc {
        match self {
            SpecError::Syntax { loc, .. }
            | SpecError::DuplicateTask { loc, .. }
            | SpecError::UnknownDependency { loc, .. }
            | SpecError::CyclicDependency { loc, .. } => *loc,
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        // Strip the leading "line:col: " the Display impl carries; the
        // Diagnostic renders its own location prefix.
        let full = self.to_string();
        let msg = full
            .strip_prefix(&format!("{}: ", self.loc()))
            .unwrap_or(&full)
            .to_string();
        Diagnostic::error(self.loc(), msg)
    }
}

/// Check every spec invariant; empty result means the spec is valid.
///
/// One diagnostic per violation, ordered by source location.
pub fn validate_spec(spec: &TaskGraphSpec) -> Vec<Diagnostic> {
    let mut errs = collect_violations(spec);
    errs.sort_by_key(|e| e.loc());
    errs.iter().map(SpecError::to_diagnostic).collect()
}

pub(crate) fn collect_violations(spec: &TaskGraphSpec) -> Vec<SpecError> {
    let mut errs = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for task in &spec.tasks {
        if !seen.insert(task.name.as_str()) {
            errs.push(SpecError::DuplicateTask {
                name: task.name.clone(),
                loc: task.name_loc,
            });
        }
    }

    let declared: BTreeSet<&str> = spec.tasks.iter().map(|t| t.name.as_str()).collect();
    for task in &spec.tasks {
        for dep in &task.after {
            if !declared.contains(dep.value.as_str()) {
                errs.push(SpecError::UnknownDependency {
                    task: task.name.clone(),
                    dependency: dep.value.clone(),
                    loc: dep.loc,
                });
            }
        }
    }

    errs.extend(find_cycles(spec));

    for task in &spec.tasks {
        if task.impl_ref.is_empty() {
            errs.push(SpecError::Syntax {
                loc: task.name_loc,
                message: format!("task '{}' has an empty impl path", task.name),
            });
        }
        let positive = |field: &str, v: &Spanned<f64>, errs: &mut Vec<SpecError>| {
            if !(v.value > 0.0) {
                errs.push(SpecError::Syntax {
                    loc: v.loc,
                    message: format!("{field} must be strictly positive"),
                });
            }
        };
        if let Some(d) = &task.contracts.deadline_ms {
            positive("deadline", d, &mut errs);
        }
        if let Some(e) = &task.contracts.energy_budget_mj {
            positive("energy budget", e, &mut errs);
        }
        if let Some(p) = &task.period_ms {
            positive("period", p, &mut errs);
        }
    }
    if let Some(sys) = &spec.system_contract {
        if let Some(d) = &sys.deadline_ms {
            if !(d.value > 0.0) {
                errs.push(SpecError::Syntax {
                    loc: d.loc,
                    message: "deadline must be strictly positive".into(),
                });
            }
        }
        if let Some(e) = &sys.energy_budget_mj {
            if !(e.value > 0.0) {
                errs.push(SpecError::Syntax {
                    loc: e.loc,
                    message: "energy budget must be strictly positive".into(),
                });
            }
        }
    }
    errs
}

/// Find dependency cycles in the `after` relation, one error per cycle.
fn find_cycles(spec: &TaskGraphSpec) -> Vec<SpecError> {
    // Adjacency: task -> its prerequisites, with the location of each
    // reference. Walking prerequisite edges reports the cycle at the
    // `after` reference that closes it.
    let declared: BTreeSet<&str> = spec.tasks.iter().map(|t| t.name.as_str()).collect();
    let mut deps: BTreeMap<&str, Vec<(&str, Loc)>> = BTreeMap::new();
    for task in &spec.tasks {
        let entry = deps.entry(task.name.as_str()).or_default();
        for dep in &task.after {
            if declared.contains(dep.value.as_str()) {
                entry.push((dep.value.as_str(), dep.loc));
            }
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color: BTreeMap<&str, Color> = declared.iter().map(|&n| (n, Color::White)).collect();
    let mut errs = Vec::new();

    fn visit<'a>(
        node: &'a str,
        deps: &BTreeMap<&'a str, Vec<(&'a str, Loc)>>,
        color: &mut BTreeMap<&'a str, Color>,
        path: &mut Vec<&'a str>,
        errs: &mut Vec<SpecError>,
    ) {
        color.insert(node, Color::Gray);
        path.push(node);
        if let Some(edges) = deps.get(node) {
            for &(dep, loc) in edges {
                match color[dep] {
                    Color::White => visit(dep, deps, color, path, errs),
                    Color::Gray => {
                        let start = path.iter().position(|&n| n == dep).unwrap_or(0);
                        let cycle: Vec<String> =
                            path[start..].iter().map(|s| s.to_string()).collect();
                        errs.push(SpecError::CyclicDependency { cycle, loc });
                    }
                    Color::Black => {}
                }
            }
        }
        path.pop();
        color.insert(node, Color::Black);
    }

    for task in &spec.tasks {
        if color[task.name.as_str()] == Color::White {
            let mut path = Vec::new();
            visit(task.name.as_str(), &deps, &mut color, &mut path, &mut errs);
        }
    }
    errs
}

/// One POI per declared contract field: tasks in declaration order with
/// kinds ordered time < energy < security, then the system contract.
pub fn extract_pois(spec: &TaskGraphSpec) -> Vec<Poi> {
    let mut pois = Vec::new();
    let push_set = |owner: &str, set: &ContractSet, pois: &mut Vec<Poi>| {
        if let Some(d) = &set.deadline_ms {
            pois.push(Poi {
                owner: owner.to_string(),
                kind: PoiKind::Time,
                loc: d.loc,
            });
        }
        if let Some(e) = &set.energy_budget_mj {
            pois.push(Poi {
                owner: owner.to_string(),
                kind: PoiKind::Energy,
                loc: e.loc,
            });
        }
        if let Some(s) = &set.security {
            pois.push(Poi {
                owner: owner.to_string(),
                kind: PoiKind::Security,
                loc: s.loc,
            });
        }
    };
    for task in &spec.tasks {
        push_set(&task.name, &task.contracts, &mut pois);
    }
    if let Some(sys) = &spec.system_contract {
        push_set(SYSTEM_SUBJECT, sys, &mut pois);
    }
    pois
}

/// Canonical text form. `parse_spec(render_spec(s))` is structurally equal
/// to `s` (locations aside).
pub fn render_spec(spec: &TaskGraphSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "platform \"{}\"", spec.platform_name);
    for task in &spec.tasks {
        let _ = writeln!(out);
        let _ = writeln!(out, "task {} {{", task.name);
        if !task.after.is_empty() {
            let names: Vec<&str> = task.after.iter().map(|s| s.value.as_str()).collect();
            let _ = writeln!(out, "    after {};", names.join(", "));
        }
        render_contract_body(&task.contracts, task.period_ms.as_ref(), &mut out);
        let _ = writeln!(out, "    impl \"{}\";", task.impl_ref);
        let _ = writeln!(out, "}}");
    }
    if let Some(sys) = &spec.system_contract {
        let _ = writeln!(out);
        let _ = writeln!(out, "system {{");
        render_contract_body(sys, None, &mut out);
        let _ = writeln!(out, "}}");
    }
    out
}

fn render_contract_body(set: &ContractSet, period: Option<&Spanned<f64>>, out: &mut String) {
    if let Some(d) = &set.deadline_ms {
        let _ = writeln!(out, "    deadline {} ms;", d.value);
    }
    if let Some(e) = &set.energy_budget_mj {
        let _ = writeln!(out, "    energy {} mJ;", e.value);
    }
    if let Some(p) = period {
        let _ = writeln!(out, "    period {} ms;", p.value);
    }
    if let Some(s) = &set.security {
        let _ = writeln!(out, "    security {};", s.value);
    }
}

/// Equality up to source locations.
pub fn structural_eq(a: &TaskGraphSpec, b: &TaskGraphSpec) -> bool {
    fn contracts_eq(a: &ContractSet, b: &ContractSet) -> bool {
        a.deadline_ms.map(|s| s.value) == b.deadline_ms.map(|s| s.value)
            && a.energy_budget_mj.map(|s| s.value) == b.energy_budget_mj.map(|s| s.value)
            && a.security.map(|s| s.value) == b.security.map(|s| s.value)
    }
    a.platform_name == b.platform_name
        && a.tasks.len() == b.tasks.len()
        && a.tasks.iter().zip(b.tasks.iter()).all(|(x, y)| {
            x.name == y.name
                && x.impl_ref == y.impl_ref
                && x.after.len() == y.after.len()
                && x.after
                    .iter()
                    .zip(y.after.iter())
                    .all(|(p, q)| p.value == q.value)
                && contracts_eq(&x.contracts, &y.contracts)
                && x.period_ms.map(|s| s.value) == y.period_ms.map(|s| s.value)
        })
        && match (&a.system_contract, &b.system_contract) {
            (None, None) => true,
            (Some(x), Some(y)) => contracts_eq(x, y),
            _ => false,
        }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> TaskGraphSpec {
        parse_spec(text).expect("spec should parse")
    }

    #[test]
    fn empty_spec_has_no_tasks() {
        let spec = parse("platform \"p\"");
        assert_eq!(spec.platform_name, "p");
        assert!(spec.tasks.is_empty());
        assert!(spec.system_contract.is_none());
    }

    #[test]
    fn two_task_chain_builds_edge() {
        let spec = parse(
            r#"platform "p"
            task a { impl "a.ir"; }
            task b { after a; impl "b.ir"; }"#,
        );
        assert_eq!(spec.tasks.len(), 2);
        assert_eq!(spec.tasks[1].after.len(), 1);
        assert_eq!(spec.tasks[1].after[0].value, "a");
    }

    #[test]
    fn self_loop_is_cyclic() {
        let err = parse_spec("platform \"p\" task a { after a; }").unwrap_err();
        match err {
            SpecError::CyclicDependency { cycle, .. } => assert_eq!(cycle, vec!["a"]),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn two_task_cycle_lists_both() {
        let text = r#"platform "p"
            task a { after b; }
            task b { after a; }"#;
        let err = parse_spec(text).unwrap_err();
        match &err {
            SpecError::CyclicDependency { cycle, .. } => {
                assert_eq!(cycle.len(), 2);
                assert!(cycle.contains(&"a".to_string()) && cycle.contains(&"b".to_string()));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
        // validate_spec reports the same violation as a diagnostic.
        let spec = parse::parse_spec_syntax_only(text).unwrap();
        let diags = validate_spec(&spec);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("cyclic dependency"));
    }

    #[test]
    fn dangling_dependency_is_reported() {
        let spec = parse::parse_spec_syntax_only("platform \"p\" task a { after missing; }").unwrap();
        let diags = validate_spec(&spec);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("unknown task 'missing'"));
    }

    #[test]
    fn valid_spec_has_no_diagnostics() {
        let spec = parse(
            r#"platform "p"
            task a { }
            task b { after a; }"#,
        );
        assert!(validate_spec(&spec).is_empty());
    }

    #[test]
    fn missing_impl_defaults_to_task_name() {
        let spec = parse("platform \"p\" task worker { }");
        assert_eq!(spec.tasks[0].impl_ref, "worker.ir");
    }

    #[test]
    fn pois_follow_declaration_then_kind_order() {
        let spec = parse(
            r#"platform "p"
            task a { deadline 10 ms; energy 5 mJ; }
            "#,
        );
        let pois = extract_pois(&spec);
        assert_eq!(pois.len(), 2);
        assert_eq!((pois[0].owner.as_str(), pois[0].kind), ("a", PoiKind::Time));
        assert_eq!((pois[1].owner.as_str(), pois[1].kind), ("a", PoiKind::Energy));
    }

    #[test]
    fn pois_include_system_contract_last() {
        let spec = parse(
            r#"platform "p"
            task a { security constant_time; energy 5 mJ; deadline 10 ms; }
            system { deadline 40 ms; }"#,
        );
        let pois = extract_pois(&spec);
        assert_eq!(pois.len(), 4);
        assert_eq!(pois[0].kind, PoiKind::Time);
        assert_eq!(pois[1].kind, PoiKind::Energy);
        assert_eq!(pois[2].kind, PoiKind::Security);
        assert_eq!(pois[3].owner, SYSTEM_SUBJECT);
        assert_eq!(pois[3].kind, PoiKind::Time);
    }

    #[test]
    fn empty_spec_has_no_pois() {
        assert!(extract_pois(&parse("platform \"p\"")).is_empty());
    }

    #[test]
    fn poi_locations_point_at_clauses() {
        let text = "platform \"p\"\ntask a {\n    deadline 10 ms;\n}\n";
        let pois = extract_pois(&parse(text));
        assert_eq!(pois[0].loc, Loc::new(3, 5));
    }

    #[test]
    fn render_round_trips_structurally() {
        let spec = parse(
            r#"platform "demo"
            task a { deadline 10 ms; energy 0.5 mJ; period 100 ms; impl "x.ir"; }
            task b { after a; security constant_both; }
            system { deadline 40 ms; energy 5 mJ; security none; }"#,
        );
        let rendered = render_spec(&spec);
        let reparsed = parse(&rendered);
        assert!(structural_eq(&spec, &reparsed), "rendered:\n{rendered}");
    }

    #[test]
    fn security_lattice_join() {
        use SecurityLevel::*;
        assert_eq!(None.join(ConstantTime), ConstantTime);
        assert_eq!(ConstantTime.join(ConstantEnergy), ConstantBoth);
        assert_eq!(ConstantBoth.join(None), ConstantBoth);
        assert_eq!(None.join(None), None);
    }
}
