//! The validated task graph: nodes in declaration order, precedence edges,
//! and a cached deterministic topological order.

use super::ModelError;
use crate::ir::Program;
use crate::spec::{ContractSet, TaskGraphSpec};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub impl_ref: String,
    pub program: Program,
    pub contracts: ContractSet,
    pub period_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TaskGraph {
    /// Tasks in declaration order.
    pub nodes: Vec<Task>,
    /// Precedence pairs (producer, consumer).
    pub edges: Vec<(String, String)>,
    pub system_contract: Option<ContractSet>,
    topo: Vec<String>,
}

impl TaskGraph {
    /// Cached topological order (lexicographic tie-break).
    pub fn topological_order(&self) -> &[String] {
        &self.topo
    }

    pub fn task(&self, name: &str) -> Option<&Task> {
        self.nodes.iter().find(|t| t.name == name)
    }

    pub fn task_names(&self) -> Vec<&str> {
        self.nodes.iter().map(|t| t.name.as_str()).collect()
    }

    /// Producers that must finish before `name` starts.
    pub fn predecessors(&self, name: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, v)| v == name)
            .map(|(u, _)| u.as_str())
            .collect()
    }

    pub fn successors(&self, name: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(u, _)| u == name)
            .map(|(_, v)| v.as_str())
            .collect()
    }
}

/// Assemble the task graph from a validated spec and its resolved programs.
///
/// `programs` maps each task's `impl_ref` to the parsed program.
pub fn build_task_graph(
    spec: &TaskGraphSpec,
    programs: &BTreeMap<String, Program>,
) -> Result<TaskGraph, ModelError> {
    let mut nodes = Vec::with_capacity(spec.tasks.len());
    let mut edges = Vec::new();
    for decl in &spec.tasks {
        let program = programs
            .get(&decl.impl_ref)
            .ok_or_else(|| ModelError::MissingProgram {
                impl_ref: decl.impl_ref.clone(),
            })?
            .clone();
        nodes.push(Task {
            name: decl.name.clone(),
            impl_ref: decl.impl_ref.clone(),
            program,
            contracts: decl.contracts.clone(),
            period_ms: decl.period_ms.map(|s| s.value),
        });
        for dep in &decl.after {
            edges.push((dep.value.clone(), decl.name.clone()));
        }
    }
    let names: Vec<&str> = nodes.iter().map(|t| t.name.as_str()).collect();
    let topo = kahn_order(&names, &edges)?;
    Ok(TaskGraph {
        nodes,
        edges,
        system_contract: spec.system_contract.clone(),
        topo,
    })
}

/// Deterministic topological order: among ready tasks, lexicographically
/// smallest first. Every edge (u, v) has u before v.
pub fn topological_order(graph: &TaskGraph) -> Vec<String> {
    graph.topo.clone()
}

fn kahn_order(names: &[&str], edges: &[(String, String)]) -> Result<Vec<String>, ModelError> {
    let mut indegree: BTreeMap<&str, usize> = names.iter().map(|&n| (n, 0)).collect();
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (u, v) in edges {
        adj.entry(u.as_str()).or_default().push(v.as_str());
        *indegree.entry(v.as_str()).or_default() += 1;
    }
    // Min-heap on the name gives the lexicographic tie-break.
    let mut ready: BinaryHeap<std::cmp::Reverse<&str>> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| std::cmp::Reverse(n))
        .collect();
    let mut order = Vec::with_capacity(names.len());
    while let Some(std::cmp::Reverse(n)) = ready.pop() {
        order.push(n.to_string());
        if let Some(succs) = adj.get(n) {
            for &s in succs {
                let d = indegree.get_mut(s).expect("edge endpoint declared");
                *d -= 1;
                if *d == 0 {
                    ready.push(std::cmp::Reverse(s));
                }
            }
        }
    }
    if order.len() != names.len() {
        let placed: BTreeSet<&str> = order.iter().map(|s| s.as_str()).collect();
        let cycle: Vec<String> = names
            .iter()
            .filter(|n| !placed.contains(*n))
            .map(|n| n.to_string())
            .collect();
        return Err(ModelError::CyclicDependency { cycle });
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::spec::parse_spec;

    fn programs_for(spec: &TaskGraphSpec) -> BTreeMap<String, Program> {
        spec.tasks
            .iter()
            .map(|t| {
                (
                    t.impl_ref.clone(),
                    parse_program(&format!("(prog {} (ops alu 1))", t.name)).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn empty_graph() {
        let spec = parse_spec("platform \"p\"").unwrap();
        let graph = build_task_graph(&spec, &BTreeMap::new()).unwrap();
        assert!(graph.topological_order().is_empty());
    }

    #[test]
    fn chain_is_ordered() {
        let spec = parse_spec(
            "platform \"p\" task a { } task b { after a; } task c { after b; }",
        )
        .unwrap();
        let graph = build_task_graph(&spec, &programs_for(&spec)).unwrap();
        assert_eq!(graph.topological_order(), ["a", "b", "c"]);
    }

    #[test]
    fn independent_tasks_sort_lexicographically() {
        let spec = parse_spec("platform \"p\" task b { } task a { }").unwrap();
        let graph = build_task_graph(&spec, &programs_for(&spec)).unwrap();
        assert_eq!(graph.topological_order(), ["a", "b"]);
        // Node order stays declaration order.
        assert_eq!(graph.task_names(), ["b", "a"]);
    }

    #[test]
    fn diamond_breaks_ties_lexicographically() {
        let spec = parse_spec(
            "platform \"p\" task a { } task c { after a; } task b { after a; } \
             task d { after b, c; }",
        )
        .unwrap();
        let graph = build_task_graph(&spec, &programs_for(&spec)).unwrap();
        assert_eq!(graph.topological_order(), ["a", "b", "c", "d"]);
    }

    #[test]
    fn missing_program_is_an_error() {
        let spec = parse_spec("platform \"p\" task a { impl \"a.ir\"; }").unwrap();
        match build_task_graph(&spec, &BTreeMap::new()) {
            Err(ModelError::MissingProgram { impl_ref }) => assert_eq!(impl_ref, "a.ir"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn predecessors_and_successors() {
        let spec = parse_spec(
            "platform \"p\" task a { } task b { after a; } task c { after a; }",
        )
        .unwrap();
        let graph = build_task_graph(&spec, &programs_for(&spec)).unwrap();
        assert_eq!(graph.predecessors("b"), ["a"]);
        let mut succ = graph.successors("a");
        succ.sort();
        assert_eq!(succ, ["b", "c"]);
    }
}
