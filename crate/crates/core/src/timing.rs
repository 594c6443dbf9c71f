//! Static worst-/best-case cycle bounds for programs on predictable cores.
//!
//! The program representation is structured, so the bounds follow the tree
//! exactly: blocks sum, branches take the extremal arm, counted loops
//! multiply. [`enumerate_paths_bounds`] recomputes the same bounds by brute
//! force over all branch decisions and serves as the independent oracle.

use crate::ir::{Node, OpCounts, Program};
use crate::model::CoreType;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleBounds {
    pub bcet_cycles: u64,
    pub wcet_cycles: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimingError {
    #[error("unknown instruction class '{class}'")]
    UnknownInstructionClass { class: String },
    #[error("path enumeration needs {paths} paths, cap is {cap}")]
    PathExplosion { paths: u128, cap: u128 },
}

fn ops_cycles(counts: &OpCounts, core: &CoreType) -> Result<u64, TimingError> {
    let mut total = 0u64;
    for (class, &count) in counts {
        let per = core
            .cycle_table
            .get(class)
            .ok_or_else(|| TimingError::UnknownInstructionClass {
                class: class.clone(),
            })?;
        total += count * per;
    }
    Ok(total)
}

/// Structural cycle bounds of a whole program.
pub fn analyze_bounds(program: &Program, core: &CoreType) -> Result<CycleBounds, TimingError> {
    analyze_node(&program.body, core)
}

/// Structural cycle bounds of a subtree.
pub fn analyze_node(node: &Node, core: &CoreType) -> Result<CycleBounds, TimingError> {
    match node {
        Node::Ops(counts) => {
            let c = ops_cycles(counts, core)?;
            Ok(CycleBounds {
                bcet_cycles: c,
                wcet_cycles: c,
            })
        }
        Node::Seq(items) => {
            let mut acc = CycleBounds {
                bcet_cycles: 0,
                wcet_cycles: 0,
            };
            for item in items {
                let b = analyze_node(item, core)?;
                acc.bcet_cycles += b.bcet_cycles;
                acc.wcet_cycles += b.wcet_cycles;
            }
            Ok(acc)
        }
        Node::If {
            cond,
            then_arm,
            else_arm,
            ..
        } => {
            let c = ops_cycles(cond, core)?;
            let t = analyze_node(then_arm, core)?;
            let e = analyze_node(else_arm, core)?;
            Ok(CycleBounds {
                bcet_cycles: c + t.bcet_cycles.min(e.bcet_cycles),
                wcet_cycles: c + t.wcet_cycles.max(e.wcet_cycles),
            })
        }
        Node::Loop { bound, body } => {
            let b = analyze_node(body, core)?;
            Ok(CycleBounds {
                bcet_cycles: bound * b.bcet_cycles,
                wcet_cycles: bound * b.wcet_cycles,
            })
        }
    }
}

/// Exact min/max cycle cost over all concrete paths.
///
/// Each branch site contributes a binary choice (the same arm on every
/// loop iteration); loops multiply their body cost by the bound. The path
/// count is 2^sites and must not exceed `cap`.
pub fn enumerate_paths_bounds(
    program: &Program,
    core: &CoreType,
    cap: u64,
) -> Result<CycleBounds, TimingError> {
    let sites = count_if_sites(&program.body);
    let paths: u128 = 1u128
        .checked_shl(sites as u32)
        .unwrap_or(u128::MAX);
    if paths > cap as u128 {
        return Err(TimingError::PathExplosion {
            paths,
            cap: cap as u128,
        });
    }
    // paths >= 1 always: a program with no branch sites has one path.
    let mut best = u64::MAX;
    let mut worst = 0u64;
    for mask in 0..paths {
        let mut next_site = 0usize;
        let cost = eval_path(&program.body, core, mask as u64, &mut next_site)?;
        best = best.min(cost);
        worst = worst.max(cost);
    }
    Ok(CycleBounds {
        bcet_cycles: best,
        wcet_cycles: worst,
    })
}

fn count_if_sites(node: &Node) -> usize {
    match node {
        Node::Ops(_) => 0,
        Node::Seq(items) => items.iter().map(count_if_sites).sum(),
        Node::If {
            then_arm, else_arm, ..
        } => 1 + count_if_sites(then_arm) + count_if_sites(else_arm),
        Node::Loop { body, .. } => count_if_sites(body),
    }
}

fn eval_path(
    node: &Node,
    core: &CoreType,
    mask: u64,
    next_site: &mut usize,
) -> Result<u64, TimingError> {
    match node {
        Node::Ops(counts) => ops_cycles(counts, core),
        Node::Seq(items) => {
            let mut total = 0;
            for item in items {
                total += eval_path(item, core, mask, next_site)?;
            }
            Ok(total)
        }
        Node::If {
            cond,
            then_arm,
            else_arm,
            ..
        } => {
            let site = *next_site;
            *next_site += 1;
            let take_then = mask >> site & 1 == 0;
            let cond_cost = ops_cycles(cond, core)?;
            // Walk both arms to keep site numbering aligned; only the taken
            // arm contributes cost.
            let then_cost = eval_path(then_arm, core, mask, next_site)?;
            let else_cost = eval_path(else_arm, core, mask, next_site)?;
            Ok(cond_cost + if take_then { then_cost } else { else_cost })
        }
        Node::Loop { bound, body } => {
            let cost = eval_path(body, core, mask, next_site)?;
            Ok(bound * cost)
        }
    }
}

/// Instruction-class counts along the worst-case (cycle) path.
///
/// Branch ties resolve toward the `then` arm; condition blocks always
/// execute; loop bodies are multiplied by their bound.
pub fn worst_case_counts(program: &Program, core: &CoreType) -> Result<OpCounts, TimingError> {
    Ok(wc_counts_node(&program.body, core)?.1)
}

/// Worst-case path cycles and counts of a subtree.
pub fn wc_counts_node(node: &Node, core: &CoreType) -> Result<(u64, OpCounts), TimingError> {
    match node {
        Node::Ops(counts) => Ok((ops_cycles(counts, core)?, counts.clone())),
        Node::Seq(items) => {
            let mut cycles = 0;
            let mut counts = OpCounts::new();
            for item in items {
                let (c, k) = wc_counts_node(item, core)?;
                cycles += c;
                add_counts(&mut counts, &k, 1);
            }
            Ok((cycles, counts))
        }
        Node::If {
            cond,
            then_arm,
            else_arm,
            ..
        } => {
            let cond_cycles = ops_cycles(cond, core)?;
            let (tc, tk) = wc_counts_node(then_arm, core)?;
            let (ec, ek) = wc_counts_node(else_arm, core)?;
            let (arm_cycles, arm_counts) = if tc >= ec { (tc, tk) } else { (ec, ek) };
            let mut counts = cond.clone();
            add_counts(&mut counts, &arm_counts, 1);
            Ok((cond_cycles + arm_cycles, counts))
        }
        Node::Loop { bound, body } => {
            let (c, k) = wc_counts_node(body, core)?;
            let mut counts = OpCounts::new();
            add_counts(&mut counts, &k, *bound);
            Ok((bound * c, counts))
        }
    }
}

fn add_counts(into: &mut OpCounts, from: &OpCounts, times: u64) {
    for (class, &count) in from {
        *into.entry(class.clone()).or_insert(0) += count * times;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::model::platform::testutil::single_core_platform;
    use crate::model::PlatformModel;

    fn core() -> (PlatformModel, usize) {
        (single_core_platform(), 0)
    }

    fn bounds(text: &str) -> CycleBounds {
        let (platform, _) = core();
        let p = parse_program(text).unwrap();
        analyze_bounds(&p, &platform.core_types[0]).unwrap()
    }

    fn oracle(text: &str) -> CycleBounds {
        let (platform, _) = core();
        let p = parse_program(text).unwrap();
        enumerate_paths_bounds(&p, &platform.core_types[0], 1 << 20).unwrap()
    }

    #[test]
    fn empty_program_is_zero() {
        assert_eq!(
            bounds("(prog p (ops))"),
            CycleBounds {
                bcet_cycles: 0,
                wcet_cycles: 0
            }
        );
        assert_eq!(oracle("(prog p (ops))").wcet_cycles, 0);
    }

    #[test]
    fn straight_line_sums() {
        let b = bounds("(prog p (seq (ops alu 2)))");
        assert_eq!((b.bcet_cycles, b.wcet_cycles), (2, 2));
    }

    #[test]
    fn if_takes_extremal_arms() {
        // cond branch=2; then alu*3=3; else alu*1=1 -> (2+1, 2+3) = (3, 5).
        let text = "(prog p (if (ops branch 1) (ops alu 3) (ops alu 1)))";
        let b = bounds(text);
        assert_eq!((b.bcet_cycles, b.wcet_cycles), (3, 5));
        assert_eq!(oracle(text), b);
    }

    #[test]
    fn loop_multiplies() {
        // body alu+load = 3 cycles, 4 iterations.
        let text = "(prog p (loop 4 (ops alu 1 load 1)))";
        let b = bounds(text);
        assert_eq!((b.bcet_cycles, b.wcet_cycles), (12, 12));
        assert_eq!(oracle(text), b);
    }

    #[test]
    fn nested_if_in_loop_scales_per_iteration() {
        // Per-iteration wcet = 2 + 3 = 5, bcet = 2 + 1 = 3; bound 2.
        let text = "(prog p (loop 2 (if (ops branch 1) (ops alu 3) (ops alu 1))))";
        let b = bounds(text);
        assert_eq!((b.bcet_cycles, b.wcet_cycles), (6, 10));
        assert_eq!(oracle(text), b);
    }

    #[test]
    fn unknown_class_is_reported() {
        let (platform, _) = core();
        let p = parse_program("(prog p (ops fpu 1))").unwrap();
        assert_eq!(
            analyze_bounds(&p, &platform.core_types[0]),
            Err(TimingError::UnknownInstructionClass {
                class: "fpu".into()
            })
        );
    }

    #[test]
    fn path_explosion_is_guarded() {
        let mut text = String::from("(prog p (seq");
        for _ in 0..8 {
            text.push_str(" (if (ops branch 1) (ops alu 1) (ops alu 2))");
        }
        text.push_str("))");
        let (platform, _) = core();
        let p = parse_program(&text).unwrap();
        assert!(matches!(
            enumerate_paths_bounds(&p, &platform.core_types[0], 100),
            Err(TimingError::PathExplosion { paths: 256, .. })
        ));
        // With a big enough cap the oracle agrees with the analysis.
        let b = analyze_bounds(&p, &platform.core_types[0]).unwrap();
        let o = enumerate_paths_bounds(&p, &platform.core_types[0], 1 << 20).unwrap();
        assert_eq!(b, o);
    }

    #[test]
    fn worst_case_counts_follow_wcet_path() {
        // wcet path takes the mul arm (6 cycles) over the alu arm (1).
        let text = "(prog p (if (ops branch 1) (ops mul 2) (ops alu 1)))";
        let p = parse_program(text).unwrap();
        let (platform, _) = core();
        let counts = worst_case_counts(&p, &platform.core_types[0]).unwrap();
        assert_eq!(counts.get("branch"), Some(&1));
        assert_eq!(counts.get("mul"), Some(&2));
        assert_eq!(counts.get("alu"), None);
    }

    #[test]
    fn worst_case_counts_tie_prefers_then() {
        // Both arms cost 2 cycles; tie goes to the then arm (load).
        let text = "(prog p (if (ops) (ops load 1) (ops store 1)))";
        let p = parse_program(text).unwrap();
        let (platform, _) = core();
        let counts = worst_case_counts(&p, &platform.core_types[0]).unwrap();
        assert_eq!(counts.get("load"), Some(&1));
        assert_eq!(counts.get("store"), None);
    }

    #[test]
    fn loop_scales_counts() {
        let text = "(prog p (loop 4 (ops alu 1 load 1)))";
        let p = parse_program(text).unwrap();
        let (platform, _) = core();
        let counts = worst_case_counts(&p, &platform.core_types[0]).unwrap();
        assert_eq!(counts.get("alu"), Some(&4));
        assert_eq!(counts.get("load"), Some(&4));
    }
}
