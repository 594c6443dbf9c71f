//! Side-channel analysis of secret-dependent branches.
//!
//! A branch marked `secret` leaks through any observable difference between
//! its arms. Per site we compare the arms' worst-case cycle cost and their
//! worst-case switching energy; the site score is the relative range
//! `(max − min) / max` (0 when both arms cost nothing), and a program's
//! score per dimension is the maximum over its sites. `constant_time`
//! demands a time score of exactly 0; `constant_energy` tolerates a
//! relative energy imbalance of at most 1e-6.
//!
//! [`balance_branches`] removes timing leakage by padding the cheaper arm
//! with `nop`s until the cycle costs match. Padding never inserts memory or
//! control classes; the admissible padding classes are part of the platform
//! description.

use crate::energy::EnergyModel;
use crate::ir::{Node, OpCounts, Program};
use crate::model::CoreType;
use crate::spec::SecurityLevel;
use crate::timing::{self, TimingError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative energy imbalance tolerated by `constant_energy`.
pub const ENERGY_LEAKAGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SecurityError {
    #[error("unknown instruction class '{class}'")]
    UnknownInstructionClass { class: String },
    #[error("site {site}: cycle difference {difference} is not a multiple of any padding class cost (residual {residual})")]
    UnbalanceableSite {
        site: String,
        difference: u64,
        residual: u64,
    },
}

impl From<TimingError> for SecurityError {
    fn from(e: TimingError) -> Self {
        match e {
            TimingError::UnknownInstructionClass { class } => {
                SecurityError::UnknownInstructionClass { class }
            }
            TimingError::PathExplosion { .. } => unreachable!("structural analysis"),
        }
    }
}

/// Per-site imbalance of one secret branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteLeakage {
    /// Stable id: secret branches numbered in preorder (`if0`, `if1`, ...).
    pub site: String,
    pub wcet_then: u64,
    pub wcet_else: u64,
    pub energy_then_mj: f64,
    pub energy_else_mj: f64,
    pub leakage_time: f64,
    pub leakage_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub sites: Vec<SiteLeakage>,
    /// Max over sites; 0 when every site is balanced (or there are none).
    pub leakage_time: f64,
    pub leakage_energy: f64,
}

impl LeakageReport {
    /// Does this leakage satisfy the given contract level?
    pub fn satisfies(&self, level: SecurityLevel) -> bool {
        leakage_satisfies(level, self.leakage_time, self.leakage_energy)
    }
}

/// The contract comparison shared with the certificate checker.
pub fn leakage_satisfies(level: SecurityLevel, leakage_time: f64, leakage_energy: f64) -> bool {
    (!level.requires_time() || leakage_time == 0.0)
        && (!level.requires_energy() || leakage_energy <= ENERGY_LEAKAGE_TOLERANCE)
}

fn relative_range(a: f64, b: f64) -> f64 {
    let max = a.max(b);
    if max == 0.0 {
        0.0
    } else {
        (max - a.min(b)) / max
    }
}

/// Quantify the time/energy imbalance of every secret branch.
pub fn leakage_metric(
    program: &Program,
    core: &CoreType,
    model: &EnergyModel,
) -> Result<LeakageReport, SecurityError> {
    let mut sites = Vec::new();
    let mut next_id = 0usize;
    walk_sites(&program.body, core, model, &mut next_id, &mut sites)?;
    let leakage_time = sites.iter().map(|s| s.leakage_time).fold(0.0, f64::max);
    let leakage_energy = sites.iter().map(|s| s.leakage_energy).fold(0.0, f64::max);
    Ok(LeakageReport {
        sites,
        leakage_time,
        leakage_energy,
    })
}

fn arm_energy_mj(node: &Node, core: &CoreType, model: &EnergyModel) -> Result<f64, SecurityError> {
    let (_, counts) = timing::wc_counts_node(node, core)?;
    let mut nj = 0.0;
    for (class, count) in counts {
        nj += count as f64
            * model
                .coefficient(&class)
                .map_err(|_| SecurityError::UnknownInstructionClass { class })?;
    }
    Ok(nj * 1e-6)
}

fn walk_sites(
    node: &Node,
    core: &CoreType,
    model: &EnergyModel,
    next_id: &mut usize,
    sites: &mut Vec<SiteLeakage>,
) -> Result<(), SecurityError> {
    match node {
        Node::Ops(_) => Ok(()),
        Node::Seq(items) => {
            for item in items {
                walk_sites(item, core, model, next_id, sites)?;
            }
            Ok(())
        }
        Node::Loop { body, .. } => walk_sites(body, core, model, next_id, sites),
        Node::If {
            secret,
            then_arm,
            else_arm,
            ..
        } => {
            if *secret {
                let id = *next_id;
                *next_id += 1;
                let wcet_then = timing::analyze_node(then_arm, core)?.wcet_cycles;
                let wcet_else = timing::analyze_node(else_arm, core)?.wcet_cycles;
                let energy_then = arm_energy_mj(then_arm, core, model)?;
                let energy_else = arm_energy_mj(else_arm, core, model)?;
                sites.push(SiteLeakage {
                    site: format!("if{id}"),
                    wcet_then,
                    wcet_else,
                    energy_then_mj: energy_then,
                    energy_else_mj: energy_else,
                    leakage_time: relative_range(wcet_then as f64, wcet_else as f64),
                    leakage_energy: relative_range(energy_then, energy_else),
                });
            }
            walk_sites(then_arm, core, model, next_id, sites)?;
            walk_sites(else_arm, core, model, next_id, sites)
        }
    }
}

/// Pad the cheaper arm of every secret branch with `nop`s until both arms
/// have equal worst-case cycle cost. Non-secret branches and everything
/// outside secret branches are untouched.
pub fn balance_branches(program: &Program, core: &CoreType) -> Result<Program, SecurityError> {
    balance(program, core, None)
}

/// Like [`balance_branches`], but chooses among the platform's padding
/// classes the one that minimizes the residual energy imbalance of each
/// site (ties: `nop` first, then lexicographic).
pub fn balance_branches_energy_aware(
    program: &Program,
    core: &CoreType,
    model: &EnergyModel,
) -> Result<Program, SecurityError> {
    balance(program, core, Some(model))
}

fn balance(
    program: &Program,
    core: &CoreType,
    model: Option<&EnergyModel>,
) -> Result<Program, SecurityError> {
    let mut next_id = 0usize;
    let body = balance_node(&program.body, core, model, &mut next_id)?;
    Ok(Program {
        name: program.name.clone(),
        body,
    })
}

fn balance_node(
    node: &Node,
    core: &CoreType,
    model: Option<&EnergyModel>,
    next_id: &mut usize,
) -> Result<Node, SecurityError> {
    match node {
        Node::Ops(counts) => Ok(Node::Ops(counts.clone())),
        Node::Seq(items) => Ok(Node::Seq(
            items
                .iter()
                .map(|n| balance_node(n, core, model, next_id))
                .collect::<Result<_, _>>()?,
        )),
        Node::Loop { bound, body } => Ok(Node::Loop {
            bound: *bound,
            body: Box::new(balance_node(body, core, model, next_id)?),
        }),
        Node::If {
            secret,
            cond,
            then_arm,
            else_arm,
        } => {
            let id = if *secret {
                let id = *next_id;
                *next_id += 1;
                Some(id)
            } else {
                None
            };
            // Balance nested sites first so this site's arm costs are final.
            let then_arm = balance_node(then_arm, core, model, next_id)?;
            let else_arm = balance_node(else_arm, core, model, next_id)?;
            if let Some(id) = id {
                let (then_arm, else_arm) =
                    balance_site(&format!("if{id}"), then_arm, else_arm, core, model)?;
                Ok(Node::If {
                    secret: true,
                    cond: cond.clone(),
                    then_arm: Box::new(then_arm),
                    else_arm: Box::new(else_arm),
                })
            } else {
                Ok(Node::If {
                    secret: false,
                    cond: cond.clone(),
                    then_arm: Box::new(then_arm),
                    else_arm: Box::new(else_arm),
                })
            }
        }
    }
}

fn balance_site(
    site: &str,
    then_arm: Node,
    else_arm: Node,
    core: &CoreType,
    model: Option<&EnergyModel>,
) -> Result<(Node, Node), SecurityError> {
    let wcet_then = timing::analyze_node(&then_arm, core)?.wcet_cycles;
    let wcet_else = timing::analyze_node(&else_arm, core)?.wcet_cycles;
    if wcet_then == wcet_else {
        return Ok((then_arm, else_arm));
    }
    let difference = wcet_then.abs_diff(wcet_else);
    let pad_then = wcet_then < wcet_else;

    let choice = choose_padding(site, difference, core, model, if pad_then { &then_arm } else { &else_arm }, if pad_then { &else_arm } else { &then_arm })?;
    let (class, count) = choice;

    let pad = |arm: Node| -> Node {
        let mut padding = OpCounts::new();
        padding.insert(class.clone(), count);
        match arm {
            Node::Seq(mut items) => {
                items.push(Node::Ops(padding));
                Node::Seq(items)
            }
            other => Node::Seq(vec![other, Node::Ops(padding)]),
        }
    };
    if pad_then {
        Ok((pad(then_arm), else_arm))
    } else {
        Ok((then_arm, pad(else_arm)))
    }
}

/// Pick a padding class whose cycle cost divides `difference` exactly.
///
/// Default mode considers `nop` only (rounding the count up and re-checking
/// exactness). Energy-aware mode scans the platform's padding classes and
/// minimizes the post-padding energy imbalance of the site.
fn choose_padding(
    site: &str,
    difference: u64,
    core: &CoreType,
    model: Option<&EnergyModel>,
    cheap_arm: &Node,
    rich_arm: &Node,
) -> Result<(String, u64), SecurityError> {
    let nop_cost = |class: &str| -> Result<u64, SecurityError> {
        core.cycle_table
            .get(class)
            .copied()
            .ok_or_else(|| SecurityError::UnknownInstructionClass {
                class: class.to_string(),
            })
    };

    let Some(model) = model else {
        let cost = nop_cost("nop")?;
        let count = difference.div_ceil(cost);
        if count * cost != difference {
            return Err(SecurityError::UnbalanceableSite {
                site: site.to_string(),
                difference,
                residual: difference % cost,
            });
        }
        return Ok(("nop".to_string(), count));
    };

    // Energy-aware: among padding classes dividing the difference, minimize
    // the resulting |energy(cheap + pad) - energy(rich)|. Ties prefer nop,
    // then the lexicographically smaller class.
    let cheap_energy = arm_energy_mj(cheap_arm, core, model)?;
    let rich_energy = arm_energy_mj(rich_arm, core, model)?;
    let mut candidates: Vec<&str> = core.padding_classes.iter().map(|s| s.as_str()).collect();
    candidates.sort_by_key(|&c| (c != "nop", c));
    let mut best: Option<(f64, String, u64)> = None;
    let mut smallest_residual = u64::MAX;
    for class in candidates {
        let cost = nop_cost(class)?;
        if difference % cost != 0 {
            smallest_residual = smallest_residual.min(difference % cost);
            continue;
        }
        let count = difference / cost;
        let coef = model
            .coefficient(class)
            .map_err(|_| SecurityError::UnknownInstructionClass {
                class: class.to_string(),
            })?;
        let imbalance = (cheap_energy + count as f64 * coef * 1e-6 - rich_energy).abs();
        if best.as_ref().map(|(b, _, _)| imbalance < *b).unwrap_or(true) {
            best = Some((imbalance, class.to_string(), count));
        }
    }
    match best {
        Some((_, class, count)) => Ok((class, count)),
        None => Err(SecurityError::UnbalanceableSite {
            site: site.to_string(),
            difference,
            residual: smallest_residual,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::model::platform::testutil::single_core_platform;
    use crate::timing::analyze_bounds;

    fn setup() -> (crate::model::PlatformModel, EnergyModel) {
        let platform = single_core_platform();
        let model = EnergyModel::from_table(&platform.core_types[0]);
        (platform, model)
    }

    #[test]
    fn no_secret_ifs_means_zero_leakage() {
        let (platform, model) = setup();
        let p = parse_program("(prog p (if (ops branch 1) (ops alu 5) (ops alu 1)))").unwrap();
        let report = leakage_metric(&p, &platform.core_types[0], &model).unwrap();
        assert!(report.sites.is_empty());
        assert_eq!(report.leakage_time, 0.0);
        assert_eq!(report.leakage_energy, 0.0);
    }

    #[test]
    fn arms_five_and_three_leak_forty_percent() {
        let (platform, model) = setup();
        let p =
            parse_program("(prog p (if secret (ops branch 1) (ops alu 5) (ops alu 3)))").unwrap();
        let report = leakage_metric(&p, &platform.core_types[0], &model).unwrap();
        assert_eq!(report.sites.len(), 1);
        assert_eq!(report.sites[0].wcet_then, 5);
        assert_eq!(report.sites[0].wcet_else, 3);
        assert!((report.leakage_time - 0.4).abs() < 1e-15);
    }

    #[test]
    fn identical_arms_do_not_leak() {
        let (platform, model) = setup();
        let p =
            parse_program("(prog p (if secret (ops branch 1) (ops alu 2) (ops alu 2)))").unwrap();
        let report = leakage_metric(&p, &platform.core_types[0], &model).unwrap();
        assert_eq!(report.leakage_time, 0.0);
        assert_eq!(report.leakage_energy, 0.0);
    }

    #[test]
    fn balancing_pads_cheap_arm_to_zero_leakage() {
        let (platform, model) = setup();
        let core = &platform.core_types[0];
        let p =
            parse_program("(prog p (if secret (ops branch 1) (ops alu 5) (ops alu 3)))").unwrap();
        let before = analyze_bounds(&p, core).unwrap();
        let balanced = balance_branches(&p, core).unwrap();
        let report = leakage_metric(&balanced, core, &model).unwrap();
        assert_eq!(report.leakage_time, 0.0);
        let after = analyze_bounds(&balanced, core).unwrap();
        // Padding a non-worst arm leaves the wcet unchanged and lifts bcet.
        assert_eq!(after.wcet_cycles, before.wcet_cycles);
        assert!(after.bcet_cycles >= before.bcet_cycles);
    }

    #[test]
    fn already_balanced_program_is_unchanged() {
        let (platform, _) = setup();
        let core = &platform.core_types[0];
        let p = parse_program(
            "(prog p (seq (ops alu 1) (if secret (ops branch 1) (ops alu 2) (ops load 1))))",
        )
        .unwrap();
        let balanced = balance_branches(&p, core).unwrap();
        assert_eq!(p, balanced);
    }

    #[test]
    fn secret_if_in_loop_is_balanced_and_bound_kept() {
        let (platform, model) = setup();
        let core = &platform.core_types[0];
        let p = parse_program(
            "(prog p (loop 4 (if secret (ops branch 1) (ops alu 6) (ops alu 2))))",
        )
        .unwrap();
        let balanced = balance_branches(&p, core).unwrap();
        match &balanced.body {
            Node::Loop { bound, .. } => assert_eq!(*bound, 4),
            other => panic!("loop expected, got {other:?}"),
        }
        let report = leakage_metric(&balanced, core, &model).unwrap();
        assert_eq!(report.leakage_time, 0.0);
    }

    #[test]
    fn non_secret_parts_are_untouched() {
        let (platform, _) = setup();
        let core = &platform.core_types[0];
        let p = parse_program(
            "(prog p (seq (ops mul 7) (if (ops branch 1) (ops alu 9) (ops alu 1)) \
             (if secret (ops branch 1) (ops alu 4) (ops alu 1))))",
        )
        .unwrap();
        let balanced = balance_branches(&p, core).unwrap();
        match (&p.body, &balanced.body) {
            (Node::Seq(orig), Node::Seq(new)) => {
                assert_eq!(orig[0], new[0]);
                assert_eq!(orig[1], new[1]);
                assert_ne!(orig[2], new[2]);
            }
            _ => panic!("seq expected"),
        }
    }

    #[test]
    fn nested_secret_ifs_balance_inside_out() {
        let (platform, model) = setup();
        let core = &platform.core_types[0];
        let p = parse_program(
            "(prog p (if secret (ops branch 1) \
                (if secret (ops branch 1) (ops alu 4) (ops alu 2)) \
                (ops alu 1)))",
        )
        .unwrap();
        let balanced = balance_branches(&p, core).unwrap();
        let report = leakage_metric(&balanced, core, &model).unwrap();
        assert_eq!(report.leakage_time, 0.0);
        assert_eq!(report.sites.len(), 2);
    }

    #[test]
    fn unbalanceable_difference_reports_residual() {
        let (platform, _) = setup();
        let mut core = platform.core_types[0].clone();
        core.cycle_table.insert("nop".into(), 2);
        // Arms differ by 3 cycles; nop costs 2.
        let p =
            parse_program("(prog p (if secret (ops branch 1) (ops alu 5) (ops alu 2)))").unwrap();
        match balance_branches(&p, &core) {
            Err(SecurityError::UnbalanceableSite {
                site,
                difference,
                residual,
            }) => {
                assert_eq!(site, "if0");
                assert_eq!(difference, 3);
                assert_eq!(residual, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn energy_aware_padding_prefers_energy_matching_class() {
        let (platform, _) = setup();
        let mut core = platform.core_types[0].clone();
        // alu and nop both cost 1 cycle; alu carries 1.0 nJ, nop 0.1 nJ.
        core.energy_table.insert("nop".into(), 0.1);
        core.padding_classes = vec!["nop".into(), "alu".into()];
        let model = EnergyModel::from_table(&core);
        // then arm: alu 5 (5 cycles, 5 nJ); else arm: alu 3 (3 cycles, 3 nJ).
        // Padding 2 alu gives 5 nJ exactly; 2 nops give 3.2 nJ.
        let p =
            parse_program("(prog p (if secret (ops branch 1) (ops alu 5) (ops alu 3)))").unwrap();
        let balanced = balance_branches_energy_aware(&p, &core, &model).unwrap();
        let report = leakage_metric(&balanced, &core, &model).unwrap();
        assert_eq!(report.leakage_time, 0.0);
        assert!(report.leakage_energy <= ENERGY_LEAKAGE_TOLERANCE);
    }

    #[test]
    fn level_thresholds() {
        assert!(leakage_satisfies(SecurityLevel::None, 0.9, 0.9));
        assert!(leakage_satisfies(SecurityLevel::ConstantTime, 0.0, 0.9));
        assert!(!leakage_satisfies(SecurityLevel::ConstantTime, 1e-9, 0.0));
        assert!(leakage_satisfies(SecurityLevel::ConstantEnergy, 0.9, 1e-7));
        assert!(!leakage_satisfies(SecurityLevel::ConstantEnergy, 0.0, 1e-3));
        assert!(leakage_satisfies(SecurityLevel::ConstantBoth, 0.0, 0.0));
        assert!(!leakage_satisfies(SecurityLevel::ConstantBoth, 0.0, 1e-3));
    }
}
