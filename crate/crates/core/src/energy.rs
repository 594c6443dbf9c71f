//! Instruction-level energy models, per-task energy prediction, dynamic
//! profile ingestion, and energy-optimal frequency selection.
//!
//! The model is linear in instruction-class counts: fitting a measurement
//! campaign is a least-squares solve, prediction walks the worst-case path
//! and adds the power-model term `(p_leak + k_dyn·f³)·t`. The interplay of
//! the `1/f` leakage term and the `f²` dynamic term puts the energy-optimal
//! frequency strictly inside the range whenever both are active.

use crate::ir::Program;
use crate::linalg::{self, LstsqError};
use crate::model::{AnalysisResults, CoreType, PlatformModel, Provenance, ResultEntry, ResultKey, TaskGraph};
use crate::real::{mean, percentile_nearest_rank, Real};
use crate::timing;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("empty measurement campaign")]
    EmptyCampaign,
    #[error("rank-deficient campaign: dependent classes {classes:?}")]
    RankDeficient { classes: Vec<String> },
    #[error("unknown instruction class '{class}'")]
    UnknownInstructionClass { class: String },
    #[error("frequency {freq_mhz} MHz is not an admissible level")]
    UnknownFrequency { freq_mhz: f64 },
    #[error("profile line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("no profile samples for task '{task}'")]
    EmptyProfile { task: String },
}

// ---------------------------------------------------------------------------
// Power-model kernels (scalar-generic)
// ---------------------------------------------------------------------------

/// Static + dynamic power in mW at frequency `f` MHz.
pub fn power_mw<S: Real>(p_leak_mw: S, k_dyn: S, f_mhz: S) -> S {
    p_leak_mw + k_dyn * f_mhz * f_mhz * f_mhz
}

/// Frequency-dependent energy factor per cycle: `p_leak/f + k_dyn·f²`.
///
/// Power times time-per-cycle; minimizing this in `f` minimizes the
/// power-model energy of a fixed cycle count.
pub fn energy_per_cycle<S: Real>(p_leak_mw: S, k_dyn: S, f_mhz: S) -> S {
    p_leak_mw / f_mhz + k_dyn * f_mhz * f_mhz
}

/// The admissible level minimizing `(p_leak/f + k_dyn·f²)·cycles`.
/// Ties resolve toward the lower level.
pub fn optimal_frequency(core: &CoreType, cycles: u64) -> f64 {
    debug_assert!(cycles >= 1);
    let scale = cycles as f64;
    let mut best = core.freq_levels[0];
    let mut best_e = energy_per_cycle(core.p_leak_mw, core.k_dyn_mw_per_mhz3, best) * scale;
    for &f in &core.freq_levels[1..] {
        let e = energy_per_cycle(core.p_leak_mw, core.k_dyn_mw_per_mhz3, f) * scale;
        if e < best_e {
            best = f;
            best_e = e;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Model fitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub residual_norm: f64,
    pub condition_indicator: f64,
    pub sample_count: usize,
    /// Classes whose fitted coefficient came out negative and was clamped.
    pub clamped_classes: Vec<String>,
}

/// Per-class switching-energy coefficients for one core type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub core_type: String,
    /// nJ per instruction.
    pub coefficients_nj: BTreeMap<String, f64>,
    /// Present when the model came from a fit rather than a table.
    pub fit_report: Option<FitReport>,
}

impl EnergyModel {
    /// Model taken directly from a core type's energy table.
    pub fn from_table(core: &CoreType) -> Self {
        EnergyModel {
            core_type: core.name.clone(),
            coefficients_nj: core.energy_table.clone(),
            fit_report: None,
        }
    }

    pub fn coefficient(&self, class: &str) -> Result<f64, EnergyError> {
        self.coefficients_nj
            .get(class)
            .copied()
            .ok_or_else(|| EnergyError::UnknownInstructionClass {
                class: class.into(),
            })
    }
}

/// One measurement: instruction-class counts and the observed energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementCampaign {
    pub classes: Vec<String>,
    /// (counts per class, measured energy in nJ) per run.
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl MeasurementCampaign {
    /// Parse the campaign CSV: header `class_1,...,class_n,energy_nj`.
    pub fn from_csv(text: &str) -> Result<Self, EnergyError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(EnergyError::EmptyCampaign)?;
        let mut cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        match cols.pop() {
            Some(last) if last == "energy_nj" => {}
            _ => {
                return Err(EnergyError::MalformedRow {
                    line: 1,
                    message: "campaign header must end with 'energy_nj'".into(),
                })
            }
        }
        if cols.is_empty() {
            return Err(EnergyError::MalformedRow {
                line: 1,
                message: "campaign header lists no instruction classes".into(),
            });
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
            if fields.len() != cols.len() + 1 {
                return Err(EnergyError::MalformedRow {
                    line: lineno,
                    message: format!("expected {} fields, found {}", cols.len() + 1, fields.len()),
                });
            }
            let mut counts = Vec::with_capacity(cols.len());
            for (f, col) in fields[..cols.len()].iter().zip(&cols) {
                let v: f64 = f.parse().map_err(|_| EnergyError::MalformedRow {
                    line: lineno,
                    message: format!("bad count '{f}' for class '{col}'"),
                })?;
                if v < 0.0 {
                    return Err(EnergyError::MalformedRow {
                        line: lineno,
                        message: format!("negative count for class '{col}'"),
                    });
                }
                counts.push(v);
            }
            let energy: f64 = fields[cols.len()].parse().map_err(|_| EnergyError::MalformedRow {
                line: lineno,
                message: format!("bad energy '{}'", fields[cols.len()]),
            })?;
            if energy < 0.0 {
                return Err(EnergyError::MalformedRow {
                    line: lineno,
                    message: "negative energy".into(),
                });
            }
            rows.push((counts, energy));
        }
        Ok(MeasurementCampaign { classes: cols, rows })
    }
}

/// Least-squares fit of per-class coefficients from a campaign.
///
/// Negative fitted coefficients are clamped to zero and reported in the
/// fit report rather than failing the fit.
pub fn fit_model(campaign: &MeasurementCampaign, core_type: &str) -> Result<EnergyModel, EnergyError> {
    if campaign.rows.is_empty() {
        return Err(EnergyError::EmptyCampaign);
    }
    let a: Vec<Vec<f64>> = campaign.rows.iter().map(|(c, _)| c.clone()).collect();
    let b: Vec<f64> = campaign.rows.iter().map(|(_, e)| *e).collect();
    let fit = linalg::lstsq(&a, &b).map_err(|e| match e {
        LstsqError::Empty => EnergyError::EmptyCampaign,
        LstsqError::RankDeficient {
            dependent_columns, ..
        } => EnergyError::RankDeficient {
            classes: dependent_columns
                .iter()
                .map(|&j| campaign.classes[j].clone())
                .collect(),
        },
    })?;
    let mut clamped = Vec::new();
    let mut coefficients = BTreeMap::new();
    for (class, &coef) in campaign.classes.iter().zip(fit.coefficients.iter()) {
        let value = if coef < 0.0 {
            clamped.push(class.clone());
            log::warn!("fit: clamping negative coefficient for class '{class}' ({coef:.3e} nJ)");
            0.0
        } else {
            coef
        };
        coefficients.insert(class.clone(), value);
    }
    Ok(EnergyModel {
        core_type: core_type.to_string(),
        coefficients_nj: coefficients,
        fit_report: Some(FitReport {
            residual_norm: fit.residual_norm,
            condition_indicator: fit.condition_indicator,
            sample_count: campaign.rows.len(),
            clamped_classes: clamped,
        }),
    })
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

/// Switching energy (mJ) along the worst-case path: `Σ count·coef·10⁻⁶`.
pub fn switching_energy_mj(
    program: &Program,
    model: &EnergyModel,
    core: &CoreType,
) -> Result<f64, EnergyError> {
    let counts = timing::worst_case_counts(program, core).map_err(timing_err)?;
    let mut nj = 0.0;
    for (class, count) in counts {
        nj += count as f64 * model.coefficient(&class)?;
    }
    Ok(nj * 1e-6)
}

/// Worst-case energy (mJ) of one execution at `freq_mhz`.
pub fn predict_task_energy(
    program: &Program,
    model: &EnergyModel,
    core: &CoreType,
    freq_mhz: f64,
) -> Result<f64, EnergyError> {
    if !core.freq_levels.contains(&freq_mhz) {
        return Err(EnergyError::UnknownFrequency { freq_mhz });
    }
    let switching = switching_energy_mj(program, model, core)?;
    let wcet = timing::analyze_bounds(program, core)
        .map_err(timing_err)?
        .wcet_cycles;
    let time_ms = core.time_ms(wcet, freq_mhz);
    Ok(switching + core.power_mw(freq_mhz) * time_ms * 1e-3)
}

fn timing_err(e: timing::TimingError) -> EnergyError {
    match e {
        timing::TimingError::UnknownInstructionClass { class } => {
            EnergyError::UnknownInstructionClass { class }
        }
        timing::TimingError::PathExplosion { .. } => unreachable!("structural analysis"),
    }
}

// ---------------------------------------------------------------------------
// Dynamic profiles
// ---------------------------------------------------------------------------

/// Per-task statistics of a measurement profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub n_samples: usize,
    pub mean_time_ms: f64,
    pub max_time_ms: f64,
    pub min_time_ms: f64,
    pub mean_energy_mj: f64,
    pub max_energy_mj: f64,
    pub p95_time_ms: f64,
    pub p95_energy_mj: f64,
}

/// Which profiled time statistic stands in for the worst case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeStat {
    MaxObserved,
    P95,
}

/// Ingest the profile CSV (`task,run,time_ms,energy_mj`).
///
/// With `known_tasks` given, rows naming other tasks are malformed and
/// every known task must appear at least once.
pub fn ingest_profile(
    text: &str,
    known_tasks: Option<&BTreeSet<String>>,
) -> Result<BTreeMap<String, ProfileStats>, EnergyError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if header != "task,run,time_ms,energy_mj" {
        return Err(EnergyError::MalformedRow {
            line: 1,
            message: "profile header must be 'task,run,time_ms,energy_mj'".into(),
        });
    }
    let mut times: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut energies: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() != 4 {
            return Err(EnergyError::MalformedRow {
                line: lineno,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let task = fields[0];
        if let Some(known) = known_tasks {
            if !known.contains(task) {
                return Err(EnergyError::MalformedRow {
                    line: lineno,
                    message: format!("unknown task '{task}'"),
                });
            }
        }
        fields[1].parse::<u64>().map_err(|_| EnergyError::MalformedRow {
            line: lineno,
            message: format!("bad run index '{}'", fields[1]),
        })?;
        let time: f64 = fields[2].parse().map_err(|_| EnergyError::MalformedRow {
            line: lineno,
            message: format!("bad time '{}'", fields[2]),
        })?;
        let energy: f64 = fields[3].parse().map_err(|_| EnergyError::MalformedRow {
            line: lineno,
            message: format!("bad energy '{}'", fields[3]),
        })?;
        if time < 0.0 || energy < 0.0 {
            return Err(EnergyError::MalformedRow {
                line: lineno,
                message: "time and energy must be nonnegative".into(),
            });
        }
        times.entry(task.to_string()).or_default().push(time);
        energies.entry(task.to_string()).or_default().push(energy);
    }
    if let Some(known) = known_tasks {
        for task in known {
            if !times.contains_key(task) {
                return Err(EnergyError::EmptyProfile { task: task.clone() });
            }
        }
    }
    let mut stats = BTreeMap::new();
    for (task, mut ts) in times {
        let mut es = energies.remove(&task).expect("parallel maps");
        ts.sort_by(f64::total_cmp);
        es.sort_by(f64::total_cmp);
        stats.insert(
            task,
            ProfileStats {
                n_samples: ts.len(),
                mean_time_ms: mean(&ts),
                max_time_ms: *ts.last().expect("nonempty"),
                min_time_ms: ts[0],
                mean_energy_mj: mean(&es),
                max_energy_mj: *es.last().expect("nonempty"),
                p95_time_ms: percentile_nearest_rank(&ts, 0.95),
                p95_energy_mj: percentile_nearest_rank(&es, 0.95),
            },
        );
    }
    Ok(stats)
}

/// Turn profile statistics into analysis results.
///
/// Measured time is re-expressed as cycles at each core type's reference
/// frequency (where the measurement is reproduced exactly); the chosen time
/// statistic bounds the worst case and the mean energy feeds the objective.
/// Leakage is not profiled and stays absent.
pub fn profile_to_results(
    stats: &BTreeMap<String, ProfileStats>,
    graph: &TaskGraph,
    platform: &PlatformModel,
    time_stat: TimeStat,
) -> Result<AnalysisResults, EnergyError> {
    let mut results = AnalysisResults::default();
    for task in &graph.nodes {
        let st = stats
            .get(&task.name)
            .ok_or_else(|| EnergyError::EmptyProfile {
                task: task.name.clone(),
            })?;
        let wc_time = match time_stat {
            TimeStat::MaxObserved => st.max_time_ms,
            TimeStat::P95 => st.p95_time_ms,
        };
        for ct in &platform.core_types {
            let f_ref = ct.f_max();
            let entry = ResultEntry {
                wcet_cycles: (wc_time * f_ref * 1000.0).round() as u64,
                bcet_cycles: (st.min_time_ms * f_ref * 1000.0).round() as u64,
                energy_mj: st.mean_energy_mj,
                leakage_time: None,
                leakage_energy: None,
                provenance: Provenance::Profiled,
            };
            results.insert(ResultKey::new(&task.name, &ct.name, "base"), entry);
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::model::platform::testutil::single_core_platform;

    #[test]
    fn fit_single_class_exact() {
        let campaign = MeasurementCampaign {
            classes: vec!["alu".into()],
            rows: vec![(vec![2.0], 4.0), (vec![3.0], 6.0)],
        };
        let model = fit_model(&campaign, "m0").unwrap();
        assert_eq!(model.coefficients_nj["alu"], 2.0);
        let report = model.fit_report.unwrap();
        assert_eq!(report.sample_count, 2);
        assert!(report.residual_norm < 1e-12);
    }

    #[test]
    fn fit_rank_deficient_names_classes() {
        let campaign = MeasurementCampaign {
            classes: vec!["alu".into(), "mul".into()],
            rows: vec![(vec![1.0, 2.0], 3.0)],
        };
        match fit_model(&campaign, "m0") {
            Err(EnergyError::RankDeficient { classes }) => assert_eq!(classes.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fit_empty_campaign() {
        let campaign = MeasurementCampaign {
            classes: vec!["alu".into()],
            rows: vec![],
        };
        assert_eq!(fit_model(&campaign, "m0"), Err(EnergyError::EmptyCampaign));
    }

    #[test]
    fn negative_coefficients_clamp_with_warning() {
        // Two classes, second carries negative weight in the data.
        let campaign = MeasurementCampaign {
            classes: vec!["alu".into(), "mul".into()],
            rows: vec![
                (vec![1.0, 0.0], 2.0),
                (vec![0.0, 1.0], 0.0),
                (vec![1.0, 1.0], 1.0),
            ],
        };
        let model = fit_model(&campaign, "m0").unwrap();
        assert_eq!(model.coefficients_nj["mul"], 0.0);
        assert_eq!(model.fit_report.unwrap().clamped_classes, vec!["mul"]);
    }

    #[test]
    fn campaign_csv_parses() {
        let c = MeasurementCampaign::from_csv("alu,mul,energy_nj\n1,2,7.5\n3,0,3\n").unwrap();
        assert_eq!(c.classes, vec!["alu", "mul"]);
        assert_eq!(c.rows.len(), 2);
        assert_eq!(c.rows[0], (vec![1.0, 2.0], 7.5));
    }

    #[test]
    fn campaign_csv_rejects_bad_rows() {
        let err = MeasurementCampaign::from_csv("alu,energy_nj\n1,2\n-1,3\n").unwrap_err();
        assert!(matches!(err, EnergyError::MalformedRow { line: 3, .. }));
    }

    #[test]
    fn empty_program_predicts_zero() {
        let platform = single_core_platform();
        let ct = &platform.core_types[0];
        let mut ct0 = ct.clone();
        ct0.p_leak_mw = 1.0;
        ct0.k_dyn_mw_per_mhz3 = 0.0;
        let p = parse_program("(prog p (ops))").unwrap();
        let model = EnergyModel::from_table(&ct0);
        // Zero cycles: even the power term contributes nothing.
        let e = predict_task_energy(&p, &model, &ct0, 8.0).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn unit_conversion_thousand_alu_is_a_microjoule() {
        let platform = single_core_platform();
        let mut ct = platform.core_types[0].clone();
        ct.p_leak_mw = 0.0;
        ct.k_dyn_mw_per_mhz3 = 1e-12; // negligible, keeps the model nonzero
        let model = EnergyModel::from_table(&ct); // alu = 1.0 nJ
        let p = parse_program("(prog p (ops alu 1000))").unwrap();
        let e = predict_task_energy(&p, &model, &ct, 32.0).unwrap();
        assert!((e - 0.001).abs() < 1e-9, "{e}");
    }

    #[test]
    fn prediction_uses_wcet_path_counts() {
        let platform = single_core_platform();
        let ct = &platform.core_types[0];
        let model = EnergyModel::from_table(ct);
        // wcet path = cond + then arm (alu 3).
        let p = parse_program("(prog p (if (ops branch 1) (ops alu 3) (ops alu 1)))").unwrap();
        let switching = switching_energy_mj(&p, &model, ct).unwrap();
        // branch 1*2.0 nJ + alu 3*1.0 nJ = 5 nJ.
        assert!((switching - 5.0e-6).abs() < 1e-18);
    }

    #[test]
    fn unknown_frequency_is_rejected() {
        let platform = single_core_platform();
        let ct = &platform.core_types[0];
        let model = EnergyModel::from_table(ct);
        let p = parse_program("(prog p (ops alu 1))").unwrap();
        assert!(matches!(
            predict_task_energy(&p, &model, ct, 12.0),
            Err(EnergyError::UnknownFrequency { .. })
        ));
    }

    #[test]
    fn profile_stats_arithmetic() {
        let csv = "task,run,time_ms,energy_mj\na,0,10,1.0\na,1,12,1.4\na,2,11,1.2\n";
        let stats = ingest_profile(csv, None).unwrap();
        let s = &stats["a"];
        assert_eq!(s.n_samples, 3);
        assert_eq!(s.min_time_ms, 10.0);
        assert_eq!(s.mean_time_ms, 11.0);
        assert_eq!(s.max_time_ms, 12.0);
        assert_eq!(s.p95_time_ms, 12.0);
        assert!((s.mean_energy_mj - 1.2).abs() < 1e-12);
    }

    #[test]
    fn single_sample_collapses_stats() {
        let stats = ingest_profile("task,run,time_ms,energy_mj\na,0,5,0.5\n", None).unwrap();
        let s = &stats["a"];
        assert_eq!(
            (s.min_time_ms, s.mean_time_ms, s.max_time_ms, s.p95_time_ms),
            (5.0, 5.0, 5.0, 5.0)
        );
    }

    #[test]
    fn negative_energy_is_malformed() {
        let err = ingest_profile("task,run,time_ms,energy_mj\na,0,5,-0.5\n", None).unwrap_err();
        assert!(matches!(err, EnergyError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn unknown_task_is_malformed_when_known_set_given() {
        let known: BTreeSet<String> = ["a".to_string()].into();
        let err = ingest_profile(
            "task,run,time_ms,energy_mj\nb,0,5,0.5\n",
            Some(&known),
        )
        .unwrap_err();
        assert!(matches!(err, EnergyError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn missing_known_task_is_empty_profile() {
        let known: BTreeSet<String> = ["a".into(), "b".into()].into();
        let err = ingest_profile("task,run,time_ms,energy_mj\na,0,5,0.5\n", Some(&known))
            .unwrap_err();
        assert_eq!(err, EnergyError::EmptyProfile { task: "b".into() });
    }

    #[test]
    fn optimal_frequency_boundaries() {
        let platform = single_core_platform();
        let mut ct = platform.core_types[0].clone();
        ct.freq_levels = vec![0.5, 1.0, 2.0];
        ct.p_leak_mw = 0.0;
        ct.k_dyn_mw_per_mhz3 = 1.0;
        assert_eq!(optimal_frequency(&ct, 100), 0.5); // dynamic-only: lowest
        ct.p_leak_mw = 2.0;
        ct.k_dyn_mw_per_mhz3 = 0.0;
        assert_eq!(optimal_frequency(&ct, 100), 2.0); // leakage-only: highest
    }

    #[test]
    fn optimal_frequency_interior_sweet_spot() {
        let platform = single_core_platform();
        let mut ct = platform.core_types[0].clone();
        ct.freq_levels = vec![0.5, 1.0, 2.0];
        ct.p_leak_mw = 2.0;
        ct.k_dyn_mw_per_mhz3 = 1.0;
        // Continuous optimum (p/(2k))^(1/3) = 1.0 exactly.
        assert_eq!(optimal_frequency(&ct, 1), 1.0);
    }

    #[test]
    fn energy_kernels_work_at_f32() {
        let e32 = energy_per_cycle(2.0f32, 1.0, 1.0);
        assert!((e32 - 3.0).abs() < 1e-6);
        assert!((power_mw(1.0f32, 0.5, 2.0) - 5.0).abs() < 1e-6);
    }
}
