//! Per-task analysis results exchanged between analysers, scheduler, and
//! contract checker, plus the on-disk `results.json` format.

use super::{CoreType, ModelError};
use crate::ir::Program;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Static,
    Profiled,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Static => write!(f, "static"),
            Provenance::Profiled => write!(f, "profiled"),
        }
    }
}

/// An alternative compiled form of a task.
#[derive(Debug, Clone)]
pub struct Variant {
    pub id: String,
    /// Transform names that produced this variant (e.g. "balanced").
    pub transform_tags: Vec<String>,
    pub program: Program,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResultKey {
    pub task: String,
    pub core_type: String,
    pub variant: String,
}

impl ResultKey {
    pub fn new(task: &str, core_type: &str, variant: &str) -> Self {
        ResultKey {
            task: task.into(),
            core_type: core_type.into(),
            variant: variant.into(),
        }
    }
}

/// Analysis outcome for one (task, core type, variant).
///
/// `energy_mj` is the frequency-independent switching energy along the
/// worst-case path for `static` entries, and the mean measured energy per
/// execution for `profiled` entries (whose cycle counts are measured time
/// re-expressed at the core type's reference frequency). Leakage scores are
/// absent for profiled entries: side channels are not profiled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub wcet_cycles: u64,
    pub bcet_cycles: u64,
    pub energy_mj: f64,
    pub leakage_time: Option<f64>,
    pub leakage_energy: Option<f64>,
    pub provenance: Provenance,
}

impl ResultEntry {
    /// Energy of one execution at frequency `f_mhz` on `core`.
    ///
    /// Static entries add the power-model term over the worst-case runtime;
    /// profiled entries are measured totals and are frequency-pinned.
    pub fn energy_at(&self, core: &CoreType, f_mhz: f64) -> f64 {
        match self.provenance {
            Provenance::Static => {
                let time_ms = core.time_ms(self.wcet_cycles, f_mhz);
                self.energy_mj + core.power_mw(f_mhz) * time_ms * 1e-3
            }
            Provenance::Profiled => self.energy_mj,
        }
    }

    /// Frequencies at which this entry may be scheduled.
    pub fn admissible_freqs<'c>(&self, core: &'c CoreType) -> &'c [f64] {
        match self.provenance {
            Provenance::Static => &core.freq_levels,
            // Profiled measurements are only valid at the operating point
            // they were taken at, the reference frequency.
            Provenance::Profiled => &core.freq_levels[core.freq_levels.len() - 1..],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub time: String,
    pub energy: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            time: "cycles".into(),
            energy: "mJ".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisResults {
    pub units: Units,
    pub entries: BTreeMap<ResultKey, ResultEntry>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    task: String,
    core_type: String,
    variant: String,
    wcet_cycles: u64,
    bcet_cycles: u64,
    energy_mj: f64,
    leakage_time: Option<f64>,
    leakage_energy: Option<f64>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct ResultsFile {
    units: Units,
    records: Vec<Record>,
}

impl AnalysisResults {
    pub fn insert(&mut self, key: ResultKey, entry: ResultEntry) {
        self.entries.insert(key, entry);
    }

    pub fn get(&self, task: &str, core_type: &str, variant: &str) -> Option<&ResultEntry> {
        self.entries.get(&ResultKey::new(task, core_type, variant))
    }

    /// Variant ids recorded for (task, core_type), in sorted order.
    pub fn variants_of(&self, task: &str, core_type: &str) -> Vec<&str> {
        self.entries
            .keys()
            .filter(|k| k.task == task && k.core_type == core_type)
            .map(|k| k.variant.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (key, e) in &self.entries {
            let ctx = format!("({}, {}, {})", key.task, key.core_type, key.variant);
            if e.bcet_cycles > e.wcet_cycles {
                return Err(ModelError::InvalidResults(format!(
                    "{ctx}: bcet {} exceeds wcet {}",
                    e.bcet_cycles, e.wcet_cycles
                )));
            }
            if !(e.energy_mj >= 0.0) {
                return Err(ModelError::InvalidResults(format!(
                    "{ctx}: negative energy {}",
                    e.energy_mj
                )));
            }
            for (name, v) in [("leakage_time", e.leakage_time), ("leakage_energy", e.leakage_energy)] {
                if let Some(v) = v {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(ModelError::InvalidResults(format!(
                            "{ctx}: {name} {v} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Check that every (task, core type) pair has at least one variant.
    pub fn complete_for(&self, tasks: &[&str], core_types: &[&str]) -> Result<(), ModelError> {
        for &task in tasks {
            for &ct in core_types {
                if self.variants_of(task, ct).is_empty() {
                    return Err(ModelError::InvalidResults(format!(
                        "no variant entry for task '{task}' on core type '{ct}'"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ResultsFile {
            units: self.units.clone(),
            records: self
                .entries
                .iter()
                .map(|(k, e)| Record {
                    task: k.task.clone(),
                    core_type: k.core_type.clone(),
                    variant: k.variant.clone(),
                    wcet_cycles: e.wcet_cycles,
                    bcet_cycles: e.bcet_cycles,
                    energy_mj: e.energy_mj,
                    leakage_time: e.leakage_time,
                    leakage_energy: e.leakage_energy,
                    provenance: e.provenance,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("results serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ResultsFile = serde_json::from_str(text)?;
        let mut out = AnalysisResults {
            units: file.units,
            entries: BTreeMap::new(),
        };
        for r in file.records {
            out.entries.insert(
                ResultKey::new(&r.task, &r.core_type, &r.variant),
                ResultEntry {
                    wcet_cycles: r.wcet_cycles,
                    bcet_cycles: r.bcet_cycles,
                    energy_mj: r.energy_mj,
                    leakage_time: r.leakage_time,
                    leakage_energy: r.leakage_energy,
                    provenance: r.provenance,
                },
            );
        }
        out.validate()?;
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Overlay `profiled` onto `statics`: profiled entries win on key clashes,
/// per-entry provenance is preserved, and units must agree.
pub fn merge_results(
    statics: &AnalysisResults,
    profiled: &AnalysisResults,
) -> Result<AnalysisResults, ModelError> {
    if statics.units != profiled.units {
        return Err(ModelError::ConflictingUnits {
            left: format!("{}/{}", statics.units.time, statics.units.energy),
            right: format!("{}/{}", profiled.units.time, profiled.units.energy),
        });
    }
    let mut merged = statics.clone();
    for (k, e) in &profiled.entries {
        merged.entries.insert(k.clone(), e.clone());
    }
    merged.validate()?;
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(wcet: u64, energy: f64, provenance: Provenance) -> ResultEntry {
        ResultEntry {
            wcet_cycles: wcet,
            bcet_cycles: wcet,
            energy_mj: energy,
            leakage_time: Some(0.0),
            leakage_energy: Some(0.0),
            provenance,
        }
    }

    #[test]
    fn merge_with_empty_profiled_is_identity() {
        let mut s = AnalysisResults::default();
        s.insert(ResultKey::new("a", "m0", "base"), entry(10, 1.0, Provenance::Static));
        let merged = merge_results(&s, &AnalysisResults::default()).unwrap();
        assert_eq!(merged, s);
    }

    #[test]
    fn profiled_wins_on_clash() {
        let mut s = AnalysisResults::default();
        s.insert(ResultKey::new("a", "m0", "base"), entry(10, 1.0, Provenance::Static));
        let mut p = AnalysisResults::default();
        p.insert(ResultKey::new("a", "m0", "base"), entry(12, 2.0, Provenance::Profiled));
        let merged = merge_results(&s, &p).unwrap();
        let e = merged.get("a", "m0", "base").unwrap();
        assert_eq!(e.wcet_cycles, 12);
        assert_eq!(e.provenance, Provenance::Profiled);
    }

    #[test]
    fn disjoint_keys_union() {
        let mut s = AnalysisResults::default();
        s.insert(ResultKey::new("a", "m0", "base"), entry(10, 1.0, Provenance::Static));
        let mut p = AnalysisResults::default();
        p.insert(ResultKey::new("b", "m0", "base"), entry(5, 0.5, Provenance::Profiled));
        let merged = merge_results(&s, &p).unwrap();
        assert_eq!(merged.entries.len(), 2);
    }

    #[test]
    fn merge_is_idempotent() {
        let mut s = AnalysisResults::default();
        s.insert(ResultKey::new("a", "m0", "base"), entry(10, 1.0, Provenance::Static));
        let mut p = AnalysisResults::default();
        p.insert(ResultKey::new("a", "m0", "base"), entry(12, 2.0, Provenance::Profiled));
        let once = merge_results(&s, &p).unwrap();
        let twice = merge_results(&once, &p).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn conflicting_units_are_rejected() {
        let s = AnalysisResults::default();
        let mut p = AnalysisResults::default();
        p.units.energy = "J".into();
        assert!(matches!(
            merge_results(&s, &p),
            Err(ModelError::ConflictingUnits { .. })
        ));
    }

    #[test]
    fn invalid_entries_are_rejected() {
        let mut s = AnalysisResults::default();
        s.insert(
            ResultKey::new("a", "m0", "base"),
            ResultEntry {
                wcet_cycles: 5,
                bcet_cycles: 10,
                energy_mj: 1.0,
                leakage_time: None,
                leakage_energy: None,
                provenance: Provenance::Static,
            },
        );
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_round_trip_preserves_entries() {
        let mut s = AnalysisResults::default();
        s.insert(ResultKey::new("a", "m0", "base"), entry(10, 1.0, Provenance::Static));
        s.insert(
            ResultKey::new("b", "m0", "base"),
            ResultEntry {
                leakage_time: None,
                leakage_energy: None,
                ..entry(7, 0.25, Provenance::Profiled)
            },
        );
        let text = s.to_json();
        let back = AnalysisResults::from_json(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn profiled_entries_pin_reference_frequency() {
        let platform = crate::model::platform::testutil::single_core_platform();
        let ct = &platform.core_types[0];
        let e = entry(16_000, 2.0, Provenance::Profiled);
        assert_eq!(e.admissible_freqs(ct), &[32.0]);
        assert_eq!(e.energy_at(ct, 32.0), 2.0);
        let s = entry(16_000, 2.0, Provenance::Static);
        assert_eq!(s.admissible_freqs(ct).len(), 3);
        // Static energy adds the power term: 1 ms at 16 MHz.
        let expected = 2.0 + ct.power_mw(16.0) * 1.0 * 1e-3;
        assert!((s.energy_at(ct, 16.0) - expected).abs() < 1e-15);
    }
}
