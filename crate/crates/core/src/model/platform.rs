//! Platform description: core types, their cycle/energy tables, frequency
//! levels, and the static power model.

use super::ModelError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// One processor kind of the platform.
///
/// Cycle tables are frequency-independent (in-order core assumption); the
/// energy table holds per-instruction switching energy at the reference
/// frequency, which is the highest level. Static power is modelled as
/// `p_leak + k_dyn·f³` milliwatts at frequency `f` MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreType {
    pub name: String,
    /// Cycles per instruction, per instruction class (positive).
    pub cycle_table: BTreeMap<String, u64>,
    /// Switching energy per instruction in nanojoules (nonnegative).
    #[serde(rename = "energy_table_nj")]
    pub energy_table: BTreeMap<String, f64>,
    /// Admissible frequencies in MHz, strictly increasing.
    #[serde(rename = "freq_levels_mhz")]
    pub freq_levels: Vec<f64>,
    /// Leakage power in mW.
    pub p_leak_mw: f64,
    /// Dynamic power coefficient in mW/MHz³.
    pub k_dyn_mw_per_mhz3: f64,
    /// Classes that may be inserted as side-channel padding. Defaults to
    /// `["nop"]`; memory and control classes should not be listed.
    #[serde(default = "default_padding")]
    pub padding_classes: Vec<String>,
}

fn default_padding() -> Vec<String> {
    vec!["nop".to_string()]
}

impl CoreType {
    /// Highest admissible frequency; also the reference frequency of the
    /// energy table and of profiled measurements.
    pub fn f_max(&self) -> f64 {
        *self.freq_levels.last().expect("freq_levels nonempty")
    }

    pub fn f_min(&self) -> f64 {
        *self.freq_levels.first().expect("freq_levels nonempty")
    }

    /// Wall-clock milliseconds for `cycles` at `f_mhz`.
    pub fn time_ms(&self, cycles: u64, f_mhz: f64) -> f64 {
        cycles as f64 / (f_mhz * 1000.0)
    }

    /// Static + dynamic power in mW at `f_mhz`.
    pub fn power_mw(&self, f_mhz: f64) -> f64 {
        crate::energy::power_mw(self.p_leak_mw, self.k_dyn_mw_per_mhz3, f_mhz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Core {
    pub id: u32,
    #[serde(rename = "type")]
    pub core_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformModel {
    pub name: String,
    /// Instruction classes every core type must cover.
    pub instruction_classes: Vec<String>,
    /// Constant per-dispatch cost added to every schedule entry.
    #[serde(default)]
    pub dispatch_ms: f64,
    pub core_types: Vec<CoreType>,
    pub cores: Vec<Core>,
}

impl PlatformModel {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let platform: PlatformModel = serde_json::from_str(text)?;
        platform.validate()?;
        Ok(platform)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn core_type(&self, name: &str) -> Option<&CoreType> {
        self.core_types.iter().find(|ct| ct.name == name)
    }

    pub fn core(&self, id: u32) -> Option<&Core> {
        self.cores.iter().find(|c| c.id == id)
    }

    /// Core type names in declaration order, deduplicated.
    pub fn core_type_names(&self) -> Vec<&str> {
        self.core_types.iter().map(|ct| ct.name.as_str()).collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::InvalidPlatform(msg));
        if self.instruction_classes.is_empty() {
            return fail("instruction class list is empty".into());
        }
        let mut classes = BTreeSet::new();
        for class in &self.instruction_classes {
            if !classes.insert(class.as_str()) {
                return fail(format!("duplicate instruction class '{class}'"));
            }
        }
        if self.cores.is_empty() {
            return fail("platform declares no cores".into());
        }
        if self.core_types.is_empty() {
            return fail("platform declares no core types".into());
        }
        if self.dispatch_ms < 0.0 {
            return fail("dispatch_ms must be nonnegative".into());
        }
        let mut type_names = BTreeSet::new();
        for ct in &self.core_types {
            if !type_names.insert(ct.name.as_str()) {
                return fail(format!("duplicate core type '{}'", ct.name));
            }
            for class in &self.instruction_classes {
                match ct.cycle_table.get(class) {
                    None => {
                        return fail(format!(
                            "core type '{}' has no cycle entry for class '{class}'",
                            ct.name
                        ))
                    }
                    Some(0) => {
                        return fail(format!(
                            "core type '{}' has a zero cycle entry for class '{class}'",
                            ct.name
                        ))
                    }
                    Some(_) => {}
                }
                match ct.energy_table.get(class) {
                    None => {
                        return fail(format!(
                            "core type '{}' has no energy entry for class '{class}'",
                            ct.name
                        ))
                    }
                    Some(e) if *e < 0.0 => {
                        return fail(format!(
                            "core type '{}' has a negative energy entry for class '{class}'",
                            ct.name
                        ))
                    }
                    Some(_) => {}
                }
            }
            if ct.freq_levels.is_empty() {
                return fail(format!("core type '{}' has no frequency levels", ct.name));
            }
            if !ct
                .freq_levels
                .windows(2)
                .all(|w| w[0] < w[1])
                || ct.freq_levels[0] <= 0.0
            {
                return fail(format!(
                    "core type '{}' frequency levels must be positive and strictly increasing",
                    ct.name
                ));
            }
            if ct.p_leak_mw < 0.0 || ct.k_dyn_mw_per_mhz3 < 0.0 {
                return fail(format!(
                    "core type '{}' power parameters must be nonnegative",
                    ct.name
                ));
            }
            if ct.p_leak_mw == 0.0 && ct.k_dyn_mw_per_mhz3 == 0.0 {
                return fail(format!(
                    "core type '{}' must have a nonzero power model",
                    ct.name
                ));
            }
        }
        let mut ids = BTreeSet::new();
        for core in &self.cores {
            if !ids.insert(core.id) {
                return fail(format!("duplicate core id {}", core.id));
            }
            if !type_names.contains(core.core_type.as_str()) {
                return fail(format!(
                    "core {} references undeclared type '{}'",
                    core.id, core.core_type
                ));
            }
        }
        Ok(())
    }
}
