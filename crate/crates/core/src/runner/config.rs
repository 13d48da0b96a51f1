use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::Scenario;
use crate::error::{Error, Result};
use crate::procedures::{ProcedureConfig, ProcedureKind};

pub const DEFAULT_MASTER_SEED: u64 = 20260318;
pub const DESK_STEP: f64 = 0.01;
pub const PAPER_STEP: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for PropGrid {
    fn default() -> Self {
        PropGrid { start: 0.0, stop: 0.7, step: DESK_STEP }
    }
}

impl PropGrid {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.start && self.start <= self.stop && self.stop <= 0.7) {
            return Err(Error::Config(format!(
                "grid needs 0 <= start <= stop <= 0.7 (got {} to {})",
                self.start, self.stop
            )));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config("grid step must be positive".into()));
        }
        Ok(())
    }

    /// Grid values, rounded to 1e-9 so that repeated additions do not drift.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| ((self.start + k as f64 * self.step) * 1e9).round() / 1e9).collect()
    }

    pub fn index_of(&self, prop: f64) -> Option<usize> {
        self.points().iter().position(|&p| (p - prop).abs() < 1e-9)
    }
}

/// A procedure given either by name or as a full table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProcedureEntry {
    Name(ProcedureKind),
    Full(ProcedureConfig),
}

impl ProcedureEntry {
    pub fn config(&self) -> ProcedureConfig {
        match self {
            ProcedureEntry::Name(k) => ProcedureConfig::new(*k),
            ProcedureEntry::Full(c) => c.clone(),
        }
    }
}

fn default_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}

fn default_procedures() -> Vec<ProcedureEntry> {
    ProcedureKind::ALL.iter().map(|&k| ProcedureEntry::Name(k)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scenarios: Vec<Scenario>,
    pub prop_grid: PropGrid,
    pub n_train: usize,
    pub n_test: usize,
    pub replicates_per_point: usize,
    pub procedures: Vec<ProcedureEntry>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Probability that a training outcome is missing in the main sweep.
    pub y_miss_prob: f64,
    /// Same, for the missing-outcome exploration.
    pub explore_y_miss_prob: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            scenarios: default_scenarios(),
            prop_grid: PropGrid::default(),
            n_train: 1000,
            n_test: 1000,
            replicates_per_point: 1,
            procedures: default_procedures(),
            master_seed: DEFAULT_MASTER_SEED,
            output_dir: PathBuf::from("out"),
            y_miss_prob: 0.0,
            explore_y_miss_prob: 0.3,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.prop_grid.validate()?;
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios configured".into()));
        }
        if self.replicates_per_point == 0 {
            return Err(Error::Config("replicates_per_point must be at least 1".into()));
        }
        if self.n_train < 10 || self.n_test < 1 {
            return Err(Error::Config("n_train must be at least 10 and n_test at least 1".into()));
        }
        for p in [self.y_miss_prob, self.explore_y_miss_prob] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("outcome missingness {p} outside [0,1)")));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for e in &self.procedures {
            let c = e.config();
            c.validate()?;
            if !names.insert(c.display_name()) {
                return Err(Error::Config(format!("procedure label {} used twice", c.display_name())));
            }
        }
        Ok(())
    }

    pub fn procedure_configs(&self) -> Vec<ProcedureConfig> {
        self.procedures.iter().map(ProcedureEntry::config).collect()
    }

    pub fn paper_scale(mut self) -> Self {
        self.prop_grid.step = PAPER_STEP;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(PropGrid::default().points().len(), 71);
        let paper = PropGrid { step: PAPER_STEP, ..Default::default() };
        let pts = paper.points();
        assert_eq!(pts.len(), 701);
        assert_eq!(pts[300], 0.3);
        assert_eq!(paper.index_of(0.3), Some(300));
    }

    #[test]
    fn toml_with_mixed_procedures() {
        let cfg = SweepConfig::from_toml(
            r#"
            scenarios = ["S1", "S4"]
            replicates_per_point = 2
            procedures = ["PS", { name = "MIMI", mimi_interactions = false, label = "MIMI-noint" }]
            [prop_grid]
            start = 0.1
            stop = 0.5
            step = 0.2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.prop_grid.points(), vec![0.1, 0.3, 0.5]);
        let procs = cfg.procedure_configs();
        assert_eq!(procs[1].display_name(), "MIMI-noint");
        assert!(!procs[1].mimi_interactions);
    }

    #[test]
    fn bad_grid_is_config_error() {
        let err = SweepConfig::from_toml("[prop_grid]\nstart = 0.5\nstop = 0.9\nstep = 0.1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(SweepConfig::from_toml("unknown_key = 1").is_err());
    }
}
