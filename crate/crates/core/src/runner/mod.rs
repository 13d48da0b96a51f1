//! Simulation sweeps, the missing-outcome exploration and the application
//! pipeline.

mod apply;
mod config;

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use apply::{format_report, run_apply, write_apply_csv, ApplyOptions, ApplyRow};
pub use config::{PropGrid, ProcedureEntry, SweepConfig, DEFAULT_MASTER_SEED, DESK_STEP, PAPER_STEP};

use crate::datagen::{calibrate_intercept, make_pair_calibrated, GenerativeSpec, Scenario};
use crate::domain::{Forecaster, MaskedDataset, Pattern, Target};
use crate::error::{Error, Result};
use crate::eval::{stratify, MetricRecord};
use crate::oracle::{oracle_predictions, OracleForecaster};
use crate::procedures::{self, ProcedureConfig, ProcedureKind};
use crate::{exec, seed};

/// One (scenario, grid point, replicate) unit of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub scenario: Scenario,
    pub grid_index: usize,
    pub target_prop: f64,
    pub replicate: usize,
}

impl Cell {
    pub fn seed(&self, master: u64) -> u64 {
        seed::derive(master, &[self.scenario.index(), self.grid_index as u64, self.replicate as u64])
    }

    /// Parse `S4:0.30:0` against the grid.
    pub fn parse(s: &str, grid: &PropGrid) -> Result<Cell> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("cell {s:?} is not SCENARIO:PROP:REPLICATE")));
        }
        let scenario: Scenario = parts[0].parse()?;
        let prop: f64 = parts[1].parse().map_err(|_| Error::Config(format!("bad proportion {:?}", parts[1])))?;
        let replicate: usize =
            parts[2].parse().map_err(|_| Error::Config(format!("bad replicate {:?}", parts[2])))?;
        let grid_index =
            grid.index_of(prop).ok_or_else(|| Error::Config(format!("proportion {prop} is not on the grid")))?;
        Ok(Cell { scenario, grid_index, target_prop: grid.points()[grid_index], replicate })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub cell: Cell,
    pub procedure: Option<String>,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub parallel: bool,
    pub config: SweepConfig,
    pub cells: usize,
    pub records: usize,
    pub failures: Vec<Failure>,
    pub wall_seconds: f64,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub records: Vec<MetricRecord>,
    pub failures: Vec<Failure>,
    pub cells: usize,
}

pub fn all_cells(cfg: &SweepConfig) -> Vec<Cell> {
    let points = cfg.prop_grid.points();
    let mut out = Vec::new();
    for &scenario in &cfg.scenarios {
        for (grid_index, &target_prop) in points.iter().enumerate() {
            for replicate in 0..cfg.replicates_per_point {
                out.push(Cell { scenario, grid_index, target_prop, replicate });
            }
        }
    }
    out
}

fn subgroup_records(
    cell: &Cell,
    procedure: &str,
    preds: &[(usize, f64)],
    test: &MaskedDataset,
    metric: &str,
) -> Result<Vec<MetricRecord>> {
    if preds.is_empty() {
        return Ok(Vec::new());
    }
    let mut scores = Vec::with_capacity(preds.len());
    let mut pats: Vec<Pattern> = Vec::with_capacity(preds.len());
    for &(i, p) in preds {
        scores.push((test.y_at(i)? - p).powi(2));
        pats.push(test.pattern(i));
    }
    Ok(stratify(&scores, &pats)?
        .into_iter()
        .map(|g| MetricRecord {
            scenario: cell.scenario.to_string(),
            procedure: procedure.to_string(),
            target_prop: cell.target_prop,
            replicate: cell.replicate,
            subgroup: g.subgroup.to_string(),
            metric: metric.to_string(),
            value: g.value,
            ci_low: None,
            ci_high: None,
            n_subgroup: g.n(),
        })
        .collect())
}

/// Predict every supported test row; unsupported rows are left out.
fn supported_predictions(f: &dyn Forecaster, test: &MaskedDataset) -> Result<(Vec<(usize, f64)>, usize)> {
    let res = exec::map_range(test.n(), |i| {
        let q = test.query(i);
        if !f.supports(&q.pattern) {
            return Ok(None);
        }
        f.predict(&q).map(|d| Some((i, d.point())))
    });
    let mut out = Vec::with_capacity(test.n());
    let mut skipped = 0;
    for r in res {
        match r? {
            Some(v) => out.push(v),
            None => skipped += 1,
        }
    }
    Ok((out, skipped))
}

/// Generate the cell's data, train every procedure, and score procedures
/// and both oracles on the test set.
pub fn run_cell(
    cell: &Cell,
    spec: &GenerativeSpec,
    procs: &[ProcedureConfig],
    cfg: &SweepConfig,
) -> (Vec<MetricRecord>, Vec<Failure>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let cell_seed = cell.seed(cfg.master_seed);
    let pair = match make_pair_calibrated(spec, cfg.n_train, cfg.n_test, cell_seed) {
        Ok(p) => p,
        Err(e) => {
            failures.push(Failure { cell: *cell, procedure: None, reason: e.to_string() });
            return (records, failures);
        }
    };
    for pc in procs {
        let name = pc.display_name();
        let pcfg = ProcedureConfig {
            seed: seed::derive(cell_seed, &[seed::label("procedure"), seed::label(&name)]),
            ..pc.clone()
        };
        let outcome = procedures::train(&pcfg, &pair.train).and_then(|f| {
            let (preds, skipped) = supported_predictions(&f, &pair.test)?;
            if skipped > 0 {
                log::debug!("{name} skipped {skipped} unsupported test rows in {cell:?}");
            }
            subgroup_records(cell, &name, &preds, &pair.test, "mse")
        });
        match outcome {
            Ok(r) => records.extend(r),
            Err(e) => failures.push(Failure { cell: *cell, procedure: Some(name), reason: e.to_string() }),
        }
    }
    for target in [Target::MU, Target::MC] {
        let name = format!("ORACLE_{target}");
        let outcome = OracleForecaster::new(spec.clone(), target).and_then(|o| {
            let preds = oracle_predictions(&o, &pair.test)?;
            let indexed: Vec<(usize, f64)> = preds.into_iter().enumerate().collect();
            subgroup_records(cell, &name, &indexed, &pair.test, "mse")
        });
        match outcome {
            Ok(r) => records.extend(r),
            Err(e) => failures.push(Failure { cell: *cell, procedure: Some(name), reason: e.to_string() }),
        }
    }
    (records, failures)
}

/// Calibrated generative model for every (scenario, grid point) in use.
fn calibrate_all(cells: &[Cell], y_miss_prob: f64) -> Result<Vec<((Scenario, usize), GenerativeSpec)>> {
    let mut keys: Vec<(Scenario, usize, f64)> = cells.iter().map(|c| (c.scenario, c.grid_index, c.target_prop)).collect();
    keys.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    keys.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    exec::map_slice(&keys, |&(s, g, prop)| {
        let base = GenerativeSpec { y_miss_prob, ..GenerativeSpec::new(s) };
        calibrate_intercept(&base, prop).map(|a0| ((s, g), base.with_intercept(a0)))
    })
    .into_iter()
    .collect()
}

fn run_cells(cells: &[Cell], procs: &[ProcedureConfig], cfg: &SweepConfig, y_miss_prob: f64) -> Result<SweepOutput> {
    let specs = calibrate_all(cells, y_miss_prob)?;
    let spec_for = |c: &Cell| {
        &specs.iter().find(|(k, _)| *k == (c.scenario, c.grid_index)).expect("calibrated above").1
    };
    let results = exec::map_slice(cells, |c| run_cell(c, spec_for(c), procs, cfg));
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in results {
        records.extend(r);
        failures.extend(f);
    }
    Ok(SweepOutput { records, failures, cells: cells.len() })
}

/// Run every cell of the sweep (or only `only`).
pub fn run_sweep(cfg: &SweepConfig, only: Option<Cell>) -> Result<SweepOutput> {
    cfg.validate()?;
    let cells = match only {
        Some(c) => vec![c],
        None => all_cells(cfg),
    };
    run_cells(&cells, &cfg.procedure_configs(), cfg, cfg.y_miss_prob)
}

/// MI and MLE-M on S5 with a partially missing training outcome, each fitted
/// on the rows with an observed outcome and on all rows.
pub fn explore_procedures() -> Vec<ProcedureConfig> {
    let mut out = Vec::new();
    for kind in [ProcedureKind::MI, ProcedureKind::MleM] {
        for restrict in [true, false] {
            let suffix = if restrict { "observed-y" } else { "all-rows" };
            out.push(ProcedureConfig {
                restrict_to_observed_y: restrict,
                label: Some(format!("{kind}:{suffix}")),
                ..ProcedureConfig::new(kind)
            });
        }
    }
    out
}

pub fn run_explore_missing_y(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let explore = SweepConfig { scenarios: vec![Scenario::S5], ..cfg.clone() };
    let cells = all_cells(&explore);
    run_cells(&cells, &explore_procedures(), &explore, cfg.explore_y_miss_prob)
}

/// Write `<stem>.csv` and `<stem>_manifest.json` into the output directory.
pub fn write_outputs(cfg: &SweepConfig, out: &SweepOutput, stem: &str, started: Instant) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let csv_path = cfg.output_dir.join(format!("{stem}.csv"));
    crate::eval::write_metrics(&out.records, std::fs::File::create(&csv_path)?)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        parallel: exec::is_parallel(),
        config: cfg.clone(),
        cells: out.cells,
        records: out.records.len(),
        failures: out.failures.clone(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let path = cfg.output_dir.join(format!("{stem}_manifest.json"));
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn metrics_path(cfg: &SweepConfig, stem: &str) -> std::path::PathBuf {
    Path::new(&cfg.output_dir).join(format!("{stem}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepConfig {
        SweepConfig {
            scenarios: vec![Scenario::S4],
            prop_grid: PropGrid { start: 0.3, stop: 0.3, step: 0.01 },
            n_train: 200,
            n_test: 100,
            procedures: vec![ProcedureEntry::Name(ProcedureKind::PS), ProcedureEntry::Name(ProcedureKind::CCA)],
            ..Default::default()
        }
    }

    #[test]
    fn cell_parse() {
        let g = PropGrid::default();
        let c = Cell::parse("S4:0.30:2", &g).unwrap();
        assert_eq!((c.scenario, c.grid_index, c.replicate), (Scenario::S4, 30, 2));
        assert!(Cell::parse("S4:0.305:0", &g).is_err());
        assert!(Cell::parse("S9:0.3:0", &g).is_err());
    }

    #[test]
    fn single_cell_matches_sweep() {
        let cfg = tiny();
        let full = run_sweep(&cfg, None).unwrap();
        let cell = Cell::parse("S4:0.3:0", &cfg.prop_grid).unwrap();
        let one = run_sweep(&cfg, Some(cell)).unwrap();
        assert_eq!(full.records, one.records);
        assert!(full.failures.is_empty(), "{:?}", full.failures);
        let procs: std::collections::BTreeSet<&str> = full.records.iter().map(|r| r.procedure.as_str()).collect();
        assert_eq!(procs.into_iter().collect::<Vec<_>>(), vec!["CCA", "ORACLE_MC", "ORACLE_MU", "PS"]);
    }
}
