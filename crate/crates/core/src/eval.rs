//! Scoring, pattern-stratified summaries, leave-one-out cross-validation and
//! percentile bootstrap intervals.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{MaskedDataset, Pattern};
use crate::error::{Error, Result};
use crate::procedures::{self, ProcedureConfig};
use crate::{exec, seed, Forecaster};

/// Subgroups smaller than this get intervals flagged as unreliable.
pub const RELIABLE_MIN_N: usize = 10;
pub const DEFAULT_BOOTSTRAP: usize = 10_000;
pub const DEFAULT_LEVEL: f64 = 0.95;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Input(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::Input("cannot score an empty set".into()));
    }
    Ok(())
}

pub fn squared_errors(preds: &[f64], truths: &[f64]) -> Result<Vec<f64>> {
    check_lengths(preds.len(), truths.len())?;
    Ok(preds.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).collect())
}

pub fn mse(preds: &[f64], truths: &[f64]) -> Result<f64> {
    let e = squared_errors(preds, truths)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

pub fn brier_scores(probs: &[f64], outcomes: &[f64]) -> Result<Vec<f64>> {
    check_lengths(probs.len(), outcomes.len())?;
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Input(format!("probability {p} outside [0,1]")));
    }
    if let Some(y) = outcomes.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Input(format!("outcome {y} is not binary")));
    }
    Ok(probs.iter().zip(outcomes).map(|(p, y)| (p - y).powi(2)).collect())
}

pub fn brier(probs: &[f64], outcomes: &[f64]) -> Result<f64> {
    let s = brier_scores(probs, outcomes)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subgroup {
    Overall,
    Complete,
    Incomplete,
    Pattern(Pattern),
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subgroup::Overall => f.write_str("overall"),
            Subgroup::Complete => f.write_str("complete"),
            Subgroup::Incomplete => f.write_str("incomplete"),
            Subgroup::Pattern(p) => write!(f, "pattern:{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgroupScore {
    pub subgroup: Subgroup,
    /// Row indices into the scored set.
    pub rows: Vec<usize>,
    pub value: f64,
}

impl SubgroupScore {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn unreliable(&self) -> bool {
        self.n() < RELIABLE_MIN_N
    }
}

/// Mean score overall, on complete rows, on incomplete rows and per pattern
/// (most frequent first). Empty subgroups are omitted.
pub fn stratify(scores: &[f64], patterns: &[Pattern]) -> Result<Vec<SubgroupScore>> {
    check_lengths(scores.len(), patterns.len())?;
    let mean = |rows: &[usize]| rows.iter().map(|&i| scores[i]).sum::<f64>() / rows.len() as f64;
    let all: Vec<usize> = (0..scores.len()).collect();
    let complete: Vec<usize> = all.iter().copied().filter(|&i| patterns[i].is_complete()).collect();
    let incomplete: Vec<usize> = all.iter().copied().filter(|&i| !patterns[i].is_complete()).collect();
    let mut out = vec![SubgroupScore { subgroup: Subgroup::Overall, value: mean(&all), rows: all }];
    for (sg, rows) in [(Subgroup::Complete, complete), (Subgroup::Incomplete, incomplete)] {
        if rows.is_empty() {
            log::debug!("subgroup {sg} is empty");
        } else {
            out.push(SubgroupScore { subgroup: sg, value: mean(&rows), rows });
        }
    }
    let mut by_pattern: Vec<(Pattern, Vec<usize>)> = Vec::new();
    for (i, p) in patterns.iter().enumerate() {
        match by_pattern.iter_mut().find(|(q, _)| q == p) {
            Some((_, rows)) => rows.push(i),
            None => by_pattern.push((p.clone(), vec![i])),
        }
    }
    by_pattern.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    for (p, rows) in by_pattern {
        out.push(SubgroupScore { subgroup: Subgroup::Pattern(p), value: mean(&rows), rows });
    }
    Ok(out)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval for the mean of `scores` over `b` resamples of rows.
pub fn bootstrap_ci(scores: &[f64], b: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if b < 100 {
        return Err(Error::Input(format!("bootstrap needs at least 100 replicates, got {b}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("level {level} outside (0,1)")));
    }
    if scores.is_empty() {
        return Err(Error::Input("cannot bootstrap an empty set".into()));
    }
    let n = scores.len();
    let mut means = exec::map_range(b, |r| {
        let mut rng = seed::derived_rng(seed, &[r as u64]);
        (0..n).map(|_| scores[rng.random_range(0..n)]).sum::<f64>() / n as f64
    });
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&means, alpha), quantile(&means, 1.0 - alpha)))
}

/// Outcome of leave-one-out cross-validation.
#[derive(Clone, Debug)]
pub struct LoocvResult {
    /// Point prediction for every row.
    pub predictions: Vec<f64>,
    /// Reason, for rows whose fold fell back to the intercept-only model.
    pub fallback: Vec<Option<String>>,
}

impl LoocvResult {
    pub fn fallback_count(&self) -> usize {
        self.fallback.iter().filter(|f| f.is_some()).count()
    }
}

/// Train on every row but `i` and predict row `i` with its own pattern.
/// Folds whose procedure cannot be trained or cannot predict the held-out
/// pattern use the mean outcome of the fold instead.
pub fn loocv(ds: &MaskedDataset, cfg: &ProcedureConfig, master_seed: u64) -> Result<LoocvResult> {
    let n = ds.n();
    if n < 2 {
        return Err(Error::Input("leave-one-out needs at least 2 rows".into()));
    }
    let folds = exec::map_range(n, |i| -> (f64, Option<String>) {
        let rest: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let train = ds.select_rows(&rest);
        let fold_cfg = ProcedureConfig { seed: seed::derive(master_seed, &[seed::label("fold"), i as u64]), ..cfg.clone() };
        let attempt = procedures::train(&fold_cfg, &train).and_then(|f| f.predict(&ds.query(i)));
        match attempt {
            Ok(d) => (d.point(), None),
            Err(e) => {
                let ys: Vec<f64> = train.outcome_observed_rows().iter().filter_map(|&k| train.y_at(k).ok()).collect();
                let m = if ys.is_empty() { f64::NAN } else { ys.iter().sum::<f64>() / ys.len() as f64 };
                log::warn!("fold {i}: {e}; using the intercept-only model");
                (m, Some(e.to_string()))
            }
        }
    });
    let (predictions, fallback): (Vec<f64>, Vec<Option<String>>) = folds.into_iter().unzip();
    if fallback.iter().all(|f| f.is_some()) {
        return Err(Error::Training(format!("{} is untrainable on every fold", cfg.display_name())));
    }
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::Training("a fold has no observed outcome".into()));
    }
    Ok(LoocvResult { predictions, fallback })
}

/// One row of the metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scenario: String,
    pub procedure: String,
    pub target_prop: f64,
    pub replicate: usize,
    pub subgroup: String,
    pub metric: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_subgroup: usize,
}

pub fn write_metrics<W: std::io::Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "scenario", "procedure", "target_prop", "replicate", "subgroup", "metric", "value", "ci_low", "ci_high",
            "n_subgroup",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: std::io::Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}
