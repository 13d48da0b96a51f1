use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{MaskedDataset, Pattern};
use crate::error::{Error, Result};
use crate::eval::{bootstrap_ci, brier_scores, loocv, stratify, DEFAULT_BOOTSTRAP, DEFAULT_LEVEL};
use crate::procedures::ProcedureConfig;
use crate::seed;

#[derive(Clone, Debug)]
pub struct ApplyOptions {
    pub procedures: Vec<ProcedureConfig>,
    pub bootstrap: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions {
            procedures: Vec::new(),
            bootstrap: DEFAULT_BOOTSTRAP,
            level: DEFAULT_LEVEL,
            seed: super::DEFAULT_MASTER_SEED,
        }
    }
}

/// Leave-one-out Brier score of one procedure on one subgroup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplyRow {
    pub procedure: String,
    pub subgroup: String,
    pub n: usize,
    pub brier: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fewer than 10 rows: the interval is indicative only.
    pub unreliable: bool,
    /// Rows of the subgroup whose fold used the intercept-only fallback.
    pub fallback_rows: usize,
}

pub fn run_apply(ds: &MaskedDataset, opts: &ApplyOptions) -> Result<Vec<ApplyRow>> {
    if !ds.outcome_is_binary() {
        return Err(Error::Input(format!("outcome {} must be coded 0/1", ds.outcome_name())));
    }
    if opts.procedures.is_empty() {
        return Err(Error::Config("no procedure selected".into()));
    }
    let scored: Vec<usize> = ds.outcome_observed_rows();
    let outcomes: Vec<f64> = scored.iter().map(|&i| ds.y_at(i)).collect::<Result<_>>()?;
    let patterns: Vec<Pattern> = scored.iter().map(|&i| ds.pattern(i)).collect();
    let mut rows = Vec::new();
    for pc in &opts.procedures {
        let name = pc.display_name();
        let cv = loocv(ds, pc, seed::derive(opts.seed, &[seed::label(&name)]))?;
        let probs: Vec<f64> = scored.iter().map(|&i| cv.predictions[i].clamp(0.0, 1.0)).collect();
        let scores = brier_scores(&probs, &outcomes)?;
        for g in stratify(&scores, &patterns)? {
            let sub: Vec<f64> = g.rows.iter().map(|&k| scores[k]).collect();
            let label = g.subgroup.to_string();
            let s = seed::derive(opts.seed, &[seed::label(&name), seed::label(&label)]);
            let (lo, hi) = bootstrap_ci(&sub, opts.bootstrap, opts.level, s)?;
            rows.push(ApplyRow {
                procedure: name.clone(),
                subgroup: label,
                n: g.n(),
                brier: g.value,
                ci_low: lo,
                ci_high: hi,
                unreliable: g.unreliable(),
                fallback_rows: g.rows.iter().filter(|&&k| cv.fallback[scored[k]].is_some()).count(),
            });
        }
    }
    Ok(rows)
}

pub fn write_apply_csv<W: std::io::Write>(rows: &[ApplyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table: one line per subgroup, one column per procedure.
pub fn format_report(rows: &[ApplyRow], column_names: &[String]) -> String {
    let mut procs: Vec<&str> = Vec::new();
    let mut groups: Vec<(&str, usize)> = Vec::new();
    for r in rows {
        if !procs.contains(&r.procedure.as_str()) {
            procs.push(&r.procedure);
        }
        if !groups.iter().any(|(g, _)| *g == r.subgroup) {
            groups.push((&r.subgroup, r.n));
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<24} {:>5}", "subgroup", "n");
    for p in &procs {
        let _ = write!(out, "  {p:>24}");
    }
    out.push('\n');
    for (g, n) in &groups {
        let shown = match g.strip_prefix("pattern:") {
            Some(bits) => {
                let missing: Vec<&str> = bits
                    .chars()
                    .zip(column_names)
                    .filter(|(c, _)| *c == '1')
                    .map(|(_, name)| name.as_str())
                    .collect();
                if missing.is_empty() {
                    "none missing".to_string()
                } else {
                    format!("missing {}", missing.join("+"))
                }
            }
            None => g.to_string(),
        };
        let _ = write!(out, "{shown:<24} {n:>5}");
        for p in &procs {
            match rows.iter().find(|r| r.procedure == *p && r.subgroup == *g) {
                Some(r) => {
                    let flag = if r.unreliable { "*" } else { " " };
                    let _ = write!(out, "  {:.3} [{:.3}, {:.3}]{flag}", r.brier, r.ci_low, r.ci_high);
                }
                None => {
                    let _ = write!(out, "  {:>24}", "-");
                }
            }
        }
        out.push('\n');
    }
    if rows.iter().any(|r| r.unreliable) {
        out.push_str("* fewer than 10 rows: interval is indicative only\n");
    }
    out
}
