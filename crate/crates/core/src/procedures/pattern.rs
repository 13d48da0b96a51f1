//! Pattern sub-models: one regression per observation pattern, on the
//! pattern's own rows (PS), on every row observing at least the same
//! predictors (CCS), or only the complete pattern (CCA).

use serde::{Deserialize, Serialize};

use super::regression::{fit_rows, Regression};
use crate::domain::{enumerate_patterns, MaskedDataset, Pattern, PredictiveDistribution, Query};
use crate::error::{Error, Result};

const CCS_MAX_ENUMERATED: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRule {
    SamePattern,
    ObservedSuperset,
    CompleteOnly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubModel {
    pub pattern: Pattern,
    pub n_rows: usize,
    pub fit: Option<Regression>,
    /// Why the pattern is untrainable, when it is.
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatternModel {
    pub rule: RowRule,
    pub subs: Vec<SubModel>,
}

fn design_row(ds: &MaskedDataset, i: usize, observed: &[usize]) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(observed.len() + 1);
    row.push(1.0);
    for &j in observed {
        row.push(ds.x_at(i, j)?);
    }
    Ok(row)
}

fn fit_sub(ds: &MaskedDataset, pattern: &Pattern, rows: &[usize]) -> Result<SubModel> {
    let rows: Vec<usize> = rows.iter().copied().filter(|&i| ds.y_observed(i)).collect();
    let observed = pattern.observed();
    let q = observed.len() + 1;
    let mut sub = SubModel { pattern: pattern.clone(), n_rows: rows.len(), fit: None, reason: None };
    if rows.len() < q + 2 {
        sub.reason = Some(format!("{} usable rows, need at least {}", rows.len(), q + 2));
        return Ok(sub);
    }
    let x = rows.iter().map(|&i| design_row(ds, i, &observed)).collect::<Result<Vec<_>>>()?;
    let y = rows.iter().map(|&i| ds.y_at(i)).collect::<Result<Vec<_>>>()?;
    match fit_rows(&x, &y, ds.outcome_is_binary()) {
        Ok(f) => sub.fit = Some(f.summary()),
        Err(e) => {
            log::warn!("sub-model for pattern {pattern} untrainable: {e}");
            sub.reason = Some(e.to_string());
        }
    }
    Ok(sub)
}

fn finish(rule: RowRule, subs: Vec<Result<SubModel>>) -> Result<PatternModel> {
    let subs = subs.into_iter().collect::<Result<Vec<_>>>()?;
    if subs.iter().all(|s| s.fit.is_none()) {
        let why: Vec<String> =
            subs.iter().map(|s| format!("{}: {}", s.pattern, s.reason.as_deref().unwrap_or("?"))).collect();
        return Err(Error::Training(format!("no trainable pattern ({})", why.join("; "))));
    }
    Ok(PatternModel { rule, subs })
}

pub(crate) fn train_ps(ds: &MaskedDataset) -> Result<PatternModel> {
    let patterns: Vec<Pattern> = enumerate_patterns(ds).into_iter().map(|(p, _)| p).collect();
    let subs = crate::exec::map_slice(&patterns, |pat| {
        let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.x().row_mask(i) == pat.bits()).collect();
        fit_sub(ds, pat, &rows)
    });
    finish(RowRule::SamePattern, subs)
}

pub(crate) fn train_ccs(ds: &MaskedDataset) -> Result<PatternModel> {
    let patterns: Vec<Pattern> = if ds.p() <= CCS_MAX_ENUMERATED {
        Pattern::all(ds.p())
    } else {
        enumerate_patterns(ds).into_iter().map(|(p, _)| p).collect()
    };
    let subs = crate::exec::map_slice(&patterns, |pat| {
        let rows: Vec<usize> = (0..ds.n()).filter(|&i| pat.observed_subset_of(&ds.pattern(i))).collect();
        fit_sub(ds, pat, &rows)
    });
    finish(RowRule::ObservedSuperset, subs)
}

pub(crate) fn train_cca(ds: &MaskedDataset) -> Result<PatternModel> {
    let pat = Pattern::complete(ds.p());
    let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.pattern(i).is_complete()).collect();
    finish(RowRule::CompleteOnly, vec![fit_sub(ds, &pat, &rows)])
}

impl PatternModel {
    fn sub(&self, pattern: &Pattern) -> Option<&SubModel> {
        self.subs.iter().find(|s| &s.pattern == pattern)
    }

    pub fn supports(&self, pattern: &Pattern) -> bool {
        self.sub(pattern).is_some_and(|s| s.fit.is_some())
    }

    pub fn predict(&self, query: &Query) -> Result<PredictiveDistribution> {
        let unsupported = |reason: String| Error::UnsupportedPattern { pattern: query.pattern.to_string(), reason };
        let sub = self.sub(&query.pattern).ok_or_else(|| {
            unsupported(match self.rule {
                RowRule::CompleteOnly => "only complete queries are supported".into(),
                _ => "pattern absent from training data".into(),
            })
        })?;
        let fit = sub
            .fit
            .as_ref()
            .ok_or_else(|| unsupported(sub.reason.clone().unwrap_or_else(|| "untrainable".into())))?;
        let mut row = vec![1.0];
        for j in query.pattern.observed() {
            row.push(query.value(j).ok_or_else(|| Error::Contract(format!("query lacks observed column {j}")))?);
        }
        fit.predict(&row)
    }
}
