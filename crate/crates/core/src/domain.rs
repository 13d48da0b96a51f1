//! Shared domain types: observation patterns, masked datasets, predictive
//! distributions and the forecaster contract.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sentinel stored in masked cells. The mask is authoritative; the sentinel
/// only makes an accidental raw read visible.
pub const MISSING_SENTINEL: f64 = f64::NAN;

/// Observation pattern over the predictors: `true` marks a missing predictor.
///
/// Rendered as a bit string in column order, e.g. `"10"` for "first predictor
/// missing, second observed".
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern(Vec<bool>);

impl Pattern {
    pub fn new(missing: Vec<bool>) -> Self {
        Pattern(missing)
    }

    pub fn complete(p: usize) -> Self {
        Pattern(vec![false; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_missing(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(|&m| !m)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn observed(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| !self.0[j]).collect()
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| self.0[j]).collect()
    }

    pub fn n_missing(&self) -> usize {
        self.0.iter().filter(|&&m| m).count()
    }

    /// True when every predictor observed under `self` is also observed under `other`.
    pub fn observed_subset_of(&self, other: &Pattern) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| a || !b)
    }

    /// Every pattern of length `p`, in lexicographic order.
    pub fn all(p: usize) -> Vec<Pattern> {
        assert!(p < 24, "pattern enumeration limited to p < 24");
        (0..(1usize << p))
            .map(|code| Pattern((0..p).map(|j| (code >> (p - 1 - j)) & 1 == 1).collect()))
            .collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &m in &self.0 {
            f.write_str(if m { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({self})")
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Input(format!("invalid pattern string {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(Error::Input("empty pattern string".into()));
        }
        Ok(Pattern(bits))
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Row-major real matrix with an observation mask. Masked cells can only be
/// read through [`MaskedMatrix::get`], which faults on them.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl MaskedMatrix {
    pub fn new(n: usize, d: usize, mut values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if values.len() != n * d || missing.len() != n * d {
            return Err(Error::Input(format!(
                "matrix buffers have length {}/{} but shape is {n}x{d}",
                values.len(),
                missing.len()
            )));
        }
        for (v, &m) in values.iter_mut().zip(&missing) {
            if m {
                *v = MISSING_SENTINEL;
            } else if !v.is_finite() {
                return Err(Error::Input("observed cell holds a non-finite value".into()));
            }
        }
        Ok(MaskedMatrix { n, d, values, missing })
    }

    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * d);
        let mut missing = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::Input("ragged rows".into()));
            }
            for c in r {
                values.push(c.unwrap_or(MISSING_SENTINEL));
                missing.push(c.is_none());
            }
        }
        MaskedMatrix::new(n, d, values, missing)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.d + j]
    }

    /// Read an observed cell; masked cells fault.
    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        if self.is_missing(i, j) {
            Err(Error::MaskedRead { row: i, col: j })
        } else {
            Ok(self.values[i * self.d + j])
        }
    }

    pub fn opt(&self, i: usize, j: usize) -> Option<f64> {
        self.get(i, j).ok()
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        &self.missing[i * self.d..(i + 1) * self.d]
    }

    pub fn row_pattern(&self, i: usize) -> Pattern {
        Pattern(self.row_mask(i).to_vec())
    }

    pub fn col_observed_count(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| !self.is_missing(i, j)).count()
    }

    pub fn select_rows(&self, rows: &[usize]) -> MaskedMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        let mut missing = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            values.extend_from_slice(&self.values[i * self.d..(i + 1) * self.d]);
            missing.extend_from_slice(self.row_mask(i));
        }
        MaskedMatrix { n: rows.len(), d: self.d, values, missing }
    }
}

/// Predictors with an observation mask plus an outcome with its own mask.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedDataset {
    x: MaskedMatrix,
    y: Vec<f64>,
    y_missing: Vec<bool>,
    column_names: Vec<String>,
    outcome_name: String,
}

impl MaskedDataset {
    pub fn new(
        x: MaskedMatrix,
        mut y: Vec<f64>,
        y_missing: Vec<bool>,
        column_names: Vec<String>,
        outcome_name: impl Into<String>,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || x.ncols() == 0 {
            return Err(Error::Input("dataset needs n >= 1 rows and p >= 1 predictors".into()));
        }
        if y.len() != n || y_missing.len() != n {
            return Err(Error::Input("outcome length differs from predictor rows".into()));
        }
        if column_names.len() != x.ncols() {
            return Err(Error::Input("column name count differs from predictor count".into()));
        }
        for (v, &m) in y.iter_mut().zip(&y_missing) {
            if m {
                *v = MISSING_SENTINEL;
            } else if !v.is_finite() {
                return Err(Error::Input("observed outcome is non-finite".into()));
            }
        }
        Ok(MaskedDataset { x, y, y_missing, column_names, outcome_name: outcome_name.into() })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &MaskedMatrix {
        &self.x
    }

    pub fn x_at(&self, i: usize, j: usize) -> Result<f64> {
        self.x.get(i, j)
    }

    pub fn y_at(&self, i: usize) -> Result<f64> {
        if self.y_missing[i] {
            Err(Error::MaskedRead { row: i, col: self.p() })
        } else {
            Ok(self.y[i])
        }
    }

    pub fn y_observed(&self, i: usize) -> bool {
        !self.y_missing[i]
    }

    pub fn pattern(&self, i: usize) -> Pattern {
        self.x.row_pattern(i)
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    /// Evidence available for row `i` at deployment.
    pub fn query(&self, i: usize) -> Query {
        let pattern = self.pattern(i);
        let observed = pattern
            .observed()
            .into_iter()
            .map(|j| (j, self.x.values[i * self.p() + j]))
            .collect();
        Query { pattern, observed }
    }

    pub fn select_rows(&self, rows: &[usize]) -> MaskedDataset {
        MaskedDataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            y_missing: rows.iter().map(|&i| self.y_missing[i]).collect(),
            column_names: self.column_names.clone(),
            outcome_name: self.outcome_name.clone(),
        }
    }

    /// Rows whose outcome is observed.
    pub fn outcome_observed_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.y_observed(i)).collect()
    }

    /// Predictor matrix with the outcome appended as the last column.
    pub fn joint_matrix(&self) -> MaskedMatrix {
        let (n, p) = (self.n(), self.p());
        let mut values = Vec::with_capacity(n * (p + 1));
        let mut missing = Vec::with_capacity(n * (p + 1));
        for i in 0..n {
            values.extend_from_slice(&self.x.values[i * p..(i + 1) * p]);
            missing.extend_from_slice(self.x.row_mask(i));
            values.push(self.y[i]);
            missing.push(self.y_missing[i]);
        }
        MaskedMatrix { n, d: p + 1, values, missing }
    }

    /// Whether every observed outcome is 0 or 1.
    pub fn outcome_is_binary(&self) -> bool {
        (0..self.n()).filter_map(|i| self.y_at(i).ok()).all(|v| v == 0.0 || v == 1.0)
    }

    /// Fraction of rows with the first predictor missing, used in reports.
    pub fn missing_fraction(&self, j: usize) -> f64 {
        (0..self.n()).filter(|&i| self.x.is_missing(i, j)).count() as f64 / self.n() as f64
    }
}

/// Evidence for one prediction: the pattern and the values of the observed
/// predictors, keyed by column index.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub pattern: Pattern,
    pub observed: Vec<(usize, f64)>,
}

impl Query {
    pub fn value(&self, j: usize) -> Option<f64> {
        self.observed.iter().find(|(k, _)| *k == j).map(|&(_, v)| v)
    }

    pub fn missing(&self) -> Vec<usize> {
        self.pattern.missing()
    }

    /// Complete query from a fully observed row.
    pub fn complete(values: &[f64]) -> Query {
        Query {
            pattern: Pattern::complete(values.len()),
            observed: values.iter().copied().enumerate().collect(),
        }
    }
}

/// Split a row into observed (index, value) pairs and missing indices.
/// `row_missing` must agree with `pattern`.
pub fn partition(
    pattern: &Pattern,
    row: &[f64],
    row_missing: &[bool],
) -> Result<(Vec<(usize, f64)>, Vec<usize>)> {
    if row.len() != pattern.len() || row_missing.len() != pattern.len() {
        return Err(Error::Contract(format!(
            "row of length {} does not match pattern of length {}",
            row.len(),
            pattern.len()
        )));
    }
    if row_missing != pattern.bits() {
        return Err(Error::Contract(format!(
            "row mask {} disagrees with pattern {pattern}",
            Pattern(row_missing.to_vec())
        )));
    }
    let observed = pattern.observed().into_iter().map(|j| (j, row[j])).collect();
    Ok((observed, pattern.missing()))
}

/// Distinct patterns with their counts, most frequent first, ties broken
/// lexicographically.
pub fn enumerate_patterns(ds: &MaskedDataset) -> Vec<(Pattern, usize)> {
    let mut counts: HashMap<Pattern, usize> = HashMap::new();
    for i in 0..ds.n() {
        *counts.entry(ds.pattern(i)).or_default() += 1;
    }
    let mut out: Vec<_> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictiveDistribution {
    Gaussian { mean: f64, variance: f64 },
    Bernoulli { prob: f64 },
}

impl PredictiveDistribution {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance >= 0.0) {
            return Err(Error::Numeric(format!("invalid gaussian ({mean}, {variance})")));
        }
        Ok(PredictiveDistribution::Gaussian { mean, variance })
    }

    pub fn bernoulli(prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::Numeric(format!("bernoulli probability {prob} outside [0,1]")));
        }
        Ok(PredictiveDistribution::Bernoulli { prob })
    }

    /// Point prediction: the mean for a Gaussian, the probability for a Bernoulli.
    pub fn point(&self) -> f64 {
        match *self {
            PredictiveDistribution::Gaussian { mean, .. } => mean,
            PredictiveDistribution::Bernoulli { prob } => prob,
        }
    }
}

/// Which conditional law a forecaster estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    /// Pr(Y | X_o): the observation pattern is not part of the evidence.
    MU,
    /// Pr(Y | X_o, M_X): the pattern is part of the evidence.
    MC,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::MU => "MU",
            Target::MC => "MC",
        })
    }
}

/// A pattern-aware map from observed evidence to a predictive distribution.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> String;

    /// `None` when the procedure is not consistent for either target in general.
    fn target(&self) -> Option<Target>;

    fn supports(&self, pattern: &Pattern) -> bool;

    /// Predict for `query`; an unsupported pattern is an error, never a fallback.
    fn predict(&self, query: &Query) -> Result<PredictiveDistribution>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds_from(masks: &[[bool; 2]]) -> MaskedDataset {
        let rows: Vec<Vec<Option<f64>>> = masks
            .iter()
            .map(|m| m.iter().map(|&miss| if miss { None } else { Some(1.0) }).collect())
            .collect();
        let n = rows.len();
        MaskedDataset::new(
            MaskedMatrix::from_rows(&rows).unwrap(),
            vec![0.0; n],
            vec![false; n],
            vec!["x1".into(), "x2".into()],
            "y",
        )
        .unwrap()
    }

    #[test]
    fn partition_complete_case() {
        let pat = Pattern::complete(2);
        let (obs, miss) = partition(&pat, &[1.2, -0.3], &[false, false]).unwrap();
        assert_eq!(obs, vec![(0, 1.2), (1, -0.3)]);
        assert!(miss.is_empty());
    }

    #[test]
    fn partition_empty_evidence() {
        let pat: Pattern = "11".parse().unwrap();
        let (obs, miss) = partition(&pat, &[f64::NAN, f64::NAN], &[true, true]).unwrap();
        assert!(obs.is_empty());
        assert_eq!(miss, vec![0, 1]);
    }

    #[test]
    fn partition_first_missing() {
        let pat: Pattern = "10".parse().unwrap();
        let (obs, miss) = partition(&pat, &[f64::NAN, 0.7], &[true, false]).unwrap();
        assert_eq!(obs, vec![(1, 0.7)]);
        assert_eq!(miss, vec![0]);
    }

    #[test]
    fn partition_mask_mismatch_is_contract_error() {
        let pat: Pattern = "10".parse().unwrap();
        let err = partition(&pat, &[1.0, 0.7], &[false, false]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn enumerate_all_complete() {
        let ds = ds_from(&[[false, false]; 5]);
        assert_eq!(enumerate_patterns(&ds), vec![(Pattern::complete(2), 5)]);
    }

    #[test]
    fn enumerate_sorted_by_count() {
        let ds = ds_from(&[[false, false], [false, true], [false, true]]);
        let pats = enumerate_patterns(&ds);
        assert_eq!(pats, vec![("01".parse().unwrap(), 2), ("00".parse().unwrap(), 1)]);
    }

    #[test]
    fn enumerate_ties_are_lexicographic() {
        let ds = ds_from(&[[true, false], [false, true]]);
        let pats = enumerate_patterns(&ds);
        assert_eq!(pats[0].0.to_string(), "01");
        assert_eq!(pats[1].0.to_string(), "10");
    }

    #[test]
    fn pattern_roundtrip_and_subset() {
        let a: Pattern = "010".parse().unwrap();
        let b: Pattern = "000".parse().unwrap();
        assert_eq!(a.to_string(), "010");
        assert!(a.observed_subset_of(&b));
        assert!(!b.observed_subset_of(&a));
        assert_eq!(Pattern::all(2).len(), 4);
        assert!("0x".parse::<Pattern>().is_err());
    }

    #[test]
    fn distributions_validate() {
        assert!(PredictiveDistribution::gaussian(0.0, -1.0).is_err());
        assert!(PredictiveDistribution::bernoulli(1.1).is_err());
        assert_eq!(PredictiveDistribution::bernoulli(0.3).unwrap().point(), 0.3);
    }

    #[test]
    fn dataset_rejects_bad_shapes() {
        let x = MaskedMatrix::new(2, 1, vec![1.0, 2.0], vec![false, false]).unwrap();
        assert!(MaskedDataset::new(x.clone(), vec![1.0], vec![false], vec!["a".into()], "y").is_err());
        assert!(MaskedDataset::new(x, vec![1.0, 2.0], vec![false; 2], vec![], "y").is_err());
    }

    proptest! {
        #[test]
        fn masked_reads_always_fault(mask in proptest::collection::vec(any::<bool>(), 12)) {
            let m = MaskedMatrix::new(4, 3, (0..12).map(|v| v as f64).collect(), mask.clone()).unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    let r = m.get(i, j);
                    if mask[i * 3 + j] {
                        let faulted = matches!(r, Err(Error::MaskedRead { row, col }) if row == i && col == j);
                        prop_assert!(faulted);
                    } else {
                        prop_assert_eq!(r.unwrap(), (i * 3 + j) as f64);
                    }
                }
            }
        }

        #[test]
        fn pattern_counts_sum_to_n(masks in proptest::collection::vec(any::<[bool; 2]>(), 1..60)) {
            let ds = ds_from(&masks);
            let total: usize = enumerate_patterns(&ds).iter().map(|(_, c)| c).sum();
            prop_assert_eq!(total, masks.len());
        }
    }
}
