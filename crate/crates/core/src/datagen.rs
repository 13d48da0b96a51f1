//! Simulation model: Gaussian predictors and outcome with logistic
//! missingness of the first predictor, in five causal configurations.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{MaskedDataset, MaskedMatrix};
use crate::error::{Error, Result};
use crate::estimators::{logistic, GaussianJoint};
use crate::mechanisms::{DiscreteJoint, Variable};
use crate::seed;

pub const DEFAULT_SLOPE: f64 = 1.5;
pub const CALIBRATION_DRAWS: usize = 1_000_000;
const CALIBRATION_BOUND: f64 = 30.0;
const CALIBRATION_MAX_ITER: usize = 200;

/// Which variables drive the missingness of X1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// nothing
    S1,
    /// the always-observed X2
    S2,
    /// X1 itself
    S3,
    /// X1 and Y
    S4,
    /// Y
    S5,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5];

    /// Which of (α_x1, α_x2, α_y) may be non-zero.
    pub fn active(self) -> [bool; 3] {
        match self {
            Scenario::S1 => [false, false, false],
            Scenario::S2 => [false, true, false],
            Scenario::S3 => [true, false, false],
            Scenario::S4 => [true, false, true],
            Scenario::S5 => [false, false, true],
        }
    }

    pub fn index(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches(['S', 's']);
        match t {
            "1" => Ok(Scenario::S1),
            "2" => Ok(Scenario::S2),
            "3" => Ok(Scenario::S3),
            "4" => Ok(Scenario::S4),
            "5" => Ok(Scenario::S5),
            _ => Err(Error::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

/// Logit of Pr(M1 = 1 | x1, x2, y). `alpha0 = None` disables missingness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissLogit {
    pub alpha0: Option<f64>,
    pub alpha_x1: f64,
    pub alpha_x2: f64,
    pub alpha_y: f64,
}

impl MissLogit {
    fn slopes_only(&self, x1: f64, x2: f64, y: f64) -> f64 {
        self.alpha_x1 * x1 + self.alpha_x2 * x2 + self.alpha_y * y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub mu_x: [f64; 2],
    pub sigma_x: [[f64; 2]; 2],
    /// intercept, slope on X1, slope on X2
    pub beta: [f64; 3],
    pub sigma2_y: f64,
    pub scenario: Scenario,
    pub miss_logit: MissLogit,
    pub y_miss_prob: f64,
}

impl GenerativeSpec {
    /// Default parameters for a scenario; missingness disabled until calibrated.
    pub fn new(scenario: Scenario) -> Self {
        let a = scenario.active();
        let slope = |on: bool| if on { DEFAULT_SLOPE } else { 0.0 };
        GenerativeSpec {
            mu_x: [0.0, 0.0],
            sigma_x: [[1.0, 0.5], [0.5, 1.0]],
            beta: [0.0, 1.0, 1.0],
            sigma2_y: 1.0,
            scenario,
            miss_logit: MissLogit { alpha0: None, alpha_x1: slope(a[0]), alpha_x2: slope(a[1]), alpha_y: slope(a[2]) },
            y_miss_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.sigma_x;
        if !(s[0][0] > 0.0 && s[0][0] * s[1][1] - s[0][1] * s[1][0] > 0.0) || s[0][1] != s[1][0] {
            return Err(Error::Input("predictor covariance must be symmetric positive definite".into()));
        }
        if !(self.sigma2_y > 0.0) {
            return Err(Error::Input("residual variance must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.y_miss_prob) {
            return Err(Error::Input(format!("y_miss_prob {} outside [0,1)", self.y_miss_prob)));
        }
        let ml = &self.miss_logit;
        let slopes = [ml.alpha_x1, ml.alpha_x2, ml.alpha_y];
        for (k, (&on, &v)) in self.scenario.active().iter().zip(&slopes).enumerate() {
            if !on && v != 0.0 {
                let name = ["alpha_x1", "alpha_x2", "alpha_y"][k];
                return Err(Error::Input(format!("{name} must be 0 in scenario {}", self.scenario)));
            }
        }
        if let Some(a0) = ml.alpha0 {
            if !a0.is_finite() {
                return Err(Error::Input("missingness intercept must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn var_y(&self) -> f64 {
        let b = [self.beta[1], self.beta[2]];
        let s = self.sigma_x;
        b[0] * b[0] * s[0][0] + 2.0 * b[0] * b[1] * s[0][1] + b[1] * b[1] * s[1][1] + self.sigma2_y
    }

    /// Gaussian law of (X1, X2, Y).
    pub fn joint(&self) -> GaussianJoint {
        let s = self.sigma_x;
        let b = [self.beta[1], self.beta[2]];
        let mean_y = self.beta[0] + b[0] * self.mu_x[0] + b[1] * self.mu_x[1];
        let cxy = [b[0] * s[0][0] + b[1] * s[0][1], b[0] * s[1][0] + b[1] * s[1][1]];
        let cov = DMatrix::from_row_slice(
            3,
            3,
            &[s[0][0], s[0][1], cxy[0], s[1][0], s[1][1], cxy[1], cxy[0], cxy[1], self.var_y()],
        );
        GaussianJoint::new(DVector::from_vec(vec![self.mu_x[0], self.mu_x[1], mean_y]), cov)
    }

    /// Pr(M1 = 1 | x1, x2, y).
    pub fn miss_prob(&self, x1: f64, x2: f64, y: f64) -> f64 {
        match self.miss_logit.alpha0 {
            None => 0.0,
            Some(a0) => logistic(a0 + self.miss_logit.slopes_only(x1, x2, y)),
        }
    }

    pub fn with_intercept(&self, alpha0: Option<f64>) -> Self {
        let mut s = self.clone();
        s.miss_logit.alpha0 = alpha0;
        s
    }
}

/// Draw complete (x1, x2, y) rows.
pub fn draw_complete(spec: &GenerativeSpec, n: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Input("n must be at least 1".into()));
    }
    let s = spec.sigma_x;
    let l11 = s[0][0].sqrt();
    let l21 = s[1][0] / l11;
    let l22 = (s[1][1] - l21 * l21).sqrt();
    let sd = spec.sigma2_y.sqrt();
    let mut rng = seed::rng(seed);
    let out = (0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let x1 = spec.mu_x[0] + l11 * z1;
            let x2 = spec.mu_x[1] + l21 * z1 + l22 * z2;
            let y = spec.beta[0] + spec.beta[1] * x1 + spec.beta[2] * x2 + sd * e;
            [x1, x2, y]
        })
        .collect();
    Ok(out)
}

/// Mask X1 by the logistic model and Y independently with `y_miss_prob`.
pub fn apply_missingness(rows: &[[f64; 3]], spec: &GenerativeSpec, seed: u64) -> Result<MaskedDataset> {
    spec.validate()?;
    let mut rng = seed::rng(seed);
    let n = rows.len();
    let mut values = Vec::with_capacity(2 * n);
    let mut missing = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    let mut y_missing = Vec::with_capacity(n);
    for r in rows {
        let u: f64 = rng.random();
        let uy: f64 = rng.random();
        values.extend_from_slice(&r[..2]);
        missing.push(u < spec.miss_prob(r[0], r[1], r[2]));
        missing.push(false);
        y.push(r[2]);
        y_missing.push(uy < spec.y_miss_prob);
    }
    let x = MaskedMatrix::new(n, 2, values, missing)?;
    MaskedDataset::new(x, y, y_missing, vec!["X1".into(), "X2".into()], "Y")
}

/// Seed of the calibration sample; data seeds come from the master seed
/// through `seed::derive` and do not collide with it in practice.
pub fn calibration_seed() -> u64 {
    seed::label("missingness-calibration")
}

/// Intercept giving an expected missingness proportion of `target_prop` for
/// X1; `None` for a zero target.
pub fn calibrate_intercept(spec: &GenerativeSpec, target_prop: f64) -> Result<Option<f64>> {
    if !(0.0..=0.7).contains(&target_prop) {
        return Err(Error::Input(format!("target proportion {target_prop} outside [0, 0.7]")));
    }
    spec.validate()?;
    if target_prop == 0.0 {
        return Ok(None);
    }
    let rows = draw_complete(spec, CALIBRATION_DRAWS, calibration_seed())?;
    let lin: Vec<f64> = rows.iter().map(|r| spec.miss_logit.slopes_only(r[0], r[1], r[2])).collect();
    let n = lin.len() as f64;
    let mean_prob = |a0: f64| crate::exec::chunked_sum(lin.len(), |i| logistic(a0 + lin[i])) / n;
    let (mut lo, mut hi) = (-CALIBRATION_BOUND, CALIBRATION_BOUND);
    if mean_prob(lo) > target_prop || mean_prob(hi) < target_prop {
        return Err(Error::Numeric(format!("target {target_prop} not bracketed on [-30, 30]")));
    }
    for _ in 0..CALIBRATION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let f = mean_prob(mid);
        if (f - target_prop).abs() <= 1e-7 || hi - lo < 1e-12 {
            return Ok(Some(mid));
        }
        if f < target_prop {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (mean_prob(mid) - target_prop).abs() <= 1e-4 {
        Ok(Some(mid))
    } else {
        Err(Error::Numeric(format!("calibration for {target_prop} did not converge")))
    }
}

/// Training set (with Y missingness) and test set (Y always observed), each
/// with its own X1 missingness.
#[derive(Clone, Debug)]
pub struct DataPair {
    pub train: MaskedDataset,
    pub test: MaskedDataset,
}

/// `spec` must already carry its calibrated intercept.
pub fn make_pair_calibrated(spec: &GenerativeSpec, n_train: usize, n_test: usize, seed: u64) -> Result<DataPair> {
    let train_rows = draw_complete(spec, n_train, seed::derive(seed, &[seed::label("train"), 0]))?;
    let train = apply_missingness(&train_rows, spec, seed::derive(seed, &[seed::label("train"), 1]))?;
    let test_spec = GenerativeSpec { y_miss_prob: 0.0, ..spec.clone() };
    let test_rows = draw_complete(spec, n_test, seed::derive(seed, &[seed::label("test"), 0]))?;
    let test = apply_missingness(&test_rows, &test_spec, seed::derive(seed, &[seed::label("test"), 1]))?;
    Ok(DataPair { train, test })
}

pub fn make_pair(
    spec: &GenerativeSpec,
    target_prop: f64,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<DataPair> {
    let a0 = calibrate_intercept(spec, target_prop)?;
    make_pair_calibrated(&spec.with_intercept(a0), n_train, n_test, seed)
}

/// Exact discrete counterpart of a scenario: X1, X2 and Y are replaced by the
/// signs of their centred values, M1 follows the same logistic model on the
/// ±1 codes and M_Y is an independent Bernoulli(`y_miss_prob`) draw.
pub fn discrete_analogue(spec: &GenerativeSpec, y_miss_prob: f64) -> Result<DiscreteJoint> {
    spec.validate()?;
    if !(0.0..1.0).contains(&y_miss_prob) {
        return Err(Error::Input(format!("y_miss_prob {y_miss_prob} outside [0,1)")));
    }
    let j = spec.joint();
    let corr = |a: usize, b: usize| j.cov_at(a, b) / (j.cov_at(a, a) * j.cov_at(b, b)).sqrt();
    let r = [corr(0, 1), corr(0, 2), corr(1, 2)];
    let orthant = |s: [f64; 3]| {
        let asum = (s[0] * s[1] * r[0]).asin() + (s[0] * s[2] * r[1]).asin() + (s[1] * s[2] * r[2]).asin();
        0.125 + asum / (4.0 * std::f64::consts::PI)
    };
    let ml = spec.miss_logit;
    let a0 = ml.alpha0.unwrap_or(0.0);
    let vars = vec![
        Variable::predictor("X1", 2),
        Variable::predictor("X2", 2),
        Variable::outcome("Y", 2),
        Variable::indicator("M1", 0),
        Variable::indicator("M2", 1),
        Variable::indicator("MY", 2),
    ];
    DiscreteJoint::from_fn(vars, |c| {
        if c[4] == 1 {
            return 0.0;
        }
        let s = [c[0], c[1], c[2]].map(|b| 2.0 * b as f64 - 1.0);
        let p1 = logistic(a0 + ml.slopes_only(s[0], s[1], s[2]));
        let pm1 = if c[3] == 1 { p1 } else { 1.0 - p1 };
        let pmy = if c[5] == 1 { y_miss_prob } else { 1.0 - y_miss_prob };
        orthant(s) * pm1 * pmy
    })
}

/// Missingness pattern counts over (AMS, Hypox, Coag) in the bundled trauma-like data.
pub const TRAUMA_PATTERNS: [([bool; 3], usize); 8] = [
    ([false, false, false], 424),
    ([false, true, false], 93),
    ([false, false, true], 78),
    ([true, false, false], 45),
    ([false, true, true], 15),
    ([true, true, false], 11),
    ([true, false, true], 10),
    ([true, true, true], 2),
];
pub const TRAUMA_N: usize = 678;
pub const TRAUMA_POSITIVES: usize = 147;

/// Synthetic stand-in for a trauma registry: continuous age (never missing),
/// three binary findings with informative missingness, binary outcome
/// `severe` with exactly 147 cases among 678 patients.
pub fn synthetic_trauma(seed: u64) -> Result<MaskedDataset> {
    let mut rng = seed::rng(seed);
    let mut patterns: Vec<[bool; 3]> =
        TRAUMA_PATTERNS.iter().flat_map(|&(p, c)| std::iter::repeat_n(p, c)).collect();
    patterns.shuffle(&mut rng);
    let age_dist = Normal::new(42.0, 19.0).expect("valid normal");
    let mut rows = Vec::with_capacity(TRAUMA_N);
    let mut keys = Vec::with_capacity(TRAUMA_N);
    for pat in &patterns {
        let raw: f64 = age_dist.sample(&mut rng);
        let age = raw.clamp(15.0, 95.0).round();
        let a = age - 42.0;
        let ams = rng.random_bool(logistic(-1.2 + 0.015 * a));
        let hypox = rng.random_bool(0.22);
        let coag = rng.random_bool(logistic(-1.6 + 0.02 * a));
        let n_miss = pat.iter().filter(|&&m| m).count() as f64;
        let eta = -2.3 + 0.025 * a + 1.3 * ams as u8 as f64 + 1.0 * hypox as u8 as f64
            + 1.1 * coag as u8 as f64
            + 0.6 * n_miss;
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        // weighted sampling without replacement: largest ln(u)/w wins
        keys.push(u.ln() / logistic(eta));
        rows.push((age, [ams, hypox, coag], *pat));
    }
    let mut order: Vec<usize> = (0..TRAUMA_N).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    let mut severe = vec![0.0; TRAUMA_N];
    for &i in &order[..TRAUMA_POSITIVES] {
        severe[i] = 1.0;
    }
    let mut values = Vec::with_capacity(4 * TRAUMA_N);
    let mut missing = Vec::with_capacity(4 * TRAUMA_N);
    for (age, finds, pat) in &rows {
        values.push(*age);
        missing.push(false);
        for k in 0..3 {
            values.push(finds[k] as u8 as f64);
            missing.push(pat[k]);
        }
    }
    let x = MaskedMatrix::new(TRAUMA_N, 4, values, missing)?;
    let names = ["age", "AMS", "Hypox", "Coag"].map(String::from).to_vec();
    MaskedDataset::new(x, severe, vec![false; TRAUMA_N], names, "severe")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::enumerate_patterns;
    use crate::mechanisms::{classify, DEFAULT_TOL};

    fn calibrated(s: Scenario, t: f64) -> GenerativeSpec {
        let spec = GenerativeSpec::new(s);
        spec.with_intercept(calibrate_intercept(&spec, t).unwrap())
    }

    #[test]
    fn zero_slopes_half_gives_zero_intercept() {
        let a0 = calibrate_intercept(&GenerativeSpec::new(Scenario::S1), 0.5).unwrap().unwrap();
        assert!(a0.abs() < 1e-6, "{a0}");
    }

    #[test]
    fn zero_target_disables() {
        let spec = calibrated(Scenario::S4, 0.0);
        let rows = draw_complete(&spec, 2000, 1).unwrap();
        let ds = apply_missingness(&rows, &spec, 2).unwrap();
        assert_eq!(ds.missing_fraction(0), 0.0);
    }

    #[test]
    fn s2_calibration_on_fresh_sample() {
        let spec = calibrated(Scenario::S2, 0.3);
        let rows = draw_complete(&spec, 1_000_000, 99).unwrap();
        let ds = apply_missingness(&rows, &spec, 100).unwrap();
        assert!((ds.missing_fraction(0) - 0.3).abs() < 0.005);
    }

    #[test]
    fn scenario_zero_pattern_enforced() {
        let mut spec = GenerativeSpec::new(Scenario::S2);
        spec.miss_logit.alpha_y = 1.0;
        assert!(matches!(spec.validate(), Err(Error::Input(_))));
        let mut bad = GenerativeSpec::new(Scenario::S1);
        bad.sigma_x = [[1.0, 2.0], [2.0, 1.0]];
        assert!(draw_complete(&bad, 10, 0).is_err());
    }

    #[test]
    fn draws_are_deterministic() {
        let spec = GenerativeSpec::new(Scenario::S5);
        assert_eq!(draw_complete(&spec, 50, 7).unwrap(), draw_complete(&spec, 50, 7).unwrap());
        assert_ne!(draw_complete(&spec, 50, 7).unwrap(), draw_complete(&spec, 50, 8).unwrap());
    }

    #[test]
    fn discrete_analogues_match_property_table() {
        let want = [
            (Scenario::S1, [true, true, true, true, true, true]),
            (Scenario::S2, [false, true, true, true, true, true]),
            (Scenario::S3, [false, false, false, false, false, true]),
            (Scenario::S4, [false, false, false, false, false, false]),
            (Scenario::S5, [false, false, false, true, false, false]),
        ];
        for (s, flags) in want {
            let spec = calibrated(s, 0.3);
            let r = classify(&discrete_analogue(&spec, 0.2).unwrap(), DEFAULT_TOL);
            let got: Vec<bool> = r.flags().iter().map(|(_, f)| f.holds()).collect();
            assert_eq!(got, flags, "{s}:\n{r}");
        }
    }

    #[test]
    fn orthant_masses_sum_to_one() {
        let spec = GenerativeSpec::new(Scenario::S1);
        let j = discrete_analogue(&spec, 0.0).unwrap();
        let p = j.prob(&[(0, 1), (1, 1), (2, 1)]);
        assert!(p > 0.125);
    }

    #[test]
    fn trauma_shape() {
        let ds = synthetic_trauma(1).unwrap();
        assert_eq!(ds.n(), TRAUMA_N);
        let pos = (0..ds.n()).filter(|&i| ds.y_at(i).unwrap() == 1.0).count();
        assert_eq!(pos, TRAUMA_POSITIVES);
        let pats = enumerate_patterns(&ds);
        assert_eq!(pats.len(), 8);
        assert_eq!(pats[0].1, 424);
        assert!(ds.outcome_is_binary());
    }
}
