//! Bayes-optimal reference forecasters computed from the simulation model.

use crate::datagen::GenerativeSpec;
use crate::domain::{Forecaster, MaskedDataset, Pattern, PredictiveDistribution, Query, Target};
use crate::error::{Error, Result};
use crate::quadrature::{NormalRule, DEFAULT_NODES};

/// Patterns below this probability are not valid MC queries.
pub const MIN_PATTERN_PROB: f64 = 1e-12;
const Y: usize = 2;

fn check_query(pattern: &Pattern, x_obs: &[(usize, f64)]) -> Result<()> {
    if pattern.len() != 2 {
        return Err(Error::Contract(format!("pattern {pattern} is not over two predictors")));
    }
    let obs = pattern.observed();
    if obs.len() != x_obs.len() || obs.iter().zip(x_obs).any(|(&j, &(k, _))| j != k) {
        return Err(Error::Contract(format!("observed values do not match pattern {pattern}")));
    }
    Ok(())
}

/// Pr(Y | X_o = x_o) under the joint Gaussian.
pub fn conditional_gaussian(
    spec: &GenerativeSpec,
    pattern: &Pattern,
    x_obs: &[(usize, f64)],
) -> Result<PredictiveDistribution> {
    check_query(pattern, x_obs)?;
    let (m, v) = spec.joint().conditional_scalar(Y, x_obs)?;
    PredictiveDistribution::gaussian(m, v)
}

/// Probability of each predictor pattern under `spec`, in `Pattern::all(2)` order.
pub fn pattern_probs(spec: &GenerativeSpec, nodes: usize) -> Result<Vec<(Pattern, f64)>> {
    let p1 = match spec.miss_logit.alpha0 {
        None => 0.0,
        Some(a0) => {
            // the logit is linear in (X1, X2, Y), so one dimension suffices
            let j = spec.joint();
            let a = [spec.miss_logit.alpha_x1, spec.miss_logit.alpha_x2, spec.miss_logit.alpha_y];
            let mean: f64 = (0..3).map(|k| a[k] * j.mean[k]).sum();
            let var: f64 = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| a[r] * a[c] * j.cov_at(r, c)).sum();
            NormalRule::new(nodes)?.expect1(a0 + mean, var, crate::estimators::logistic)
        }
    };
    Ok(Pattern::all(2)
        .into_iter()
        .map(|p| {
            let prob = match (p.is_missing(0), p.is_missing(1)) {
                (false, false) => 1.0 - p1,
                (true, false) => p1,
                _ => 0.0,
            };
            (p, prob)
        })
        .collect())
}

/// Moments of Y given (X_o = x_o, M_X = pattern): the Gaussian law of the
/// missing block and Y given x_o, reweighted by the selection probability.
pub fn mc_predict_with(
    spec: &GenerativeSpec,
    rule: &NormalRule,
    pattern: &Pattern,
    x_obs: &[(usize, f64)],
) -> Result<PredictiveDistribution> {
    check_query(pattern, x_obs)?;
    if pattern.is_missing(1) {
        return Err(Error::UnsupportedPattern {
            pattern: pattern.to_string(),
            reason: "X2 is never missing under the simulation model".into(),
        });
    }
    let m1 = pattern.is_missing(0);
    if spec.miss_logit.alpha0.is_none() {
        if m1 {
            return Err(Error::UnsupportedPattern {
                pattern: pattern.to_string(),
                reason: "pattern has zero probability".into(),
            });
        }
        return conditional_gaussian(spec, pattern, x_obs);
    }
    let mut latent = pattern.missing();
    latent.push(Y);
    let (mean, cov) = spec.joint().conditional(&latent, x_obs)?;
    let mut full = [0.0; 3];
    for &(j, v) in x_obs {
        full[j] = v;
    }
    let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
    rule.for_each_point(&mean, &cov, |pt, w| {
        let mut v = full;
        for (k, &idx) in latent.iter().enumerate() {
            v[idx] = pt[k];
        }
        let p = spec.miss_prob(v[0], v[1], v[2]);
        let sel = if m1 { p } else { 1.0 - p };
        let ww = w * sel;
        z += ww;
        s1 += ww * v[Y];
        s2 += ww * v[Y] * v[Y];
    })?;
    if !(z > 1e-300) || !z.is_finite() {
        return Err(Error::Numeric(format!(
            "selection-weighted normalizer underflowed at pattern {pattern}; use more quadrature nodes"
        )));
    }
    let m = s1 / z;
    PredictiveDistribution::gaussian(m, (s2 / z - m * m).max(0.0))
}

pub fn mc_predict(spec: &GenerativeSpec, pattern: &Pattern, x_obs: &[(usize, f64)]) -> Result<PredictiveDistribution> {
    mc_predict_with(spec, &NormalRule::new(DEFAULT_NODES)?, pattern, x_obs)
}

/// Reference forecaster for one target.
#[derive(Clone, Debug)]
pub struct OracleForecaster {
    spec: GenerativeSpec,
    target: Target,
    rule: NormalRule,
    pattern_probs: Vec<(Pattern, f64)>,
}

impl OracleForecaster {
    pub fn new(spec: GenerativeSpec, target: Target) -> Result<Self> {
        Self::with_nodes(spec, target, DEFAULT_NODES)
    }

    pub fn with_nodes(spec: GenerativeSpec, target: Target, nodes: usize) -> Result<Self> {
        spec.validate()?;
        let pattern_probs = pattern_probs(&spec, nodes)?;
        Ok(OracleForecaster { spec, target, rule: NormalRule::new(nodes)?, pattern_probs })
    }

    pub fn pattern_prob(&self, pattern: &Pattern) -> f64 {
        self.pattern_probs.iter().find(|(p, _)| p == pattern).map_or(0.0, |&(_, v)| v)
    }

    pub fn spec(&self) -> &GenerativeSpec {
        &self.spec
    }
}

impl Forecaster for OracleForecaster {
    fn name(&self) -> String {
        format!("ORACLE_{}", self.target)
    }

    fn target(&self) -> Option<Target> {
        Some(self.target)
    }

    fn supports(&self, pattern: &Pattern) -> bool {
        pattern.len() == 2
            && match self.target {
                Target::MU => true,
                Target::MC => self.pattern_prob(pattern) >= MIN_PATTERN_PROB,
            }
    }

    fn predict(&self, query: &Query) -> Result<PredictiveDistribution> {
        match self.target {
            Target::MU => conditional_gaussian(&self.spec, &query.pattern, &query.observed),
            Target::MC => {
                if !self.supports(&query.pattern) {
                    return Err(Error::UnsupportedPattern {
                        pattern: query.pattern.to_string(),
                        reason: format!("probability {:e} under the model", self.pattern_prob(&query.pattern)),
                    });
                }
                mc_predict_with(&self.spec, &self.rule, &query.pattern, &query.observed)
            }
        }
    }
}

/// Oracle point predictions for every row of `test`.
pub fn oracle_predictions(oracle: &OracleForecaster, test: &MaskedDataset) -> Result<Vec<f64>> {
    crate::exec::map_range(test.n(), |i| oracle.predict(&test.query(i)).map(|d| d.point()))
        .into_iter()
        .collect()
}

/// Mean squared error of the oracle for `target` on `test`.
pub fn oracle_risk(spec: &GenerativeSpec, target: Target, test: &MaskedDataset) -> Result<f64> {
    let oracle = OracleForecaster::new(spec.clone(), target)?;
    let preds = oracle_predictions(&oracle, test)?;
    let mut sum = 0.0;
    for (i, p) in preds.iter().enumerate() {
        sum += (test.y_at(i)? - p).powi(2);
    }
    Ok(sum / test.n() as f64)
}
