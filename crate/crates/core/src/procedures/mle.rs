//! Maximum likelihood for a joint Gaussian of predictors and outcome, with
//! prediction by marginalising the missing predictors.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ProcedureConfig;
use crate::domain::{enumerate_patterns, MaskedDataset, MaskedMatrix, Pattern, PredictiveDistribution, Query};
use crate::error::{Error, Result};
use crate::estimators::{em_mvn, EmOptions, GaussianJoint};
use crate::seed;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stratum {
    pub pattern: Pattern,
    pub n_rows: usize,
    /// Law of (observed predictors, outcome) within the stratum.
    pub joint: Option<GaussianJoint>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MleModel {
    /// One law for (X, Y); the outcome is the last coordinate.
    Joint { p: usize, joint: GaussianJoint, monte_carlo: bool, mc_draws: usize, seed: u64 },
    /// One law per observation pattern.
    Stratified { p: usize, strata: Vec<Stratum> },
    /// One law for (X, indicators of `missable`, Y).
    Covariate { p: usize, missable: Vec<usize>, joint: GaussianJoint },
}

fn require_continuous(ds: &MaskedDataset) -> Result<()> {
    if ds.outcome_is_binary() {
        return Err(Error::Input("likelihood marginalisation needs a continuous outcome".into()));
    }
    Ok(())
}

pub(crate) fn train_mle(ds: &MaskedDataset, cfg: &ProcedureConfig, indicators: bool) -> Result<MleModel> {
    require_continuous(ds)?;
    let p = ds.p();
    if !indicators {
        let fit = em_mvn(&ds.joint_matrix(), EmOptions::default())?;
        return Ok(MleModel::Joint {
            p,
            joint: fit.joint,
            monte_carlo: cfg.mle_monte_carlo,
            mc_draws: cfg.mc_draws,
            seed: cfg.seed,
        });
    }
    if cfg.mlemi_covariate {
        let n = ds.n();
        let missable: Vec<usize> = (0..p).filter(|&j| ds.x().col_observed_count(j) < n).collect();
        let d = p + missable.len() + 1;
        let mut values = Vec::with_capacity(n * d);
        let mut missing = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..p {
                values.push(ds.x().opt(i, j).unwrap_or(0.0));
                missing.push(ds.x().is_missing(i, j));
            }
            for &j in &missable {
                values.push(ds.x().is_missing(i, j) as u8 as f64);
                missing.push(false);
            }
            values.push(if ds.y_observed(i) { ds.y_at(i)? } else { 0.0 });
            missing.push(!ds.y_observed(i));
        }
        let fit = em_mvn(&MaskedMatrix::new(n, d, values, missing)?, EmOptions::default())?;
        return Ok(MleModel::Covariate { p, missable, joint: fit.joint });
    }
    let patterns: Vec<Pattern> = enumerate_patterns(ds).into_iter().map(|(pat, _)| pat).collect();
    let strata = crate::exec::map_slice(&patterns, |pat| -> Result<Stratum> {
        let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.x().row_mask(i) == pat.bits()).collect();
        let obs = pat.observed();
        let d = obs.len() + 1;
        let y_count = rows.iter().filter(|&&i| ds.y_observed(i)).count();
        let mut s = Stratum { pattern: pat.clone(), n_rows: rows.len(), joint: None, reason: None };
        if y_count < d + 2 {
            s.reason = Some(format!("{y_count} rows with an observed outcome, need at least {}", d + 2));
            return Ok(s);
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        let mut missing = Vec::with_capacity(rows.len() * d);
        for &i in &rows {
            for &j in &obs {
                values.push(ds.x_at(i, j)?);
                missing.push(false);
            }
            values.push(if ds.y_observed(i) { ds.y_at(i)? } else { 0.0 });
            missing.push(!ds.y_observed(i));
        }
        match MaskedMatrix::new(rows.len(), d, values, missing).and_then(|m| em_mvn(&m, EmOptions::default())) {
            Ok(f) => s.joint = Some(f.joint),
            Err(e) => {
                log::warn!("stratum {pat} untrainable: {e}");
                s.reason = Some(e.to_string());
            }
        }
        Ok(s)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    if strata.iter().all(|s| s.joint.is_none()) {
        return Err(Error::Training("no trainable stratum".into()));
    }
    Ok(MleModel::Stratified { p, strata })
}

impl MleModel {
    pub fn supports(&self, pattern: &Pattern) -> bool {
        match self {
            MleModel::Joint { p, .. } => pattern.len() == *p,
            MleModel::Stratified { strata, .. } => strata.iter().any(|s| &s.pattern == pattern && s.joint.is_some()),
            MleModel::Covariate { p, missable, .. } => {
                pattern.len() == *p && pattern.missing().iter().all(|j| missable.contains(j))
            }
        }
    }

    pub fn predict(&self, query: &Query) -> Result<PredictiveDistribution> {
        let unsupported = |reason: &str| Error::UnsupportedPattern {
            pattern: query.pattern.to_string(),
            reason: reason.to_string(),
        };
        match self {
            MleModel::Joint { p, joint, monte_carlo, mc_draws, seed: s } => {
                if !*monte_carlo || query.pattern.n_missing() == 0 {
                    let (m, v) = joint.conditional_scalar(*p, &query.observed)?;
                    return PredictiveDistribution::gaussian(m, v);
                }
                marginalise_by_draws(joint, *p, query, *mc_draws, *s)
            }
            MleModel::Stratified { strata, .. } => {
                let st = strata
                    .iter()
                    .find(|s| s.pattern == query.pattern)
                    .ok_or_else(|| unsupported("pattern absent from training data"))?;
                let joint = st.joint.as_ref().ok_or_else(|| unsupported(st.reason.as_deref().unwrap_or("untrainable")))?;
                let given: Vec<(usize, f64)> = query.observed.iter().enumerate().map(|(k, &(_, v))| (k, v)).collect();
                let (m, v) = joint.conditional_scalar(given.len(), &given)?;
                PredictiveDistribution::gaussian(m, v)
            }
            MleModel::Covariate { p, missable, joint } => {
                if !self.supports(&query.pattern) {
                    return Err(unsupported("a missing column was never missing in training"));
                }
                let mut given = query.observed.clone();
                for (k, &j) in missable.iter().enumerate() {
                    given.push((p + k, query.pattern.is_missing(j) as u8 as f64));
                }
                let (m, v) = joint.conditional_scalar(p + missable.len(), &given)?;
                PredictiveDistribution::gaussian(m, v)
            }
        }
    }
}

/// Average of E[Y | x_o, x_m] over draws of x_m from the fitted conditional law.
fn marginalise_by_draws(
    joint: &GaussianJoint,
    p: usize,
    query: &Query,
    draws: usize,
    master: u64,
) -> Result<PredictiveDistribution> {
    let missing = query.pattern.missing();
    let (mean, cov) = joint.conditional(&missing, &query.observed)?;
    let l = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("conditional covariance of missing block is not positive definite".into()))?
        .l();
    let mut parts = vec![seed::label("mle-mc")];
    parts.extend(query.observed.iter().map(|&(_, v)| v.to_bits()));
    parts.extend(query.pattern.bits().iter().map(|&b| b as u64));
    let mut rng = seed::derived_rng(master, &parts);
    let all: Vec<usize> = (0..p).collect();
    // E[Y | x] is affine in x: evaluate at the origin and at unit vectors
    let at = |x: &[f64]| -> Result<f64> {
        let given: Vec<(usize, f64)> = all.iter().map(|&j| (j, x[j])).collect();
        Ok(joint.conditional_scalar(p, &given)?.0)
    };
    let zero = vec![0.0; p];
    let base = at(&zero)?;
    let mut slope = vec![0.0; p];
    for j in 0..p {
        let mut e = zero.clone();
        e[j] = 1.0;
        slope[j] = at(&e)? - base;
    }
    let resid_var = {
        let given: Vec<(usize, f64)> = all.iter().map(|&j| (j, 0.0)).collect();
        joint.conditional_scalar(p, &given)?.1
    };
    let mut x = vec![0.0; p];
    for &(j, v) in &query.observed {
        x[j] = v;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    let k = missing.len();
    for _ in 0..draws {
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        for (r, &j) in missing.iter().enumerate() {
            x[j] = mean[r] + (0..=r).map(|c| l[(r, c)] * z[c]).sum::<f64>();
        }
        let m = base + slope.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>();
        s1 += m;
        s2 += m * m;
    }
    let nd = draws as f64;
    let m = s1 / nd;
    PredictiveDistribution::gaussian(m, resid_var + (s2 / nd - m * m).max(0.0))
}
