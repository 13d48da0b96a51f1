//! The MC oracle against plain Monte Carlo on the selection model.

mod common;

use rand::Rng;
use rand_distr::StandardNormal;

use missforecast::datagen::{calibrate_intercept, GenerativeSpec, Scenario};
use missforecast::oracle::{mc_predict, pattern_probs};
use missforecast::{Pattern, PredictiveDistribution};

fn calibrated(s: Scenario, prop: f64) -> GenerativeSpec {
    let base = GenerativeSpec::new(s);
    base.with_intercept(calibrate_intercept(&base, prop).unwrap())
}

/// E[Y | x2, M1 = m] by drawing (X1, Y) from their exact law given x2 and
/// weighting each draw by its selection probability.
fn weighted_mean(spec: &GenerativeSpec, x2: f64, missing: bool, draws: usize, seed: u64) -> f64 {
    let [m1, m2] = spec.mu_x;
    let s = spec.sigma_x;
    let b = spec.beta;
    let cmean = m1 + s[0][1] / s[1][1] * (x2 - m2);
    let csd = (s[0][0] - s[0][1] * s[0][1] / s[1][1]).sqrt();
    let mut r = common::rng(seed);
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..draws {
        let z: f64 = r.sample(StandardNormal);
        let e: f64 = r.sample(StandardNormal);
        let x1 = cmean + csd * z;
        let y = b[0] + b[1] * x1 + b[2] * x2 + spec.sigma2_y.sqrt() * e;
        let p = spec.miss_prob(x1, x2, y);
        let w = if missing { p } else { 1.0 - p };
        num += w * y;
        den += w;
    }
    num / den
}

#[test]
fn mc_oracle_agrees_with_weighted_simulation() {
    for s in [Scenario::S3, Scenario::S4, Scenario::S5] {
        let spec = calibrated(s, 0.3);
        for x2 in [-1.0, 0.3, 1.2] {
            let got = mc_predict(&spec, &"10".parse().unwrap(), &[(1, x2)]).unwrap().point();
            let sim = weighted_mean(&spec, x2, true, 400_000, 11);
            assert!((got - sim).abs() < 0.01, "{s} x2={x2}: oracle {got} vs simulation {sim}");
        }
    }
}

#[test]
fn mc_oracle_on_complete_rows_under_outcome_dependent_missingness() {
    // only Y is latent; compare with one-dimensional simulation
    let spec = calibrated(Scenario::S5, 0.5);
    let (x1, x2) = (0.4, -0.2);
    let got = mc_predict(&spec, &Pattern::complete(2), &[(0, x1), (1, x2)]).unwrap();
    let mu = spec.beta[0] + spec.beta[1] * x1 + spec.beta[2] * x2;
    let mut r = common::rng(3);
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..400_000 {
        let e: f64 = r.sample(StandardNormal);
        let y = mu + e;
        let w = 1.0 - spec.miss_prob(x1, x2, y);
        num += w * y;
        den += w;
    }
    assert!((got.point() - num / den).abs() < 0.01);
    // observing X1 lowers Y's missingness-weighted mean when large Y drives missingness
    assert!(got.point() < mu);
    match got {
        PredictiveDistribution::Gaussian { variance, .. } => assert!(variance < spec.sigma2_y),
        _ => panic!("expected a Gaussian"),
    }
}

#[test]
fn pattern_probability_matches_calibration_target() {
    for s in [Scenario::S2, Scenario::S4] {
        let spec = calibrated(s, 0.3);
        let probs = pattern_probs(&spec, 64).unwrap();
        let p10 = probs.iter().find(|(p, _)| p.to_string() == "10").unwrap().1;
        assert!((p10 - 0.3).abs() < 2e-3, "{s}: {p10}");
        let total: f64 = probs.iter().map(|(_, q)| q).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn doubling_nodes_changes_little() {
    let spec = calibrated(Scenario::S4, 0.5);
    let rule = |n| missforecast::quadrature::NormalRule::new(n).unwrap();
    for x2 in [-2.0, 0.0, 2.0] {
        let a = missforecast::oracle::mc_predict_with(&spec, &rule(64), &"10".parse().unwrap(), &[(1, x2)]).unwrap();
        let b = missforecast::oracle::mc_predict_with(&spec, &rule(128), &"10".parse().unwrap(), &[(1, x2)]).unwrap();
        assert!((a.point() - b.point()).abs() < 1e-8, "x2={x2}: {} vs {}", a.point(), b.point());
    }
}
