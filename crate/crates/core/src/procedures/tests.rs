use super::*;
use crate::datagen::{make_pair, GenerativeSpec, Scenario};
use crate::domain::MaskedMatrix;

fn pair(scenario: Scenario, prop: f64, n: usize, seed: u64) -> crate::datagen::DataPair {
    make_pair(&GenerativeSpec::new(scenario), prop, n, 200, seed).unwrap()
}

fn q10(x2: f64) -> Query {
    Query { pattern: "10".parse().unwrap(), observed: vec![(1, x2)] }
}

fn cfg(kind: ProcedureKind) -> ProcedureConfig {
    ProcedureConfig { seed: 7, m_imputations: 5, ..ProcedureConfig::new(kind) }
}

#[test]
fn complete_data_collapses_to_ols() {
    let d = pair(Scenario::S1, 0.0, 300, 1);
    let preds: Vec<Vec<f64>> = ProcedureKind::ALL
        .iter()
        .map(|&k| {
            let f = train(&cfg(k), &d.train).unwrap();
            (0..d.test.n()).map(|i| f.predict(&d.test.query(i)).unwrap().point()).collect()
        })
        .collect();
    for (k, p) in ProcedureKind::ALL.iter().zip(&preds) {
        let worst = p.iter().zip(&preds[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{k} differs from PS by {worst}");
    }
}

#[test]
fn ps_pattern_model_ignores_missing_column() {
    let d = pair(Scenario::S2, 0.4, 400, 2);
    let f = train(&cfg(ProcedureKind::PS), &d.train).unwrap();
    // same X2, any X1 value would be irrelevant: check against a direct fit
    let rows: Vec<usize> = (0..d.train.n()).filter(|&i| d.train.x().is_missing(i, 0)).collect();
    let xs: Vec<Vec<f64>> = rows.iter().map(|&i| vec![1.0, d.train.x_at(i, 1).unwrap()]).collect();
    let ys: Vec<f64> = rows.iter().map(|&i| d.train.y_at(i).unwrap()).collect();
    let direct = regression::fit_rows(&xs, &ys, false).unwrap().summary();
    for x2 in [-1.0, 0.0, 2.5] {
        let got = f.predict(&q10(x2)).unwrap().point();
        assert!((got - direct.mean(&[1.0, x2])).abs() < 1e-10);
    }
}

#[test]
fn cca_refuses_incomplete_queries() {
    let d = pair(Scenario::S1, 0.3, 200, 3);
    let f = train(&cfg(ProcedureKind::CCA), &d.train).unwrap();
    assert!(!f.supports(&"10".parse().unwrap()));
    assert!(matches!(f.predict(&q10(0.0)), Err(Error::UnsupportedPattern { .. })));
    assert!(f.predict(&Query::complete(&[0.1, 0.2])).is_ok());
}

#[test]
fn malformed_query_is_contract_error() {
    let d = pair(Scenario::S1, 0.3, 200, 3);
    let f = train(&cfg(ProcedureKind::PS), &d.train).unwrap();
    let bad = Query { pattern: "10".parse().unwrap(), observed: vec![(0, 1.0)] };
    assert!(matches!(f.predict(&bad), Err(Error::Contract(_))));
    assert!(matches!(f.predict(&Query::complete(&[1.0])), Err(Error::Contract(_))));
}

#[test]
fn json_roundtrip_predicts_identically() {
    let d = pair(Scenario::S4, 0.3, 300, 4);
    for k in ProcedureKind::ALL {
        let f = train(&cfg(k), &d.train).unwrap();
        let g = TrainedForecaster::from_json(&f.to_json().unwrap()).unwrap();
        for i in 0..20 {
            let q = d.test.query(i);
            assert_eq!(f.predict(&q).ok(), g.predict(&q).ok(), "{k}");
        }
    }
    let mut f = train(&cfg(ProcedureKind::PS), &d.train).unwrap();
    f.format_version = 99;
    assert!(TrainedForecaster::from_json(&f.to_json().unwrap()).is_err());
}

#[test]
fn mimi_with_interactions_matches_ps() {
    let d = pair(Scenario::S4, 0.3, 600, 5);
    let ps = train(&cfg(ProcedureKind::PS), &d.train).unwrap();
    let mimi = train(&cfg(ProcedureKind::MIMI), &d.train).unwrap();
    for i in 0..d.test.n() {
        let q = d.test.query(i);
        let (a, b) = (ps.predict(&q).unwrap().point(), mimi.predict(&q).unwrap().point());
        assert!((a - b).abs() < 1e-8, "row {i}: {a} vs {b}");
    }
}

#[test]
fn mi_and_mle_agree_under_mar() {
    let d = pair(Scenario::S2, 0.3, 2000, 6);
    let mi = train(&ProcedureConfig { m_imputations: 20, ..cfg(ProcedureKind::MI) }, &d.train).unwrap();
    let mle = train(&cfg(ProcedureKind::MleM), &d.train).unwrap();
    for x2 in [-1.5, 0.0, 1.5] {
        let (a, b) = (mi.predict(&q10(x2)).unwrap().point(), mle.predict(&q10(x2)).unwrap().point());
        assert!((a - b).abs() < 0.05, "x2={x2}: {a} vs {b}");
    }
}

#[test]
fn targets_are_declared() {
    assert_eq!(cfg(ProcedureKind::PS).target(), Some(Target::MC));
    assert_eq!(cfg(ProcedureKind::MI).target(), Some(Target::MU));
    assert_eq!(cfg(ProcedureKind::CCS).target(), None);
    let itr = ProcedureConfig { itr_learner: ItrLearner::Linear, ..cfg(ProcedureKind::ITR) };
    assert_eq!(itr.target(), None);
}

#[test]
fn too_few_rows_in_a_pattern_is_unsupported() {
    // 2 rows with X1 missing: not enough for an intercept and a slope plus one
    let mut rows: Vec<Vec<Option<f64>>> = (0..20).map(|i| vec![Some(i as f64), Some((i * i % 7) as f64)]).collect();
    rows[0][0] = None;
    rows[1][0] = None;
    let x = MaskedMatrix::from_rows(&rows).unwrap();
    let y: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
    let ds = MaskedDataset::new(x, y, vec![false; 20], vec!["a".into(), "b".into()], "y").unwrap();
    let f = train(&cfg(ProcedureKind::PS), &ds).unwrap();
    assert!(!f.supports(&"10".parse().unwrap()));
    assert!(f.supports(&"00".parse().unwrap()));
}

#[test]
fn binary_outcome_rejected_by_mle() {
    let rows: Vec<Vec<Option<f64>>> = (0..30).map(|i| vec![if i % 5 == 0 { None } else { Some(i as f64) }]).collect();
    let x = MaskedMatrix::from_rows(&rows).unwrap();
    let y: Vec<f64> = (0..30).map(|i| (i % 2) as f64).collect();
    let ds = MaskedDataset::new(x, y, vec![false; 30], vec!["a".into()], "y").unwrap();
    assert!(matches!(train(&cfg(ProcedureKind::MleM), &ds), Err(Error::Input(_))));
    let f = train(&cfg(ProcedureKind::PS), &ds).unwrap();
    assert!(matches!(f.predict(&Query::complete(&[3.0])).unwrap(), PredictiveDistribution::Bernoulli { .. }));
}
