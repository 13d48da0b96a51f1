use proptest::prelude::*;

use missforecast::datagen::{discrete_analogue, GenerativeSpec, Scenario};
use missforecast::eval::{bootstrap_ci, stratify};
use missforecast::mechanisms::{classify, random_joint, DiscreteJoint, Flag, MechanismReport, DEFAULT_TOL};
use missforecast::procedures::{train, ProcedureConfig, ProcedureKind};
use missforecast::{seed, MaskedDataset, MaskedMatrix, Pattern};

fn joint(s: u64, two: bool) -> DiscreteJoint {
    random_joint(&mut seed::rng(s), two)
}

fn shape(r: &MechanismReport) -> Vec<u8> {
    r.flags()
        .iter()
        .map(|(_, f)| match f {
            Flag::Holds => 0,
            Flag::Fails(_) => 1,
            Flag::Undefined => 2,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lattice_implications_hold(s in any::<u64>(), two in any::<bool>()) {
        let r = classify(&joint(s, two), DEFAULT_TOL);
        prop_assert!(r.lattice_violations().is_empty(), "{r}");
    }

    #[test]
    fn flags_ignore_variable_order(s in any::<u64>(), two in any::<bool>(), rot in 0usize..6) {
        let j = joint(s, two);
        let mut order: Vec<usize> = (0..6).collect();
        order.rotate_left(rot);
        let r = j.reordered(&order).unwrap();
        prop_assert_eq!(shape(&classify(&j, DEFAULT_TOL)), shape(&classify(&r, DEFAULT_TOL)));
    }

    #[test]
    fn flags_ignore_value_labels(s in any::<u64>(), two in any::<bool>(), var in 0usize..3) {
        let j = joint(s, two);
        let r = j.relabelled(var, &[1, 0]).unwrap();
        prop_assert_eq!(shape(&classify(&j, DEFAULT_TOL)), shape(&classify(&r, DEFAULT_TOL)));
    }

    #[test]
    fn pattern_text_roundtrip(bits in proptest::collection::vec(any::<bool>(), 1..12)) {
        let p = Pattern::new(bits);
        let back: Pattern = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn bootstrap_interval_is_ordered_and_within_range(
        scores in proptest::collection::vec(0.0f64..1.0, 5..60),
        s in any::<u64>(),
    ) {
        let (lo, hi) = bootstrap_ci(&scores, 200, 0.9, s).unwrap();
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min - 1e-12 <= lo && lo <= hi && hi <= max + 1e-12);
    }

    #[test]
    fn subgroup_sizes_partition_the_rows(bits in proptest::collection::vec(0u8..4, 1..80)) {
        let pats: Vec<Pattern> = bits.iter().map(|b| Pattern::new(vec![b & 1 == 1, b & 2 == 2])).collect();
        let scores: Vec<f64> = (0..pats.len()).map(|i| i as f64).collect();
        let groups = stratify(&scores, &pats).unwrap();
        let by_pattern: usize =
            groups.iter().filter(|g| g.subgroup.to_string().starts_with("pattern:")).map(|g| g.n()).sum();
        prop_assert_eq!(by_pattern, pats.len());
        prop_assert_eq!(groups[0].n(), pats.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn training_is_deterministic(s in any::<u64>(), kind in 0usize..8) {
        let mut r = seed::rng(s);
        let rows: Vec<Vec<Option<f64>>> = (0..80)
            .map(|i| {
                let a: f64 = rand::Rng::random_range(&mut r, -2.0..2.0);
                let b: f64 = rand::Rng::random_range(&mut r, -2.0..2.0);
                vec![if i % 4 == 0 { None } else { Some(a) }, Some(b)]
            })
            .collect();
        let y: Vec<f64> = (0..80).map(|i| rows[i][1].unwrap() + i as f64 * 0.01).collect();
        let ds = MaskedDataset::new(MaskedMatrix::from_rows(&rows).unwrap(), y, vec![false; 80],
            vec!["a".into(), "b".into()], "y").unwrap();
        let cfg = ProcedureConfig { seed: s, m_imputations: 3, ..ProcedureConfig::new(ProcedureKind::ALL[kind]) };
        let f = train(&cfg, &ds).unwrap();
        let g = train(&cfg, &ds).unwrap();
        prop_assert_eq!(f.to_json().unwrap(), g.to_json().unwrap());
    }
}

#[test]
fn scenario_analogues_respect_the_lattice() {
    for s in Scenario::ALL {
        let spec = GenerativeSpec::new(s).with_intercept(Some(-1.0));
        let r = classify(&discrete_analogue(&spec, 0.2).unwrap(), DEFAULT_TOL);
        assert!(r.lattice_violations().is_empty(), "{s}: {r}");
        let ignorable = matches!(s, Scenario::S1 | Scenario::S2);
        assert_eq!(r.marx_ym.holds(), ignorable, "{s}: {r}");
        if ignorable {
            assert!(r.nimo.holds() && r.nico.holds(), "{s}: {r}");
        }
    }
}
