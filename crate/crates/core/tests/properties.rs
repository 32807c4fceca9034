mod common;

use common::*;
use proptest::prelude::*;
use recallcor::data::read_csv;
use recallcor::simulation::{true_log_marginal_cor, Preset};
use recallcor::{write_csv, BiasDirection, CsvSchema, Dataset, OutcomeModel, RecallBias, StratumTable};

fn table() -> impl Strategy<Value = StratumTable> {
    (0u64..80, 0u64..80, 0u64..80, 0u64..80).prop_map(|(a, b, c, d)| StratumTable::new(a, b, c, d))
}

fn direction() -> impl Strategy<Value = BiasDirection> {
    prop_oneof![Just(BiasDirection::OverReporting), Just(BiasDirection::UnderReporting)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(
            (any::<bool>(), any::<bool>(), prop::collection::vec(-1e6f64..1e6, 3), -5i64..5),
            1..40,
        )
    ) {
        let y = rows.iter().map(|r| r.0).collect();
        let t = rows.iter().map(|r| r.1).collect();
        let x = rows.iter().map(|r| r.2.clone()).collect();
        let s = rows.iter().map(|r| r.3).collect();
        let data = Dataset::new(y, t, x, Some(s)).unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let schema = CsvSchema { stratum: Some("stratum".into()), ..CsvSchema::default() };
        let back: Dataset = read_csv(buf.as_slice(), &schema).unwrap();
        prop_assert_eq!(back.n(), data.n());
        for i in 0..data.n() {
            prop_assert_eq!(back.y(i), data.y(i));
            prop_assert_eq!(back.t_star(i), data.t_star(i));
            prop_assert_eq!(back.x(i), data.x(i));
            prop_assert_eq!(back.stratum(i), data.stratum(i));
        }
    }

    #[test]
    fn corrections_preserve_margins(t in table(), dir in direction(), c in 0.0f64..0.95, k in 0.0f64..0.95) {
        let bias = RecallBias::new(dir, c, k).unwrap();
        prop_assert!(margin_error(&t, &bias) <= 1e-9);
    }

    #[test]
    fn stratified_estimate_is_monotone_in_each_parameter(
        tables in prop::collection::vec(table(), 1..4),
        dir in direction(),
        c in 0i64..400, k in 0i64..400, step in 1i64..200,
        case_param in any::<bool>(),
    ) {
        let which = if case_param { Perturb::Case } else { Perturb::Control };
        let r = monotone_step(&tables, dir, &ratio(c, 1000), &ratio(k, 1000), &ratio(step, 1000), which);
        prop_assume!(r.is_some());
        prop_assert!(r.unwrap());
    }

    #[test]
    fn cell_probabilities_sum_to_one(seed in any::<u64>(), p in 0usize..4, separate in any::<bool>()) {
        let mut r = rng(seed);
        let model = if separate { OutcomeModel::Separate } else { OutcomeModel::Shared };
        let params = random_params(&mut r, p, model);
        let bias = random_bias(&mut r);
        let x: Vec<f64> = (0..p).map(|_| rand::Rng::random_range(&mut r, -3.0..3.0)).collect();
        prop_assert!(normalization_error(&x, &params, &bias) <= 1e-12);
    }

    #[test]
    fn ordering_verdicts_match_enumeration(
        m1 in 0.01f64..0.99, m0 in 0.01f64..0.99, e in 0.01f64..0.99,
        dir in direction(), c in 0.0f64..0.9, k in 0.0f64..0.9,
    ) {
        let bias = RecallBias::new(dir, c, k).unwrap();
        if let Some(ok) = ordering_matches(m1, m0, e, &bias) {
            prop_assert!(ok, "m1={m1} m0={m0} e={e} bias={bias:?}");
        }
    }

    #[test]
    fn true_marginal_cor_is_below_conditional_effect(gamma_t in 0.01f64..3.0, preset in 0usize..4) {
        let g = Preset::ALL[preset].gamma();
        prop_assert!(true_log_marginal_cor(&g, gamma_t) <= gamma_t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn likelihood_gradient_matches_finite_differences(seed in any::<u64>(), separate in any::<bool>()) {
        let data = random_dataset(seed, 60, 2);
        let mut r = rng(seed ^ 0x5eed);
        let model = if separate { OutcomeModel::Separate } else { OutcomeModel::Shared };
        let params = random_params(&mut r, 2, model);
        let bias = random_bias(&mut r);
        prop_assert!(gradient_rel_error(&data, &params, &bias) <= 1e-5);
    }
}
