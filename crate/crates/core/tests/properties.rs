use proptest::prelude::*;

use sipcheck::coefficients::CoefficientSequence;
use sipcheck::coupling::{CoupledWindow, CouplingKind};
use sipcheck::experiment::report::{read_report, render, Row, RowVerdict};
use sipcheck::experiment::ModelConfig;
use sipcheck::innovation::{IndexedInnovationStream, InnovationSource, InnovationSpec};
use sipcheck::martingale::{b_q, linear_decomposition, rhs_eq1, rhs_eq3, xi_n};
use sipcheck::model::{generate_path, segment, Kernel, ProcessModel, Transform};
use sipcheck::sequence::{Provenance, TailedSequence};
use sipcheck::series::Decay;
use sipcheck::stats::isotonic_nonincreasing;

fn coefficient_list() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 1..8)
}

fn innovations() -> impl Strategy<Value = InnovationSpec> {
    prop_oneof![
        Just(InnovationSpec::normal()),
        Just(InnovationSpec::uniform()),
        Just(InnovationSpec::exponential()),
        (4.5f64..12.0).prop_map(|df| InnovationSpec::student_t(df).unwrap()),
    ]
}

fn nonnegative_sequence() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_are_pure_functions_of_the_seed(a in coefficient_list(), spec in innovations(), seed in any::<u64>(), n in 1usize..300) {
        let m = ProcessModel::linear(CoefficientSequence::explicit(a).unwrap(), spec);
        let one = generate_path(&m, n, &IndexedInnovationStream::original(seed, spec));
        let two = generate_path(&m, n, &IndexedInnovationStream::original(seed, spec));
        prop_assert_eq!(one, two);
    }

    #[test]
    fn streams_are_index_addressed(seed in any::<u64>(), start in -1000i64..1000, len in 1usize..64) {
        let s = IndexedInnovationStream::original(seed, InnovationSpec::normal());
        let mut block = vec![0.0; len];
        s.fill(start, &mut block);
        for (i, v) in block.iter().enumerate() {
            prop_assert_eq!(*v, s.at(start + i as i64));
        }
    }

    #[test]
    fn replacing_eps0_moves_x_k_by_a_k_times_the_difference(a in coefficient_list(), seed in any::<u64>()) {
        let spec = InnovationSpec::normal();
        let m = ProcessModel::linear(CoefficientSequence::explicit(a.clone()).unwrap(), spec);
        let w = CoupledWindow::from_seed(&m, seed, CouplingKind::Tilde);
        let d = w.base().at(0) - w.coupled_source().at(0);
        for k in 0..a.len() as u64 + 3 {
            let (x, y) = w.coupled_g_values(k);
            let want = a.get(k as usize).copied().unwrap_or(0.0) * d;
            prop_assert!((x - y - want).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn identical_streams_give_identical_couples(a in coefficient_list(), seed in any::<u64>(), star in any::<bool>()) {
        let spec = InnovationSpec::uniform();
        let m = ProcessModel::transform(CoefficientSequence::explicit(a).unwrap(), Transform::Tanh, spec).unwrap();
        let base = IndexedInnovationStream::original(seed, spec);
        let kind = if star { CouplingKind::Star } else { CouplingKind::Tilde };
        let w = CoupledWindow::new(&m, base.clone(), base, kind);
        let (x, y) = w.coupled_g_segment(12);
        prop_assert_eq!(x, y);
    }

    #[test]
    fn chain_paths_do_not_depend_on_chunking(rho in -0.9f64..0.9, seed in any::<u64>(), split in 1usize..50) {
        let spec = InnovationSpec::normal();
        let m = ProcessModel::iterated(Kernel::ContractingSine { rho }, spec, Some(64), 0.0).unwrap();
        let s = IndexedInnovationStream::original(seed, spec);
        let whole = segment(&m, &s, 1, 60);
        let mut parts = segment(&m, &s, 1, split);
        parts.extend(segment(&m, &s, 1 + split as i64, 60 - split));
        for (u, v) in whole.iter().zip(&parts) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn isotonic_fit_is_nonincreasing_and_keeps_the_weighted_mean(
        pairs in prop::collection::vec((-5.0f64..5.0, 0.1f64..4.0), 1..40)
    ) {
        let (v, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let fit = isotonic_nonincreasing(&v, &w);
        prop_assert!(fit.windows(2).all(|p| p[0] >= p[1]));
        let mean = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((mean(&v) - mean(&fit)).abs() <= 1e-9 * (1.0 + mean(&v).abs()));
    }

    #[test]
    fn theta_sums_are_monotone(values in nonnegative_sequence(), ratio in 0.0f64..0.9) {
        let tail = if ratio == 0.0 { Decay::Vanishing } else { Decay::geometric(values[values.len() - 1], ratio) };
        let t = TailedSequence::new(values.clone(), Some(tail), Provenance::Exact);
        let big: Vec<f64> = (0..values.len() + 5).map(|m| t.big_theta(m).value).collect();
        prop_assert!(big.windows(2).all(|p| p[0] >= p[1] - 1e-12));
        let lam: Vec<f64> = (-2..values.len() as i64 + 5).map(|n| t.lambda(n).value).collect();
        prop_assert!(lam.windows(2).all(|p| p[1] >= p[0] - 1e-12));
        prop_assert_eq!(t.lambda(-1).value, 0.0);
    }

    #[test]
    fn residual_bound_grows_with_n(values in nonnegative_sequence(), q in 2.0f64..8.0, n in 1usize..200) {
        let t = TailedSequence::new(values, Some(Decay::Vanishing), Provenance::Exact);
        let a = rhs_eq3(&t, n, q).unwrap().rhs;
        let b = rhs_eq3(&t, n + 1, q).unwrap().rhs;
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn partial_sum_bound_is_the_exact_norm_for_nonnegative_filters_at_q2(a in prop::collection::vec(0.0f64..2.0, 1..8), n in 1usize..64) {
        // nonnegative filter: ||S_n||_2 = sqrt(sum_i (Lambda_{i+n} - Lambda_i)^2) with the window identity
        let t = TailedSequence::new(a.clone(), Some(Decay::Vanishing), Provenance::Exact);
        let rhs = rhs_eq1(&t, n, 2.0).unwrap().rhs;
        let lam = |k: i64| -> f64 { if k < 0 { 0.0 } else { a.iter().take(k as usize + 1).sum() } };
        let exact: f64 = (-(n as i64)..a.len() as i64 + 1).map(|i| (lam(i + n as i64) - lam(i)).powi(2)).sum::<f64>().sqrt();
        prop_assert!((rhs - exact).abs() <= 1e-9 * (1.0 + exact));
    }

    #[test]
    fn xi_matches_the_direct_sum(a in coefficient_list(), n in 1usize..40) {
        let coeffs = CoefficientSequence::explicit(a.clone()).unwrap();
        let big_a = |i: usize| -> f64 { a.iter().skip(i).sum() };
        let head: f64 = (1..=n).map(|i| big_a(i).powi(2)).sum();
        let tail: f64 = (n + 1..n + a.len() + 2).map(|i| (big_a(i) - big_a(i - n)).powi(2)).sum();
        let xi = xi_n(&coeffs, n).unwrap();
        prop_assert!((xi - (head + tail).sqrt()).abs() <= 1e-9 * (1.0 + xi));
    }

    #[test]
    fn residual_is_sum_minus_martingale(a in coefficient_list(), seed in any::<u64>(), n in 1usize..200) {
        let coeffs = CoefficientSequence::explicit(a).unwrap();
        let s = IndexedInnovationStream::original(seed, InnovationSpec::normal());
        let d = linear_decomposition(&coeffs, &s, n, 2.0).unwrap();
        for k in 0..=n {
            prop_assert!((d.s[k] - d.m[k] - d.r[k]).abs() <= 1e-12 * (1.0 + d.s[k].abs()));
        }
    }

    #[test]
    fn bq_matches_its_closed_form_above_two(q in 2.01f64..20.0) {
        let b = b_q(q).unwrap();
        let want = 18.0 * q.powf(1.5) / (q - 1.0).sqrt();
        prop_assert!((b - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn reports_round_trip(
        rows in prop::collection::vec(
            ("[a-z]{1,6}:[a-z0-9]{1,6}", "[a-z\\[\\]|(),;.0-9]{1,20}", 1.0f64..8.0, 0u64..5000,
             prop::option::of(-1e6f64..1e6), prop::option::of(0.0f64..10.0), prop::option::of(0.1f64..1e6),
             0u8..3, "[a-z ,]{0,12}", any::<u64>()),
            1..20)
    ) {
        let rows: Vec<Row> = rows
            .into_iter()
            .map(|(c, m, q, n, e, se, t, v, reason, seed)| {
                let verdict = match v {
                    0 => RowVerdict::Pass,
                    1 => RowVerdict::Fail,
                    _ => RowVerdict::skipped(reason),
                };
                Row::new(c, &m, q, n, e, se, t, verdict, seed)
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, render(&rows)).unwrap();
        let back = read_report(&path).unwrap();
        prop_assert_eq!(render(&back), render(&rows));
        let keys: Vec<_> = back.iter().map(|r| (r.check.clone(), r.model.clone(), r.n)).collect();
        prop_assert!(keys.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn model_configs_round_trip(rho in 0.01f64..0.95, beta in 0.6f64..3.0, df in 4.5f64..20.0, pick in 0u8..4) {
        let spec = InnovationSpec::student_t(df).unwrap();
        let m = match pick {
            0 => ProcessModel::linear(CoefficientSequence::geometric(rho).unwrap(), spec),
            1 => ProcessModel::linear(CoefficientSequence::polynomial(beta).unwrap(), InnovationSpec::normal()),
            2 => ProcessModel::iterated(Kernel::Ar1 { rho }, spec, None, 0.0).unwrap(),
            _ => ProcessModel::linear_dependent(
                CoefficientSequence::geometric(rho).unwrap(),
                Kernel::Ar1 { rho: rho / 2.0 },
                InnovationSpec::normal(),
                None,
            ).unwrap(),
        };
        let text = ModelConfig::from_model(&m).to_toml();
        let back: ModelConfig = toml::from_str(&text).unwrap();
        prop_assert_eq!(back.build().unwrap(), m);
    }
}
