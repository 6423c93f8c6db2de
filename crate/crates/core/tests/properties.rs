//! Property tests over randomized channels and kernels.

use fusetree_core::engine::{
    leaf_distribution, propagate_level, propagate_level_with, root_error, EngineBudget, RunMeta,
    Strategy as Convolution,
};
use fusetree_core::model::{
    make_bsc_channel, relabel_centered, Alphabet, ChannelSpec, RuleAssignment, RuleVector,
    StochasticKernel,
};
use fusetree_core::prob::Prob;
use fusetree_core::schemes;
use fusetree_core::weight::Weight;
use fusetree_core::LogProb64;
use proptest::prelude::*;

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, len).prop_map(|mut v| {
        let total: f64 = v.iter().sum();
        for x in v.iter_mut() {
            *x /= total;
        }
        // counter rounding drift so the row passes the 1e-12 sum check
        let drift: f64 = v.iter().sum::<f64>() - 1.0;
        v[0] -= drift;
        v
    })
}

fn random_channel() -> impl Strategy<Value = ChannelSpec> {
    (simplex(2), simplex(2), 0.1f64..0.9).prop_map(|(p0, p1, prior0)| {
        ChannelSpec::new(
            Prob::from_f64(prior0).unwrap(),
            Alphabet::binary(),
            p0.into_iter().map(|x| Prob::from_f64(x).unwrap()).collect(),
            p1.into_iter().map(|x| Prob::from_f64(x).unwrap()).collect(),
        )
        .unwrap()
    })
}

/// Random stochastic kernel M^2 -> M over m letters.
fn random_kernel(m: usize) -> impl Strategy<Value = StochasticKernel> {
    let alphabet = if m == 2 {
        Alphabet::binary()
    } else {
        Alphabet::centered(m).unwrap()
    };
    prop::collection::vec(simplex(m), m * m).prop_map(move |rows| {
        StochasticKernel::from_rows(
            2,
            alphabet.clone(),
            alphabet.clone(),
            rows.into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|x| Prob::from_f64(x).unwrap())
                        .collect()
                })
                .collect(),
            false,
        )
        .unwrap()
    })
}

/// Random exchangeable kernel M^2 -> M: one row per letter multiset.
fn random_exchangeable_kernel(m: usize) -> impl Strategy<Value = StochasticKernel> {
    let alphabet = if m == 2 {
        Alphabet::binary()
    } else {
        Alphabet::centered(m).unwrap()
    };
    let multisets = m * (m + 1) / 2;
    prop::collection::vec(simplex(m), multisets).prop_map(move |rows| {
        let mut by_multiset = std::collections::BTreeMap::new();
        let mut cursor = 0usize;
        for a in 0..m {
            for b in a..m {
                by_multiset.insert(vec![a, b], rows[cursor].clone());
                cursor += 1;
            }
        }
        StochasticKernel::stochastic_fn(2, alphabet.clone(), alphabet.clone(), |tuple| {
            let mut key = tuple.to_vec();
            key.sort_unstable();
            by_multiset[&key]
                .iter()
                .map(|&x| Prob::from_f64(x).unwrap())
                .collect()
        })
        .unwrap()
    })
}

fn random_leaf(m: usize) -> impl Strategy<Value = StochasticKernel> {
    let alphabet = if m == 2 {
        Alphabet::binary()
    } else {
        Alphabet::centered(m).unwrap()
    };
    prop::collection::vec(simplex(m), 2).prop_map(move |rows| {
        StochasticKernel::from_rows(
            1,
            Alphabet::binary(),
            alphabet.clone(),
            rows.into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|x| Prob::from_f64(x).unwrap())
                        .collect()
                })
                .collect(),
            false,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn propagated_levels_stay_normalized(
        channel in random_channel(),
        leaf in random_leaf(3),
        kernel in random_kernel(3),
    ) {
        let mut dist = leaf_distribution::<LogProb64>(&channel, &leaf).unwrap();
        dist.validate().unwrap();
        for _ in 0..3 {
            dist = propagate_level(&dist, &kernel).unwrap();
            dist.validate().unwrap();
        }
    }

    #[test]
    fn multiset_fast_path_agrees_with_dense(
        channel in random_channel(),
        leaf in random_leaf(3),
        kernel in random_exchangeable_kernel(3),
    ) {
        prop_assume!(kernel.exchangeable());
        let mut dense = leaf_distribution::<LogProb64>(&channel, &leaf).unwrap();
        let mut fast = dense.clone();
        for _ in 0..3 {
            dense = propagate_level_with(&dense, &kernel, Convolution::Dense).unwrap();
            fast = propagate_level_with(&fast, &kernel, Convolution::Multiset).unwrap();
            for letter in 0..3 {
                for hyp in 0..2 {
                    let a = dense.prob(hyp, letter).ln_value();
                    let b = fast.prob(hyp, letter).ln_value();
                    prop_assert!(
                        (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                        "dense {a} vs multiset {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn relabeling_commutes_with_propagation(
        channel in random_channel(),
        leaf in random_leaf(3),
        kernel in random_kernel(3),
        root_rows in prop::collection::vec(simplex(2), 9),
    ) {
        let centered = Alphabet::centered(3).unwrap();
        let indexed = Alphabet::indexed(3).unwrap();
        let root = StochasticKernel::from_rows(
            2,
            centered.clone(),
            Alphabet::binary(),
            root_rows
                .into_iter()
                .map(|row| row.into_iter().map(|x| Prob::from_f64(x).unwrap()).collect())
                .collect(),
            false,
        )
        .unwrap();
        let original = RuleVector::new(kernel, leaf, root).unwrap();
        let relabeled = RuleVector::new(
            relabel_centered(&original.internal, &indexed).unwrap(),
            relabel_centered(&original.leaf, &indexed).unwrap(),
            relabel_centered(&original.root, &indexed).unwrap(),
        )
        .unwrap();
        let budget = EngineBudget::default();
        let meta = RunMeta::named("prop");
        let a = fusetree_core::engine::run_float(
            &RuleAssignment::oblivious(original, 2, 3).unwrap(),
            &channel,
            &meta,
            &budget,
        )
        .unwrap();
        let b = fusetree_core::engine::run_float(
            &RuleAssignment::oblivious(relabeled, 2, 3).unwrap(),
            &channel,
            &meta,
            &budget,
        )
        .unwrap();
        prop_assert_eq!(a.root.pe, b.root.pe);
    }

    #[test]
    fn synthetic_power_laws_are_recovered(
        rho in 0.2f64..1.0,
        c in 0.1f64..5.0,
    ) {
        let series: Vec<(f64, f64)> =
            (2..8).map(|t| {
                let n = (2f64).powi(t);
                (n, -c * n.powf(rho))
            })
            .collect();
        let fit = fusetree_core::analysis::fit_exponent(&series).unwrap();
        prop_assert!((fit.rho_hat - rho).abs() < 1e-9);
        prop_assert!((fit.c - c).abs() < 1e-9 * c);
    }

    #[test]
    fn wilson_interval_contains_the_point_estimate(
        errors in 0u64..1000,
        extra in 1u64..100_000,
    ) {
        let trials = errors + extra;
        let (lo, hi) = fusetree_core::engine::mc::wilson_99(errors, trials);
        let p = errors as f64 / trials as f64;
        prop_assert!(lo <= p && p <= hi);
        prop_assert!(lo >= 0.0 && hi <= 1.0);
    }
}

#[test]
fn absolute_continuity_makes_supports_agree() {
    // positive signal likelihoods both ways mean H0 and H1 reach the same
    // letters at every level, for any scheme
    let channel = make_bsc_channel(Prob::from_f64(0.03).unwrap(), Prob::half()).unwrap();
    for scheme in [
        "majority",
        "quantizer",
        "quantizer-sym",
        "or-fixture",
        "constant-fixture",
    ] {
        let m = if scheme.starts_with("quantizer") {
            3
        } else {
            2
        };
        let rv = schemes::scheme_rule_vector(scheme, m, 2, Some(0)).unwrap();
        let assignment = RuleAssignment::oblivious(rv, 2, 5).unwrap();
        let trace = fusetree_core::engine::run_float(
            &assignment,
            &channel,
            &RunMeta::named(scheme),
            &EngineBudget::default(),
        )
        .unwrap();
        for level in &trace.levels {
            assert_eq!(
                level.support0, level.support1,
                "{scheme} level {}",
                level.level
            );
        }
    }
}

#[test]
fn quantizer_error_is_monotone_in_noise_on_the_sampled_grid() {
    // sampled sanity check at m = 3, k = 2, t = 6 for both quantizer variants
    for scheme in ["quantizer", "quantizer-sym"] {
        let mut last = f64::NEG_INFINITY;
        for delta in [0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05] {
            let channel = make_bsc_channel(Prob::from_f64(delta).unwrap(), Prob::half()).unwrap();
            let rv = schemes::scheme_rule_vector(scheme, 3, 2, None).unwrap();
            let assignment = RuleAssignment::oblivious(rv, 2, 6).unwrap();
            let log_pe = fusetree_core::engine::run_float(
                &assignment,
                &channel,
                &RunMeta::named(scheme),
                &EngineBudget::default(),
            )
            .unwrap()
            .log_pe();
            assert!(
                log_pe >= last,
                "{scheme}: pe dropped as noise rose at delta={delta}"
            );
            last = log_pe;
        }
    }
}

#[test]
fn deterministic_kernels_have_point_mass_rows() {
    let rule = schemes::quantizer_internal_rule(5, 3).unwrap();
    assert!(rule.is_deterministic());
    for rank in 0..rule.row_count() {
        let row = rule.row_by_rank(rank);
        let ones = row.iter().filter(|p| p.is_one()).count();
        let zeros = row.iter().filter(|p| p.is_zero()).count();
        assert_eq!(ones, 1);
        assert_eq!(zeros, row.len() - 1);
    }
}

#[test]
fn root_error_decomposition_recomputes() {
    let channel =
        make_bsc_channel(Prob::from_f64(0.07).unwrap(), Prob::from_f64(0.4).unwrap()).unwrap();
    let rv = schemes::majority_vector(3).unwrap();
    let d0 = leaf_distribution::<LogProb64>(&channel, &rv.leaf).unwrap();
    let err = root_error(&d0, &rv.root, channel.prior()).unwrap();
    let expect = 0.4 * err.p0_err.ln_value().exp() + 0.6 * err.p1_err.ln_value().exp();
    assert!((err.pe.ln_value().exp() - expect).abs() < 1e-15);
    let z = <LogProb64 as Weight>::zero();
    assert!(z.is_zero());
}
