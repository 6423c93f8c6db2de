//! The error contracts: mismatched alphabets and arities, malformed traces,
//! and out-of-range parameters are rejected with the right error kinds.

use fusetree_core::engine::{
    leaf_distribution, mc::monte_carlo, propagate_level, root_error, EngineBudget,
    LevelDistribution,
};
use fusetree_core::error::Error;
use fusetree_core::model::{make_bsc_channel, Alphabet, ChannelSpec, StochasticKernel};
use fusetree_core::prob::Prob;
use fusetree_core::schemes;
use fusetree_core::weight::Weight;
use fusetree_core::LogProb64;

fn bsc(delta: f64) -> ChannelSpec {
    make_bsc_channel(Prob::from_f64(delta).unwrap(), Prob::half()).unwrap()
}

#[test]
fn leaf_rule_must_consume_the_signal_alphabet() {
    let ch = bsc(0.1);
    // a leaf rule over the centered ternary alphabet cannot read binary signals
    let wrong = StochasticKernel::deterministic_fn(
        1,
        Alphabet::centered(3).unwrap(),
        Alphabet::centered(3).unwrap(),
        |t| t[0],
    )
    .unwrap();
    assert!(matches!(
        leaf_distribution::<LogProb64>(&ch, &wrong),
        Err(Error::AlphabetMismatch(_))
    ));
    // arity two is not a leaf rule
    let two = schemes::majority_rule(2).unwrap();
    assert!(matches!(
        leaf_distribution::<LogProb64>(&ch, &two),
        Err(Error::ArityMismatch {
            expected: 1,
            got: 2
        })
    ));
}

#[test]
fn propagation_checks_the_message_alphabet() {
    let ch = bsc(0.1);
    let binary_dist = leaf_distribution::<LogProb64>(&ch, &schemes::identity_leaf_rule()).unwrap();
    let ternary_rule = schemes::quantizer_internal_rule(3, 2).unwrap();
    assert!(matches!(
        propagate_level(&binary_dist, &ternary_rule),
        Err(Error::AlphabetMismatch(_))
    ));
}

#[test]
fn root_rule_must_decide_in_binary() {
    let ch = bsc(0.1);
    let leaf = schemes::quantizer_leaf_rule(3).unwrap();
    let dist = leaf_distribution::<LogProb64>(&ch, &leaf).unwrap();
    let not_a_decision = schemes::quantizer_internal_rule(3, 2).unwrap();
    assert!(matches!(
        root_error(&dist, &not_a_decision, ch.prior()),
        Err(Error::AlphabetMismatch(_))
    ));
}

#[test]
fn positive_mass_outside_the_support_set_is_rejected() {
    let bad = LevelDistribution::<LogProb64> {
        level: 0,
        alphabet: Alphabet::binary(),
        p0: vec![LogProb64::one(), <LogProb64 as Weight>::zero()],
        p1: vec![LogProb64::one(), <LogProb64 as Weight>::zero()],
        support0: vec![false, true], // claims the mass sits on the dead letter
        support1: vec![true, false],
    };
    assert!(bad.validate().is_err());
}

#[test]
fn trace_horizon_must_match_the_level_count() {
    let ch = bsc(0.1);
    let assignment =
        fusetree_core::model::RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 3)
            .unwrap();
    let mut trace = fusetree_core::engine::run_float(
        &assignment,
        &ch,
        &fusetree_core::engine::RunMeta::named("majority"),
        &EngineBudget::default(),
    )
    .unwrap();
    trace.levels.pop();
    assert!(trace.validate(ch.prior()).is_err());
}

#[test]
fn monte_carlo_checks_the_leaf_alphabet_and_arity() {
    let ch = bsc(0.1);
    let quantizer = schemes::quantizer_vector(3, 2).unwrap();
    // quantizer leaves read binary signals, so this one is fine
    assert!(monte_carlo(&quantizer, &ch, 2, 2, 10, 1, &EngineBudget::default()).is_ok());
    // arity mismatch between the requested k and the rules
    assert!(matches!(
        monte_carlo(&quantizer, &ch, 3, 2, 10, 1, &EngineBudget::default()),
        Err(Error::ArityMismatch { .. })
    ));
}

#[test]
fn assumption_checker_rejects_degenerate_thresholds() {
    let ch = bsc(0.1);
    let rv = schemes::majority_vector(2).unwrap();
    let graph = fusetree_core::analysis::build_dependence_graph(&rv.internal).unwrap();
    let assignment = fusetree_core::model::RuleAssignment::oblivious(rv, 2, 4).unwrap();
    let trace = fusetree_core::engine::run_float(
        &assignment,
        &ch,
        &fusetree_core::engine::RunMeta::named("majority"),
        &EngineBudget::default(),
    )
    .unwrap()
    .to_report();
    for eta_min in [0.0, 1.0, -0.5] {
        assert!(fusetree_core::analysis::check_assumptions(&trace, &graph, eta_min).is_err());
    }
}

#[test]
fn decay_check_rejects_mismatched_parameters() {
    let ch = bsc(0.02);
    let assignment = fusetree_core::model::RuleAssignment::oblivious(
        schemes::quantizer_vector(3, 2).unwrap(),
        2,
        4,
    )
    .unwrap();
    let trace = fusetree_core::engine::run_float(
        &assignment,
        &ch,
        &fusetree_core::engine::RunMeta::named("quantizer"),
        &EngineBudget::default(),
    )
    .unwrap()
    .to_report();
    let wrong_m = schemes::QuantizerParams::new(5, 2).unwrap();
    assert!(matches!(
        fusetree_core::analysis::letter_decay_check(&trace, &wrong_m),
        Err(Error::SchemeMismatch(_))
    ));
}

#[test]
fn exact_probability_constructor_guards_the_unit_interval() {
    use num_rational::BigRational;
    assert!(Prob::exact(BigRational::new(3.into(), 2.into())).is_err());
    assert!(Prob::exact(BigRational::new((-1).into(), 2.into())).is_err());
    assert!(Prob::exact(BigRational::new(2.into(), 4.into())).is_ok());
    assert!(Prob::from_f64(f64::NAN).is_err());
    assert!(Prob::from_f64(1.5).is_err());
}
