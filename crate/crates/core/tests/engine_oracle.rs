//! Cross-checks the propagation engines against a deliberately naive oracle:
//! explicit enumeration of every signal vector, every message assignment,
//! and every root decision, in linear-domain f64. No shared code path with
//! the engines (no per-level distributions, no multisets, no log domain).

use fusetree_core::engine::{run_exact_rational, run_float, EngineBudget, RunMeta};
use fusetree_core::model::{make_bsc_channel, ChannelSpec, RuleAssignment, RuleVector};
use fusetree_core::prob::Prob;
use fusetree_core::schemes;
use fusetree_core::weight::Weight;

/// P0(root = 1) and P1(root = 0) by flat enumeration of the whole joint.
fn brute_force_errors(rules: &RuleVector, channel: &ChannelSpec, k: usize, t: usize) -> (f64, f64) {
    let leaves = k.pow(t as u32);
    let x_size = channel.signals().len();
    let m = rules.messages().len();
    // internal nodes per level, levels 1..t-1
    let internal_counts: Vec<usize> = (1..t).map(|level| k.pow((t - level) as u32)).collect();
    let internal_total: usize = internal_counts.iter().sum();

    let mut err = [0.0f64; 2];
    for (s, err_slot) in err.iter_mut().enumerate() {
        let mut total = 0.0f64;
        let mut signals = vec![0usize; leaves];
        loop {
            let p_signals: f64 = signals
                .iter()
                .map(|&x| channel.signal_prob(s, x).to_f64())
                .product();
            // enumerate all message assignments to leaves and internal nodes
            let mut messages = vec![0usize; leaves + internal_total];
            loop {
                let mut p_messages = 1.0f64;
                for (i, &x) in signals.iter().enumerate() {
                    p_messages *= rules.leaf.row(&[x])[messages[i]].to_f64();
                }
                let mut offset = 0usize; // start of current level's messages
                let mut width = leaves;
                for &count in &internal_counts {
                    for node in 0..count {
                        let tuple: Vec<usize> =
                            (0..k).map(|j| messages[offset + node * k + j]).collect();
                        p_messages *=
                            rules.internal.row(&tuple)[messages[offset + width + node]].to_f64();
                    }
                    offset += width;
                    width = count;
                }
                if p_messages > 0.0 {
                    let root_tuple: Vec<usize> = (0..k).map(|j| messages[offset + j]).collect();
                    let wrong = 1 - s;
                    total += p_signals * p_messages * rules.root.row(&root_tuple)[wrong].to_f64();
                }
                if !advance(&mut messages, m) {
                    break;
                }
            }
            if !advance(&mut signals, x_size) {
                break;
            }
        }
        *err_slot = total;
    }
    (err[0], err[1])
}

fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn check_triangle(rules: RuleVector, scheme: &str, k: usize, t: usize) {
    let channel = make_bsc_channel(Prob::from_ratio(1, 10).unwrap(), Prob::half()).unwrap();
    let (bf_p0, bf_p1) = brute_force_errors(&rules, &channel, k, t);
    let assignment = RuleAssignment::oblivious(rules, k, t).unwrap();
    let meta = RunMeta::named(scheme);
    let budget = EngineBudget::default();

    let float = run_float(&assignment, &channel, &meta, &budget).unwrap();
    let exact = run_exact_rational(&assignment, &channel, &meta, &budget).unwrap();
    float.validate(channel.prior()).unwrap();
    exact.validate(channel.prior()).unwrap();

    let cases = [
        (
            "p0_err",
            bf_p0,
            float.root.p0_err.ln_value(),
            exact.root.p0_err.ln_value(),
        ),
        (
            "p1_err",
            bf_p1,
            float.root.p1_err.ln_value(),
            exact.root.p1_err.ln_value(),
        ),
    ];
    let close = |a: f64, b: f64| -> bool {
        (a == f64::NEG_INFINITY && b == f64::NEG_INFINITY)
            || (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    };
    for (name, bf, f, e) in cases {
        let bf_log = bf.ln();
        assert!(
            close(f, bf_log),
            "{scheme} k={k} t={t} {name}: float {f} vs brute force {bf_log}"
        );
        assert!(
            close(f, e),
            "{scheme} k={k} t={t} {name}: float {f} vs exact {e}"
        );
    }
}

#[test]
fn majority_trees_match_the_flat_enumeration() {
    check_triangle(schemes::majority_vector(2).unwrap(), "majority", 2, 1);
    check_triangle(schemes::majority_vector(2).unwrap(), "majority", 2, 2);
    check_triangle(schemes::majority_vector(3).unwrap(), "majority", 3, 1);
}

#[test]
fn quantizer_trees_match_the_flat_enumeration() {
    check_triangle(schemes::quantizer_vector(3, 2).unwrap(), "quantizer", 2, 1);
    check_triangle(schemes::quantizer_vector(3, 2).unwrap(), "quantizer", 2, 2);
    check_triangle(
        schemes::quantizer_sym_vector(3, 2).unwrap(),
        "quantizer-sym",
        2,
        2,
    );
}

#[test]
fn randomized_tie_breaks_match_the_flat_enumeration() {
    // the fair-tie rows exercise the randomized-kernel path end to end
    check_triangle(schemes::majority_vector(2).unwrap(), "majority", 2, 3);
}

#[test]
fn fixtures_match_the_flat_enumeration() {
    check_triangle(schemes::or_fixture_vector(2).unwrap(), "or-fixture", 2, 2);
    check_triangle(
        schemes::constant_fixture_vector(2, 1).unwrap(),
        "constant-fixture",
        2,
        2,
    );
}

#[test]
fn monte_carlo_sits_inside_its_interval_around_the_exact_value() {
    let channel = make_bsc_channel(Prob::from_f64(0.1).unwrap(), Prob::half()).unwrap();
    let rules = schemes::majority_vector(3).unwrap();
    let assignment = RuleAssignment::oblivious(rules.clone(), 3, 2).unwrap();
    let exact = run_float(
        &assignment,
        &channel,
        &RunMeta::named("majority"),
        &EngineBudget::default(),
    )
    .unwrap()
    .log_pe()
    .exp();
    let est = fusetree_core::engine::mc::monte_carlo(
        &rules,
        &channel,
        3,
        2,
        100_000,
        2024,
        &EngineBudget::default(),
    )
    .unwrap();
    assert!(
        est.covers(exact),
        "[{}, {}] misses {exact}",
        est.ci99_low,
        est.ci99_high
    );
    // three-sigma-style agreement: the point estimate is close too
    assert!((est.p_hat - exact).abs() < 5.0 * (exact / 1e5).sqrt());
}
