//! The concrete decision rules the toolkit ships: majority fusion on binary
//! messages, the sum-quantizer family on centered alphabets, and two
//! deliberately reducible fixtures used to exercise the assumption checker.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::model::{Alphabet, RuleVector, StochasticKernel};
use crate::prob::Prob;

/// Derived constants of the quantizer scheme for message size m and branching
/// factor k. Nothing is cached: every accessor recomputes from (m, k).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizerParams {
    pub m: usize,
    pub k: usize,
}

impl QuantizerParams {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidArgument(format!(
                "quantizer needs m >= 3, got {m}"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "quantizer needs k >= 2, got {k}"
            )));
        }
        Ok(QuantizerParams { m, k })
    }

    /// Per-level growth factor gamma = k(1 - 1/m).
    pub fn gamma(&self) -> f64 {
        self.k as f64 * (1.0 - 1.0 / self.m as f64)
    }

    /// True when the growth factor exceeds 1 (reported, never enforced).
    pub fn contracting(&self) -> bool {
        self.gamma() > 1.0
    }

    /// Additive margin C = k ln(m) / (k - 1).
    pub fn margin(&self) -> f64 {
        self.k as f64 * (self.m as f64).ln() / (self.k as f64 - 1.0)
    }

    /// Noise threshold delta0 = exp(-1 - C); the per-letter decay guarantee
    /// holds for crossover probabilities below it.
    pub fn delta0(&self) -> f64 {
        (-1.0 - self.margin()).exp()
    }

    pub fn within_guarantee(&self, delta: f64) -> bool {
        delta < self.delta0()
    }
}

/// Majority vote over binary messages. Strict (hence deterministic) for odd
/// k; ties at even k are broken fairly, giving (1/2, 1/2) rows.
pub fn majority_rule(k: usize) -> Result<StochasticKernel> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "majority arity {k} must be at least 2"
        )));
    }
    let b = Alphabet::binary();
    StochasticKernel::stochastic_fn(k, b.clone(), b, |tuple| {
        let ones = tuple.iter().filter(|&&x| x == 1).count();
        let zeros = tuple.len() - ones;
        if ones > zeros {
            vec![Prob::zero(), Prob::one()]
        } else if ones < zeros {
            vec![Prob::one(), Prob::zero()]
        } else {
            vec![Prob::half(), Prob::half()]
        }
    })
}

fn quantizer_output(
    labels: &Alphabet,
    tuple: &[usize],
    m: usize,
    k: usize,
    symmetrized: bool,
) -> Rational64 {
    let sum: Rational64 = tuple.iter().map(|&i| labels.label(i)).sum();
    let top = Rational64::new(m as i64 - 1, 2);
    let slope = Rational64::new(m as i64 - 1, m as i64); // 1 - 1/m
    let mean = sum / Rational64::from_integer(k as i64);
    // Exact rational rounding; S/k and 1 - 1/m produce exact ties that float
    // arithmetic would misclassify.
    if sum <= Rational64::from_integer(0) {
        ((mean + top) / slope).floor() - top
    } else if symmetrized {
        // mirror image of the negative branch, making f(-a) = -f(a) exact
        ((mean - top) / slope).ceil() + top
    } else {
        ((mean - top) / slope).floor() + top
    }
}

fn quantizer_rule(m: usize, k: usize, symmetrized: bool) -> Result<StochasticKernel> {
    QuantizerParams::new(m, k)?;
    let labels = Alphabet::centered(m)?;
    let inner = labels.clone();
    StochasticKernel::deterministic_fn(k, labels.clone(), labels, move |tuple| {
        let out = quantizer_output(&inner, tuple, m, k, symmetrized);
        // the formula must land inside the alphabet; clamping would hide a bug
        inner
            .index_of(out)
            .unwrap_or_else(|| panic!("quantizer output {out} escaped the message alphabet"))
    })
}

/// Internal quantizer rule on the centered alphabet: the children sum S is
/// renormalized and floored back into the alphabet. Flooring both branches
/// leaves the rule slightly asymmetric around S = 0: mirroring an input can
/// land one letter below the mirrored output, and the top letter is reachable
/// only by unanimity.
pub fn quantizer_internal_rule(m: usize, k: usize) -> Result<StochasticKernel> {
    quantizer_rule(m, k, false)
}

/// Sign-symmetric variant of the quantizer: the positive branch rounds with
/// ceil (the exact mirror of the negative branch), so f(-a) = -f(a) for odd m
/// and the top letter regenerates from near-unanimous inputs.
pub fn quantizer_sym_internal_rule(m: usize, k: usize) -> Result<StochasticKernel> {
    quantizer_rule(m, k, true)
}

/// Leaf rule: signal 1 maps to the top label (m-1)/2, signal 0 to the bottom.
pub fn quantizer_leaf_rule(m: usize) -> Result<StochasticKernel> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "quantizer needs m >= 3, got {m}"
        )));
    }
    let messages = Alphabet::centered(m)?;
    StochasticKernel::deterministic_fn(1, Alphabet::binary(), messages, move |tuple| {
        if tuple[0] == 1 {
            m - 1
        } else {
            0
        }
    })
}

/// Root rule: decide 1 exactly when the children sum is >= 0.
pub fn quantizer_root_rule(m: usize, k: usize) -> Result<StochasticKernel> {
    QuantizerParams::new(m, k)?;
    let messages = Alphabet::centered(m)?;
    let inner = messages.clone();
    StochasticKernel::deterministic_fn(k, messages, Alphabet::binary(), move |tuple| {
        let sum: Rational64 = tuple.iter().map(|&i| inner.label(i)).sum();
        usize::from(sum >= Rational64::from_integer(0))
    })
}

/// Reducible fixture: output 1 for every input except the all-zero tuple.
/// Its dependence graph has no edge from 0 to 1.
pub fn fixture_or_rule(k: usize) -> Result<StochasticKernel> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "arity {k} must be at least 2"
        )));
    }
    let b = Alphabet::binary();
    StochasticKernel::deterministic_fn(k, b.clone(), b, |tuple| usize::from(tuple.contains(&1)))
}

/// Constant rule: every input maps to the point mass at `target`.
pub fn fixture_constant_rule(
    arity: usize,
    input: Alphabet,
    output: Alphabet,
    target: usize,
) -> Result<StochasticKernel> {
    if target >= output.len() {
        return Err(Error::InvalidArgument(format!(
            "constant target {target} outside alphabet of size {}",
            output.len()
        )));
    }
    StochasticKernel::deterministic_fn(arity, input, output, move |_| target)
}

/// Identity leaf rule over binary signals and binary messages.
pub fn identity_leaf_rule() -> StochasticKernel {
    let b = Alphabet::binary();
    StochasticKernel::deterministic_fn(1, b.clone(), b, |t| t[0]).expect("identity is valid")
}

/// Majority everywhere (binary messages): identity leaves, majority internal
/// nodes, majority root.
pub fn majority_vector(k: usize) -> Result<RuleVector> {
    let rule = majority_rule(k)?;
    RuleVector::new(rule.clone(), identity_leaf_rule(), rule)
}

/// The quantizer scheme as a rule vector.
pub fn quantizer_vector(m: usize, k: usize) -> Result<RuleVector> {
    RuleVector::new(
        quantizer_internal_rule(m, k)?,
        quantizer_leaf_rule(m)?,
        quantizer_root_rule(m, k)?,
    )
}

/// The sign-symmetric quantizer as a rule vector (same leaf and root rules).
pub fn quantizer_sym_vector(m: usize, k: usize) -> Result<RuleVector> {
    RuleVector::new(
        quantizer_sym_internal_rule(m, k)?,
        quantizer_leaf_rule(m)?,
        quantizer_root_rule(m, k)?,
    )
}

/// OR fixture as a rule vector: identity leaves, OR internal nodes, OR root.
pub fn or_fixture_vector(k: usize) -> Result<RuleVector> {
    let rule = fixture_or_rule(k)?;
    RuleVector::new(rule.clone(), identity_leaf_rule(), rule)
}

/// Constant-leaf fixture: every leaf reports `letter` regardless of its
/// signal; internal nodes and root vote by majority.
pub fn constant_fixture_vector(k: usize, letter: usize) -> Result<RuleVector> {
    let b = Alphabet::binary();
    let leaf = fixture_constant_rule(1, b.clone(), b, letter)?;
    RuleVector::new(majority_rule(k)?, leaf, majority_rule(k)?)
}

/// CLI-facing scheme table.
pub fn scheme_rule_vector(
    name: &str,
    m: usize,
    k: usize,
    constant_letter: Option<usize>,
) -> Result<RuleVector> {
    match name {
        "majority" => {
            if m != 2 {
                return Err(Error::InvalidArgument(format!(
                    "majority scheme is binary-message only, got m = {m}"
                )));
            }
            majority_vector(k)
        }
        "quantizer" => quantizer_vector(m, k),
        "quantizer-sym" => quantizer_sym_vector(m, k),
        "or-fixture" => {
            if m != 2 {
                return Err(Error::InvalidArgument(format!(
                    "or-fixture is binary-message only, got m = {m}"
                )));
            }
            or_fixture_vector(k)
        }
        "constant-fixture" => {
            if m != 2 {
                return Err(Error::InvalidArgument(format!(
                    "constant-fixture is binary-message only, got m = {m}"
                )));
            }
            constant_fixture_vector(k, constant_letter.unwrap_or(0))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown scheme \"{other}\""
        ))),
    }
}
