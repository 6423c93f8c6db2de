//! Per-node error exponents and the product-ceiling checks they obey on
//! binary-message trees: with C = -ln(delta/2) under a uniform prior,
//! e1 * e2 <= C^2 ((k+1)/2)^(2 tau) at every level-tau node of an optimal
//! assignment, and min(e1, e2) <= C ((k+1)/2)^t at the root, which floors the
//! reachable error probability at (1/2) exp(-C ((k+1)/2)^t).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{node_distributions, EngineBudget};
use crate::error::{Error, Result};
use crate::model::{ChannelSpec, RuleAssignment};
use crate::report::{LogVal, SCHEMA_VERSION};
use crate::weight::Weight;
use crate::LogProb64;

/// Ratio-bound slack for float dust in the ordering diagnostics.
const RATIO_TOL: f64 = 1e-9;

/// Negative logs of the joint error events at one node: type1 is
/// -log P(s = 0, message = 1), type2 is -log P(s = 1, message = 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeErrorExponents {
    pub type1: f64,
    pub type2: f64,
}

/// Exponents for every node of the tree, root included (the root's message
/// is its binary decision).
pub fn node_exponents(
    assignment: &RuleAssignment,
    channel: &ChannelSpec,
    budget: &EngineBudget,
) -> Result<BTreeMap<(usize, usize), NodeErrorExponents>> {
    if assignment.message_alphabet().len() != 2 {
        return Err(Error::AlphabetMismatch(
            "error exponents are defined for binary messages".into(),
        ));
    }
    let prior = channel.prior();
    let ln_prior0 = prior[0].to_f64().ln();
    let ln_prior1 = prior[1].to_f64().ln();
    let dists = node_distributions::<LogProb64>(assignment, channel, budget)?;
    Ok(dists
        .into_iter()
        .map(|(addr, dist)| {
            let exps = NodeErrorExponents {
                type1: -(ln_prior0 + dist.p0[1].ln_value()),
                type2: -(ln_prior1 + dist.p1[0].ln_value()),
            };
            (addr, exps)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub level: usize,
    pub index: usize,
    pub type1: LogVal,
    pub type2: LogVal,
    pub product: LogVal,
    pub ceiling: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentProductReport {
    pub schema: u32,
    pub k: usize,
    pub t: usize,
    pub c: f64,
    pub base: f64,
    pub rows: Vec<ExponentRow>,
    pub root_min: f64,
    pub root_min_ceiling: f64,
    pub root_min_pass: bool,
    pub pe: f64,
    pub pe_floor: f64,
    pub pe_floor_pass: bool,
    pub all_pass: bool,
}

/// Checks the exponent-product ceiling at every node and the min-exponent
/// ceiling at the root. Only the uniform prior is accepted: that is the one
/// setting where the constant C = -ln(delta/2) is pinned down.
pub fn verify_exponent_product(
    assignment: &RuleAssignment,
    channel: &ChannelSpec,
    delta: f64,
    budget: &EngineBudget,
) -> Result<ExponentProductReport> {
    if !channel.is_uniform_prior() {
        return Err(Error::InvalidArgument(
            "exponent-product check requires a uniform prior".into(),
        ));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "crossover {delta} outside (0, 1/2)"
        )));
    }
    let (k, t) = (assignment.k(), assignment.t());
    let c = -(delta / 2.0).ln();
    let base = (k as f64 + 1.0) / 2.0;
    let exponents = node_exponents(assignment, channel, budget)?;

    let mut rows = Vec::new();
    for (&(level, index), exps) in &exponents {
        let product = exps.type1 * exps.type2;
        let ceiling = c * c * base.powi(2 * level as i32);
        rows.push(ExponentRow {
            level,
            index,
            type1: LogVal(exps.type1),
            type2: LogVal(exps.type2),
            product: LogVal(product),
            ceiling,
            pass: product <= ceiling,
        });
    }
    let root = exponents[&(t, 0)];
    let root_min = root.type1.min(root.type2);
    let root_min_ceiling = c * base.powi(t as i32);
    let root_min_pass = root_min <= root_min_ceiling;
    // pe = P(s=0, decide 1) + P(s=1, decide 0) = e^(-e1) + e^(-e2)
    let pe = (-root.type1).exp() + (-root.type2).exp();
    let pe_floor = 0.5 * (-root_min_ceiling).exp();
    let pe_floor_pass = pe >= pe_floor;
    let all_pass = rows.iter().all(|r| r.pass) && root_min_pass && pe_floor_pass;
    Ok(ExponentProductReport {
        schema: SCHEMA_VERSION,
        k,
        t,
        c,
        base,
        rows,
        root_min,
        root_min_ceiling,
        root_min_pass,
        pe,
        pe_floor,
        pe_floor_pass,
        all_pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingRow {
    pub level: usize,
    pub index: usize,
    /// Some sibling permutation sorts type1 descending and type2 ascending.
    pub ordered_exists: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    /// The node's rule restricted to the threshold chain is a clean step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_step: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub ratio_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub schema: u32,
    pub rows: Vec<OrderingRow>,
    pub all_ordered: bool,
    pub all_ratio_pass: bool,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(current: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(current.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            current.push(x);
            rec(current, rest, out);
            current.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..k).collect(), &mut out);
    out
}

/// For each non-leaf node: does a sibling ordering exist with type1
/// exponents descending and type2 ascending, and does the node's rule cut
/// the resulting threshold chain at some j0 with
/// e1_node/e1_{c_j0} + e2_node/e2_{c_j0} <= k + 1?
pub fn ordering_diagnostics(
    assignment: &RuleAssignment,
    channel: &ChannelSpec,
    budget: &EngineBudget,
) -> Result<OrderingReport> {
    if assignment.message_alphabet().len() != 2 {
        return Err(Error::AlphabetMismatch(
            "ordering diagnostics are defined for binary messages".into(),
        ));
    }
    let (k, t) = (assignment.k(), assignment.t());
    let exponents = node_exponents(assignment, channel, budget)?;
    let perms = permutations(k);
    let ratio_bound = k as f64 + 1.0;

    let mut rows = Vec::new();
    for level in 1..=t {
        for index in 0..assignment.nodes_at_level(level) {
            let children: Vec<NodeErrorExponents> = (0..k)
                .map(|j| exponents[&(level - 1, index * k + j)])
                .collect();
            let perm = perms.iter().find(|perm| {
                perm.windows(2).all(|w| {
                    children[w[0]].type1 >= children[w[1]].type1
                        && children[w[0]].type2 <= children[w[1]].type2
                })
            });
            let Some(perm) = perm else {
                rows.push(OrderingRow {
                    level,
                    index,
                    ordered_exists: false,
                    permutation: None,
                    is_step: None,
                    j0: None,
                    ratio: None,
                    ratio_bound,
                    ratio_pass: None,
                });
                continue;
            };
            let rule = assignment.rule_at(level, index);
            // threshold chain under the sorted order: the first j children
            // (largest type1 exponents) send 0, the rest send 1
            let mut decisions = Vec::with_capacity(k + 1);
            let mut deterministic = true;
            for j in 0..=k {
                let mut tuple = vec![0usize; k];
                for (pos, &child) in perm.iter().enumerate() {
                    tuple[child] = usize::from(pos >= j);
                }
                match rule.deterministic_output(&tuple) {
                    Some(out) => decisions.push(out),
                    None => {
                        deterministic = false;
                        break;
                    }
                }
            }
            let (is_step, j0) = if deterministic {
                let ones = decisions.iter().take_while(|&&d| d == 1).count();
                let step = decisions[ones..].iter().all(|&d| d == 0);
                (Some(step), step.then_some(ones))
            } else {
                (None, None)
            };
            let node = exponents[&(level, index)];
            let (ratio, ratio_pass) = match j0 {
                Some(j0) if (1..=k).contains(&j0) => {
                    let pivot = children[perm[j0 - 1]];
                    let ratio = node.type1 / pivot.type1 + node.type2 / pivot.type2;
                    (Some(ratio), Some(ratio <= ratio_bound + RATIO_TOL))
                }
                _ => (None, None),
            };
            rows.push(OrderingRow {
                level,
                index,
                ordered_exists: true,
                permutation: Some(perm.clone()),
                is_step,
                j0,
                ratio,
                ratio_bound,
                ratio_pass,
            });
        }
    }
    let all_ordered = rows.iter().all(|r| r.ordered_exists);
    let all_ratio_pass = rows.iter().all(|r| r.ratio_pass.unwrap_or(true));
    Ok(OrderingReport {
        schema: SCHEMA_VERSION,
        rows,
        all_ordered,
        all_ratio_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_bsc_channel;
    use crate::prob::Prob;
    use crate::schemes;
    use crate::search::{optimal_error_exhaustive, SearchBudget, SearchMode};

    fn bsc(delta: f64) -> ChannelSpec {
        make_bsc_channel(Prob::from_f64(delta).unwrap(), Prob::half()).unwrap()
    }

    #[test]
    fn identity_leaves_have_the_pinned_exponent() {
        // leaf with identity rule: both joint errors are delta/2
        let channel = bsc(0.1);
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 1).unwrap();
        let exps = node_exponents(&assignment, &channel, &EngineBudget::default()).unwrap();
        let leaf = exps[&(0, 0)];
        let c = -(0.05f64).ln();
        assert!((leaf.type1 - c).abs() < 1e-12);
        assert!((leaf.type2 - c).abs() < 1e-12);
    }

    #[test]
    fn searched_optimum_respects_the_product_ceiling() {
        let channel = bsc(0.1);
        let outcome = optimal_error_exhaustive(
            &channel,
            2,
            2,
            SearchMode::PerNode,
            &SearchBudget::default(),
        )
        .unwrap();
        let assignment = outcome.to_assignment().unwrap();
        let report =
            verify_exponent_product(&assignment, &channel, 0.1, &EngineBudget::default()).unwrap();
        assert!(report.all_pass);
        assert_eq!(report.rows.len(), 7); // 4 leaves + 2 internal + root
        assert!(report.pe_floor_pass);
        assert!((report.pe - outcome.min_pe).abs() < 1e-12);
    }

    #[test]
    fn non_uniform_priors_are_rejected() {
        let channel =
            make_bsc_channel(Prob::from_f64(0.1).unwrap(), Prob::from_f64(0.3).unwrap()).unwrap();
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 1).unwrap();
        assert!(
            verify_exponent_product(&assignment, &channel, 0.1, &EngineBudget::default()).is_err()
        );
    }

    #[test]
    fn iid_siblings_are_trivially_ordered() {
        let channel = bsc(0.1);
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(3).unwrap(), 3, 2).unwrap();
        let report = ordering_diagnostics(&assignment, &channel, &EngineBudget::default()).unwrap();
        assert!(report.all_ordered);
        // strict majority of three cuts the chain at j0 = 2
        let internal = report.rows.iter().find(|r| r.level == 1).unwrap();
        assert_eq!(internal.j0, Some(2));
        assert!(report.all_ratio_pass);
    }

    #[test]
    fn searched_optimum_orders_and_passes_the_ratio_bound() {
        let channel = bsc(0.1);
        let outcome = optimal_error_exhaustive(
            &channel,
            2,
            2,
            SearchMode::PerNode,
            &SearchBudget::default(),
        )
        .unwrap();
        let assignment = outcome.to_assignment().unwrap();
        let report = ordering_diagnostics(&assignment, &channel, &EngineBudget::default()).unwrap();
        assert!(report.all_ordered);
        assert!(report.all_ratio_pass);
        for row in report.rows.iter().filter(|r| r.is_step == Some(true)) {
            if let Some(j0) = row.j0 {
                assert!((1..=3).contains(&j0));
            }
        }
    }
}
