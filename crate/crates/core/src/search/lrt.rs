//! Likelihood-ratio-test enumeration over binary messages.
//!
//! Patterns of children messages are sorted by likelihood ratio; every
//! deterministic threshold rule cuts that order. Tied patterns are grouped;
//! cuts land between groups, and when a cut would enter a group both
//! orientations of the within-group split are generated, which preserves
//! completeness of the minimum (tied patterns move error mass along a line
//! segment whose endpoints are the group cuts).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, ChannelSpec, StochasticKernel};
use crate::report::{LogVal, SCHEMA_VERSION};

use super::{
    apply_table, error_of, optimal_error_exhaustive, BinaryDist, SearchBudget, SearchMode,
};

/// Relative tolerance for the exhaustive-vs-LRT minimum comparison.
pub const LRT_EQUIV_TOL: f64 = 1e-12;

/// Children context an LRT is computed against.
#[derive(Clone, Debug)]
pub enum LrtContext {
    Iid { child: BinaryDist, arity: usize },
    PerChild(Vec<BinaryDist>),
}

impl LrtContext {
    fn arity(&self) -> usize {
        match self {
            LrtContext::Iid { arity, .. } => *arity,
            LrtContext::PerChild(children) => children.len(),
        }
    }

    fn child(&self, slot: usize) -> &BinaryDist {
        match self {
            LrtContext::Iid { child, .. } => child,
            LrtContext::PerChild(children) => &children[slot],
        }
    }
}

/// A monotone deterministic likelihood-ratio threshold rule over child
/// patterns, together with its position in the sorted-pattern order.
#[derive(Clone, Debug, PartialEq)]
pub struct LrtRule {
    /// Decision per pattern rank (lexicographic over child tuples).
    pub table: Vec<u8>,
    /// Patterns in descending likelihood-ratio order (rank-stable on ties).
    pub sorted_patterns: Vec<usize>,
    /// Number of sorted patterns mapped to 1.
    pub cut: usize,
    /// Cut index along the canonical threshold chain (patterns with j zeros
    /// then ones), when the rule is a clean step on that chain.
    pub j0: Option<usize>,
    /// Monotone under the bitwise partial order.
    pub monotone: bool,
}

impl LrtRule {
    pub fn kernel(&self, arity: usize) -> StochasticKernel {
        let b = Alphabet::binary();
        let table = self.table.clone();
        StochasticKernel::deterministic_fn(arity, b.clone(), b, move |tuple| {
            let rank = tuple.iter().fold(0, |acc, &d| acc * 2 + d);
            table[rank] as usize
        })
        .expect("threshold table is total")
    }
}

fn pattern_llr(ctx: &LrtContext, rank: usize) -> f64 {
    let k = ctx.arity();
    let mut reach0 = true;
    let mut reach1 = true;
    let mut llr = 0.0f64;
    for slot in 0..k {
        let bit = (rank >> (k - 1 - slot)) & 1;
        let child = ctx.child(slot);
        let p0 = child.p0[bit];
        let p1 = child.p1[bit];
        reach0 &= p0 > 0.0;
        reach1 &= p1 > 0.0;
        if p0 > 0.0 && p1 > 0.0 {
            llr += p1.ln() - p0.ln();
        }
    }
    // zero-probability patterns sit at the extreme of the H1-favoring order;
    // they carry no error mass either way
    match (reach0, reach1) {
        (true, true) => llr,
        (false, true) => f64::INFINITY,
        (true, false) => f64::NEG_INFINITY,
        (false, false) => f64::INFINITY,
    }
}

fn chain_cut(table: &[u8], k: usize) -> Option<usize> {
    // chain pattern with j zeros then ones has rank 2^(k-j) - 1
    let decisions: Vec<u8> = (0..=k).map(|j| table[(1usize << (k - j)) - 1]).collect();
    let j0 = decisions.iter().take_while(|&&d| d == 1).count();
    decisions[j0..].iter().all(|&d| d == 0).then_some(j0)
}

fn is_monotone(table: &[u8]) -> bool {
    let n = table.len();
    for a in 0..n {
        for b in 0..n {
            // b dominates a bitwise
            if a & b == a && table[b] < table[a] {
                return false;
            }
        }
    }
    true
}

/// Every deterministic likelihood-ratio threshold rule for the given
/// children: group-boundary cuts (trivial all-0/all-1 cuts excluded) plus
/// both orientations of within-group splits at ties.
pub fn enumerate_lrt_rules(ctx: &LrtContext) -> Result<Vec<LrtRule>> {
    let k = ctx.arity();
    if k == 0 || k > 16 {
        return Err(Error::InvalidArgument(format!("unsupported arity {k}")));
    }
    let total = 1usize << k;
    let mut order: Vec<usize> = (0..total).collect();
    let llrs: Vec<f64> = (0..total).map(|rank| pattern_llr(ctx, rank)).collect();
    order.sort_by(|&a, &b| {
        llrs[b]
            .partial_cmp(&llrs[a])
            .expect("no NaN llr")
            .then(a.cmp(&b))
    });

    // group boundaries at exact llr ties
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &rank in &order {
        match groups.last_mut() {
            Some(group) if llrs[group[0]] == llrs[rank] => group.push(rank),
            _ => groups.push(vec![rank]),
        }
    }

    let mut tables: Vec<Vec<u8>> = Vec::new();
    let mut push_unique = |table: Vec<u8>| {
        if !tables.contains(&table) {
            tables.push(table);
        }
    };
    let table_from = |ones: &[usize]| -> Vec<u8> {
        let mut t = vec![0u8; total];
        for &rank in ones {
            t[rank] = 1;
        }
        t
    };

    let mut prefix: Vec<usize> = Vec::new();
    for group in &groups {
        // split the group in both orientations (skipped when it is the last
        // group boundary, where the split equals a boundary cut)
        for split in 1..group.len() {
            let mut forward = prefix.clone();
            forward.extend_from_slice(&group[..split]);
            if !forward.is_empty() && forward.len() != total {
                push_unique(table_from(&forward));
            }
            let mut reverse = prefix.clone();
            reverse.extend_from_slice(&group[group.len() - split..]);
            if !reverse.is_empty() && reverse.len() != total {
                push_unique(table_from(&reverse));
            }
        }
        prefix.extend_from_slice(group);
        if !prefix.is_empty() && prefix.len() != total {
            push_unique(table_from(&prefix));
        }
    }

    Ok(tables
        .into_iter()
        .map(|table| {
            let cut = table.iter().filter(|&&d| d == 1).count();
            LrtRule {
                j0: chain_cut(&table, k),
                monotone: is_monotone(&table),
                cut,
                sorted_patterns: order.clone(),
                table,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtEquivalenceReport {
    pub schema: u32,
    pub k: usize,
    pub t: usize,
    pub exhaustive_min_pe: f64,
    pub exhaustive_min_log_pe: LogVal,
    pub exhaustive_evaluated: u64,
    pub lrt_min_pe: f64,
    pub lrt_min_log_pe: LogVal,
    pub lrt_candidates: u64,
    pub relative_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares the exhaustive minimum over all deterministic assignments with
/// the minimum over LRT-structured assignments (threshold rules at every
/// non-leaf node against that node's actual children). Depth 1 and 2 only;
/// deeper trees exceed the exhaustive side's budget anyway.
pub fn verify_lrt_equivalence(
    channel: &ChannelSpec,
    k: usize,
    t: usize,
    budget: &SearchBudget,
) -> Result<LrtEquivalenceReport> {
    let exhaustive = optimal_error_exhaustive(channel, k, t, SearchMode::PerNode, budget)?;
    let prior0 = channel.prior()[0].to_f64();
    let leaf = BinaryDist::leaf_identity(channel)?;

    let mut lrt_min = f64::INFINITY;
    let mut candidates = 0u64;
    match t {
        1 => {
            let rules = enumerate_lrt_rules(&LrtContext::Iid {
                child: leaf,
                arity: k,
            })?;
            for rule in &rules {
                let decision = apply_table(&rule.table, &vec![leaf; k]);
                lrt_min = lrt_min.min(error_of(&decision, prior0));
                candidates += 1;
            }
        }
        2 => {
            let internal = enumerate_lrt_rules(&LrtContext::Iid {
                child: leaf,
                arity: k,
            })?;
            let mut choice = vec![0usize; k];
            loop {
                let children: Vec<BinaryDist> = choice
                    .iter()
                    .map(|&c| apply_table(&internal[c].table, &vec![leaf; k]))
                    .collect();
                let root_rules = enumerate_lrt_rules(&LrtContext::PerChild(children.clone()))?;
                for rule in &root_rules {
                    let decision = apply_table(&rule.table, &children);
                    lrt_min = lrt_min.min(error_of(&decision, prior0));
                    candidates += 1;
                }
                let mut slot = k;
                let done = loop {
                    if slot == 0 {
                        break true;
                    }
                    slot -= 1;
                    choice[slot] += 1;
                    if choice[slot] < internal.len() {
                        break false;
                    }
                    choice[slot] = 0;
                    if slot == 0 {
                        break true;
                    }
                };
                if done {
                    break;
                }
            }
        }
        _ => {
            return Err(Error::BudgetExceeded(format!(
                "LRT-restricted search is implemented for depth <= 2, got {t}"
            )));
        }
    }

    let gap = if exhaustive.min_pe == 0.0 {
        lrt_min.abs()
    } else {
        (lrt_min - exhaustive.min_pe).abs() / exhaustive.min_pe
    };
    Ok(LrtEquivalenceReport {
        schema: SCHEMA_VERSION,
        k,
        t,
        exhaustive_min_pe: exhaustive.min_pe,
        exhaustive_min_log_pe: LogVal(exhaustive.min_pe.ln()),
        exhaustive_evaluated: exhaustive.evaluated,
        lrt_min_pe: lrt_min,
        lrt_min_log_pe: LogVal(lrt_min.ln()),
        lrt_candidates: candidates,
        relative_gap: gap,
        tolerance: LRT_EQUIV_TOL,
        pass: gap <= LRT_EQUIV_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_bsc_channel;
    use crate::prob::Prob;

    fn bsc(delta: f64) -> ChannelSpec {
        make_bsc_channel(Prob::from_f64(delta).unwrap(), Prob::half()).unwrap()
    }

    fn leaf(delta: f64) -> BinaryDist {
        BinaryDist::leaf_identity(&bsc(delta)).unwrap()
    }

    #[test]
    fn iid_pair_yields_and_or_and_projections() {
        let rules = enumerate_lrt_rules(&LrtContext::Iid {
            child: leaf(0.1),
            arity: 2,
        })
        .unwrap();
        let tables: Vec<Vec<u8>> = rules.iter().map(|r| r.table.clone()).collect();
        // ranks (00, 01, 10, 11)
        assert!(tables.contains(&vec![0, 0, 0, 1]), "AND missing");
        assert!(tables.contains(&vec![0, 1, 1, 1]), "OR missing");
        assert!(
            tables.contains(&vec![0, 1, 0, 1]),
            "second projection missing"
        );
        assert!(
            tables.contains(&vec![0, 0, 1, 1]),
            "first projection missing"
        );
        assert_eq!(tables.len(), 4);
        // chain cuts: AND cuts at 1, OR at 2
        let by_table = |t: &[u8]| rules.iter().find(|r| r.table == t).unwrap();
        assert_eq!(by_table(&[0, 0, 0, 1]).j0, Some(1));
        assert_eq!(by_table(&[0, 1, 1, 1]).j0, Some(2));
        assert!(rules.iter().all(|r| r.monotone));
    }

    #[test]
    fn uninformative_children_make_every_rule_equivalent() {
        let flat = BinaryDist {
            p0: [0.6, 0.4],
            p1: [0.6, 0.4],
        };
        let rules = enumerate_lrt_rules(&LrtContext::Iid {
            child: flat,
            arity: 2,
        })
        .unwrap();
        assert!(!rules.is_empty());
        for rule in &rules {
            let decision = apply_table(&rule.table, &[flat, flat]);
            assert!((error_of(&decision, 0.5) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn iid_triple_chain_cuts_are_and_majority_or() {
        let rules = enumerate_lrt_rules(&LrtContext::Iid {
            child: leaf(0.1),
            arity: 3,
        })
        .unwrap();
        let tables: Vec<Vec<u8>> = rules.iter().map(|r| r.table.clone()).collect();
        assert!(
            tables.contains(&vec![0, 0, 0, 0, 0, 0, 0, 1]),
            "AND missing"
        );
        assert!(
            tables.contains(&vec![0, 0, 0, 1, 0, 1, 1, 1]),
            "majority missing"
        );
        assert!(tables.contains(&vec![0, 1, 1, 1, 1, 1, 1, 1]), "OR missing");
        let cuts: Vec<Option<usize>> = rules.iter().filter_map(|r| r.j0.map(Some)).collect();
        assert!(cuts.contains(&Some(1)) && cuts.contains(&Some(2)) && cuts.contains(&Some(3)));
    }

    #[test]
    fn lrt_minimum_matches_exhaustive_on_a_small_tree() {
        let report = verify_lrt_equivalence(&bsc(0.1), 2, 2, &SearchBudget::default()).unwrap();
        assert!(report.pass, "gap {}", report.relative_gap);
        assert!((report.exhaustive_min_pe - 0.028).abs() < 1e-12);
    }

    #[test]
    fn depth_three_is_out_of_scope() {
        assert!(matches!(
            verify_lrt_equivalence(&bsc(0.1), 2, 3, &SearchBudget::default()),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn unreachable_patterns_go_to_the_extreme() {
        let dead_zero = BinaryDist {
            p0: [0.0, 1.0],
            p1: [0.0, 1.0],
        };
        let rules = enumerate_lrt_rules(&LrtContext::PerChild(vec![dead_zero, leaf(0.1)])).unwrap();
        // patterns 00 and 01 are unreachable; rules still total functions
        for rule in &rules {
            assert_eq!(rule.table.len(), 4);
        }
        assert!(!rules.is_empty());
    }
}
