//! Brute-force optimal-rule search on small binary-message trees.
//!
//! The search space is every deterministic rule at every non-leaf node (leaf
//! rules are fixed to the identity: any other leaf behavior can be absorbed
//! into the level-1 rules). Candidates are evaluated with a compact
//! linear-domain f64 evaluator; ties break toward the lexicographically
//! smallest rule encoding, making the argmin reproducible.

pub mod exponents;
pub mod lrt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, ChannelSpec, RuleAssignment, StochasticKernel};
use crate::report::{LogVal, SCHEMA_VERSION};
use crate::schemes;

pub use exponents::{
    node_exponents, ordering_diagnostics, verify_exponent_product, ExponentProductReport,
    NodeErrorExponents, OrderingReport,
};
pub use lrt::{
    enumerate_lrt_rules, verify_lrt_equivalence, LrtContext, LrtEquivalenceReport, LrtRule,
};

#[derive(Clone, Debug)]
pub struct SearchBudget {
    /// Cap on enumerated rule functions (m^(m^k) for a full enumeration).
    pub max_rules: u64,
    /// Cap on rule combinations an exhaustive search may evaluate.
    pub max_combinations: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_rules: 1_000_000,
            max_combinations: 1 << 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    PerNode,
    LevelHomogeneous,
}

/// Lazy enumeration of every deterministic function M^k -> M, identified by
/// a base-m encoding over lexicographically ordered input tuples (most
/// significant digit = first tuple).
#[derive(Debug)]
pub struct RuleEnumeration {
    alphabet: Alphabet,
    arity: usize,
    table_len: usize,
    count: u64,
    next: u64,
}

impl RuleEnumeration {
    pub fn count(&self) -> u64 {
        self.count
    }
}

impl Iterator for RuleEnumeration {
    type Item = StochasticKernel;

    fn next(&mut self) -> Option<StochasticKernel> {
        if self.next >= self.count {
            return None;
        }
        let m = self.alphabet.len();
        let mut rest = self.next;
        let mut table = vec![0usize; self.table_len];
        for slot in table.iter_mut().rev() {
            *slot = (rest % m as u64) as usize;
            rest /= m as u64;
        }
        self.next += 1;
        Some(
            StochasticKernel::deterministic_fn(
                self.arity,
                self.alphabet.clone(),
                self.alphabet.clone(),
                |tuple| {
                    let rank = tuple.iter().fold(0, |acc, &d| acc * m + d);
                    table[rank]
                },
            )
            .expect("enumerated table is total"),
        )
    }
}

/// Every deterministic kernel M^k -> M, lazily. Rejects spaces larger than
/// `cap` functions with a hint to fall back to the LRT or level-homogeneous
/// restriction.
pub fn enumerate_rules(m: usize, k: usize, cap: u64) -> Result<RuleEnumeration> {
    let alphabet = if m == 2 {
        Alphabet::binary()
    } else {
        Alphabet::centered(m)?
    };
    let table_len = m
        .checked_pow(k as u32)
        .ok_or_else(|| Error::BudgetExceeded(format!("table size {m}^{k} overflows")))?;
    let count = u32::try_from(table_len)
        .ok()
        .and_then(|exp| (m as u64).checked_pow(exp))
        .filter(|&c| c <= cap)
        .ok_or_else(|| {
            Error::BudgetExceeded(format!(
                "{m}^({m}^{k}) deterministic rules exceed the cap of {cap}; restrict the search \
                 to LRT-structured or level-homogeneous rules"
            ))
        })?;
    Ok(RuleEnumeration {
        alphabet,
        arity: k,
        table_len,
        count,
        next: 0,
    })
}

/// Child distribution over binary messages under both hypotheses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryDist {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
}

impl BinaryDist {
    /// Distribution a leaf reports with the identity rule.
    pub fn leaf_identity(channel: &ChannelSpec) -> Result<Self> {
        if channel.signals().len() != 2 {
            return Err(Error::AlphabetMismatch(
                "binary-message search needs binary signals".into(),
            ));
        }
        Ok(BinaryDist {
            p0: [channel.p0()[0].to_f64(), channel.p0()[1].to_f64()],
            p1: [channel.p1()[0].to_f64(), channel.p1()[1].to_f64()],
        })
    }
}

pub(crate) fn apply_table(table: &[u8], children: &[BinaryDist]) -> BinaryDist {
    let k = children.len();
    let mut out = BinaryDist {
        p0: [0.0; 2],
        p1: [0.0; 2],
    };
    for (rank, &decision) in table.iter().enumerate() {
        let mut j0 = 1.0f64;
        let mut j1 = 1.0f64;
        for (slot, child) in children.iter().enumerate() {
            let bit = (rank >> (k - 1 - slot)) & 1;
            j0 *= child.p0[bit];
            j1 *= child.p1[bit];
        }
        out.p0[decision as usize] += j0;
        out.p1[decision as usize] += j1;
    }
    out
}

pub(crate) fn error_of(decision: &BinaryDist, prior0: f64) -> f64 {
    prior0 * decision.p0[1] + (1.0 - prior0) * decision.p1[0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgminRule {
    /// `root`, `level <l> node <i>`, or `level <l>` for homogeneous rules.
    pub position: String,
    pub encoding: u64,
    /// Output letter per input tuple, in lexicographic tuple order.
    pub table: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcomeReport {
    pub schema: u32,
    pub mode: SearchMode,
    pub k: usize,
    pub t: usize,
    pub evaluated: u64,
    pub min_pe: f64,
    pub min_log_pe: LogVal,
    pub argmin: Vec<ArgminRule>,
}

/// Result of an exhaustive search: the global minimum over the enumerated
/// class and the deterministically tie-broken argmin assignment.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub mode: SearchMode,
    pub k: usize,
    pub t: usize,
    pub evaluated: u64,
    pub min_pe: f64,
    /// Rule tables of the argmin: internal nodes in (level, index) order,
    /// then the root.
    pub argmin_tables: Vec<(String, u64, Vec<u8>)>,
}

impl SearchOutcome {
    pub fn to_report(&self) -> SearchOutcomeReport {
        SearchOutcomeReport {
            schema: SCHEMA_VERSION,
            mode: self.mode,
            k: self.k,
            t: self.t,
            evaluated: self.evaluated,
            min_pe: self.min_pe,
            min_log_pe: LogVal(self.min_pe.ln()),
            argmin: self
                .argmin_tables
                .iter()
                .map(|(position, encoding, table)| ArgminRule {
                    position: position.clone(),
                    encoding: *encoding,
                    table: table.clone(),
                })
                .collect(),
        }
    }

    /// Materializes the argmin as a rule assignment (identity leaves).
    pub fn to_assignment(&self) -> Result<RuleAssignment> {
        let b = Alphabet::binary();
        let kernel_of = |table: &[u8]| -> StochasticKernel {
            StochasticKernel::deterministic_fn(self.k, b.clone(), b.clone(), |tuple| {
                let rank = tuple.iter().fold(0, |acc, &d| acc * 2 + d);
                table[rank] as usize
            })
            .expect("argmin table is total")
        };
        match self.mode {
            SearchMode::PerNode => {
                let mut rules = BTreeMap::new();
                for index in 0..self.k.pow(self.t as u32) {
                    rules.insert((0, index), schemes::identity_leaf_rule());
                }
                let mut cursor = 0usize;
                for level in 1..self.t {
                    for index in 0..self.k.pow((self.t - level) as u32) {
                        rules.insert((level, index), kernel_of(&self.argmin_tables[cursor].2));
                        cursor += 1;
                    }
                }
                rules.insert((self.t, 0), kernel_of(&self.argmin_tables[cursor].2));
                RuleAssignment::per_node(self.k, self.t, rules)
            }
            SearchMode::LevelHomogeneous => {
                let internal: Vec<StochasticKernel> = self.argmin_tables[..self.t - 1]
                    .iter()
                    .map(|(_, _, t)| kernel_of(t))
                    .collect();
                let root = kernel_of(&self.argmin_tables[self.t - 1].2);
                RuleAssignment::level_homogeneous(
                    self.k,
                    self.t,
                    schemes::identity_leaf_rule(),
                    internal,
                    root,
                )
            }
        }
    }
}

/// Exhaustive minimum of the error probability over deterministic rules at
/// every non-leaf node (leaves fixed to identity), evaluated exactly over the
/// enumerated class.
pub fn optimal_error_exhaustive(
    channel: &ChannelSpec,
    k: usize,
    t: usize,
    mode: SearchMode,
    budget: &SearchBudget,
) -> Result<SearchOutcome> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "branching factor {k} must be at least 2"
        )));
    }
    if t < 1 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let leaf = BinaryDist::leaf_identity(channel)?;
    let prior0 = channel.prior()[0].to_f64();
    let table_len = 1usize << k;
    let rules_per_slot = 1u64 << table_len; // 2^(2^k) deterministic tables
    let slots: usize = match mode {
        SearchMode::PerNode => (1..t).map(|level| k.pow((t - level) as u32)).sum::<usize>() + 1,
        SearchMode::LevelHomogeneous => t,
    };
    let combos = (0..slots)
        .try_fold(1u64, |acc, _| acc.checked_mul(rules_per_slot))
        .filter(|&c| c <= budget.max_combinations)
        .ok_or_else(|| {
            Error::BudgetExceeded(format!(
                "{slots} rule slots with {rules_per_slot} tables each exceed the budget of {} \
                 combinations",
                budget.max_combinations
            ))
        })?;

    let tables: Vec<Vec<u8>> = (0..rules_per_slot)
        .map(|enc| {
            let mut table = vec![0u8; table_len];
            for (i, slot) in table.iter_mut().enumerate() {
                *slot = ((enc >> (table_len - 1 - i)) & 1) as u8;
            }
            table
        })
        .collect();

    let mut choice = vec![0usize; slots];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    loop {
        let pe = match mode {
            SearchMode::PerNode => eval_per_node(&tables, &choice, leaf, prior0, k, t),
            SearchMode::LevelHomogeneous => {
                eval_level_homogeneous(&tables, &choice, leaf, prior0, k, t)
            }
        };
        evaluated += 1;
        // strict improvement keeps the first (lexicographically smallest)
        // encoding among ties, because the odometer counts upward
        if best.as_ref().is_none_or(|(b, _)| pe < *b) {
            best = Some((pe, choice.clone()));
        }
        let mut slot = slots;
        let done = loop {
            if slot == 0 {
                break true;
            }
            slot -= 1;
            choice[slot] += 1;
            if choice[slot] < tables.len() {
                break false;
            }
            choice[slot] = 0;
            if slot == 0 {
                break true;
            }
        };
        if done {
            debug_assert_eq!(evaluated, combos);
            let (min_pe, winning) = best.expect("at least one candidate");
            let argmin_tables = label_tables(&winning, &tables, mode, k, t);
            return Ok(SearchOutcome {
                mode,
                k,
                t,
                evaluated,
                min_pe,
                argmin_tables,
            });
        }
    }
}

fn label_tables(
    choice: &[usize],
    tables: &[Vec<u8>],
    mode: SearchMode,
    k: usize,
    t: usize,
) -> Vec<(String, u64, Vec<u8>)> {
    let mut out = Vec::new();
    let mut cursor = 0usize;
    match mode {
        SearchMode::PerNode => {
            for level in 1..t {
                for index in 0..k.pow((t - level) as u32) {
                    out.push((
                        format!("level {level} node {index}"),
                        choice[cursor] as u64,
                        tables[choice[cursor]].clone(),
                    ));
                    cursor += 1;
                }
            }
        }
        SearchMode::LevelHomogeneous => {
            for level in 1..t {
                out.push((
                    format!("level {level}"),
                    choice[cursor] as u64,
                    tables[choice[cursor]].clone(),
                ));
                cursor += 1;
            }
        }
    }
    out.push((
        "root".into(),
        choice[cursor] as u64,
        tables[choice[cursor]].clone(),
    ));
    out
}

fn eval_per_node(
    tables: &[Vec<u8>],
    choice: &[usize],
    leaf: BinaryDist,
    prior0: f64,
    k: usize,
    t: usize,
) -> f64 {
    let mut current: Vec<BinaryDist> = vec![leaf; k.pow(t as u32)];
    let mut cursor = 0usize;
    for level in 1..t {
        let width = k.pow((t - level) as u32);
        let mut next = Vec::with_capacity(width);
        for index in 0..width {
            let children = &current[index * k..(index + 1) * k];
            next.push(apply_table(&tables[choice[cursor]], children));
            cursor += 1;
        }
        current = next;
    }
    let decision = apply_table(&tables[choice[cursor]], &current);
    error_of(&decision, prior0)
}

fn eval_level_homogeneous(
    tables: &[Vec<u8>],
    choice: &[usize],
    leaf: BinaryDist,
    prior0: f64,
    k: usize,
    t: usize,
) -> f64 {
    let mut dist = leaf;
    for &level_choice in &choice[..t - 1] {
        dist = apply_table(&tables[level_choice], &vec![dist; k]);
    }
    let decision = apply_table(&tables[choice[t - 1]], &vec![dist; k]);
    error_of(&decision, prior0)
}

/// Evaluates a rule-vector scheme with the same arithmetic the search uses,
/// for like-for-like comparisons against the searched minimum.
pub fn scheme_error_linear(
    channel: &ChannelSpec,
    rules: &crate::model::RuleVector,
    t: usize,
) -> Result<f64> {
    if rules.messages().len() != 2 {
        return Err(Error::AlphabetMismatch(
            "binary-message evaluation only".into(),
        ));
    }
    let k = rules.arity();
    let leaf = BinaryDist::leaf_identity(channel)?;
    let table_of = |kernel: &StochasticKernel| -> Vec<[f64; 2]> {
        (0..kernel.row_count())
            .map(|rank| {
                let row = kernel.row_by_rank(rank);
                [row[0].to_f64(), row[1].to_f64()]
            })
            .collect()
    };
    let apply_soft = |rows: &[[f64; 2]], children: &[BinaryDist]| -> BinaryDist {
        let mut out = BinaryDist {
            p0: [0.0; 2],
            p1: [0.0; 2],
        };
        for (rank, row) in rows.iter().enumerate() {
            let mut j0 = 1.0;
            let mut j1 = 1.0;
            for (slot, child) in children.iter().enumerate() {
                let bit = (rank >> (k - 1 - slot)) & 1;
                j0 *= child.p0[bit];
                j1 *= child.p1[bit];
            }
            for (out_letter, &weight) in row.iter().enumerate() {
                out.p0[out_letter] += j0 * weight;
                out.p1[out_letter] += j1 * weight;
            }
        }
        out
    };
    let leaf_rows = table_of(&rules.leaf);
    let mut dist = BinaryDist {
        p0: [0.0; 2],
        p1: [0.0; 2],
    };
    for (x, rows) in leaf_rows.iter().enumerate() {
        for (out, &weight) in rows.iter().enumerate() {
            dist.p0[out] += leaf.p0[x] * weight;
            dist.p1[out] += leaf.p1[x] * weight;
        }
    }
    let internal_rows = table_of(&rules.internal);
    for _ in 1..t {
        dist = apply_soft(&internal_rows, &vec![dist; k]);
    }
    let decision = apply_soft(&table_of(&rules.root), &vec![dist; k]);
    Ok(error_of(&decision, channel.prior()[0].to_f64()))
}
