//! Exact per-level propagation of message distributions under both
//! hypotheses, with three interchangeable carriers: log-domain floats (the
//! workhorse), exact big rationals (the oracle), and Monte Carlo (in `mc`).
//!
//! Levels are counted from the leaves: the trace holds one distribution per
//! level tau = 0..t-1, and the root decision is computed from level t-1.

pub mod mc;

use std::collections::HashMap;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::model::{Alphabet, ChannelSpec, RuleAssignment, StochasticKernel};
use crate::prob::Prob;
use crate::weight::{LogProb, Weight};

/// Normalization tolerance on log-sum-exp of a propagated level.
pub const NORM_TOL: f64 = 1e-9;

/// Resource guards. Fields are public so callers can raise limits knowingly.
#[derive(Clone, Debug)]
pub struct EngineBudget {
    /// Cap on total tree nodes for per-node assignments.
    pub max_tree_nodes: u64,
    /// Exact-rational runs refuse deeper horizons (denominators square per level).
    pub rational_max_t: usize,
    /// Exact-rational runs refuse kernels with more than this many rows.
    pub rational_max_rows: usize,
    /// Monte Carlo refuses trees with more leaves than this.
    pub mc_max_leaves: u64,
}

impl Default for EngineBudget {
    fn default() -> Self {
        EngineBudget {
            max_tree_nodes: 1 << 20,
            rational_max_t: 6,
            rational_max_rows: 4096,
            mc_max_leaves: 1 << 20,
        }
    }
}

/// Caller-supplied run provenance echoed into traces and reports.
#[derive(Clone, Debug, Default)]
pub struct RunMeta {
    pub scheme: String,
    pub delta: Option<Prob>,
    pub quantizer: Option<QuantizerEcho>,
}

/// Quantizer constants echoed with every quantizer run; `within_guarantee`
/// records whether the supplied noise level is below the delta0 threshold.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuantizerEcho {
    pub gamma: f64,
    pub margin: f64,
    pub delta0: f64,
    pub within_guarantee: Option<bool>,
}

impl RunMeta {
    pub fn named(scheme: &str) -> Self {
        RunMeta {
            scheme: scheme.to_string(),
            delta: None,
            quantizer: None,
        }
    }

    pub fn with_delta(scheme: &str, delta: Prob) -> Self {
        RunMeta {
            scheme: scheme.to_string(),
            delta: Some(delta),
            quantizer: None,
        }
    }

    pub fn quantizer(params: &crate::schemes::QuantizerParams, delta: Prob) -> Self {
        let within = params.within_guarantee(delta.to_f64());
        RunMeta {
            scheme: "quantizer".to_string(),
            delta: Some(delta),
            quantizer: Some(QuantizerEcho {
                gamma: params.gamma(),
                margin: params.margin(),
                delta0: params.delta0(),
                within_guarantee: Some(within),
            }),
        }
    }
}

/// Message distribution of one tree level under both hypotheses, plus exact
/// reachability sets computed symbolically (independent of the numerics).
#[derive(Clone, Debug, PartialEq)]
pub struct LevelDistribution<W: Weight> {
    pub level: usize,
    pub alphabet: Alphabet,
    pub p0: Vec<W>,
    pub p1: Vec<W>,
    pub support0: Vec<bool>,
    pub support1: Vec<bool>,
}

impl<W: Weight> LevelDistribution<W> {
    pub fn prob(&self, hypothesis: usize, letter: usize) -> &W {
        match hypothesis {
            0 => &self.p0[letter],
            1 => &self.p1[letter],
            _ => panic!("hypothesis index must be 0 or 1"),
        }
    }

    pub fn support(&self, hypothesis: usize) -> &[bool] {
        match hypothesis {
            0 => &self.support0,
            1 => &self.support1,
            _ => panic!("hypothesis index must be 0 or 1"),
        }
    }

    pub fn full_support(&self, hypothesis: usize) -> bool {
        self.support(hypothesis).iter().all(|&b| b)
    }

    /// Checks normalization (exact for rational carriers, `NORM_TOL` on the
    /// log scale otherwise) and support/value consistency.
    pub fn validate(&self) -> Result<()> {
        for (name, p, sup) in [
            ("p0", &self.p0, &self.support0),
            ("p1", &self.p1, &self.support1),
        ] {
            let total = W::sum(p.clone());
            if W::EXACT {
                if total != W::one() {
                    return Err(Error::InvalidArgument(format!(
                        "level {} {name} sums to {:?}, expected exactly 1",
                        self.level, total
                    )));
                }
            } else {
                let ln = total.ln_value();
                if ln.is_nan() || ln.abs() > NORM_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "level {} {name} log-normalization off by {ln}",
                        self.level
                    )));
                }
            }
            for (letter, (w, &s)) in p.iter().zip(sup.iter()).enumerate() {
                if !s && !w.is_zero() {
                    return Err(Error::InvalidArgument(format!(
                        "level {} {name}[{letter}] positive outside the support set",
                        self.level
                    )));
                }
                if W::EXACT && s && w.is_zero() {
                    return Err(Error::InvalidArgument(format!(
                        "level {} {name}[{letter}] exactly zero inside the support set",
                        self.level
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Root decision errors: P0(decide 1), P1(decide 0), and the prior-weighted
/// error probability.
#[derive(Clone, Debug, PartialEq)]
pub struct RootError<W: Weight> {
    pub p0_err: W,
    pub p1_err: W,
    pub pe: W,
}

#[derive(Clone, Debug)]
pub struct TraceConfig {
    pub scheme: String,
    pub engine: String,
    pub k: usize,
    pub t: usize,
    pub m: usize,
    pub delta: Option<Prob>,
    pub prior0: Prob,
    pub quantizer: Option<QuantizerEcho>,
    pub rule_ids: Vec<(String, String)>,
}

/// Full run record: config echo, per-level distributions for tau = 0..t-1,
/// and the root error decomposition.
#[derive(Clone, Debug)]
pub struct RunTrace<W: Weight> {
    pub config: TraceConfig,
    pub levels: Vec<LevelDistribution<W>>,
    pub root: RootError<W>,
}

impl<W: Weight> RunTrace<W> {
    pub fn log_pe(&self) -> f64 {
        self.root.pe.ln_value()
    }

    pub fn validate(&self, prior: &[Prob; 2]) -> Result<()> {
        if self.levels.len() != self.config.t {
            return Err(Error::InvalidArgument(format!(
                "trace holds {} levels for horizon {}",
                self.levels.len(),
                self.config.t
            )));
        }
        for (tau, level) in self.levels.iter().enumerate() {
            if level.level != tau {
                return Err(Error::InvalidArgument(format!(
                    "level {tau} labeled {}",
                    level.level
                )));
            }
            level.validate()?;
        }
        let recomputed = mix_error(&self.root.p0_err, &self.root.p1_err, prior)?;
        let both_zero = recomputed.is_zero() && self.root.pe.is_zero();
        let delta = (recomputed.ln_value() - self.root.pe.ln_value()).abs();
        if !both_zero && (delta.is_nan() || delta > NORM_TOL) {
            return Err(Error::InvalidArgument(format!(
                "root error mix differs from recomputation by {delta} in log"
            )));
        }
        Ok(())
    }
}

/// Which convolution to use when propagating a level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Enumerate all m^k rows.
    Dense,
    /// Enumerate letter multisets with multinomial weights; valid only for
    /// exchangeable kernels with iid children.
    Multiset,
}

enum Children<'a, W: Weight> {
    Iid(&'a LevelDistribution<W>),
    PerChild(&'a [LevelDistribution<W>]),
}

/// Propagated distributions and supports under both hypotheses.
type Convolved<W> = (Vec<W>, Vec<W>, Vec<bool>, Vec<bool>);

fn convolve<W: Weight>(
    children: &Children<'_, W>,
    rule: &StochasticKernel,
    strategy: Strategy,
) -> Result<Convolved<W>> {
    let child_at = |slot: usize| -> &LevelDistribution<W> {
        match children {
            Children::Iid(d) => d,
            Children::PerChild(ds) => &ds[slot],
        }
    };
    match children {
        Children::Iid(d) => {
            if &d.alphabet != rule.input() {
                return Err(Error::AlphabetMismatch(format!(
                    "rule consumes {}, children carry {}",
                    rule.input(),
                    d.alphabet
                )));
            }
        }
        Children::PerChild(ds) => {
            if ds.len() != rule.arity() {
                return Err(Error::ArityMismatch {
                    expected: rule.arity(),
                    got: ds.len(),
                });
            }
            for d in ds.iter() {
                if &d.alphabet != rule.input() {
                    return Err(Error::AlphabetMismatch(format!(
                        "rule consumes {}, a child carries {}",
                        rule.input(),
                        d.alphabet
                    )));
                }
            }
        }
    }

    let n_out = rule.output().len();
    let mut terms0: Vec<Vec<W>> = vec![Vec::new(); n_out];
    let mut terms1: Vec<Vec<W>> = vec![Vec::new(); n_out];
    let mut sup0 = vec![false; n_out];
    let mut sup1 = vec![false; n_out];

    let feed = |row: &[Prob],
                j0: W,
                j1: W,
                s0: bool,
                s1: bool,
                t0: &mut Vec<Vec<W>>,
                t1: &mut Vec<Vec<W>>,
                u0: &mut Vec<bool>,
                u1: &mut Vec<bool>|
     -> Result<()> {
        for (out, p) in row.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let pw = W::from_prob(p)?;
            t0[out].push(j0.mul(&pw));
            t1[out].push(j1.mul(&pw));
            if s0 {
                u0[out] = true;
            }
            if s1 {
                u1[out] = true;
            }
        }
        Ok(())
    };

    match strategy {
        Strategy::Dense => {
            for rank in 0..rule.row_count() {
                let tuple = rule.tuple_of_rank(rank);
                let mut j0 = W::one();
                let mut j1 = W::one();
                let mut s0 = true;
                let mut s1 = true;
                for (slot, &letter) in tuple.iter().enumerate() {
                    let child = child_at(slot);
                    j0 = j0.mul(&child.p0[letter]);
                    j1 = j1.mul(&child.p1[letter]);
                    s0 &= child.support0[letter];
                    s1 &= child.support1[letter];
                }
                feed(
                    rule.row_by_rank(rank),
                    j0,
                    j1,
                    s0,
                    s1,
                    &mut terms0,
                    &mut terms1,
                    &mut sup0,
                    &mut sup1,
                )?;
            }
        }
        Strategy::Multiset => {
            if !rule.exchangeable() {
                return Err(Error::KernelStructure(
                    "multiset propagation requires an exchangeable kernel".into(),
                ));
            }
            let Children::Iid(child) = children else {
                return Err(Error::InvalidArgument(
                    "multiset propagation requires iid children".into(),
                ));
            };
            for counts in compositions(rule.arity() as u32, rule.input().len()) {
                let coeff = W::multinomial(&counts);
                let mut j0 = coeff.clone();
                let mut j1 = coeff;
                let mut s0 = true;
                let mut s1 = true;
                for (letter, &c) in counts.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    j0 = j0.mul(&child.p0[letter].powi(c));
                    j1 = j1.mul(&child.p1[letter].powi(c));
                    s0 &= child.support0[letter];
                    s1 &= child.support1[letter];
                }
                feed(
                    rule.multiset_row(&counts),
                    j0,
                    j1,
                    s0,
                    s1,
                    &mut terms0,
                    &mut terms1,
                    &mut sup0,
                    &mut sup1,
                )?;
            }
        }
    }

    let collapse = |terms: Vec<Vec<W>>, sup: &[bool]| -> Vec<W> {
        terms
            .into_iter()
            .zip(sup.iter())
            .map(|(t, &s)| if s { W::sum(t) } else { W::zero() })
            .collect()
    };
    let p0 = collapse(terms0, &sup0);
    let p1 = collapse(terms1, &sup1);
    Ok((p0, p1, sup0, sup1))
}

/// All count vectors over `bins` letters summing to `total`, in a fixed
/// lexicographic order (first bin descending).
pub(crate) fn compositions(total: u32, bins: usize) -> Vec<Vec<u32>> {
    fn rec(total: u32, bins: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if bins == 1 {
            let mut v = prefix.clone();
            v.push(total);
            out.push(v);
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            rec(total - first, bins - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, bins, &mut Vec::new(), &mut out);
    out
}

/// Level-0 distribution: P_s(mu) = sum_x p_s(x) K(mu | x).
pub fn leaf_distribution<W: Weight>(
    channel: &ChannelSpec,
    leaf_rule: &StochasticKernel,
) -> Result<LevelDistribution<W>> {
    if leaf_rule.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            got: leaf_rule.arity(),
        });
    }
    if leaf_rule.input() != channel.signals() {
        return Err(Error::AlphabetMismatch(format!(
            "leaf rule consumes {}, channel emits {}",
            leaf_rule.input(),
            channel.signals()
        )));
    }
    let n_out = leaf_rule.output().len();
    let mut terms0: Vec<Vec<W>> = vec![Vec::new(); n_out];
    let mut terms1: Vec<Vec<W>> = vec![Vec::new(); n_out];
    let mut sup0 = vec![false; n_out];
    let mut sup1 = vec![false; n_out];
    for x in 0..channel.signals().len() {
        let w0 = W::from_prob(channel.signal_prob(0, x))?;
        let w1 = W::from_prob(channel.signal_prob(1, x))?;
        for (out, p) in leaf_rule.row(&[x]).iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let pw = W::from_prob(p)?;
            terms0[out].push(w0.mul(&pw));
            terms1[out].push(w1.mul(&pw));
            if channel.signal_prob(0, x).is_positive() {
                sup0[out] = true;
            }
            if channel.signal_prob(1, x).is_positive() {
                sup1[out] = true;
            }
        }
    }
    let p0 = terms0.into_iter().map(W::sum).collect();
    let p1 = terms1.into_iter().map(W::sum).collect();
    Ok(LevelDistribution {
        level: 0,
        alphabet: leaf_rule.output().clone(),
        p0,
        p1,
        support0: sup0,
        support1: sup1,
    })
}

/// One propagation step with an explicit strategy.
pub fn propagate_level_with<W: Weight>(
    dist: &LevelDistribution<W>,
    rule: &StochasticKernel,
    strategy: Strategy,
) -> Result<LevelDistribution<W>> {
    let (p0, p1, support0, support1) = convolve(&Children::Iid(dist), rule, strategy)?;
    Ok(LevelDistribution {
        level: dist.level + 1,
        alphabet: rule.output().clone(),
        p0,
        p1,
        support0,
        support1,
    })
}

/// One propagation step; picks the multiset fast path for exchangeable rules
/// on the float carrier, and plain dense enumeration on the exact carrier so
/// the two engines do not share a code path.
pub fn propagate_level<W: Weight>(
    dist: &LevelDistribution<W>,
    rule: &StochasticKernel,
) -> Result<LevelDistribution<W>> {
    let strategy = if !W::EXACT && rule.exchangeable() {
        Strategy::Multiset
    } else {
        Strategy::Dense
    };
    propagate_level_with(dist, rule, strategy)
}

fn mix_error<W: Weight>(p0_err: &W, p1_err: &W, prior: &[Prob; 2]) -> Result<W> {
    let w0 = W::from_prob(&prior[0])?;
    let w1 = W::from_prob(&prior[1])?;
    Ok(W::sum(vec![w0.mul(p0_err), w1.mul(p1_err)]))
}

/// Root decision errors from iid children at level t-1.
pub fn root_error<W: Weight>(
    children: &LevelDistribution<W>,
    root_rule: &StochasticKernel,
    prior: &[Prob; 2],
) -> Result<RootError<W>> {
    root_error_inner(&Children::Iid(children), root_rule, prior)
}

/// Root decision errors from per-child distributions (node-dependent trees).
pub fn root_error_per_child<W: Weight>(
    children: &[LevelDistribution<W>],
    root_rule: &StochasticKernel,
    prior: &[Prob; 2],
) -> Result<RootError<W>> {
    root_error_inner(&Children::PerChild(children), root_rule, prior)
}

fn root_error_inner<W: Weight>(
    children: &Children<'_, W>,
    root_rule: &StochasticKernel,
    prior: &[Prob; 2],
) -> Result<RootError<W>> {
    if !root_rule.output().is_binary_form() {
        return Err(Error::AlphabetMismatch(format!(
            "root rule must decide in {{0, 1}}, got {}",
            root_rule.output()
        )));
    }
    let strategy = if !W::EXACT && root_rule.exchangeable() && matches!(children, Children::Iid(_))
    {
        Strategy::Multiset
    } else {
        Strategy::Dense
    };
    let (p0, p1, _, _) = convolve(children, root_rule, strategy)?;
    let p0_err = p0[1].clone();
    let p1_err = p1[0].clone();
    let pe = mix_error(&p0_err, &p1_err, prior)?;
    Ok(RootError { p0_err, p1_err, pe })
}

fn rule_ids(assignment: &RuleAssignment) -> Vec<(String, String)> {
    match assignment {
        RuleAssignment::Oblivious { rules, .. } => vec![
            ("internal".into(), rules.internal.fingerprint_hex()),
            ("leaf".into(), rules.leaf.fingerprint_hex()),
            ("root".into(), rules.root.fingerprint_hex()),
        ],
        RuleAssignment::LevelHomogeneous {
            leaf,
            internal,
            root,
            ..
        } => {
            let mut ids = vec![("leaf".into(), leaf.fingerprint_hex())];
            for (i, rule) in internal.iter().enumerate() {
                ids.push((format!("internal_{}", i + 1), rule.fingerprint_hex()));
            }
            ids.push(("root".into(), root.fingerprint_hex()));
            ids
        }
        RuleAssignment::PerNode { rules, .. } => {
            let mut bytes = Vec::new();
            for ((level, index), rule) in rules {
                bytes.extend_from_slice(&(*level as u64).to_le_bytes());
                bytes.extend_from_slice(&(*index as u64).to_le_bytes());
                bytes.extend_from_slice(&rule.fingerprint().to_le_bytes());
            }
            vec![("assignment".into(), format!("{:016x}", fnv64(&bytes)))]
        }
    }
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Full run: per-level distributions for tau = 0..t-1 plus the root errors.
///
/// Node-oblivious and level-homogeneous assignments use the single-
/// distribution recurrence. Per-node assignments evaluate one distribution
/// pair per node bottom-up, memoizing on the (level, rule-subtree) content
/// hash, and record the leftmost node of each level in the trace.
pub fn run<W: Weight>(
    assignment: &RuleAssignment,
    channel: &ChannelSpec,
    meta: &RunMeta,
    budget: &EngineBudget,
) -> Result<RunTrace<W>> {
    assignment.validate()?;
    let (k, t) = (assignment.k(), assignment.t());
    let engine = if W::EXACT { "rational" } else { "float" };
    let config = TraceConfig {
        scheme: meta.scheme.clone(),
        engine: engine.into(),
        k,
        t,
        m: assignment.message_alphabet().len(),
        delta: meta.delta.clone(),
        prior0: channel.prior()[0].clone(),
        quantizer: meta.quantizer,
        rule_ids: rule_ids(assignment),
    };

    match assignment {
        RuleAssignment::Oblivious { .. } | RuleAssignment::LevelHomogeneous { .. } => {
            let mut levels = Vec::with_capacity(t);
            levels.push(leaf_distribution::<W>(channel, assignment.rule_at(0, 0))?);
            for level in 1..t {
                let next = propagate_level(&levels[level - 1], assignment.rule_at(level, 0))?;
                levels.push(next);
            }
            let root = root_error(&levels[t - 1], assignment.rule_at(t, 0), channel.prior())?;
            Ok(RunTrace {
                config,
                levels,
                root,
            })
        }
        RuleAssignment::PerNode { .. } => {
            if assignment.node_count() > budget.max_tree_nodes {
                return Err(Error::BudgetExceeded(format!(
                    "per-node tree has {} nodes, budget allows {}",
                    assignment.node_count(),
                    budget.max_tree_nodes
                )));
            }
            let mut memo: HashMap<u64, LevelDistribution<W>> = HashMap::new();
            let mut fingerprints: HashMap<(usize, usize), u64> = HashMap::new();
            for level in 0..t {
                for index in 0..assignment.nodes_at_level(level) {
                    let rule = assignment.rule_at(level, index);
                    let mut bytes = Vec::new();
                    bytes.extend_from_slice(&(level as u64).to_le_bytes());
                    bytes.extend_from_slice(&rule.fingerprint().to_le_bytes());
                    if level > 0 {
                        for j in 0..k {
                            let child_fp = fingerprints[&(level - 1, index * k + j)];
                            bytes.extend_from_slice(&child_fp.to_le_bytes());
                        }
                    }
                    let fp = fnv64(&bytes);
                    fingerprints.insert((level, index), fp);
                    if memo.contains_key(&fp) {
                        continue;
                    }
                    let dist = if level == 0 {
                        leaf_distribution::<W>(channel, rule)?
                    } else {
                        let children: Vec<LevelDistribution<W>> = (0..k)
                            .map(|j| memo[&fingerprints[&(level - 1, index * k + j)]].clone())
                            .collect();
                        let (p0, p1, support0, support1) =
                            convolve(&Children::PerChild(&children), rule, Strategy::Dense)?;
                        LevelDistribution {
                            level,
                            alphabet: rule.output().clone(),
                            p0,
                            p1,
                            support0,
                            support1,
                        }
                    };
                    memo.insert(fp, dist);
                }
            }
            let levels: Vec<LevelDistribution<W>> = (0..t)
                .map(|level| memo[&fingerprints[&(level, 0)]].clone())
                .collect();
            let root_children: Vec<LevelDistribution<W>> = (0..k)
                .map(|j| memo[&fingerprints[&(t - 1, j)]].clone())
                .collect();
            let root =
                root_error_per_child(&root_children, assignment.rule_at(t, 0), channel.prior())?;
            Ok(RunTrace {
                config,
                levels,
                root,
            })
        }
    }
}

/// Float-engine run (log-domain f64).
pub fn run_float(
    assignment: &RuleAssignment,
    channel: &ChannelSpec,
    meta: &RunMeta,
    budget: &EngineBudget,
) -> Result<RunTrace<LogProb<f64>>> {
    run(assignment, channel, meta, budget)
}

/// Exact-rational oracle run. Requires every channel and rule probability to
/// have been supplied as a rational, and enforces the rational budget.
pub fn run_exact_rational(
    assignment: &RuleAssignment,
    channel: &ChannelSpec,
    meta: &RunMeta,
    budget: &EngineBudget,
) -> Result<RunTrace<BigRational>> {
    if !channel.all_rational() {
        return Err(Error::NonRationalInput(
            "channel probabilities include floats".into(),
        ));
    }
    if !assignment.all_rational() {
        return Err(Error::NonRationalInput(
            "rule probabilities include floats".into(),
        ));
    }
    if assignment.t() > budget.rational_max_t {
        return Err(Error::BudgetExceeded(format!(
            "exact engine capped at t = {}, requested {}",
            budget.rational_max_t,
            assignment.t()
        )));
    }
    let rows = assignment
        .message_alphabet()
        .len()
        .checked_pow(assignment.k() as u32)
        .unwrap_or(usize::MAX);
    if rows > budget.rational_max_rows {
        return Err(Error::BudgetExceeded(format!(
            "exact engine capped at {} kernel rows, requested {rows}",
            budget.rational_max_rows
        )));
    }
    run(assignment, channel, meta, budget)
}

/// Message distribution of every tree node, keyed by (level, index); the root
/// entry at level t carries the decision distribution over {0, 1}.
pub fn node_distributions<W: Weight>(
    assignment: &RuleAssignment,
    channel: &ChannelSpec,
    budget: &EngineBudget,
) -> Result<std::collections::BTreeMap<(usize, usize), LevelDistribution<W>>> {
    assignment.validate()?;
    if assignment.node_count() > budget.max_tree_nodes {
        return Err(Error::BudgetExceeded(format!(
            "tree has {} nodes, budget allows {}",
            assignment.node_count(),
            budget.max_tree_nodes
        )));
    }
    let (k, t) = (assignment.k(), assignment.t());
    let mut out = std::collections::BTreeMap::new();
    for level in 0..=t {
        for index in 0..assignment.nodes_at_level(level) {
            let rule = assignment.rule_at(level, index);
            let dist = if level == 0 {
                leaf_distribution::<W>(channel, rule)?
            } else {
                let children: Vec<LevelDistribution<W>> = (0..k)
                    .map(|j| {
                        out.get(&(level - 1, index * k + j))
                            .cloned()
                            .expect("child computed")
                    })
                    .collect();
                let (p0, p1, support0, support1) =
                    convolve(&Children::PerChild(&children), rule, Strategy::Dense)?;
                LevelDistribution {
                    level,
                    alphabet: rule.output().clone(),
                    p0,
                    p1,
                    support0,
                    support1,
                }
            };
            out.insert((level, index), dist);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_bsc_channel;
    use crate::schemes;
    use crate::LogProb64;
    use num_rational::Rational64;
    use num_traits::One;

    fn bsc(delta: f64) -> ChannelSpec {
        make_bsc_channel(Prob::from_f64(delta).unwrap(), Prob::half()).unwrap()
    }

    fn bsc_exact(num: i64, den: i64) -> ChannelSpec {
        make_bsc_channel(Prob::from_ratio(num, den).unwrap(), Prob::half()).unwrap()
    }

    #[test]
    fn quantizer_leaf_distribution_m3() {
        let ch = bsc(0.1);
        let leaf = schemes::quantizer_leaf_rule(3).unwrap();
        let d = leaf_distribution::<LogProb64>(&ch, &leaf).unwrap();
        // letters (-1, 0, 1): P0 = (0.9, 0, 0.1)
        assert!((d.p0[0].ln_value() - 0.9f64.ln()).abs() < 1e-15);
        assert!(d.p0[1].is_zero());
        assert!((d.p0[2].ln_value() - 0.1f64.ln()).abs() < 1e-15);
        assert_eq!(d.support0, vec![true, false, true]);
        assert_eq!(d.support1, vec![true, false, true]);
        d.validate().unwrap();
    }

    #[test]
    fn identity_leaf_distribution() {
        let ch = bsc(0.1);
        let d = leaf_distribution::<LogProb64>(&ch, &schemes::identity_leaf_rule()).unwrap();
        assert!((d.p0[0].ln_value() - 0.9f64.ln()).abs() < 1e-15);
        assert!((d.p1[0].ln_value() - 0.1f64.ln()).abs() < 1e-15);
        assert!(d.full_support(0) && d.full_support(1));
    }

    #[test]
    fn constant_leaf_is_a_point_mass_under_both_hypotheses() {
        let ch = bsc(0.1);
        let b = Alphabet::binary();
        let leaf = schemes::fixture_constant_rule(1, b.clone(), b, 1).unwrap();
        let d = leaf_distribution::<LogProb64>(&ch, &leaf).unwrap();
        assert!(d.p0[0].is_zero() && d.p1[0].is_zero());
        assert!(d.p0[1].ln_value().abs() < 1e-12);
        assert!(d.p1[1].ln_value().abs() < 1e-12);
        assert_eq!(d.support0, vec![false, true]);
    }

    #[test]
    fn fair_tie_majority_is_a_fixed_point() {
        let ch = bsc(0.1);
        let d0 = leaf_distribution::<LogProb64>(&ch, &schemes::identity_leaf_rule()).unwrap();
        let rule = schemes::majority_rule(2).unwrap();
        let d1 = propagate_level(&d0, &rule).unwrap();
        // p^2 + p(1-p) = p on both letters
        for letter in 0..2 {
            assert!((d1.p0[letter].ln_value() - d0.p0[letter].ln_value()).abs() < 1e-12);
            assert!((d1.p1[letter].ln_value() - d0.p1[letter].ln_value()).abs() < 1e-12);
        }
    }

    #[test]
    fn strict_majority3_level_one() {
        let ch = bsc(0.1);
        let d0 = leaf_distribution::<LogProb64>(&ch, &schemes::identity_leaf_rule()).unwrap();
        let rule = schemes::majority_rule(3).unwrap();
        let d1 = propagate_level(&d0, &rule).unwrap();
        // 0.1^3 + 3 * 0.1^2 * 0.9 = 0.028
        assert!((d1.p0[1].ln_value() - 0.028f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn point_mass_through_deterministic_rule() {
        let b = Alphabet::binary();
        let d = LevelDistribution::<LogProb64> {
            level: 0,
            alphabet: b.clone(),
            p0: vec![LogProb64::one(), <LogProb64 as Weight>::zero()],
            p1: vec![LogProb64::one(), <LogProb64 as Weight>::zero()],
            support0: vec![true, false],
            support1: vec![true, false],
        };
        let rule = schemes::fixture_or_rule(2).unwrap();
        let out = propagate_level(&d, &rule).unwrap();
        // f(0, 0) = 0
        assert_eq!(out.p0[0], LogProb64::one());
        assert!(out.p0[1].is_zero());
        assert_eq!(out.support0, vec![true, false]);
    }

    #[test]
    fn fair_tie_root_error_at_depth_one() {
        let ch = bsc(0.1);
        let d0 = leaf_distribution::<LogProb64>(&ch, &schemes::identity_leaf_rule()).unwrap();
        let root = schemes::majority_rule(2).unwrap();
        let err = root_error(&d0, &root, ch.prior()).unwrap();
        assert!((err.pe.ln_value() - 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_children_make_no_errors() {
        let b = Alphabet::binary();
        let d = LevelDistribution::<LogProb64> {
            level: 0,
            alphabet: b,
            p0: vec![LogProb64::one(), <LogProb64 as Weight>::zero()],
            p1: vec![<LogProb64 as Weight>::zero(), LogProb64::one()],
            support0: vec![true, false],
            support1: vec![false, true],
        };
        let root = schemes::majority_rule(3).unwrap();
        let ch = bsc(0.1);
        let err = root_error(&d, &root, ch.prior()).unwrap();
        assert!(err.pe.is_zero());
    }

    #[test]
    fn constant_root_errs_with_the_ignored_prior_mass() {
        let ch =
            make_bsc_channel(Prob::from_f64(0.1).unwrap(), Prob::from_f64(0.3).unwrap()).unwrap();
        let d0 = leaf_distribution::<LogProb64>(&ch, &schemes::identity_leaf_rule()).unwrap();
        let b = Alphabet::binary();
        let root = schemes::fixture_constant_rule(2, b.clone(), b, 0).unwrap();
        let err = root_error(&d0, &root, ch.prior()).unwrap();
        // always deciding 0 errs exactly when s = 1
        assert!((err.pe.ln_value() - 0.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn depth_one_run_is_leaf_plus_root() {
        let ch = bsc(0.1);
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(3).unwrap(), 3, 1).unwrap();
        let trace = run_float(
            &assignment,
            &ch,
            &RunMeta::named("majority"),
            &EngineBudget::default(),
        )
        .unwrap();
        assert_eq!(trace.levels.len(), 1);
        let d0 = leaf_distribution::<LogProb64>(&ch, &schemes::identity_leaf_rule()).unwrap();
        let direct = root_error(&d0, &schemes::majority_rule(3).unwrap(), ch.prior()).unwrap();
        assert_eq!(trace.root.pe, direct.pe);
        trace.validate(ch.prior()).unwrap();
        assert!((trace.log_pe() - 0.028f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fair_tie_fixed_point_holds_at_depth_three() {
        let ch = bsc(0.1);
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 3).unwrap();
        let trace = run_float(
            &assignment,
            &ch,
            &RunMeta::named("majority"),
            &EngineBudget::default(),
        )
        .unwrap();
        assert!((trace.log_pe() - 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exact_majority3_level_one_is_7_over_250() {
        let ch = bsc_exact(1, 10);
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(3).unwrap(), 3, 2).unwrap();
        let trace = run_exact_rational(
            &assignment,
            &ch,
            &RunMeta::named("majority"),
            &EngineBudget::default(),
        )
        .unwrap();
        let expect = BigRational::new(7.into(), 250.into());
        assert_eq!(trace.levels[1].p0[1], expect);
        trace.validate(ch.prior()).unwrap();
    }

    #[test]
    fn exact_rows_sum_to_exactly_one() {
        let ch = bsc_exact(1, 10);
        let assignment =
            RuleAssignment::oblivious(schemes::quantizer_vector(3, 2).unwrap(), 2, 4).unwrap();
        let trace = run_exact_rational(
            &assignment,
            &ch,
            &RunMeta::named("quantizer"),
            &EngineBudget::default(),
        )
        .unwrap();
        for level in &trace.levels {
            let total: BigRational = level
                .p0
                .iter()
                .cloned()
                .fold(BigRational::from_integer(0.into()), |a, b| a + b);
            assert!(total.is_one());
        }
    }

    #[test]
    fn float_engine_tracks_exact_oracle() {
        let ch = bsc_exact(1, 10);
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 4).unwrap();
        let meta = RunMeta::named("majority");
        let budget = EngineBudget::default();
        let float = run_float(&assignment, &ch, &meta, &budget).unwrap();
        let exact = run_exact_rational(&assignment, &ch, &meta, &budget).unwrap();
        let lf = float.log_pe();
        let lr = exact.log_pe();
        assert!(((lf - lr) / lr).abs() < 1e-9, "float {lf} vs exact {lr}");
    }

    #[test]
    fn exact_engine_rejects_float_inputs_and_deep_horizons() {
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 4).unwrap();
        let meta = RunMeta::named("majority");
        let budget = EngineBudget::default();
        let float_ch = bsc(0.1);
        assert!(matches!(
            run_exact_rational(&assignment, &float_ch, &meta, &budget),
            Err(Error::NonRationalInput(_))
        ));
        let deep = RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 7).unwrap();
        assert!(matches!(
            run_exact_rational(&deep, &bsc_exact(1, 10), &meta, &budget),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn multiset_and_dense_agree_on_the_quantizer() {
        let ch = bsc(0.02);
        let leaf = schemes::quantizer_leaf_rule(3).unwrap();
        let rule = schemes::quantizer_internal_rule(3, 3).unwrap();
        let mut dense = leaf_distribution::<LogProb64>(&ch, &leaf).unwrap();
        let mut fast = dense.clone();
        for _ in 0..4 {
            dense = propagate_level_with(&dense, &rule, Strategy::Dense).unwrap();
            fast = propagate_level_with(&fast, &rule, Strategy::Multiset).unwrap();
            for letter in 0..3 {
                let a = dense.p0[letter].ln_value();
                let b = fast.p0[letter].ln_value();
                assert!(
                    (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                    "dense {a} vs multiset {b}"
                );
            }
        }
    }

    #[test]
    fn permutation_of_child_slots_preserves_root_error() {
        // projection onto child 1 vs child 2: same error with iid children
        let b = Alphabet::binary();
        let proj1 = StochasticKernel::deterministic_fn(2, b.clone(), b.clone(), |t| t[0]).unwrap();
        let proj2 = StochasticKernel::deterministic_fn(2, b.clone(), b.clone(), |t| t[1]).unwrap();
        let root = schemes::majority_rule(2).unwrap();
        let ch = bsc(0.1);
        let mk = |internal: StochasticKernel| {
            let rv = crate::model::RuleVector::new(
                internal,
                schemes::identity_leaf_rule(),
                root.clone(),
            )
            .unwrap();
            let a = RuleAssignment::oblivious(rv, 2, 3).unwrap();
            run_float(
                &a,
                &ch,
                &RunMeta::named("projection"),
                &EngineBudget::default(),
            )
            .unwrap()
            .log_pe()
        };
        let a = mk(proj1);
        let b2 = mk(proj2);
        assert!((a - b2).abs() < 1e-12);
    }

    #[test]
    fn label_swap_symmetry_is_exact_for_complement_symmetric_rules() {
        // symmetric channel + label-complement-symmetric rules: the H0 trace
        // read backwards equals the H1 trace, exactly in the rational engine
        let ch = bsc_exact(1, 50);
        let assignment =
            RuleAssignment::oblivious(schemes::majority_vector(2).unwrap(), 2, 5).unwrap();
        let trace = run_exact_rational(
            &assignment,
            &ch,
            &RunMeta::named("majority"),
            &EngineBudget::default(),
        )
        .unwrap();
        for level in &trace.levels {
            let m = level.alphabet.len();
            for letter in 0..m {
                assert_eq!(level.p0[letter], level.p1[m - 1 - letter]);
            }
        }
    }

    #[test]
    fn per_node_run_matches_oblivious_when_rules_agree() {
        let ch = bsc(0.1);
        let (k, t) = (2usize, 2usize);
        let rv = schemes::majority_vector(k).unwrap();
        let oblivious = RuleAssignment::oblivious(rv.clone(), k, t).unwrap();
        let mut rules = std::collections::BTreeMap::new();
        for level in 0..=t {
            for index in 0..k.pow((t - level) as u32) {
                let rule = match level {
                    0 => rv.leaf.clone(),
                    l if l == t => rv.root.clone(),
                    _ => rv.internal.clone(),
                };
                rules.insert((level, index), rule);
            }
        }
        let per_node = RuleAssignment::per_node(k, t, rules).unwrap();
        let meta = RunMeta::named("majority");
        let budget = EngineBudget::default();
        let a = run_float(&oblivious, &ch, &meta, &budget).unwrap();
        let b = run_float(&per_node, &ch, &meta, &budget).unwrap();
        assert!((a.log_pe() - b.log_pe()).abs() < 1e-12);
        assert_eq!(a.levels.len(), b.levels.len());
    }

    #[test]
    fn quantizer_depth_ten_beats_the_guaranteed_exponent() {
        let ch = bsc_exact(1, 50); // delta = 0.02 < delta0(3, 2)
        let assignment =
            RuleAssignment::oblivious(schemes::quantizer_vector(3, 2).unwrap(), 2, 10).unwrap();
        let budget = EngineBudget {
            rational_max_t: 10,
            ..Default::default()
        };
        let params = schemes::QuantizerParams::new(3, 2).unwrap();
        let meta = RunMeta::quantizer(&params, Prob::from_ratio(1, 50).unwrap());
        let trace = run_exact_rational(&assignment, &ch, &meta, &budget).unwrap();
        let guarantee = (1.0 / 3.0) * (4.0f64 / 3.0).powi(10); // ~5.92
        assert!(-trace.log_pe() >= guarantee);
        trace.validate(ch.prior()).unwrap();
    }

    #[test]
    fn composition_count_matches_stars_and_bars() {
        let c = compositions(3, 3);
        assert_eq!(c.len(), 10);
        assert!(c.iter().all(|v| v.iter().sum::<u32>() == 3));
        let mut sorted = c.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn trace_meta_marks_quantizer_guarantee() {
        let params = schemes::QuantizerParams::new(3, 2).unwrap();
        let inside = RunMeta::quantizer(&params, Prob::from_ratio(1, 50).unwrap());
        assert_eq!(inside.quantizer.unwrap().within_guarantee, Some(true));
        let outside = RunMeta::quantizer(&params, Prob::from_f64(0.1).unwrap());
        assert_eq!(outside.quantizer.unwrap().within_guarantee, Some(false));
        let _ = Rational64::one();
    }
}
