//! Rule vectors and per-node rule assignments on the finite k-ary tree.
//!
//! Tree addressing: leaves live at level 0, the root at level t. Node
//! (level, index) has children (level-1, index*k + j) for j in 0..k.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::alphabet::Alphabet;
use crate::model::kernel::StochasticKernel;

/// Node-oblivious rule triple: one internal rule f (M^k -> M), one leaf rule
/// g (X -> M), one root rule h (M^k -> {0,1}).
#[derive(Clone, Debug, PartialEq)]
pub struct RuleVector {
    pub internal: StochasticKernel,
    pub leaf: StochasticKernel,
    pub root: StochasticKernel,
}

impl RuleVector {
    pub fn new(
        internal: StochasticKernel,
        leaf: StochasticKernel,
        root: StochasticKernel,
    ) -> Result<Self> {
        if leaf.arity() != 1 {
            return Err(Error::ArityMismatch {
                expected: 1,
                got: leaf.arity(),
            });
        }
        if internal.arity() != root.arity() {
            return Err(Error::ArityMismatch {
                expected: internal.arity(),
                got: root.arity(),
            });
        }
        let messages = internal.input();
        if internal.output() != messages {
            return Err(Error::AlphabetMismatch(format!(
                "internal rule maps {} to {}",
                messages,
                internal.output()
            )));
        }
        if leaf.output() != messages {
            return Err(Error::AlphabetMismatch(format!(
                "leaf rule emits {}, internal rule consumes {}",
                leaf.output(),
                messages
            )));
        }
        if root.input() != messages {
            return Err(Error::AlphabetMismatch(format!(
                "root rule consumes {}, messages are {}",
                root.input(),
                messages
            )));
        }
        if !root.output().is_binary_form() {
            return Err(Error::AlphabetMismatch(format!(
                "root rule must decide in {{0, 1}}, got {}",
                root.output()
            )));
        }
        Ok(RuleVector {
            internal,
            leaf,
            root,
        })
    }

    pub fn messages(&self) -> &Alphabet {
        self.internal.input()
    }

    pub fn arity(&self) -> usize {
        self.internal.arity()
    }

    pub fn all_rational(&self) -> bool {
        self.internal.all_rational() && self.leaf.all_rational() && self.root.all_rational()
    }
}

/// How rules are attached to the tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignmentMode {
    Oblivious,
    LevelHomogeneous,
    PerNode,
}

#[derive(Clone, Debug)]
pub enum RuleAssignment {
    /// Same (f, g, h) everywhere.
    Oblivious {
        k: usize,
        t: usize,
        rules: RuleVector,
    },
    /// One leaf rule, one internal rule per level 1..t-1, one root rule.
    LevelHomogeneous {
        k: usize,
        t: usize,
        leaf: StochasticKernel,
        internal: Vec<StochasticKernel>,
        root: StochasticKernel,
    },
    /// Every node carries its own rule, keyed by (level, index).
    PerNode {
        k: usize,
        t: usize,
        rules: BTreeMap<(usize, usize), StochasticKernel>,
    },
}

impl RuleAssignment {
    pub fn oblivious(rules: RuleVector, k: usize, t: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "branching factor {k} must be at least 2"
            )));
        }
        if t < 1 {
            return Err(Error::InvalidArgument(
                "tree depth must be at least 1".into(),
            ));
        }
        if rules.arity() != k {
            return Err(Error::ArityMismatch {
                expected: k,
                got: rules.arity(),
            });
        }
        Ok(RuleAssignment::Oblivious { k, t, rules })
    }

    pub fn level_homogeneous(
        k: usize,
        t: usize,
        leaf: StochasticKernel,
        internal: Vec<StochasticKernel>,
        root: StochasticKernel,
    ) -> Result<Self> {
        if internal.len() + 1 != t {
            return Err(Error::InvalidArgument(format!(
                "need {} internal levels for depth {t}, got {}",
                t - 1,
                internal.len()
            )));
        }
        let assignment = RuleAssignment::LevelHomogeneous {
            k,
            t,
            leaf,
            internal,
            root,
        };
        assignment.validate()?;
        Ok(assignment)
    }

    pub fn per_node(
        k: usize,
        t: usize,
        rules: BTreeMap<(usize, usize), StochasticKernel>,
    ) -> Result<Self> {
        let assignment = RuleAssignment::PerNode { k, t, rules };
        assignment.validate()?;
        Ok(assignment)
    }

    pub fn mode(&self) -> AssignmentMode {
        match self {
            RuleAssignment::Oblivious { .. } => AssignmentMode::Oblivious,
            RuleAssignment::LevelHomogeneous { .. } => AssignmentMode::LevelHomogeneous,
            RuleAssignment::PerNode { .. } => AssignmentMode::PerNode,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            RuleAssignment::Oblivious { k, .. }
            | RuleAssignment::LevelHomogeneous { k, .. }
            | RuleAssignment::PerNode { k, .. } => *k,
        }
    }

    pub fn t(&self) -> usize {
        match self {
            RuleAssignment::Oblivious { t, .. }
            | RuleAssignment::LevelHomogeneous { t, .. }
            | RuleAssignment::PerNode { t, .. } => *t,
        }
    }

    /// Rule at tree node (level, index).
    pub fn rule_at(&self, level: usize, index: usize) -> &StochasticKernel {
        match self {
            RuleAssignment::Oblivious { t, rules, .. } => {
                if level == 0 {
                    &rules.leaf
                } else if level == *t {
                    &rules.root
                } else {
                    &rules.internal
                }
            }
            RuleAssignment::LevelHomogeneous {
                t,
                leaf,
                internal,
                root,
                ..
            } => {
                if level == 0 {
                    leaf
                } else if level == *t {
                    root
                } else {
                    &internal[level - 1]
                }
            }
            RuleAssignment::PerNode { rules, .. } => &rules[&(level, index)],
        }
    }

    pub fn nodes_at_level(&self, level: usize) -> usize {
        self.k().pow((self.t() - level) as u32)
    }

    /// Total node count including leaves and root.
    pub fn node_count(&self) -> u64 {
        let k = self.k() as u64;
        let mut total = 0u64;
        let mut width = 1u64;
        for _ in 0..=self.t() {
            total = total.saturating_add(width);
            width = width.saturating_mul(k);
        }
        total
    }

    pub fn message_alphabet(&self) -> &Alphabet {
        match self {
            RuleAssignment::Oblivious { rules, .. } => rules.messages(),
            RuleAssignment::LevelHomogeneous { root, .. } => root.input(),
            RuleAssignment::PerNode { t, rules, .. } => rules[&(*t, 0)].input(),
        }
    }

    pub fn all_rational(&self) -> bool {
        match self {
            RuleAssignment::Oblivious { rules, .. } => rules.all_rational(),
            RuleAssignment::LevelHomogeneous {
                leaf,
                internal,
                root,
                ..
            } => {
                leaf.all_rational()
                    && internal.iter().all(StochasticKernel::all_rational)
                    && root.all_rational()
            }
            RuleAssignment::PerNode { rules, .. } => {
                rules.values().all(StochasticKernel::all_rational)
            }
        }
    }

    /// Checks that every tree node has exactly one rule of the right arity and
    /// that alphabets chain: leaf output -> internal input/output -> root
    /// input -> binary decision.
    pub fn validate(&self) -> Result<()> {
        let (k, t) = (self.k(), self.t());
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "branching factor {k} must be at least 2"
            )));
        }
        if t < 1 {
            return Err(Error::InvalidArgument(
                "tree depth must be at least 1".into(),
            ));
        }
        if let RuleAssignment::PerNode { rules, .. } = self {
            let mut expected = 0usize;
            for level in 0..=t {
                expected += k.pow((t - level) as u32);
            }
            if rules.len() != expected {
                return Err(Error::InvalidArgument(format!(
                    "per-node assignment has {} rules, tree has {expected} nodes",
                    rules.len()
                )));
            }
            for level in 0..=t {
                for index in 0..k.pow((t - level) as u32) {
                    if !rules.contains_key(&(level, index)) {
                        return Err(Error::InvalidArgument(format!(
                            "missing rule for node ({level}, {index})"
                        )));
                    }
                }
            }
        }
        let messages = self.message_alphabet().clone();
        for level in 0..=t {
            let width = k.pow((t - level) as u32);
            for index in 0..width {
                let rule = self.rule_at(level, index);
                let expected_arity = if level == 0 { 1 } else { k };
                if rule.arity() != expected_arity {
                    return Err(Error::ArityMismatch {
                        expected: expected_arity,
                        got: rule.arity(),
                    });
                }
                if level == 0 {
                    if rule.output() != &messages {
                        return Err(Error::AlphabetMismatch(format!(
                            "leaf ({level}, {index}) emits {}, messages are {}",
                            rule.output(),
                            messages
                        )));
                    }
                } else {
                    if rule.input() != &messages {
                        return Err(Error::AlphabetMismatch(format!(
                            "node ({level}, {index}) consumes {}, messages are {}",
                            rule.input(),
                            messages
                        )));
                    }
                    if level == t {
                        if !rule.output().is_binary_form() {
                            return Err(Error::AlphabetMismatch(
                                "root decision alphabet must be {0, 1}".into(),
                            ));
                        }
                    } else if rule.output() != &messages {
                        return Err(Error::AlphabetMismatch(format!(
                            "node ({level}, {index}) emits {}, messages are {}",
                            rule.output(),
                            messages
                        )));
                    }
                }
                if matches!(
                    self,
                    RuleAssignment::Oblivious { .. } | RuleAssignment::LevelHomogeneous { .. }
                ) {
                    break; // one representative per level suffices
                }
            }
        }
        Ok(())
    }
}
