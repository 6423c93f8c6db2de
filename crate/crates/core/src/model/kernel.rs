//! Stochastic kernels: dense row tables mapping input tuples to output
//! distributions. Deterministic rules are point-mass rows. Rows are keyed by
//! the lexicographic rank of the input tuple (child order 1..k), which fixes
//! serialization order once and for all.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::alphabet::Alphabet;
use crate::prob::Prob;

pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticKernel {
    arity: usize,
    input: Alphabet,
    output: Alphabet,
    rows: Vec<Vec<Prob>>,
    exchangeable: bool,
    /// Canonical multiset table for exchangeable kernels: sorted tuple ->
    /// representative row index. Must agree with the dense table; that
    /// agreement is checked at construction.
    multiset_index: Option<BTreeMap<Vec<usize>, usize>>,
}

/// Outcome of `validate`: structural facts about a kernel table.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    pub deterministic: bool,
    pub exchangeable: bool,
    pub row_sum_defects: Vec<RowSumDefect>,
    pub exchangeability_violations: Vec<ExchangeabilityViolation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowSumDefect {
    pub rank: usize,
    pub tuple: String,
    pub sum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeabilityViolation {
    pub rank: usize,
    pub canonical_rank: usize,
}

impl StochasticKernel {
    /// Builds a kernel from dense rows in lexicographic tuple order. When
    /// `exchangeable` is set, permutation invariance is verified over the
    /// full table and the canonical multiset index is stored alongside.
    pub fn from_rows(
        arity: usize,
        input: Alphabet,
        output: Alphabet,
        rows: Vec<Vec<Prob>>,
        exchangeable: bool,
    ) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidArgument(
                "kernel arity must be at least 1".into(),
            ));
        }
        let expected = input.len().checked_pow(arity as u32).ok_or_else(|| {
            Error::InvalidArgument(format!("table size {}^{arity} overflows", input.len()))
        })?;
        if rows.len() != expected {
            let mut missing = Vec::new();
            for rank in rows.len()..expected.min(rows.len() + 4) {
                missing.push(tuple_names(
                    &input,
                    &tuple_of_rank(rank, input.len(), arity),
                ));
            }
            return Err(Error::KernelStructure(format!(
                "expected {expected} rows, got {} (first absent tuples: {})",
                rows.len(),
                missing.join(", ")
            )));
        }
        for (rank, row) in rows.iter().enumerate() {
            if row.len() != output.len() {
                return Err(Error::KernelStructure(format!(
                    "row {rank} has {} entries, output alphabet has {}",
                    row.len(),
                    output.len()
                )));
            }
            check_row_sum(row, rank, &input, arity)?;
        }
        let mut kernel = StochasticKernel {
            arity,
            input,
            output,
            rows,
            exchangeable,
            multiset_index: None,
        };
        if exchangeable {
            let index = kernel.build_multiset_index()?;
            kernel.multiset_index = Some(index);
        }
        Ok(kernel)
    }

    /// Deterministic kernel from an output-choosing function; the
    /// exchangeable flag is detected from the finished table.
    pub fn deterministic_fn(
        arity: usize,
        input: Alphabet,
        output: Alphabet,
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let n = input.len();
        let total = n.pow(arity as u32);
        let mut rows = Vec::with_capacity(total);
        for rank in 0..total {
            let tuple = tuple_of_rank(rank, n, arity);
            let out = f(&tuple);
            if out >= output.len() {
                return Err(Error::KernelStructure(format!(
                    "rule output index {out} outside alphabet of size {}",
                    output.len()
                )));
            }
            let mut row = vec![Prob::zero(); output.len()];
            row[out] = Prob::one();
            rows.push(row);
        }
        Self::from_detected(arity, input, output, rows)
    }

    /// Randomized kernel from a row-producing function; exchangeability is
    /// detected from the finished table.
    pub fn stochastic_fn(
        arity: usize,
        input: Alphabet,
        output: Alphabet,
        f: impl Fn(&[usize]) -> Vec<Prob>,
    ) -> Result<Self> {
        let n = input.len();
        let total = n.pow(arity as u32);
        let mut rows = Vec::with_capacity(total);
        for rank in 0..total {
            rows.push(f(&tuple_of_rank(rank, n, arity)));
        }
        Self::from_detected(arity, input, output, rows)
    }

    fn from_detected(
        arity: usize,
        input: Alphabet,
        output: Alphabet,
        rows: Vec<Vec<Prob>>,
    ) -> Result<Self> {
        let probe = Self::from_rows(arity, input.clone(), output.clone(), rows.clone(), false)?;
        let exchangeable = probe.detect_exchangeable();
        Self::from_rows(arity, input, output, rows, exchangeable)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn exchangeable(&self) -> bool {
        self.exchangeable
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row_by_rank(&self, rank: usize) -> &[Prob] {
        &self.rows[rank]
    }

    pub fn row(&self, tuple: &[usize]) -> &[Prob] {
        &self.rows[self.rank_of(tuple)]
    }

    pub fn rank_of(&self, tuple: &[usize]) -> usize {
        rank_of(tuple, self.input.len())
    }

    pub fn tuple_of_rank(&self, rank: usize) -> Vec<usize> {
        tuple_of_rank(rank, self.input.len(), self.arity)
    }

    /// Representative row for a letter-count vector (exchangeable kernels).
    pub fn multiset_row(&self, counts: &[u32]) -> &[Prob] {
        let index = self
            .multiset_index
            .as_ref()
            .expect("multiset lookup on non-exchangeable kernel");
        let tuple = counts_to_sorted_tuple(counts);
        &self.rows[index[&tuple]]
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|row| is_point_mass(row))
    }

    /// Output index when the row for `tuple` is a point mass.
    pub fn deterministic_output(&self, tuple: &[usize]) -> Option<usize> {
        point_mass_index(self.row(tuple))
    }

    pub fn all_rational(&self) -> bool {
        self.rows.iter().all(|row| row.iter().all(|p| p.is_exact()))
    }

    /// Structural report: row-sum defects, exchangeability violations (against
    /// the canonical sorted-tuple row), and the determinism flag.
    pub fn validate(&self) -> KernelReport {
        let mut row_sum_defects = Vec::new();
        for (rank, row) in self.rows.iter().enumerate() {
            if let Err(sum) = row_sum_defect(row) {
                row_sum_defects.push(RowSumDefect {
                    rank,
                    tuple: tuple_names(&self.input, &self.tuple_of_rank(rank)),
                    sum,
                });
            }
        }
        let mut exchangeability_violations = Vec::new();
        for rank in 0..self.rows.len() {
            let mut tuple = self.tuple_of_rank(rank);
            tuple.sort_unstable();
            let canonical_rank = self.rank_of(&tuple);
            if self.rows[rank] != self.rows[canonical_rank] {
                exchangeability_violations.push(ExchangeabilityViolation {
                    rank,
                    canonical_rank,
                });
            }
        }
        KernelReport {
            deterministic: self.is_deterministic(),
            exchangeable: exchangeability_violations.is_empty(),
            row_sum_defects,
            exchangeability_violations,
        }
    }

    fn detect_exchangeable(&self) -> bool {
        (0..self.rows.len()).all(|rank| {
            let mut tuple = self.tuple_of_rank(rank);
            tuple.sort_unstable();
            self.rows[rank] == self.rows[self.rank_of(&tuple)]
        })
    }

    fn build_multiset_index(&self) -> Result<BTreeMap<Vec<usize>, usize>> {
        let mut index = BTreeMap::new();
        for rank in 0..self.rows.len() {
            let mut tuple = self.tuple_of_rank(rank);
            tuple.sort_unstable();
            let canonical_rank = self.rank_of(&tuple);
            if self.rows[rank] != self.rows[canonical_rank] {
                return Err(Error::KernelStructure(format!(
                    "kernel flagged exchangeable but row {rank} differs from canonical row {canonical_rank}"
                )));
            }
            index.entry(tuple).or_insert(canonical_rank);
        }
        Ok(index)
    }

    /// Stable content hash used as a rule id in reports and as the basis of
    /// subtree memoization keys.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(self.arity as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.input.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.output.len() as u64).to_le_bytes());
        for name in self
            .input
            .label_names()
            .iter()
            .chain(self.output.label_names().iter())
        {
            bytes.extend_from_slice(name.as_bytes());
            bytes.push(0);
        }
        for row in &self.rows {
            for p in row {
                p.push_canonical_bytes(&mut bytes);
                bytes.push(b',');
            }
            bytes.push(b';');
        }
        fnv64(&bytes)
    }

    pub fn fingerprint_hex(&self) -> String {
        format!("{:016x}", self.fingerprint())
    }

    fn with_alphabets(&self, input: Alphabet, output: Alphabet) -> Result<Self> {
        Self::from_rows(
            self.arity,
            input,
            output,
            self.rows.clone(),
            self.exchangeable,
        )
    }
}

/// Order-preserving relabeling between centered and indexed message
/// alphabets. Every kernel side whose labels are in the source form (centered
/// when the target is indexed, indexed when centered) and whose size matches
/// the target is replaced; tables are untouched, so round-trips are exact.
pub fn relabel_centered(kernel: &StochasticKernel, target: &Alphabet) -> Result<StochasticKernel> {
    let source_matches: fn(&Alphabet) -> bool = if target.is_centered_form() {
        Alphabet::is_indexed_form
    } else if target.is_indexed_form() {
        Alphabet::is_centered_form
    } else {
        return Err(Error::InvalidArgument(
            "relabel target must be a centered or indexed alphabet".into(),
        ));
    };
    let map_side = |side: &Alphabet| -> Option<Alphabet> {
        (side.len() == target.len() && source_matches(side)).then(|| target.clone())
    };
    let new_input = map_side(kernel.input());
    let new_output = map_side(kernel.output());
    if new_input.is_none() && new_output.is_none() {
        return Err(Error::AlphabetMismatch(format!(
            "no kernel side of size {} in the source labeling (input {}, output {})",
            target.len(),
            kernel.input(),
            kernel.output()
        )));
    }
    kernel.with_alphabets(
        new_input.unwrap_or_else(|| kernel.input().clone()),
        new_output.unwrap_or_else(|| kernel.output().clone()),
    )
}

pub(crate) fn rank_of(tuple: &[usize], base: usize) -> usize {
    tuple.iter().fold(0, |acc, &digit| {
        debug_assert!(digit < base);
        acc * base + digit
    })
}

pub(crate) fn tuple_of_rank(rank: usize, base: usize, arity: usize) -> Vec<usize> {
    let mut digits = vec![0usize; arity];
    let mut rest = rank;
    for slot in digits.iter_mut().rev() {
        *slot = rest % base;
        rest /= base;
    }
    digits
}

pub(crate) fn counts_to_sorted_tuple(counts: &[u32]) -> Vec<usize> {
    let mut tuple = Vec::new();
    for (letter, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            tuple.push(letter);
        }
    }
    tuple
}

fn tuple_names(alphabet: &Alphabet, tuple: &[usize]) -> String {
    let names: Vec<String> = tuple.iter().map(|&i| alphabet.label_name(i)).collect();
    format!("({})", names.join(","))
}

fn is_point_mass(row: &[Prob]) -> bool {
    point_mass_index(row).is_some()
}

fn point_mass_index(row: &[Prob]) -> Option<usize> {
    let mut hit = None;
    for (i, p) in row.iter().enumerate() {
        if p.is_one() {
            if hit.is_some() {
                return None;
            }
            hit = Some(i);
        } else if !p.is_zero() {
            return None;
        }
    }
    hit
}

/// All-rational rows must sum to exactly 1 (the exact oracle depends on it);
/// rows touching floats get the 1e-12 tolerance.
fn row_sum_defect(row: &[Prob]) -> std::result::Result<(), f64> {
    for p in row {
        if !(0.0..=1.0).contains(&p.to_f64()) {
            return Err(f64::NAN);
        }
    }
    if row.iter().all(|p| p.is_exact()) {
        let mut sum = num_rational::BigRational::from_integer(0.into());
        for p in row {
            sum += p.as_exact().expect("checked exact");
        }
        if sum != num_rational::BigRational::from_integer(1.into()) {
            return Err(num_traits::ToPrimitive::to_f64(&sum).unwrap_or(f64::NAN));
        }
    } else {
        let sum: f64 = row.iter().map(|p| p.to_f64()).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(sum);
        }
    }
    Ok(())
}

fn check_row_sum(row: &[Prob], rank: usize, input: &Alphabet, arity: usize) -> Result<()> {
    row_sum_defect(row).map_err(|sum| {
        Error::KernelStructure(format!(
            "row {} for tuple {} sums to {sum}, expected 1",
            rank,
            tuple_names(input, &tuple_of_rank(rank, input.len(), arity))
        ))
    })
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
