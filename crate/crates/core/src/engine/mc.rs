//! Monte Carlo oracle: simulates the full tree per trial.
//!
//! Randomness is counter-based: every draw is a pure function of
//! (seed, trial, node address, draw slot), so estimates are reproducible for
//! a fixed seed and trials can be evaluated in any order or in parallel
//! without shared state.

use crate::error::{Error, Result};
use crate::model::{ChannelSpec, RuleVector};
use crate::prob::Prob;

use super::EngineBudget;

/// Two-sided 99% normal quantile used for the Wilson interval.
const Z99: f64 = 2.5758293035489004;

/// Stateless keyed generator; `uniform` returns a deterministic value in
/// [0, 1) for each (trial, node, draw) triple.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    pub fn uniform(&self, trial: u64, node: u64, draw: u32) -> f64 {
        let mut z = self.seed ^ 0x6a09e667f3bcc909;
        z = mix64(z ^ trial.wrapping_mul(0x9e3779b97f4a7c15));
        z = mix64(z ^ node.wrapping_mul(0xbf58476d1ce4e5b9));
        z = mix64(z ^ (draw as u64).wrapping_mul(0x94d049bb133111eb));
        (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McEstimate {
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci99_low: f64,
    pub ci99_high: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn covers(&self, p: f64) -> bool {
        self.ci99_low <= p && p <= self.ci99_high
    }
}

/// Wilson score interval at 99% confidence.
pub fn wilson_99(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z99 * Z99;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z99 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

enum RowSampler {
    Point(usize),
    Cdf(Vec<f64>),
}

impl RowSampler {
    fn from_row(row: &[Prob]) -> Self {
        let mut hit = None;
        for (i, p) in row.iter().enumerate() {
            if p.is_one() {
                hit = Some(i);
            } else if !p.is_zero() {
                hit = None;
                break;
            }
        }
        if let Some(i) = hit {
            return RowSampler::Point(i);
        }
        let mut acc = 0.0;
        let cdf = row
            .iter()
            .map(|p| {
                acc += p.to_f64();
                acc
            })
            .collect();
        RowSampler::Cdf(cdf)
    }

    fn sample(&self, u: f64) -> usize {
        match self {
            RowSampler::Point(i) => *i,
            RowSampler::Cdf(cdf) => cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1),
        }
    }
}

fn node_key(level: usize, index: usize) -> u64 {
    ((level as u64) << 40) | index as u64
}

/// Estimates the root error frequency of a node-oblivious scheme by direct
/// simulation, with a deterministic seed contract and a 99% Wilson interval.
pub fn monte_carlo(
    rules: &RuleVector,
    channel: &ChannelSpec,
    k: usize,
    t: usize,
    trials: u64,
    seed: u64,
    budget: &EngineBudget,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if rules.arity() != k {
        return Err(Error::ArityMismatch {
            expected: k,
            got: rules.arity(),
        });
    }
    if t < 1 {
        return Err(Error::InvalidArgument(
            "tree depth must be at least 1".into(),
        ));
    }
    let leaves = (k as u64).checked_pow(t as u32).unwrap_or(u64::MAX);
    if leaves > budget.mc_max_leaves {
        return Err(Error::BudgetExceeded(format!(
            "tree has {leaves} leaves, sampling budget allows {}",
            budget.mc_max_leaves
        )));
    }
    if rules.leaf.input() != channel.signals() {
        return Err(Error::AlphabetMismatch(format!(
            "leaf rule consumes {}, channel emits {}",
            rules.leaf.input(),
            channel.signals()
        )));
    }

    let rng = CounterRng::new(seed);
    let prior0 = channel.prior()[0].to_f64();
    let signal_cdf: [Vec<f64>; 2] = [cdf_of(channel.p0()), cdf_of(channel.p1())];
    let leaf_samplers: Vec<RowSampler> = (0..channel.signals().len())
        .map(|x| RowSampler::from_row(rules.leaf.row(&[x])))
        .collect();
    let internal_samplers: Vec<RowSampler> = (0..rules.internal.row_count())
        .map(|r| RowSampler::from_row(rules.internal.row_by_rank(r)))
        .collect();
    let root_samplers: Vec<RowSampler> = (0..rules.root.row_count())
        .map(|r| RowSampler::from_row(rules.root.row_by_rank(r)))
        .collect();
    let m = rules.messages().len();

    let mut errors = 0u64;
    let mut current: Vec<usize> = Vec::with_capacity(leaves as usize);
    let mut next: Vec<usize> = Vec::with_capacity((leaves as usize) / k);

    for trial in 0..trials {
        let s = usize::from(rng.uniform(trial, u64::MAX, 0) >= prior0);
        current.clear();
        for index in 0..leaves as usize {
            let x = sample_cdf(&signal_cdf[s], rng.uniform(trial, node_key(0, index), 0));
            current.push(leaf_samplers[x].sample(rng.uniform(trial, node_key(0, index), 1)));
        }
        for level in 1..t {
            next.clear();
            for (index, chunk) in current.chunks(k).enumerate() {
                let rank = chunk.iter().fold(0usize, |acc, &d| acc * m + d);
                next.push(internal_samplers[rank].sample(rng.uniform(
                    trial,
                    node_key(level, index),
                    0,
                )));
            }
            std::mem::swap(&mut current, &mut next);
        }
        let rank = current.iter().fold(0usize, |acc, &d| acc * m + d);
        let decision = root_samplers[rank].sample(rng.uniform(trial, node_key(t, 0), 0));
        if decision != s {
            errors += 1;
        }
    }

    let p_hat = errors as f64 / trials as f64;
    let (lo, hi) = wilson_99(errors, trials);
    Ok(McEstimate {
        trials,
        errors,
        p_hat,
        ci99_low: lo,
        ci99_high: hi,
        seed,
    })
}

fn cdf_of(probs: &[Prob]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p.to_f64();
            acc
        })
        .collect()
}

fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_float, EngineBudget, RunMeta};
    use crate::model::{make_bsc_channel, RuleAssignment};
    use crate::schemes;

    fn bsc(delta: f64) -> ChannelSpec {
        make_bsc_channel(Prob::from_f64(delta).unwrap(), Prob::half()).unwrap()
    }

    #[test]
    fn same_seed_same_estimate() {
        let ch = bsc(0.1);
        let rv = schemes::majority_vector(3).unwrap();
        let budget = EngineBudget::default();
        let a = monte_carlo(&rv, &ch, 3, 2, 2000, 7, &budget).unwrap();
        let b = monte_carlo(&rv, &ch, 3, 2, 2000, 7, &budget).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo(&rv, &ch, 3, 2, 2000, 8, &budget).unwrap();
        assert_ne!(a.errors, c.errors);
    }

    #[test]
    fn single_trial_is_zero_or_one() {
        let ch = bsc(0.1);
        let rv = schemes::majority_vector(2).unwrap();
        let est = monte_carlo(&rv, &ch, 2, 1, 1, 3, &EngineBudget::default()).unwrap();
        assert!(est.p_hat == 0.0 || est.p_hat == 1.0);
    }

    #[test]
    fn interval_covers_exact_value_at_moderate_size() {
        let ch = bsc(0.1);
        let rv = schemes::majority_vector(2).unwrap();
        let assignment = RuleAssignment::oblivious(rv.clone(), 2, 2).unwrap();
        let exact = run_float(
            &assignment,
            &ch,
            &RunMeta::named("majority"),
            &EngineBudget::default(),
        )
        .unwrap()
        .log_pe()
        .exp();
        let est = monte_carlo(&rv, &ch, 2, 2, 40_000, 12345, &EngineBudget::default()).unwrap();
        assert!(
            est.covers(exact),
            "interval [{}, {}] misses {exact}",
            est.ci99_low,
            est.ci99_high
        );
    }

    #[test]
    fn budget_guards_leaf_count_and_trials() {
        let ch = bsc(0.1);
        let rv = schemes::majority_vector(2).unwrap();
        let tight = EngineBudget {
            mc_max_leaves: 4,
            ..Default::default()
        };
        assert!(monte_carlo(&rv, &ch, 2, 3, 10, 1, &tight).is_err());
        assert!(monte_carlo(&rv, &ch, 2, 2, 0, 1, &tight).is_err());
    }

    #[test]
    fn wilson_interval_sane() {
        let (lo, hi) = wilson_99(50, 1000);
        assert!(lo > 0.0 && lo < 0.05 && hi > 0.05 && hi < 0.1);
        let (lo0, _) = wilson_99(0, 1000);
        assert_eq!(lo0, 0.0);
    }

    #[test]
    fn counter_rng_is_stateless() {
        let rng = CounterRng::new(42);
        let a = rng.uniform(5, 17, 1);
        let _ = rng.uniform(6, 17, 1);
        assert_eq!(a, rng.uniform(5, 17, 1));
        assert!((0.0..1.0).contains(&a));
    }
}
