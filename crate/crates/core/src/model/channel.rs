//! Priors and conditional signal distributions.

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::model::alphabet::Alphabet;
use crate::prob::Prob;

/// Prior over the hidden state plus the two conditional signal laws. Every
/// signal must have strictly positive probability under both hypotheses, so
/// log-likelihood ratios are finite in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    prior: [Prob; 2],
    signals: Alphabet,
    p0: Vec<Prob>,
    p1: Vec<Prob>,
}

impl ChannelSpec {
    pub fn new(prior0: Prob, signals: Alphabet, p0: Vec<Prob>, p1: Vec<Prob>) -> Result<Self> {
        if !prior0.is_positive() || !prior0.one_minus().is_positive() {
            return Err(Error::InvalidArgument(format!(
                "prior {prior0} must lie strictly inside (0, 1)"
            )));
        }
        let prior1 = prior0.one_minus();
        for (name, v) in [("p0", &p0), ("p1", &p1)] {
            if v.len() != signals.len() {
                return Err(Error::AlphabetMismatch(format!(
                    "{name} has {} entries for {} signals",
                    v.len(),
                    signals.len()
                )));
            }
            check_distribution(name, v)?;
            if let Some(x) = v.iter().position(|p| !p.is_positive()) {
                return Err(Error::InvalidArgument(format!(
                    "{name}({}) must be strictly positive",
                    signals.label_name(x)
                )));
            }
        }
        Ok(ChannelSpec {
            prior: [prior0, prior1],
            signals,
            p0,
            p1,
        })
    }

    pub fn prior(&self) -> &[Prob; 2] {
        &self.prior
    }

    pub fn signals(&self) -> &Alphabet {
        &self.signals
    }

    pub fn signal_prob(&self, hypothesis: usize, signal: usize) -> &Prob {
        match hypothesis {
            0 => &self.p0[signal],
            1 => &self.p1[signal],
            _ => panic!("hypothesis index must be 0 or 1"),
        }
    }

    pub fn p0(&self) -> &[Prob] {
        &self.p0
    }

    pub fn p1(&self) -> &[Prob] {
        &self.p1
    }

    /// ln p1(x) - ln p0(x); finite by the positivity invariant.
    pub fn log_likelihood_ratio(&self, signal: usize) -> f64 {
        self.p1[signal].to_f64().ln() - self.p0[signal].to_f64().ln()
    }

    pub fn is_uniform_prior(&self) -> bool {
        self.prior[0] == self.prior[1]
    }

    /// True when p1 is p0 with the signal labels reversed.
    pub fn is_symmetric(&self) -> bool {
        let reversed: Vec<&Prob> = self.p0.iter().rev().collect();
        reversed.iter().zip(self.p1.iter()).all(|(a, b)| **a == *b)
    }

    pub fn all_rational(&self) -> bool {
        self.prior
            .iter()
            .chain(self.p0.iter())
            .chain(self.p1.iter())
            .all(Prob::is_exact)
    }
}

/// Binary symmetric channel: p_s(x) = (1-delta) if x = s else delta,
/// for crossover probability delta in (0, 1/2).
pub fn make_bsc_channel(delta: Prob, prior0: Prob) -> Result<ChannelSpec> {
    let in_range = match &delta {
        Prob::Exact(r) => {
            r.is_positive() && *r < BigRational::new(BigRational::one().numer().clone(), 2.into())
        }
        Prob::Approx(x) => *x > 0.0 && *x < 0.5,
    };
    if !in_range {
        return Err(Error::InvalidArgument(format!(
            "crossover probability {delta} outside (0, 1/2)"
        )));
    }
    let keep = delta.one_minus();
    ChannelSpec::new(
        prior0,
        Alphabet::binary(),
        vec![keep.clone(), delta.clone()],
        vec![delta, keep],
    )
}

fn check_distribution(name: &str, v: &[Prob]) -> Result<()> {
    if v.iter().all(|p| p.is_exact()) {
        let mut sum = BigRational::from_integer(0.into());
        for p in v {
            sum += p.as_exact().expect("checked exact");
        }
        if !sum.is_one() {
            return Err(Error::InvalidArgument(format!(
                "{name} sums to {sum}, expected 1"
            )));
        }
    } else {
        let sum: f64 = v.iter().map(|p| p.to_f64()).sum();
        if (sum - 1.0).abs() > super::kernel::ROW_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "{name} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}
