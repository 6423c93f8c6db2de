//! Scalar arithmetic the propagation engine is generic over.
//!
//! Two families implement [`Weight`]: log-domain floats ([`LogProb`], for f32
//! or f64 via `num_traits::Float`) and exact big rationals in the linear
//! domain. Log-domain is the workhorse: quantities like exp(-(4/3)^30)
//! underflow linear doubles immediately. The rational carrier is the oracle
//! the float engine is checked against.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::prob::Prob;

/// A probability-like scalar: non-negative reals with addition, product,
/// integer powers, and multinomial coefficients.
pub trait Weight: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    /// True when arithmetic is exact (no rounding anywhere).
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn mul(&self, rhs: &Self) -> Self;
    fn powi(&self, exp: u32) -> Self;
    fn add2(&self, rhs: &Self) -> Self;
    fn multinomial(counts: &[u32]) -> Self;
    fn from_prob(p: &Prob) -> Result<Self>;
    /// Natural logarithm of the carried value; `-inf` encodes exact zero.
    fn ln_value(&self) -> f64;

    /// Pairwise (tree-shaped) reduction; keeps float error growth logarithmic
    /// and is deterministic for a fixed term order.
    fn sum(terms: Vec<Self>) -> Self {
        if terms.is_empty() {
            return Self::zero();
        }
        let mut layer = terms;
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            for chunk in layer.chunks(2) {
                next.push(if chunk.len() == 2 {
                    chunk[0].add2(&chunk[1])
                } else {
                    chunk[0].clone()
                });
            }
            layer = next;
        }
        layer.pop().expect("nonempty")
    }
}

/// Log-domain probability; the payload is ln(p), with -inf as the exact zero.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogProb<F: Float>(pub F);

const MAX_LN_FACTORIAL: usize = 512;

fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(MAX_LN_FACTORIAL + 1);
        t.push(0.0);
        let mut acc = 0.0f64;
        for i in 1..=MAX_LN_FACTORIAL {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    table[n]
}

impl<F> Weight for LogProb<F>
where
    F: Float + FromPrimitive + ToPrimitive + std::fmt::Debug + Send + Sync + 'static,
{
    const EXACT: bool = false;

    fn zero() -> Self {
        LogProb(F::neg_infinity())
    }

    fn one() -> Self {
        LogProb(F::zero())
    }

    fn is_zero(&self) -> bool {
        self.0 == F::neg_infinity()
    }

    fn mul(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            Self::zero()
        } else {
            LogProb(self.0 + rhs.0)
        }
    }

    fn powi(&self, exp: u32) -> Self {
        if exp == 0 {
            return Self::one();
        }
        if self.is_zero() {
            return Self::zero();
        }
        LogProb(self.0 * F::from_u32(exp).expect("small integer fits"))
    }

    fn add2(&self, rhs: &Self) -> Self {
        if self.is_zero() {
            return *rhs;
        }
        if rhs.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.0 >= rhs.0 {
            (self.0, rhs.0)
        } else {
            (rhs.0, self.0)
        };
        LogProb(hi + (lo - hi).exp().ln_1p())
    }

    fn multinomial(counts: &[u32]) -> Self {
        let n: u32 = counts.iter().sum();
        assert!(
            (n as usize) <= MAX_LN_FACTORIAL,
            "arity beyond factorial table"
        );
        let mut ln = ln_factorial(n as usize);
        for &c in counts {
            ln -= ln_factorial(c as usize);
        }
        LogProb(F::from_f64(ln).expect("representable"))
    }

    fn from_prob(p: &Prob) -> Result<Self> {
        Ok(LogProb(
            F::from_f64(p.to_f64().ln()).expect("representable"),
        ))
    }

    fn ln_value(&self) -> f64 {
        self.0.to_f64().expect("float convertible")
    }
}

/// ln of a positive big integer without intermediate overflow.
fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        x.to_f64().expect("small magnitude").ln()
    } else {
        let shift = bits - 53;
        let top = (x >> shift).to_f64().expect("53-bit window");
        top.ln() + (shift as f64) * std::f64::consts::LN_2
    }
}

impl Weight for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }

    fn one() -> Self {
        <BigRational as One>::one()
    }

    fn is_zero(&self) -> bool {
        <BigRational as Zero>::is_zero(self)
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn powi(&self, exp: u32) -> Self {
        Pow::pow(self.clone(), exp as i32)
    }

    fn add2(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn multinomial(counts: &[u32]) -> Self {
        let mut total = BigInt::from(0u32);
        let mut result = BigInt::from(1u32);
        for &c in counts {
            total += BigInt::from(c);
            result *= binomial(total.clone(), BigInt::from(c));
        }
        BigRational::from_integer(result)
    }

    fn from_prob(p: &Prob) -> Result<Self> {
        match p.as_exact() {
            Some(r) => Ok(r.clone()),
            None => Err(Error::NonRationalInput(format!(
                "probability {p} was supplied as a float"
            ))),
        }
    }

    fn ln_value(&self) -> f64 {
        if <BigRational as Zero>::is_zero(self) {
            return f64::NEG_INFINITY;
        }
        assert!(self.is_positive(), "weights are non-negative");
        ln_biguint(self.numer().magnitude()) - ln_biguint(self.denom().magnitude())
    }
}
