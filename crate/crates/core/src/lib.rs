//! Exact-computation toolkit for binary hypothesis testing on regular k-ary
//! fusion trees: per-level distribution propagation under both hypotheses,
//! closed-form error bounds and decay-rate checks, dependence-graph
//! irreducibility analysis, and brute-force optimal-rule search on small
//! binary-message instances.
//!
//! The propagation engine is generic over the scalar it carries
//! ([`weight::Weight`]): log-domain floats for deep horizons, exact big
//! rationals as the oracle the float engine is validated against.
//!
//! ```
//! use fusetree_core::engine::{run_float, EngineBudget, RunMeta};
//! use fusetree_core::model::{make_bsc_channel, RuleAssignment};
//! use fusetree_core::prob::Prob;
//! use fusetree_core::schemes;
//!
//! // majority fusion over a depth-3 ternary tree, 10% crossover noise
//! let channel = make_bsc_channel(Prob::from_ratio(1, 10)?, Prob::half())?;
//! let rules = schemes::majority_vector(3)?;
//! let assignment = RuleAssignment::oblivious(rules, 3, 3)?;
//! let trace = run_float(&assignment, &channel, &RunMeta::named("majority"), &EngineBudget::default())?;
//! assert!(trace.log_pe() < (0.028f64).ln() + 1e-9); // better than a single vote layer
//! # Ok::<(), fusetree_core::Error>(())
//! ```

pub mod analysis;
pub mod engine;
pub mod error;
pub mod model;
pub mod prob;
pub mod report;
pub mod schemes;
pub mod search;
pub mod weight;

pub use error::{Error, Result};
pub use prob::Prob;
pub use weight::{LogProb, Weight};

/// Log-domain f64, the default engine scalar.
pub type LogProb64 = LogProb<f64>;
/// Log-domain f32; same code paths at lower precision.
pub type LogProb32 = LogProb<f32>;
/// Exact linear-domain scalar used by the oracle engine.
pub type ExactProb = num_rational::BigRational;

/// Trace produced by the float engine.
pub type FloatTrace = engine::RunTrace<LogProb64>;
/// Trace produced by the exact-rational oracle.
pub type ExactTrace = engine::RunTrace<ExactProb>;
