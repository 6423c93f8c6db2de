//! Domain types: alphabets, channels, decision rules, and tree assignments.
//! Everything here is immutable after construction and safe to share across
//! threads.

pub mod alphabet;
pub mod assignment;
pub mod channel;
pub mod kernel;

pub use alphabet::{Alphabet, LabelMode};
pub use assignment::{AssignmentMode, RuleAssignment, RuleVector};
pub use channel::{make_bsc_channel, ChannelSpec};
pub use kernel::{relabel_centered, KernelReport, StochasticKernel};
