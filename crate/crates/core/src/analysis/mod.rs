//! Dependence-graph construction, irreducibility assumption checks, and all
//! closed-form bound and decay-rate verifications.

pub mod assumptions;
pub mod bounds;
pub mod decay;
pub mod fit;
pub mod floor;
pub mod graph;

pub use assumptions::{check_assumptions, support_persistence_check, AssumptionReport, Verdict};
pub use bounds::{compute_bounds, BoundsReport};
pub use decay::{letter_decay_check, LetterDecayReport};
pub use fit::{fit_exponent, ExponentFit};
pub use floor::{min_message_floor_check, MinMessageFloorReport};
pub use graph::{build_dependence_graph, DependenceGraph, GraphReport};
