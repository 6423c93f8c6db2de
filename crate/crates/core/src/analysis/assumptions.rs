//! Irreducibility assumption checks on a finished run trace: strong
//! connectivity of the dependence graph, full message support at some level,
//! and a dominant message per hypothesis in the trace tail.

use serde::{Deserialize, Serialize};

use crate::analysis::graph::DependenceGraph;
use crate::error::{Error, Result};
use crate::report::{TraceReport, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongConnectivity {
    pub holds: bool,
    pub sccs: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullSupport {
    pub holds: bool,
    /// First level whose H0 support covers the whole alphabet, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_prime: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_minus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_plus: Option<String>,
    /// Measured tail floor of the dominant letters' probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Level from which both letters dominate through the end of the trace,
    /// joined with tau_prime (the later of the two).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_star: Option<usize>,
    pub window_start: usize,
    pub window_end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPersistence {
    pub applicable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holds: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample_level: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub schema: u32,
    pub horizon: usize,
    pub eta_min: f64,
    pub strong_connectivity: StrongConnectivity,
    pub full_support: FullSupport,
    pub dominance: Dominance,
    pub support_persistence: SupportPersistence,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.strong_connectivity.holds
            && self.full_support.holds
            && self.dominance.verdict == Verdict::Holds
    }
}

/// Runs all assumption checks against a trace. Support checks use the exact
/// reachability sets, never numeric thresholds; dominance is measured over
/// the tail window [ceil(t/2), t-1] against `eta_min`.
pub fn check_assumptions(
    trace: &TraceReport,
    graph: &DependenceGraph,
    eta_min: f64,
) -> Result<AssumptionReport> {
    let t = trace.config.t;
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "assumption checks need a horizon of at least 2, got {t}"
        )));
    }
    if trace.levels.len() != t {
        return Err(Error::InvalidArgument(format!(
            "trace has {} levels for horizon {t}",
            trace.levels.len()
        )));
    }
    if !(eta_min > 0.0 && eta_min < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eta_min {eta_min} outside (0, 1)"
        )));
    }

    let graph_report = graph.to_report();
    let strong_connectivity = StrongConnectivity {
        holds: graph.strongly_connected,
        sccs: graph_report.sccs,
        diameter: graph.diameter,
    };

    let tau_prime = trace
        .levels
        .iter()
        .position(|l| l.support0.iter().all(|&b| b));
    let full_support = FullSupport {
        holds: tau_prime.is_some(),
        tau_prime,
    };
    let support_persistence = persistence_of(trace, tau_prime);

    let window_start = t.div_ceil(2);
    let window_end = t - 1;
    let dominance = if window_end < window_start || window_end - window_start + 1 < 2 {
        // tail too short to certify anything
        Dominance {
            verdict: Verdict::Undetermined,
            mu_minus: None,
            mu_plus: None,
            eta: None,
            tau_star: None,
            window_start,
            window_end,
        }
    } else {
        measure_dominance(trace, eta_min, tau_prime, window_start, window_end)
    };

    Ok(AssumptionReport {
        schema: SCHEMA_VERSION,
        horizon: t,
        eta_min,
        strong_connectivity,
        full_support,
        dominance,
        support_persistence,
    })
}

fn measure_dominance(
    trace: &TraceReport,
    eta_min: f64,
    tau_prime: Option<usize>,
    window_start: usize,
    window_end: usize,
) -> Dominance {
    let m = trace.levels[0].letters.len();
    let tail_floor = |hypothesis: usize, letter: usize| -> f64 {
        (window_start..=window_end)
            .map(|tau| trace.levels[tau].log_prob(hypothesis, letter))
            .fold(f64::INFINITY, f64::min)
    };
    let best_letter = |hypothesis: usize| -> (usize, f64) {
        (0..m)
            .map(|letter| (letter, tail_floor(hypothesis, letter)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN").then(b.0.cmp(&a.0)))
            .expect("nonempty alphabet")
    };
    let (mu_minus, floor0) = best_letter(0);
    let (mu_plus, floor1) = best_letter(1);
    let eta = floor0.min(floor1).exp();
    if eta <= eta_min {
        return Dominance {
            verdict: Verdict::Fails,
            mu_minus: Some(trace.levels[0].letters[mu_minus].clone()),
            mu_plus: Some(trace.levels[0].letters[mu_plus].clone()),
            eta: Some(eta),
            tau_star: None,
            window_start,
            window_end,
        };
    }
    // earliest level after which both letters dominate through the trace end
    let dominant_at = |tau: usize| -> bool {
        trace.levels[tau].log_prob(0, mu_minus).exp() > eta_min
            && trace.levels[tau].log_prob(1, mu_plus).exp() > eta_min
    };
    let mut tau_d = 0usize;
    for tau in (0..=window_end).rev() {
        if !dominant_at(tau) {
            tau_d = tau;
            break;
        }
    }
    let tau_star = tau_d.max(tau_prime.unwrap_or(tau_d));
    Dominance {
        verdict: Verdict::Holds,
        mu_minus: Some(trace.levels[0].letters[mu_minus].clone()),
        mu_plus: Some(trace.levels[0].letters[mu_plus].clone()),
        eta: Some(eta),
        tau_star: Some(tau_star),
        window_start,
        window_end,
    }
}

/// Checks that full H0 support, once reached at tau', never shrinks at any
/// later level of the trace. Skipped when support never becomes full.
pub fn support_persistence_check(trace: &TraceReport) -> SupportPersistence {
    let tau_prime = trace
        .levels
        .iter()
        .position(|l| l.support0.iter().all(|&b| b));
    persistence_of(trace, tau_prime)
}

fn persistence_of(trace: &TraceReport, tau_prime: Option<usize>) -> SupportPersistence {
    let Some(tau_prime) = tau_prime else {
        return SupportPersistence {
            applicable: false,
            holds: None,
            counterexample_level: None,
        };
    };
    for level in &trace.levels[tau_prime..] {
        if !level.support0.iter().all(|&b| b) {
            return SupportPersistence {
                applicable: true,
                holds: Some(false),
                counterexample_level: Some(level.tau),
            };
        }
    }
    SupportPersistence {
        applicable: true,
        holds: Some(true),
        counterexample_level: None,
    }
}
