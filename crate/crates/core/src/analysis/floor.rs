//! Floor on the least-likely message probability for irreducible rules: with
//! all three assumptions certified and diameter d, zeta_tau (the minimum
//! letter probability at level tau) obeys
//! zeta_{tau* + a d + b} >= exp(-C' (k^d - 1)^a) with the admissible constant
//! C' = k^{d-1} (-log zeta_{tau*}) + log(1/eta) / (k^d - 2).

use serde::{Deserialize, Serialize};

use crate::analysis::assumptions::{AssumptionReport, Verdict};
use crate::analysis::graph::DependenceGraph;
use crate::error::{Error, Result};
use crate::report::csv::{fmt_f64, LOG_CONVENTION_HEADER};
use crate::report::{LogVal, TraceReport, SCHEMA_VERSION};

/// Slack for exact-equality rows (a = 0, b = 0 compares a value to itself).
const FLOOR_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorRow {
    pub s: usize,
    pub tau: usize,
    pub a: usize,
    pub b: usize,
    /// -log zeta_tau measured from the trace.
    pub neg_log_zeta: LogVal,
    /// C' (k^d - 1)^a
    pub bound: f64,
    /// bound minus the log(1/eta)/(k^d - 2) slack.
    pub strong_bound: f64,
    /// k^b (-log zeta_{tau*}); only binding on the a = 0 rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_bound: Option<f64>,
    pub pass: bool,
    pub strong_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMessageFloorReport {
    pub schema: u32,
    pub applicable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_star: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Admissible constant per hypothesis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_prime: Option<[f64; 2]>,
    pub rows: Vec<FloorRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_pass: Option<bool>,
}

impl MinMessageFloorReport {
    fn inapplicable(reason: &str) -> Self {
        MinMessageFloorReport {
            schema: SCHEMA_VERSION,
            applicable: false,
            reason: Some(reason.to_string()),
            d: None,
            tau_star: None,
            eta: None,
            c_prime: None,
            rows: Vec::new(),
            all_pass: None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(LOG_CONVENTION_HEADER);
        out.push('\n');
        out.push_str("s,tau,a,b,neg_log_zeta,bound,strong_bound,pass\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.s,
                row.tau,
                row.a,
                row.b,
                fmt_f64(row.neg_log_zeta.0),
                fmt_f64(row.bound),
                fmt_f64(row.strong_bound),
                row.pass
            ));
        }
        out
    }
}

/// Checks the minimum-message floor level by level. Returns an inapplicable
/// verdict (distinct from failure) when the assumptions are not certified or
/// when k^d <= 2 leaves the admissible constant undefined.
pub fn min_message_floor_check(
    trace: &TraceReport,
    graph: &DependenceGraph,
    assumptions: &AssumptionReport,
) -> Result<MinMessageFloorReport> {
    if !assumptions.strong_connectivity.holds {
        return Ok(MinMessageFloorReport::inapplicable(
            "dependence graph is not strongly connected",
        ));
    }
    if !assumptions.full_support.holds {
        return Ok(MinMessageFloorReport::inapplicable(
            "full message support never certified",
        ));
    }
    if assumptions.dominance.verdict != Verdict::Holds {
        return Ok(MinMessageFloorReport::inapplicable(
            "dominant-message assumption not certified",
        ));
    }
    let d = graph.diameter.ok_or_else(|| {
        Error::InvalidArgument("strongly connected graph lacks a diameter".into())
    })?;
    let k = trace.config.k;
    let kd = (k as f64).powi(d as i32);
    if kd <= 2.0 {
        return Ok(MinMessageFloorReport::inapplicable(
            "admissible constant divides by k^d - 2 = 0",
        ));
    }
    let tau_star = assumptions
        .dominance
        .tau_star
        .expect("dominance holds, tau_star is set");
    let eta = assumptions
        .dominance
        .eta
        .expect("dominance holds, eta is set");
    if tau_star >= trace.levels.len() {
        return Ok(MinMessageFloorReport::inapplicable(
            "tau_star beyond the trace horizon",
        ));
    }

    let neg_log_zeta = |s: usize, tau: usize| -> f64 {
        -(trace.levels[tau]
            .log_p0
            .iter()
            .zip(trace.levels[tau].log_p1.iter()))
        .map(|(a, b)| if s == 0 { a.0 } else { b.0 })
        .fold(f64::INFINITY, f64::min)
    };

    let slack = (1.0 / eta).ln() / (kd - 2.0);
    let mut c_prime = [0.0f64; 2];
    let mut rows = Vec::new();
    for (s, c_slot) in c_prime.iter_mut().enumerate() {
        let anchor = neg_log_zeta(s, tau_star);
        *c_slot = (k as f64).powi(d as i32 - 1) * anchor + slack;
        for tau in tau_star..trace.levels.len() {
            let a = (tau - tau_star) / d;
            let b = (tau - tau_star) % d;
            let nlz = neg_log_zeta(s, tau);
            let bound = *c_slot * (kd - 1.0).powi(a as i32);
            let strong_bound = bound - slack;
            let warmup_bound = (a == 0).then(|| (k as f64).powi(b as i32) * anchor);
            let warmup_ok = warmup_bound.is_none_or(|w| nlz <= w + FLOOR_TOL);
            rows.push(FloorRow {
                s,
                tau,
                a,
                b,
                neg_log_zeta: LogVal(nlz),
                bound,
                strong_bound,
                warmup_bound,
                pass: nlz <= bound + FLOOR_TOL && warmup_ok,
                strong_pass: nlz <= strong_bound + FLOOR_TOL,
            });
        }
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(MinMessageFloorReport {
        schema: SCHEMA_VERSION,
        applicable: true,
        reason: None,
        d: Some(d),
        tau_star: Some(tau_star),
        eta: Some(eta),
        c_prime: Some(c_prime),
        rows,
        all_pass: Some(all_pass),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::assumptions::check_assumptions;
    use crate::analysis::graph::build_dependence_graph;
    use crate::engine::{run_float, EngineBudget, RunMeta};
    use crate::model::{make_bsc_channel, RuleAssignment};
    use crate::prob::Prob;
    use crate::schemes;

    fn setup(
        scheme: &str,
        m: usize,
        k: usize,
        delta: f64,
        t: usize,
    ) -> (TraceReport, DependenceGraph, AssumptionReport) {
        let rv = schemes::scheme_rule_vector(scheme, m, k, None).unwrap();
        let graph = build_dependence_graph(&rv.internal).unwrap();
        let ch = make_bsc_channel(Prob::from_f64(delta).unwrap(), Prob::half()).unwrap();
        let asg = RuleAssignment::oblivious(rv, k, t).unwrap();
        let trace = run_float(&asg, &ch, &RunMeta::named(scheme), &EngineBudget::default())
            .unwrap()
            .to_report();
        let assumptions = check_assumptions(&trace, &graph, 1e-3).unwrap();
        (trace, graph, assumptions)
    }

    #[test]
    fn majority3_floor_holds_with_diameter_one() {
        // k = 3, d = 1 keeps k^d - 2 = 1, so the constant is defined
        let (trace, graph, assumptions) = setup("majority", 2, 3, 0.1, 8);
        assert!(assumptions.all_hold());
        let report = min_message_floor_check(&trace, &graph, &assumptions).unwrap();
        assert!(report.applicable);
        assert_eq!(report.d, Some(1));
        assert_eq!(report.all_pass, Some(true));
        // every row with a = 0 carries the warm-up bound
        assert!(report
            .rows
            .iter()
            .filter(|r| r.a == 0)
            .all(|r| r.warmup_bound.is_some()));
    }

    #[test]
    fn symmetrized_quantizer_exercises_both_phases() {
        // d = 2 makes the warm-up check at b = 1 non-trivial
        let (trace, graph, assumptions) = setup("quantizer-sym", 3, 2, 0.02, 12);
        assert!(assumptions.all_hold());
        let report = min_message_floor_check(&trace, &graph, &assumptions).unwrap();
        assert!(report.applicable);
        assert_eq!(report.d, Some(2));
        assert_eq!(report.all_pass, Some(true));
        assert!(report.rows.iter().any(|r| r.a == 0 && r.b == 1));
        assert!(report.rows.iter().any(|r| r.a >= 1));
    }

    #[test]
    fn or_fixture_is_inapplicable() {
        let (trace, graph, assumptions) = setup("or-fixture", 2, 2, 0.1, 8);
        let report = min_message_floor_check(&trace, &graph, &assumptions).unwrap();
        assert!(!report.applicable);
        assert!(report.reason.unwrap().contains("strongly connected"));
        assert!(report.all_pass.is_none());
    }

    #[test]
    fn fair_tie_majority_k2_hits_the_degenerate_constant() {
        // k = 2, d = 1: k^d - 2 = 0
        let (trace, graph, assumptions) = setup("majority", 2, 2, 0.1, 8);
        assert!(assumptions.all_hold());
        let report = min_message_floor_check(&trace, &graph, &assumptions).unwrap();
        assert!(!report.applicable);
        assert!(report.reason.unwrap().contains("k^d - 2"));
    }
}
