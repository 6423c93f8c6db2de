//! Per-letter decay check for quantizer traces: under H0, every letter l
//! steps above the bottom must satisfy -log P(sigma = bottom + l) >=
//! (l/m) gamma^tau, and mirrored under H1. A stronger variant adds the
//! constant margin C.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::csv::{fmt_f64, LOG_CONVENTION_HEADER};
use crate::report::{LogVal, TraceReport, SCHEMA_VERSION};
use crate::schemes::QuantizerParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterDecayRow {
    pub tau: usize,
    pub l: usize,
    pub s: usize,
    /// -log P_s of the letter l steps from the losing end; `inf` when the
    /// probability is exactly zero (the bound is then vacuous).
    pub lhs: LogVal,
    pub rhs: f64,
    pub strong_rhs: f64,
    pub pass: bool,
    pub strong_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterDecayReport {
    pub schema: u32,
    pub m: usize,
    pub k: usize,
    pub gamma: f64,
    pub margin: f64,
    pub delta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within_guarantee: Option<bool>,
    pub rows: Vec<LetterDecayRow>,
    pub all_pass: bool,
    pub all_strong_pass: bool,
}

impl LetterDecayReport {
    /// Pinned tabular view: tau, l, s, lhs, rhs, pass.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(LOG_CONVENTION_HEADER);
        out.push('\n');
        out.push_str("tau,l,s,lhs,rhs,pass\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.tau,
                row.l,
                row.s,
                fmt_f64(row.lhs.0),
                fmt_f64(row.rhs),
                row.pass
            ));
        }
        out
    }
}

/// Checks the per-letter decay inequality on every (tau, l, s) of a quantizer
/// trace. Runs regardless of the noise level; traces outside the delta0
/// guarantee are flagged, not rejected.
pub fn letter_decay_check(
    trace: &TraceReport,
    params: &QuantizerParams,
) -> Result<LetterDecayReport> {
    let scheme = trace.config.scheme.as_str();
    if scheme != "quantizer" && scheme != "quantizer-sym" {
        return Err(Error::SchemeMismatch(format!(
            "letter-decay check applies to quantizer traces, got \"{scheme}\""
        )));
    }
    if trace.config.m != params.m || trace.config.k != params.k {
        return Err(Error::SchemeMismatch(format!(
            "trace is (m = {}, k = {}), parameters are (m = {}, k = {})",
            trace.config.m, trace.config.k, params.m, params.k
        )));
    }
    let m = params.m;
    let gamma = params.gamma();
    let margin = params.margin();
    let delta = trace.config.delta.as_ref().map(|p| p.to_f64());
    let within_guarantee = delta.map(|d| params.within_guarantee(d));

    let mut rows = Vec::new();
    for level in &trace.levels {
        for l in 1..m {
            let rhs = (l as f64 / m as f64) * gamma.powi(level.tau as i32);
            let strong_rhs = rhs + margin;
            for s in 0..2usize {
                // H0 counts letters up from the bottom, H1 down from the top
                let letter = if s == 0 { l } else { m - 1 - l };
                let lhs = -level.log_prob(s, letter);
                rows.push(LetterDecayRow {
                    tau: level.tau,
                    l,
                    s,
                    lhs: LogVal(lhs),
                    rhs,
                    strong_rhs,
                    pass: lhs >= rhs,
                    strong_pass: lhs >= strong_rhs,
                });
            }
        }
    }
    let all_pass = rows.iter().all(|r| r.pass);
    let all_strong_pass = rows.iter().all(|r| r.strong_pass);
    Ok(LetterDecayReport {
        schema: SCHEMA_VERSION,
        m,
        k: params.k,
        gamma,
        margin,
        delta0: params.delta0(),
        delta,
        within_guarantee,
        rows,
        all_pass,
        all_strong_pass,
    })
}
