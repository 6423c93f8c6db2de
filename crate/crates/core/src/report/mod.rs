//! Serializable report types and canonical emission.
//!
//! Every file the toolkit writes is byte-deterministic: struct fields
//! serialize in declaration order, floats are printed with 17 significant
//! digits, and infinite log values are encoded as the strings "inf"/"-inf".
//! Log values are natural logarithms throughout.

pub mod csv;
pub mod json;

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{QuantizerEcho, RunTrace};
use crate::prob::Prob;
use crate::weight::Weight;

pub const SCHEMA_VERSION: u32 = 1;

/// A natural-log value; `-inf` encodes an exact zero probability and `inf`
/// encodes `-log 0` on the bound side of a check.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogVal(pub f64);

impl LogVal {
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<f64> for LogVal {
    fn from(v: f64) -> Self {
        LogVal(v)
    }
}

impl fmt::Display for LogVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else {
            write!(f, "{:.16e}", self.0)
        }
    }
}

impl Serialize for LogVal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_nan() {
            return Err(serde::ser::Error::custom("log value is NaN"));
        }
        if self.0.is_infinite() {
            serializer.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LogVal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = LogVal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"/\"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<LogVal, E> {
                Ok(LogVal(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<LogVal, E> {
                Ok(LogVal(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<LogVal, E> {
                Ok(LogVal(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<LogVal, E> {
                match v {
                    "inf" => Ok(LogVal(f64::INFINITY)),
                    "-inf" => Ok(LogVal(f64::NEG_INFINITY)),
                    other => Err(E::custom(format!("unexpected log value \"{other}\""))),
                }
            }
        }
        deserializer.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleIdReport {
    pub role: String,
    pub id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfigReport {
    pub scheme: String,
    pub engine: String,
    pub k: usize,
    pub t: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Prob>,
    pub prior0: Prob,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<QuantizerEcho>,
    pub rule_ids: Vec<RuleIdReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub tau: usize,
    pub letters: Vec<String>,
    pub log_p0: Vec<LogVal>,
    pub log_p1: Vec<LogVal>,
    pub support0: Vec<bool>,
    pub support1: Vec<bool>,
}

impl LevelReport {
    pub fn log_prob(&self, hypothesis: usize, letter: usize) -> f64 {
        match hypothesis {
            0 => self.log_p0[letter].0,
            1 => self.log_p1[letter].0,
            _ => panic!("hypothesis index must be 0 or 1"),
        }
    }

    pub fn support(&self, hypothesis: usize) -> &[bool] {
        match hypothesis {
            0 => &self.support0,
            1 => &self.support1,
            _ => panic!("hypothesis index must be 0 or 1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub log_p0_err: LogVal,
    pub log_p1_err: LogVal,
    pub log_pe: LogVal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub schema: u32,
    pub config: TraceConfigReport,
    pub levels: Vec<LevelReport>,
    pub root: RootReport,
}

impl<W: Weight> RunTrace<W> {
    /// Float view of a trace for serialization and analysis; rational traces
    /// convert their exact values through high-precision logarithms.
    pub fn to_report(&self) -> TraceReport {
        TraceReport {
            schema: SCHEMA_VERSION,
            config: TraceConfigReport {
                scheme: self.config.scheme.clone(),
                engine: self.config.engine.clone(),
                k: self.config.k,
                t: self.config.t,
                m: self.config.m,
                delta: self.config.delta.clone(),
                prior0: self.config.prior0.clone(),
                quantizer: self.config.quantizer,
                rule_ids: self
                    .config
                    .rule_ids
                    .iter()
                    .map(|(role, id)| RuleIdReport {
                        role: role.clone(),
                        id: id.clone(),
                    })
                    .collect(),
            },
            levels: self
                .levels
                .iter()
                .map(|level| LevelReport {
                    tau: level.level,
                    letters: level.alphabet.label_names(),
                    log_p0: level.p0.iter().map(|w| LogVal(w.ln_value())).collect(),
                    log_p1: level.p1.iter().map(|w| LogVal(w.ln_value())).collect(),
                    support0: level.support0.clone(),
                    support1: level.support1.clone(),
                })
                .collect(),
            root: RootReport {
                log_p0_err: LogVal(self.root.p0_err.ln_value()),
                log_p1_err: LogVal(self.root.p1_err.ln_value()),
                log_pe: LogVal(self.root.pe.ln_value()),
            },
        }
    }
}

/// One row of a horizon sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: usize,
    pub n: u64,
    pub log_p0_err: LogVal,
    pub log_p1_err: LogVal,
    pub log_pe: LogVal,
}
