//! CSV emission and parsing for tabular outputs. Same float convention as
//! the JSON writer: 17 significant digits, "inf"/"-inf" for infinities, and
//! a leading comment line stating the natural-log convention.

use crate::error::{Error, Result};
use crate::report::{LevelReport, LogVal, SweepRow, TraceReport};

pub const LOG_CONVENTION_HEADER: &str =
    "# log columns are natural logarithms; -inf marks an exact zero";

pub fn fmt_f64(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad float \"{other}\": {e}"))),
    }
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Parse(format!("bad bool \"{other}\""))),
    }
}

/// One row per (level, letter): tau, letter, log_p0, log_p1, support bits.
pub fn trace_to_csv(report: &TraceReport) -> String {
    let mut out = String::new();
    out.push_str(LOG_CONVENTION_HEADER);
    out.push('\n');
    out.push_str("tau,letter,log_p0,log_p1,support0,support1\n");
    for level in &report.levels {
        for (i, letter) in level.letters.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                level.tau,
                letter,
                fmt_f64(level.log_p0[i].0),
                fmt_f64(level.log_p1[i].0),
                level.support0[i],
                level.support1[i],
            ));
        }
    }
    out
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<LevelReport>> {
    let mut levels: Vec<LevelReport> = Vec::new();
    for line in data_lines(text, 6, "tau,letter,log_p0,log_p1,support0,support1")? {
        let tau: usize = line[0]
            .parse()
            .map_err(|e| Error::Parse(format!("bad level index \"{}\": {e}", line[0])))?;
        if levels.len() == tau {
            levels.push(LevelReport {
                tau,
                letters: Vec::new(),
                log_p0: Vec::new(),
                log_p1: Vec::new(),
                support0: Vec::new(),
                support1: Vec::new(),
            });
        }
        let level = levels
            .get_mut(tau)
            .ok_or_else(|| Error::Parse(format!("level {tau} out of order")))?;
        level.letters.push(line[1].to_string());
        level.log_p0.push(LogVal(parse_f64(&line[2])?));
        level.log_p1.push(LogVal(parse_f64(&line[3])?));
        level.support0.push(parse_bool(&line[4])?);
        level.support1.push(parse_bool(&line[5])?);
    }
    Ok(levels)
}

/// Horizon sweep summary: t, n, per-hypothesis root errors, total error.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(LOG_CONVENTION_HEADER);
    out.push('\n');
    out.push_str("t,n,log_p0_err,log_p1_err,log_pe\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.t,
            row.n,
            fmt_f64(row.log_p0_err.0),
            fmt_f64(row.log_p1_err.0),
            fmt_f64(row.log_pe.0),
        ));
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for line in data_lines(text, 5, "t,n,log_p0_err,log_p1_err,log_pe")? {
        rows.push(SweepRow {
            t: line[0]
                .parse()
                .map_err(|e| Error::Parse(format!("bad t: {e}")))?,
            n: line[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad n: {e}")))?,
            log_p0_err: LogVal(parse_f64(&line[2])?),
            log_p1_err: LogVal(parse_f64(&line[3])?),
            log_pe: LogVal(parse_f64(&line[4])?),
        });
    }
    Ok(rows)
}

/// Splits CSV text into data rows, skipping comments and checking the header.
pub fn data_lines(text: &str, fields: usize, expected_header: &str) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != expected_header {
                return Err(Error::Parse(format!(
                    "line {}: expected header \"{expected_header}\", got \"{line}\"",
                    idx + 1
                )));
            }
            header_seen = true;
            continue;
        }
        let parts: Vec<String> = line.split(',').map(str::to_string).collect();
        if parts.len() != fields {
            return Err(Error::Parse(format!(
                "line {}: expected {fields} fields, got {}",
                idx + 1,
                parts.len()
            )));
        }
        rows.push(parts);
    }
    if !header_seen {
        return Err(Error::Parse("missing header row".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_fields_round_trip() {
        for v in [0.1, -7.25, f64::INFINITY, f64::NEG_INFINITY] {
            assert_eq!(parse_f64(&fmt_f64(v)).unwrap(), v);
        }
    }

    #[test]
    fn sweep_round_trips() {
        let rows = vec![
            SweepRow {
                t: 1,
                n: 2,
                log_p0_err: LogVal(-1.0),
                log_p1_err: LogVal(f64::NEG_INFINITY),
                log_pe: LogVal(-1.5),
            },
            SweepRow {
                t: 2,
                n: 4,
                log_p0_err: LogVal(-2.0),
                log_p1_err: LogVal(-3.0),
                log_pe: LogVal(-2.5),
            },
        ];
        let text = sweep_to_csv(&rows);
        assert_eq!(parse_sweep_csv(&text).unwrap(), rows);
        assert_eq!(sweep_to_csv(&parse_sweep_csv(&text).unwrap()), text);
    }

    #[test]
    fn header_mismatch_is_an_error() {
        assert!(parse_sweep_csv("a,b,c\n1,2,3\n").is_err());
    }
}
