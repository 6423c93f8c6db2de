//! Subcommand implementations. Every emitted file goes through the canonical
//! writers, so identical configs (and seeds) produce byte-identical outputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use fusetree_core::analysis::{
    build_dependence_graph, check_assumptions, compute_bounds, fit_exponent, letter_decay_check,
    min_message_floor_check, ExponentFit,
};
use fusetree_core::engine::{self, mc::monte_carlo};
use fusetree_core::model::RuleAssignment;
use fusetree_core::report::csv::{sweep_to_csv, trace_to_csv};
use fusetree_core::report::json::to_canonical_json;
use fusetree_core::report::{LogVal, SweepRow, TraceReport, SCHEMA_VERSION};
use fusetree_core::schemes::QuantizerParams;
use fusetree_core::search::{
    optimal_error_exhaustive, ordering_diagnostics, verify_exponent_product,
    verify_lrt_equivalence, ExponentProductReport, LrtEquivalenceReport, OrderingReport,
    SearchOutcomeReport,
};

use crate::config::{EngineChoice, ExperimentConfig};
use crate::pool::parallel_map;
use crate::CliError;

pub struct Context {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub engine: EngineChoice,
    pub seed: Option<u64>,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    fn trace_for(&self, t: usize) -> Result<TraceReport, CliError> {
        trace_report(&self.config, self.engine, t)
    }
}

fn core_err(e: fusetree_core::Error) -> CliError {
    match e {
        fusetree_core::Error::BudgetExceeded(msg) => CliError::Budget(msg),
        other => CliError::Config(other.to_string()),
    }
}

fn assignment_for(config: &ExperimentConfig, t: usize) -> Result<RuleAssignment, CliError> {
    let rules = config.rule_vector()?;
    RuleAssignment::oblivious(rules, config.k, t).map_err(core_err)
}

fn trace_report(
    config: &ExperimentConfig,
    engine: EngineChoice,
    t: usize,
) -> Result<TraceReport, CliError> {
    let channel = config.channel()?;
    let assignment = assignment_for(config, t)?;
    let meta = config.run_meta()?;
    let budget = config.engine_budget();
    match engine {
        EngineChoice::Float => engine::run_float(&assignment, &channel, &meta, &budget)
            .map(|trace| trace.to_report())
            .map_err(core_err),
        EngineChoice::Rational => engine::run_exact_rational(&assignment, &channel, &meta, &budget)
            .map(|trace| trace.to_report())
            .map_err(core_err),
        EngineChoice::Mc => Err(CliError::Config(
            "per-level traces need the float or rational engine".into(),
        )),
    }
}

fn sweep_row(trace: &TraceReport, k: usize, t: usize) -> SweepRow {
    SweepRow {
        t,
        n: (k as u64).pow(t as u32),
        log_p0_err: trace.root.log_p0_err,
        log_p1_err: trace.root.log_p1_err,
        log_pe: trace.root.log_pe,
    }
}

pub fn cmd_run(ctx: &Context) -> Result<(), CliError> {
    let ts = ctx.config.t_list();
    if ctx.engine == EngineChoice::Mc {
        let channel = ctx.config.channel()?;
        let rules = ctx.config.rule_vector()?;
        let trials = ctx.config.trials.unwrap_or(100_000);
        let seed = ctx.seed.expect("validated: mc requires a seed");
        let budget = ctx.config.engine_budget();
        let estimates = parallel_map(ctx.jobs, ts.clone(), |&t| {
            monte_carlo(&rules, &channel, ctx.config.k, t, trials, seed, &budget).map_err(core_err)
        });
        for (t, estimate) in ts.iter().zip(estimates) {
            let estimate = estimate?;
            crate::emit!(
                "t={t} p_hat={:.6e} ci99=[{:.6e}, {:.6e}] errors={}/{}",
                estimate.p_hat,
                estimate.ci99_low,
                estimate.ci99_high,
                estimate.errors,
                estimate.trials
            );
            ctx.write(&format!("mc_t{t}.json"), &to_canonical_json(&estimate))?;
        }
        return Ok(());
    }
    let traces = parallel_map(ctx.jobs, ts.clone(), |&t| ctx.trace_for(t));
    let mut rows = Vec::new();
    for (t, trace) in ts.iter().zip(traces) {
        let trace = trace?;
        crate::emit!("t={t} log_pe={}", trace.root.log_pe);
        ctx.write(&format!("trace_t{t}.json"), &to_canonical_json(&trace))?;
        ctx.write(&format!("trace_t{t}.csv"), &trace_to_csv(&trace))?;
        rows.push(sweep_row(&trace, ctx.config.k, *t));
    }
    ctx.write("summary.csv", &sweep_to_csv(&rows))?;
    Ok(())
}

/// Fit outcome: a rejected series (for example one whose error probability is
/// not monotone in the horizon) is a finding, not a failure.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOutcome {
    Fit(ExponentFit),
    Rejected { reason: String },
}

fn fit_over(ctx: &Context, ts: &[usize]) -> Result<(Vec<SweepRow>, FitOutcome), CliError> {
    let traces = parallel_map(ctx.jobs, ts.to_vec(), |&t| ctx.trace_for(t));
    let mut rows = Vec::new();
    for (t, trace) in ts.iter().zip(traces) {
        rows.push(sweep_row(&trace?, ctx.config.k, *t));
    }
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.log_pe.0)).collect();
    let outcome = match fit_exponent(&series) {
        Ok(fit) => FitOutcome::Fit(fit),
        Err(e) => FitOutcome::Rejected {
            reason: e.to_string(),
        },
    };
    Ok((rows, outcome))
}

pub fn cmd_fit(ctx: &Context) -> Result<(), CliError> {
    let ts = ctx.config.t_list();
    if ts.len() < 3 {
        return Err(CliError::Config(
            "exponent fitting needs a t_range with at least 3 horizons".into(),
        ));
    }
    let (rows, outcome) = fit_over(ctx, &ts)?;
    ctx.write("summary.csv", &sweep_to_csv(&rows))?;
    ctx.write("fit.json", &to_canonical_json(&outcome))?;
    match &outcome {
        FitOutcome::Fit(fit) => {
            crate::emit!(
                "rho_hat={:.6} c={:.6e} max_residual={:.3e}",
                fit.rho_hat,
                fit.c,
                fit.max_residual
            )
        }
        FitOutcome::Rejected { reason } => crate::emit!("finding: fit rejected: {reason}"),
    }
    Ok(())
}

pub fn cmd_analyze(ctx: &Context) -> Result<(), CliError> {
    let analyses = ctx.config.analyses();
    let wants = |name: &str| analyses.iter().any(|a| a == name);
    let ts = ctx.config.t_list();
    let t = *ts.last().expect("validated nonempty");
    let trace = ctx.trace_for(t)?;

    let rules = ctx.config.rule_vector()?;
    let graph = build_dependence_graph(&rules.internal).map_err(core_err)?;
    if wants("graph") {
        ctx.write("graph.json", &to_canonical_json(&graph.to_report()))?;
        if !graph.strongly_connected {
            crate::emit!("finding: dependence graph is not strongly connected");
        }
    }

    let assumptions = check_assumptions(&trace, &graph, ctx.config.eta_min()).map_err(core_err)?;
    if wants("assumptions") {
        ctx.write(
            &format!("assumptions_t{t}.json"),
            &to_canonical_json(&assumptions),
        )?;
        if !assumptions.all_hold() {
            crate::emit!("finding: irreducibility assumptions do not all hold");
        }
    }

    if wants("bounds") {
        let delta = ctx.config.delta()?.to_f64();
        let d = ctx.config.d.or(graph.diameter);
        let bounds = compute_bounds(ctx.config.k, ctx.config.m, t, delta, d).map_err(core_err)?;
        let mut bounds = bounds;
        if !graph.strongly_connected {
            bounds
                .annotations
                .push("assumption-failed: dependence graph is not strongly connected".into());
        }
        ctx.write(&format!("bounds_t{t}.json"), &to_canonical_json(&bounds))?;
    }

    if wants("letter-decay") && ctx.config.scheme.starts_with("quantizer") {
        let params = QuantizerParams::new(ctx.config.m, ctx.config.k).map_err(core_err)?;
        let decay = letter_decay_check(&trace, &params).map_err(core_err)?;
        if !decay.all_pass {
            crate::emit!("finding: per-letter decay bound violated");
        }
        ctx.write(
            &format!("letter_decay_t{t}.json"),
            &to_canonical_json(&decay),
        )?;
        ctx.write(&format!("letter_decay_t{t}.csv"), &decay.to_csv())?;
    }

    if wants("message-floor") {
        let floor = min_message_floor_check(&trace, &graph, &assumptions).map_err(core_err)?;
        if floor.applicable && floor.all_pass == Some(false) {
            crate::emit!("finding: minimum-message floor violated");
        }
        ctx.write(
            &format!("message_floor_t{t}.json"),
            &to_canonical_json(&floor),
        )?;
        ctx.write(&format!("message_floor_t{t}.csv"), &floor.to_csv())?;
    }

    if wants("fit") && ts.len() >= 3 {
        let (rows, outcome) = fit_over(ctx, &ts)?;
        ctx.write("summary.csv", &sweep_to_csv(&rows))?;
        ctx.write("fit.json", &to_canonical_json(&outcome))?;
        if let FitOutcome::Rejected { reason } = &outcome {
            crate::emit!("finding: fit rejected: {reason}");
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub schema: u32,
    pub min_log_pe: LogVal,
    pub outcome: SearchOutcomeReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lrt: Option<LrtEquivalenceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_products: Option<ExponentProductReport>,
    pub ordering: OrderingReport,
    pub notes: Vec<String>,
}

pub fn cmd_search(ctx: &Context) -> Result<(), CliError> {
    let channel = ctx.config.channel()?;
    let t = ctx.config.search_t();
    let mode = ctx.config.search_mode();
    let budget = ctx.config.search_budget();
    let outcome =
        optimal_error_exhaustive(&channel, ctx.config.k, t, mode, &budget).map_err(core_err)?;
    let assignment = outcome.to_assignment().map_err(core_err)?;
    let engine_budget = ctx.config.engine_budget();

    let mut notes = Vec::new();
    let lrt = if t <= 2 {
        Some(verify_lrt_equivalence(&channel, ctx.config.k, t, &budget).map_err(core_err)?)
    } else {
        notes.push("LRT comparison skipped: implemented for depth <= 2".into());
        None
    };
    let exponent_products = if channel.is_uniform_prior() && ctx.config.delta.is_some() {
        Some(
            verify_exponent_product(
                &assignment,
                &channel,
                ctx.config.delta()?.to_f64(),
                &engine_budget,
            )
            .map_err(core_err)?,
        )
    } else {
        notes.push("exponent-product check skipped: needs a uniform prior and a crossover".into());
        None
    };
    let ordering = ordering_diagnostics(&assignment, &channel, &engine_budget).map_err(core_err)?;

    if let Some(lrt) = &lrt {
        crate::emit!(
            "lrt_verdict={} exhaustive={:.6e} lrt={:.6e}",
            if lrt.pass { "pass" } else { "fail" },
            lrt.exhaustive_min_pe,
            lrt.lrt_min_pe
        );
    }
    crate::emit!(
        "min_pe={:.6e} evaluated={}",
        outcome.min_pe,
        outcome.evaluated
    );
    let report = SearchReport {
        schema: SCHEMA_VERSION,
        min_log_pe: LogVal(outcome.min_pe.ln()),
        outcome: outcome.to_report(),
        lrt,
        exponent_products,
        ordering,
        notes,
    };
    ctx.write("search.json", &to_canonical_json(&report))?;
    Ok(())
}

pub fn cmd_mc(ctx: &Context) -> Result<(), CliError> {
    let channel = ctx.config.channel()?;
    let rules = ctx.config.rule_vector()?;
    let trials = ctx.config.trials.unwrap_or(100_000);
    let seed = ctx
        .seed
        .ok_or_else(|| CliError::Config("the monte-carlo engine requires a seed".into()))?;
    let budget = ctx.config.engine_budget();
    let ts = ctx.config.t_list();
    let estimates = parallel_map(ctx.jobs, ts.clone(), |&t| {
        monte_carlo(&rules, &channel, ctx.config.k, t, trials, seed, &budget).map_err(core_err)
    });
    for (t, estimate) in ts.iter().zip(estimates) {
        let estimate = estimate?;
        crate::emit!(
            "t={t} p_hat={:.6e} ci99=[{:.6e}, {:.6e}] errors={}/{}",
            estimate.p_hat,
            estimate.ci99_low,
            estimate.ci99_high,
            estimate.errors,
            estimate.trials
        );
        ctx.write(&format!("mc_t{t}.json"), &to_canonical_json(&estimate))?;
    }
    Ok(())
}

pub fn cmd_bounds(ctx: &Context) -> Result<(), CliError> {
    let t = *ctx.config.t_list().last().expect("validated nonempty");
    let delta = ctx.config.delta()?.to_f64();
    let bounds =
        compute_bounds(ctx.config.k, ctx.config.m, t, delta, ctx.config.d).map_err(core_err)?;
    crate::emit!(
        "binary_floor_log={:.6} quantizer_rho={}",
        bounds.binary_floor.log_floor,
        bounds
            .quantizer
            .as_ref()
            .map(|q| format!("{:.6}", q.rho))
            .unwrap_or_else(|| "n/a".into())
    );
    ctx.write("bounds.json", &to_canonical_json(&bounds))?;
    Ok(())
}
