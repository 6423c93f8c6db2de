//! Experiment configuration: a versioned JSON document describing the
//! scheme, channel, horizon(s), engine, analyses, and budgets.

use std::path::Path;

use serde::Deserialize;

use fusetree_core::engine::{EngineBudget, RunMeta};
use fusetree_core::model::{Alphabet, ChannelSpec, RuleVector, StochasticKernel};
use fusetree_core::prob::Prob;
use fusetree_core::schemes::{self, QuantizerParams};
use fusetree_core::search::{SearchBudget, SearchMode};

use crate::CliError;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Float,
    Rational,
    Mc,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub mode: Option<String>,
    pub t: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub rational_max_t: Option<usize>,
    pub rational_max_rows: Option<usize>,
    pub max_tree_nodes: Option<u64>,
    pub mc_max_leaves: Option<u64>,
    pub max_combinations: Option<u64>,
    pub max_rules: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub rows: Vec<Vec<Prob>>,
    #[serde(default)]
    pub exchangeable: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetSection {
    pub mode: Option<String>,
    pub m: Option<usize>,
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesSection {
    pub alphabet: AlphabetSection,
    pub leaf: KernelSection,
    pub internal: KernelSection,
    pub root: KernelSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub p0: Vec<Prob>,
    pub p1: Vec<Prob>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub scheme: String,
    #[serde(default = "default_m")]
    pub m: usize,
    pub k: usize,
    pub delta: Option<Prob>,
    pub prior0: Option<Prob>,
    pub t: Option<usize>,
    pub t_range: Option<(usize, usize)>,
    pub engine: Option<EngineChoice>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub eta_min: Option<f64>,
    pub d: Option<usize>,
    pub analyses: Option<Vec<String>>,
    pub constant_letter: Option<usize>,
    pub out_dir: Option<String>,
    pub search: Option<SearchSection>,
    pub budgets: Option<BudgetSection>,
    pub rules: Option<RulesSection>,
    pub channel: Option<ChannelSection>,
}

fn default_m() -> usize {
    2
}

pub const KNOWN_ANALYSES: &[&str] = &[
    "graph",
    "assumptions",
    "bounds",
    "letter-decay",
    "message-floor",
    "fit",
];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!(
                "{}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        config.validate(path)?;
        Ok(config)
    }

    fn validate(&self, path: &Path) -> Result<(), CliError> {
        let at = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
        if self.schema != CONFIG_SCHEMA {
            return Err(at(format!(
                "unsupported schema {} (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if let Some((lo, hi)) = self.t_range {
            if lo < 1 || hi < lo {
                return Err(at(format!(
                    "t_range [{lo}, {hi}] must be nonempty and increasing"
                )));
            }
        }
        if self.t.is_none() && self.t_range.is_none() {
            return Err(at("one of \"t\" or \"t_range\" is required".into()));
        }
        if let Some(analyses) = &self.analyses {
            for a in analyses {
                if !KNOWN_ANALYSES.contains(&a.as_str()) {
                    return Err(at(format!(
                        "unknown analysis \"{a}\" (known: {})",
                        KNOWN_ANALYSES.join(", ")
                    )));
                }
            }
        }
        if let Some(section) = &self.search {
            if let Some(mode) = &section.mode {
                if mode != "per_node" && mode != "level_homogeneous" {
                    return Err(at(format!(
                        "unknown search mode \"{mode}\" (per_node or level_homogeneous)"
                    )));
                }
            }
        }
        if self.scheme != "custom" && self.rules.is_some() {
            return Err(at("inline \"rules\" require \"scheme\": \"custom\"".into()));
        }
        if self.scheme == "custom" && self.rules.is_none() {
            return Err(at(
                "\"scheme\": \"custom\" requires an inline \"rules\" object".into(),
            ));
        }
        Ok(())
    }

    pub fn engine(&self, flag: Option<EngineChoice>) -> EngineChoice {
        flag.or(self.engine).unwrap_or(EngineChoice::Float)
    }

    /// Seed policy: required exactly when the Monte Carlo engine is selected.
    pub fn seed_for(
        &self,
        flag: Option<u64>,
        engine: EngineChoice,
    ) -> Result<Option<u64>, CliError> {
        let seed = flag.or(self.seed);
        match (engine, seed) {
            (EngineChoice::Mc, None) => Err(CliError::Config(
                "the monte-carlo engine requires a seed".into(),
            )),
            (EngineChoice::Mc, some) => Ok(some),
            (_, Some(_)) => Err(CliError::Config(
                "a seed is only meaningful with the monte-carlo engine".into(),
            )),
            (_, None) => Ok(None),
        }
    }

    pub fn prior0(&self) -> Prob {
        self.prior0.clone().unwrap_or_else(Prob::half)
    }

    pub fn delta(&self) -> Result<Prob, CliError> {
        self.delta.clone().ok_or_else(|| {
            CliError::Config("\"delta\" is required for channel construction".into())
        })
    }

    pub fn t_list(&self) -> Vec<usize> {
        match (self.t, self.t_range) {
            (_, Some((lo, hi))) => (lo..=hi).collect(),
            (Some(t), None) => vec![t],
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn eta_min(&self) -> f64 {
        self.eta_min.unwrap_or(1e-3)
    }

    pub fn analyses(&self) -> Vec<String> {
        self.analyses
            .clone()
            .unwrap_or_else(|| KNOWN_ANALYSES.iter().map(|s| s.to_string()).collect())
    }

    pub fn engine_budget(&self) -> EngineBudget {
        let mut budget = EngineBudget::default();
        if let Some(section) = &self.budgets {
            if let Some(v) = section.rational_max_t {
                budget.rational_max_t = v;
            }
            if let Some(v) = section.rational_max_rows {
                budget.rational_max_rows = v;
            }
            if let Some(v) = section.max_tree_nodes {
                budget.max_tree_nodes = v;
            }
            if let Some(v) = section.mc_max_leaves {
                budget.mc_max_leaves = v;
            }
        }
        budget
    }

    pub fn search_budget(&self) -> SearchBudget {
        let mut budget = SearchBudget::default();
        if let Some(section) = &self.budgets {
            if let Some(v) = section.max_combinations {
                budget.max_combinations = v;
            }
            if let Some(v) = section.max_rules {
                budget.max_rules = v;
            }
        }
        budget
    }

    pub fn search_mode(&self) -> SearchMode {
        match self.search.as_ref().and_then(|s| s.mode.as_deref()) {
            Some("level_homogeneous") => SearchMode::LevelHomogeneous,
            _ => SearchMode::PerNode,
        }
    }

    pub fn search_t(&self) -> usize {
        self.search
            .as_ref()
            .and_then(|s| s.t)
            .or(self.t)
            .unwrap_or_else(|| *self.t_list().last().expect("nonempty"))
    }

    pub fn channel(&self) -> Result<ChannelSpec, CliError> {
        if let Some(section) = &self.channel {
            let n = section.p0.len();
            if n < 2 || section.p1.len() != n {
                return Err(CliError::Config(
                    "custom channel needs matching p0/p1 with at least 2 signals".into(),
                ));
            }
            let signals = if n == 2 {
                Alphabet::binary()
            } else {
                Alphabet::integers(n).map_err(|e| CliError::Config(e.to_string()))?
            };
            return ChannelSpec::new(
                self.prior0(),
                signals,
                section.p0.clone(),
                section.p1.clone(),
            )
            .map_err(|e| CliError::Config(e.to_string()));
        }
        fusetree_core::model::make_bsc_channel(self.delta()?, self.prior0())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    fn alphabet(section: &AlphabetSection) -> Result<Alphabet, CliError> {
        let bad = |e: fusetree_core::Error| CliError::Config(e.to_string());
        match (&section.mode, &section.labels) {
            (Some(mode), None) => {
                let m = section.m;
                match (mode.as_str(), m) {
                    ("binary", _) => Ok(Alphabet::binary()),
                    ("centered", Some(m)) => Alphabet::centered(m).map_err(bad),
                    ("indexed", Some(m)) => Alphabet::indexed(m).map_err(bad),
                    ("centered" | "indexed", None) => Err(CliError::Config(format!(
                        "alphabet mode \"{mode}\" needs \"m\""
                    ))),
                    (other, _) => Err(CliError::Config(format!(
                        "unknown alphabet mode \"{other}\""
                    ))),
                }
            }
            (None, Some(labels)) => Alphabet::parse_custom(labels).map_err(bad),
            _ => Err(CliError::Config(
                "alphabet needs exactly one of \"mode\" or \"labels\"".into(),
            )),
        }
    }

    /// Rule vector for the configured scheme (built-in name or inline tables).
    pub fn rule_vector(&self) -> Result<RuleVector, CliError> {
        if let Some(rules) = &self.rules {
            let messages = Self::alphabet(&rules.alphabet)?;
            let bad = |e: fusetree_core::Error| CliError::Config(e.to_string());
            let signals = self.channel()?.signals().clone();
            let leaf = StochasticKernel::from_rows(
                1,
                signals,
                messages.clone(),
                rules.leaf.rows.clone(),
                rules.leaf.exchangeable,
            )
            .map_err(bad)?;
            let internal = StochasticKernel::from_rows(
                self.k,
                messages.clone(),
                messages.clone(),
                rules.internal.rows.clone(),
                rules.internal.exchangeable,
            )
            .map_err(bad)?;
            let root = StochasticKernel::from_rows(
                self.k,
                messages,
                Alphabet::binary(),
                rules.root.rows.clone(),
                rules.root.exchangeable,
            )
            .map_err(bad)?;
            return RuleVector::new(internal, leaf, root).map_err(bad);
        }
        schemes::scheme_rule_vector(&self.scheme, self.m, self.k, self.constant_letter)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn run_meta(&self) -> Result<RunMeta, CliError> {
        let delta = self.delta.clone();
        if self.scheme.starts_with("quantizer") {
            let params = QuantizerParams::new(self.m, self.k)
                .map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(delta) = delta {
                let mut meta = RunMeta::quantizer(&params, delta);
                meta.scheme = self.scheme.clone();
                return Ok(meta);
            }
        }
        Ok(RunMeta {
            scheme: self.scheme.clone(),
            delta,
            quantizer: None,
        })
    }
}
