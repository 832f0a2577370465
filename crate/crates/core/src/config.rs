//! TOML campaign configuration: parsing, field-level validation, and
//! assembly into runnable campaign parts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::{CampaignSettings, Clock, InitMode};
use crate::http::RetryPolicy;
use crate::landscape::{
    generate_potts_params, load_exact_landscape, ExternalOracle, Landscape, LandscapeError,
    MissingPolicy, Oracle, PottsLandscape, PottsParams, Sign,
};
use crate::llm::{ChatTransport, LiveTransport, LlmError, ReplayTransport, SamplingParams};
use crate::propose::{LlmProposer, ProposerConfig, TaskText};
use crate::select::Regime;
use crate::seq::{ResidueSet, Sequence, VariantSpace};

/// One problem with one config key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", format_fields(.0))]
    Invalid(Vec<FieldError>),
    #[error("{field}: {source}")]
    Landscape {
        field: String,
        #[source]
        source: LandscapeError,
    },
    #[error("{field}: {source}")]
    Llm {
        field: String,
        #[source]
        source: LlmError,
    },
}

fn format_fields(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    /// `exact`, `potts`, `synthetic` or `external`.
    pub kind: String,
    pub name: Option<String>,
    /// Full wild-type sequence.
    pub wild_type: Option<String>,
    /// 1-based mutable positions; all positions when omitted.
    pub sites: Option<Vec<usize>>,
    /// Residue alphabet for exact and external landscapes.
    pub residues: Option<String>,
    /// Exact table CSV or Potts parameter JSON.
    pub path: Option<PathBuf>,
    /// `error` or `zero` for variants missing from an exact table.
    pub missing: Option<String>,
    /// 1 or -1; Potts files carry their own, generated landscapes use 1.
    pub sign: Option<i64>,
    /// `[lo, hi]` min-max normalization of every score.
    pub normalize: Option<Vec<f64>>,
    // generated Potts landscapes
    pub length: Option<usize>,
    pub q: Option<usize>,
    pub field_scale: Option<f64>,
    pub coupling_scale: Option<f64>,
    pub density: Option<f64>,
    pub params_seed: Option<u64>,
    // external oracle
    pub url: Option<String>,
    #[serde(default)]
    pub retry: RetrySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrySection {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub timeout_ms: u64,
}

impl Default for RetrySection {
    fn default() -> Self {
        let p = RetryPolicy::default();
        Self {
            max_retries: p.max_retries,
            base_delay_ms: p.base_delay_ms,
            max_delay_ms: p.max_delay_ms,
            timeout_ms: p.timeout_ms,
        }
    }
}

impl RetrySection {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay_ms: self.base_delay_ms,
            max_delay_ms: self.max_delay_ms,
            timeout_ms: self.timeout_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeSection {
    /// `single`, `constrained`, `budget`, `multi_sum` or `multi_pareto`.
    pub kind: String,
    pub h: Option<usize>,
    pub bh: Option<usize>,
    pub weights: Option<Vec<f64>>,
}

impl Default for RegimeSection {
    fn default() -> Self {
        Self {
            kind: "single".into(),
            h: None,
            bh: None,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposerSection {
    /// `ea` or `llm`.
    pub mode: String,
    pub mutation_rate: f64,
    pub uniform_crossover: f64,
    pub max_llm_retries: u32,
}

impl Default for ProposerSection {
    fn default() -> Self {
        let p = ProposerConfig::default();
        Self {
            mode: "ea".into(),
            mutation_rate: p.mutation_rate,
            uniform_crossover: p.uniform_crossover,
            max_llm_retries: p.max_llm_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSection {
    /// `live` or `replay`.
    pub transport: String,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub replay_dir: Option<PathBuf>,
    pub description: Option<String>,
    /// Text file holding the dataset description.
    pub description_file: Option<PathBuf>,
    pub objective: String,
    pub retry: RetrySection,
}

impl Default for LlmSection {
    fn default() -> Self {
        let s = SamplingParams::default();
        Self {
            transport: "live".into(),
            base_url: "http://localhost:8000/v1".into(),
            model: s.model,
            temperature: s.temperature,
            max_tokens: s.max_tokens,
            replay_dir: None,
            description: None,
            description_file: None,
            objective: String::new(),
            retry: RetrySection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub population: usize,
    /// Defaults to 4 for 4-site spaces and 8 otherwise.
    pub iterations: Option<usize>,
    /// `random_space`, `single_mutant` or `filtered_pool`.
    pub init: String,
    /// Candidate table (`sequence,fitness`) for `filtered_pool`.
    pub init_source: Option<PathBuf>,
    pub fitness_range: Option<Vec<f64>>,
    pub min_gap: Option<usize>,
    pub seed: u64,
    pub threads: usize,
    /// `logical` or `wall` record timestamps.
    pub clock: String,
    pub topk: Vec<usize>,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            population: 32,
            iterations: None,
            init: "random_space".into(),
            init_source: None,
            fitness_range: None,
            min_gap: None,
            seed: 0,
            threads: 0,
            clock: "logical".into(),
            topk: vec![1, 10, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub landscape: LandscapeSection,
    #[serde(default)]
    pub regime: RegimeSection,
    #[serde(default)]
    pub proposer: ProposerSection,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub campaign: CampaignSection,
    /// Relative paths resolve against this directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Everything needed to run one seed.
pub struct CampaignParts {
    pub settings: CampaignSettings,
    pub oracle: Oracle,
    pub llm: Option<LlmProposer>,
}

const LANDSCAPE_KINDS: &[&str] = &["exact", "potts", "synthetic", "external"];
const REGIME_KINDS: &[&str] = &["single", "constrained", "budget", "multi_sum", "multi_pareto"];
const INIT_MODES: &[&str] = &["random_space", "single_mutant", "filtered_pool"];

struct Errors(Vec<FieldError>);

impl Errors {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(FieldError {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn one_of(&mut self, field: &str, value: &str, allowed: &[&str]) {
        if !allowed.contains(&value) {
            self.push(
                field,
                format!("unknown value {value:?}, expected one of {}", allowed.join(", ")),
            );
        }
    }

    fn unit(&mut self, field: &str, value: f64) {
        if !(0.0..=1.0).contains(&value) {
            self.push(field, format!("must lie in [0, 1], got {value}"));
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn llm_enabled(&self) -> bool {
        self.proposer.mode == "llm"
    }

    /// Checks every field that can be checked without reading other files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Errors(Vec::new());
        let l = &self.landscape;
        e.one_of("landscape.kind", &l.kind, LANDSCAPE_KINDS);
        let wild = match &l.wild_type {
            Some(w) => match Sequence::new(w) {
                Ok(s) => Some(s),
                Err(err) => {
                    e.push("landscape.wild_type", err.to_string());
                    None
                }
            },
            None => None,
        };
        if let Some(w) = &wild {
            if let Some(sites) = &l.sites {
                if let Err(err) = VariantSpace::new("check", w.clone(), sites) {
                    e.push("landscape.sites", err.to_string());
                }
            }
        }
        if let Some(r) = &l.residues {
            if let Err(err) = ResidueSet::new(r) {
                e.push("landscape.residues", err.to_string());
            }
        }
        if let Some(m) = &l.missing {
            e.one_of("landscape.missing", m, &["error", "zero"]);
        }
        if let Some(s) = l.sign {
            if s != 1 && s != -1 {
                e.push("landscape.sign", format!("must be 1 or -1, got {s}"));
            }
        }
        if let Some(n) = &l.normalize {
            if n.len() != 2 || !(n[0] < n[1]) {
                e.push("landscape.normalize", "expected [lo, hi] with lo < hi");
            }
        }
        match l.kind.as_str() {
            "exact" | "potts" => {
                if l.path.is_none() {
                    e.push("landscape.path", format!("required for kind = {:?}", l.kind));
                }
                if l.wild_type.is_none() {
                    e.push("landscape.wild_type", format!("required for kind = {:?}", l.kind));
                }
            }
            "external" => {
                if l.url.is_none() {
                    e.push("landscape.url", "required for kind = \"external\"");
                }
                if l.wild_type.is_none() {
                    e.push("landscape.wild_type", "required for kind = \"external\"");
                }
            }
            "synthetic" => {
                match l.length {
                    None => e.push("landscape.length", "required for kind = \"synthetic\""),
                    Some(n) if n < 2 => e.push("landscape.length", "must be at least 2"),
                    Some(n) => {
                        if wild.as_ref().is_some_and(|w| w.len() != n) {
                            e.push("landscape.wild_type", format!("must have length {n}"));
                        }
                    }
                }
                if let Some(q) = l.q {
                    if !(2..=20).contains(&q) {
                        e.push("landscape.q", format!("must lie in 2..=20, got {q}"));
                    }
                }
                for (f, v) in [("landscape.field_scale", l.field_scale), ("landscape.coupling_scale", l.coupling_scale)] {
                    if let Some(v) = v {
                        if !(v >= 0.0 && v.is_finite()) {
                            e.push(f, format!("must be a finite value >= 0, got {v}"));
                        }
                    }
                }
                if let Some(d) = l.density {
                    e.unit("landscape.density", d);
                }
            }
            _ => {}
        }

        let r = &self.regime;
        e.one_of("regime.kind", &r.kind, REGIME_KINDS);
        match r.kind.as_str() {
            "constrained" => match r.h {
                None => e.push("regime.h", "required for kind = \"constrained\""),
                Some(0) => e.push("regime.h", "must be at least 1"),
                _ => {}
            },
            "budget" => match r.bh {
                None => e.push("regime.bh", "required for kind = \"budget\""),
                Some(0) => e.push("regime.bh", "must be at least 1"),
                _ => {}
            },
            "multi_sum" => match &r.weights {
                None => e.push("regime.weights", "required for kind = \"multi_sum\""),
                Some(w) => {
                    if let Err(err) = (Regime::MultiSum { weights: w.clone() }).validate() {
                        e.push("regime.weights", err.to_string());
                    }
                }
            },
            _ => {}
        }

        let p = &self.proposer;
        e.one_of("proposer.mode", &p.mode, &["ea", "llm"]);
        e.unit("proposer.mutation_rate", p.mutation_rate);
        e.unit("proposer.uniform_crossover", p.uniform_crossover);

        if self.llm_enabled() {
            let m = &self.llm;
            e.one_of("llm.transport", &m.transport, &["live", "replay"]);
            if m.transport == "replay" && m.replay_dir.is_none() {
                e.push("llm.replay_dir", "required for transport = \"replay\"");
            }
            if m.transport == "live" && m.base_url.trim().is_empty() {
                e.push("llm.base_url", "required for transport = \"live\"");
            }
            match (&m.description, &m.description_file) {
                (None, None) => e.push("llm.description", "set description or description_file"),
                (Some(_), Some(_)) => {
                    e.push("llm.description", "set only one of description and description_file")
                }
                (Some(d), None) if d.trim().is_empty() => e.push("llm.description", "is empty"),
                _ => {}
            }
            if m.objective.trim().is_empty() {
                e.push("llm.objective", "required when proposer.mode = \"llm\"");
            }
            if !(m.temperature >= 0.0 && m.temperature.is_finite()) {
                e.push("llm.temperature", format!("must be >= 0, got {}", m.temperature));
            }
            if m.max_tokens == 0 {
                e.push("llm.max_tokens", "must be at least 1");
            }
            if m.model.trim().is_empty() {
                e.push("llm.model", "is empty");
            }
        }

        let c = &self.campaign;
        if c.population < 1 {
            e.push("campaign.population", "must be at least 1");
        }
        if c.iterations == Some(0) {
            e.push("campaign.iterations", "must be at least 1");
        }
        e.one_of("campaign.init", &c.init, INIT_MODES);
        e.one_of("campaign.clock", &c.clock, &["logical", "wall"]);
        if c.topk.is_empty() || c.topk.contains(&0) {
            e.push("campaign.topk", "needs at least one value, all >= 1");
        }
        if c.init == "filtered_pool" {
            if c.init_source.is_none() {
                e.push("campaign.init_source", "required for init = \"filtered_pool\"");
            }
            match &c.fitness_range {
                None => e.push("campaign.fitness_range", "required for init = \"filtered_pool\""),
                Some(r) if r.len() != 2 || !(r[0] <= r[1]) => {
                    e.push("campaign.fitness_range", "expected [lo, hi] with lo <= hi")
                }
                _ => {}
            }
            if c.min_gap.is_none() {
                e.push("campaign.min_gap", "required for init = \"filtered_pool\"");
            }
        }

        if e.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(e.0))
        }
    }

    pub fn regime(&self) -> Regime {
        let r = &self.regime;
        match r.kind.as_str() {
            "constrained" => Regime::Constrained { h: r.h.unwrap_or(1) },
            "budget" => Regime::Budget { bh: r.bh.unwrap_or(1) },
            "multi_sum" => Regime::MultiSum {
                weights: r.weights.clone().unwrap_or_default(),
            },
            "multi_pareto" => Regime::MultiPareto,
            _ => Regime::Single,
        }
    }

    /// Seed-independent hash of the resolved configuration.
    pub fn fingerprint(&self) -> String {
        let mut neutral = self.clone();
        neutral.campaign.seed = 0;
        neutral.campaign.threads = 0;
        let text = serde_json::to_string(&neutral).unwrap_or_default();
        crate::campaign::campaign_id(&text, 0)
    }

    pub fn build_oracle(&self) -> Result<Oracle, ConfigError> {
        let l = &self.landscape;
        let land_err = |field: &str| {
            let field = field.to_string();
            move |source| ConfigError::Landscape { field, source }
        };
        let wild = l.wild_type.as_deref().map(Sequence::new).transpose().map_err(|e| {
            ConfigError::Invalid(vec![FieldError {
                field: "landscape.wild_type".into(),
                message: e.to_string(),
            }])
        })?;
        let space_for = |wt: Sequence, name: &str| -> Result<VariantSpace, ConfigError> {
            match &l.sites {
                Some(s) => VariantSpace::new(name, wt, s),
                None => Ok(VariantSpace::all_sites(name, wt)),
            }
            .map_err(|e| {
                ConfigError::Invalid(vec![FieldError {
                    field: "landscape.sites".into(),
                    message: e.to_string(),
                }])
            })
        };
        let with_residues = |space: VariantSpace, set: ResidueSet| {
            space.with_residues(set).map_err(|e| {
                ConfigError::Invalid(vec![FieldError {
                    field: "landscape.residues".into(),
                    message: e.to_string(),
                }])
            })
        };
        let residues = match &l.residues {
            Some(r) => ResidueSet::new(r).map_err(|e| {
                ConfigError::Invalid(vec![FieldError {
                    field: "landscape.residues".into(),
                    message: e.to_string(),
                }])
            })?,
            None => ResidueSet::canonical(),
        };
        let sign_override = l.sign.map(|s| if s < 0 { Sign::Minus } else { Sign::Plus });

        let (landscape, space): (Arc<dyn Landscape>, VariantSpace) = match l.kind.as_str() {
            "exact" => {
                let name = l.name.clone().unwrap_or_else(|| "exact".into());
                let space = with_residues(space_for(wild.expect("validated"), &name)?, residues)?;
                let path = self.resolve(l.path.as_ref().expect("validated"));
                let policy = match l.missing.as_deref() {
                    Some("zero") => MissingPolicy::Zero,
                    _ => MissingPolicy::Error,
                };
                let table = load_exact_landscape(&path, space.clone())
                    .map_err(land_err("landscape.path"))?
                    .with_missing_policy(policy);
                (Arc::new(table), space)
            }
            "potts" => {
                let name = l.name.clone().unwrap_or_else(|| "potts".into());
                let path = self.resolve(l.path.as_ref().expect("validated"));
                let (params, file_sign) =
                    PottsParams::load(&path).map_err(land_err("landscape.path"))?;
                let wt = wild.expect("validated");
                let space = with_residues(space_for(wt.clone(), &name)?, params.alphabet().clone())?;
                let land = PottsLandscape::new(&name, params, wt, sign_override.unwrap_or(file_sign))
                    .map_err(land_err("landscape.wild_type"))?;
                (Arc::new(land), space)
            }
            "synthetic" => {
                let name = l.name.clone().unwrap_or_else(|| "syn-toy".into());
                let seed = l.params_seed.unwrap_or(0);
                let params = generate_potts_params(
                    l.length.unwrap_or(20),
                    l.q.unwrap_or(20),
                    l.field_scale.unwrap_or(1.0),
                    l.coupling_scale.unwrap_or(0.5),
                    l.density.unwrap_or(1.0),
                    seed,
                )
                .map_err(land_err("landscape"))?;
                let sign = sign_override.unwrap_or(Sign::Plus);
                let wt = match wild {
                    Some(w) => w,
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5741_4c44);
                        params.sample_wild_type(sign, 1.0, 100, &mut rng)
                    }
                };
                let space = with_residues(space_for(wt.clone(), &name)?, params.alphabet().clone())?;
                let land = PottsLandscape::new(&name, params, wt, sign)
                    .map_err(land_err("landscape.wild_type"))?;
                (Arc::new(land), space)
            }
            "external" => {
                let name = l.name.clone().unwrap_or_else(|| "external".into());
                let wt = wild.expect("validated");
                let space = with_residues(space_for(wt.clone(), &name)?, residues)?;
                let oracle = ExternalOracle::new(
                    &name,
                    l.url.as_deref().expect("validated"),
                    wt.len(),
                    l.retry.policy(),
                );
                (Arc::new(oracle), space)
            }
            other => unreachable!("landscape kind {other} passed validation"),
        };
        let oracle = Oracle::new(landscape, space).map_err(land_err("landscape"))?;
        match &l.normalize {
            Some(n) => oracle
                .with_normalization(n[0], n[1])
                .map_err(land_err("landscape.normalize")),
            None => Ok(oracle),
        }
    }

    pub fn description(&self) -> Result<String, ConfigError> {
        match (&self.llm.description, &self.llm.description_file) {
            (Some(d), _) => Ok(d.trim().to_string()),
            (None, Some(p)) => {
                let path = self.resolve(p);
                std::fs::read_to_string(&path)
                    .map(|s| s.trim().to_string())
                    .map_err(|source| ConfigError::Io {
                        path: path.display().to_string(),
                        source,
                    })
            }
            (None, None) => Ok(String::new()),
        }
    }

    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            model: self.llm.model.clone(),
            temperature: self.llm.temperature,
            max_tokens: self.llm.max_tokens,
        }
    }

    /// The transport named by `[llm]`.
    pub fn build_transport(&self) -> Result<Arc<dyn ChatTransport>, ConfigError> {
        match self.llm.transport.as_str() {
            "replay" => {
                let dir = self.resolve(self.llm.replay_dir.as_ref().expect("validated"));
                let t = ReplayTransport::open(&dir).map_err(|source| ConfigError::Llm {
                    field: "llm.replay_dir".into(),
                    source,
                })?;
                Ok(Arc::new(t))
            }
            _ => Ok(Arc::new(LiveTransport::from_env(
                &self.llm.base_url,
                self.llm.retry.policy(),
            ))),
        }
    }

    /// Assembles one seed's campaign. `transport` replaces the configured
    /// LLM transport when given.
    pub fn build(
        &self,
        seed: u64,
        transport: Option<Arc<dyn ChatTransport>>,
    ) -> Result<CampaignParts, ConfigError> {
        self.validate()?;
        let oracle = self.build_oracle()?;
        let c = &self.campaign;
        let space = oracle.space();
        let init = match c.init.as_str() {
            "single_mutant" => InitMode::SingleMutant,
            "filtered_pool" => {
                let path = self.resolve(c.init_source.as_ref().expect("validated"));
                let table = load_exact_landscape(&path, space.clone()).map_err(|source| {
                    ConfigError::Landscape {
                        field: "campaign.init_source".into(),
                        source,
                    }
                })?;
                let range = c.fitness_range.as_ref().expect("validated");
                InitMode::FilteredPool {
                    candidates: table.entries().to_vec(),
                    fitness_range: (range[0], range[1]),
                    min_gap: c.min_gap.expect("validated"),
                }
            }
            _ => InitMode::RandomSpace,
        };
        let iterations = c
            .iterations
            .unwrap_or(if space.arity() == 4 { 4 } else { 8 });
        let settings = CampaignSettings {
            population: c.population,
            iterations,
            seed,
            regime: self.regime(),
            proposer: ProposerConfig {
                mutation_rate: self.proposer.mutation_rate,
                uniform_crossover: self.proposer.uniform_crossover,
                llm_enabled: self.llm_enabled(),
                max_llm_retries: self.proposer.max_llm_retries,
            },
            init,
            threads: c.threads,
            clock: if c.clock == "wall" { Clock::Wall } else { Clock::Logical },
            topk: c.topk.clone(),
            fingerprint: Some(self.fingerprint()),
        };
        let llm = if self.llm_enabled() {
            let transport = match transport {
                Some(t) => t,
                None => self.build_transport()?,
            };
            Some(LlmProposer::new(
                transport,
                self.sampling(),
                TaskText {
                    description: self.description()?,
                    objective: self.llm.objective.clone(),
                },
                self.proposer.max_llm_retries,
            ))
        } else {
            None
        };
        Ok(CampaignParts {
            settings,
            oracle,
            llm,
        })
    }
}

/// A runnable configuration with every default written out.
pub fn reference_config() -> String {
    let retry = RetryPolicy::default();
    let sampling = SamplingParams::default();
    let proposer = ProposerConfig::default();
    format!(
        r#"# evoseq reference configuration. Every key shows its default; relative
# paths resolve against this file's directory.

[landscape]
# exact | potts | synthetic | external
kind = "synthetic"
name = "syn-toy"
# Generated Potts landscape (kind = "synthetic").
length = 20
q = 20
field_scale = 1.0
coupling_scale = 0.5
density = 1.0
params_seed = 0
# 1 or -1. Generated landscapes default to 1; Potts files carry their own.
sign = 1
# Omit wild_type on synthetic landscapes to Gibbs-sample one.
# wild_type = "..."
# 1-based mutable positions; all positions when omitted.
# sites = [39, 40, 41, 54]
# residues = "ACDEFGHIKLMNPQRSTVWY"
# kind = "exact": path = "table.csv" (sequence,fitness), missing = "error" | "zero"
# kind = "potts": path = "params.json"
# kind = "external": url = "http://localhost:9000"
# normalize = [lo, hi]

[landscape.retry]
max_retries = {max_retries}
base_delay_ms = {base_delay_ms}
max_delay_ms = {max_delay_ms}
timeout_ms = {timeout_ms}

[regime]
# single | constrained (h) | budget (bh) | multi_sum (weights) | multi_pareto
kind = "single"
# h = 5
# bh = 2
# weights = [0.5, 0.5]

[proposer]
# ea | llm
mode = "ea"
mutation_rate = {mutation_rate:?}
uniform_crossover = {uniform_crossover:?}
max_llm_retries = {max_llm_retries}

[llm]
# live | replay
transport = "live"
base_url = "http://localhost:8000/v1"
model = "{model}"
temperature = {temperature:?}
max_tokens = {max_tokens}
# replay_dir = "fixtures"
# description = "B1 domain of streptococcal protein G"
# description_file = "gb1.txt"
objective = ""

[llm.retry]
max_retries = {max_retries}
base_delay_ms = {base_delay_ms}
max_delay_ms = {max_delay_ms}
timeout_ms = {timeout_ms}

[campaign]
population = 32
# Defaults to 4 for 4-site spaces, 8 otherwise.
# iterations = 8
# random_space | single_mutant | filtered_pool
init = "random_space"
# filtered_pool needs all three:
# init_source = "pool.csv"
# fitness_range = [0.0, 0.5]
# min_gap = 6
seed = 0
threads = 0
# logical | wall
clock = "logical"
topk = [1, 10, 50]
"#,
        max_retries = retry.max_retries,
        base_delay_ms = retry.base_delay_ms,
        max_delay_ms = retry.max_delay_ms,
        timeout_ms = retry.timeout_ms,
        mutation_rate = proposer.mutation_rate,
        uniform_crossover = proposer.uniform_crossover,
        max_llm_retries = proposer.max_llm_retries,
        model = sampling.model,
        temperature = sampling.temperature,
        max_tokens = sampling.max_tokens,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!("[landscape]\nkind = \"synthetic\"\nlength = 6\nq = 4\n{extra}")
    }

    fn fields(err: ConfigError) -> Vec<String> {
        match err {
            ConfigError::Invalid(v) => v.into_iter().map(|f| f.field).collect(),
            other => panic!("expected field errors, got {other}"),
        }
    }

    #[test]
    fn reference_config_matches_defaults() {
        let cfg = Config::from_toml_str(&reference_config()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.regime, RegimeSection::default());
        assert_eq!(cfg.proposer, ProposerSection::default());
        assert_eq!(cfg.campaign, CampaignSection::default());
        assert_eq!(cfg.landscape.retry, RetrySection::default());
        assert_eq!(cfg.llm, LlmSection::default());
        let parts = cfg.build(0, None).unwrap();
        assert_eq!(parts.settings.iterations, 8);
        assert_eq!(parts.oracle.space().arity(), 20);
    }

    #[test]
    fn bad_regime_names_the_field() {
        let cfg = Config::from_toml_str(&minimal("[regime]\nkind = \"greedy\"\n")).unwrap();
        assert_eq!(fields(cfg.validate().unwrap_err()), vec!["regime.kind"]);
    }

    #[test]
    fn constrained_needs_h_and_weights_sum_to_one() {
        let cfg = Config::from_toml_str(&minimal("[regime]\nkind = \"constrained\"\n")).unwrap();
        assert_eq!(fields(cfg.validate().unwrap_err()), vec!["regime.h"]);
        let cfg = Config::from_toml_str(&minimal(
            "[regime]\nkind = \"multi_sum\"\nweights = [0.7, 0.7]\n",
        ))
        .unwrap();
        assert_eq!(fields(cfg.validate().unwrap_err()), vec!["regime.weights"]);
    }

    #[test]
    fn filtered_pool_requires_both_filters() {
        let cfg = Config::from_toml_str(&minimal(
            "[campaign]\ninit = \"filtered_pool\"\ninit_source = \"x.csv\"\n",
        ))
        .unwrap();
        assert_eq!(
            fields(cfg.validate().unwrap_err()),
            vec!["campaign.fitness_range", "campaign.min_gap"]
        );
    }

    #[test]
    fn llm_mode_requires_prompt_text() {
        let cfg = Config::from_toml_str(&minimal("[proposer]\nmode = \"llm\"\n")).unwrap();
        assert_eq!(
            fields(cfg.validate().unwrap_err()),
            vec!["llm.description", "llm.objective"]
        );
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let err = Config::from_toml_str(&minimal("[campaign]\npopulaton = 3\n")).unwrap_err();
        assert!(err.to_string().contains("populaton"), "{err}");
    }

    #[test]
    fn fingerprint_ignores_seed() {
        let mut a = Config::from_toml_str(&minimal("")).unwrap();
        let f = a.fingerprint();
        a.campaign.seed = 99;
        assert_eq!(a.fingerprint(), f);
        a.campaign.population = 5;
        assert_ne!(a.fingerprint(), f);
    }

    #[test]
    fn four_site_spaces_default_to_four_iterations() {
        let cfg = Config::from_toml_str(
            "[landscape]\nkind = \"synthetic\"\nlength = 6\nq = 4\nsites = [1, 2, 3, 4]\n",
        )
        .unwrap();
        assert_eq!(cfg.build(1, None).unwrap().settings.iterations, 4);
    }
}
