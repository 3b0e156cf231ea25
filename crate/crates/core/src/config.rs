//! Flat key=value job configuration and model-spec resolution.
//!
//! The config file format is intentionally plain: one `key = value` per
//! line, `#` comments, no sections. Recognized keys:
//!
//! ```text
//! strategy            beam | pmi | cpmi | pmi_dc
//! lambda              penalty weight (float >= 0)
//! tau                 entropy threshold in nats (float >= 0)
//! gate_enabled        true | false (default true)
//! beam_width          integer >= 1
//! max_length          integer >= 1
//! num_return          integer in 1..=beam_width
//! domain.kind         keywords | first_sentence | random_sentence |
//!                     keyword_sentence | none
//! domain.k            keyword count (default 3)
//! domain.random_words true | false (word-level random ablation)
//! prompt.phrase       a library phrase or empty
//! model.theta         model spec (see below)
//! model.phi           model spec
//! vocab               path to a vocabulary JSON (required by remote specs)
//! seed                integer seed for the random domain variants
//! jobs                decode parallelism (default 1)
//! provider.timeout_secs  provider response timeout (default 30)
//! ```
//!
//! Model specs:
//!
//! * `table:<path>` — lookup-table model from a JSON file
//! * `ngram:<path>?order=<n>&alpha=<a>` — n-gram model trained on a corpus
//!   file (one whitespace-tokenized sequence per line)
//! * `tcp://<host:port>` — remote provider over TCP (vocab required)
//! * `spawn:<command...>` — remote provider over the stdio of a spawned
//!   process (vocab required; command split on whitespace)
//!
//! The `PMIDC_PROVIDER_ENDPOINT` environment variable, when set, overrides
//! the endpoint of every `tcp://` spec.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::beam::DecodeConfig;
use crate::error::{CoreError, Result};
use crate::model::{
    corpus_to_ids, read_ngram_corpus, train_ngram, ConditionalModel, TableModel, Vocabulary,
};
use crate::prompt::{DomainKind, DomainSpec, PromptLibrary, DEFAULT_PHRASE};
use crate::protocol::{RemoteModel, DEFAULT_PROVIDER_TIMEOUT, PROVIDER_ENDPOINT_ENV};
use crate::scoring::{ScoringConfig, Strategy, BART_DEFAULTS};

/// A decode job: search settings, domain prompt recipe, and model specs.
#[derive(Clone, Debug, PartialEq)]
pub struct JobConfig {
    pub strategy: Strategy,
    pub lambda: f64,
    pub tau: f64,
    pub gate_enabled: bool,
    pub beam_width: usize,
    pub max_length: usize,
    pub num_return: usize,
    pub domain_kind: DomainKind,
    pub domain_k: usize,
    pub domain_random_words: bool,
    pub prompt_phrase: String,
    pub model_theta: Option<String>,
    pub model_phi: Option<String>,
    pub vocab_path: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    pub provider_timeout: Duration,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            strategy: Strategy::PmiDc,
            lambda: BART_DEFAULTS.lambda,
            tau: BART_DEFAULTS.tau,
            gate_enabled: true,
            beam_width: 6,
            max_length: 64,
            num_return: 1,
            domain_kind: DomainKind::Keywords,
            domain_k: 3,
            domain_random_words: false,
            prompt_phrase: DEFAULT_PHRASE.to_string(),
            model_theta: None,
            model_phi: None,
            vocab_path: None,
            seed: 0,
            jobs: 1,
            provider_timeout: DEFAULT_PROVIDER_TIMEOUT,
        }
    }
}

impl JobConfig {
    /// Parses a flat key=value config file. Unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = JobConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoreError::config(format!("line {}: expected key=value, got {raw:?}", idx + 1))
            })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| CoreError::config(format!("line {}: {e}", idx + 1)))?;
        }
        Ok(config)
    }

    /// Applies one key=value assignment (also used by CLI flag overrides).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "strategy" => self.strategy = value.parse()?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "tau" => self.tau = parse_num(key, value)?,
            "gate_enabled" => self.gate_enabled = parse_bool(key, value)?,
            "beam_width" => self.beam_width = parse_num(key, value)?,
            "max_length" => self.max_length = parse_num(key, value)?,
            "num_return" => self.num_return = parse_num(key, value)?,
            "domain.kind" => self.domain_kind = value.parse()?,
            "domain.k" => self.domain_k = parse_num(key, value)?,
            "domain.random_words" => self.domain_random_words = parse_bool(key, value)?,
            "prompt.phrase" => self.prompt_phrase = value.to_string(),
            "model.theta" => self.model_theta = Some(value.to_string()),
            "model.phi" => self.model_phi = Some(value.to_string()),
            "vocab" => self.vocab_path = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_num(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            "provider.timeout_secs" => {
                self.provider_timeout = Duration::from_secs(parse_num(key, value)?)
            }
            other => return Err(CoreError::config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            strategy: self.strategy,
            lambda: self.lambda,
            tau: self.tau,
            gate_enabled: self.gate_enabled,
        }
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            beam_width: self.beam_width,
            max_length: self.max_length,
            scoring: self.scoring(),
            num_return: self.num_return,
        }
    }

    pub fn domain_spec(&self) -> DomainSpec {
        DomainSpec {
            kind: self.domain_kind,
            k: self.domain_k,
            seed: Some(self.seed),
            random_words: self.domain_random_words,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.decode_config().validate()?;
        self.domain_spec().validate()?;
        if !PromptLibrary::contains(&self.prompt_phrase) {
            return Err(CoreError::config(format!(
                "prompt.phrase {:?} is not in the prompt library",
                self.prompt_phrase
            )));
        }
        Ok(())
    }

    /// Resolves the generation-model spec.
    pub fn resolve_theta(&self) -> Result<Box<dyn ConditionalModel>> {
        let spec = self
            .model_theta
            .as_deref()
            .ok_or_else(|| CoreError::config("model.theta is not set"))?;
        resolve_model(spec, self.vocab_path.as_deref(), self.provider_timeout)
    }

    /// Resolves the penalty-model spec when the strategy needs one.
    pub fn resolve_phi(&self) -> Result<Option<Box<dyn ConditionalModel>>> {
        if !self.strategy.needs_penalty_model() {
            return Ok(None);
        }
        let spec = self.model_phi.as_deref().ok_or_else(|| {
            CoreError::config(format!("strategy {} requires model.phi", self.strategy))
        })?;
        Ok(Some(resolve_model(spec, self.vocab_path.as_deref(), self.provider_timeout)?))
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| CoreError::config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(CoreError::config(format!("bad boolean {other:?} for {key}"))),
    }
}

/// Loads a vocabulary JSON file.
pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Instantiates a model from its spec string.
pub fn resolve_model(
    spec: &str,
    vocab_path: Option<&Path>,
    timeout: Duration,
) -> Result<Box<dyn ConditionalModel>> {
    if let Some(path) = spec.strip_prefix("table:") {
        return Ok(Box::new(TableModel::from_file(Path::new(path))?));
    }
    if let Some(rest) = spec.strip_prefix("ngram:") {
        return Ok(Box::new(resolve_ngram(rest)?));
    }
    if let Some(endpoint) = spec.strip_prefix("tcp://") {
        let endpoint = std::env::var(PROVIDER_ENDPOINT_ENV).unwrap_or_else(|_| endpoint.to_string());
        let vocab = remote_vocab(spec, vocab_path)?;
        return Ok(Box::new(RemoteModel::connect_tcp(&endpoint, vocab, timeout)?));
    }
    if let Some(command) = spec.strip_prefix("spawn:") {
        let parts: Vec<String> = command.split_whitespace().map(str::to_string).collect();
        let (program, args) = parts
            .split_first()
            .ok_or_else(|| CoreError::config("spawn: spec has no command"))?;
        let vocab = remote_vocab(spec, vocab_path)?;
        return Ok(Box::new(RemoteModel::spawn(program, args, vocab, timeout)?));
    }
    Err(CoreError::config(format!(
        "unrecognized model spec {spec:?} (expected table:, ngram:, tcp://, or spawn:)"
    )))
}

fn remote_vocab(spec: &str, vocab_path: Option<&Path>) -> Result<Vocabulary> {
    let path = vocab_path.ok_or_else(|| {
        CoreError::config(format!("remote model spec {spec:?} requires the vocab key"))
    })?;
    load_vocabulary(path)
}

fn resolve_ngram(rest: &str) -> Result<impl ConditionalModel> {
    let (path, query) = match rest.split_once('?') {
        Some((p, q)) => (p, q),
        None => (rest, ""),
    };
    let mut order = 2usize;
    let mut alpha = 1.0f64;
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CoreError::config(format!("bad ngram parameter {pair:?}")))?;
        match key {
            "order" => order = parse_num(key, value)?,
            "alpha" => alpha = parse_num(key, value)?,
            other => return Err(CoreError::config(format!("unknown ngram parameter {other:?}"))),
        }
    }
    let corpus = read_ngram_corpus(Path::new(path))?;
    let vocab = Vocabulary::from_corpus(corpus.iter().map(|s| s.as_slice()))?;
    let ids = corpus_to_ids(&vocab, &corpus)?;
    train_ngram(&vocab, &ids, order, alpha)
}
