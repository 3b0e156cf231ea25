//! Model-agnostic decoding with domain-conditional mutual-information
//! scoring.
//!
//! The crate implements a beam-search decoder whose per-token scoring rule is
//! pluggable: plain log-likelihood, mutual-information penalties, an
//! entropy-gated variant that only penalizes uncertain steps, and a
//! domain-conditional variant where the penalty model is conditioned on a
//! prompt built from the source document (keywords or a representative
//! sentence). Around the decoder sit the pieces needed to run and check it
//! end to end:
//!
//! * [`model`] — the conditional-model interface plus exact built-in
//!   implementations (lookup tables, smoothed n-grams);
//! * [`scoring`] — the four scoring rules, predictive entropy, and the
//!   uncertainty gate;
//! * [`beam`] — the search engine with full step-level traces;
//! * [`prompt`] — domain-prompt construction (tf-idf keywords, sentence
//!   selection, priming phrases);
//! * [`eval`] — LCS-overlap and source-novelty metrics with corpus
//!   aggregation;
//! * [`tuning`] — seeded random grid search over the penalty weight and
//!   entropy threshold;
//! * [`protocol`] — a newline-delimited JSON protocol for plugging in
//!   external logit providers;
//! * [`corpus`] / [`config`] — file formats for documents and decode jobs;
//! * [`fixtures`] — deterministic models and corpora for tests and
//!   benchmarks.

pub mod beam;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod model;
pub mod prompt;
pub mod protocol;
pub mod scoring;
pub mod tuning;

pub use beam::{decode, step, DecodeConfig, DecodeResult, Hypothesis};
pub use config::JobConfig;
pub use corpus::{CorpusRecord, SummaryRecord};
pub use error::{CoreError, Result};
pub use eval::{evaluate_corpus, novel_ngram_rate, rouge_l, EvalReport, RougeScore};
pub use model::{
    train_ngram, ConditionalModel, ConditioningContext, NGramModel, TableModel,
    TokenDistribution, TokenId, Vocabulary,
};
pub use prompt::{
    build_domain_prompt, extract_keywords, select_sentence, DomainKind, DomainPrompt, DomainSpec,
    PromptLibrary,
};
pub use protocol::{serve_model, LogitRequest, LogitResponse, RemoteModel};
pub use scoring::{
    entropy, score_beam, score_cpmi, score_pmi, score_pmi_dc, ScoringConfig, StepScore, Strategy,
};
pub use tuning::{grid_search, GridSearchResult, GridSpec, Objective};
