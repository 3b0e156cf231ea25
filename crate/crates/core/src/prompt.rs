//! Domain prompt construction: keyword extraction, sentence selection, and
//! priming phrases.
//!
//! A domain prompt is the conditioning text handed to the penalty model (and,
//! for domain-conditional scoring, prepended to the generation model's
//! context). It is a priming phrase plus domain information pulled from the
//! source text: top keywords, the first sentence, a seeded random sentence,
//! or the sentence densest in keywords.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Phrase that performed best across the shipped prompt set.
pub const DEFAULT_PHRASE: &str = "that is to say";

/// The built-in priming phrases, grouped by the seed phrase each group
/// paraphrases.
const PHRASE_GROUPS: [(&str, [&str; 6]); 3] = [
    ("keywords", ["keywords", "topics", "components", "concepts", "features", "points"]),
    (
        "in summary",
        [
            "in summary",
            "to be brief",
            "last of all",
            "when all is said and done",
            "bringing up the rear",
            "in short",
        ],
    ),
    (
        "in other words",
        [
            "in other words",
            "that is to say",
            "to rephrase it",
            "take for example",
            "to put it another way",
            "case in point",
        ],
    ),
];

/// Common English function words excluded from keyword candidates.
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own",
    "said", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
    "yourself", "yourselves",
];

/// What kind of domain information to pull out of the source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Top-k keywords by tf-idf (or k seeded random words, see
    /// [`DomainSpec::random_words`]).
    Keywords,
    /// The first sentence of the source.
    FirstSentence,
    /// A seeded uniformly random sentence.
    RandomSentence,
    /// The sentence containing the most extracted keywords.
    KeywordSentence,
    /// No domain information (empty prompt).
    None,
}

impl FromStr for DomainKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keywords" => Ok(DomainKind::Keywords),
            "first_sentence" => Ok(DomainKind::FirstSentence),
            "random_sentence" => Ok(DomainKind::RandomSentence),
            "keyword_sentence" => Ok(DomainKind::KeywordSentence),
            "none" => Ok(DomainKind::None),
            other => Err(CoreError::config(format!("unknown domain kind {other:?}"))),
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::Keywords => "keywords",
            DomainKind::FirstSentence => "first_sentence",
            DomainKind::RandomSentence => "random_sentence",
            DomainKind::KeywordSentence => "keyword_sentence",
            DomainKind::None => "none",
        };
        f.write_str(s)
    }
}

/// Recipe for building a domain prompt from a source text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Keyword count; the shipped default is 3.
    pub k: usize,
    /// Seed for the random variants.
    pub seed: Option<u64>,
    /// With `kind = Keywords`, sample k candidate words uniformly instead of
    /// ranking by tf-idf (the word-level random ablation).
    pub random_words: bool,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec { kind: DomainKind::Keywords, k: 3, seed: None, random_words: false }
    }
}

impl DomainSpec {
    pub fn none() -> Self {
        DomainSpec { kind: DomainKind::None, k: 3, seed: None, random_words: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(CoreError::contract("domain spec requires k >= 1"));
        }
        let needs_seed = self.kind == DomainKind::RandomSentence
            || (self.kind == DomainKind::Keywords && self.random_words);
        if needs_seed && self.seed.is_none() {
            return Err(CoreError::contract(format!(
                "domain kind {} requires a seed",
                self.kind
            )));
        }
        Ok(())
    }
}

/// A rendered domain prompt. `rendered` is the exact conditioning string
/// every model receives; nothing downstream re-renders it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainPrompt {
    pub priming_phrase: String,
    pub domain_text: String,
    pub rendered: String,
}

impl DomainPrompt {
    /// Renders `phrase: domain_text`, or just `domain_text` when the phrase
    /// is empty.
    pub fn render(priming_phrase: &str, domain_text: &str) -> Self {
        let rendered = if priming_phrase.is_empty() {
            domain_text.to_string()
        } else {
            format!("{priming_phrase}: {domain_text}")
        };
        DomainPrompt {
            priming_phrase: priming_phrase.to_string(),
            domain_text: domain_text.to_string(),
            rendered,
        }
    }

    /// An entirely empty prompt. Decoding with this is exactly equivalent to
    /// decoding without domain conditioning.
    pub fn empty() -> Self {
        DomainPrompt::render("", "")
    }

    /// Wraps a conditioning string received over the wire (no phrase
    /// structure is recoverable, so the whole string is the domain text).
    pub fn from_rendered(rendered: &str) -> Self {
        DomainPrompt {
            priming_phrase: String::new(),
            domain_text: rendered.to_string(),
            rendered: rendered.to_string(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rendered.is_empty()
    }
}

/// The built-in priming phrases: three seed groups of six, plus the empty
/// phrase.
pub struct PromptLibrary;

impl PromptLibrary {
    /// All 18 non-empty phrases in group order.
    pub fn phrases() -> Vec<&'static str> {
        PHRASE_GROUPS.iter().flat_map(|(_, group)| group.iter().copied()).collect()
    }

    /// Phrases grouped by their seed phrase.
    pub fn groups() -> Vec<(&'static str, Vec<&'static str>)> {
        PHRASE_GROUPS.iter().map(|(seed, group)| (*seed, group.to_vec())).collect()
    }

    /// True for the 18 library phrases and the empty phrase.
    pub fn contains(phrase: &str) -> bool {
        phrase.is_empty() || PHRASE_GROUPS.iter().any(|(_, group)| group.contains(&phrase))
    }
}

/// Document-frequency table backing tf-idf keyword ranking.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DocFrequencyTable {
    n_docs: u64,
    df: HashMap<String, u64>,
}

impl DocFrequencyTable {
    pub fn new(n_docs: u64, df: HashMap<String, u64>) -> Self {
        DocFrequencyTable { n_docs, df }
    }

    /// Counts each term once per document over the given texts.
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: HashMap<String, u64> = HashMap::new();
        let mut n_docs = 0u64;
        for doc in docs {
            n_docs += 1;
            let mut seen: Vec<String> = candidate_terms(doc).into_iter().map(|(t, _)| t).collect();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        DocFrequencyTable { n_docs, df }
    }

    /// Reads the tab-separated table format: a `N=<corpus size>` header line,
    /// then `term<TAB>doc_count` lines.
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| CoreError::config("empty document-frequency table"))??;
        let n_docs = header
            .strip_prefix("N=")
            .and_then(|v| v.trim().parse::<u64>().ok())
            .ok_or_else(|| {
                CoreError::config(format!("expected 'N=<corpus size>' header, got {header:?}"))
            })?;
        let mut df = HashMap::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (term, count) = line.split_once('\t').ok_or_else(|| {
                CoreError::config(format!("line {}: expected 'term<TAB>doc_count'", idx + 2))
            })?;
            let count: u64 = count.trim().parse().map_err(|_| {
                CoreError::config(format!("line {}: bad doc_count {count:?}", idx + 2))
            })?;
            df.insert(term.to_string(), count);
        }
        Ok(DocFrequencyTable { n_docs, df })
    }

    /// Writes the table in the format read by [`DocFrequencyTable::from_file`].
    pub fn to_file(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "N={}", self.n_docs)?;
        let mut entries: Vec<(&String, &u64)> = self.df.iter().collect();
        entries.sort();
        for (term, count) in entries {
            writeln!(out, "{term}\t{count}")?;
        }
        Ok(())
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    /// Inverse document frequency as ln(N / df). Terms missing from the
    /// table count as df = 1 so unseen terms rank as maximally specific.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(1).max(1);
        ((self.n_docs.max(1)) as f64 / df as f64).ln()
    }
}

/// Keyword extraction output; `shortfall` is set when fewer than the
/// requested k distinct candidates exist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeywordExtraction {
    pub keywords: Vec<String>,
    pub shortfall: bool,
}

/// Lowercased, punctuation-stripped, stopword-filtered terms with counts, in
/// first-occurrence order.
fn candidate_terms(text: &str) -> Vec<(String, u64)> {
    let lowered = text.to_lowercase();
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for raw in lowered.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() || STOPWORDS.contains(&raw) {
            continue;
        }
        let term = raw.to_string();
        if !counts.contains_key(&term) {
            order.push(term.clone());
        }
        *counts.entry(term).or_insert(0) += 1;
    }
    order.into_iter().map(|t| { let c = counts[&t]; (t, c) }).collect()
}

/// Top-k distinct terms ranked by tf·idf (descending), ties broken
/// lexicographically. Deterministic for fixed inputs.
pub fn extract_keywords(
    text: &str,
    k: usize,
    background: &DocFrequencyTable,
) -> Result<KeywordExtraction> {
    if text.trim().is_empty() {
        return Err(CoreError::contract("empty text"));
    }
    if background.is_empty() {
        return Err(CoreError::contract("empty background document-frequency table"));
    }
    let candidates = candidate_terms(text);
    if candidates.is_empty() {
        return Err(CoreError::contract("no candidate terms"));
    }
    let mut scored: Vec<(f64, String)> = candidates
        .into_iter()
        .map(|(term, tf)| {
            let score = tf as f64 * background.idf(&term);
            (score, term)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let shortfall = scored.len() < k;
    let keywords = scored.into_iter().take(k).map(|(_, term)| term).collect();
    Ok(KeywordExtraction { keywords, shortfall })
}

/// k distinct candidate words sampled uniformly without replacement, in draw
/// order. Candidates are taken in sorted order so the draw depends only on
/// the text's term set and the seed.
fn random_words(text: &str, k: usize, seed: u64) -> Result<KeywordExtraction> {
    if text.trim().is_empty() {
        return Err(CoreError::contract("empty text"));
    }
    let mut terms: Vec<String> = candidate_terms(text).into_iter().map(|(t, _)| t).collect();
    if terms.is_empty() {
        return Err(CoreError::contract("no candidate terms"));
    }
    terms.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    while picked.len() < k && !terms.is_empty() {
        let idx = rng.gen_range(0..terms.len());
        picked.push(terms.swap_remove(idx));
    }
    let shortfall = picked.len() < k;
    Ok(KeywordExtraction { keywords: picked, shortfall })
}

/// Which sentence of the source to use as domain text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SentenceKind {
    First,
    Random,
    KeywordDensest,
}

/// Splits on `.`, `!`, `?` followed by whitespace and an uppercase letter or
/// digit. No abbreviation handling; text that never splits is one sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = trimmed.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            let mut j = i + 1;
            let mut saw_space = false;
            while j < chars.len() && chars[j].is_whitespace() {
                saw_space = true;
                j += 1;
            }
            if saw_space && j < chars.len() && (chars[j].is_uppercase() || chars[j].is_ascii_digit())
            {
                let sentence: String = chars[start..=i].iter().collect();
                sentences.push(sentence.trim().to_string());
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        let tail = tail.trim().to_string();
        if !tail.is_empty() {
            sentences.push(tail);
        }
    }
    sentences
}

/// Selects a sentence from the text. `keywords` is consulted only for
/// [`SentenceKind::KeywordDensest`]; `seed` only for [`SentenceKind::Random`].
pub fn select_sentence(
    text: &str,
    kind: SentenceKind,
    seed: Option<u64>,
    keywords: Option<&[String]>,
) -> Result<String> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Err(CoreError::contract("empty text"));
    }
    match kind {
        SentenceKind::First => Ok(sentences[0].clone()),
        SentenceKind::Random => {
            let seed =
                seed.ok_or_else(|| CoreError::contract("random sentence selection needs a seed"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = rng.gen_range(0..sentences.len());
            Ok(sentences[idx].clone())
        }
        SentenceKind::KeywordDensest => {
            let keywords = keywords
                .ok_or_else(|| CoreError::contract("keyword-densest selection needs keywords"))?;
            let mut best_idx = 0usize;
            let mut best_count = 0u64;
            for (idx, sentence) in sentences.iter().enumerate() {
                let count: u64 = candidate_terms(sentence)
                    .into_iter()
                    .filter(|(term, _)| keywords.contains(term))
                    .map(|(_, c)| c)
                    .sum();
                if count > best_count {
                    best_count = count;
                    best_idx = idx;
                }
            }
            Ok(sentences[best_idx].clone())
        }
    }
}

/// Builds the domain prompt for a source text: extracts the domain
/// information selected by `spec`, prepends `phrase`, and renders the final
/// conditioning string.
pub fn build_domain_prompt(
    spec: &DomainSpec,
    phrase: &str,
    text: &str,
    background: &DocFrequencyTable,
) -> Result<DomainPrompt> {
    spec.validate()?;
    if !PromptLibrary::contains(phrase) {
        return Err(CoreError::contract(format!("phrase {phrase:?} is not in the prompt library")));
    }
    let domain_text = match spec.kind {
        DomainKind::None => String::new(),
        DomainKind::Keywords => {
            let extraction = if spec.random_words {
                random_words(text, spec.k, spec.seed.expect("validated"))?
            } else {
                extract_keywords(text, spec.k, background)?
            };
            extraction.keywords.join(", ")
        }
        DomainKind::FirstSentence => select_sentence(text, SentenceKind::First, None, None)?,
        DomainKind::RandomSentence => {
            select_sentence(text, SentenceKind::Random, spec.seed, None)?
        }
        DomainKind::KeywordSentence => {
            let extraction = extract_keywords(text, spec.k, background)?;
            select_sentence(text, SentenceKind::KeywordDensest, None, Some(&extraction.keywords))?
        }
    };
    if spec.kind == DomainKind::None && phrase.is_empty() {
        return Ok(DomainPrompt::empty());
    }
    Ok(DomainPrompt::render(phrase, &domain_text))
}
