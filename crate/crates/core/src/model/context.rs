//! Conditioning contexts and their canonical serialization.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::vocab::{TokenId, Vocabulary};
use crate::prompt::DomainPrompt;

/// Everything a model may condition on: the source text, the rendered domain
/// prompt, and the decoded prefix.
///
/// An absent source or domain prompt serializes exactly like an empty one, so
/// decoding with an empty domain prompt is indistinguishable from decoding
/// without domain conditioning, by construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditioningContext {
    pub source_text: Option<String>,
    pub domain_prompt: Option<DomainPrompt>,
    pub prefix: Vec<TokenId>,
}

impl ConditioningContext {
    pub fn new(
        source_text: Option<&str>,
        domain_prompt: Option<&DomainPrompt>,
        prefix: Vec<TokenId>,
    ) -> Self {
        ConditioningContext {
            source_text: source_text.map(str::to_string),
            domain_prompt: domain_prompt.cloned(),
            prefix,
        }
    }

    /// Prefix-only context (the penalty model without a domain prompt).
    pub fn prefix_only(prefix: Vec<TokenId>) -> Self {
        ConditioningContext { source_text: None, domain_prompt: None, prefix }
    }

    pub fn rendered_domain(&self) -> &str {
        self.domain_prompt.as_ref().map(|d| d.rendered.as_str()).unwrap_or("")
    }

    /// Checks the context invariants against a vocabulary: a non-empty prefix
    /// starts with bos, all ids are in range, and at least one conditioning
    /// component is present.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        if self.source_text.is_none() && self.domain_prompt.is_none() && self.prefix.is_empty() {
            return Err(CoreError::contract("context has no source, domain, or prefix"));
        }
        if let Some(&first) = self.prefix.first() {
            if first != vocab.bos() {
                return Err(CoreError::contract(format!(
                    "prefix must start with bos ({}), got {first}",
                    vocab.bos()
                )));
            }
        }
        vocab.check_ids(&self.prefix)
    }

    /// The text component of the canonical key: `<source>|<domain>` with
    /// literal pipes and backslashes escaped. Also the `context_text` carried
    /// in wire requests.
    pub fn context_text(&self) -> String {
        let source = self.source_text.as_deref().unwrap_or("");
        format!("{}|{}", escape_segment(source), escape_segment(self.rendered_domain()))
    }

    /// Canonical serialization `<source>|<domain>|<id,id,...>` used for
    /// exact-match lookups. Bijective: distinct contexts produce distinct
    /// keys.
    pub fn canonical_key(&self) -> String {
        canonical_key_parts(
            self.source_text.as_deref(),
            self.domain_prompt.as_ref().map(|d| d.rendered.as_str()),
            &self.prefix,
        )
    }
}

/// Builds the canonical key from raw parts; `None` and `Some("")` are
/// equivalent on both text segments.
pub fn canonical_key_parts(
    source: Option<&str>,
    domain_rendered: Option<&str>,
    prefix: &[TokenId],
) -> String {
    let ids: Vec<String> = prefix.iter().map(|id| id.to_string()).collect();
    format!(
        "{}|{}|{}",
        escape_segment(source.unwrap_or("")),
        escape_segment(domain_rendered.unwrap_or("")),
        ids.join(",")
    )
}

fn escape_segment(text: &str) -> String {
    text.replace('\\', "\\\\").replace('|', "\\|")
}

/// Splits a `context_text` back into its source and domain segments,
/// reversing [`ConditioningContext::context_text`].
pub fn split_context_text(text: &str) -> Result<(String, String)> {
    let mut segments = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(escaped @ ('\\' | '|')) => current.push(escaped),
                _ => return Err(CoreError::contract("dangling escape in context text")),
            },
            '|' => {
                segments.push(std::mem::take(&mut current));
            }
            other => current.push(other),
        }
    }
    segments.push(current);
    if segments.len() != 2 {
        return Err(CoreError::contract(format!(
            "context text must have exactly 2 segments, got {}",
            segments.len()
        )));
    }
    let domain = segments.pop().expect("len checked");
    let source = segments.pop().expect("len checked");
    Ok((source, domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_key_shape() {
        let ctx = ConditioningContext::new(
            Some("a source"),
            Some(&DomainPrompt::render("in short", "economy")),
            vec![0, 3, 4],
        );
        assert_eq!(ctx.canonical_key(), "a source|in short: economy|0,3,4");
    }

    #[test]
    fn pipes_in_text_are_escaped() {
        let ctx = ConditioningContext::new(Some("a|b"), None, vec![0]);
        assert_eq!(ctx.canonical_key(), "a\\|b||0");
        let (source, domain) = split_context_text(&ctx.context_text()).unwrap();
        assert_eq!(source, "a|b");
        assert_eq!(domain, "");
    }

    #[test]
    fn empty_domain_and_absent_domain_share_a_key() {
        let absent = ConditioningContext::new(Some("src"), None, vec![0]);
        let empty = ConditioningContext::new(Some("src"), Some(&DomainPrompt::empty()), vec![0]);
        assert_eq!(absent.canonical_key(), empty.canonical_key());
    }

    #[test]
    fn validate_demands_bos_start() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let ctx = ConditioningContext::prefix_only(vec![3]);
        assert!(ctx.validate(&vocab).is_err());
        let ok = ConditioningContext::prefix_only(vec![0, 3]);
        assert!(ok.validate(&vocab).is_ok());
    }

    #[test]
    fn validate_rejects_out_of_range_ids() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let ctx = ConditioningContext::prefix_only(vec![0, 99]);
        assert!(ctx.validate(&vocab).is_err());
    }

    #[test]
    fn fully_empty_context_rejected() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let ctx = ConditioningContext::default();
        assert!(ctx.validate(&vocab).is_err());
    }

    #[test]
    fn split_rejects_wrong_segment_count() {
        assert!(split_context_text("only-one-segment").is_err());
        assert!(split_context_text("a|b|c").is_err());
    }
}
