//! Token vocabulary with dense integer ids and reserved special tokens.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Dense token id into a [`Vocabulary`].
pub type TokenId = u32;

/// Conventional surface forms for the special tokens, used when a vocabulary
/// is derived from a raw corpus.
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const PAD_TOKEN: &str = "<pad>";

/// An ordered token list with a bijective string-to-id mapping and distinct
/// bos/eos/pad ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_to_id: HashMap<String, TokenId>,
    bos: TokenId,
    eos: TokenId,
    pad: TokenId,
}

/// Serialized form: the token list plus the three special ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VocabularyData {
    pub tokens: Vec<String>,
    pub bos: TokenId,
    pub eos: TokenId,
    pub pad: TokenId,
}

impl TryFrom<VocabularyData> for Vocabulary {
    type Error = CoreError;

    fn try_from(data: VocabularyData) -> Result<Self> {
        Vocabulary::new(data.tokens, data.bos, data.eos, data.pad)
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData { tokens: v.tokens, bos: v.bos, eos: v.eos, pad: v.pad }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.bos == other.bos
            && self.eos == other.eos
            && self.pad == other.pad
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    /// Builds a vocabulary, checking that ids are dense, the token list has
    /// no duplicates, and the special ids are distinct and in range.
    pub fn new(tokens: Vec<String>, bos: TokenId, eos: TokenId, pad: TokenId) -> Result<Self> {
        if tokens.is_empty() {
            return Err(CoreError::contract("vocabulary must not be empty"));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token_to_id.insert(token.clone(), id as TokenId).is_some() {
                return Err(CoreError::contract(format!("duplicate token {token:?}")));
            }
        }
        let n = tokens.len() as TokenId;
        for (name, id) in [("bos", bos), ("eos", eos), ("pad", pad)] {
            if id >= n {
                return Err(CoreError::contract(format!("{name} id {id} out of range (|V|={n})")));
            }
        }
        if bos == eos || bos == pad || eos == pad {
            return Err(CoreError::contract("bos, eos, pad must be distinct"));
        }
        Ok(Vocabulary { tokens, token_to_id, bos, eos, pad })
    }

    /// Vocabulary over `<bos> <eos> <pad>` followed by the given content
    /// tokens, in the order given.
    pub fn with_content(content: &[&str]) -> Result<Self> {
        let mut tokens = vec![BOS_TOKEN.to_string(), EOS_TOKEN.to_string(), PAD_TOKEN.to_string()];
        tokens.extend(content.iter().map(|t| t.to_string()));
        Vocabulary::new(tokens, 0, 1, 2)
    }

    /// Derives a vocabulary from corpus sequences: specials first, then the
    /// distinct corpus tokens in sorted order.
    pub fn from_corpus<'a>(sequences: impl IntoIterator<Item = &'a [String]>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for seq in sequences {
            for token in seq {
                seen.insert(token.clone());
            }
        }
        for special in [BOS_TOKEN, EOS_TOKEN, PAD_TOKEN] {
            seen.remove(special);
        }
        let mut tokens = vec![BOS_TOKEN.to_string(), EOS_TOKEN.to_string(), PAD_TOKEN.to_string()];
        tokens.extend(seen);
        Vocabulary::new(tokens, 0, 1, 2)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn pad(&self) -> TokenId {
        self.pad
    }

    pub fn token(&self, id: TokenId) -> Result<&str> {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .ok_or_else(|| CoreError::contract(format!("token id {id} out of range")))
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        (id as usize) < self.tokens.len()
    }

    /// Checks every id is in range; used to validate prefixes.
    pub fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        for &id in ids {
            if !self.contains_id(id) {
                return Err(CoreError::contract(format!(
                    "unknown token id {id} (|V|={})",
                    self.tokens.len()
                )));
            }
        }
        Ok(())
    }

    /// Whitespace-tokenizes text into ids, silently dropping words that are
    /// not in the vocabulary. Used to fold conditioning text into n-gram
    /// contexts.
    pub fn tokenize_known(&self, text: &str) -> Vec<TokenId> {
        text.split_whitespace().filter_map(|w| self.id(w)).collect()
    }

    /// Renders a decoded sequence as text, skipping bos/eos/pad.
    pub fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let mut words = Vec::new();
        for &id in ids {
            if id == self.bos || id == self.eos || id == self.pad {
                continue;
            }
            words.push(self.token(id)?);
        }
        Ok(words.join(" "))
    }
}
