//! Deterministic lookup-table model, the oracle model used throughout the
//! test suites and the toy provider.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::context::{canonical_key_parts, ConditioningContext};
use crate::model::dist::TokenDistribution;
use crate::model::vocab::{TokenId, Vocabulary, VocabularyData};
use crate::model::ConditionalModel;

/// A conditional model backed by an exact-match transition table keyed on the
/// canonical context serialization. Contexts without an entry fall back to
/// the default distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableModel {
    vocabulary: Vocabulary,
    transitions: BTreeMap<String, TokenDistribution>,
    default_distribution: TokenDistribution,
}

impl TableModel {
    pub fn new(vocabulary: Vocabulary, default_distribution: TokenDistribution) -> Result<Self> {
        if default_distribution.len() != vocabulary.len() {
            return Err(CoreError::contract(format!(
                "default distribution length {} != |V| {}",
                default_distribution.len(),
                vocabulary.len()
            )));
        }
        Ok(TableModel { vocabulary, transitions: BTreeMap::new(), default_distribution })
    }

    /// Registers the distribution served for the exact context
    /// `(source, domain, prefix)`.
    pub fn insert(
        &mut self,
        source: Option<&str>,
        domain_rendered: Option<&str>,
        prefix: &[TokenId],
        dist: TokenDistribution,
    ) -> Result<()> {
        if dist.len() != self.vocabulary.len() {
            return Err(CoreError::contract(format!(
                "distribution length {} != |V| {}",
                dist.len(),
                self.vocabulary.len()
            )));
        }
        dist.validate()?;
        self.vocabulary.check_ids(prefix)?;
        let key = canonical_key_parts(source, domain_rendered, prefix);
        self.transitions.insert(key, dist);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn from_spec(spec: &TableModelFile) -> Result<Self> {
        spec.build()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let spec: TableModelFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        spec.build()
    }
}

impl ConditionalModel for TableModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn next_distribution(&self, ctx: &ConditioningContext) -> Result<TokenDistribution> {
        ctx.validate(&self.vocabulary)?;
        let key = ctx.canonical_key();
        Ok(self.transitions.get(&key).unwrap_or(&self.default_distribution).clone())
    }
}

/// On-disk table model description. Distributions are written as sparse
/// `token -> probability mass` maps; unlisted tokens get the probability
/// floor. The loader normalizes masses, so rows do not have to sum to 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableModelFile {
    pub vocabulary: VocabularyData,
    /// Fallback row; uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub transitions: Vec<TransitionSpec>,
}

/// One table row: the context parts (token strings for readability) and the
/// sparse next-token masses.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TransitionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// Prefix as token strings, including the leading bos token.
    pub prefix: Vec<String>,
    pub next: BTreeMap<String, f64>,
}

impl TableModelFile {
    pub fn build(&self) -> Result<TableModel> {
        let vocabulary: Vocabulary = self.vocabulary.clone().try_into()?;
        let default = match &self.default {
            Some(masses) => sparse_to_distribution(&vocabulary, masses)?,
            None => TokenDistribution::uniform(vocabulary.len())?,
        };
        let mut model = TableModel::new(vocabulary.clone(), default)?;
        for spec in &self.transitions {
            let prefix: Vec<TokenId> = spec
                .prefix
                .iter()
                .map(|t| {
                    vocabulary
                        .id(t)
                        .ok_or_else(|| CoreError::config(format!("unknown prefix token {t:?}")))
                })
                .collect::<Result<_>>()?;
            let dist = sparse_to_distribution(&vocabulary, &spec.next)?;
            model.insert(spec.source.as_deref(), spec.domain.as_deref(), &prefix, dist)?;
        }
        Ok(model)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }
}

fn sparse_to_distribution(
    vocabulary: &Vocabulary,
    masses: &BTreeMap<String, f64>,
) -> Result<TokenDistribution> {
    let mut probs = vec![0.0; vocabulary.len()];
    for (token, &mass) in masses {
        let id = vocabulary
            .id(token)
            .ok_or_else(|| CoreError::config(format!("unknown token {token:?} in table row")))?;
        probs[id as usize] = mass;
    }
    TokenDistribution::from_probs(&probs)
}
