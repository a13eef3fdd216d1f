use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::assessment::{BloomLevel, DifficultyTier, FeatureRatings};
use crate::kg_store::NodeId;

/// Graph material an item was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub subject: String,
    pub chapter: NodeId,
    pub concept: NodeId,
    pub facts: Vec<NodeId>,
    /// Position of the bundle in the chapter's ranked material.
    pub bundle_rank: usize,
}

impl Provenance {
    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        std::iter::once(&self.chapter).chain(std::iter::once(&self.concept)).chain(&self.facts)
    }
}

fn default_bloom() -> BloomLevel {
    BloomLevel::Remember
}

/// A four-option multiple-choice item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionItem {
    #[serde(default)]
    pub id: String,
    pub stem: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    #[serde(default = "default_bloom")]
    pub bloom: BloomLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<DifficultyTier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Filled in once the item has been evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratings: Option<FeatureRatings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
}

impl QuestionItem {
    pub const OPTION_COUNT: usize = 4;

    /// Checks the structural invariants: non-empty stem, exactly four
    /// non-empty pairwise-distinct options, a valid answer index.
    pub fn validate(&self) -> Result<(), String> {
        if self.stem.trim().is_empty() {
            return Err("empty stem".into());
        }
        if self.options.len() != Self::OPTION_COUNT {
            return Err(format!("expected 4 options, got {}", self.options.len()));
        }
        if self.options.iter().any(|o| o.trim().is_empty()) {
            return Err("empty option".into());
        }
        let distinct: HashSet<String> =
            self.options.iter().map(|o| o.trim().to_lowercase()).collect();
        if distinct.len() != Self::OPTION_COUNT {
            return Err("options are not pairwise distinct".into());
        }
        if self.answer_index >= Self::OPTION_COUNT {
            return Err(format!("answer_index {} out of range", self.answer_index));
        }
        Ok(())
    }

    pub fn key(&self) -> Option<&str> {
        self.options.get(self.answer_index).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(options: &[&str], answer: usize) -> QuestionItem {
        QuestionItem {
            id: "q".into(),
            stem: "Which of the following is a tree?".into(),
            options: options.iter().map(|s| s.to_string()).collect(),
            answer_index: answer,
            bloom: BloomLevel::Remember,
            tier: None,
            provenance: None,
            ratings: None,
            difficulty: None,
        }
    }

    #[test]
    fn structural_checks() {
        assert!(item(&["oak", "granite", "salmon", "fern"], 0).validate().is_ok());
        assert!(item(&["oak", "granite", "salmon"], 0).validate().is_err());
        assert!(item(&["oak", "Oak", "salmon", "fern"], 0).validate().is_err());
        assert!(item(&["oak", "granite", "salmon", "fern"], 4).validate().is_err());
        let mut blank = item(&["oak", "granite", "salmon", "fern"], 0);
        blank.stem = "  ".into();
        assert!(blank.validate().is_err());
    }

    #[test]
    fn minimal_json_is_accepted() {
        let it: QuestionItem = serde_json::from_str(
            r#"{"stem":"Define erosion.","options":["a","b","c","d"],"answer_index":2}"#,
        )
        .unwrap();
        assert_eq!(it.bloom, BloomLevel::Remember);
        assert_eq!(it.key(), Some("c"));
    }
}
