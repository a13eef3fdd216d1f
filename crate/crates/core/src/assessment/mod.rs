//! Difficulty mathematics: the 3PL response model, the seven-feature rubric
//! with its 1/2/3 ratings, weighted aggregation and the tolerance gate used
//! to accept or reject generated items.

mod irt;
mod rubric;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::QuestionItem;
use crate::kg_store::KnowledgeGraph;
use crate::text;

pub use irt::{irt_probability, irt_slope, IrtParams};
pub use rubric::{
    bloom_profile, default_bloom_verbs, rate_features, total_difficulty, weighted_difficulty,
    BloomLevel, Cuts, DifficultyTier, FeatureId, FeatureMeasurements, FeatureRatings,
    FeatureWeights, RatingThresholds, TierBands, TierSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssessError {
    #[error("invalid IRT parameters: {0}")]
    InvalidParams(String),
    #[error("malformed item: {0}")]
    MalformedItem(String),
    #[error("all feature weights are zero")]
    AllZeroWeights,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid ratings: {0}")]
    InvalidRatings(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("invalid rubric config: {0}")]
    InvalidConfig(String),
}

impl AssessError {
    pub fn code(&self) -> &'static str {
        match self {
            AssessError::InvalidParams(_) => "InvalidParams",
            AssessError::MalformedItem(_) => "MalformedItem",
            AssessError::AllZeroWeights => "AllZeroWeights",
            AssessError::InvalidWeights(_) => "InvalidWeights",
            AssessError::InvalidRatings(_) => "InvalidRatings",
            AssessError::InvalidThresholds(_) => "InvalidThresholds",
            AssessError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

/// Pairwise text similarity in `[0, 1]`.
pub trait TextSimilarity: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cosine similarity of term-frequency vectors over lowercased,
/// stopword-filtered tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfCosine;

impl TextSimilarity for TfCosine {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let ta = text::content_tokens(a);
        let tb = text::content_tokens(b);
        if ta.is_empty() || tb.is_empty() {
            return if ta.is_empty() && tb.is_empty() && text::normalize_label(a) == text::normalize_label(b) {
                1.0
            } else {
                0.0
            };
        }
        fn tf(toks: &[String]) -> BTreeMap<&str, f64> {
            let mut m: BTreeMap<&str, f64> = BTreeMap::new();
            for t in toks {
                *m.entry(t.as_str()).or_default() += 1.0;
            }
            m
        }
        let (va, vb) = (tf(&ta), tf(&tb));
        if va == vb {
            return 1.0;
        }
        let dot: f64 = va.iter().filter_map(|(k, x)| vb.get(k).map(|y| x * y)).sum();
        let na: f64 = va.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = vb.values().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Cosine over caller-supplied embedding vectors keyed by normalized text;
/// texts without a vector fall back to [`TfCosine`].
#[derive(Debug, Clone, Default)]
pub struct EmbeddingSimilarity {
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingSimilarity {
    pub fn new(vectors: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        EmbeddingSimilarity {
            vectors: vectors.into_iter().map(|(k, v)| (text::normalize_label(&k), v)).collect(),
        }
    }
}

impl TextSimilarity for EmbeddingSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let va = self.vectors.get(&text::normalize_label(a));
        let vb = self.vectors.get(&text::normalize_label(b));
        match (va, vb) {
            (Some(x), Some(y)) if x.len() == y.len() && !x.is_empty() => {
                let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
                let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
                if nx == 0.0 || ny == 0.0 {
                    0.0
                } else {
                    (dot / (nx * ny)).clamp(0.0, 1.0)
                }
            }
            _ => TfCosine.similarity(a, b),
        }
    }
}

/// Domain-term set for vocabulary density, matched as token n-grams.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    terms: HashSet<Vec<String>>,
    longest: usize,
}

impl Lexicon {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::default();
        for l in labels {
            let toks = text::tokens(l.as_ref());
            if !toks.is_empty() {
                lex.longest = lex.longest.max(toks.len());
                lex.terms.insert(toks);
            }
        }
        lex
    }

    /// Text and concept labels of a subject graph.
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        Self::from_labels(graph.lexicon())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Fraction of the text's tokens covered by lexicon terms, using greedy
    /// longest match from the left.
    pub fn density(&self, text: &str) -> f64 {
        let toks = text::tokens(text);
        if toks.is_empty() {
            return 0.0;
        }
        let mut covered = 0usize;
        let mut i = 0;
        'outer: while i < toks.len() {
            for len in (1..=self.longest.min(toks.len() - i)).rev() {
                if self.terms.contains(&toks[i..i + len]) {
                    covered += len;
                    i += len;
                    continue 'outer;
                }
            }
            i += 1;
        }
        covered as f64 / toks.len() as f64
    }
}

fn verb_forms(verb: &str) -> Vec<String> {
    let v = verb.to_lowercase();
    let mut forms = vec![v.clone(), format!("{v}s"), format!("{v}es"), format!("{v}d"), format!("{v}ed"), format!("{v}ing")];
    if let Some(stem) = v.strip_suffix('e') {
        forms.push(format!("{stem}ing"));
    }
    if let Some(stem) = v.strip_suffix('y') {
        forms.push(format!("{stem}ies"));
        forms.push(format!("{stem}ied"));
    }
    forms
}

/// Classifies a stem by the highest Bloom level whose verb appears in it,
/// defaulting to Remember.
pub fn classify_bloom(stem: &str, verbs: &BTreeMap<BloomLevel, Vec<String>>) -> BloomLevel {
    let toks: HashSet<String> = text::tokens(stem).into_iter().collect();
    BloomLevel::ALL
        .iter()
        .rev()
        .copied()
        .find(|level| {
            verbs
                .get(level)
                .into_iter()
                .flatten()
                .any(|v| verb_forms(v).iter().any(|f| toks.contains(f)))
        })
        .unwrap_or(BloomLevel::Remember)
}

/// Rubric settings normally read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RubricConfig {
    pub thresholds: RatingThresholds,
    pub weights: FeatureWeights,
    pub tiers: TierBands,
    pub epsilon: f64,
    /// Similarity to the key at or above which a distractor counts as plausible.
    pub tau: f64,
    pub bloom_verbs: BTreeMap<BloomLevel, Vec<String>>,
}

impl Default for RubricConfig {
    fn default() -> Self {
        RubricConfig {
            thresholds: RatingThresholds::default(),
            weights: FeatureWeights::default(),
            tiers: TierBands::default(),
            epsilon: 2.0,
            tau: 0.4,
            bloom_verbs: default_bloom_verbs(),
        }
    }
}

impl RubricConfig {
    pub fn validate(&self) -> Result<(), AssessError> {
        self.thresholds.validate()?;
        self.tiers.validate()?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(AssessError::InvalidConfig(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(AssessError::InvalidConfig(format!("tau {} not in [0, 1]", self.tau)));
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Raw values for the seven features of an item.
pub fn measure_features(
    item: &QuestionItem,
    lexicon: &Lexicon,
    similarity: &dyn TextSimilarity,
    rubric: &RubricConfig,
) -> Result<FeatureMeasurements, AssessError> {
    if item.stem.trim().is_empty() {
        return Err(AssessError::MalformedItem("empty stem".into()));
    }
    if item.options.len() != QuestionItem::OPTION_COUNT {
        return Err(AssessError::MalformedItem(format!(
            "expected 4 options, got {}",
            item.options.len()
        )));
    }
    if item.answer_index >= QuestionItem::OPTION_COUNT {
        return Err(AssessError::MalformedItem(format!(
            "answer_index {} out of range",
            item.answer_index
        )));
    }
    let opts = &item.options;
    let mut m = FeatureMeasurements::default();
    m[FeatureId::StemLength] = text::word_count(&item.stem) as f64;
    m[FeatureId::VocabDensity] = lexicon.density(&item.stem);
    m[FeatureId::CognitiveLevel] = classify_bloom(&item.stem, &rubric.bloom_verbs).ordinal() as f64;
    let lengths: Vec<f64> = opts.iter().map(|o| text::word_count(o) as f64).collect();
    m[FeatureId::OptionLength] = mean(&lengths);
    let mut pairwise = Vec::with_capacity(6);
    for i in 0..opts.len() {
        for j in i + 1..opts.len() {
            pairwise.push(similarity.similarity(&opts[i], &opts[j]));
        }
    }
    m[FeatureId::OptionSimilarity] = mean(&pairwise);
    let overlap: Vec<f64> = opts.iter().map(|o| similarity.similarity(&item.stem, o)).collect();
    m[FeatureId::StemOptionOverlap] = mean(&overlap);
    let key = &opts[item.answer_index];
    m[FeatureId::PlausibleDistractors] = opts
        .iter()
        .enumerate()
        .filter(|(i, o)| *i != item.answer_index && similarity.similarity(o, key) >= rubric.tau)
        .count() as f64;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBreakdown {
    pub feature: FeatureId,
    pub raw: f64,
    pub rating: u8,
    pub weight: f64,
    pub contribution: f64,
}

/// Outcome of the tolerance gate for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemEvaluation {
    /// Weighted difficulty `D = sum w_i v_i`, with `v_i` the feature ratings.
    pub difficulty: f64,
    /// Unweighted total `T = sum d_i`.
    pub total: u32,
    pub target: f64,
    pub epsilon: f64,
    pub deviation: f64,
    pub pass: bool,
    pub ratings: FeatureRatings,
    pub breakdown: Vec<FeatureBreakdown>,
}

/// `|D - D*| <= epsilon`.
pub fn within_tolerance(d: f64, target: f64, epsilon: f64) -> bool {
    (d - target).abs() <= epsilon
}

/// Measures, rates and weighs an item, then applies the tolerance gate
/// against `target`.
pub fn evaluate_item_difficulty(
    item: &QuestionItem,
    target: f64,
    epsilon: f64,
    rubric: &RubricConfig,
    lexicon: &Lexicon,
    similarity: &dyn TextSimilarity,
) -> Result<ItemEvaluation, AssessError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(AssessError::InvalidConfig(format!("epsilon {epsilon} must be > 0")));
    }
    let measurements = measure_features(item, lexicon, similarity, rubric)?;
    let ratings = rate_features(&measurements, &rubric.thresholds);
    let difficulty = weighted_difficulty(&ratings, &rubric.weights)?;
    let breakdown = FeatureId::ALL
        .iter()
        .map(|&f| FeatureBreakdown {
            feature: f,
            raw: measurements[f],
            rating: ratings[f],
            weight: rubric.weights[f],
            contribution: rubric.weights[f] * ratings[f] as f64,
        })
        .collect();
    let deviation = (difficulty - target).abs();
    Ok(ItemEvaluation {
        difficulty,
        total: total_difficulty(&ratings),
        target,
        epsilon,
        deviation,
        pass: within_tolerance(difficulty, target, epsilon),
        ratings,
        breakdown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(stem: &str, options: [&str; 4]) -> QuestionItem {
        QuestionItem {
            id: "t".into(),
            stem: stem.into(),
            options: options.iter().map(|s| s.to_string()).collect(),
            answer_index: 0,
            bloom: BloomLevel::Remember,
            tier: None,
            provenance: None,
            ratings: None,
            difficulty: None,
        }
    }

    #[test]
    fn word_counts() {
        let it = item("Define erosion.", ["wind", "rain", "ice", "heat"]);
        let m = measure_features(&it, &Lexicon::default(), &TfCosine, &RubricConfig::default()).unwrap();
        assert_eq!(m[FeatureId::StemLength], 2.0);
        assert_eq!(m[FeatureId::OptionLength], 1.0);
        assert_eq!(m[FeatureId::CognitiveLevel], 1.0);
        assert_eq!(m[FeatureId::VocabDensity], 0.0);
    }

    #[test]
    fn identical_options() {
        let it = item("Which is a tree?", ["oak", "oak", "oak", "oak"]);
        let m = measure_features(&it, &Lexicon::default(), &TfCosine, &RubricConfig::default()).unwrap();
        assert_eq!(m[FeatureId::OptionSimilarity], 1.0);
        assert_eq!(m[FeatureId::PlausibleDistractors], 3.0);
    }

    #[test]
    fn malformed() {
        let mut it = item("Which is a tree?", ["a", "b", "c", "d"]);
        it.options.pop();
        assert!(matches!(
            measure_features(&it, &Lexicon::default(), &TfCosine, &RubricConfig::default()),
            Err(AssessError::MalformedItem(_))
        ));
        let blank = item(" ", ["a", "b", "c", "d"]);
        assert!(matches!(
            measure_features(&blank, &Lexicon::default(), &TfCosine, &RubricConfig::default()),
            Err(AssessError::MalformedItem(_))
        ));
    }

    #[test]
    fn lexicon_density_uses_longest_match() {
        let lex = Lexicon::from_labels(["carbon dioxide", "carbon", "tree"]);
        assert_eq!(lex.density("Carbon dioxide feeds a tree"), 3.0 / 5.0);
        assert_eq!(lex.density("nothing here"), 0.0);
        assert_eq!(lex.density(""), 0.0);
    }

    #[test]
    fn bloom_classification() {
        let verbs = default_bloom_verbs();
        assert_eq!(classify_bloom("Which of these is a tree?", &verbs), BloomLevel::Remember);
        assert_eq!(classify_bloom("Explain why leaves fall.", &verbs), BloomLevel::Understand);
        assert_eq!(classify_bloom("Compare and justify the two options.", &verbs), BloomLevel::Evaluate);
        assert_eq!(classify_bloom("Which option is justified?", &verbs), BloomLevel::Evaluate);
        assert_eq!(classify_bloom("Using the data, design a plan.", &verbs), BloomLevel::Create);
    }

    #[test]
    fn similarity_basics() {
        assert_eq!(TfCosine.similarity("oak tree", "the oak tree"), 1.0);
        assert_eq!(TfCosine.similarity("oak", "granite"), 0.0);
        let s = TfCosine.similarity("red oak", "red maple");
        assert!((s - 0.5).abs() < 1e-12);
        let emb = EmbeddingSimilarity::new([("oak".to_string(), vec![1.0, 0.0]), ("maple".to_string(), vec![1.0, 1.0])]);
        assert!((emb.similarity("Oak", "maple") - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(emb.similarity("oak", "oak tree"), TfCosine.similarity("oak", "oak tree"));
    }

    #[test]
    fn gate() {
        assert!(within_tolerance(14.0, 14.0, 2.0));
        assert!(!within_tolerance(17.0, 14.0, 2.0));
        assert!(within_tolerance(16.0, 14.0, 2.0));
        let it = item("Define erosion.", ["wind", "rain", "ice", "heat"]);
        let rubric = RubricConfig::default();
        let ev = evaluate_item_difficulty(&it, 9.0, 2.0, &rubric, &Lexicon::default(), &TfCosine).unwrap();
        assert_eq!(ev.difficulty, ev.total as f64);
        assert_eq!(ev.breakdown.len(), 7);
        assert_eq!(ev.pass, (ev.difficulty - 9.0).abs() <= 2.0);
        assert!(evaluate_item_difficulty(&it, 9.0, 0.0, &rubric, &Lexicon::default(), &TfCosine).is_err());
    }

    #[test]
    fn rubric_config_json() {
        let cfg: RubricConfig = serde_json::from_str(r#"{"epsilon": 1.5, "weights": [2,1,1,1,1,1,1]}"#).unwrap();
        assert_eq!(cfg.epsilon, 1.5);
        assert_eq!(cfg.tau, 0.4);
        cfg.validate().unwrap();
        let round: RubricConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(round, cfg);
    }
}
