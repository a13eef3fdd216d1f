//! The seven-feature difficulty rubric: feature ids, raw measurements,
//! 1/2/3 ratings, weights, cut points, Bloom levels and difficulty tiers.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::AssessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    StemLength,
    VocabDensity,
    CognitiveLevel,
    OptionLength,
    OptionSimilarity,
    StemOptionOverlap,
    PlausibleDistractors,
}

impl FeatureId {
    pub const ALL: [FeatureId; 7] = [
        FeatureId::StemLength,
        FeatureId::VocabDensity,
        FeatureId::CognitiveLevel,
        FeatureId::OptionLength,
        FeatureId::OptionSimilarity,
        FeatureId::StemOptionOverlap,
        FeatureId::PlausibleDistractors,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureId::StemLength => "stem_length",
            FeatureId::VocabDensity => "vocab_density",
            FeatureId::CognitiveLevel => "cognitive_level",
            FeatureId::OptionLength => "option_length",
            FeatureId::OptionSimilarity => "option_similarity",
            FeatureId::StemOptionOverlap => "stem_option_overlap",
            FeatureId::PlausibleDistractors => "plausible_distractors",
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! per_feature {
    ($name:ident, $elem:ty) => {
        impl Index<FeatureId> for $name {
            type Output = $elem;
            fn index(&self, f: FeatureId) -> &$elem {
                &self.0[f.index()]
            }
        }
        impl IndexMut<FeatureId> for $name {
            fn index_mut(&mut self, f: FeatureId) -> &mut $elem {
                &mut self.0[f.index()]
            }
        }
    };
}

/// Raw per-feature values: word counts, densities, similarity means, the
/// Bloom ordinal and the plausible-distractor count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureMeasurements(pub [f64; 7]);
per_feature!(FeatureMeasurements, f64);

/// Per-feature difficulty rating, each 1 (low), 2 (medium) or 3 (high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 7]", into = "[u8; 7]")]
pub struct FeatureRatings([u8; 7]);
per_feature!(FeatureRatings, u8);

impl FeatureRatings {
    pub fn new(values: [u8; 7]) -> Result<Self, AssessError> {
        if let Some(bad) = values.iter().find(|v| !(1..=3).contains(*v)) {
            return Err(AssessError::InvalidRatings(format!("rating {bad} not in 1..=3")));
        }
        Ok(FeatureRatings(values))
    }

    pub fn uniform(level: u8) -> Result<Self, AssessError> {
        Self::new([level; 7])
    }

    pub fn values(&self) -> [u8; 7] {
        self.0
    }
}

impl TryFrom<[u8; 7]> for FeatureRatings {
    type Error = AssessError;
    fn try_from(v: [u8; 7]) -> Result<Self, AssessError> {
        FeatureRatings::new(v)
    }
}

impl From<FeatureRatings> for [u8; 7] {
    fn from(r: FeatureRatings) -> Self {
        r.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 7]", into = "[f64; 7]")]
pub struct FeatureWeights([f64; 7]);
per_feature!(FeatureWeights, f64);

impl Default for FeatureWeights {
    fn default() -> Self {
        FeatureWeights([1.0; 7])
    }
}

impl FeatureWeights {
    pub fn new(values: [f64; 7]) -> Result<Self, AssessError> {
        if values.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AssessError::InvalidWeights("weights must be finite and >= 0".into()));
        }
        if values.iter().all(|w| *w == 0.0) {
            return Err(AssessError::AllZeroWeights);
        }
        Ok(FeatureWeights(values))
    }

    pub fn values(&self) -> [f64; 7] {
        self.0
    }
}

impl TryFrom<[f64; 7]> for FeatureWeights {
    type Error = AssessError;
    fn try_from(v: [f64; 7]) -> Result<Self, AssessError> {
        FeatureWeights::new(v)
    }
}

impl From<FeatureWeights> for [f64; 7] {
    fn from(w: FeatureWeights) -> Self {
        w.0
    }
}

/// Low/medium and medium/high boundaries on a feature's raw scale.
/// A raw value equal to a boundary belongs to the higher band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuts(pub f64, pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingThresholds {
    pub stem_length: Cuts,
    pub vocab_density: Cuts,
    pub cognitive_level: Cuts,
    pub option_length: Cuts,
    pub option_similarity: Cuts,
    pub stem_option_overlap: Cuts,
    pub plausible_distractors: Cuts,
}

impl Default for RatingThresholds {
    fn default() -> Self {
        RatingThresholds {
            stem_length: Cuts(15.0, 35.0),
            vocab_density: Cuts(0.10, 0.30),
            // Bloom ordinal 1-2 -> 1, 3-4 -> 2, 5-6 -> 3
            cognitive_level: Cuts(3.0, 5.0),
            option_length: Cuts(4.0, 10.0),
            option_similarity: Cuts(0.25, 0.55),
            stem_option_overlap: Cuts(0.25, 0.55),
            // 0-1 plausible distractors -> 1, 2 -> 2, 3 -> 3
            plausible_distractors: Cuts(2.0, 3.0),
        }
    }
}

impl RatingThresholds {
    pub fn get(&self, f: FeatureId) -> Cuts {
        match f {
            FeatureId::StemLength => self.stem_length,
            FeatureId::VocabDensity => self.vocab_density,
            FeatureId::CognitiveLevel => self.cognitive_level,
            FeatureId::OptionLength => self.option_length,
            FeatureId::OptionSimilarity => self.option_similarity,
            FeatureId::StemOptionOverlap => self.stem_option_overlap,
            FeatureId::PlausibleDistractors => self.plausible_distractors,
        }
    }

    pub fn validate(&self) -> Result<(), AssessError> {
        for f in FeatureId::ALL {
            let Cuts(lo, hi) = self.get(f);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(AssessError::InvalidThresholds(format!(
                    "{f}: cuts ({lo}, {hi}) must satisfy cut1 < cut2"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BloomLevel {
    Remember,
    Understand,
    Apply,
    Analyze,
    Evaluate,
    Create,
}

impl BloomLevel {
    pub const ALL: [BloomLevel; 6] = [
        BloomLevel::Remember,
        BloomLevel::Understand,
        BloomLevel::Apply,
        BloomLevel::Analyze,
        BloomLevel::Evaluate,
        BloomLevel::Create,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BloomLevel::Remember => "remember",
            BloomLevel::Understand => "understand",
            BloomLevel::Apply => "apply",
            BloomLevel::Analyze => "analyze",
            BloomLevel::Evaluate => "evaluate",
            BloomLevel::Create => "create",
        }
    }

    /// 1 for Remember through 6 for Create.
    pub fn ordinal(self) -> u8 {
        self as u8 + 1
    }
}

/// Expected ratings for a Bloom level, encoding the qualitative
/// feature-by-level table (short/basic/recall ... open-ended/integrative).
/// Each feature is non-decreasing as the level rises.
pub fn bloom_profile(level: BloomLevel) -> FeatureRatings {
    // stem, vocab, cognitive, option len, option sim, overlap, distractors
    let v = match level {
        BloomLevel::Remember => [1, 1, 1, 1, 1, 1, 1],
        BloomLevel::Understand => [1, 2, 1, 1, 2, 2, 2],
        BloomLevel::Apply => [2, 3, 2, 2, 2, 2, 2],
        BloomLevel::Analyze => [3, 3, 2, 3, 3, 3, 3],
        BloomLevel::Evaluate | BloomLevel::Create => [3, 3, 3, 3, 3, 3, 3],
    };
    FeatureRatings(v)
}

/// Default verb lexicon for classifying a stem's cognitive level.
pub fn default_bloom_verbs() -> BTreeMap<BloomLevel, Vec<String>> {
    let table: [(BloomLevel, &[&str]); 6] = [
        (BloomLevel::Remember, &["define", "list", "name", "recall"]),
        (BloomLevel::Understand, &["explain", "paraphrase", "summarize"]),
        (BloomLevel::Apply, &["apply", "solve", "use", "compute"]),
        (BloomLevel::Analyze, &["analyze", "compare", "differentiate"]),
        (BloomLevel::Evaluate, &["judge", "assess", "justify", "critique"]),
        (BloomLevel::Create, &["design", "compose", "propose", "construct"]),
    ];
    table
        .into_iter()
        .map(|(level, verbs)| (level, verbs.iter().map(|v| v.to_string()).collect()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DifficultyTier {
    #[serde(rename = "basic")]
    BasicRecall,
    #[serde(rename = "applied")]
    AppliedUnderstanding,
    #[serde(rename = "comprehensive")]
    ComprehensiveAnalysis,
}

impl DifficultyTier {
    pub const ALL: [DifficultyTier; 3] = [
        DifficultyTier::BasicRecall,
        DifficultyTier::AppliedUnderstanding,
        DifficultyTier::ComprehensiveAnalysis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyTier::BasicRecall => "basic",
            DifficultyTier::AppliedUnderstanding => "applied",
            DifficultyTier::ComprehensiveAnalysis => "comprehensive",
        }
    }
}

impl std::str::FromStr for BloomLevel {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BloomLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| AssessError::InvalidConfig(format!("unknown Bloom level `{s}`")))
    }
}

impl std::str::FromStr for DifficultyTier {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DifficultyTier::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| AssessError::InvalidConfig(format!("unknown difficulty tier `{s}`")))
    }
}

impl fmt::Display for DifficultyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Target total difficulty and the inclusive band of totals for one tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    pub target: f64,
    pub band: (u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierBands {
    pub basic: TierSpec,
    pub applied: TierSpec,
    pub comprehensive: TierSpec,
}

impl Default for TierBands {
    fn default() -> Self {
        TierBands {
            basic: TierSpec { target: 9.0, band: (7, 11) },
            applied: TierSpec { target: 14.0, band: (12, 16) },
            comprehensive: TierSpec { target: 19.0, band: (17, 21) },
        }
    }
}

impl TierBands {
    pub fn get(&self, tier: DifficultyTier) -> TierSpec {
        match tier {
            DifficultyTier::BasicRecall => self.basic,
            DifficultyTier::AppliedUnderstanding => self.applied,
            DifficultyTier::ComprehensiveAnalysis => self.comprehensive,
        }
    }

    /// Bands must tile the integer totals 7..=21 in tier order, each
    /// containing its target.
    pub fn validate(&self) -> Result<(), AssessError> {
        let mut expected_lo = 7;
        for tier in DifficultyTier::ALL {
            let spec = self.get(tier);
            let (lo, hi) = spec.band;
            if lo != expected_lo || hi < lo {
                return Err(AssessError::InvalidConfig(format!(
                    "tier {tier} band ({lo}, {hi}) must start at {expected_lo}"
                )));
            }
            if !(spec.target >= lo as f64 && spec.target <= hi as f64) {
                return Err(AssessError::InvalidConfig(format!(
                    "tier {tier} target {} outside its band",
                    spec.target
                )));
            }
            expected_lo = hi + 1;
        }
        if expected_lo != 22 {
            return Err(AssessError::InvalidConfig("tier bands must end at 21".into()));
        }
        Ok(())
    }

    pub fn tier_for_total(&self, total: u32) -> Option<DifficultyTier> {
        DifficultyTier::ALL.into_iter().find(|t| {
            let (lo, hi) = self.get(*t).band;
            (lo..=hi).contains(&total)
        })
    }
}

/// Maps each raw value to 1/2/3 using the cut points.
pub fn rate_features(m: &FeatureMeasurements, thresholds: &RatingThresholds) -> FeatureRatings {
    let mut out = [1u8; 7];
    for f in FeatureId::ALL {
        let Cuts(lo, hi) = thresholds.get(f);
        let raw = m[f];
        out[f.index()] = if raw < lo {
            1
        } else if raw < hi {
            2
        } else {
            3
        };
    }
    FeatureRatings(out)
}

/// `T = sum d_i`, always within 7..=21.
pub fn total_difficulty(r: &FeatureRatings) -> u32 {
    r.0.iter().map(|&d| d as u32).sum()
}

/// `T_weighted = sum w_i d_i`.
pub fn weighted_difficulty(r: &FeatureRatings, w: &FeatureWeights) -> Result<f64, AssessError> {
    if w.0.iter().all(|x| *x == 0.0) {
        return Err(AssessError::AllZeroWeights);
    }
    Ok(r.0.iter().zip(w.0.iter()).map(|(&d, &wi)| wi * d as f64).sum())
}
