//! Blueprint allocation, material assembly, candidate generation and the
//! generate/evaluate/retry loop.

mod blueprint;
mod exam;
mod item;
mod llm;
mod material;
mod template;

use serde::{Deserialize, Serialize};

pub use blueprint::{allocate_counts, allocation_ratios, BlueprintSection, ExamBlueprint, TierCounts};
pub use exam::{
    evaluate_candidate, generate_exam, CandidateOutcome, CellShortfall, Exam, ExamHeader, ExamItem, ExamJob,
    ExamOptions, PendingCandidate, RejectRecord,
};
pub use item::{Provenance, QuestionItem};
pub use llm::{
    candidate_from_completion, generation_prompt, generation_request, parse_generation_prompt, parse_generation_reply,
    GenerationPrompt, LlmGenerator, GENERATION_TASK_MARKER,
};
pub use material::{assemble_material, assemble_material_with, MaterialBundle, MaterialConfig};
pub use template::{compose, TemplateGenerator, TemplateMaterial, TEMPLATE_VARIANTS};

use crate::assessment::{AssessError, BloomLevel, DifficultyTier};
use crate::kg_store::KgError;
use crate::ranking::RankError;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("all chapter counts are zero")]
    AllZeroCounts,
    #[error("bad ratios: {0}")]
    BadRatios(String),
    #[error("invalid blueprint: {0}")]
    InvalidBlueprint(String),
    #[error("chapter `{0}` has no concepts with facts")]
    NoConceptsInChapter(String),
    #[error("unknown chapter `{0}`")]
    UnknownChapter(String),
    #[error("generator failed: {0}")]
    GeneratorFailure(String),
    #[error("malformed candidate: {0}")]
    MalformedCandidate(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] KgError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Assess(#[from] AssessError),
}

impl GenError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::AllZeroCounts => "AllZeroCounts",
            Self::BadRatios(_) => "BadRatios",
            Self::InvalidBlueprint(_) => "InvalidBlueprint",
            Self::NoConceptsInChapter(_) => "NoConceptsInChapter",
            Self::UnknownChapter(_) => "UnknownChapter",
            Self::GeneratorFailure(_) => "GeneratorFailure",
            Self::MalformedCandidate(_) => "MalformedCandidate",
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::Graph(e) => e.code(),
            Self::Rank(e) => e.code(),
            Self::Assess(e) => e.code(),
        }
    }
}

/// Bloom level requested for each tier.
pub fn tier_bloom(tier: DifficultyTier) -> BloomLevel {
    match tier {
        DifficultyTier::BasicRecall => BloomLevel::Remember,
        DifficultyTier::AppliedUnderstanding => BloomLevel::Apply,
        DifficultyTier::ComprehensiveAnalysis => BloomLevel::Evaluate,
    }
}

/// Raw generator output before structural checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub stem: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CandidateRequest<'a> {
    pub bundle: &'a MaterialBundle,
    pub tier: DifficultyTier,
    pub bloom: BloomLevel,
    /// Template variant to use; retries advance it.
    pub attempt: u32,
    /// Position of the item within its blueprint cell.
    pub slot: usize,
}

pub trait Generator: Send + Sync {
    fn generate(&self, request: &CandidateRequest<'_>) -> Result<Candidate, GenError>;

    /// Distinct stem variants the generator cycles through on retry.
    fn variants(&self) -> u32;

    fn name(&self) -> String;
}

/// Checks a candidate's structure and wraps it as an item carrying the
/// bundle's provenance.
pub fn finish_candidate(candidate: Candidate, request: &CandidateRequest<'_>) -> Result<QuestionItem, GenError> {
    let b = request.bundle;
    let item = QuestionItem {
        id: String::new(),
        stem: candidate.stem,
        options: candidate.options,
        answer_index: candidate.answer_index,
        bloom: request.bloom,
        tier: Some(request.tier),
        provenance: Some(Provenance {
            subject: b.subject.clone(),
            chapter: b.chapter.clone(),
            concept: b.concept.node.clone(),
            facts: b.facts.iter().map(|f| f.node.clone()).collect(),
            bundle_rank: b.rank,
        }),
        ratings: None,
        difficulty: None,
    };
    item.validate().map_err(GenError::MalformedCandidate)?;
    Ok(item)
}

pub fn generate_candidate(
    bundle: &MaterialBundle,
    tier: DifficultyTier,
    bloom: BloomLevel,
    generator: &dyn Generator,
    attempt: u32,
) -> Result<QuestionItem, GenError> {
    let request = CandidateRequest { bundle, tier, bloom, attempt, slot: 0 };
    finish_candidate(generator.generate(&request)?, &request)
}
