//! Exam assembly: per blueprint cell, generate a candidate, evaluate it
//! against the tier target and retry on failure.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::material::{assemble_material_with, MaterialBundle, MaterialConfig};
use super::{finish_candidate, tier_bloom, Candidate, CandidateRequest, ExamBlueprint, GenError, Generator, QuestionItem};
use crate::assessment::{evaluate_item_difficulty, DifficultyTier, ItemEvaluation, Lexicon, RubricConfig, TfCosine};
use crate::kg_store::{GraphRegistry, KnowledgeGraph};
use crate::par::{self, Parallelism};
use crate::ranking::pagerank;
use crate::text::normalize_label;

#[derive(Debug, Clone)]
pub struct ExamOptions {
    pub max_retries: u32,
    /// Recorded in the exam header.
    pub seed: u64,
    pub material: MaterialConfig,
    pub parallelism: Parallelism,
}

impl Default for ExamOptions {
    fn default() -> Self {
        Self { max_retries: 5, seed: 0, material: MaterialConfig::default(), parallelism: Parallelism::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamHeader {
    pub subject: String,
    pub blueprint_hash: String,
    pub seed: u64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamItem {
    #[serde(flatten)]
    pub item: QuestionItem,
    pub evaluation: ItemEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub chapter: String,
    pub tier: DifficultyTier,
    pub slot: usize,
    pub attempt: u32,
    pub bundle_rank: Option<usize>,
    pub variant: u32,
    pub reason: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<ItemEvaluation>,
}

/// A blueprint cell that could not be filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellShortfall {
    pub chapter: String,
    pub tier: DifficultyTier,
    pub requested: u64,
    pub produced: u64,
    pub error_code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exam {
    pub header: ExamHeader,
    pub items: Vec<ExamItem>,
    pub rejects: Vec<RejectRecord>,
    pub shortfalls: Vec<CellShortfall>,
}

impl Exam {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("exam serializes")
    }
}

/// Coordinates of the next candidate to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingCandidate {
    pub cell: usize,
    pub slot: usize,
    pub attempt: u32,
    pub bundle_index: usize,
    pub variant: u32,
}

/// What happened to a pending candidate.
#[derive(Debug, Clone)]
pub enum CandidateOutcome {
    Failed { code: String, message: String },
    Evaluated { item: QuestionItem, evaluation: ItemEvaluation },
}

struct CellPlan {
    chapter: String,
    tier: DifficultyTier,
    count: u64,
    bundles: Result<Vec<MaterialBundle>, (String, String)>,
}

#[derive(Default, Clone)]
struct CellState {
    slot: usize,
    attempt: u32,
    accepted: Vec<ExamItem>,
    seen: HashSet<(String, String)>,
    rejects: Vec<RejectRecord>,
    failed_slots: u64,
    last_failure: Option<String>,
}

/// Resumable state of one exam build, advanced one candidate at a time.
/// The batch path and the agent pipeline both drive it, so they produce
/// the same exam.
pub struct ExamJob {
    header: ExamHeader,
    rubric: RubricConfig,
    lexicon: Lexicon,
    cells: Vec<CellPlan>,
    states: Vec<CellState>,
    max_retries: u32,
    variants: u32,
}

/// Evaluates an item against its tier's target with the default similarity.
pub fn evaluate_candidate(
    item: &QuestionItem,
    tier: DifficultyTier,
    rubric: &RubricConfig,
    lexicon: &Lexicon,
) -> Result<ItemEvaluation, GenError> {
    let target = rubric.tiers.get(tier).target;
    Ok(evaluate_item_difficulty(item, target, rubric.epsilon, rubric, lexicon, &TfCosine)?)
}

impl ExamJob {
    pub fn new(
        graph: &KnowledgeGraph,
        blueprint: &ExamBlueprint,
        rubric: &RubricConfig,
        options: &ExamOptions,
        generator_name: String,
        variants: u32,
    ) -> Result<Self, GenError> {
        blueprint.validate()?;
        if options.max_retries < 1 {
            return Err(GenError::InvalidConfig("max_retries must be at least 1".into()));
        }
        if variants == 0 {
            return Err(GenError::InvalidConfig("generator reports no template variants".into()));
        }
        let mut rubric = rubric.clone();
        if let Some(e) = blueprint.epsilon {
            rubric.epsilon = e;
        }
        if let Some(w) = blueprint.weights {
            rubric.weights = w;
        }
        rubric.validate()?;
        if graph.subject().as_str() != normalize_label(&blueprint.subject) {
            return Err(GenError::InvalidBlueprint(format!(
                "blueprint subject `{}` does not match graph `{}`",
                blueprint.subject,
                graph.subject()
            )));
        }

        let scores = pagerank(graph, &options.material.pagerank);
        let mut cells = Vec::new();
        for section in &blueprint.sections {
            let bundles = match &scores {
                Err(e) => Err((e.code().to_string(), e.to_string())),
                Ok(scores) => match graph.find_chapter(&section.chapter) {
                    None => Err(("UnknownChapter".to_string(), format!("unknown chapter `{}`", section.chapter))),
                    Some(ch) => assemble_material_with(graph, &ch, &options.material, scores)
                        .map_err(|e| (e.code().to_string(), e.to_string())),
                },
            };
            for tier in DifficultyTier::ALL {
                let count = section.tiers.get(tier);
                if count > 0 {
                    cells.push(CellPlan { chapter: section.chapter.clone(), tier, count, bundles: bundles.clone() });
                }
            }
        }
        let states = vec![CellState::default(); cells.len()];
        Ok(Self {
            header: ExamHeader {
                subject: graph.subject().to_string(),
                blueprint_hash: blueprint.hash(),
                seed: options.seed,
                generator: generator_name,
            },
            rubric,
            lexicon: Lexicon::from_graph(graph),
            cells,
            states,
            max_retries: options.max_retries,
            variants,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn rubric(&self) -> &RubricConfig {
        &self.rubric
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn tier(&self, cell: usize) -> DifficultyTier {
        self.cells[cell].tier
    }

    /// Next candidate for one cell, or `None` when the cell is finished.
    pub fn next_in_cell(&self, cell: usize) -> Option<PendingCandidate> {
        next_for(cell, &self.cells[cell], &self.states[cell], self.variants)
    }

    /// Next candidate in canonical cell order.
    pub fn next_pending(&self) -> Option<PendingCandidate> {
        (0..self.cells.len()).find_map(|c| self.next_in_cell(c))
    }

    pub fn request(&self, p: &PendingCandidate) -> CandidateRequest<'_> {
        let plan = &self.cells[p.cell];
        let bundles = plan.bundles.as_ref().expect("pending candidates only exist for cells with material");
        CandidateRequest {
            bundle: &bundles[p.bundle_index],
            tier: plan.tier,
            bloom: tier_bloom(plan.tier),
            attempt: p.variant,
            slot: p.slot,
        }
    }

    /// Turns raw generator output into a structurally valid item.
    pub fn build_item(&self, p: &PendingCandidate, candidate: Result<Candidate, GenError>) -> Result<QuestionItem, GenError> {
        finish_candidate(candidate?, &self.request(p))
    }

    pub fn evaluate(&self, p: &PendingCandidate, item: &QuestionItem) -> Result<ItemEvaluation, GenError> {
        evaluate_candidate(item, self.cells[p.cell].tier, &self.rubric, &self.lexicon)
    }

    /// Generates, checks and evaluates one candidate.
    pub fn run_candidate(&self, p: &PendingCandidate, generator: &dyn Generator) -> CandidateOutcome {
        let request = self.request(p);
        let result = self.build_item(p, generator.generate(&request)).and_then(|item| {
            let evaluation = self.evaluate(p, &item)?;
            Ok((item, evaluation))
        });
        match result {
            Ok((item, evaluation)) => CandidateOutcome::Evaluated { item, evaluation },
            Err(e) => CandidateOutcome::Failed { code: e.code().to_string(), message: e.to_string() },
        }
    }

    /// Applies an outcome and advances the cell.
    pub fn record(&mut self, p: &PendingCandidate, outcome: CandidateOutcome) {
        record_for(&self.cells[p.cell], &mut self.states[p.cell], p, outcome, self.max_retries);
    }

    /// Drives every cell to completion, cells in parallel when enabled.
    pub fn run(&mut self, generator: &dyn Generator, mode: Parallelism) {
        let this = &*self;
        let finished = par::map_indexed(mode, this.cells.len(), |cell| {
            let plan = &this.cells[cell];
            let mut state = this.states[cell].clone();
            while let Some(p) = next_for(cell, plan, &state, this.variants) {
                let outcome = this.run_candidate(&p, generator);
                record_for(plan, &mut state, &p, outcome, this.max_retries);
            }
            state
        });
        self.states = finished;
    }

    /// Final exam in canonical order: blueprint sections, then tier, then
    /// acceptance order.
    pub fn finish(self) -> Exam {
        let mut items = Vec::new();
        let mut rejects = Vec::new();
        let mut shortfalls = Vec::new();
        for (plan, state) in self.cells.into_iter().zip(self.states) {
            let produced = state.accepted.len() as u64;
            if produced < plan.count {
                let (error_code, reason) = match &plan.bundles {
                    Err((code, msg)) => ("InsufficientMaterial".to_string(), format!("{code}: {msg}")),
                    Ok(_) => (
                        "InsufficientMaterial".to_string(),
                        state.last_failure.clone().unwrap_or_else(|| "retries exhausted".into()),
                    ),
                };
                shortfalls.push(CellShortfall {
                    chapter: plan.chapter.clone(),
                    tier: plan.tier,
                    requested: plan.count,
                    produced,
                    error_code,
                    reason,
                });
            }
            items.extend(state.accepted);
            rejects.extend(state.rejects);
        }
        for (i, it) in items.iter_mut().enumerate() {
            it.item.id = format!("item-{:03}", i + 1);
        }
        Exam { header: self.header, items, rejects, shortfalls }
    }
}

fn next_for(cell: usize, plan: &CellPlan, state: &CellState, variants: u32) -> Option<PendingCandidate> {
    let bundles = plan.bundles.as_ref().ok()?;
    if state.slot as u64 >= plan.count {
        return None;
    }
    // retries alternate: next variant, then next bundle
    let k = state.attempt as usize;
    let b = bundles.len();
    Some(PendingCandidate {
        cell,
        slot: state.slot,
        attempt: state.attempt,
        bundle_index: (state.slot + k / 2) % b,
        variant: ((state.slot / b + k.div_ceil(2)) % variants as usize) as u32,
    })
}

fn record_for(plan: &CellPlan, state: &mut CellState, p: &PendingCandidate, outcome: CandidateOutcome, max_retries: u32) {
    if (state.slot, state.attempt) != (p.slot, p.attempt) {
        debug!(cell = p.cell, slot = p.slot, attempt = p.attempt, "stale outcome ignored");
        return;
    }
    let bundle_rank = plan.bundles.as_ref().ok().map(|b| b[p.bundle_index].rank);
    let reject = |reason: &str, message: String, stem: Option<String>, evaluation: Option<ItemEvaluation>| RejectRecord {
        chapter: plan.chapter.clone(),
        tier: plan.tier,
        slot: p.slot,
        attempt: p.attempt,
        bundle_rank,
        variant: p.variant,
        reason: reason.to_string(),
        message,
        stem,
        evaluation,
    };
    let rejected = match outcome {
        CandidateOutcome::Failed { code, message } => Some(reject(&code, message, None, None)),
        CandidateOutcome::Evaluated { item, evaluation } => {
            let key = (normalize_label(&item.stem), normalize_label(item.key().unwrap_or_default()));
            if !evaluation.pass {
                let msg = format!(
                    "difficulty {} is {} from target {} (epsilon {})",
                    evaluation.difficulty, evaluation.deviation, evaluation.target, evaluation.epsilon
                );
                Some(reject("DifficultyOutOfTolerance", msg, Some(item.stem), Some(evaluation)))
            } else if state.seen.contains(&key) {
                Some(reject("Duplicate", "same stem and key as an accepted item".into(), Some(item.stem), Some(evaluation)))
            } else {
                state.seen.insert(key);
                let mut item = item;
                item.ratings = Some(evaluation.ratings);
                item.difficulty = Some(evaluation.difficulty);
                state.accepted.push(ExamItem { item, evaluation });
                None
            }
        }
    };
    match rejected {
        None => {
            state.slot += 1;
            state.attempt = 0;
        }
        Some(r) => {
            state.last_failure = Some(format!("{}: {}", r.reason, r.message));
            state.rejects.push(r);
            if state.attempt >= max_retries {
                state.failed_slots += 1;
                state.slot += 1;
                state.attempt = 0;
            } else {
                state.attempt += 1;
            }
        }
    }
}

/// Builds an exam for `blueprint` from the subject graph in `registry`.
/// Unfillable cells are reported in `shortfalls`, not as an error.
pub fn generate_exam(
    registry: &GraphRegistry,
    blueprint: &ExamBlueprint,
    generator: &dyn Generator,
    rubric: &RubricConfig,
    options: &ExamOptions,
) -> Result<Exam, GenError> {
    let handle = registry.require(&blueprint.subject)?;
    let graph = handle.read();
    let mut job = ExamJob::new(&graph, blueprint, rubric, options, generator.name(), generator.variants())?;
    drop(graph);
    job.run(generator, options.parallelism);
    Ok(job.finish())
}
