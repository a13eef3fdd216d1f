mod support;

use std::sync::Arc;

use examforge_core::assessment::{total_difficulty, DifficultyTier, RubricConfig};
use examforge_core::generation::{
    evaluate_candidate, generate_exam, Exam, ExamBlueprint, ExamOptions, LlmGenerator, TemplateGenerator,
};
use examforge_core::kg_store::GraphRegistry;
use examforge_core::llm_gateway::MockCompleter;
use examforge_core::Parallelism;

fn blueprint(total: u64) -> ExamBlueprint {
    ExamBlueprint::allocate("ecology", &[("Forests", 1), ("Rivers", 1), ("Pollution", 1)], total, [1, 1, 1]).unwrap()
}

fn mock_exam(reg: &GraphRegistry, seed: u64, mode: Parallelism) -> Exam {
    let generator = LlmGenerator::new(Arc::new(MockCompleter::new(seed)));
    let options = ExamOptions { seed, parallelism: mode, ..ExamOptions::default() };
    generate_exam(reg, &blueprint(30), &generator, &RubricConfig::default(), &options).unwrap()
}

#[test]
fn full_blueprint_is_filled_and_gated() {
    let reg = support::ecology_registry("ecology");
    let exam = mock_exam(&reg, 42, Parallelism::Parallel);
    assert_eq!(exam.items.len(), 30);
    assert!(exam.shortfalls.is_empty());

    let graph = reg.require("ecology").unwrap();
    let graph = graph.read();
    let lexicon = examforge_core::assessment::Lexicon::from_graph(&graph);
    let rubric = RubricConfig::default();
    for it in &exam.items {
        let tier = it.item.tier.unwrap();
        let again = evaluate_candidate(&it.item, tier, &rubric, &lexicon).unwrap();
        assert!(again.pass, "{} re-evaluates to {}", it.item.stem, again.difficulty);
        assert_eq!(again, it.evaluation);
        let prov = it.item.provenance.as_ref().unwrap();
        assert_eq!(prov.subject, "ecology");
        assert!(prov.node_ids().all(|id| graph.node(id).is_some()));
    }
}

#[test]
fn chapter_counts_follow_allocation() {
    let reg = support::ecology_registry("ecology");
    let exam = mock_exam(&reg, 7, Parallelism::Sequential);
    let graph = reg.require("ecology").unwrap();
    let graph = graph.read();
    for section in &blueprint(30).sections {
        let chapter = graph.find_chapter(&section.chapter).unwrap();
        let n = exam.items.iter().filter(|it| it.item.provenance.as_ref().unwrap().chapter == chapter).count() as u64;
        assert_eq!(n, section.count, "{}", section.chapter);
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let reg = support::ecology_registry("ecology");
    let a = mock_exam(&reg, 42, Parallelism::Parallel).to_json();
    let b = mock_exam(&reg, 42, Parallelism::Sequential).to_json();
    assert_eq!(a, b);
    let c = mock_exam(&reg, 43, Parallelism::Parallel).to_json();
    assert_ne!(a, c);
}

#[test]
fn tier_means_are_ordered() {
    let reg = support::ecology_registry("ecology");
    let exam = mock_exam(&reg, 42, Parallelism::Parallel);
    let mean = |tier: DifficultyTier| {
        let ts: Vec<f64> = exam
            .items
            .iter()
            .filter(|it| it.item.tier == Some(tier))
            .map(|it| total_difficulty(&it.evaluation.ratings) as f64)
            .collect();
        ts.iter().sum::<f64>() / ts.len() as f64
    };
    let (b, a, c) = (
        mean(DifficultyTier::BasicRecall),
        mean(DifficultyTier::AppliedUnderstanding),
        mean(DifficultyTier::ComprehensiveAnalysis),
    );
    assert!(b < a && a < c, "{b} {a} {c}");
}

#[test]
fn template_generator_fills_the_blueprint() {
    let reg = support::ecology_registry("ecology");
    let exam =
        generate_exam(&reg, &blueprint(30), &TemplateGenerator::new(42), &RubricConfig::default(), &ExamOptions::default())
            .unwrap();
    assert_eq!(exam.items.len(), 30);
    assert_eq!(exam.header.generator, "template");
}

#[test]
fn empty_graph_reports_every_cell() {
    let reg = GraphRegistry::new();
    reg.create_subject_graph("ecology").unwrap();
    let exam =
        generate_exam(&reg, &blueprint(9), &TemplateGenerator::new(1), &RubricConfig::default(), &ExamOptions::default())
            .unwrap();
    assert!(exam.items.is_empty());
    assert_eq!(exam.shortfalls.len(), 9);
    assert!(exam.shortfalls.iter().all(|s| s.error_code == "InsufficientMaterial" && s.produced == 0));
    let requested: u64 = exam.shortfalls.iter().map(|s| s.requested).sum();
    assert_eq!(requested, 9);
}

#[test]
fn unknown_subject_is_an_error() {
    let reg = GraphRegistry::new();
    let err =
        generate_exam(&reg, &blueprint(3), &TemplateGenerator::new(1), &RubricConfig::default(), &ExamOptions::default())
            .unwrap_err();
    assert_eq!(err.code(), "UnknownSubject");
}

#[test]
fn impossible_tolerance_logs_rejects_without_overfilling() {
    let reg = support::ecology_registry("ecology");
    let mut bp = ExamBlueprint::allocate("ecology", &[("Forests", 1)], 2, [1, 0, 0]).unwrap();
    bp.epsilon = Some(0.5);
    let options = ExamOptions { max_retries: 2, ..ExamOptions::default() };
    let exam = generate_exam(&reg, &bp, &TemplateGenerator::new(3), &RubricConfig::default(), &options).unwrap();
    // basic items land on D = 8, one away from the target
    assert!(exam.items.is_empty());
    assert_eq!(exam.rejects.len(), 2 * 3);
    assert!(exam.rejects.iter().all(|r| r.reason == "DifficultyOutOfTolerance" && r.evaluation.is_some()));
    assert_eq!(exam.shortfalls[0].requested, 2);
}
