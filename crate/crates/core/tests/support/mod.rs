#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use examforge_core::agent_runtime::pipeline::topics;
use examforge_core::agent_runtime::{
    request, Bus, ExamRequest, IngestRequest, Message, PipelineConfig, PipelineGenerator, Reply,
};
use examforge_core::assessment::RubricConfig;
use examforge_core::generation::{generate_exam, Exam, ExamBlueprint, ExamOptions, LlmGenerator};
use examforge_core::ingestion::{
    ingest_document, DocFormat, IngestOptions, LlmExtractor, RuleExtractor, SourceDocument,
};
use examforge_core::kg_store::GraphRegistry;
use examforge_core::llm_gateway::{Completer, MockCompleter};

pub struct Concept {
    pub name: &'static str,
    pub instances: &'static [&'static str],
    pub objects: &'static [&'static str],
}

pub const CHAPTERS: &[(&str, &[Concept])] = &[
    (
        "Forests",
        &[
            Concept {
                name: "tree",
                instances: &["oak", "pine", "maple", "birch", "cedar", "willow"],
                objects: &["shade", "nesting birds", "soil moisture", "leaf litter"],
            },
            Concept {
                name: "fungus",
                instances: &["mushroom", "mold", "yeast", "truffle", "bracket fungus"],
                objects: &["dead wood", "forest soil", "root networks"],
            },
            Concept {
                name: "insect",
                instances: &["beetle", "ant", "termite", "moth", "bee", "wasp"],
                objects: &["pollen", "fallen logs", "flowering plants"],
            },
            Concept {
                name: "mammal",
                instances: &["deer", "fox", "squirrel", "badger", "bear"],
                objects: &["acorns", "young shoots", "small rodents"],
            },
        ],
    ),
    (
        "Rivers",
        &[
            Concept {
                name: "fish",
                instances: &["salmon", "trout", "carp", "pike", "perch", "eel"],
                objects: &["cold water", "gravel beds", "aquatic insects"],
            },
            Concept {
                name: "amphibian",
                instances: &["frog", "toad", "newt", "salamander"],
                objects: &["shallow ponds", "moist banks", "mosquito larvae"],
            },
            Concept {
                name: "aquatic plant",
                instances: &["reed", "water lily", "duckweed", "cattail", "pondweed"],
                objects: &["dissolved oxygen", "still water", "river banks"],
            },
            Concept {
                name: "sediment",
                instances: &["silt", "sand", "gravel", "clay", "pebble"],
                objects: &["river deltas", "flood plains", "water clarity"],
            },
        ],
    ),
    (
        "Pollution",
        &[
            Concept {
                name: "pollutant",
                instances: &["sulfur dioxide", "nitrate", "mercury", "microplastic", "pesticide"],
                objects: &["drinking water", "fish stocks", "the ecosystem"],
            },
            Concept {
                name: "energy source",
                instances: &["coal", "natural gas", "solar power", "wind power", "crude oil"],
                objects: &["electricity", "heat", "carbon emissions"],
            },
            Concept {
                name: "greenhouse gas",
                instances: &["carbon dioxide", "methane", "ozone", "nitrous oxide"],
                objects: &["infrared radiation", "global temperatures", "the atmosphere"],
            },
            Concept {
                name: "waste",
                instances: &["plastic bag", "scrap metal", "food scraps", "old tyres"],
                objects: &["landfill space", "ocean currents", "soil quality"],
            },
        ],
    ),
];

const VERBS: &[&str] = &["provides", "supports", "needs", "produces", "affects", "protects", "stores", "reduces"];

/// Markdown body for one chapter: a heading per concept, then class
/// membership sentences and a few relation sentences per instance.
pub fn chapter_body(chapter: &str, concepts: &[Concept]) -> String {
    let mut out = format!("# {chapter}\n\n");
    for (ci, c) in concepts.iter().enumerate() {
        out.push_str(&format!("## {}\n\n", c.name));
        for (i, inst) in c.instances.iter().enumerate() {
            out.push_str(&format!("The {inst} is a kind of {}. ", c.name));
            let verb = VERBS[(ci + i) % VERBS.len()];
            let obj = c.objects[i % c.objects.len()];
            out.push_str(&format!("{} {verb} {obj}. ", capitalize(inst)));
            if i % 2 == 0 {
                let verb2 = VERBS[(ci + i + 3) % VERBS.len()];
                let obj2 = c.objects[(i + 1) % c.objects.len()];
                out.push_str(&format!("{} {verb2} {obj2}. ", capitalize(inst)));
            }
        }
        out.push_str("\n\n");
    }
    out.push_str("Intentional pollution harms the ecosystem.\n");
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn documents(subject: &str) -> Vec<SourceDocument> {
    CHAPTERS
        .iter()
        .map(|(chapter, concepts)| SourceDocument {
            doc_id: format!("{subject}-{}", chapter.to_lowercase()),
            subject: subject.to_string(),
            chapter_path: vec!["Ecology".to_string(), chapter.to_string()],
            body: chapter_body(chapter, concepts),
            format: DocFormat::Markdown,
        })
        .collect()
}

/// Registry holding the synthetic ecology corpus under `subject`.
pub fn ecology_registry(subject: &str) -> GraphRegistry {
    let reg = GraphRegistry::new();
    ingest_into(&reg, subject);
    reg
}

pub fn ingest_into(reg: &GraphRegistry, subject: &str) {
    let opts = IngestOptions { append: true, ..Default::default() };
    for doc in documents(subject) {
        let report = ingest_document(reg, &doc, &RuleExtractor::default(), &opts).expect("ingest");
        assert!(report.failures.is_empty());
    }
}

pub const TIMEOUT: Duration = Duration::from_secs(60);

pub fn three_chapter_blueprint(subject: &str, total: u64) -> ExamBlueprint {
    ExamBlueprint::allocate(subject, &[("Forests", 1), ("Rivers", 1), ("Pollution", 1)], total, [1, 1, 1]).unwrap()
}

/// Mock stack: extraction and generation both answered by the offline
/// completer.
pub fn mock_pipeline_config(seed: u64) -> PipelineConfig {
    let completer: Arc<dyn Completer> = Arc::new(MockCompleter::new(seed));
    PipelineConfig {
        registry: Arc::new(GraphRegistry::new()),
        extractor: Arc::new(LlmExtractor::new(completer.clone())),
        completer,
        generator: PipelineGenerator::Llm,
        rubric: RubricConfig::default(),
        ingest: IngestOptions { append: true, ..Default::default() },
        exam: ExamOptions::default(),
    }
}

/// The library path on the mock stack.
pub fn direct_exam(subject: &str, blueprint: &ExamBlueprint, seed: u64) -> Exam {
    let completer: Arc<dyn Completer> = Arc::new(MockCompleter::new(seed));
    let reg = GraphRegistry::new();
    let opts = IngestOptions { append: true, ..Default::default() };
    for doc in documents(subject) {
        ingest_document(&reg, &doc, &LlmExtractor::new(completer.clone()), &opts).expect("ingest");
    }
    let options = ExamOptions { seed, ..ExamOptions::default() };
    generate_exam(&reg, blueprint, &LlmGenerator::new(completer), &RubricConfig::default(), &options).expect("exam")
}

/// Ingests the corpus and requests an exam through a running pipeline.
/// Returns the `exam/complete` payload and every `exam/qualified` message.
pub fn pipeline_exam(bus: &Bus, subject: &str, blueprint: &ExamBlueprint, seed: u64) -> (Exam, Vec<Message>) {
    for (i, doc) in documents(subject).into_iter().enumerate() {
        let payload = serde_json::to_value(IngestRequest { document: doc, append: true }).unwrap();
        let reply = request(bus, "client", topics::INGEST_REQUEST, &format!("ingest-{i}"), payload, TIMEOUT).unwrap();
        assert!(matches!(reply, Reply::Ok(_)), "{reply:?}");
    }
    let qualified = bus.subscribe("watcher", topics::EXAM_QUALIFIED).unwrap();
    let payload =
        serde_json::to_value(ExamRequest { blueprint: blueprint.clone(), seed: Some(seed), max_retries: None }).unwrap();
    let reply = request(bus, "client", topics::EXAM_REQUEST, "exam-1", payload, TIMEOUT).unwrap();
    let Reply::Ok(done) = reply else { panic!("{reply:?}") };
    let exam: Exam = serde_json::from_value(done.payload).unwrap();
    let mut seen = Vec::new();
    while let Some(m) = qualified.try_recv() {
        seen.push(m);
    }
    (exam, seen)
}
