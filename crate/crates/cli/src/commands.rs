use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use examforge_core::agent_runtime::{
    request, run_pipeline, Bus, PipelineConfig, PipelineGenerator, Reply, TcpHub,
};
use examforge_core::assessment::{Lexicon, RubricConfig};
use examforge_core::generation::{
    evaluate_candidate, generate_exam, ExamBlueprint, ExamOptions, Generator, LlmGenerator, QuestionItem,
    TemplateGenerator,
};
use examforge_core::ingestion::{
    ingest_document, load_hypernym_lexicon, DocFormat, Extractor, IngestOptions, LlmExtractor, RuleExtractor,
    SourceDocument,
};
use examforge_core::kg_store::{export_graph, EdgeKindTag, NodeKind, SubjectId};
use examforge_core::llm_gateway::{Completer, HttpCompleter, MockCompleter};
use examforge_core::psychometrics::{analyze, GroupSpec, ResponseMatrix};
use examforge_core::ranking::{pagerank, rank_all, rank_chapter_concepts_with, rank_concept_facts_with, RankedNode};
use examforge_core::Parallelism;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::store::Store;
use crate::{
    AgentsCommand, AgentsRunArgs, AnalyzeArgs, BlueprintCommand, Cli, Command, EvaluateArgs, ExtractorKind,
    GenerateArgs, GeneratorKind, GraphCommand, IngestArgs, LlmArgs, RankArgs,
};

const CLIENT: &str = "cli";

struct Ctx {
    store: Store,
    config: Config,
    mode: Parallelism,
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        store: Store::new(cli.store),
        config: Config::load(cli.config.as_deref())?,
        mode: if cli.sequential { Parallelism::Sequential } else { Parallelism::Parallel },
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Graph(GraphCommand::Export { subject, out }) => graph_export(&ctx, &subject, out.as_deref()),
        Command::Graph(GraphCommand::Stats { subject }) => graph_stats(&ctx, &subject),
        Command::Rank(a) => rank(&ctx, a),
        Command::Blueprint(BlueprintCommand::Validate { blueprint }) => blueprint_validate(&ctx, &blueprint),
        Command::Generate(a) => generate(&ctx, a),
        Command::EvaluateItem(a) => evaluate_item(&ctx, a),
        Command::Analyze(a) => analyze_responses(&ctx, a),
        Command::Agents(AgentsCommand::Run(a)) => agents_run(&ctx, a),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::new("InternalError", e.to_string()))?;
    text.push('\n');
    write_output(&text, out)
}

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
}

fn subject_id(subject: &str) -> Result<SubjectId> {
    Ok(SubjectId::new(subject)?)
}

impl Ctx {
    fn seed(&self, llm: &LlmArgs) -> u64 {
        llm.seed.or(self.config.seed).unwrap_or(0)
    }

    fn rules(&self, lexicon: Option<&Path>) -> Result<RuleExtractor> {
        let rules = RuleExtractor::default();
        let Some(path) = lexicon else {
            return Ok(rules);
        };
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Ok(rules.with_hypernyms(load_hypernym_lexicon(BufReader::new(file))?))
    }

    fn completer(&self, llm: &LlmArgs, rules: RuleExtractor) -> Result<Arc<dyn Completer>> {
        if llm.mock {
            return Ok(Arc::new(MockCompleter::new(self.seed(llm)).with_extractor(rules)));
        }
        let provider = self.config.provider.clone().ok_or_else(|| {
            CliError::new("InvalidConfig", "no LLM provider configured; add `provider` to --config or pass --mock")
        })?;
        Ok(Arc::new(HttpCompleter::new(provider)?))
    }

    fn generator(&self, kind: GeneratorKind, llm: &LlmArgs) -> Result<Arc<dyn Generator>> {
        Ok(match kind {
            GeneratorKind::Template => Arc::new(TemplateGenerator::new(self.seed(llm))),
            GeneratorKind::Llm => Arc::new(
                LlmGenerator::new(self.completer(llm, RuleExtractor::default())?).with_timeout(self.config.timeout()),
            ),
        })
    }

    fn rubric(&self, epsilon: Option<f64>) -> Result<RubricConfig> {
        let mut rubric = self.config.rubric.clone();
        if let Some(e) = epsilon {
            rubric.epsilon = e;
        }
        rubric.validate()?;
        Ok(rubric)
    }

    fn exam_options(&self, seed: u64, max_retries: Option<u32>) -> ExamOptions {
        let mut options = ExamOptions { seed, parallelism: self.mode, ..ExamOptions::default() };
        if let Some(r) = max_retries.or(self.config.max_retries) {
            options.max_retries = r;
        }
        options
    }

    fn ingest_options(&self, append: bool) -> IngestOptions {
        let mut options = IngestOptions { append, parallelism: self.mode, ..IngestOptions::default() };
        if let Some(n) = self.config.segment_chars {
            options.max_chars = n;
        }
        options
    }
}

fn source_document(path: &Path, subject: &str, chapter: Option<&str>) -> Result<SourceDocument> {
    let body = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("document").to_string();
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("md" | "markdown") => DocFormat::Markdown,
        _ => DocFormat::Plain,
    };
    let chapter_path = match chapter {
        Some(c) => c.split('/').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => vec![stem],
    };
    let doc_id = path.file_name().and_then(|s| s.to_str()).unwrap_or("document").to_string();
    Ok(SourceDocument { doc_id, subject: subject.to_string(), chapter_path, body, format })
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let registry = ctx.store.load()?;
    let subject = subject_id(&a.subject)?;
    let rules = ctx.rules(a.lexicon.as_deref())?;
    let extractor: Box<dyn Extractor> = if a.extractor == ExtractorKind::Llm || a.llm.mock {
        Box::new(LlmExtractor::new(ctx.completer(&a.llm, rules)?).with_timeout(ctx.config.timeout()))
    } else {
        Box::new(rules)
    };
    let mut reports = Vec::new();
    for (i, path) in a.docs.iter().enumerate() {
        let doc = source_document(path, &a.subject, a.chapter.as_deref())?;
        // --new only forbids a graph that existed before this command
        let append = !a.new || i > 0;
        reports.push(ingest_document(&registry, &doc, extractor.as_ref(), &ctx.ingest_options(append))?);
    }
    ctx.store.save(&registry, &subject)?;
    if reports.len() == 1 {
        emit(&reports[0], None)
    } else {
        emit(&reports, None)
    }
}

fn graph_export(ctx: &Ctx, subject: &str, out: Option<&Path>) -> Result<()> {
    let registry = ctx.store.load()?;
    let handle = registry.require(subject)?;
    let bytes = export_graph(&handle.read());
    let text = String::from_utf8(bytes).map_err(|e| CliError::new("InternalError", e.to_string()))?;
    write_output(&text, out)
}

fn graph_stats(ctx: &Ctx, subject: &str) -> Result<()> {
    let registry = ctx.store.load()?;
    let handle = registry.require(subject)?;
    let g = handle.read();
    let nodes: BTreeMap<&str, usize> =
        [NodeKind::Text, NodeKind::Concept, NodeKind::Hierarchy].into_iter().map(|k| (k.as_str(), g.count_nodes(k))).collect();
    let edges: BTreeMap<&str, usize> = [EdgeKindTag::Fact, EdgeKindTag::IsA, EdgeKindTag::PartOf, EdgeKindTag::IncludeIn]
        .into_iter()
        .map(|t| (t.as_str(), g.count_edges(t)))
        .collect();
    emit(
        &json!({
            "subject": g.subject().as_str(),
            "node_count": g.node_count(),
            "edge_count": g.edge_count(),
            "nodes": nodes,
            "edges": edges,
        }),
        None,
    )
}

fn rank(ctx: &Ctx, a: RankArgs) -> Result<()> {
    let registry = ctx.store.load()?;
    let handle = registry.require(&a.subject)?;
    let g = handle.read();
    let mut cfg = ctx.config.pagerank;
    cfg.parallelism = ctx.mode;
    if let Some(d) = a.damping {
        cfg.damping = d;
    }
    let (scope, mut ranked): (Value, Vec<RankedNode>) = if let Some(chapter) = &a.chapter {
        let id = g.find_chapter(chapter).ok_or_else(|| CliError::new("UnknownChapter", format!("unknown chapter `{chapter}`")))?;
        let pr = pagerank(&g, &cfg)?;
        (json!({"chapter": id}), rank_chapter_concepts_with(&g, &id, &pr)?)
    } else if let Some(concept) = &a.concept {
        let id = g
            .find_entity(concept, NodeKind::Concept)
            .cloned()
            .ok_or_else(|| CliError::new("UnknownNode", format!("unknown concept `{concept}`")))?;
        let pr = pagerank(&g, &cfg)?;
        (json!({"concept": id}), rank_concept_facts_with(&g, &id, &pr, a.top.unwrap_or(usize::MAX))?)
    } else {
        (json!("graph"), rank_all(&g, &cfg)?)
    };
    if let Some(top) = a.top {
        ranked.truncate(top);
    }
    emit(&json!({"subject": g.subject().as_str(), "scope": scope, "ranked": ranked}), None)
}

fn blueprint_validate(ctx: &Ctx, path: &Path) -> Result<()> {
    let bp: ExamBlueprint = read_json(path)?;
    bp.validate()?;
    let registry = ctx.store.load()?;
    let chapters = match registry.get(&bp.subject) {
        None => Value::Null,
        Some(handle) => {
            let g = handle.read();
            let mut resolved = serde_json::Map::new();
            for s in &bp.sections {
                let id = g
                    .find_chapter(&s.chapter)
                    .ok_or_else(|| CliError::new("UnknownChapter", format!("unknown chapter `{}`", s.chapter)))?;
                resolved.insert(s.chapter.clone(), json!(id));
            }
            Value::Object(resolved)
        }
    };
    emit(
        &json!({
            "valid": true,
            "subject": bp.subject,
            "total": bp.total(),
            "sections": bp.sections.len(),
            "hash": bp.hash(),
            "chapters": chapters,
        }),
        None,
    )
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> Result<()> {
    let bp: ExamBlueprint = read_json(&a.blueprint)?;
    let registry = ctx.store.load()?;
    let seed = ctx.seed(&a.llm);
    let generator = ctx.generator(a.generator, &a.llm)?;
    let rubric = ctx.rubric(a.epsilon)?;
    let exam = generate_exam(&registry, &bp, generator.as_ref(), &rubric, &ctx.exam_options(seed, a.max_retries))?;
    let mut text = exam.to_json();
    text.push('\n');
    write_output(&text, a.out.as_deref())
}

fn evaluate_item(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    let item: QuestionItem = read_json(&a.item)?;
    item.validate().map_err(|e| CliError::new("MalformedItem", e))?;
    let tier = a
        .tier
        .or(item.tier)
        .ok_or_else(|| CliError::new("InvalidInput", "no tier: pass --tier or set `tier` in the item"))?;
    let lexicon = match &a.subject {
        Some(s) => Lexicon::from_graph(&ctx.store.load()?.require(s)?.read()),
        None => Lexicon::default(),
    };
    let rubric = ctx.rubric(a.epsilon)?;
    let evaluation = evaluate_candidate(&item, tier, &rubric, &lexicon)?;
    emit(&json!({"tier": tier, "evaluation": evaluation}), None)
}

fn analyze_responses(ctx: &Ctx, a: AnalyzeArgs) -> Result<()> {
    let file = fs::File::open(&a.responses).map_err(|e| CliError::io(&a.responses, e))?;
    let matrix = ResponseMatrix::from_csv(BufReader::new(file))?;
    let spec: Option<GroupSpec> = a.groups.as_deref().map(read_json).transpose()?;
    let fraction = a.fraction.or(ctx.config.fraction).unwrap_or(0.25);
    let report = analyze(&matrix, fraction, spec.as_ref(), ctx.mode)?;
    emit(&report, a.out.as_deref())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestLine {
    topic: String,
    payload: Value,
    #[serde(default)]
    correlation_id: Option<String>,
}

fn agents_run(ctx: &Ctx, a: AgentsRunArgs) -> Result<()> {
    let registry = Arc::new(ctx.store.load()?);
    let seed = ctx.seed(&a.llm);
    let completer_result = ctx.completer(&a.llm, RuleExtractor::default());
    let generator = match a.generator {
        GeneratorKind::Template => PipelineGenerator::Direct(Arc::new(TemplateGenerator::new(seed))),
        GeneratorKind::Llm => PipelineGenerator::Llm,
    };
    // without a provider the rule extractor still serves ingestion
    let (completer, extractor): (Arc<dyn Completer>, Arc<dyn Extractor>) = match completer_result {
        Ok(c) => (c.clone(), Arc::new(LlmExtractor::new(c).with_timeout(ctx.config.timeout()))),
        Err(e) if matches!(a.generator, GeneratorKind::Template) => {
            tracing::debug!("no completer: {e}");
            (Arc::new(MockCompleter::new(seed)), Arc::new(RuleExtractor::default()))
        }
        Err(e) => return Err(e),
    };
    let config = PipelineConfig {
        registry: registry.clone(),
        extractor,
        completer,
        generator,
        rubric: ctx.rubric(None)?,
        ingest: ctx.ingest_options(true),
        exam: ctx.exam_options(seed, None),
    };
    let bus = Bus::new();
    let pipeline = run_pipeline(&bus, &config)?;
    let hub = match &a.listen {
        Some(addr) => {
            let hub = TcpHub::bind(&bus, addr.as_str())?;
            let line = json!({"listening": hub.local_addr().to_string(), "agents": pipeline.agent_names()});
            write_output(&format!("{line}\n"), None)?;
            Some(hub)
        }
        None => None,
    };
    let mut first_failure = None;
    if let Some(path) = &a.requests {
        first_failure = send_requests(ctx, &bus, path)?;
        ctx.store.save_all(&registry)?;
    }
    if hub.is_some() {
        loop {
            std::thread::park();
        }
    }
    pipeline.stop();
    match first_failure {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

/// Sends each request line and prints each answer as one JSON line. Returns
/// the first failure, if any, after all requests have run.
fn send_requests(ctx: &Ctx, bus: &Bus, path: &PathBuf) -> Result<Option<CliError>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut first_failure = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let req: RequestLine =
            serde_json::from_str(&line).map_err(|e| CliError::input(path, format!("line {}: {e}", i + 1)))?;
        let corr = req.correlation_id.unwrap_or_else(|| format!("req-{}", i + 1));
        let reply = request(bus, CLIENT, &req.topic, &corr, req.payload, ctx.config.timeout())?;
        let (ok, m) = match reply {
            Reply::Ok(m) => (true, m),
            Reply::Failed(m) => {
                if first_failure.is_none() {
                    let code = m.payload["error_code"].as_str().unwrap_or("RemoteError");
                    let message = m.payload["message"].as_str().unwrap_or_default();
                    first_failure = Some(CliError::new(code, format!("{corr}: {message}")));
                }
                (false, m)
            }
        };
        let out = json!({
            "correlation_id": corr,
            "ok": ok,
            "topic": m.topic,
            "sender": m.sender,
            "payload": m.payload,
        });
        write_output(&format!("{out}\n"), None)?;
    }
    Ok(first_failure)
}
