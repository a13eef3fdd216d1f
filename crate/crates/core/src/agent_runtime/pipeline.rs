//! The exam pipeline as five cooperating agents:
//!
//! | agent | consumes | produces |
//! |---|---|---|
//! | `file-extraction` | `ingest/request` | `kg/assert` |
//! | `kg-management` | `kg/assert`, `kg/query` | `ingest/complete`, `kg/reply` |
//! | `question-generation` | `exam/request`, `llm/reply`, verdicts | `llm/request`, `exam/candidate`, `exam/complete` |
//! | `llm` | `llm/request` | `llm/reply` |
//! | `question-evaluation` | `exam/candidate` | `exam/qualified`, `exam/rejected` |
//!
//! Generation keeps one candidate in flight per exam request and drives the
//! same [`ExamJob`] state machine as the batch path, so the final exam is
//! identical to a direct `generate_exam` call with the same generator.

use std::collections::{HashMap, HashSet};
use std::net::ToSocketAddrs;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::agent::{spawn_agent, AgentDescriptor, AgentHandle, Outgoing};
use super::bus::{Bus, ERRORS_TOPIC};
use super::codec::Message;
use super::tcp::spawn_remote_agent;
use super::BusError;
use crate::assessment::{DifficultyTier, ItemEvaluation, Lexicon, RubricConfig};
use crate::generation::{
    candidate_from_completion, evaluate_candidate, generation_request, Candidate, CandidateOutcome, ExamBlueprint,
    ExamJob, ExamOptions, GenError, Generator, PendingCandidate, QuestionItem, TEMPLATE_VARIANTS,
};
use crate::ingestion::{apply_extraction, extract_document, ExtractedDocument, Extractor, IngestOptions, SourceDocument};
use crate::kg_store::{Direction, GraphRegistry, NodeId, NodeKind};
use crate::llm_gateway::{CompletionRequest, Completer};
use crate::text::normalize_label;

pub const FILE_EXTRACTION: &str = "file-extraction";
pub const KG_MANAGEMENT: &str = "kg-management";
pub const QUESTION_GENERATION: &str = "question-generation";
pub const LLM: &str = "llm";
pub const QUESTION_EVALUATION: &str = "question-evaluation";

pub mod topics {
    pub const INGEST_REQUEST: &str = "ingest/request";
    pub const INGEST_COMPLETE: &str = "ingest/complete";
    pub const KG_ASSERT: &str = "kg/assert";
    pub const KG_QUERY: &str = "kg/query";
    pub const KG_REPLY: &str = "kg/reply";
    pub const EXAM_REQUEST: &str = "exam/request";
    pub const EXAM_CANDIDATE: &str = "exam/candidate";
    pub const EXAM_QUALIFIED: &str = "exam/qualified";
    pub const EXAM_REJECTED: &str = "exam/rejected";
    pub const EXAM_COMPLETE: &str = "exam/complete";
    pub const LLM_REQUEST: &str = "llm/request";
    pub const LLM_REPLY: &str = "llm/reply";
}
use topics::*;

/// The topic that answers a client request, if the pipeline answers it.
pub fn reply_topic(request_topic: &str) -> Option<&'static str> {
    match request_topic {
        INGEST_REQUEST | KG_ASSERT => Some(INGEST_COMPLETE),
        KG_QUERY => Some(KG_REPLY),
        EXAM_REQUEST => Some(EXAM_COMPLETE),
        LLM_REQUEST => Some(LLM_REPLY),
        _ => None,
    }
}

/// How question generation obtains candidates.
#[derive(Clone)]
pub enum PipelineGenerator {
    /// Prompts go through the `llm` agent on `llm/request`.
    Llm,
    /// Candidates come from an in-process generator.
    Direct(Arc<dyn Generator>),
}

#[derive(Clone)]
pub struct PipelineConfig {
    pub registry: Arc<GraphRegistry>,
    pub extractor: Arc<dyn Extractor>,
    pub completer: Arc<dyn Completer>,
    pub generator: PipelineGenerator,
    pub rubric: RubricConfig,
    pub ingest: IngestOptions,
    pub exam: ExamOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestRequest {
    pub document: SourceDocument,
    #[serde(default = "default_true")]
    pub append: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssertRequest {
    extracted: ExtractedDocument,
    append: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamRequest {
    pub blueprint: ExamBlueprint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
}

/// `kg/query` payload: graph statistics, or the neighbors of one node.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgQuery {
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CandidateEnvelope {
    job: String,
    subject: String,
    pending: PendingCandidate,
    tier: DifficultyTier,
    rubric: RubricConfig,
    item: QuestionItem,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Verdict {
    job: String,
    pending: PendingCandidate,
    reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    item: Option<QuestionItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evaluation: Option<ItemEvaluation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum LlmReply {
    Text(String),
    Error { error_code: String, message: String },
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("pipeline payloads serialize")
}

fn parse<T: for<'de> Deserialize<'de>>(m: &Message, agent: &str) -> Result<T, Outgoing> {
    serde_json::from_value(m.payload.clone()).map_err(|e| {
        Outgoing::error(&m.correlation_id, agent, "InvalidRequest", format!("bad `{}` payload: {e}", m.topic))
    })
}

fn file_extraction(config: &PipelineConfig) -> AgentDescriptor {
    let extractor = config.extractor.clone();
    let options = config.ingest;
    AgentDescriptor::new(FILE_EXTRACTION, &[INGEST_REQUEST], move |m: &Message| {
        let req: IngestRequest = match parse(m, FILE_EXTRACTION) {
            Ok(r) => r,
            Err(e) => return vec![e],
        };
        match extract_document(&req.document, extractor.as_ref(), &options) {
            Ok(extracted) => vec![Outgoing::reply(m, KG_ASSERT, to_value(&AssertRequest { extracted, append: req.append }))],
            Err(e) => vec![Outgoing::error(&m.correlation_id, FILE_EXTRACTION, e.code(), e.to_string())],
        }
    })
}

fn kg_query(registry: &GraphRegistry, q: &KgQuery) -> Result<Value, (String, String)> {
    let handle = registry.require(&q.subject).map_err(|e| (e.code().to_string(), e.to_string()))?;
    let g = handle.read();
    let Some(node) = &q.node else {
        return Ok(json!({
            "subject": g.subject().as_str(),
            "nodes": g.node_count(),
            "edges": g.edge_count(),
            "text_nodes": g.count_nodes(NodeKind::Text),
            "concept_nodes": g.count_nodes(NodeKind::Concept),
            "hierarchy_nodes": g.count_nodes(NodeKind::Hierarchy),
        }));
    };
    // accept a node id or an entity label
    let id = if g.node(&NodeId::new(node.as_str())).is_some() {
        NodeId::new(node.as_str())
    } else {
        [NodeKind::Text, NodeKind::Concept]
            .into_iter()
            .find_map(|k| g.find_entity(node, k).cloned())
            .or_else(|| g.find_chapter(node))
            .ok_or_else(|| ("UnknownNode".to_string(), format!("unknown node `{node}`")))?
    };
    let neighbors = g.query_neighbors(&id, Direction::Both, None).map_err(|e| (e.code().to_string(), e.to_string()))?;
    let neighbors: Vec<Value> = neighbors.iter().map(|(e, n)| json!({"edge": e, "node": n})).collect();
    Ok(json!({"subject": g.subject().as_str(), "node": id, "neighbors": neighbors}))
}

fn kg_management(config: &PipelineConfig) -> AgentDescriptor {
    let registry = config.registry.clone();
    AgentDescriptor::new(KG_MANAGEMENT, &[KG_ASSERT, KG_QUERY], move |m: &Message| {
        if m.topic == KG_ASSERT {
            let req: AssertRequest = match parse(m, KG_MANAGEMENT) {
                Ok(r) => r,
                Err(e) => return vec![e],
            };
            match apply_extraction(&registry, &req.extracted, req.append) {
                Ok(report) => vec![Outgoing::reply(m, INGEST_COMPLETE, to_value(&report))],
                Err(e) => vec![Outgoing::error(&m.correlation_id, KG_MANAGEMENT, e.code(), e.to_string())],
            }
        } else {
            let q: KgQuery = match parse(m, KG_MANAGEMENT) {
                Ok(q) => q,
                Err(e) => return vec![e],
            };
            match kg_query(&registry, &q) {
                Ok(v) => vec![Outgoing::reply(m, KG_REPLY, v)],
                Err((code, msg)) => vec![Outgoing::error(&m.correlation_id, KG_MANAGEMENT, &code, msg)],
            }
        }
    })
}

fn llm_agent(config: &PipelineConfig) -> AgentDescriptor {
    let completer = config.completer.clone();
    AgentDescriptor::new(LLM, &[LLM_REQUEST], move |m: &Message| {
        let req: CompletionRequest = match parse(m, LLM) {
            Ok(r) => r,
            Err(e) => return vec![e],
        };
        let reply = match completer.complete(&req) {
            Ok(text) => LlmReply::Text(text),
            Err(e) => LlmReply::Error { error_code: e.code().to_string(), message: e.to_string() },
        };
        vec![Outgoing::reply(m, LLM_REPLY, to_value(&reply))]
    })
}

struct EvalJob {
    lexicon: Lexicon,
    seen: HashSet<(String, String)>,
}

fn question_evaluation(config: &PipelineConfig) -> AgentDescriptor {
    let registry = config.registry.clone();
    let mut jobs: HashMap<String, EvalJob> = HashMap::new();
    AgentDescriptor::new(QUESTION_EVALUATION, &[EXAM_CANDIDATE, EXAM_COMPLETE], move |m: &Message| {
        if m.topic == EXAM_COMPLETE {
            jobs.remove(&m.correlation_id);
            return vec![];
        }
        let c: CandidateEnvelope = match parse(m, QUESTION_EVALUATION) {
            Ok(c) => c,
            Err(e) => return vec![e],
        };
        if !jobs.contains_key(&c.job) {
            let lexicon = match registry.require(&c.subject) {
                Ok(h) => Lexicon::from_graph(&h.read()),
                Err(e) => return vec![Outgoing::error(&m.correlation_id, QUESTION_EVALUATION, e.code(), e.to_string())],
            };
            jobs.insert(c.job.clone(), EvalJob { lexicon, seen: HashSet::new() });
        }
        let job = jobs.get_mut(&c.job).expect("inserted above");
        let evaluation = match evaluate_candidate(&c.item, c.tier, &c.rubric, &job.lexicon) {
            Ok(e) => e,
            Err(e) => {
                let v = Verdict {
                    job: c.job,
                    pending: c.pending,
                    reason: e.code().to_string(),
                    message: Some(e.to_string()),
                    item: None,
                    evaluation: None,
                };
                return vec![Outgoing::reply(m, EXAM_REJECTED, to_value(&v))];
            }
        };
        let key = (normalize_label(&c.item.stem), normalize_label(c.item.key().unwrap_or_default()));
        let (topic, reason) = if !evaluation.pass {
            (EXAM_REJECTED, "DifficultyOutOfTolerance")
        } else if job.seen.contains(&key) {
            (EXAM_REJECTED, "Duplicate")
        } else {
            job.seen.insert(key);
            (EXAM_QUALIFIED, "Qualified")
        };
        let v = Verdict {
            job: c.job,
            pending: c.pending,
            reason: reason.to_string(),
            message: None,
            item: Some(c.item),
            evaluation: Some(evaluation),
        };
        vec![Outgoing::reply(m, topic, to_value(&v))]
    })
}

struct GenJob {
    job: ExamJob,
    subject: String,
    in_flight: Option<PendingCandidate>,
}

struct Generation {
    registry: Arc<GraphRegistry>,
    backend: PipelineGenerator,
    generator_name: String,
    rubric: RubricConfig,
    options: ExamOptions,
    jobs: HashMap<String, GenJob>,
    timeout: Duration,
}

fn llm_correlation(job: &str, p: &PendingCandidate) -> String {
    format!("{job}|{}|{}|{}", p.cell, p.slot, p.attempt)
}

impl Generation {
    fn start(&mut self, m: &Message) -> Vec<Outgoing> {
        let req: ExamRequest = match parse(m, QUESTION_GENERATION) {
            Ok(r) => r,
            Err(e) => return vec![e],
        };
        let fail = |code: &str, msg: String| vec![Outgoing::error(&m.correlation_id, QUESTION_GENERATION, code, msg)];
        if self.jobs.contains_key(&m.correlation_id) {
            return fail("InvalidRequest", format!("exam request `{}` is already running", m.correlation_id));
        }
        let handle = match self.registry.require(&req.blueprint.subject) {
            Ok(h) => h,
            Err(e) => return fail(e.code(), e.to_string()),
        };
        let mut options = self.options.clone();
        options.seed = req.seed.unwrap_or(options.seed);
        options.max_retries = req.max_retries.unwrap_or(options.max_retries);
        let variants = match &self.backend {
            PipelineGenerator::Llm => TEMPLATE_VARIANTS,
            PipelineGenerator::Direct(g) => g.variants(),
        };
        let graph = handle.read();
        let job = ExamJob::new(&graph, &req.blueprint, &self.rubric, &options, self.generator_name.clone(), variants);
        let subject = graph.subject().to_string();
        drop(graph);
        match job {
            Ok(job) => {
                self.jobs.insert(m.correlation_id.clone(), GenJob { job, subject, in_flight: None });
                self.advance(&m.correlation_id)
            }
            Err(e) => fail(e.code(), e.to_string()),
        }
    }

    /// Issues the next candidate of a job, or completes it.
    fn advance(&mut self, job_id: &str) -> Vec<Outgoing> {
        let mut out = Vec::new();
        loop {
            let Some(state) = self.jobs.get_mut(job_id) else {
                return out;
            };
            let Some(p) = state.job.next_pending() else {
                let state = self.jobs.remove(job_id).expect("present");
                out.push(Outgoing::new(EXAM_COMPLETE, job_id, to_value(&state.job.finish())));
                return out;
            };
            state.in_flight = Some(p);
            match &self.backend {
                PipelineGenerator::Llm => {
                    let request = generation_request(&state.job.request(&p), self.timeout);
                    out.push(Outgoing::new(LLM_REQUEST, llm_correlation(job_id, &p), to_value(&request)));
                    return out;
                }
                PipelineGenerator::Direct(g) => {
                    let candidate = g.generate(&state.job.request(&p));
                    match self.submit(job_id, p, candidate) {
                        Ok(o) => {
                            out.push(o);
                            return out;
                        }
                        Err(notice) => out.push(notice),
                    }
                }
            }
        }
    }

    /// Builds the item and hands it to evaluation. A generation failure is
    /// recorded on the spot and comes back as a reject notice.
    fn submit(
        &mut self,
        job_id: &str,
        p: PendingCandidate,
        candidate: Result<Candidate, GenError>,
    ) -> Result<Outgoing, Outgoing> {
        let state = self.jobs.get_mut(job_id).expect("caller checked the job");
        match state.job.build_item(&p, candidate) {
            Ok(item) => {
                let env = CandidateEnvelope {
                    job: job_id.to_string(),
                    subject: state.subject.clone(),
                    pending: p,
                    tier: state.job.tier(p.cell),
                    rubric: state.job.rubric().clone(),
                    item,
                };
                Ok(Outgoing::new(EXAM_CANDIDATE, job_id, to_value(&env)))
            }
            Err(e) => {
                state.job.record(&p, CandidateOutcome::Failed { code: e.code().to_string(), message: e.to_string() });
                state.in_flight = None;
                let v = Verdict {
                    job: job_id.to_string(),
                    pending: p,
                    reason: e.code().to_string(),
                    message: Some(e.to_string()),
                    item: None,
                    evaluation: None,
                };
                Err(Outgoing::new(EXAM_REJECTED, job_id, to_value(&v)))
            }
        }
    }

    fn on_llm_reply(&mut self, m: &Message) -> Vec<Outgoing> {
        let job_id = m.correlation_id.split('|').next().unwrap_or_default().to_string();
        let Some(p) = self.jobs.get(&job_id).and_then(|s| s.in_flight) else {
            return vec![];
        };
        if llm_correlation(&job_id, &p) != m.correlation_id {
            return vec![];
        }
        let candidate = match serde_json::from_value::<LlmReply>(m.payload.clone()) {
            Ok(LlmReply::Text(t)) => candidate_from_completion(Ok(t)),
            Ok(LlmReply::Error { error_code, message }) => {
                Err(GenError::GeneratorFailure(format!("{error_code}: {message}")))
            }
            Err(e) => Err(GenError::GeneratorFailure(format!("MalformedResponse: bad llm reply: {e}"))),
        };
        match self.submit(&job_id, p, candidate) {
            Ok(o) => vec![o],
            Err(notice) => {
                let mut out = vec![notice];
                out.extend(self.advance(&job_id));
                out
            }
        }
    }

    fn on_verdict(&mut self, m: &Message) -> Vec<Outgoing> {
        let v: Verdict = match parse(m, QUESTION_GENERATION) {
            Ok(v) => v,
            Err(e) => return vec![e],
        };
        let Some(state) = self.jobs.get_mut(&v.job) else {
            return vec![];
        };
        if state.in_flight != Some(v.pending) {
            return vec![];
        }
        state.in_flight = None;
        let outcome = match (v.item, v.evaluation) {
            (Some(item), Some(evaluation)) => CandidateOutcome::Evaluated { item, evaluation },
            _ => CandidateOutcome::Failed { code: v.reason, message: v.message.unwrap_or_default() },
        };
        state.job.record(&v.pending, outcome);
        self.advance(&v.job)
    }
}

fn question_generation(config: &PipelineConfig) -> AgentDescriptor {
    let generator_name = match &config.generator {
        PipelineGenerator::Llm => format!("llm:{}", config.completer.name()),
        PipelineGenerator::Direct(g) => g.name(),
    };
    let mut state = Generation {
        registry: config.registry.clone(),
        backend: config.generator.clone(),
        generator_name,
        rubric: config.rubric.clone(),
        options: config.exam.clone(),
        jobs: HashMap::new(),
        timeout: Duration::from_secs(60),
    };
    AgentDescriptor::new(
        QUESTION_GENERATION,
        &[EXAM_REQUEST, LLM_REPLY, EXAM_QUALIFIED, EXAM_REJECTED],
        move |m: &Message| match m.topic.as_str() {
            EXAM_REQUEST => state.start(m),
            LLM_REPLY => state.on_llm_reply(m),
            // our own reject notices come back too; they are already recorded
            _ if m.sender == QUESTION_GENERATION => vec![],
            _ => state.on_verdict(m),
        },
    )
}

/// Descriptors of the five pipeline agents.
pub fn pipeline_agents(config: &PipelineConfig) -> Vec<AgentDescriptor> {
    vec![
        file_extraction(config),
        kg_management(config),
        question_generation(config),
        llm_agent(config),
        question_evaluation(config),
    ]
}

/// Running pipeline agents. Dropping the pipeline stops them.
pub struct Pipeline {
    agents: Vec<AgentHandle>,
}

impl Pipeline {
    pub fn agent_names(&self) -> Vec<&str> {
        self.agents.iter().map(AgentHandle::name).collect()
    }

    pub fn stop(self) {
        for a in self.agents {
            a.stop();
        }
    }
}

/// Starts the pipeline on an in-process bus.
pub fn run_pipeline(bus: &Bus, config: &PipelineConfig) -> Result<Pipeline, BusError> {
    let mut agents = Vec::new();
    for d in pipeline_agents(config) {
        agents.push(spawn_agent(bus, d)?);
    }
    Ok(Pipeline { agents })
}

/// Starts the pipeline agents in this process, connected to a remote hub.
pub fn run_remote_pipeline(addr: impl ToSocketAddrs + Clone, config: &PipelineConfig) -> Result<Pipeline, BusError> {
    let mut agents = Vec::new();
    for d in pipeline_agents(config) {
        agents.push(spawn_remote_agent(addr.clone(), d)?);
    }
    Ok(Pipeline { agents })
}

/// Terminal answer to a client request.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Ok(Message),
    /// An agent reported an error for the request on `system/errors`.
    Failed(Message),
}

/// Publishes a request on the bus and waits for its answer (the reply topic
/// or an error with the same correlation id).
pub fn request(
    bus: &Bus,
    client: &str,
    topic: &str,
    correlation_id: &str,
    payload: Value,
    timeout: Duration,
) -> Result<Reply, BusError> {
    let reply = reply_topic(topic).ok_or_else(|| BusError::BadTopic(format!("`{topic}` has no reply topic")))?;
    let replies = bus.subscribe(client, reply)?;
    let errors = bus.subscribe(client, ERRORS_TOPIC)?;
    bus.publish(client, topic, correlation_id, payload)?;
    let deadline = Instant::now() + timeout;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Err(BusError::Timeout(format!("no reply to `{topic}` {correlation_id}")));
        }
        crossbeam_channel::select! {
            recv(replies.receiver()) -> m => {
                let m = m.map_err(|_| BusError::BusClosed)?;
                if m.correlation_id == correlation_id {
                    return Ok(Reply::Ok(m));
                }
            }
            recv(errors.receiver()) -> m => {
                let m = m.map_err(|_| BusError::BusClosed)?;
                if m.correlation_id == correlation_id && m.sender != super::bus::BUS_SENDER {
                    return Ok(Reply::Failed(m));
                }
            }
            default(left) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_gateway::MockCompleter;
    use crate::ingestion::{DocFormat, LlmExtractor};

    fn config() -> PipelineConfig {
        let completer: Arc<dyn Completer> = Arc::new(MockCompleter::new(1));
        PipelineConfig {
            registry: Arc::new(GraphRegistry::new()),
            extractor: Arc::new(LlmExtractor::new(completer.clone())),
            completer,
            generator: PipelineGenerator::Llm,
            rubric: RubricConfig::default(),
            ingest: IngestOptions { append: true, ..IngestOptions::default() },
            exam: ExamOptions::default(),
        }
    }

    #[test]
    fn ingest_then_query() {
        let bus = Bus::new();
        let cfg = config();
        let _p = run_pipeline(&bus, &cfg).unwrap();
        let doc = SourceDocument {
            doc_id: "d".into(),
            subject: "eco".into(),
            chapter_path: vec!["Ch 1".into()],
            body: "Acid rain harms the forest. The oak is a kind of tree.".into(),
            format: DocFormat::Plain,
        };
        let t = Duration::from_secs(10);
        let payload = to_value(&IngestRequest { document: doc, append: true });
        let Reply::Ok(r) = request(&bus, "client", INGEST_REQUEST, "i1", payload, t).unwrap() else { panic!() };
        assert_eq!(r.sender, KG_MANAGEMENT);
        assert_eq!(r.payload["triples_added"], 2);
        let q = to_value(&KgQuery { subject: "eco".into(), node: Some("oak".into()) });
        let Reply::Ok(r) = request(&bus, "client", KG_QUERY, "q1", q, t).unwrap() else { panic!() };
        assert_eq!(r.payload["neighbors"].as_array().unwrap().len(), 2);
        let q = to_value(&KgQuery { subject: "nope".into(), node: None });
        let Reply::Failed(e) = request(&bus, "client", KG_QUERY, "q2", q, t).unwrap() else { panic!() };
        assert_eq!(e.payload["error_code"], "UnknownSubject");
    }

    #[test]
    fn unknown_subject_exam_reports_error() {
        let bus = Bus::new();
        let _p = run_pipeline(&bus, &config()).unwrap();
        let bp = ExamBlueprint::allocate("ghost", &[("Ch", 1)], 1, [1, 0, 0]).unwrap();
        let payload = to_value(&ExamRequest { blueprint: bp, seed: None, max_retries: None });
        let r = request(&bus, "client", EXAM_REQUEST, "e1", payload, Duration::from_secs(10)).unwrap();
        let Reply::Failed(e) = r else { panic!("{r:?}") };
        assert_eq!(e.payload["error_code"], "UnknownSubject");
        assert_eq!(e.sender, QUESTION_GENERATION);
    }
}
