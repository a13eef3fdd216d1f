//! Source documents to subject graphs: transcription, segmentation,
//! triple extraction and graph assembly.

mod llm;
mod rules;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

pub use llm::{extraction_prompt, parse_extraction_prompt, parse_extraction_reply, LlmExtractor, EXTRACTION_TASK_MARKER};
pub use rules::RuleExtractor;

use crate::kg_store::{EdgeKindTag, GraphRegistry, KgError, LinkKind, NodeId, NodeKind, SourceRef, SubjectId};
use crate::par::{self, Parallelism};
use crate::text::{normalize_label, sentences};

pub const MIN_SEGMENT_CHARS: usize = 200;
pub const DEFAULT_SEGMENT_CHARS: usize = 2000;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("unsupported document format `{0}`")]
    UnsupportedFormat(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("max_chars must be at least {MIN_SEGMENT_CHARS}, got {0}")]
    SegmentTooSmall(usize),
    #[error("extractor failed: {0}")]
    ExtractorFailure(String),
    #[error("invalid extraction: {0}")]
    InvalidExtraction(String),
    #[error("malformed hypernym lexicon: {0}")]
    MalformedLexicon(String),
    #[error(transparent)]
    Graph(#[from] KgError),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnsupportedFormat(_) => "UnsupportedFormat",
            Self::InvalidDocument(_) => "InvalidDocument",
            Self::SegmentTooSmall(_) => "InvalidConfig",
            Self::ExtractorFailure(_) => "ExtractorFailure",
            Self::InvalidExtraction(_) => "InvalidExtraction",
            Self::MalformedLexicon(_) => "MalformedLexicon",
            Self::Graph(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocFormat {
    Plain,
    Markdown,
}

impl std::str::FromStr for DocFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "txt" | "text" => Ok(Self::Plain),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(IngestError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub subject: String,
    pub chapter_path: Vec<String>,
    pub body: String,
    pub format: DocFormat,
}

impl SourceDocument {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.doc_id.trim().is_empty() {
            return Err(IngestError::InvalidDocument("doc_id is empty".into()));
        }
        SubjectId::new(&self.subject)?;
        if self.body.trim().is_empty() {
            return Err(IngestError::InvalidDocument("body is empty".into()));
        }
        if self.chapter_path.is_empty() || self.chapter_path.iter().any(|c| normalize_label(c).is_empty()) {
            return Err(IngestError::InvalidDocument("chapter_path must be non-empty labels".into()));
        }
        Ok(())
    }
}

/// Plain text of a document. Markdown is reduced to its text content with
/// headings kept in reading order.
pub fn transcribe(doc: &SourceDocument) -> String {
    match doc.format {
        DocFormat::Plain => doc.body.clone(),
        DocFormat::Markdown => markdown_to_text(&doc.body),
    }
}

fn markdown_to_text(md: &str) -> String {
    use pulldown_cmark::{Event, Parser, Tag, TagEnd};

    let mut out = String::new();
    for event in Parser::new(md) {
        match event {
            Event::Text(t) | Event::Code(t) => out.push_str(&t),
            Event::SoftBreak | Event::HardBreak => out.push('\n'),
            Event::Start(Tag::Item) if !out.is_empty() && !out.ends_with('\n') => out.push('\n'),
            Event::End(TagEnd::Heading(_)) | Event::End(TagEnd::Item) => out.push('\n'),
            Event::End(TagEnd::Paragraph | TagEnd::CodeBlock | TagEnd::List(_) | TagEnd::BlockQuote(_)) => {
                while out.ends_with("\n\n\n") {
                    out.pop();
                }
                if !out.ends_with("\n\n") {
                    out.push_str(if out.ends_with('\n') { "\n" } else { "\n\n" });
                }
            }
            _ => {}
        }
    }
    out.trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSegment {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Packs `parts` greedily into chunks of at most `max` chars joined by `sep`.
fn pack(parts: impl IntoIterator<Item = String>, sep: &str, max: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for part in parts {
        if cur.is_empty() {
            cur = part;
        } else if char_len(&cur) + char_len(sep) + char_len(&part) <= max {
            cur.push_str(sep);
            cur.push_str(&part);
        } else {
            out.push(std::mem::replace(&mut cur, part));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

// Last resort for a single sentence longer than `max`: word packing, then
// raw character chunks for giant words.
fn split_long(sentence: &str, max: usize) -> Vec<String> {
    let words = sentence.split_whitespace().flat_map(|w| {
        let chars: Vec<char> = w.chars().collect();
        chars.chunks(max).map(|c| c.iter().collect::<String>()).collect::<Vec<_>>()
    });
    pack(words, " ", max)
}

/// Splits text into segments of at most `max_chars` characters on blank-line
/// paragraph boundaries, merging short paragraphs and splitting long ones at
/// sentence ends.
pub fn segment_text(doc_id: &str, text: &str, max_chars: usize) -> Result<Vec<TextSegment>, IngestError> {
    if max_chars < MIN_SEGMENT_CHARS {
        return Err(IngestError::SegmentTooSmall(max_chars));
    }
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }

    let mut units = Vec::new();
    for p in paragraphs {
        let p = p.trim().to_string();
        if char_len(&p) <= max_chars {
            units.push(p);
            continue;
        }
        let sentences = sentences(&p).into_iter().flat_map(|s| {
            if char_len(s) <= max_chars {
                vec![s.to_string()]
            } else {
                split_long(s, max_chars)
            }
        });
        units.extend(pack(sentences, " ", max_chars));
    }
    Ok(pack(units, "\n\n", max_chars)
        .into_iter()
        .enumerate()
        .map(|(index, text)| TextSegment { doc_id: doc_id.to_string(), index, text })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[String; 3]", into = "[String; 3]")]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Self { head: head.into(), relation: relation.into(), tail: tail.into() }
    }
}

impl From<[String; 3]> for Triple {
    fn from([head, relation, tail]: [String; 3]) -> Self {
        Self { head, relation, tail }
    }
}

impl From<Triple> for [String; 3] {
    fn from(t: Triple) -> Self {
        [t.head, t.relation, t.tail]
    }
}

/// Triples and entity → concept mappings extracted from one segment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub triples: Vec<Triple>,
    pub concepts: BTreeMap<String, Vec<String>>,
}

impl ExtractionResult {
    pub fn validate(&self) -> Result<(), IngestError> {
        let mut entities = BTreeSet::new();
        for (i, t) in self.triples.iter().enumerate() {
            let parts = [&t.head, &t.relation, &t.tail].map(|s| normalize_label(s));
            if parts.iter().any(String::is_empty) {
                return Err(IngestError::InvalidExtraction(format!("triple {i} has an empty part")));
            }
            entities.insert(parts[0].clone());
            entities.insert(parts[2].clone());
        }
        for (entity, concepts) in &self.concepts {
            if !entities.contains(&normalize_label(entity)) {
                return Err(IngestError::InvalidExtraction(format!(
                    "concept mapping for `{entity}`, which is not the head or tail of any triple"
                )));
            }
            if concepts.is_empty() || concepts.iter().any(|c| normalize_label(c).is_empty()) {
                return Err(IngestError::InvalidExtraction(format!("empty concept list or label for `{entity}`")));
            }
        }
        Ok(())
    }
}

/// Turns segment text into triples and concept mappings.
pub trait Extractor: Send + Sync {
    fn extract(&self, text: &str) -> Result<ExtractionResult, IngestError>;
}

/// Runs `extractor` on one segment and validates its output.
pub fn extract_segment(segment: &TextSegment, extractor: &dyn Extractor) -> Result<ExtractionResult, IngestError> {
    let result = match extractor.extract(&segment.text) {
        Ok(r) => r,
        Err(e @ (IngestError::ExtractorFailure(_) | IngestError::InvalidExtraction(_))) => return Err(e),
        Err(e) => return Err(IngestError::ExtractorFailure(e.to_string())),
    };
    result.validate()?;
    Ok(result)
}

/// Reads a JSON object of entity label → concept labels.
pub fn load_hypernym_lexicon<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<String>>, IngestError> {
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_reader(reader).map_err(|e| IngestError::MalformedLexicon(e.to_string()))?;
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (entity, concepts) in raw {
        let key = normalize_label(&entity);
        if key.is_empty() {
            return Err(IngestError::MalformedLexicon("empty entity label".into()));
        }
        out.entry(key).or_default().extend(concepts);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Add to an existing subject graph instead of requiring a new one.
    pub append: bool,
    pub max_chars: usize,
    pub parallelism: Parallelism,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { append: false, max_chars: DEFAULT_SEGMENT_CHARS, parallelism: Parallelism::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentFailure {
    pub segment: usize,
    pub error_code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub doc_id: String,
    pub subject: String,
    pub chapter: NodeId,
    pub segments: usize,
    /// Fact edges not present before this ingest.
    pub triples_added: usize,
    /// Concept nodes not present before this ingest.
    pub concepts_added: usize,
    pub failures: Vec<SegmentFailure>,
}

/// Extraction outcome of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentOutcome {
    Extracted(ExtractionResult),
    Failed(SegmentFailure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSegment {
    pub index: usize,
    pub outcome: SegmentOutcome,
}

/// A document after extraction, before it touches any graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedDocument {
    pub doc_id: String,
    pub subject: String,
    pub chapter_path: Vec<String>,
    pub segments: Vec<ExtractedSegment>,
}

/// Transcribes, segments and extracts a document. Segment failures are
/// kept in the result and do not stop the remaining segments.
pub fn extract_document(
    doc: &SourceDocument,
    extractor: &dyn Extractor,
    options: &IngestOptions,
) -> Result<ExtractedDocument, IngestError> {
    doc.validate()?;
    let text = transcribe(doc);
    let segments = segment_text(&doc.doc_id, &text, options.max_chars)?;
    let results = par::map_slice(options.parallelism, &segments, |s| extract_segment(s, extractor));
    let segments = segments
        .iter()
        .zip(results)
        .map(|(segment, result)| {
            let outcome = match result {
                Ok(r) => SegmentOutcome::Extracted(r),
                Err(e) => {
                    warn!(doc = %doc.doc_id, segment = segment.index, error = %e, "segment extraction failed");
                    SegmentOutcome::Failed(SegmentFailure {
                        segment: segment.index,
                        error_code: e.code().into(),
                        message: e.to_string(),
                    })
                }
            };
            ExtractedSegment { index: segment.index, outcome }
        })
        .collect();
    Ok(ExtractedDocument {
        doc_id: doc.doc_id.clone(),
        subject: doc.subject.clone(),
        chapter_path: doc.chapter_path.clone(),
        segments,
    })
}

/// Writes an extracted document into its subject graph.
pub fn apply_extraction(
    registry: &GraphRegistry,
    extracted: &ExtractedDocument,
    append: bool,
) -> Result<IngestReport, IngestError> {
    let handle = if append {
        registry.get_or_create(&extracted.subject)?
    } else {
        registry.create_subject_graph(&extracted.subject)?
    };
    let subject = handle.read().subject().clone();
    registry.claim_document(&extracted.doc_id, &subject)?;
    for seg in &extracted.segments {
        if let SegmentOutcome::Extracted(r) = &seg.outcome {
            r.validate()?;
        }
    }

    let mut graph = handle.write();
    let facts_before = graph.count_edges(EdgeKindTag::Fact);
    let leaf = graph.upsert_hierarchy_path(&extracted.chapter_path)?;
    let mut concepts_added = 0;
    let mut failures = Vec::new();
    for seg in &extracted.segments {
        let extraction = match &seg.outcome {
            SegmentOutcome::Extracted(r) => r,
            SegmentOutcome::Failed(f) => {
                failures.push(f.clone());
                continue;
            }
        };
        let source = SourceRef { doc_id: extracted.doc_id.clone(), segment: seg.index };
        for t in &extraction.triples {
            let edge = graph.assert_fact_triple(&t.head, &t.relation, &t.tail)?;
            graph.add_source_ref(&edge.from, source.clone())?;
            graph.add_source_ref(&edge.to, source.clone())?;
        }
        for (entity, concepts) in &extraction.concepts {
            let entity_id: NodeId = graph
                .find_entity(entity, NodeKind::Text)
                .cloned()
                .expect("validated: mapped entity occurs in a triple");
            for concept in concepts {
                if graph.find_entity(concept, NodeKind::Concept).is_none() {
                    concepts_added += 1;
                }
                let concept_id = graph.upsert_entity(concept, NodeKind::Concept)?;
                graph.assert_link(LinkKind::IsA, &entity_id, &concept_id)?;
                graph.assert_link(LinkKind::IncludeIn, &concept_id, &leaf)?;
            }
        }
    }
    let triples_added = graph.count_edges(EdgeKindTag::Fact) - facts_before;
    debug!(doc = %extracted.doc_id, segments = extracted.segments.len(), triples_added, concepts_added, "ingested");
    Ok(IngestReport {
        doc_id: extracted.doc_id.clone(),
        subject: subject.to_string(),
        chapter: leaf,
        segments: extracted.segments.len(),
        triples_added,
        concepts_added,
        failures,
    })
}

/// Ingests one document into its subject graph. Segment extraction failures
/// are recorded in the report and do not stop the remaining segments.
pub fn ingest_document(
    registry: &GraphRegistry,
    doc: &SourceDocument,
    extractor: &dyn Extractor,
    options: &IngestOptions,
) -> Result<IngestReport, IngestError> {
    doc.validate()?;
    // fail before spending extractor calls
    if !options.append && registry.get(&doc.subject).is_some() {
        return Err(KgError::DuplicateSubject(SubjectId::new(&doc.subject)?.to_string()).into());
    }
    let extracted = extract_document(doc, extractor, options)?;
    apply_extraction(registry, &extracted, options.append)
}
