//! Extractor backed by a chat-completion model.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::{ExtractionResult, Extractor, IngestError, Triple};
use crate::llm_gateway::{CompletionRequest, Completer};

pub const EXTRACTION_TASK_MARKER: &str = "TASK: extract-triples";
const TEXT_MARKER: &str = "TEXT:\n";

const SYSTEM_PROMPT: &str = "You convert educational text into knowledge-graph triples. \
Reply with a single JSON object and no other text.";

/// User prompt for one segment.
pub fn extraction_prompt(segment: &str) -> String {
    format!(
        "{EXTRACTION_TASK_MARKER}\n\
         Return {{\"triples\":[[head,relation,tail],...],\"concepts\":{{\"entity\":[\"concept\",...]}}}}. \
         Every entity in concepts must appear as a head or tail.\n\
         {TEXT_MARKER}{segment}"
    )
}

/// Recovers the segment text from a prompt built by [`extraction_prompt`].
pub fn parse_extraction_prompt(prompt: &str) -> Option<&str> {
    if !prompt.starts_with(EXTRACTION_TASK_MARKER) {
        return None;
    }
    prompt.find(TEXT_MARKER).map(|i| &prompt[i + TEXT_MARKER.len()..])
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Reply {
    triples: Vec<[String; 3]>,
    #[serde(default)]
    concepts: BTreeMap<String, Vec<String>>,
}

/// Parses a model reply. Anything but the exact object shape is rejected.
pub fn parse_extraction_reply(reply: &str) -> Result<ExtractionResult, IngestError> {
    let parsed: Reply = serde_json::from_str(reply.trim())
        .map_err(|e| IngestError::InvalidExtraction(format!("reply is not the expected JSON object: {e}")))?;
    let result = ExtractionResult {
        triples: parsed.triples.into_iter().map(|[h, r, t]| Triple::new(h, r, t)).collect(),
        concepts: parsed.concepts,
    };
    result.validate()?;
    Ok(result)
}

pub struct LlmExtractor {
    completer: Arc<dyn Completer>,
    max_tokens: u32,
    timeout: Duration,
}

impl LlmExtractor {
    pub fn new(completer: Arc<dyn Completer>) -> Self {
        Self { completer, max_tokens: 1024, timeout: Duration::from_secs(60) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Extractor for LlmExtractor {
    fn extract(&self, text: &str) -> Result<ExtractionResult, IngestError> {
        let request = CompletionRequest::new(SYSTEM_PROMPT, extraction_prompt(text))
            .with_max_tokens(self.max_tokens)
            .with_timeout(self.timeout);
        let reply = self
            .completer
            .complete(&request)
            .map_err(|e| IngestError::ExtractorFailure(format!("{}: {e}", e.code())))?;
        parse_extraction_reply(&reply)
    }
}
