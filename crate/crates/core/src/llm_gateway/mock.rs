use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{CompletionRequest, Completer, LlmError};
use crate::generation::{compose, parse_generation_prompt};
use crate::ingestion::{parse_extraction_prompt, Extractor, RuleExtractor};

/// Offline completer. Extraction prompts are answered by the rule
/// extractor, generation prompts by the built-in templates with a shuffle
/// seeded from `(seed, prompts)`.
#[derive(Debug, Clone, Default)]
pub struct MockCompleter {
    seed: u64,
    extractor: RuleExtractor,
}

impl MockCompleter {
    pub fn new(seed: u64) -> Self {
        Self { seed, extractor: RuleExtractor::default() }
    }

    pub fn with_extractor(mut self, extractor: RuleExtractor) -> Self {
        self.extractor = extractor;
        self
    }

    fn rng(&self, request: &CompletionRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_be_bytes());
        h.update(request.system_prompt.as_bytes());
        h.update([0]);
        h.update(request.user_prompt.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    pub fn respond(&self, request: &CompletionRequest) -> String {
        if let Some(text) = parse_extraction_prompt(&request.user_prompt) {
            let result = self.extractor.extract(text).unwrap_or_default();
            return serde_json::to_string(&result).expect("extraction serializes");
        }
        if let Some(p) = parse_generation_prompt(&request.user_prompt) {
            return match compose(&p.material, p.tier, p.variant, &mut self.rng(request)) {
                Ok(c) => serde_json::to_string(&c).expect("candidate serializes"),
                // a reply the caller will reject as malformed, like a confused model
                Err(e) => json!({"error": e.to_string()}).to_string(),
            };
        }
        json!({"echo": request.user_prompt}).to_string()
    }
}

impl Completer for MockCompleter {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        Ok(self.respond(request))
    }

    fn name(&self) -> String {
        format!("mock:{}", self.seed)
    }
}
