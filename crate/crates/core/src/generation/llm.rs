//! Generator backed by a chat-completion model.

use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::template::{TemplateMaterial, TEMPLATE_VARIANTS};
use super::{Candidate, CandidateRequest, GenError, Generator};
use crate::assessment::{bloom_profile, BloomLevel, DifficultyTier};
use crate::llm_gateway::{CompletionRequest, Completer, LlmError};

pub const GENERATION_TASK_MARKER: &str = "TASK: generate-mcq";

const SYSTEM_PROMPT: &str = "You write multiple-choice exam items from knowledge-graph material. \
Reply with a single JSON object and no other text.";

/// Fields recovered from a generation prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationPrompt {
    pub tier: DifficultyTier,
    pub bloom: BloomLevel,
    pub variant: u32,
    pub slot: usize,
    pub material: TemplateMaterial,
}

fn section(out: &mut String, name: &str, lines: &[String]) {
    out.push_str(name);
    out.push_str(":\n");
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
}

/// User prompt carrying the tier, its rating profile, and the bundle's
/// facts as "head relation tail" lines.
pub fn generation_prompt(p: &GenerationPrompt) -> String {
    let profile = bloom_profile(p.bloom).values().iter().map(u8::to_string).collect::<Vec<_>>().join(",");
    let m = &p.material;
    let mut out = format!(
        "{GENERATION_TASK_MARKER}\nTIER: {}\nBLOOM: {}\nPROFILE: {profile}\nVARIANT: {}\nSLOT: {}\nCHAPTER: {}\nCONCEPT: {}\nKEY: {}\n",
        p.tier.as_str(),
        p.bloom.as_str(),
        p.variant,
        p.slot,
        m.chapter,
        m.concept,
        m.key,
    );
    section(&mut out, "TRIPLES", &m.statements);
    section(&mut out, "DISTRACTORS", &m.distractors);
    out.push_str(
        "Write one item about CONCEPT whose correct answer is KEY, using DISTRACTORS for wrong options. \
         Match the PROFILE (stem length, vocabulary, cognitive level, option length, option similarity, \
         stem-option overlap, plausible distractors; 1 low to 3 high). \
         Return {\"stem\":string,\"options\":[4 strings],\"answer_index\":0-3}.",
    );
    out
}

/// Parses a prompt built by [`generation_prompt`].
pub fn parse_generation_prompt(prompt: &str) -> Option<GenerationPrompt> {
    let mut lines = prompt.lines();
    if lines.next()? != GENERATION_TASK_MARKER {
        return None;
    }
    let mut field = |name: &str| -> Option<String> { lines.next()?.strip_prefix(name)?.strip_prefix(": ").map(str::to_string) };
    let tier = field("TIER")?.parse().ok()?;
    let bloom = field("BLOOM")?.parse().ok()?;
    field("PROFILE")?;
    let variant = field("VARIANT")?.parse().ok()?;
    let slot = field("SLOT")?.parse().ok()?;
    let chapter = field("CHAPTER")?;
    let concept = field("CONCEPT")?;
    let key = field("KEY")?;
    if lines.next()? != "TRIPLES:" {
        return None;
    }
    let mut statements = Vec::new();
    let mut distractors = Vec::new();
    let mut in_distractors = false;
    for line in lines {
        if line == "DISTRACTORS:" {
            in_distractors = true;
        } else if line.starts_with("Write one item") {
            break;
        } else if in_distractors {
            distractors.push(line.to_string());
        } else {
            statements.push(line.to_string());
        }
    }
    Some(GenerationPrompt {
        tier,
        bloom,
        variant,
        slot,
        material: TemplateMaterial { chapter, concept, key, statements, distractors },
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Reply {
    stem: String,
    options: Vec<String>,
    answer_index: usize,
}

/// Parses a model reply into a candidate; the structure is checked by the
/// caller.
pub fn parse_generation_reply(reply: &str) -> Result<Candidate, GenError> {
    let r: Reply = serde_json::from_str(reply.trim())
        .map_err(|e| GenError::MalformedCandidate(format!("reply is not the expected JSON object: {e}")))?;
    Ok(Candidate { stem: r.stem, options: r.options, answer_index: r.answer_index })
}

pub struct LlmGenerator {
    completer: Arc<dyn Completer>,
    timeout: Duration,
}

impl LlmGenerator {
    pub fn new(completer: Arc<dyn Completer>) -> Self {
        Self { completer, timeout: Duration::from_secs(60) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

/// The completion request the LLM generator sends for one candidate.
pub fn generation_request(req: &CandidateRequest<'_>, timeout: Duration) -> CompletionRequest {
    let prompt = generation_prompt(&GenerationPrompt {
        tier: req.tier,
        bloom: req.bloom,
        variant: req.attempt,
        slot: req.slot,
        material: TemplateMaterial::from(req.bundle),
    });
    CompletionRequest::new(SYSTEM_PROMPT, prompt).with_max_tokens(512).with_timeout(timeout)
}

/// Maps a completion outcome to a candidate.
pub fn candidate_from_completion(reply: Result<String, LlmError>) -> Result<Candidate, GenError> {
    let reply = reply.map_err(|e| GenError::GeneratorFailure(format!("{}: {e}", e.code())))?;
    parse_generation_reply(&reply)
}

impl Generator for LlmGenerator {
    fn generate(&self, req: &CandidateRequest<'_>) -> Result<Candidate, GenError> {
        candidate_from_completion(self.completer.complete(&generation_request(req, self.timeout)))
    }

    fn variants(&self) -> u32 {
        TEMPLATE_VARIANTS
    }

    fn name(&self) -> String {
        format!("llm:{}", self.completer.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_round_trip() {
        let p = GenerationPrompt {
            tier: DifficultyTier::AppliedUnderstanding,
            bloom: BloomLevel::Apply,
            variant: 2,
            slot: 7,
            material: TemplateMaterial {
                chapter: "ch 1".into(),
                concept: "tree".into(),
                key: "oak".into(),
                statements: vec!["oak provides shade".into(), "pine holds snow".into()],
                distractors: vec!["granite".into(), "salmon".into(), "fern".into()],
            },
        };
        let text = generation_prompt(&p);
        assert!(text.contains("PROFILE: 2,3,2,2,2,2,2\n"));
        assert!(text.contains("\noak provides shade\n"));
        assert_eq!(parse_generation_prompt(&text), Some(p));
        assert_eq!(parse_generation_prompt("TASK: extract-triples\n"), None);
    }

    #[test]
    fn strict_reply() {
        let c = parse_generation_reply(r#"{"stem":"s","options":["a","b","c"],"answer_index":0}"#).unwrap();
        assert_eq!(c.options.len(), 3);
        assert!(parse_generation_reply(r#"{"stem":"s","options":[],"answer_index":0,"x":1}"#).is_err());
        assert!(parse_generation_reply("no").is_err());
    }
}
