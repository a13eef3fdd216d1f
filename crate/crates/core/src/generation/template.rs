//! Built-in stem and option templates, one family per difficulty tier.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{Candidate, CandidateRequest, GenError, Generator, MaterialBundle};
use crate::assessment::DifficultyTier;

/// Number of stem variants per tier; retries cycle through them.
pub const TEMPLATE_VARIANTS: u32 = 3;

/// The plain-text material a template needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateMaterial {
    pub chapter: String,
    pub concept: String,
    pub key: String,
    pub statements: Vec<String>,
    pub distractors: Vec<String>,
}

impl From<&MaterialBundle> for TemplateMaterial {
    fn from(b: &MaterialBundle) -> Self {
        Self {
            chapter: b.chapter_label.clone(),
            concept: b.concept.label.clone(),
            key: b.key().to_string(),
            statements: b.statements.clone(),
            distractors: b.distractors.clone(),
        }
    }
}

fn pick_statements(statements: &[String], variant: u32, n: usize) -> Vec<&str> {
    if statements.is_empty() {
        return Vec::new();
    }
    let start = variant as usize % statements.len();
    (0..n.min(statements.len())).map(|i| statements[(start + i) % statements.len()].as_str()).collect()
}

fn indefinite(noun: &str) -> &'static str {
    if noun.starts_with(['a', 'e', 'i', 'o', 'u', 'A', 'E', 'I', 'O', 'U']) {
        "an"
    } else {
        "a"
    }
}

fn basic_stem(m: &TemplateMaterial, variant: u32) -> String {
    let c = &m.concept;
    match variant % TEMPLATE_VARIANTS {
        0 => format!("Which of the following is {} {c}?", indefinite(c)),
        1 => format!("Which of the following is an example of {c}?"),
        _ => format!("Name the one option below that is a kind of {c}."),
    }
}

fn applied_stem(m: &TemplateMaterial, variant: u32) -> String {
    let (c, ch) = (&m.concept, &m.chapter);
    let given = pick_statements(&m.statements, variant, 1);
    match variant % TEMPLATE_VARIANTS {
        0 => {
            let known = given.first().map(|s| format!("Knowing that {s}, which")).unwrap_or_else(|| "Which".into());
            format!(
                "A student must use what the chapter {ch} teaches about {c}. {known} of the following should \
                 the student apply as a real case of {c}?"
            )
        }
        1 => {
            let known = given.first().map(|s| format!("Given that {s}, which")).unwrap_or_else(|| "Which".into());
            format!(
                "To solve a practical task from {ch}, you need an instance of {c}. {known} of the following \
                 would you use in this situation?"
            )
        }
        _ => {
            let known = given.first().map(|s| format!(" since {s},")).unwrap_or_default();
            format!(
                "Apply your knowledge of {c} from {ch}:{known} which of the following can be used as an \
                 instance of {c} in practice?"
            )
        }
    }
}

fn comprehensive_stem(m: &TemplateMaterial, variant: u32) -> String {
    let (c, ch) = (&m.concept, &m.chapter);
    let given = pick_statements(&m.statements, variant, 3);
    let evidence = if given.is_empty() { format!("the relations recorded for {c}") } else { given.join("; ") };
    match variant % TEMPLATE_VARIANTS {
        0 => format!(
            "Consider these statements from {ch}: {evidence}. Assess the relations carefully and justify your \
             choice: which of the following is best classified as an instance of {c}, given everything stated \
             above about {c}?"
        ),
        1 => format!(
            "Critique the following account of {ch}: {evidence}. Judge which of the following claims about {c} \
             is best supported, and justify why it fits {c} better than the alternatives given these relations."
        ),
        _ => format!(
            "Read the evidence from {ch}: {evidence}. Assess each option and justify which one is best \
             classified as an instance of {c}, weighing all of the stated relations and what they imply \
             about {c}."
        ),
    }
}

fn option_text(tier: DifficultyTier, label: &str, concept: &str) -> String {
    match tier {
        DifficultyTier::BasicRecall => label.to_string(),
        DifficultyTier::AppliedUnderstanding => format!("{label}, used in this situation"),
        DifficultyTier::ComprehensiveAnalysis => {
            format!("{label} is best classified as an instance of {concept} given the stated relations")
        }
    }
}

/// Builds a candidate: the key plus three distractors drawn from the front
/// of the pool, shuffled.
pub fn compose<R: Rng + ?Sized>(
    m: &TemplateMaterial,
    tier: DifficultyTier,
    variant: u32,
    rng: &mut R,
) -> Result<Candidate, GenError> {
    let mut pool: Vec<&String> = Vec::new();
    for d in &m.distractors {
        if d != &m.key && !pool.contains(&d) {
            pool.push(d);
        }
    }
    if pool.len() < 3 {
        return Err(GenError::GeneratorFailure(format!(
            "concept `{}` has {} distractor candidates, need 3",
            m.concept,
            pool.len()
        )));
    }
    let window = (3 + variant as usize).min(pool.len());
    let mut chosen: Vec<&String> = pool[..window].to_vec();
    chosen.shuffle(rng);
    chosen.truncate(3);

    let mut labels: Vec<&str> = chosen.iter().map(|s| s.as_str()).collect();
    labels.push(&m.key);
    labels.shuffle(rng);
    let answer_index = labels.iter().position(|l| *l == m.key).expect("key present");
    let stem = match tier {
        DifficultyTier::BasicRecall => basic_stem(m, variant),
        DifficultyTier::AppliedUnderstanding => applied_stem(m, variant),
        DifficultyTier::ComprehensiveAnalysis => comprehensive_stem(m, variant),
    };
    Ok(Candidate {
        stem,
        options: labels.iter().map(|l| option_text(tier, l, &m.concept)).collect(),
        answer_index,
    })
}

/// Deterministic generator over the built-in templates.
#[derive(Debug, Clone)]
pub struct TemplateGenerator {
    seed: u64,
}

impl TemplateGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn rng_for(&self, req: &CandidateRequest<'_>) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_be_bytes());
        h.update(req.bundle.chapter.as_str().as_bytes());
        h.update([0]);
        h.update(req.bundle.concept.node.as_str().as_bytes());
        h.update([0]);
        h.update(req.tier.as_str().as_bytes());
        h.update(req.attempt.to_be_bytes());
        h.update((req.slot as u64).to_be_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

impl Generator for TemplateGenerator {
    fn generate(&self, req: &CandidateRequest<'_>) -> Result<Candidate, GenError> {
        compose(&TemplateMaterial::from(req.bundle), req.tier, req.attempt, &mut self.rng_for(req))
    }

    fn variants(&self) -> u32 {
        TEMPLATE_VARIANTS
    }

    fn name(&self) -> String {
        "template".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn material() -> TemplateMaterial {
        TemplateMaterial {
            chapter: "forests".into(),
            concept: "tree".into(),
            key: "oak".into(),
            statements: vec!["oak provides shade".into()],
            distractors: vec!["granite".into(), "salmon".into(), "fern".into(), "basalt".into()],
        }
    }

    #[test]
    fn basic_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = compose(&material(), DifficultyTier::BasicRecall, 0, &mut rng).unwrap();
        assert_eq!(c.stem, "Which of the following is a tree?");
        assert_eq!(c.options[c.answer_index], "oak");
        assert!(c.options.iter().all(|o| ["oak", "granite", "salmon", "fern"].contains(&o.as_str())));
    }

    #[test]
    fn variants_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for tier in DifficultyTier::ALL {
            let stems: Vec<String> =
                (0..TEMPLATE_VARIANTS).map(|v| compose(&material(), tier, v, &mut rng).unwrap().stem).collect();
            assert_ne!(stems[0], stems[1]);
            assert_ne!(stems[1], stems[2]);
        }
    }

    #[test]
    fn too_few_distractors() {
        let mut m = material();
        m.distractors.truncate(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(compose(&m, DifficultyTier::BasicRecall, 0, &mut rng), Err(GenError::GeneratorFailure(_))));
    }
}
