//! Deterministic sentence-level triple extractor.

use std::collections::{BTreeMap, BTreeSet};

use super::{ExtractionResult, Extractor, IngestError, Triple};
use crate::text::{normalize_label, sentences};

const DEFAULT_VERBS: &[&str] = &[
    "absorb", "activate", "affect", "attract", "bind", "break", "build", "carry", "cause", "change", "combine",
    "connect", "consume", "contain", "control", "convert", "cool", "cover", "create", "damage", "decrease",
    "depend", "destroy", "determine", "digest", "dissolve", "drive", "eat", "emit", "encode", "enter", "erode",
    "feed", "filter", "flow", "form", "generate", "grow", "harm", "heat", "help", "hold", "improve", "include",
    "increase", "influence", "inhibit", "leave", "limit", "lower", "make", "move", "need", "orbit", "pollute",
    "power", "precede", "prevent", "produce", "protect", "provide", "raise", "reduce", "reflect", "regulate",
    "release", "remove", "repel", "replace", "require", "shelter", "slow", "store", "supply", "support",
    "surround", "threaten", "transmit", "transport", "trap", "use",
];

const IRREGULAR: &[(&str, &str)] = &[
    ("ate", "eat"), ("bound", "bind"), ("broke", "break"), ("built", "build"), ("drove", "drive"),
    ("fed", "feed"), ("grew", "grow"), ("held", "hold"), ("left", "leave"), ("made", "make"),
];

const AUXILIARIES: &[&str] = &[
    "will", "can", "may", "must", "should", "would", "could", "might", "does", "do", "did", "is", "are", "was",
    "were", "has", "have", "had", "not", "often", "also", "usually",
];

const PREPOSITIONS: &[&str] = &["into", "onto", "from", "with", "by", "on", "to", "through", "of", "across"];

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "these", "those", "that", "some", "many", "most", "all", "each", "every", "its",
    "their",
];

const TAIL_STOPS: &[&str] = &[
    "and", "or", "but", "because", "which", "that", "while", "when", "where", "although", "if", "so", "since",
];

// phrases made only of these carry no entity
const PRONOUNS: &[&str] = &[
    "it", "they", "them", "this", "these", "those", "he", "she", "we", "you", "i", "which", "that", "there", "who",
    "what", "one", "ones",
];

fn is_entity_phrase(p: &[Word]) -> bool {
    !p.is_empty() && p.len() <= MAX_PHRASE_WORDS && !p.iter().all(|w| PRONOUNS.contains(&w.text.as_str()))
}

const CLASS_NOUNS: &[&str] = &["kind", "type", "example", "form", "sort"];

const MAX_PHRASE_WORDS: usize = 6;

#[derive(Debug, Clone)]
pub struct RuleExtractor {
    verbs: BTreeSet<String>,
    hypernyms: BTreeMap<String, Vec<String>>,
}

impl Default for RuleExtractor {
    fn default() -> Self {
        Self {
            verbs: DEFAULT_VERBS.iter().map(|v| v.to_string()).collect(),
            hypernyms: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Word {
    text: String,
    // a comma, semicolon or colon followed this word
    breaks_after: bool,
}

fn words(sentence: &str) -> Vec<Word> {
    sentence
        .split_whitespace()
        .filter_map(|raw| {
            let breaks_after = raw.ends_with([',', ';', ':']);
            let text = raw
                .trim_matches(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
                .to_lowercase();
            (!text.is_empty()).then_some(Word { text, breaks_after })
        })
        .collect()
}

fn strip_determiners(phrase: &[Word]) -> &[Word] {
    let mut p = phrase;
    while p.len() > 1 && DETERMINERS.contains(&p[0].text.as_str()) {
        p = &p[1..];
    }
    p
}

fn join(phrase: &[Word]) -> String {
    phrase.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ")
}

impl RuleExtractor {
    /// Adds an entity → concepts mapping; labels are normalized.
    pub fn with_hypernyms(mut self, lexicon: BTreeMap<String, Vec<String>>) -> Self {
        for (entity, concepts) in lexicon {
            let concepts: Vec<String> = concepts.iter().map(|c| normalize_label(c)).filter(|c| !c.is_empty()).collect();
            if !concepts.is_empty() {
                self.hypernyms.entry(normalize_label(&entity)).or_default().extend(concepts);
            }
        }
        self
    }

    pub fn with_verbs<I: IntoIterator<Item = S>, S: Into<String>>(mut self, verbs: I) -> Self {
        self.verbs.extend(verbs.into_iter().map(|v| v.into().to_lowercase()));
        self
    }

    fn verb_base(&self, word: &str) -> Option<String> {
        if self.verbs.contains(word) {
            return Some(word.to_string());
        }
        if let Some((_, base)) = IRREGULAR.iter().find(|(form, _)| *form == word) {
            return self.verbs.contains(*base).then(|| base.to_string());
        }
        let candidates = [
            word.strip_suffix("ies").map(|s| format!("{s}y")),
            word.strip_suffix("ied").map(|s| format!("{s}y")),
            word.strip_suffix("es").map(str::to_string),
            word.strip_suffix('s').map(str::to_string),
            word.strip_suffix("ed").map(str::to_string),
            word.strip_suffix('d').map(str::to_string),
            word.strip_suffix("ing").map(str::to_string),
            word.strip_suffix("ing").map(|s| format!("{s}e")),
            // doubled final consonant: trapped, trapping
            word.strip_suffix("ed").or_else(|| word.strip_suffix("ing")).and_then(|s| {
                let mut chars = s.chars().rev();
                match (chars.next(), chars.next()) {
                    (Some(a), Some(b)) if a == b => Some(s[..s.len() - a.len_utf8()].to_string()),
                    _ => None,
                }
            }),
        ];
        candidates.into_iter().flatten().find(|c| c.len() > 1 && self.verbs.contains(c))
    }

    fn copula(&self, ws: &[Word]) -> Option<(Triple, String)> {
        let pos = ws.iter().position(|w| w.text == "is")?;
        if pos == 0 || ws[..pos].iter().any(|w| w.breaks_after) {
            return None;
        }
        let mut i = pos + 1;
        if !matches!(ws.get(i).map(|w| w.text.as_str()), Some("a" | "an")) {
            return None;
        }
        i += 1;
        if ws.get(i + 1).is_some_and(|w| w.text == "of") && ws.get(i).is_some_and(|w| CLASS_NOUNS.contains(&w.text.as_str())) {
            i += 2;
        }
        let head = strip_determiners(&ws[..pos]);
        let tail = self.tail_phrase(&ws[i.min(ws.len())..])?;
        if !is_entity_phrase(head) {
            return None;
        }
        let head = join(head);
        let concept = tail.clone();
        Some((Triple::new(head, "is a", tail), concept))
    }

    fn tail_phrase(&self, rest: &[Word]) -> Option<String> {
        let mut end = 0;
        for w in rest {
            if TAIL_STOPS.contains(&w.text.as_str()) {
                break;
            }
            end += 1;
            if w.breaks_after {
                break;
            }
        }
        let tail = strip_determiners(&rest[..end]);
        if !is_entity_phrase(tail) {
            return None;
        }
        Some(join(tail))
    }

    fn svo(&self, ws: &[Word]) -> Option<Triple> {
        let verb_pos = (1..ws.len()).find(|&i| self.verb_base(&ws[i].text).is_some())?;
        let mut start = verb_pos;
        while start > 1 && AUXILIARIES.contains(&ws[start - 1].text.as_str()) {
            start -= 1;
        }
        let mut head = &ws[..start];
        if let Some(cut) = head.iter().rposition(|w| w.breaks_after) {
            head = &head[cut + 1..];
        }
        let head = strip_determiners(head);
        if !is_entity_phrase(head) {
            return None;
        }
        let mut rel_end = verb_pos + 1;
        if ws.get(rel_end).is_some_and(|w| PREPOSITIONS.contains(&w.text.as_str())) && !ws[verb_pos].breaks_after {
            rel_end += 1;
        }
        let relation = join(&ws[start..rel_end]);
        if ws[rel_end - 1].breaks_after {
            return None;
        }
        let tail = self.tail_phrase(&ws[rel_end..])?;
        Some(Triple::new(join(head), relation, tail))
    }

    fn extract_sentence(&self, sentence: &str, out: &mut ExtractionResult) {
        let ws = words(sentence);
        if ws.len() < 3 {
            return;
        }
        if let Some((triple, concept)) = self.copula(&ws) {
            out.concepts.entry(triple.head.clone()).or_default().push(concept);
            out.triples.push(triple);
            return;
        }
        if let Some(triple) = self.svo(&ws) {
            out.triples.push(triple);
        }
    }
}

/// Drops title-like lines: short, no terminal punctuation, and followed by
/// a new sentence, another title, or nothing.
fn body_lines(text: &str) -> String {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let mut title = vec![false; lines.len()];
    for i in (0..lines.len()).rev() {
        let line = lines[i];
        let next_ok = match lines.get(i + 1) {
            None => true,
            Some(n) => n.is_empty() || title[i + 1] || n.chars().next().is_some_and(char::is_uppercase),
        };
        title[i] = !line.is_empty()
            && line.split_whitespace().count() <= 8
            && !line.contains(['.', '!', '?'])
            && !line.ends_with([',', ';', ':'])
            && next_ok;
    }
    lines.iter().zip(&title).filter(|(_, t)| !**t).map(|(l, _)| *l).collect::<Vec<_>>().join("\n")
}

impl Extractor for RuleExtractor {
    fn extract(&self, text: &str) -> Result<ExtractionResult, IngestError> {
        let mut out = ExtractionResult::default();
        let body = body_lines(text);
        for s in sentences(&body) {
            self.extract_sentence(s, &mut out);
        }
        let mut seen = BTreeSet::new();
        out.triples.retain(|t| seen.insert(t.clone()));
        let entities: BTreeSet<String> = out.triples.iter().flat_map(|t| [t.head.clone(), t.tail.clone()]).collect();
        for entity in entities {
            if let Some(concepts) = self.hypernyms.get(&entity) {
                out.concepts.entry(entity).or_default().extend(concepts.iter().cloned());
            }
        }
        for concepts in out.concepts.values_mut() {
            concepts.sort();
            concepts.dedup();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> ExtractionResult {
        RuleExtractor::default().extract(text).unwrap()
    }

    #[test]
    fn simple_svo() {
        let r = run("Intentional pollution harms the ecosystem.");
        assert_eq!(r.triples, vec![Triple::new("intentional pollution", "harms", "ecosystem")]);
        assert!(r.concepts.is_empty());
    }

    #[test]
    fn auxiliaries_join_relation() {
        let r = run("Intentional pollution will harm the ecosystem.");
        assert_eq!(r.triples, vec![Triple::new("intentional pollution", "will harm", "ecosystem")]);
    }

    #[test]
    fn single_letter_entities() {
        let r = run("A harms B.");
        assert_eq!(r.triples, vec![Triple::new("a", "harms", "b")]);
    }

    #[test]
    fn tail_stops_at_conjunction_and_prepositions_fold() {
        let r = run("Rivers flow into the sea and carry sediment. Wind erodes soft rock, shaping cliffs.");
        assert_eq!(
            r.triples,
            vec![Triple::new("rivers", "flow into", "sea"), Triple::new("wind", "erodes", "soft rock")]
        );
    }

    #[test]
    fn copula_yields_concept() {
        let r = run("The oak is a kind of tree. Oak provides shade.");
        assert_eq!(r.triples[0], Triple::new("oak", "is a", "tree"));
        assert_eq!(r.concepts["oak"], vec!["tree".to_string()]);
        r.validate().unwrap();
    }

    #[test]
    fn hypernym_lexicon_applies() {
        let lex = BTreeMap::from([("Acid Rain".to_string(), vec!["Pollution".to_string()])]);
        let r = RuleExtractor::default().with_hypernyms(lex).extract("Acid rain damages forests.").unwrap();
        assert_eq!(r.concepts["acid rain"], vec!["pollution".to_string()]);
    }

    #[test]
    fn headings_are_not_sentence_starts() {
        let r = run("Forests\ntree\nThe oak is a kind of tree. Wind erodes\nsoft rock.");
        assert_eq!(r.triples, vec![Triple::new("oak", "is a", "tree"), Triple::new("wind", "erodes", "soft rock")]);
    }

    #[test]
    fn no_match() {
        let r = run("Hello there. What a day. It harms them.");
        assert!(r.triples.is_empty() && r.concepts.is_empty());
    }

    #[test]
    fn inflections() {
        let x = RuleExtractor::default();
        for (w, base) in [("carries", "carry"), ("trapped", "trap"), ("produced", "produce"), ("built", "build"), ("using", "use")] {
            assert_eq!(x.verb_base(w).as_deref(), Some(base), "{w}");
        }
        assert_eq!(x.verb_base("tree"), None);
    }
}
