//! Small text utilities shared by extraction, feature measurement and the
//! mock gateway.

use std::collections::HashSet;
use std::sync::OnceLock;

use unicode_normalization::UnicodeNormalization;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may", "me",
    "might", "more", "most", "must", "my", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "out", "over", "own", "same", "shall", "she", "should",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very",
    "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will",
    "with", "would", "you", "your", "yours",
];

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().copied().collect())
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

fn is_trim_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{00ab}' | '\u{00bb}'
                | '\u{2026}' | '\u{2013}' | '\u{2014}' | '\u{00bf}' | '\u{00a1}' | '\u{3002}'
                | '\u{ff0c}' | '\u{3001}'
        )
}

/// Canonical form of an entity label: NFC, lowercase, internal whitespace
/// collapsed to single spaces, leading/trailing punctuation removed.
///
/// Returns an empty string when nothing but whitespace and punctuation is left.
pub fn normalize_label(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    let lower = nfc.to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_whitespace() || is_trim_punct(c))
        .to_string()
}

/// Lowercased word tokens. Hyphens and apostrophes are kept inside words.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .map(|t| t.trim_matches(|c| c == '-' || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens with stopwords removed.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokens(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Whitespace-delimited words that contain at least one alphanumeric char.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}

/// Splits text into sentences after `.`, `!` or `?` followed by whitespace or
/// end of input. Terminal punctuation stays with its sentence.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = match iter.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_label("  Ecosystem "), "ecosystem");
        assert_eq!(normalize_label("\"Intentional   Pollution.\""), "intentional pollution");
        assert_eq!(normalize_label("Ch 1.2"), "ch 1.2");
        assert_eq!(normalize_label("!!!"), "");
        // NFC: decomposed e + combining acute equals precomposed
        assert_eq!(normalize_label("Caf\u{0065}\u{0301}"), normalize_label("Caf\u{00e9}"));
    }

    #[test]
    fn normalization_is_idempotent() {
        for s in ["  A  b. ", "“Quoted”", "x-y z", "ÉCOLE"] {
            let once = normalize_label(s);
            assert_eq!(normalize_label(&once), once);
        }
    }

    #[test]
    fn sentence_split_keeps_decimals() {
        let s = sentences("Section 1.2 covers trees. Oaks grow! Why? tail");
        assert_eq!(s, vec!["Section 1.2 covers trees.", "Oaks grow!", "Why?", "tail"]);
    }

    #[test]
    fn tokenizing() {
        assert_eq!(tokens("Define erosion."), vec!["define", "erosion"]);
        assert_eq!(content_tokens("The oak is a tree"), vec!["oak", "tree"]);
        assert_eq!(word_count("Define erosion."), 2);
        assert_eq!(word_count(" - a b "), 2);
    }
}
