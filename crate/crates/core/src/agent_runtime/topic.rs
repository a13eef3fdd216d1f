use std::fmt;

use super::BusError;

fn valid_segment(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

/// Checks a publication topic: slash-separated `[a-z0-9_-]+` segments.
pub fn validate_topic(topic: &str) -> Result<(), BusError> {
    if topic.split('/').any(|s| s == "*") {
        return Err(BusError::WildcardPublish(topic.to_string()));
    }
    if topic.split('/').all(valid_segment) {
        Ok(())
    } else {
        Err(BusError::BadTopic(topic.to_string()))
    }
}

/// A subscription pattern. `*` stands for exactly one segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopicPattern {
    raw: String,
    segments: Vec<Option<String>>,
}

impl TopicPattern {
    pub fn parse(pattern: &str) -> Result<Self, BusError> {
        let mut segments = Vec::new();
        for s in pattern.split('/') {
            if s == "*" {
                segments.push(None);
            } else if valid_segment(s) {
                segments.push(Some(s.to_string()));
            } else {
                return Err(BusError::BadPattern(pattern.to_string()));
            }
        }
        Ok(Self { raw: pattern.to_string(), segments })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn matches(&self, topic: &str) -> bool {
        let mut n = 0;
        for (i, seg) in topic.split('/').enumerate() {
            match self.segments.get(i) {
                None => return false,
                Some(Some(p)) if p != seg => return false,
                _ => {}
            }
            n += 1;
        }
        n == self.segments.len()
    }
}

impl fmt::Display for TopicPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcard_matches_one_segment() {
        let p = TopicPattern::parse("exam/*/request").unwrap();
        assert!(p.matches("exam/bio/request"));
        assert!(!p.matches("exam/bio/v2/request"));
        assert!(!p.matches("exam/request"));
        assert!(TopicPattern::parse("kg/updates").unwrap().matches("kg/updates"));
        assert!(!TopicPattern::parse("kg").unwrap().matches("kg/updates"));
    }

    #[test]
    fn validation() {
        assert!(validate_topic("kg/updates").is_ok());
        assert!(matches!(validate_topic("a/*"), Err(BusError::WildcardPublish(_))));
        assert!(matches!(validate_topic("A/b"), Err(BusError::BadTopic(_))));
        assert!(matches!(validate_topic("a//b"), Err(BusError::BadTopic(_))));
        assert!(matches!(validate_topic(""), Err(BusError::BadTopic(_))));
        assert!(matches!(TopicPattern::parse("a/b*"), Err(BusError::BadPattern(_))));
    }
}
