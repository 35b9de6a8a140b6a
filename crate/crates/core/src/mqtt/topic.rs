//! Topic names, wildcard filters, and the telemetry topic scheme.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TopicError {
    #[error("topic must be non-empty")]
    Empty,
    #[error("topic exceeds 65535 bytes")]
    TooLong,
    #[error("'#' is only allowed as the final segment")]
    MultiLevelNotLast,
    #[error("wildcard must occupy a whole segment")]
    PartialWildcard,
    #[error("publish topics may not contain wildcards")]
    WildcardInTopicName,
    #[error("topic contains U+0000")]
    NulCharacter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    SingleLevel,
    MultiLevel,
}

/// A validated subscription filter with `+`/`#` wildcards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicFilter {
    segments: Vec<Segment>,
    raw: String,
}

impl TopicFilter {
    pub fn parse(filter: &str) -> Result<Self, TopicError> {
        if filter.is_empty() {
            return Err(TopicError::Empty);
        }
        if filter.len() > u16::MAX as usize {
            return Err(TopicError::TooLong);
        }
        if filter.contains('\u{0}') {
            return Err(TopicError::NulCharacter);
        }
        let parts: Vec<&str> = filter.split('/').collect();
        let mut segments = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let segment = match *part {
                "+" => Segment::SingleLevel,
                "#" => {
                    if i != parts.len() - 1 {
                        return Err(TopicError::MultiLevelNotLast);
                    }
                    Segment::MultiLevel
                }
                literal => {
                    if literal.contains('+') || literal.contains('#') {
                        return Err(TopicError::PartialWildcard);
                    }
                    Segment::Literal(literal.to_string())
                }
            };
            segments.push(segment);
        }
        Ok(Self {
            segments,
            raw: filter.to_string(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    /// Segment-wise match: `+` matches exactly one level, a trailing `#`
    /// matches the remainder including zero levels. Wildcard-led filters do
    /// not match `$`-prefixed topics.
    pub fn matches(&self, topic: &str) -> bool {
        if topic.starts_with('$')
            && matches!(
                self.segments.first(),
                Some(Segment::SingleLevel | Segment::MultiLevel)
            )
        {
            return false;
        }
        let mut topic_segments = topic.split('/');
        for (i, segment) in self.segments.iter().enumerate() {
            match segment {
                Segment::MultiLevel => {
                    debug_assert_eq!(i, self.segments.len() - 1);
                    return true;
                }
                Segment::SingleLevel => {
                    if topic_segments.next().is_none() {
                        // '#' matches the parent level; '+' does not
                        return false;
                    }
                }
                Segment::Literal(expected) => match topic_segments.next() {
                    Some(got) if got == expected => {}
                    _ => return false,
                },
            }
        }
        topic_segments.next().is_none()
    }
}

/// Check a PUBLISH topic name: non-empty, no wildcards, no NUL.
pub fn validate_publish_topic(topic: &str) -> Result<(), TopicError> {
    if topic.is_empty() {
        return Err(TopicError::Empty);
    }
    if topic.len() > u16::MAX as usize {
        return Err(TopicError::TooLong);
    }
    if topic.contains('+') || topic.contains('#') {
        return Err(TopicError::WildcardInTopicName);
    }
    if topic.contains('\u{0}') {
        return Err(TopicError::NulCharacter);
    }
    Ok(())
}

/// Convenience wrapper over [`TopicFilter::matches`] for one-shot checks.
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    TopicFilter::parse(filter)
        .map(|f| f.matches(topic))
        .unwrap_or(false)
}

// Telemetry topic scheme: store/<id>/sensor/<channel>, store/<id>/relay/<name>,
// store/<id>/alarm.

pub fn sensor_topic(store_id: &str, channel: &str) -> String {
    format!("store/{store_id}/sensor/{channel}")
}

pub fn relay_topic(store_id: &str, relay: &str) -> String {
    format!("store/{store_id}/relay/{relay}")
}

pub fn alarm_topic(store_id: &str) -> String {
    format!("store/{store_id}/alarm")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_wildcard() {
        assert!(topic_matches("store/+/temp", "store/a/temp"));
        assert!(!topic_matches("store/+/temp", "store/a/b/temp"));
        assert!(!topic_matches("store/+", "store/a/b"));
        assert!(topic_matches("store/+", "store/a"));
        assert!(!topic_matches("store/+", "store"));
    }

    #[test]
    fn multi_level_wildcard_matches_parent() {
        assert!(topic_matches("store/#", "store"));
        assert!(topic_matches("store/#", "store/a/b/c"));
        assert!(topic_matches("#", "anything/at/all"));
        assert!(!topic_matches("store/#", "warehouse/a"));
    }

    #[test]
    fn literal_matching_is_exact() {
        assert!(topic_matches("store/1/sensor/temp", "store/1/sensor/temp"));
        assert!(!topic_matches("store/1/sensor/temp", "store/1/sensor"));
        assert!(!topic_matches("store/1/sensor", "store/1/sensor/temp"));
        // empty segments are real levels
        assert!(topic_matches("a//b", "a//b"));
        assert!(!topic_matches("a/b", "a//b"));
    }

    #[test]
    fn dollar_topics_hidden_from_wildcards() {
        assert!(!topic_matches("#", "$SYS/stats"));
        assert!(!topic_matches("+/stats", "$SYS/stats"));
        assert!(topic_matches("$SYS/#", "$SYS/stats"));
    }

    #[test]
    fn filter_validation() {
        assert!(TopicFilter::parse("a/#/b").is_err());
        assert!(TopicFilter::parse("a/b+").is_err());
        assert!(TopicFilter::parse("a/#b").is_err());
        assert!(TopicFilter::parse("").is_err());
        assert!(TopicFilter::parse("#").is_ok());
        assert!(TopicFilter::parse("+/+/#").is_ok());
    }

    #[test]
    fn publish_topic_validation() {
        assert!(validate_publish_topic("store/1/sensor/temp").is_ok());
        assert!(validate_publish_topic("store/+/x").is_err());
        assert!(validate_publish_topic("store/#").is_err());
        assert!(validate_publish_topic("").is_err());
    }

    #[test]
    fn scheme_topics() {
        assert_eq!(sensor_topic("s1", "temp"), "store/s1/sensor/temp");
        assert_eq!(relay_topic("s1", "uvc"), "store/s1/relay/uvc");
        assert_eq!(alarm_topic("s1"), "store/s1/alarm");
        assert!(topic_matches("store/s1/#", &sensor_topic("s1", "gas")));
    }
}
