use serde::{Deserialize, Serialize};

use super::TaggerError;
use crate::corpus::Tag;
use crate::lexicon::AdasCategory;

/// Half-open token range `[start, end)` and its space-joined text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Cause and effect spans extracted from one complaint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseEffectInstance {
    pub complaint_id: String,
    pub adas_category: Option<AdasCategory>,
    pub cause_spans: Vec<Span>,
    pub effect_spans: Vec<Span>,
    pub tags: Vec<Tag>,
}

impl CauseEffectInstance {
    pub fn from_tags(
        complaint_id: impl Into<String>,
        adas_category: Option<AdasCategory>,
        tokens: &[String],
        tags: Vec<Tag>,
    ) -> Result<Self, TaggerError> {
        let (cause_spans, effect_spans) = decode_spans(tokens, &tags)?;
        Ok(Self {
            complaint_id: complaint_id.into(),
            adas_category,
            cause_spans,
            effect_spans,
            tags,
        })
    }
}

/// Maximal runs of `C` become cause spans and runs of `E` effect spans.
pub fn decode_spans(tokens: &[String], tags: &[Tag]) -> Result<(Vec<Span>, Vec<Span>), TaggerError> {
    if tokens.len() != tags.len() {
        return Err(TaggerError::LengthMismatch {
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    let mut causes = Vec::new();
    let mut effects = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        let tag = tags[i];
        let start = i;
        while i < tags.len() && tags[i] == tag {
            i += 1;
        }
        let span = || Span {
            start,
            end: i,
            text: tokens[start..i].join(" "),
        };
        match tag {
            Tag::C => causes.push(span()),
            Tag::E => effects.push(span()),
            Tag::O => {}
        }
    }
    Ok((causes, effects))
}

/// Inverse of [`decode_spans`] for a sequence of `len` tokens.
pub fn spans_to_tags(len: usize, causes: &[Span], effects: &[Span]) -> Vec<Tag> {
    let mut tags = vec![Tag::O; len];
    for (spans, tag) in [(causes, Tag::C), (effects, Tag::E)] {
        for s in spans {
            tags[s.start..s.end].fill(tag);
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn ccoee() {
        use Tag::*;
        let (c, e) = decode_spans(&toks(5), &[C, C, O, E, E]).unwrap();
        assert_eq!(c, vec![Span { start: 0, end: 2, text: "t0 t1".into() }]);
        assert_eq!(e, vec![Span { start: 3, end: 5, text: "t3 t4".into() }]);
    }

    #[test]
    fn all_o_and_adjacent_runs() {
        use Tag::*;
        let (c, e) = decode_spans(&toks(3), &[O, O, O]).unwrap();
        assert!(c.is_empty() && e.is_empty());
        // C directly followed by E still splits into two spans
        let (c, e) = decode_spans(&toks(3), &[C, E, E]).unwrap();
        assert_eq!((c.len(), e.len()), (1, 1));
        assert_eq!(spans_to_tags(3, &c, &e), [C, E, E]);
    }

    #[test]
    fn length_mismatch() {
        assert!(decode_spans(&toks(2), &[Tag::C]).is_err());
    }
}
