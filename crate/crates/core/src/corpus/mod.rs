//! C/E/O annotated sentences and the two-column annotation file format.
//!
//! ```text
//! # id: 17
//! # source: manual
//! the<TAB>C
//! radar<TAB>C
//! failed<TAB>C
//! ,<TAB>O
//! ...
//! <blank line>
//! ```

pub mod convert;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    C,
    E,
    O,
}

impl Tag {
    /// Fixed label order used by models and serialized files.
    pub const ALL: [Tag; 3] = [Tag::C, Tag::E, Tag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Tag {
        Tag::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::C => "C",
            Tag::E => "E",
            Tag::O => "O",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "C" => Ok(Tag::C),
            "E" => Ok(Tag::E),
            "O" => Ok(Tag::O),
            other => Err(other.to_owned()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Manual,
    Dmv,
    Semeval,
    Synthetic,
    Predicted,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Manual => "manual",
            Source::Dmv => "dmv",
            Source::Semeval => "semeval",
            Source::Synthetic => "synthetic",
            Source::Predicted => "predicted",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manual" => Ok(Source::Manual),
            "dmv" => Ok(Source::Dmv),
            "semeval" => Ok(Source::Semeval),
            "synthetic" => Ok(Source::Synthetic),
            "predicted" => Ok(Source::Predicted),
            other => Err(other.to_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub source: Source,
}

impl AnnotatedSentence {
    pub fn new(
        sentence_id: impl Into<String>,
        tokens: Vec<String>,
        tags: Vec<Tag>,
        source: Source,
    ) -> Result<Self, CorpusError> {
        let sentence_id = sentence_id.into();
        if tokens.is_empty() || tokens.len() != tags.len() {
            return Err(CorpusError::Shape {
                sentence_id,
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        Ok(Self {
            sentence_id,
            tokens,
            tags,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("unknown tag {tag:?} at line {line}")]
    UnknownTag { line: usize, tag: String },
    #[error("expected token and tag columns at line {line}")]
    ColumnMismatch { line: usize },
    #[error("unknown source {name:?} at line {line}")]
    UnknownSource { line: usize, name: String },
    #[error("sentence {sentence_id:?} has {tokens} tokens and {tags} tags")]
    Shape {
        sentence_id: String,
        tokens: usize,
        tags: usize,
    },
    #[error("token {0:?} cannot be written: contains whitespace")]
    UnwritableToken(String),
    #[error("duplicate sentence id {id:?} in source {corpus_source}")]
    DuplicateId { corpus_source: Source, id: String },
    #[error("sentence {0:?} missing from one annotator")]
    MissingSentence(String),
    #[error("sentence {0:?} has different tokens across annotators")]
    TokenMismatch(String),
    #[error("agreement needs at least {0} annotators")]
    TooFewRaters(usize),
    #[error("no tokens to compare")]
    NoTokens,
    #[error("line {line}: {message}")]
    Foreign { line: usize, message: String },
}

/// Which whitespace-separated columns hold the token and the tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnFormat {
    pub token_column: usize,
    pub tag_column: usize,
    pub separator: char,
    /// Source recorded when a sentence has no `# source:` line.
    pub default_source: Source,
}

impl Default for ColumnFormat {
    fn default() -> Self {
        Self {
            token_column: 0,
            tag_column: 1,
            separator: '\t',
            default_source: Source::Manual,
        }
    }
}

#[derive(Default)]
struct Pending {
    id: Option<String>,
    source: Option<Source>,
    tokens: Vec<String>,
    tags: Vec<Tag>,
}

/// Parses the canonical annotation format. Sentences without an `# id:`
/// line get their zero-based ordinal in the file as id.
pub fn load_annotations(text: &str, format: &ColumnFormat) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut out = Vec::new();
    let mut pending = Pending::default();
    let width = format.token_column.max(format.tag_column) + 1;

    let flush = |pending: &mut Pending, out: &mut Vec<AnnotatedSentence>| {
        let p = std::mem::take(pending);
        if p.tokens.is_empty() {
            return;
        }
        out.push(AnnotatedSentence {
            sentence_id: p.id.unwrap_or_else(|| out.len().to_string()),
            tokens: p.tokens,
            tags: p.tags,
            source: p.source.unwrap_or(format.default_source),
        });
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut pending, &mut out);
            continue;
        }
        if let Some(comment) = line.strip_prefix("# ") {
            // comments only bind to the sentence that follows
            if !pending.tokens.is_empty() {
                flush(&mut pending, &mut out);
            }
            if let Some(id) = comment.strip_prefix("id:") {
                pending.id = Some(id.trim().to_owned());
            } else if let Some(name) = comment.strip_prefix("source:") {
                let name = name.trim();
                pending.source = Some(name.parse().map_err(|name| CorpusError::UnknownSource {
                    line: line_no,
                    name,
                })?);
            }
            continue;
        }
        let cols: Vec<&str> = line.split(format.separator).collect();
        if cols.len() != width {
            return Err(CorpusError::ColumnMismatch { line: line_no });
        }
        let tag_text = cols[format.tag_column].trim();
        let tag = tag_text.parse().map_err(|tag| CorpusError::UnknownTag { line: line_no, tag })?;
        let token = cols[format.token_column].trim();
        if token.is_empty() {
            return Err(CorpusError::ColumnMismatch { line: line_no });
        }
        pending.tokens.push(token.to_owned());
        pending.tags.push(tag);
    }
    flush(&mut pending, &mut out);
    Ok(out)
}

/// Writes sentences in the canonical format, always emitting id and source.
pub fn write_annotations(sentences: &[AnnotatedSentence]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for s in sentences {
        if s.tokens.len() != s.tags.len() || s.tokens.is_empty() {
            return Err(CorpusError::Shape {
                sentence_id: s.sentence_id.clone(),
                tokens: s.tokens.len(),
                tags: s.tags.len(),
            });
        }
        out.push_str("# id: ");
        out.push_str(&s.sentence_id);
        out.push_str("\n# source: ");
        out.push_str(s.source.as_str());
        out.push('\n');
        for (token, tag) in s.tokens.iter().zip(&s.tags) {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(CorpusError::UnwritableToken(token.clone()));
            }
            out.push_str(token);
            out.push('\t');
            out.push_str(tag.as_str());
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

/// Concatenates corpora, prefixing each sentence id with its source so ids
/// stay unique across sources. Ids already carrying the prefix are kept.
pub fn merge_corpora(corpora: Vec<Vec<AnnotatedSentence>>) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut seen: HashSet<(Source, String)> = HashSet::new();
    let mut out = Vec::new();
    for corpus in corpora {
        for mut s in corpus {
            let prefix = format!("{}:", s.source);
            if !s.sentence_id.starts_with(&prefix) {
                s.sentence_id = format!("{prefix}{}", s.sentence_id);
            }
            if !seen.insert((s.source, s.sentence_id.clone())) {
                return Err(CorpusError::DuplicateId {
                    corpus_source: s.source,
                    id: s.sentence_id,
                });
            }
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagDistribution {
    pub count_c: usize,
    pub count_e: usize,
    pub count_o: usize,
    pub sentence_count: usize,
}

impl TagDistribution {
    pub fn tokens(&self) -> usize {
        self.count_c + self.count_e + self.count_o
    }
}

impl Add for TagDistribution {
    type Output = TagDistribution;

    fn add(self, rhs: Self) -> Self {
        TagDistribution {
            count_c: self.count_c + rhs.count_c,
            count_e: self.count_e + rhs.count_e,
            count_o: self.count_o + rhs.count_o,
            sentence_count: self.sentence_count + rhs.sentence_count,
        }
    }
}

pub fn tag_distribution(corpus: &[AnnotatedSentence]) -> TagDistribution {
    let mut d = TagDistribution {
        sentence_count: corpus.len(),
        ..TagDistribution::default()
    };
    for tag in corpus.iter().flat_map(|s| &s.tags) {
        match tag {
            Tag::C => d.count_c += 1,
            Tag::E => d.count_e += 1,
            Tag::O => d.count_o += 1,
        }
    }
    d
}

/// Token-level percent agreement between two annotators of the same sentences.
pub fn inter_rater_agreement(a: &[AnnotatedSentence], b: &[AnnotatedSentence]) -> Result<f64, CorpusError> {
    let (agree, total) = agreement_counts(a, b)?;
    Ok(agree as f64 / total as f64)
}

fn agreement_counts(a: &[AnnotatedSentence], b: &[AnnotatedSentence]) -> Result<(usize, usize), CorpusError> {
    let index: HashMap<&str, &AnnotatedSentence> = b.iter().map(|s| (s.sentence_id.as_str(), s)).collect();
    if index.len() != a.len() {
        let a_ids: HashSet<&str> = a.iter().map(|s| s.sentence_id.as_str()).collect();
        let missing = b
            .iter()
            .map(|s| s.sentence_id.as_str())
            .find(|id| !a_ids.contains(id))
            .unwrap_or_default();
        return Err(CorpusError::MissingSentence(missing.to_owned()));
    }
    let mut agree = 0;
    let mut total = 0;
    for sa in a {
        let sb = index
            .get(sa.sentence_id.as_str())
            .ok_or_else(|| CorpusError::MissingSentence(sa.sentence_id.clone()))?;
        if sa.tokens != sb.tokens {
            return Err(CorpusError::TokenMismatch(sa.sentence_id.clone()));
        }
        agree += sa.tags.iter().zip(&sb.tags).filter(|(x, y)| x == y).count();
        total += sa.tags.len();
    }
    if total == 0 {
        return Err(CorpusError::NoTokens);
    }
    Ok((agree, total))
}

/// Mean pairwise agreement over all annotator pairs.
pub fn mean_pairwise_agreement(raters: &[Vec<AnnotatedSentence>]) -> Result<f64, CorpusError> {
    if raters.len() < 2 {
        return Err(CorpusError::TooFewRaters(2));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..raters.len() {
        for j in i + 1..raters.len() {
            sum += inter_rater_agreement(&raters[i], &raters[j])?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(id: &str, words: &str, tags: &str, source: Source) -> AnnotatedSentence {
        AnnotatedSentence::new(
            id,
            words.split(' ').map(String::from).collect(),
            tags.chars().map(|c| c.to_string().parse().unwrap()).collect(),
            source,
        )
        .unwrap()
    }

    #[test]
    fn loads_two_sentences() {
        let text = "# id: a\n# source: dmv\nradar\tC\nfailed\tC\ncrash\tE\n\nok\tO\n";
        let corpus = load_annotations(text, &ColumnFormat::default()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].sentence_id, "a");
        assert_eq!(corpus[0].source, Source::Dmv);
        assert_eq!(corpus[0].tags, [Tag::C, Tag::C, Tag::E]);
        assert_eq!(corpus[1].sentence_id, "1");
        assert_eq!(corpus[1].source, Source::Manual);
    }

    #[test]
    fn bio_tag_rejected_with_line() {
        let err = load_annotations("radar\tC\nfailed\tB-C\n", &ColumnFormat::default()).unwrap_err();
        assert_eq!(err, CorpusError::UnknownTag { line: 2, tag: "B-C".into() });
        assert_eq!(err.to_string(), "unknown tag \"B-C\" at line 2");
    }

    #[test]
    fn column_mismatch() {
        let err = load_annotations("radar\n", &ColumnFormat::default()).unwrap_err();
        assert_eq!(err, CorpusError::ColumnMismatch { line: 1 });
        let err = load_annotations("radar\tC\tX\n", &ColumnFormat::default()).unwrap_err();
        assert_eq!(err, CorpusError::ColumnMismatch { line: 1 });
    }

    #[test]
    fn alternate_columns() {
        let format = ColumnFormat {
            token_column: 1,
            tag_column: 2,
            separator: ' ',
            default_source: Source::Semeval,
        };
        let corpus = load_annotations("1 brake C\n2 failed E\n", &format).unwrap();
        assert_eq!(corpus[0].tokens, ["brake", "failed"]);
        assert_eq!(corpus[0].source, Source::Semeval);
    }

    #[test]
    fn hash_token_is_not_a_comment() {
        let corpus = load_annotations("#\tO\nx\tC\n", &ColumnFormat::default()).unwrap();
        assert_eq!(corpus[0].tokens, ["#", "x"]);
    }

    #[test]
    fn writer_rejects_whitespace_tokens() {
        let mut s = sentence("1", "a b", "CO", Source::Manual);
        s.tokens[0] = "a b".into();
        assert!(matches!(write_annotations(&[s]), Err(CorpusError::UnwritableToken(_))));
    }

    #[test]
    fn merge_namespaces_ids() {
        let a = vec![sentence("1", "x", "C", Source::Manual), sentence("2", "y", "E", Source::Manual)];
        let b = vec![
            sentence("1", "x", "O", Source::Dmv),
            sentence("2", "x", "O", Source::Dmv),
            sentence("3", "x", "O", Source::Dmv),
        ];
        let merged = merge_corpora(vec![a, b]).unwrap();
        assert_eq!(merged.len(), 5);
        assert_eq!(merged[0].sentence_id, "manual:1");
        assert_eq!(merged[2].sentence_id, "dmv:1");
        assert_eq!(merged[2].source, Source::Dmv);
        // already-namespaced ids pass through unchanged
        assert_eq!(merge_corpora(vec![merged.clone()]).unwrap(), merged);
    }

    #[test]
    fn merge_detects_collisions() {
        let a = vec![sentence("1", "x", "C", Source::Manual), sentence("1", "y", "E", Source::Manual)];
        assert!(matches!(merge_corpora(vec![a]), Err(CorpusError::DuplicateId { .. })));
    }

    #[test]
    fn empty_distribution() {
        assert_eq!(tag_distribution(&[]), TagDistribution::default());
    }

    #[test]
    fn agreement_identity_and_one_in_ten() {
        let a = vec![sentence("1", "a b c d e f g h i j", "CCCEEEOOOO", Source::Manual)];
        assert_eq!(inter_rater_agreement(&a, &a).unwrap(), 1.0);
        let b = vec![sentence("1", "a b c d e f g h i j", "CCCEEEOOOC", Source::Manual)];
        assert_eq!(inter_rater_agreement(&a, &b).unwrap(), 0.9);
    }

    #[test]
    fn agreement_errors() {
        let a = vec![sentence("1", "a b", "CC", Source::Manual)];
        let b = vec![sentence("2", "a b", "CC", Source::Manual)];
        assert!(matches!(inter_rater_agreement(&a, &b), Err(CorpusError::MissingSentence(_))));
        let c = vec![sentence("1", "a x", "CC", Source::Manual)];
        assert!(matches!(inter_rater_agreement(&a, &c), Err(CorpusError::TokenMismatch(_))));
        assert!(matches!(inter_rater_agreement(&[], &[]), Err(CorpusError::NoTokens)));
        assert!(matches!(mean_pairwise_agreement(&[a]), Err(CorpusError::TooFewRaters(2))));
    }
}
