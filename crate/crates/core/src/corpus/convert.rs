//! Converters from foreign cause/effect corpora into annotated sentences.

use super::{AnnotatedSentence, CorpusError, Source, Tag};
use crate::text::tokenize;

/// SemEval-2010 Task 8 relation file: blocks of
///
/// ```text
/// 8<TAB>"The <e1>fire</e1> was caused by <e2>lightning</e2>."
/// Cause-Effect(e2,e1)
/// Comment:
/// ```
///
/// The cause entity becomes `C`, the effect entity `E`, everything else `O`.
/// Blocks with other relations are skipped unless `keep_non_causal` is set,
/// in which case they are emitted all-`O`.
pub fn convert_semeval(text: &str, keep_non_causal: bool) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (line_no, head) = lines[i];
        let Some((id, quoted)) = head.split_once('\t') else {
            return Err(foreign(line_no, "expected <id><TAB>\"sentence\""));
        };
        let relation = lines
            .get(i + 1)
            .map(|(_, r)| r.trim())
            .ok_or_else(|| foreign(line_no, "missing relation line"))?;
        i += 2;
        if lines.get(i).is_some_and(|(_, l)| l.starts_with("Comment")) {
            i += 1;
        }

        let cause_is_e1 = match relation {
            "Cause-Effect(e1,e2)" => Some(true),
            "Cause-Effect(e2,e1)" => Some(false),
            _ if keep_non_causal => None,
            _ => continue,
        };
        let sentence = quoted.trim().trim_matches('"');
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for (segment, entity) in split_entities(sentence).map_err(|m| foreign(line_no, m))? {
            let tag = match (entity, cause_is_e1) {
                (Some(1), Some(true)) | (Some(2), Some(false)) => Tag::C,
                (Some(1), Some(false)) | (Some(2), Some(true)) => Tag::E,
                _ => Tag::O,
            };
            for token in tokenize(segment) {
                tokens.push(token);
                tags.push(tag);
            }
        }
        out.push(AnnotatedSentence::new(id.trim(), tokens, tags, Source::Semeval)?);
    }
    Ok(out)
}

/// Splits on `<e1>..</e1>` / `<e2>..</e2>` markers.
fn split_entities(sentence: &str) -> Result<Vec<(&str, Option<u8>)>, &'static str> {
    let mut parts = Vec::new();
    let mut rest = sentence;
    while let Some(open) = rest.find("<e") {
        let which = match rest.as_bytes().get(open + 2) {
            Some(b'1') => 1,
            Some(b'2') => 2,
            _ => return Err("malformed entity marker"),
        };
        parts.push((&rest[..open], None));
        let body_start = open + 4;
        let close_tag = if which == 1 { "</e1>" } else { "</e2>" };
        let close = rest[body_start..].find(close_tag).ok_or("unclosed entity marker")? + body_start;
        parts.push((&rest[body_start..close], Some(which)));
        rest = &rest[close + close_tag.len()..];
    }
    parts.push((rest, None));
    Ok(parts)
}

/// CA DMV disengagement annotations as CSV with a header containing `id`,
/// `text`, `cause` and `effect` columns. `cause`/`effect` hold one or more
/// `|`-separated verbatim fragments of `text` (possibly empty). Each fragment
/// is tokenized and tagged at its first non-overlapping occurrence.
pub fn convert_dmv(csv_text: &str) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| foreign(1, &e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| foreign(1, &format!("missing column {name:?}")))
    };
    let (id_col, text_col, cause_col, effect_col) = (column("id")?, column("text")?, column("cause")?, column("effect")?);

    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| foreign(line, &e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let tokens = tokenize(field(text_col));
        if tokens.is_empty() {
            continue;
        }
        let mut tags = vec![Tag::O; tokens.len()];
        for (col, tag) in [(cause_col, Tag::C), (effect_col, Tag::E)] {
            for fragment in field(col).split('|').filter(|f| !f.trim().is_empty()) {
                let needle = tokenize(fragment);
                let at = find_free_run(&tokens, &tags, &needle)
                    .ok_or_else(|| foreign(line, &format!("fragment {fragment:?} not found in text")))?;
                tags[at..at + needle.len()].fill(tag);
            }
        }
        out.push(AnnotatedSentence::new(field(id_col).trim(), tokens, tags, Source::Dmv)?);
    }
    Ok(out)
}

fn find_free_run(tokens: &[String], tags: &[Tag], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > tokens.len() {
        return None;
    }
    (0..=tokens.len() - needle.len()).find(|&start| {
        tokens[start..start + needle.len()] == *needle
            && tags[start..start + needle.len()].iter().all(|t| *t == Tag::O)
    })
}

fn foreign(line: usize, message: &str) -> CorpusError {
    CorpusError::Foreign {
        line,
        message: message.to_owned(),
    }
}
