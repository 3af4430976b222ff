//! ADAS keyword groups: complaint flagging and category assignment.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{contains_phrase, is_normalized_phrase};

const DEFAULT_LEXICON: &str = include_str!("../data/adas_keywords.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdasCategory {
    EmergencyBraking,
    AdaptiveCruiseControl,
    LaneKeepAssist,
    AutomaticSteering,
    Autopilot,
    ForwardCollisionAvoidance,
    BlindSpotAssist,
    Other,
}

impl AdasCategory {
    pub const ALL: [AdasCategory; 8] = [
        AdasCategory::EmergencyBraking,
        AdasCategory::AdaptiveCruiseControl,
        AdasCategory::LaneKeepAssist,
        AdasCategory::AutomaticSteering,
        AdasCategory::Autopilot,
        AdasCategory::ForwardCollisionAvoidance,
        AdasCategory::BlindSpotAssist,
        AdasCategory::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdasCategory::EmergencyBraking => "EmergencyBraking",
            AdasCategory::AdaptiveCruiseControl => "AdaptiveCruiseControl",
            AdasCategory::LaneKeepAssist => "LaneKeepAssist",
            AdasCategory::AutomaticSteering => "AutomaticSteering",
            AdasCategory::Autopilot => "Autopilot",
            AdasCategory::ForwardCollisionAvoidance => "ForwardCollisionAvoidance",
            AdasCategory::BlindSpotAssist => "BlindSpotAssist",
            AdasCategory::Other => "Other",
        }
    }

    /// Human-readable label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            AdasCategory::EmergencyBraking => "Emergency braking system",
            AdasCategory::AdaptiveCruiseControl => "Adaptive cruise control",
            AdasCategory::LaneKeepAssist => "Lane keep assist",
            AdasCategory::AutomaticSteering => "Automatic steering",
            AdasCategory::Autopilot => "Autopilot",
            AdasCategory::ForwardCollisionAvoidance => "Forward collision avoidance",
            AdasCategory::BlindSpotAssist => "Blind spot assist",
            AdasCategory::Other => "Others",
        }
    }
}

impl fmt::Display for AdasCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordGroup {
    pub group_id: String,
    pub adas_category: AdasCategory,
    pub keywords: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("keyword group {0:?} has no keywords")]
    EmptyGroup(String),
    #[error("keyword {keyword:?} in group {group:?} must be lowercase with single spaces")]
    BadKeyword { group: String, keyword: String },
    #[error("duplicate group id {0:?}")]
    DuplicateGroup(String),
    #[error("empty group id")]
    EmptyGroupId,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Ordered keyword groups. Group order doubles as the category priority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    groups: Vec<KeywordGroup>,
}

impl Lexicon {
    pub fn new(groups: Vec<KeywordGroup>) -> Result<Self, LexiconError> {
        let mut seen = HashSet::new();
        for g in &groups {
            if g.group_id.is_empty() {
                return Err(LexiconError::EmptyGroupId);
            }
            if !seen.insert(g.group_id.as_str()) {
                return Err(LexiconError::DuplicateGroup(g.group_id.clone()));
            }
            if g.keywords.is_empty() {
                return Err(LexiconError::EmptyGroup(g.group_id.clone()));
            }
            if let Some(bad) = g.keywords.iter().find(|k| !is_normalized_phrase(k)) {
                return Err(LexiconError::BadKeyword {
                    group: g.group_id.clone(),
                    keyword: bad.clone(),
                });
            }
        }
        Ok(Self { groups })
    }

    /// The shipped keyword list, one group per keyword table row.
    pub fn builtin() -> Self {
        Self::from_jsonl(DEFAULT_LEXICON).expect("builtin lexicon is valid")
    }

    /// One JSON object per line; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, LexiconError> {
        let groups = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|source| LexiconError::Parse { line: i + 1, source })
            })
            .collect::<Result<Vec<KeywordGroup>, _>>()?;
        Self::new(groups)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            out.push_str(&serde_json::to_string(g).expect("group serializes"));
            out.push('\n');
        }
        out
    }

    pub fn groups(&self) -> &[KeywordGroup] {
        &self.groups
    }

    pub fn group(&self, group_id: &str) -> Option<&KeywordGroup> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    /// Group ids whose phrases occur as whole words in `narrative`, in lexicon order.
    pub fn match_keywords(&self, narrative: &str) -> Vec<String> {
        let lowered = narrative.to_lowercase();
        self.groups
            .iter()
            .filter(|g| g.keywords.iter().any(|k| contains_phrase(&lowered, k)))
            .map(|g| g.group_id.clone())
            .collect()
    }

    /// Category of the first matched group in lexicon order.
    pub fn assign_adas_category(&self, matched_groups: &[String]) -> Option<AdasCategory> {
        self.groups
            .iter()
            .find(|g| matched_groups.contains(&g.group_id))
            .map(|g| g.adas_category)
    }

    pub fn classify(&self, complaint_id: &str, narrative: &str) -> MatchResult {
        let matched_groups = self.match_keywords(narrative);
        let adas_category = self.assign_adas_category(&matched_groups);
        MatchResult {
            complaint_id: complaint_id.to_owned(),
            is_adas: !matched_groups.is_empty(),
            matched_groups,
            adas_category,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub complaint_id: String,
    pub matched_groups: Vec<String>,
    pub is_adas: bool,
    pub adas_category: Option<AdasCategory>,
}

/// Percentage of ADAS-flagged complaints containing each group's keywords.
/// A complaint matching several groups counts toward each of them.
pub fn keyword_distribution(results: &[MatchResult]) -> BTreeMap<String, f64> {
    let adas: Vec<&MatchResult> = results.iter().filter(|r| r.is_adas).collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &adas {
        for g in &r.matched_groups {
            *counts.entry(g.clone()).or_default() += 1;
        }
    }
    let total = adas.len() as f64;
    counts
        .into_iter()
        .map(|(g, c)| (g, 100.0 * c as f64 / total))
        .collect()
}

/// Share of ADAS-flagged complaints per assigned category.
pub fn category_distribution(results: &[MatchResult]) -> BTreeMap<AdasCategory, f64> {
    let mut counts: BTreeMap<AdasCategory, usize> = BTreeMap::new();
    let mut total = 0usize;
    for c in results.iter().filter_map(|r| r.adas_category) {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|(c, n)| (c, 100.0 * n as f64 / total as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_eleven_groups() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.groups().len(), 11);
        assert_eq!(lex.groups()[0].keywords.len(), 4);
        let cats: HashSet<_> = lex.groups().iter().map(|g| g.adas_category).collect();
        assert_eq!(cats.len(), 8);
    }

    #[test]
    fn direct_hit_and_boundary_miss() {
        let lex = Lexicon::builtin();
        assert_eq!(
            lex.match_keywords("the lane keep assist jerked the wheel"),
            ["lane_keep_assist"]
        );
        assert!(lex.match_keywords("the airplane keep assisting").is_empty());
    }

    #[test]
    fn case_insensitive() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.match_keywords("AUTOPILOT engaged"), ["autopilot"]);
    }

    #[test]
    fn priority_tie_break() {
        let lex = Lexicon::builtin();
        let m = lex.classify("1", "lane keep assist and then automatic braking kicked in");
        assert_eq!(m.matched_groups, ["emergency_braking", "lane_keep_assist"]);
        assert_eq!(m.adas_category, Some(AdasCategory::EmergencyBraking));
        assert!(m.is_adas);

        let none = lex.classify("2", "engine stalled");
        assert!(!none.is_adas);
        assert_eq!(none.adas_category, None);
    }

    #[test]
    fn distribution_single_and_empty() {
        let lex = Lexicon::builtin();
        let r = lex.classify("1", "autopilot");
        let d = keyword_distribution(&[r]);
        assert_eq!(d.get("autopilot"), Some(&100.0));
        assert!(keyword_distribution(&[]).is_empty());
    }

    #[test]
    fn invalid_lexicons() {
        let group = |id: &str, kw: &[&str]| KeywordGroup {
            group_id: id.into(),
            adas_category: AdasCategory::Other,
            keywords: kw.iter().map(|s| s.to_string()).collect(),
        };
        assert!(matches!(
            Lexicon::new(vec![group("a", &["x"]), group("a", &["y"])]),
            Err(LexiconError::DuplicateGroup(_))
        ));
        assert!(matches!(Lexicon::new(vec![group("a", &[])]), Err(LexiconError::EmptyGroup(_))));
        assert!(matches!(
            Lexicon::new(vec![group("a", &["Upper"])]),
            Err(LexiconError::BadKeyword { .. })
        ));
        assert!(matches!(
            Lexicon::from_jsonl("{not json"),
            Err(LexiconError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let lex = Lexicon::builtin();
        assert_eq!(Lexicon::from_jsonl(&lex.to_jsonl()).unwrap(), lex);
    }
}
