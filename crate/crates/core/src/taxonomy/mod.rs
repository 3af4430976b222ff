//! Cause and effect categories, the rule lexicon that assigns them, and
//! ranked reports over categorized instances.

mod report;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::AdasCategory;
use crate::tagger::CauseEffectInstance;
use crate::text::{contains_phrase, tokenize};

pub use report::{
    aggregate, percentage, render_report, RankedRow, RankedTable, ReportFormat, TaxonomyReport, PAIR_SEPARATOR,
};

const DEFAULT_CATEGORIES: &str = include_str!("../../data/categories.json");

macro_rules! category_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = TaxonomyError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(TaxonomyError::UnknownCategory(other.to_string())),
                }
            }
        }
    };
}

category_enum!(
    CauseCategory {
        FalseAlarm => "false_alarm",
        FailToRespond => "fail_to_respond",
        Recall => "recall",
        SensorIssue => "sensor_issue",
        RecognitionError => "recognition_error",
        DataStorageIssue => "data_storage_issue",
        InattentiveDriving => "inattentive_driving",
        Battery => "battery",
        Powertrain => "powertrain",
        WiringIssue => "wiring_issue",
        OverCorrection => "over_correction",
        WindshieldCrack => "windshield_crack",
        AutomaticEngagement => "automatic_engagement",
        SuspensionFailure => "suspension_failure",
        InfotainmentDefect => "infotainment_defect",
        AutomaticDisengagement => "automatic_disengagement",
        BrakeFailure => "brake_failure",
        OverSensitive => "over_sensitive",
        MainControlUnitIssue => "main_control_unit_issue",
        ElectricSystemIssue => "electric_system_issue",
        SteeringIssue => "steering_issue",
        SoftwareIssue => "software_issue",
        RoadConditions => "road_conditions",
        Weather => "weather",
        FalseAdvertising => "false_advertising",
        OtherVehicles => "other_vehicles",
        Others => "others",
        Unknown => "unknown",
    }
);

category_enum!(
    EffectCategory {
        AdasFailure => "adas_failure",
        HardBraking => "hard_braking",
        WarningAlert => "warning_alert",
        Collision => "collision",
        NearCollision => "near_collision",
        Crash => "crash",
        CrashInjuryDeath => "crash_injury_death",
        LossOfControl => "loss_of_control",
        Swerving => "swerving",
        Stalling => "stalling",
        VehicleCompleteFailure => "vehicle_complete_failure",
        SafetyHazard => "safety_hazard",
        RepairUnavailable => "repair_unavailable",
        UnintendedBraking => "unintended_braking",
        ErrorMessage => "error_message",
        AdasUnavailable => "adas_unavailable",
        Distrust => "distrust",
        Unknown => "unknown",
    }
);

category_enum!(
    MajorGroup {
        Vehicle => "vehicle",
        Environment => "environment",
        Human => "human",
        Unknown => "unknown",
    }
);

impl CauseCategory {
    /// Inattentive driving and recognition error count as vehicle factors
    /// even though both read as human factors.
    pub fn major_group(self) -> MajorGroup {
        use CauseCategory::*;
        match self {
            RoadConditions | Weather => MajorGroup::Environment,
            FalseAdvertising | OtherVehicles => MajorGroup::Human,
            Unknown => MajorGroup::Unknown,
            _ => MajorGroup::Vehicle,
        }
    }
}

impl EffectCategory {
    /// Crash-type severity; categories outside that ladder have none.
    pub fn severity_rank(self) -> Option<u8> {
        match self {
            EffectCategory::Collision => Some(1),
            EffectCategory::Crash => Some(2),
            EffectCategory::CrashInjuryDeath => Some(3),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("rule for {category} declares major group {declared}, registry says {expected}")]
    MajorGroupMismatch {
        category: CauseCategory,
        declared: MajorGroup,
        expected: MajorGroup,
    },
    #[error("rule for {category} declares severity rank {declared:?}, registry says {expected:?}")]
    SeverityMismatch {
        category: EffectCategory,
        declared: Option<u8>,
        expected: Option<u8>,
    },
    #[error("rule for {0} has an empty pattern list")]
    NoPatterns(String),
    #[error("rule for {category} has pattern {pattern:?} with no words")]
    EmptyPattern { category: String, pattern: String },
    #[error("the unknown category is the fall-through and cannot have rules")]
    UnknownRule,
    #[error("denominator must be positive")]
    ZeroDenominator,
    #[error("unknown report format {0:?}; expected csv, json or markdown")]
    UnknownFormat(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseRule {
    pub category: CauseCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub major_group: Option<MajorGroup>,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectRule {
    pub category: EffectCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity_rank: Option<u8>,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LexiconFile {
    causes: Vec<CauseRule>,
    effects: Vec<EffectRule>,
}

/// Ordered phrase rules for causes and for effects.
///
/// Patterns are matched as whole-word phrases after both pattern and span
/// pass through the corpus tokenizer, so `"rear-ended"` matches
/// `"Rear-Ended"` but never `"rear-endedness"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryLexicon {
    causes: Vec<CauseRule>,
    effects: Vec<EffectRule>,
    cause_patterns: Vec<Vec<String>>,
    effect_patterns: Vec<Vec<String>>,
}

fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

fn normalize_patterns(category: &str, patterns: &[String]) -> Result<Vec<String>, TaxonomyError> {
    if patterns.is_empty() {
        return Err(TaxonomyError::NoPatterns(category.to_string()));
    }
    patterns
        .iter()
        .map(|p| {
            let n = normalize(p);
            if n.is_empty() {
                Err(TaxonomyError::EmptyPattern {
                    category: category.to_string(),
                    pattern: p.clone(),
                })
            } else {
                Ok(n)
            }
        })
        .collect()
}

impl CategoryLexicon {
    pub fn new(causes: Vec<CauseRule>, effects: Vec<EffectRule>) -> Result<Self, TaxonomyError> {
        let mut cause_patterns = Vec::with_capacity(causes.len());
        for rule in &causes {
            if rule.category == CauseCategory::Unknown {
                return Err(TaxonomyError::UnknownRule);
            }
            if let Some(declared) = rule.major_group {
                let expected = rule.category.major_group();
                if declared != expected {
                    return Err(TaxonomyError::MajorGroupMismatch {
                        category: rule.category,
                        declared,
                        expected,
                    });
                }
            }
            cause_patterns.push(normalize_patterns(rule.category.name(), &rule.patterns)?);
        }
        let mut effect_patterns = Vec::with_capacity(effects.len());
        for rule in &effects {
            if rule.category == EffectCategory::Unknown {
                return Err(TaxonomyError::UnknownRule);
            }
            let expected = rule.category.severity_rank();
            if rule.severity_rank.is_some() && rule.severity_rank != expected {
                return Err(TaxonomyError::SeverityMismatch {
                    category: rule.category,
                    declared: rule.severity_rank,
                    expected,
                });
            }
            effect_patterns.push(normalize_patterns(rule.category.name(), &rule.patterns)?);
        }
        Ok(Self {
            causes,
            effects,
            cause_patterns,
            effect_patterns,
        })
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_CATEGORIES).expect("builtin category lexicon is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let file: LexiconFile = serde_json::from_str(text)?;
        Self::new(file.causes, file.effects)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LexiconFile {
            causes: self.causes.clone(),
            effects: self.effects.clone(),
        })
        .expect("lexicon serializes")
    }

    pub fn cause_rules(&self) -> &[CauseRule] {
        &self.causes
    }

    pub fn effect_rules(&self) -> &[EffectRule] {
        &self.effects
    }

    fn matching<'a>(patterns: &'a [Vec<String>], text: &str) -> impl Iterator<Item = usize> + 'a {
        let text = normalize(text);
        patterns
            .iter()
            .enumerate()
            .filter(move |(_, ps)| ps.iter().any(|p| contains_phrase(&text, p)))
            .map(|(i, _)| i)
    }

    /// First matching rule wins; no match is `unknown`.
    pub fn categorize_cause(&self, span_text: &str) -> CauseCategory {
        Self::matching(&self.cause_patterns, span_text)
            .next()
            .map_or(CauseCategory::Unknown, |i| self.causes[i].category)
    }

    /// First matching rule wins, except that a crash-type winner is replaced
    /// by the most severe crash-type category that also matches.
    pub fn categorize_effect(&self, span_text: &str) -> EffectCategory {
        let matches: Vec<EffectCategory> = Self::matching(&self.effect_patterns, span_text)
            .map(|i| self.effects[i].category)
            .collect();
        match matches.first() {
            None => EffectCategory::Unknown,
            Some(first) if first.severity_rank().is_none() => *first,
            Some(_) => matches
                .iter()
                .copied()
                .filter(|c| c.severity_rank().is_some())
                .max_by_key(|c| c.severity_rank())
                .expect("first match is ranked"),
        }
    }

    /// Categorizes every span; an instance without spans of a kind gets
    /// `unknown` for that kind. Categories are deduplicated.
    pub fn categorize(&self, instance: &CauseEffectInstance) -> CategorizedInstance {
        let mut causes: BTreeSet<CauseCategory> = instance
            .cause_spans
            .iter()
            .map(|s| self.categorize_cause(&s.text))
            .collect();
        let mut effects: BTreeSet<EffectCategory> = instance
            .effect_spans
            .iter()
            .map(|s| self.categorize_effect(&s.text))
            .collect();
        if causes.is_empty() {
            causes.insert(CauseCategory::Unknown);
        }
        if effects.is_empty() {
            effects.insert(EffectCategory::Unknown);
        }
        CategorizedInstance {
            complaint_id: instance.complaint_id.clone(),
            adas_category: instance.adas_category,
            causes,
            effects,
        }
    }
}

/// Distinct cause and effect categories found in one complaint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorizedInstance {
    pub complaint_id: String,
    pub adas_category: Option<AdasCategory>,
    pub causes: BTreeSet<CauseCategory>,
    pub effects: BTreeSet<EffectCategory>,
}
