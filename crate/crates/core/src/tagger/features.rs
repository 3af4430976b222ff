use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::text::is_punctuation;

/// Observation feature templates evaluated at one token position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureTemplate {
    Word,
    Lower,
    /// Prefix of the lowercased word, 1..=3 characters.
    Prefix(u8),
    /// Suffix of the lowercased word, 1..=3 characters.
    Suffix(u8),
    IsDigit,
    IsPunct,
    PrevWord,
    NextWord,
    First,
    Last,
    Bias,
}

impl FeatureTemplate {
    pub fn default_set() -> Vec<FeatureTemplate> {
        use FeatureTemplate::*;
        vec![
            Word,
            Lower,
            Prefix(1),
            Prefix(2),
            Prefix(3),
            Suffix(1),
            Suffix(2),
            Suffix(3),
            IsDigit,
            IsPunct,
            PrevWord,
            NextWord,
            First,
            Last,
            Bias,
        ]
    }

    fn apply(self, tokens: &[String], lowered: &[String], i: usize, out: &mut Vec<String>) {
        use FeatureTemplate::*;
        let word = &tokens[i];
        let lw = &lowered[i];
        match self {
            Word => out.push(format!("w={word}")),
            Lower => out.push(format!("lw={lw}")),
            Prefix(k) => {
                let k = k as usize;
                if lw.chars().count() >= k {
                    out.push(format!("p{k}={}", lw.chars().take(k).collect::<String>()));
                }
            }
            Suffix(k) => {
                let k = k as usize;
                let n = lw.chars().count();
                if n >= k {
                    out.push(format!("s{k}={}", lw.chars().skip(n - k).collect::<String>()));
                }
            }
            IsDigit => {
                if word.chars().all(|c| c.is_ascii_digit()) {
                    out.push("digit".into());
                }
            }
            IsPunct => {
                if word.chars().all(is_punctuation) {
                    out.push("punct".into());
                }
            }
            PrevWord => match i.checked_sub(1) {
                Some(p) => out.push(format!("w-1={}", lowered[p])),
                None => out.push("w-1=<s>".into()),
            },
            NextWord => match lowered.get(i + 1) {
                Some(n) => out.push(format!("w+1={n}")),
                None => out.push("w+1=</s>".into()),
            },
            First => {
                if i == 0 {
                    out.push("first".into());
                }
            }
            Last => {
                if i + 1 == tokens.len() {
                    out.push("last".into());
                }
            }
            Bias => out.push("bias".into()),
        }
    }
}

/// Feature strings for every position of `tokens`.
pub fn extract_features(templates: &[FeatureTemplate], tokens: &[String]) -> Vec<Vec<String>> {
    let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    (0..tokens.len())
        .map(|i| {
            let mut out = Vec::with_capacity(templates.len());
            for t in templates {
                t.apply(tokens, &lowered, i, &mut out);
            }
            out
        })
        .collect()
}

impl fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FeatureTemplate::*;
        match self {
            Word => f.write_str("word"),
            Lower => f.write_str("lower"),
            Prefix(k) => write!(f, "prefix{k}"),
            Suffix(k) => write!(f, "suffix{k}"),
            IsDigit => f.write_str("is_digit"),
            IsPunct => f.write_str("is_punct"),
            PrevWord => f.write_str("prev_word"),
            NextWord => f.write_str("next_word"),
            First => f.write_str("first"),
            Last => f.write_str("last"),
            Bias => f.write_str("bias"),
        }
    }
}

impl FromStr for FeatureTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use FeatureTemplate::*;
        Ok(match s {
            "word" => Word,
            "lower" => Lower,
            "prefix1" => Prefix(1),
            "prefix2" => Prefix(2),
            "prefix3" => Prefix(3),
            "suffix1" => Suffix(1),
            "suffix2" => Suffix(2),
            "suffix3" => Suffix(3),
            "is_digit" => IsDigit,
            "is_punct" => IsPunct,
            "prev_word" => PrevWord,
            "next_word" => NextWord,
            "first" => First,
            "last" => Last,
            "bias" => Bias,
            other => return Err(format!("unknown feature template {other:?}")),
        })
    }
}

impl Serialize for FeatureTemplate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureTemplate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
