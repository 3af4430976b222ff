use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CategorizedInstance, TaxonomyError};
use crate::lexicon::AdasCategory;

/// Joins cause and effect names in pair rows.
pub const PAIR_SEPARATOR: &str = " -> ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub rank: usize,
    pub category: String,
    pub count: u64,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTable {
    /// `causes`, `effects`, `pairs`, or `causes/<AdasCategory>` and
    /// `effects/<AdasCategory>` for the per-system tables.
    pub table: String,
    pub denominator: u64,
    pub rows: Vec<RankedRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyReport {
    pub denominator: u64,
    pub tables: Vec<RankedTable>,
}

/// `100 · count / denominator` rounded half-up to one decimal, computed in
/// integers so that printed values are exact.
pub fn percentage(count: u64, denominator: u64) -> f64 {
    assert!(denominator > 0, "denominator must be positive");
    let tenths = (2000 * count as u128 + denominator as u128) / (2 * denominator as u128);
    tenths as f64 / 10.0
}

fn rank(table: &str, counts: BTreeMap<String, u64>, denominator: u64) -> RankedTable {
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    // BTreeMap iteration is already name-ascending; a stable sort keeps that for ties.
    entries.sort_by_key(|e| std::cmp::Reverse(e.1));
    RankedTable {
        table: table.to_string(),
        denominator,
        rows: entries
            .into_iter()
            .enumerate()
            .map(|(i, (category, count))| RankedRow {
                rank: i + 1,
                percentage: percentage(count, denominator),
                category,
                count,
            })
            .collect(),
    }
}

/// Instance count plus cause and effect tallies for one system.
type SystemTally = (u64, BTreeMap<String, u64>, BTreeMap<String, u64>);

fn bump(map: &mut BTreeMap<String, u64>, key: String) {
    *map.entry(key).or_insert(0) += 1;
}

/// Counts each distinct category once per instance.
///
/// Global cause, effect and pair tables use `denominator`. Per-system tables
/// use the number of instances in that system, so each reads as a share of
/// that system's complaints. Instances without a system only reach the
/// global tables.
pub fn aggregate(instances: &[CategorizedInstance], denominator: u64) -> Result<TaxonomyReport, TaxonomyError> {
    if denominator == 0 {
        return Err(TaxonomyError::ZeroDenominator);
    }
    if instances.is_empty() {
        return Ok(TaxonomyReport {
            denominator,
            tables: Vec::new(),
        });
    }
    let mut causes = BTreeMap::new();
    let mut effects = BTreeMap::new();
    let mut pairs = BTreeMap::new();
    let mut per_system: BTreeMap<AdasCategory, SystemTally> = BTreeMap::new();
    for inst in instances {
        for c in &inst.causes {
            bump(&mut causes, c.name().to_string());
            for e in &inst.effects {
                bump(&mut pairs, format!("{}{PAIR_SEPARATOR}{}", c.name(), e.name()));
            }
        }
        for e in &inst.effects {
            bump(&mut effects, e.name().to_string());
        }
        if let Some(system) = inst.adas_category {
            let slot = per_system.entry(system).or_default();
            slot.0 += 1;
            inst.causes.iter().for_each(|c| bump(&mut slot.1, c.name().to_string()));
            inst.effects.iter().for_each(|e| bump(&mut slot.2, e.name().to_string()));
        }
    }
    let mut tables = vec![
        rank("causes", causes, denominator),
        rank("effects", effects, denominator),
        rank("pairs", pairs, denominator),
    ];
    for (system, (n, c, e)) in per_system {
        tables.push(rank(&format!("causes/{system}"), c, n));
        tables.push(rank(&format!("effects/{system}"), e, n));
    }
    Ok(TaxonomyReport { denominator, tables })
}

impl TaxonomyReport {
    pub fn table(&self, name: &str) -> Option<&RankedTable> {
        self.tables.iter().find(|t| t.table == name)
    }

    /// Keeps the first rows of each table: `causes` for cause tables,
    /// `effects` for effect tables and `pairs` for the pair table.
    pub fn top(&self, causes: usize, effects: usize, pairs: usize) -> TaxonomyReport {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let keep = if t.table == "pairs" {
                    pairs
                } else if t.table.starts_with("causes") {
                    causes
                } else {
                    effects
                };
                RankedTable {
                    rows: t.rows.iter().take(keep).cloned().collect(),
                    ..t.clone()
                }
            })
            .collect();
        TaxonomyReport {
            denominator: self.denominator,
            tables,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(TaxonomyError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn render_report(report: &TaxonomyReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["table", "rank", "category", "count", "percentage"])
                .expect("in-memory write");
            for t in &report.tables {
                for r in &t.rows {
                    w.write_record([
                        t.table.as_str(),
                        &r.rank.to_string(),
                        &r.category,
                        &r.count.to_string(),
                        &format!("{:.1}", r.percentage),
                    ])
                    .expect("in-memory write");
                }
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            for (i, t) in report.tables.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "### {} (n = {})\n", t.table, t.denominator);
                if t.table == "pairs" {
                    out.push_str("| Rank | Cause | Effect | #Complaints | %Complaints |\n");
                    out.push_str("|---:|---|---|---:|---:|\n");
                    for r in &t.rows {
                        let (c, e) = r.category.split_once(PAIR_SEPARATOR).unwrap_or((&r.category, ""));
                        let _ = writeln!(out, "| {} | {} | {} | {} | {:.1} |", r.rank, c, e, r.count, r.percentage);
                    }
                } else {
                    out.push_str("| Rank | Category | #Complaints | %Complaints |\n");
                    out.push_str("|---:|---|---:|---:|\n");
                    for r in &t.rows {
                        let _ = writeln!(out, "| {} | {} | {} | {:.1} |", r.rank, r.category, r.count, r.percentage);
                    }
                }
            }
            out
        }
    }
}
