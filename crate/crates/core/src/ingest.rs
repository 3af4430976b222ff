//! Parsing, deduplication and date filtering of ODI complaint flat files.
//!
//! The ODI `FLAT_CMPL` extract is a tab-separated file without a header and
//! without quoting. [`IngestOptions::default`] targets that layout; every
//! column role is configurable through [`ColumnMapping`] because the column
//! set differs between vintages of the file.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The 49 columns of the ODI complaint flat file, in file order.
pub const ODI_COLUMNS: [&str; 49] = [
    "CMPLID",
    "ODINO",
    "MFR_NAME",
    "MAKETXT",
    "MODELTXT",
    "YEARTXT",
    "CRASH",
    "FAILDATE",
    "FIRE",
    "INJURED",
    "DEATHS",
    "COMPDESC",
    "CITY",
    "STATE",
    "VIN",
    "DATEA",
    "LDATE",
    "MILES",
    "OCCURENCES",
    "CDESCR",
    "CMPL_TYPE",
    "POLICE_RPT_YN",
    "PURCH_DT",
    "ORIG_OWNER_YN",
    "ANTI_BRAKES_YN",
    "CRUISE_CONT_YN",
    "NUM_CYLS",
    "DRIVE_TRAIN",
    "FUEL_SYS",
    "FUEL_TYPE",
    "TRANS_TYPE",
    "VEH_SPEED",
    "DOT",
    "TIRE_SIZE",
    "LOC_OF_TIRE",
    "TIRE_FAIL_TYPE",
    "ORIG_EQUIP_YN",
    "MANUF_DT",
    "SEAT_TYPE",
    "RESTRAINT_TYPE",
    "DEALER_NAME",
    "DEALER_TEL",
    "DEALER_CITY",
    "DEALER_STATE",
    "DEALER_ZIP",
    "PROD_TYPE",
    "REPAIRED_YN",
    "MEDICAL_ATTN",
    "VEHICLES_TOWED_YN",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplaintRecord {
    pub complaint_id: String,
    pub incident_date: Option<NaiveDate>,
    pub received_date: Option<NaiveDate>,
    pub manufacturer: String,
    pub make: String,
    pub model: String,
    pub model_year: Option<i32>,
    pub component: String,
    pub narrative: String,
    pub extra: IndexMap<String, String>,
}

impl ComplaintRecord {
    /// One line of the canonical record file (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Inclusive calendar range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    start: NaiveDate,
    end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if start > end {
            return Err(IngestError::InvalidRange { start, end });
        }
        Ok(Self { start, end })
    }

    /// October 27, 2015 through May 1, 2021.
    pub fn study_period() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2015, 10, 27).unwrap(),
            end: NaiveDate::from_ymd_opt(2021, 5, 1).unwrap(),
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

/// Which source column plays each modeled role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub complaint_id: String,
    pub incident_date: String,
    pub received_date: Option<String>,
    pub manufacturer: String,
    pub make: String,
    pub model: String,
    pub model_year: String,
    pub component: String,
    pub narrative: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            complaint_id: "ODINO".into(),
            incident_date: "FAILDATE".into(),
            received_date: Some("LDATE".into()),
            manufacturer: "MFR_NAME".into(),
            make: "MAKETXT".into(),
            model: "MODELTXT".into(),
            model_year: "YEARTXT".into(),
            component: "COMPDESC".into(),
            narrative: "CDESCR".into(),
        }
    }
}

impl ColumnMapping {
    fn roles(&self) -> Vec<&str> {
        let mut roles = vec![
            self.complaint_id.as_str(),
            self.incident_date.as_str(),
            self.manufacturer.as_str(),
            self.make.as_str(),
            self.model.as_str(),
            self.model_year.as_str(),
            self.component.as_str(),
            self.narrative.as_str(),
        ];
        if let Some(received) = &self.received_date {
            roles.push(received);
        }
        roles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utf8Policy {
    /// Replace invalid sequences with U+FFFD.
    #[default]
    Lossy,
    /// Report rows containing invalid UTF-8 as row errors.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Column names in file order. Ignored when `has_header` is set.
    pub schema: Vec<String>,
    pub mapping: ColumnMapping,
    pub delimiter: char,
    pub has_header: bool,
    /// Honour double-quote quoting. The ODI file does not quote fields.
    pub quoting: bool,
    pub utf8: Utf8Policy,
    /// Abort when more than this fraction of rows are malformed.
    pub max_error_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            schema: ODI_COLUMNS.iter().map(|c| c.to_string()).collect(),
            mapping: ColumnMapping::default(),
            delimiter: '\t',
            has_header: false,
            quoting: false,
            utf8: Utf8Policy::Lossy,
            max_error_fraction: 0.01,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema is missing mapped column {0:?}")]
    MissingColumn(String),
    #[error("delimiter {0:?} must be a single-byte character")]
    BadDelimiter(char),
    #[error("invalid date range: {start} is after {end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
    #[error("{bad} of {total} rows malformed, above the {limit} error budget")]
    ErrorBudgetExceeded { bad: usize, total: usize, limit: f64 },
    #[error("malformed record line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RowErrorKind {
    #[error("column count mismatch: expected {expected}, found {found}")]
    ColumnCount { expected: usize, found: usize },
    #[error("invalid UTF-8")]
    InvalidUtf8,
    #[error("empty complaint id")]
    EmptyId,
    #[error("empty narrative")]
    EmptyNarrative,
    #[error("unreadable row: {0}")]
    Unreadable(String),
}

/// A rejected data row. `row` counts data rows from zero, excluding the header.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("row {row}: {kind}")]
pub struct RowError {
    pub row: usize,
    pub kind: RowErrorKind,
}

/// Streaming parser over a delimited complaint file, yielding one result per
/// data row.
pub struct ComplaintReader<R: Read> {
    rows: csv::ByteRecordsIntoIter<R>,
    layout: Layout,
    utf8: Utf8Policy,
    row: usize,
}

struct Layout {
    width: usize,
    complaint_id: usize,
    incident_date: usize,
    received_date: Option<usize>,
    manufacturer: usize,
    make: usize,
    model: usize,
    model_year: usize,
    component: usize,
    narrative: usize,
    extra: Vec<(usize, String)>,
}

impl Layout {
    fn new(schema: &[String], mapping: &ColumnMapping) -> Result<Self, IngestError> {
        let position: HashMap<&str, usize> = schema
            .iter()
            .enumerate()
            .map(|(i, name)| (name.as_str(), i))
            .collect();
        let find = |name: &str| {
            position
                .get(name)
                .copied()
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        let roles = mapping.roles();
        let extra = schema
            .iter()
            .enumerate()
            .filter(|(_, name)| !roles.contains(&name.as_str()))
            .map(|(i, name)| (i, name.clone()))
            .collect();
        Ok(Self {
            width: schema.len(),
            complaint_id: find(&mapping.complaint_id)?,
            incident_date: find(&mapping.incident_date)?,
            received_date: mapping.received_date.as_deref().map(find).transpose()?,
            manufacturer: find(&mapping.manufacturer)?,
            make: find(&mapping.make)?,
            model: find(&mapping.model)?,
            model_year: find(&mapping.model_year)?,
            component: find(&mapping.component)?,
            narrative: find(&mapping.narrative)?,
            extra,
        })
    }
}

/// Opens a streaming complaint parser. Fails only on configuration problems
/// (unknown mapped column, unusable delimiter, unreadable header); bad data
/// rows surface as [`RowError`]s from the iterator.
pub fn parse_complaints<R: Read>(
    source: R,
    options: &IngestOptions,
) -> Result<ComplaintReader<R>, IngestError> {
    if !options.delimiter.is_ascii() {
        return Err(IngestError::BadDelimiter(options.delimiter));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter as u8)
        .has_headers(options.has_header)
        .quoting(options.quoting)
        .flexible(true)
        .from_reader(source);
    let schema: Vec<String> = if options.has_header {
        reader
            .byte_headers()?
            .iter()
            .map(|h| String::from_utf8_lossy(h).trim().to_string())
            .collect()
    } else {
        options.schema.clone()
    };
    let layout = Layout::new(&schema, &options.mapping)?;
    Ok(ComplaintReader {
        rows: reader.into_byte_records(),
        layout,
        utf8: options.utf8,
        row: 0,
    })
}

impl<R: Read> Iterator for ComplaintReader<R> {
    type Item = Result<ComplaintRecord, RowError>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.row;
        let next = self.rows.next()?;
        self.row += 1;
        let fail = |kind| Some(Err(RowError { row, kind }));
        let record = match next {
            Ok(record) => record,
            Err(e) => return fail(RowErrorKind::Unreadable(e.to_string())),
        };
        if record.len() != self.layout.width {
            return fail(RowErrorKind::ColumnCount {
                expected: self.layout.width,
                found: record.len(),
            });
        }
        let mut fields = Vec::with_capacity(record.len());
        for raw in record.iter() {
            let text = match self.utf8 {
                Utf8Policy::Lossy => String::from_utf8_lossy(raw).into_owned(),
                Utf8Policy::Strict => match std::str::from_utf8(raw) {
                    Ok(s) => s.to_owned(),
                    Err(_) => return fail(RowErrorKind::InvalidUtf8),
                },
            };
            fields.push(text.trim().to_owned());
        }
        let l = &self.layout;
        let complaint_id = fields[l.complaint_id].clone();
        if complaint_id.is_empty() {
            return fail(RowErrorKind::EmptyId);
        }
        let narrative = fields[l.narrative].clone();
        if narrative.is_empty() {
            return fail(RowErrorKind::EmptyNarrative);
        }
        Some(Ok(ComplaintRecord {
            complaint_id,
            incident_date: parse_date(&fields[l.incident_date]),
            received_date: l.received_date.and_then(|i| parse_date(&fields[i])),
            manufacturer: fields[l.manufacturer].clone(),
            make: fields[l.make].clone(),
            model: fields[l.model].clone(),
            model_year: fields[l.model_year].parse().ok(),
            component: fields[l.component].clone(),
            narrative,
            extra: l
                .extra
                .iter()
                .map(|(i, name)| (name.clone(), fields[*i].clone()))
                .collect(),
        }))
    }
}

/// Accepts `YYYYMMDD`, `YYYY-MM-DD` and `MM/DD/YYYY`.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    ["%Y%m%d", "%Y-%m-%d", "%m/%d/%Y"]
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(raw, fmt).ok())
}

/// Parsed records plus the row errors that were skipped.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<ComplaintRecord>,
    pub errors: Vec<RowError>,
}

/// Drains a parser, enforcing the malformed-row budget from `options`.
pub fn read_complaints<R: Read>(
    source: R,
    options: &IngestOptions,
) -> Result<ParseOutcome, IngestError> {
    let mut outcome = ParseOutcome::default();
    for item in parse_complaints(source, options)? {
        match item {
            Ok(record) => outcome.records.push(record),
            Err(e) => outcome.errors.push(e),
        }
    }
    let total = outcome.records.len() + outcome.errors.len();
    let bad = outcome.errors.len();
    if total > 0 && bad as f64 > options.max_error_fraction * total as f64 {
        return Err(IngestError::ErrorBudgetExceeded {
            bad,
            total,
            limit: options.max_error_fraction,
        });
    }
    Ok(outcome)
}

/// Writes records back out as a delimited file in `schema` order. Used for
/// fixtures and round-trip checks; fields must not contain the delimiter.
pub fn write_complaints<W: Write>(
    mut out: W,
    records: &[ComplaintRecord],
    options: &IngestOptions,
) -> std::io::Result<()> {
    let m = &options.mapping;
    let fmt_date = |d: &Option<NaiveDate>| d.map(|d| d.format("%Y%m%d").to_string()).unwrap_or_default();
    let delimiter = options.delimiter.to_string();
    if options.has_header {
        writeln!(out, "{}", options.schema.join(&delimiter))?;
    }
    for r in records {
        let fields: Vec<String> = options
            .schema
            .iter()
            .map(|col| {
                let col = col.as_str();
                if col == m.complaint_id {
                    r.complaint_id.clone()
                } else if col == m.incident_date {
                    fmt_date(&r.incident_date)
                } else if Some(col) == m.received_date.as_deref() {
                    fmt_date(&r.received_date)
                } else if col == m.manufacturer {
                    r.manufacturer.clone()
                } else if col == m.make {
                    r.make.clone()
                } else if col == m.model {
                    r.model.clone()
                } else if col == m.model_year {
                    r.model_year.map(|y| y.to_string()).unwrap_or_default()
                } else if col == m.component {
                    r.component.clone()
                } else if col == m.narrative {
                    r.narrative.clone()
                } else {
                    r.extra.get(col).cloned().unwrap_or_default()
                }
            })
            .collect();
        writeln!(out, "{}", fields.join(&delimiter))?;
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[ComplaintRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<ComplaintRecord>, IngestError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            ComplaintRecord::from_json_line(line).map_err(|source| IngestError::Json {
                line: i + 1,
                source,
            })
        })
        .collect()
}

const COMPONENT_SEPARATOR: &str = "; ";

/// Collapses records sharing `(complaint_id, narrative)` into the first
/// occurrence, whose component becomes the ordered union of the group's
/// components.
pub fn dedup_complaints(records: Vec<ComplaintRecord>) -> Vec<ComplaintRecord> {
    let mut slot: HashMap<(String, String), usize> = HashMap::new();
    let mut out: Vec<ComplaintRecord> = Vec::new();
    let mut components: Vec<Vec<String>> = Vec::new();
    for record in records {
        let key = (record.complaint_id.clone(), record.narrative.clone());
        let idx = *slot.entry(key).or_insert_with(|| {
            out.push(record.clone());
            components.push(Vec::new());
            out.len() - 1
        });
        for part in record.component.split(COMPONENT_SEPARATOR) {
            let part = part.trim();
            if !part.is_empty() && !components[idx].iter().any(|c| c == part) {
                components[idx].push(part.to_owned());
            }
        }
    }
    for (record, parts) in out.iter_mut().zip(components) {
        record.component = parts.join(COMPONENT_SEPARATOR);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateField {
    Incident,
    Received,
    /// Received date, falling back to the incident date when absent.
    #[default]
    ReceivedOrIncident,
}

impl DateField {
    pub fn pick(self, record: &ComplaintRecord) -> Option<NaiveDate> {
        match self {
            DateField::Incident => record.incident_date,
            DateField::Received => record.received_date,
            DateField::ReceivedOrIncident => record.received_date.or(record.incident_date),
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct FilterOutcome {
    pub records: Vec<ComplaintRecord>,
    pub out_of_range: usize,
    /// Records dropped because the selected date was missing or unparseable.
    pub undated: usize,
}

pub fn filter_by_date(
    records: Vec<ComplaintRecord>,
    range: DateRange,
    field: DateField,
) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for record in records {
        match field.pick(&record) {
            Some(date) if range.contains(date) => outcome.records.push(record),
            Some(_) => outcome.out_of_range += 1,
            None => outcome.undated += 1,
        }
    }
    outcome
}
