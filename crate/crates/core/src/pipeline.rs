//! End-to-end stage runner.
//!
//! Stages run in a fixed order and talk only through line-delimited JSON
//! files in the output directory:
//!
//! | stage      | reads                              | writes                  |
//! |------------|------------------------------------|-------------------------|
//! | ingest     | complaint file                     | `ingested.jsonl`        |
//! | filter     | `ingested.jsonl`                   | `filtered.jsonl`        |
//! | classify   | `filtered.jsonl`, keyword lexicon  | `classified.jsonl`      |
//! | tag        | `filtered.jsonl`, `classified.jsonl`, tagger inputs | `tagged.jsonl` |
//! | extract    | `tagged.jsonl`                     | `instances.jsonl`       |
//! | categorize | `instances.jsonl`, category lexicon | `categorized.jsonl`    |
//! | report     | `categorized.jsonl`                | `report.<format>`       |
//!
//! Every output is written to `<name>.partial` and renamed once complete.
//! Each finished stage appends one line to `manifest.jsonl`.

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, LinearClassifier, TrainConfig};
use crate::corpus::{load_annotations, ColumnFormat, CorpusError, Tag};
use crate::digest::{derive_seed, sha256_hex};
use crate::ingest::{dedup_complaints, filter_by_date, read_complaints, ComplaintRecord, DateField, DateRange, IngestError, IngestOptions};
use crate::lexicon::{AdasCategory, Lexicon, LexiconError};
use crate::tagger::protocol::{AdapterClient, ClientOptions, Endpoint};
use crate::tagger::{train_tagger, CauseEffectInstance, CrfModel, TaggerConfig, TaggerError};
use crate::taxonomy::{aggregate, render_report, CategorizedInstance, CategoryLexicon, ReportFormat, TaxonomyError};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Filter,
    Classify,
    Tag,
    Extract,
    Categorize,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Filter,
        Stage::Classify,
        Stage::Tag,
        Stage::Extract,
        Stage::Categorize,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Filter => "filter",
            Stage::Classify => "classify",
            Stage::Tag => "tag",
            Stage::Extract => "extract",
            Stage::Categorize => "categorize",
            Stage::Report => "report",
        }
    }

    /// Parses a comma-separated list; the result is in pipeline order.
    pub fn parse_list(text: &str) -> Result<Vec<Stage>, PipelineError> {
        let mut stages: Vec<Stage> = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        stages.sort();
        stages.dedup();
        if stages.is_empty() {
            return Err(PipelineError::Config("empty stage list".into()));
        }
        Ok(stages)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("{path}: line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Data(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{field}: {path} does not exist")]
    MissingPath { field: &'static str, path: PathBuf },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    /// True when the failure came from an external tagger breaking the wire contract.
    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            PipelineError::Stage {
                source: StageError::Tagger(TaggerError::Protocol(_)),
                ..
            }
        )
    }
}

/// Pipeline settings. Relative paths are resolved against the directory of
/// the config file when loaded with [`PipelineConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Flat complaint file in the layout described by `ingest`.
    pub complaints: PathBuf,
    pub ingest: IngestOptions,
    pub date_range: DateRange,
    pub date_field: DateField,
    /// Keyword groups; the shipped list when absent.
    pub keyword_lexicon: Option<PathBuf>,
    /// Category rules; the shipped rules when absent.
    pub category_lexicon: Option<PathBuf>,
    /// Optional trained classifier; adds a probability to each classify record.
    pub classifier_model: Option<PathBuf>,
    /// Trained CRF. When absent the tag stage trains one from `annotations`.
    pub tagger_model: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// External tagger endpoint, `tcp://host:port` or a shell command.
    /// Takes precedence over the CRF.
    pub adapter: Option<String>,
    pub adapter_options: ClientOptions,
    pub tagger: TaggerConfig,
    pub classifier: TrainConfig,
    pub seed: u64,
    pub folds: usize,
    pub negative_ratio: usize,
    pub output_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub top_causes: usize,
    pub top_effects: usize,
    pub top_pairs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            complaints: PathBuf::new(),
            ingest: IngestOptions::default(),
            date_range: DateRange::study_period(),
            date_field: DateField::default(),
            keyword_lexicon: None,
            category_lexicon: None,
            classifier_model: None,
            tagger_model: None,
            annotations: None,
            adapter: None,
            adapter_options: ClientOptions::default(),
            tagger: TaggerConfig::default(),
            classifier: TrainConfig::default(),
            seed: 7,
            folds: 10,
            negative_ratio: 1,
            output_dir: PathBuf::from("out"),
            formats: vec![ReportFormat::Json],
            top_causes: 5,
            top_effects: 5,
            top_pairs: 10,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_relative_to(base);
        }
        Ok(config)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.complaints);
        fix(&mut self.output_dir);
        for p in [
            &mut self.keyword_lexicon,
            &mut self.category_lexicon,
            &mut self.classifier_model,
            &mut self.tagger_model,
            &mut self.annotations,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks every path the selected stages will read, before anything runs.
    pub fn validate(&self, stages: &[Stage]) -> Result<(), PipelineError> {
        let has = |s: Stage| stages.contains(&s);
        let exists = |field: &'static str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(PipelineError::MissingPath {
                    field,
                    path: p.to_path_buf(),
                })
            }
        };
        if self.formats.is_empty() {
            return Err(PipelineError::Config("at least one report format is required".into()));
        }
        if self.date_range.start() > self.date_range.end() {
            return Err(PipelineError::Config("date range start is after its end".into()));
        }
        if has(Stage::Ingest) {
            if self.complaints.as_os_str().is_empty() {
                return Err(PipelineError::Config("complaints path is required".into()));
            }
            exists("complaints", &self.complaints)?;
        }
        if has(Stage::Classify) {
            if let Some(p) = &self.keyword_lexicon {
                exists("keyword_lexicon", p)?;
            }
            if let Some(p) = &self.classifier_model {
                exists("classifier_model", p)?;
            }
        }
        if has(Stage::Tag) && self.adapter.is_none() {
            match (&self.tagger_model, &self.annotations) {
                (Some(p), _) => exists("tagger_model", p)?,
                (None, Some(p)) => exists("annotations", p)?,
                (None, None) => {
                    return Err(PipelineError::Config(
                        "the tag stage needs tagger_model, annotations or adapter".into(),
                    ))
                }
            }
        }
        if has(Stage::Categorize) {
            if let Some(p) = &self.category_lexicon {
                exists("category_lexicon", p)?;
            }
        }
        // intermediates produced by stages that are not part of this run
        for stage in stages {
            for input in intermediate_inputs(*stage) {
                let producer = producer_of(input);
                if !has(producer) {
                    exists("intermediate", &self.output_dir.join(input))?;
                }
            }
        }
        Ok(())
    }
}

const INGESTED: &str = "ingested.jsonl";
const FILTERED: &str = "filtered.jsonl";
const CLASSIFIED: &str = "classified.jsonl";
const TAGGED: &str = "tagged.jsonl";
const INSTANCES: &str = "instances.jsonl";
const CATEGORIZED: &str = "categorized.jsonl";
const TRAINED_TAGGER: &str = "tagger_model.json";
pub const MANIFEST: &str = "manifest.jsonl";

fn intermediate_inputs(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Ingest => &[],
        Stage::Filter => &[INGESTED],
        Stage::Classify => &[FILTERED],
        Stage::Tag => &[FILTERED, CLASSIFIED],
        Stage::Extract => &[TAGGED],
        Stage::Categorize => &[INSTANCES],
        Stage::Report => &[CATEGORIZED],
    }
}

fn producer_of(file: &str) -> Stage {
    match file {
        INGESTED => Stage::Ingest,
        FILTERED => Stage::Filter,
        CLASSIFIED => Stage::Classify,
        TAGGED => Stage::Tag,
        INSTANCES => Stage::Extract,
        _ => Stage::Categorize,
    }
}

/// Result of the keyword (and optional classifier) pass over one complaint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedComplaint {
    pub complaint_id: String,
    pub matched_groups: Vec<String>,
    pub is_adas: bool,
    pub adas_category: Option<AdasCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedComplaint {
    pub complaint_id: String,
    pub adas_category: Option<AdasCategory>,
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: Stage,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seed: u64,
}

pub fn read_manifest(path: &Path) -> io::Result<Vec<ManifestEntry>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
        .collect()
}

fn digest_file(path: &Path) -> io::Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&fs::read(path)?),
    })
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StageError> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| StageError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

/// Writes `bytes` to `<path>.partial`, then renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    {
        let mut w = BufWriter::new(File::create(&partial)?);
        w.write_all(bytes)?;
        w.flush()?;
    }
    fs::rename(&partial, path)
}

fn to_lines<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

struct StageRun {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutcome {
    pub entries: Vec<ManifestEntry>,
}

/// Runs `stages` (all stages when `None`) in pipeline order.
pub fn run_pipeline(config: &PipelineConfig, stages: Option<&[Stage]>) -> Result<PipelineOutcome, PipelineError> {
    let stages: Vec<Stage> = match stages {
        Some(s) => {
            let mut s = s.to_vec();
            s.sort();
            s.dedup();
            s
        }
        None => Stage::ALL.to_vec(),
    };
    config.validate(&stages)?;
    fs::create_dir_all(&config.output_dir).map_err(|e| PipelineError::Config(format!("{}: {e}", config.output_dir.display())))?;

    let mut entries = Vec::new();
    for stage in stages {
        eprintln!("[{stage}] running");
        let run = run_stage(config, stage).map_err(|source| PipelineError::Stage { stage, source })?;
        let entry = (|| -> io::Result<ManifestEntry> {
            let entry = ManifestEntry {
                stage,
                inputs: run.inputs.iter().map(|p| digest_file(p)).collect::<io::Result<_>>()?,
                outputs: run.outputs.iter().map(|p| digest_file(p)).collect::<io::Result<_>>()?,
                seed: run.seed,
            };
            let mut manifest = OpenOptions::new()
                .create(true)
                .append(true)
                .open(config.output_dir.join(MANIFEST))?;
            writeln!(manifest, "{}", serde_json::to_string(&entry).expect("manifest entry serializes"))?;
            Ok(entry)
        })()
        .map_err(|e| PipelineError::Stage {
            stage,
            source: e.into(),
        })?;
        entries.push(entry);
    }
    Ok(PipelineOutcome { entries })
}

fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<StageRun, StageError> {
    let out = |name: &str| config.output_dir.join(name);
    let seed = derive_seed(config.seed, stage.name());
    match stage {
        Stage::Ingest => {
            let outcome = read_complaints(File::open(&config.complaints)?, &config.ingest)?;
            for e in &outcome.errors {
                eprintln!("[ingest] skipped {e}");
            }
            let records = dedup_complaints(outcome.records);
            eprintln!("[ingest] {} unique complaints", records.len());
            write_atomic(&out(INGESTED), &to_lines(&records))?;
            Ok(StageRun {
                inputs: vec![config.complaints.clone()],
                outputs: vec![out(INGESTED)],
                seed,
            })
        }
        Stage::Filter => {
            let records: Vec<ComplaintRecord> = read_lines(&out(INGESTED))?;
            let outcome = filter_by_date(records, config.date_range, config.date_field);
            eprintln!(
                "[filter] kept {}, {} out of range, {} undated",
                outcome.records.len(),
                outcome.out_of_range,
                outcome.undated
            );
            write_atomic(&out(FILTERED), &to_lines(&outcome.records))?;
            Ok(StageRun {
                inputs: vec![out(INGESTED)],
                outputs: vec![out(FILTERED)],
                seed,
            })
        }
        Stage::Classify => {
            let records: Vec<ComplaintRecord> = read_lines(&out(FILTERED))?;
            let mut inputs = vec![out(FILTERED)];
            let lexicon = match &config.keyword_lexicon {
                Some(p) => {
                    inputs.push(p.clone());
                    Lexicon::from_jsonl(&fs::read_to_string(p)?)?
                }
                None => Lexicon::builtin(),
            };
            let classifier = match &config.classifier_model {
                Some(p) => {
                    inputs.push(p.clone());
                    Some(LinearClassifier::from_json(&fs::read_to_string(p)?)?)
                }
                None => None,
            };
            let classified = records
                .par_iter()
                .map(|r| {
                    let m = lexicon.classify(&r.complaint_id, &r.narrative);
                    let classifier_probability = match &classifier {
                        Some(c) => Some(c.predict(&r.narrative)?.0),
                        None => None,
                    };
                    Ok(ClassifiedComplaint {
                        complaint_id: m.complaint_id,
                        matched_groups: m.matched_groups,
                        is_adas: m.is_adas,
                        adas_category: m.adas_category,
                        classifier_probability,
                    })
                })
                .collect::<Result<Vec<_>, ClassifierError>>()?;
            eprintln!(
                "[classify] {} of {} flagged ADAS",
                classified.iter().filter(|c| c.is_adas).count(),
                classified.len()
            );
            write_atomic(&out(CLASSIFIED), &to_lines(&classified))?;
            Ok(StageRun {
                inputs,
                outputs: vec![out(CLASSIFIED)],
                seed,
            })
        }
        Stage::Tag => run_tag(config, seed),
        Stage::Extract => {
            let tagged: Vec<TaggedComplaint> = read_lines(&out(TAGGED))?;
            let instances = tagged
                .into_iter()
                .map(|t| CauseEffectInstance::from_tags(t.complaint_id, t.adas_category, &t.tokens, t.tags))
                .collect::<Result<Vec<_>, TaggerError>>()?;
            write_atomic(&out(INSTANCES), &to_lines(&instances))?;
            Ok(StageRun {
                inputs: vec![out(TAGGED)],
                outputs: vec![out(INSTANCES)],
                seed,
            })
        }
        Stage::Categorize => {
            let instances: Vec<CauseEffectInstance> = read_lines(&out(INSTANCES))?;
            let mut inputs = vec![out(INSTANCES)];
            let lexicon = match &config.category_lexicon {
                Some(p) => {
                    inputs.push(p.clone());
                    CategoryLexicon::from_json(&fs::read_to_string(p)?)?
                }
                None => CategoryLexicon::builtin(),
            };
            let categorized: Vec<CategorizedInstance> = instances.par_iter().map(|i| lexicon.categorize(i)).collect();
            write_atomic(&out(CATEGORIZED), &to_lines(&categorized))?;
            Ok(StageRun {
                inputs,
                outputs: vec![out(CATEGORIZED)],
                seed,
            })
        }
        Stage::Report => {
            let categorized: Vec<CategorizedInstance> = read_lines(&out(CATEGORIZED))?;
            if categorized.is_empty() {
                return Err(StageError::Data("no ADAS complaints to report on".into()));
            }
            let report = aggregate(&categorized, categorized.len() as u64)?.top(
                config.top_causes,
                config.top_effects,
                config.top_pairs,
            );
            let mut outputs = Vec::new();
            for format in &config.formats {
                let ext = match format {
                    ReportFormat::Csv => "csv",
                    ReportFormat::Json => "json",
                    ReportFormat::Markdown => "md",
                };
                let path = out(&format!("report.{ext}"));
                write_atomic(&path, render_report(&report, *format).as_bytes())?;
                outputs.push(path);
            }
            Ok(StageRun {
                inputs: vec![out(CATEGORIZED)],
                outputs,
                seed,
            })
        }
    }
}

fn run_tag(config: &PipelineConfig, seed: u64) -> Result<StageRun, StageError> {
    let out = |name: &str| config.output_dir.join(name);
    let records: Vec<ComplaintRecord> = read_lines(&out(FILTERED))?;
    let classified: Vec<ClassifiedComplaint> = read_lines(&out(CLASSIFIED))?;
    if records.len() != classified.len() {
        return Err(StageError::Data(format!(
            "{} filtered records but {} classify results; rerun classify",
            records.len(),
            classified.len()
        )));
    }
    let mut inputs = vec![out(FILTERED), out(CLASSIFIED)];
    let mut outputs = Vec::new();

    let adas: Vec<(&ComplaintRecord, &ClassifiedComplaint)> =
        records.iter().zip(&classified).filter(|(_, c)| c.is_adas).collect();
    for (r, c) in &adas {
        if r.complaint_id != c.complaint_id {
            return Err(StageError::Data(format!(
                "classify results out of step at complaint {:?}",
                r.complaint_id
            )));
        }
    }
    let token_lists: Vec<Vec<String>> = adas.iter().map(|(r, _)| tokenize(&r.narrative)).collect();

    let tags: Vec<Vec<Tag>> = if let Some(endpoint) = &config.adapter {
        let mut client = AdapterClient::connect(&Endpoint::parse(endpoint), config.adapter_options.clone())
            .map_err(TaggerError::from)?;
        let (nonempty, empty): (Vec<usize>, Vec<usize>) = (0..token_lists.len()).partition(|&i| !token_lists[i].is_empty());
        let batch: Vec<Vec<String>> = nonempty.iter().map(|&i| token_lists[i].clone()).collect();
        let answered = client.tag_batch(&batch).map_err(TaggerError::from)?;
        let mut tags = vec![Vec::new(); token_lists.len()];
        for (i, t) in nonempty.into_iter().zip(answered) {
            tags[i] = t;
        }
        debug_assert!(empty.iter().all(|&i| tags[i].is_empty()));
        tags
    } else {
        let model = match &config.tagger_model {
            Some(p) => {
                inputs.push(p.clone());
                CrfModel::from_json(&fs::read_to_string(p)?)?
            }
            None => {
                let path = config.annotations.as_ref().expect("validated");
                inputs.push(path.clone());
                let corpus = load_annotations(&fs::read_to_string(path)?, &ColumnFormat::default())?;
                let model = train_tagger(
                    &corpus,
                    &TaggerConfig {
                        seed,
                        ..config.tagger.clone()
                    },
                )?;
                write_atomic(&out(TRAINED_TAGGER), model.to_json().as_bytes())?;
                outputs.push(out(TRAINED_TAGGER));
                model
            }
        };
        token_lists
            .par_iter()
            .map(|t| crate::tagger::viterbi(&model, t))
            .collect()
    };

    let tagged: Vec<TaggedComplaint> = adas
        .iter()
        .zip(token_lists)
        .zip(tags)
        .map(|(((r, c), tokens), tags)| TaggedComplaint {
            complaint_id: r.complaint_id.clone(),
            adas_category: c.adas_category,
            tokens,
            tags,
        })
        .collect();
    write_atomic(&out(TAGGED), &to_lines(&tagged))?;
    outputs.insert(0, out(TAGGED));
    Ok(StageRun { inputs, outputs, seed })
}
