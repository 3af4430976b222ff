use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cemine_core::classifier::{cross_validate, subsample_negatives, train_classifier, LabeledText, LinearClassifier};
use cemine_core::corpus::{
    convert::{convert_dmv, convert_semeval},
    inter_rater_agreement, load_annotations, mean_pairwise_agreement, write_annotations,
    ColumnFormat,
};
use cemine_core::ingest::{
    dedup_complaints, filter_by_date, parse_date, read_complaints, read_jsonl, write_jsonl, DateField, DateRange,
    IngestOptions,
};
use cemine_core::lexicon::Lexicon;
use cemine_core::pipeline::{run_pipeline, ClassifiedComplaint, PipelineConfig, PipelineError, Stage, TaggedComplaint};
use cemine_core::tagger::protocol::{check_adapter, serve, AdapterClient, ClientOptions, Endpoint, ProtocolError, ReferenceAdapter};
use cemine_core::tagger::{cross_validate_tagger, decode_spans, train_tagger, CauseEffectInstance, CrfModel, TaggerError};
use cemine_core::taxonomy::{aggregate, render_report, CategorizedInstance, CategoryLexicon, ReportFormat};
use cemine_core::text::tokenize;

#[derive(Parser)]
#[command(name = "cemine", version, about = "Cause/effect mining over vehicle complaint narratives")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Commands write to stdout when it is not given.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format: csv, json or markdown.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a flat complaint file into deduplicated JSON lines.
    Ingest {
        input: PathBuf,
        /// The file starts with a header row naming its columns.
        #[arg(long)]
        header: bool,
        #[arg(long, default_value_t = '\t')]
        delimiter: char,
    },
    /// Keep complaints dated inside the study window.
    Filter {
        input: PathBuf,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
        /// incident, received or received_or_incident.
        #[arg(long, default_value = "received_or_incident")]
        date_field: String,
        /// Write keyword match results for the kept complaints instead of the records.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Fit the ADAS / non-ADAS classifier on labeled JSON lines.
    TrainClassifier {
        data: PathBuf,
        /// Negatives kept per positive.
        #[arg(long)]
        ratio: Option<usize>,
    },
    /// Flag ADAS complaints by keyword and optionally by a classifier.
    Classify {
        input: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, conflicts_with = "adapter")]
        model: Option<PathBuf>,
        #[command(flatten)]
        adapter: AdapterArgs,
    },
    /// Train the CRF tagger on a C/E/O annotation file.
    TrainTagger {
        corpus: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        l2: Option<f64>,
    },
    /// Tag ADAS complaints (JSON lines from classify's input) or raw text.
    Tag {
        /// Complaint records; only those listed as ADAS in --classified are tagged.
        input: Option<PathBuf>,
        #[arg(long)]
        classified: Option<PathBuf>,
        /// Tag one narrative instead of a file.
        #[arg(long, conflicts_with = "input")]
        text: Option<String>,
        #[arg(long, conflicts_with = "adapter")]
        model: Option<PathBuf>,
        #[command(flatten)]
        adapter: AdapterArgs,
    },
    /// Turn tagged complaints into cause/effect span instances.
    Extract { input: PathBuf },
    /// Assign cause and effect categories to span instances.
    Categorize {
        input: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Ranked cause, effect and pair tables.
    Report {
        input: PathBuf,
        /// Percentage denominator; defaults to the number of instances.
        #[arg(long)]
        denominator: Option<u64>,
        #[arg(long, default_value_t = 5)]
        top_causes: usize,
        #[arg(long, default_value_t = 5)]
        top_effects: usize,
        #[arg(long, default_value_t = 10)]
        top_pairs: usize,
    },
    /// Stratified k-fold evaluation of the classifier.
    EvalClassifier {
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        ratio: Option<usize>,
    },
    /// k-fold evaluation of the CRF tagger.
    EvalTagger {
        corpus: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Token-level agreement between annotators of the same sentences.
    Agreement {
        #[arg(required = true, num_args = 2..)]
        raters: Vec<PathBuf>,
    },
    /// Convert a cause/effect CSV (id,text,cause,effect) to C/E/O annotations.
    ConvertDmv { input: PathBuf },
    /// Convert relation-classification data with e1/e2 markers to C/E/O annotations.
    ConvertSemeval {
        input: PathBuf,
        #[arg(long)]
        keep_non_causal: bool,
    },
    /// Check that an external tagger speaks the wire protocol.
    AdapterCheck {
        #[command(flatten)]
        adapter: AdapterArgs,
    },
    /// Serve a trained CRF (and classifier) over the wire protocol.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Listen on this TCP address instead of stdin/stdout.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run the pipeline described by --config.
    Run {
        /// Comma-separated subset of ingest,filter,classify,tag,extract,categorize,report.
        #[arg(long)]
        stages: Option<String>,
    },
}

#[derive(Args, Default)]
struct AdapterArgs {
    /// External adapter: `tcp://host:port` or a command speaking on stdio.
    #[arg(long)]
    adapter: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 16)]
    max_in_flight: usize,
}

impl AdapterArgs {
    fn connect(&self) -> Result<Option<AdapterClient>> {
        let Some(endpoint) = &self.adapter else {
            return Ok(None);
        };
        let options = ClientOptions {
            timeout_ms: self.timeout_ms,
            max_in_flight: self.max_in_flight,
        };
        Ok(Some(AdapterClient::connect(&Endpoint::parse(endpoint), options)?))
    }
}

/// Bad flags or arguments: exit status 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if cause.is::<ProtocolError>() {
            return 3;
        }
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            if p.is_protocol() {
                return 3;
            }
        }
        if let Some(TaggerError::Protocol(_)) = cause.downcast_ref::<TaggerError>() {
            return 3;
        }
    }
    2
}

struct Ctx {
    config: PipelineConfig,
    out: Option<PathBuf>,
    format: Option<ReportFormat>,
}

impl Ctx {
    /// Writes `bytes` to `<out>/<name>`, or to stdout without `--out`.
    fn emit(&self, name: &str, bytes: &[u8]) -> Result<()> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(name);
                fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            None => io::stdout().lock().write_all(bytes)?,
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(name, text.as_bytes())
    }

    fn emit_lines<T: Serialize>(&self, name: &str, items: &[T]) -> Result<()> {
        let mut out = Vec::new();
        for item in items {
            serde_json::to_writer(&mut out, item)?;
            out.push(b'\n');
        }
        self.emit(name, &out)
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

fn load_crf(path: &Path) -> Result<CrfModel> {
    CrfModel::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<Vec<cemine_core::AnnotatedSentence>> {
    load_annotations(&read(path)?, &ColumnFormat::default()).with_context(|| format!("reading {}", path.display()))
}

fn labeled_data(ctx: &Ctx, path: &Path, ratio: Option<usize>) -> Result<Vec<LabeledText>> {
    let data: Vec<LabeledText> = read_lines(path)?;
    match ratio {
        Some(r) => Ok(subsample_negatives(&data, r, ctx.seed())?),
        None => Ok(data),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let format = cli
        .format
        .as_deref()
        .map(|f| f.parse::<ReportFormat>().map_err(|e| usage(e.to_string())))
        .transpose()?;
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(f) = format {
        config.formats = vec![f];
    }
    let ctx = Ctx {
        config,
        out: cli.out.clone(),
        format,
    };

    match cli.command {
        Command::Ingest {
            input,
            header,
            delimiter,
        } => {
            let options = IngestOptions {
                has_header: header,
                delimiter,
                ..ctx.config.ingest.clone()
            };
            let file = fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let outcome = read_complaints(file, &options)?;
            for e in &outcome.errors {
                eprintln!("skipped {e}");
            }
            let records = dedup_complaints(outcome.records);
            let mut out = Vec::new();
            write_jsonl(&mut out, &records)?;
            ctx.emit("ingested.jsonl", &out)
        }
        Command::Filter {
            input,
            start,
            end,
            date_field,
            lexicon,
        } => {
            let date = |s: &Option<String>, default| match s {
                Some(s) => parse_date(s).ok_or_else(|| usage(format!("cannot parse date {s:?}"))),
                None => Ok(default),
            };
            let range = DateRange::new(
                date(&start, ctx.config.date_range.start())?,
                date(&end, ctx.config.date_range.end())?,
            )
            .map_err(|e| usage(e.to_string()))?;
            let field: DateField = serde_json::from_value(serde_json::Value::String(date_field.clone()))
                .map_err(|_| usage(format!("unknown date field {date_field:?}")))?;
            let outcome = filter_by_date(read_jsonl(&read(&input)?)?, range, field);
            eprintln!(
                "kept {}, {} out of range, {} undated",
                outcome.records.len(),
                outcome.out_of_range,
                outcome.undated
            );
            if let Some(p) = lexicon {
                let lexicon = Lexicon::from_jsonl(&read(&p)?)?;
                let matches: Vec<_> =
                    outcome.records.iter().map(|r| lexicon.classify(&r.complaint_id, &r.narrative)).collect();
                return ctx.emit_lines("matches.jsonl", &matches);
            }
            let mut out = Vec::new();
            write_jsonl(&mut out, &outcome.records)?;
            ctx.emit("filtered.jsonl", &out)
        }
        Command::TrainClassifier { data, ratio } => {
            let data = labeled_data(&ctx, &data, ratio.or(Some(ctx.config.negative_ratio)).filter(|_| ratio.is_some()))?;
            let config = cemine_core::classifier::TrainConfig {
                seed: ctx.seed(),
                ..ctx.config.classifier.clone()
            };
            let model = train_classifier(&data, &config)?;
            ctx.emit("classifier_model.json", model.to_json().as_bytes())
        }
        Command::Classify {
            input,
            lexicon,
            model,
            adapter,
        } => {
            let records = read_jsonl(&read(&input)?)?;
            let lexicon = match lexicon {
                Some(p) => Lexicon::from_jsonl(&read(&p)?)?,
                None => Lexicon::builtin(),
            };
            let model = model.map(|p| -> Result<_> { Ok(LinearClassifier::from_json(&read(&p)?)?) }).transpose()?;
            let probabilities: Option<Vec<f64>> = match (adapter.connect()?, &model) {
                (Some(mut client), _) => {
                    let batch: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.narrative)).collect();
                    Some(client.classify_batch(&batch)?.into_iter().map(|(_, p)| p).collect())
                }
                (None, Some(m)) => Some(
                    records
                        .iter()
                        .map(|r| m.predict(&r.narrative).map(|(p, _)| p))
                        .collect::<Result<_, _>>()?,
                ),
                (None, None) => None,
            };
            let classified: Vec<ClassifiedComplaint> = records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let m = lexicon.classify(&r.complaint_id, &r.narrative);
                    ClassifiedComplaint {
                        complaint_id: m.complaint_id,
                        matched_groups: m.matched_groups,
                        is_adas: m.is_adas,
                        adas_category: m.adas_category,
                        classifier_probability: probabilities.as_ref().map(|p| p[i]),
                    }
                })
                .collect();
            ctx.emit_lines("classified.jsonl", &classified)
        }
        Command::TrainTagger {
            corpus,
            epochs,
            learning_rate,
            l2,
        } => {
            let corpus = load_corpus(&corpus)?;
            let mut config = ctx.config.tagger.clone();
            config.seed = ctx.seed();
            if let Some(e) = epochs {
                config.epochs = e;
            }
            if let Some(lr) = learning_rate {
                config.learning_rate = lr;
            }
            if let Some(l2) = l2 {
                config.l2 = l2;
            }
            let model = train_tagger(&corpus, &config)?;
            for (i, loss) in model.metadata.epoch_losses.iter().enumerate() {
                eprintln!("epoch {:>3}  loss {loss:.6}", i + 1);
            }
            ctx.emit("tagger_model.json", model.to_json().as_bytes())
        }
        Command::Tag {
            input,
            classified,
            text,
            model,
            adapter,
        } => {
            let mut client = adapter.connect()?;
            let model = match (&client, model) {
                (Some(_), _) => None,
                (None, Some(p)) => Some(load_crf(&p)?),
                (None, None) => return Err(usage("tag needs --model or --adapter")),
            };
            let mut tag_all = |batch: &[Vec<String>]| -> Result<Vec<Vec<cemine_core::Tag>>> {
                match (&mut client, &model) {
                    (Some(c), _) => {
                        let (idx, nonempty): (Vec<usize>, Vec<Vec<String>>) = batch
                            .iter()
                            .enumerate()
                            .filter(|(_, t)| !t.is_empty())
                            .map(|(i, t)| (i, t.clone()))
                            .unzip();
                        let mut out = vec![Vec::new(); batch.len()];
                        for (i, tags) in idx.into_iter().zip(c.tag_batch(&nonempty)?) {
                            out[i] = tags;
                        }
                        Ok(out)
                    }
                    (None, Some(m)) => Ok(batch.iter().map(|t| cemine_core::tagger::viterbi(m, t)).collect()),
                    (None, None) => unreachable!(),
                }
            };
            if let Some(text) = text {
                let tokens = tokenize(&text);
                let tags = tag_all(std::slice::from_ref(&tokens))?.remove(0);
                let (causes, effects) = decode_spans(&tokens, &tags)?;
                return ctx.emit_json(
                    "tagged.json",
                    &serde_json::json!({"tokens": tokens, "tags": tags, "cause_spans": causes, "effect_spans": effects}),
                );
            }
            let input = input.ok_or_else(|| usage("tag needs an input file or --text"))?;
            let records = read_jsonl(&read(&input)?)?;
            let selected: Vec<(String, Option<cemine_core::AdasCategory>, String)> = match classified {
                Some(p) => {
                    let flags: Vec<ClassifiedComplaint> = read_lines(&p)?;
                    if flags.len() != records.len() {
                        bail!("{} records but {} classify results", records.len(), flags.len());
                    }
                    records
                        .into_iter()
                        .zip(flags)
                        .filter(|(_, c)| c.is_adas)
                        .map(|(r, c)| (r.complaint_id, c.adas_category, r.narrative))
                        .collect()
                }
                None => records.into_iter().map(|r| (r.complaint_id, None, r.narrative)).collect(),
            };
            let batch: Vec<Vec<String>> = selected.iter().map(|(_, _, n)| tokenize(n)).collect();
            let tags = tag_all(&batch)?;
            let tagged: Vec<TaggedComplaint> = selected
                .into_iter()
                .zip(batch)
                .zip(tags)
                .map(|(((complaint_id, adas_category, _), tokens), tags)| TaggedComplaint {
                    complaint_id,
                    adas_category,
                    tokens,
                    tags,
                })
                .collect();
            ctx.emit_lines("tagged.jsonl", &tagged)
        }
        Command::Extract { input } => {
            let tagged: Vec<TaggedComplaint> = read_lines(&input)?;
            let instances = tagged
                .into_iter()
                .map(|t| CauseEffectInstance::from_tags(t.complaint_id, t.adas_category, &t.tokens, t.tags))
                .collect::<Result<Vec<_>, _>>()?;
            ctx.emit_lines("instances.jsonl", &instances)
        }
        Command::Categorize { input, lexicon } => {
            let instances: Vec<CauseEffectInstance> = read_lines(&input)?;
            let lexicon = match lexicon.or(ctx.config.category_lexicon.clone()) {
                Some(p) => CategoryLexicon::from_json(&read(&p)?)?,
                None => CategoryLexicon::builtin(),
            };
            let categorized: Vec<CategorizedInstance> = instances.iter().map(|i| lexicon.categorize(i)).collect();
            ctx.emit_lines("categorized.jsonl", &categorized)
        }
        Command::Report {
            input,
            denominator,
            top_causes,
            top_effects,
            top_pairs,
        } => {
            let categorized: Vec<CategorizedInstance> = read_lines(&input)?;
            let denominator = denominator.unwrap_or(categorized.len() as u64);
            if denominator == 0 {
                return Err(usage("report needs a positive denominator (no instances found)"));
            }
            let report = aggregate(&categorized, denominator)?.top(top_causes, top_effects, top_pairs);
            let format = ctx.format.unwrap_or(ReportFormat::Markdown);
            let ext = match format {
                ReportFormat::Csv => "csv",
                ReportFormat::Json => "json",
                ReportFormat::Markdown => "md",
            };
            ctx.emit(&format!("report.{ext}"), render_report(&report, format).as_bytes())
        }
        Command::EvalClassifier { data, folds, ratio } => {
            let data = labeled_data(&ctx, &data, ratio)?;
            let report = cross_validate(&data, folds, ctx.seed(), &ctx.config.classifier)?;
            eprintln!(
                "pooled P={:.3} R={:.3} F1={:.3}",
                report.pooled.precision, report.pooled.recall, report.pooled.f1
            );
            ctx.emit_json("classifier_cv.json", &report)
        }
        Command::EvalTagger { corpus, folds, epochs } => {
            let corpus = load_corpus(&corpus)?;
            let mut config = ctx.config.tagger.clone();
            if let Some(e) = epochs {
                config.epochs = e;
            }
            let report = cross_validate_tagger(&corpus, folds, ctx.seed(), &config)?;
            let m = &report.pooled.macro_average;
            eprintln!(
                "macro P={:.3} R={:.3} F1={:.3} loss={:.3}",
                m.precision,
                m.recall,
                m.f1,
                report.pooled.loss.unwrap_or(f64::NAN)
            );
            ctx.emit_json("tagger_cv.json", &report)
        }
        Command::Agreement { raters } => {
            let corpora = raters.iter().map(|p| load_corpus(p)).collect::<Result<Vec<_>>>()?;
            let mut pairs = Vec::new();
            for i in 0..corpora.len() {
                for j in i + 1..corpora.len() {
                    pairs.push(serde_json::json!({
                        "a": raters[i].display().to_string(),
                        "b": raters[j].display().to_string(),
                        "agreement": inter_rater_agreement(&corpora[i], &corpora[j])?,
                    }));
                }
            }
            let mean = mean_pairwise_agreement(&corpora)?;
            ctx.emit_json("agreement.json", &serde_json::json!({"mean": mean, "pairs": pairs}))
        }
        Command::ConvertDmv { input } => {
            let sentences = convert_dmv(&read(&input)?)?;
            ctx.emit("dmv.tsv", write_annotations(&sentences)?.as_bytes())
        }
        Command::ConvertSemeval { input, keep_non_causal } => {
            let sentences = convert_semeval(&read(&input)?, keep_non_causal)?;
            ctx.emit("semeval.tsv", write_annotations(&sentences)?.as_bytes())
        }
        Command::AdapterCheck { adapter } => {
            let mut client = adapter.connect()?.ok_or_else(|| usage("adapter-check needs --adapter"))?;
            let report = check_adapter(&mut client);
            for c in &report.checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            ctx.emit_json("adapter_check.json", &report)?;
            if !report.passed() {
                return Err(ProtocolError::Nonconformant {
                    failed: report.checks.iter().filter(|c| !c.passed).count(),
                    total: report.checks.len(),
                }
                .into());
            }
            Ok(())
        }
        Command::Serve {
            model,
            classifier,
            listen,
        } => {
            let adapter = ReferenceAdapter {
                tagger: model.map(|p| load_crf(&p)).transpose()?,
                classifier: classifier
                    .map(|p| LinearClassifier::from_json(&read(&p)?).map_err(anyhow::Error::from))
                    .transpose()?,
            };
            if adapter.tagger.is_none() && adapter.classifier.is_none() {
                return Err(usage("serve needs --model and/or --classifier"));
            }
            match listen {
                None => serve(io::stdin().lock(), io::stdout().lock(), |r| adapter.handle(r))?,
                Some(addr) => {
                    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    for stream in listener.incoming() {
                        let stream = stream?;
                        let reader = BufReader::new(stream.try_clone()?);
                        if let Err(e) = serve(reader, stream, |r| adapter.handle(r)) {
                            eprintln!("connection closed: {e}");
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Run { stages } => {
            if cli.config.is_none() {
                return Err(usage("run needs --config"));
            }
            let stages = stages
                .as_deref()
                .map(Stage::parse_list)
                .transpose()
                .map_err(|e| usage(e.to_string()))?;
            let outcome = run_pipeline(&ctx.config, stages.as_deref())?;
            for e in &outcome.entries {
                for o in &e.outputs {
                    eprintln!("[{}] {}  {}", e.stage, o.sha256, o.path);
                }
            }
            Ok(())
        }
    }
}
