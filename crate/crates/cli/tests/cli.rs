use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cemine")
}

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/demo").join(name)
}

fn cemine(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = cemine(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn run_demo(dir: &Path) {
    let config = demo("config.json");
    ok(&["--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "run"]);
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(cemine(&["--help"]).status.code(), Some(0));
    assert_eq!(cemine(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cemine(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(cemine(&["report"]).status.code(), Some(1));
    assert_eq!(cemine(&["--format", "xml", "report", "x"]).status.code(), Some(1));
    assert_eq!(cemine(&["run"]).status.code(), Some(1));
    assert_eq!(cemine(&["tag", "--text", "x"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cemine(&["extract", "/no/such/file.jsonl"]).status.code(), Some(2));
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"complaint_id\":\"1\",\"tokens\":[\"a\"],\"tags\":[\"C\",\"E\"]}\n").unwrap();
    assert_eq!(cemine(&["extract", s(&bad)]).status.code(), Some(2));
}

#[test]
fn protocol_errors_exit_three() {
    // Answers with one tag no matter how many tokens were sent.
    let adapter = r#"sh -c 'read l; echo "{\"id\":\"r-0\",\"tags\":[\"O\"]}"'"#;
    let out = cemine(&["tag", "--text", "the radar failed", "--adapter", adapter]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("r-0"));

    let out = cemine(&["adapter-check", "--adapter", "cat", "--timeout-ms", "500"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn step_by_step_matches_pipeline_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    run_demo(&run);

    let step = dir.path().join("step");
    fs::create_dir_all(&step).unwrap();
    let write = |name: &str, bytes: Vec<u8>| {
        let p = step.join(name);
        fs::write(&p, bytes).unwrap();
        p
    };
    let ingested = write("ingested.jsonl", ok(&["ingest", s(&demo("complaints.tsv"))]));
    let filtered = write("filtered.jsonl", ok(&["filter", s(&ingested)]));
    let classified = write("classified.jsonl", ok(&["classify", s(&filtered)]));
    let model = run.join("tagger_model.json");
    let tagged = write(
        "tagged.jsonl",
        ok(&["tag", s(&filtered), "--classified", s(&classified), "--model", s(&model)]),
    );
    let instances = write("instances.jsonl", ok(&["extract", s(&tagged)]));
    let categorized = write("categorized.jsonl", ok(&["categorize", s(&instances)]));
    let report = write("report.json", ok(&["--format", "json", "report", s(&categorized)]));

    for p in [&ingested, &filtered, &classified, &tagged, &instances, &categorized, &report] {
        let name = p.file_name().unwrap();
        assert_eq!(fs::read(p).unwrap(), fs::read(run.join(name)).unwrap(), "{name:?} differs");
    }
}

#[test]
fn report_formats() {
    let dir = tempfile::tempdir().unwrap();
    run_demo(dir.path());
    let categorized = dir.path().join("categorized.jsonl");
    let csv = String::from_utf8(ok(&["--format", "csv", "report", s(&categorized), "--top-causes", "2"])).unwrap();
    assert!(csv.starts_with("table,rank,category,count,percentage\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("causes,")).count(), 2);
    let md = String::from_utf8(ok(&["report", s(&categorized)])).unwrap();
    assert!(md.starts_with("### causes (n = "));
    assert!(md.contains("| Rank | Cause | Effect |"));
}

#[test]
fn served_model_passes_adapter_check_and_matches_local_tagging() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("tagger_model.json");
    fs::write(
        &model,
        ok(&["train-tagger", s(&demo("annotations.tsv")), "--epochs", "5"]),
    )
    .unwrap();
    let server = format!("'{}' serve --model '{}'", bin(), s(&model));
    ok(&["adapter-check", "--adapter", &server]);

    let text = "the lane camera was blocked and the car swerved";
    let local: serde_json::Value = serde_json::from_slice(&ok(&["tag", "--text", text, "--model", s(&model)])).unwrap();
    let remote: serde_json::Value = serde_json::from_slice(&ok(&["tag", "--text", text, "--adapter", &server])).unwrap();
    assert_eq!(local, remote);
}

#[test]
fn converters_write_column_format() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dmv.csv");
    fs::write(&csv, "id,text,cause,effect\n7,the sensor failed and the car stopped,the sensor failed,the car stopped\n").unwrap();
    let out = String::from_utf8(ok(&["convert-dmv", s(&csv)])).unwrap();
    assert!(out.contains("sensor\tC"), "{out}");
    assert!(out.contains("stopped\tE"), "{out}");

    let sem = dir.path().join("semeval.txt");
    fs::write(
        &sem,
        "1\t\"The <e1>fire</e1> caused the <e2>smoke</e2>.\"\nCause-Effect(e1,e2)\nComment:\n\n",
    )
    .unwrap();
    let out = String::from_utf8(ok(&["convert-semeval", s(&sem)])).unwrap();
    assert!(out.contains("fire\tC") && out.contains("smoke\tE"), "{out}");
}

#[test]
fn agreement_of_identical_files_is_one() {
    let a = demo("annotations.tsv");
    let v: serde_json::Value = serde_json::from_slice(&ok(&["agreement", s(&a), s(&a)])).unwrap();
    assert_eq!(v["mean"].as_f64(), Some(1.0));
}

#[test]
fn stage_subset_records_seed_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo("config.json");
    ok(&["--config", s(&config), "--out", s(dir.path()), "--seed", "11", "run", "--stages", "ingest,filter"]);
    let manifest = fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    assert!(manifest.lines().all(|l| l.contains("\"seed\":")));
}

#[test]
fn filter_with_lexicon_writes_match_results() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = dir.path().join("lexicon.jsonl");
    fs::write(
        &lexicon,
        r#"{"group_id": "lka", "adas_category": "LaneKeepAssist", "keywords": ["lane departure"]}
"#,
    )
    .unwrap();
    let records = dir.path().join("records.jsonl");
    fs::write(&records, ok(&["ingest", s(&demo("complaints.tsv"))])).unwrap();
    let out = ok(&["filter", s(&records), "--start", "2000-01-01", "--end", "2030-01-01", "--lexicon", s(&lexicon)]);
    let lines: Vec<serde_json::Value> =
        String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    for m in &lines {
        let flagged = m["is_adas"].as_bool().unwrap();
        assert_eq!(flagged, !m["matched_groups"].as_array().unwrap().is_empty());
    }
}
