mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::recorded;
use serde_json::Value;
use t2bm::stub::{StubConfig, StubServer};

fn t2bm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_t2bm"))
        .args(args)
        .env_remove("T2BM_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The single run directory created under `root`.
fn only_child(root: &Path) -> PathBuf {
    let mut entries: Vec<_> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1, "{entries:?}");
    entries.pop().unwrap()
}

/// Relative path to content for every file under `dir`.
fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, acc: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, acc);
            } else {
                acc.insert(p.strip_prefix(base).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

fn generate(out: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let fixtures = recorded::generate_dir();
    let mut args = vec!["generate", "--prompt", recorded::PROMPT, "--fixtures", path_str(&fixtures), "--out", path_str(out)];
    args.extend_from_slice(extra);
    let o = t2bm(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (o, only_child(out))
}

#[test]
fn generate_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, dir) = generate(tmp.path(), &[]);
    let files = tree(&dir);
    for name in ["trace.json", "interlayer.json", "repairs.json", "building.voxels.json", "building.mcfunction", "report.json"] {
        assert!(files.contains_key(name), "{name} missing");
    }
    assert!(stdout(&o).contains("C=true S=true"));
    let report: Value = serde_json::from_slice(&files["report.json"]).unwrap();
    assert_eq!(report["sections"], 13);
    let trace: Value = serde_json::from_slice(&files["trace.json"]).unwrap();
    assert_eq!(trace["transport"], "recorded");
    assert_eq!(trace["attempts"], 1);
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (_, da) = generate(a.path(), &[]);
    let (_, db) = generate(b.path(), &[]);
    assert_eq!(tree(&da), tree(&db));
    // the directory name differs only in its timestamp prefix
    let suffix = |p: &Path| p.file_name().unwrap().to_string_lossy().rsplit('-').next().unwrap().to_owned();
    assert_eq!(suffix(&da), suffix(&db));
}

#[test]
fn stages_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, dir) = generate(&tmp.path().join("run"), &[]);
    let trace: Value = serde_json::from_slice(&std::fs::read(dir.join("trace.json")).unwrap()).unwrap();
    let raw = tmp.path().join("raw.txt");
    std::fs::write(&raw, trace["interlayer_text"].as_str().unwrap()).unwrap();

    let repaired = tmp.path().join("repaired.json");
    assert_eq!(code(&t2bm(&["repair", path_str(&raw), "--out", path_str(&repaired)])), 0);
    let read = |p: PathBuf| std::fs::read(p).unwrap();
    assert_eq!(read(repaired.clone()), read(dir.join("interlayer.json")));

    let dump = tmp.path().join("dump.json");
    assert_eq!(code(&t2bm(&["export", path_str(&repaired), "--target", "dump", "--out", path_str(&dump)])), 0);
    assert_eq!(read(dump.clone()), read(dir.join("building.voxels.json")));

    let script = tmp.path().join("script.mcfunction");
    assert_eq!(code(&t2bm(&["export", path_str(&dump), "--target", "script", "--out", path_str(&script)])), 0);
    assert_eq!(read(script), read(dir.join("building.mcfunction")));

    let assessed = tmp.path().join("assess.json");
    let o = t2bm(&["assess", path_str(&dump), "--prompt", recorded::PROMPT, "--out", path_str(&assessed)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let standalone: Value = serde_json::from_slice(&read(assessed)).unwrap();
    let report: Value = serde_json::from_slice(&read(dir.join("report.json"))).unwrap();
    assert_eq!(standalone, report["assessment"]);
}

#[test]
fn no_refine_skips_refinement() {
    let reply = format!("```json\n{}```", common::read_fixture("two_section.json"));
    let server = StubServer::start(StubConfig { chat_reply: Some(reply), ..StubConfig::default() }).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let o = t2bm(&[
        "generate", "--prompt", recorded::PROMPT, "--no-refine", "--base-url", &server.url(), "--out", path_str(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = server.transcript();
    assert_eq!(t.len(), 1);
    let body: Value = serde_json::from_str(&t[0].body).unwrap();
    let content = body["messages"][0]["content"].as_str().unwrap();
    assert!(content.starts_with(&format!("Refined Description: \n{}\n", recorded::PROMPT)));
    let trace: Value = serde_json::from_slice(&std::fs::read(only_child(tmp.path()).join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["refine"], false);
    assert_eq!(trace["request_keys"].as_array().unwrap().len(), 1);
}

#[test]
fn with_refine_sends_two_requests() {
    let reply = format!("```json\n{}```", common::read_fixture("two_section.json"));
    let server = StubServer::start(StubConfig { chat_reply: Some(reply), ..StubConfig::default() }).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let o = t2bm(&["generate", "--prompt", recorded::PROMPT, "--base-url", &server.url(), "--out", path_str(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = server.transcript();
    assert_eq!(t.len(), 2);
    let body: Value = serde_json::from_str(&t[0].body).unwrap();
    assert!(body["messages"][0]["content"].as_str().unwrap().starts_with("User Input = \"A wooden house with windows\""));
}

#[test]
fn bad_registry_is_a_startup_error() {
    let server = StubServer::start(StubConfig::default()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let o = t2bm(&[
        "generate", "--prompt", "a hut", "--registry", "/no/such/registry.txt", "--base-url", &server.url(), "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(server.transcript().is_empty());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn generation_failure_exit_code() {
    let server = StubServer::start(StubConfig { chat_reply: Some("no json".into()), ..StubConfig::default() }).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let o = t2bm(&["generate", "--prompt", "a hut", "--no-refine", "--base-url", &server.url(), "--out", path_str(tmp.path())]);
    assert_eq!(code(&o), 4);
    let files = tree(&only_child(tmp.path()));
    assert!(files.contains_key("trace.json") && files.contains_key("responses.json"));
}

#[test]
fn missing_prompt_is_usage_error() {
    assert_eq!(code(&t2bm(&["generate"])), 2);
    assert_eq!(code(&t2bm(&["no-such-command"])), 2);
}

#[test]
fn validate_exit_codes() {
    let fx = common::fixtures();
    assert_eq!(code(&t2bm(&["validate", path_str(&fx.join("wooden_house.json"))])), 0);
    assert_eq!(code(&t2bm(&["validate", path_str(&fx.join("repair_cases.json"))])), 1);
    assert_eq!(code(&t2bm(&["validate", "--strict", path_str(&fx.join("two_section_raw.txt"))])), 6);
    assert_eq!(code(&t2bm(&["validate", path_str(&fx.join("two_section_raw.txt"))])), 0);
    assert_eq!(code(&t2bm(&["validate", "/no/such/file.json"])), 6);
}

#[test]
fn repair_logs_red_bed() {
    let o = t2bm(&["repair", path_str(&common::fixtures().join("repair_cases.json"))]);
    assert_eq!(code(&o), 0);
    let log = stderr(&o);
    assert!(log.lines().any(|l| l.contains("Red Bed") && l.contains("red_bed")), "{log}");
    assert!(stdout(&o).contains("\"red_bed\""));
}

#[test]
fn assess_single_block_is_negative() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("one.json");
    std::fs::write(
        &dump,
        "{\"version\":1,\"dims\":[1,1,1],\"origin\":[0,0,0],\"blocks\":[\n{\"x\":0,\"y\":0,\"z\":0,\"id\":\"minecraft:stone\"}\n]}\n",
    )
    .unwrap();
    let o = t2bm(&["assess", path_str(&dump)]);
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["completeness"], false);
}

#[test]
fn export_http_through_stub() {
    let server = StubServer::start(StubConfig::default()).unwrap();
    let input = common::fixtures().join("two_section.json");
    let o = t2bm(&["export", path_str(&input), "--target", "http", "--endpoint", &server.url(), "--batch-size", "50"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let result: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(result["sent"], 267);
    assert_eq!(result["requests"], 6);
    assert_eq!(server.transcript().len(), 7);
}

#[test]
fn export_to_dead_endpoint_fails() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let input = common::fixtures().join("two_section.json");
    let endpoint = format!("http://127.0.0.1:{port}");
    assert_eq!(code(&t2bm(&["export", path_str(&input), "--target", "http", "--endpoint", &endpoint])), 5);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("t2bm.toml");
    std::fs::write(
        &cfg,
        format!(
            "prompt = \"{}\"\nfixtures = \"{}\"\ntargets = [\"script\"]\nout = \"{}\"\n",
            recorded::PROMPT,
            path_str(&recorded::generate_dir()),
            path_str(&tmp.path().join("from-file"))
        ),
    )
    .unwrap();
    let o = t2bm(&["--config", path_str(&cfg), "generate", "--out", path_str(&tmp.path().join("from-flag"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!tmp.path().join("from-file").exists());
    let files = tree(&only_child(&tmp.path().join("from-flag")));
    assert!(files.contains_key("building.mcfunction"));
    assert!(!files.contains_key("building.voxels.json"));

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&t2bm(&["--config", path_str(&cfg), "generate", "--prompt", "x"])), 3);
}

fn eval(out: &Path, fixtures: &Path, trials: usize) -> (Output, PathBuf) {
    let o = t2bm(&[
        "eval", "--prompt", recorded::PROMPT, "--fixtures", path_str(fixtures), "--trials", &trials.to_string(), "--out",
        path_str(out), "--parallelism", "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (o, only_child(out))
}

#[test]
fn eval_ten_trials() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (o, da) = eval(a.path(), &recorded::eval10_dir(), 10);
    let (_, db) = eval(b.path(), &recorded::eval10_dir(), 10);
    assert_eq!(tree(&da), tree(&db));
    let report: Value = serde_json::from_slice(&std::fs::read(da.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["parsed_count"], 10);
    let counts = &report["counts"];
    assert_eq!((counts["c_not_s"].as_u64(), counts["c_s"].as_u64(), counts["not_c_not_s"].as_u64()), (Some(6), Some(2), Some(2)));
    let r = &report["ratios"];
    for (k, v) in [("c", 0.8), ("s", 0.2), ("c_not_s", 0.6), ("c_s", 0.2), ("not_c_not_s", 0.2), ("not_c_s", 0.0)] {
        assert!((r[k].as_f64().unwrap() - v).abs() < 1e-12, "{k}");
    }
    let table = stdout(&o);
    assert!(table.contains("| Model | Prompt | C | S | ¬C∧¬S | C∧¬S | ¬C∧S | C∧S | Parsed |"));
    assert!(table.contains("| 0.80 | 0.20 | 0.20 | 0.60 | 0.00 | 0.20 | 10/10 |"), "{table}");
}

#[test]
fn eval_beyond_recorded_trials_counts_unparsed() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, dir) = eval(tmp.path(), &recorded::eval10_dir(), 12);
    let report: Value = serde_json::from_slice(&std::fs::read(dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["trials"], 12);
    assert_eq!(report["parsed_count"], 10);
}
