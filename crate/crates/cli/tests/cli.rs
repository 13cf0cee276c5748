//! End-to-end tests of the `amalgam` binary: output shapes, exit codes,
//! JSON determinism, and config-file handling.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn amalgam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amalgam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("amalgam-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("scratch dir");
    dir.join(name)
}

#[test]
fn normal_form_matches_the_reference_example() {
    let out = amalgam(&["normal-form", "--preset", "amalgam-h0", "--word", "x a a^-1 y"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("x y"), "unexpected output: {text}");
    assert!(text.contains("length 1"), "unexpected output: {text}");
}

#[test]
fn reduce_reports_weight_and_merges_inverses() {
    let out = amalgam(&["reduce", "--factor", "K", "--word", "s s s^-1 x"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("s x"), "unexpected output: {text}");
    assert!(text.contains("weight 2"), "unexpected output: {text}");
}

#[test]
fn check_cc_certifies_the_seed_at_full_scale() {
    let out = amalgam(&["check-cc", "--cap", "80", "--lambda", "1/10"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Certified at 1/10"), "unexpected output: {text}");
    assert!(text.contains("max piece length: 317"), "unexpected output: {text}");
}

#[test]
fn check_cc_flags_a_violated_set() {
    let out = amalgam(&["check-cc", "--cap", "8", "--stages", "0,1"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("Violated at 1/10"));
}

#[test]
fn pieces_reports_without_judging() {
    // Same violated set as above, but `pieces` only reports: exit 0.
    let out = amalgam(&["pieces", "--cap", "8", "--stages", "0,1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("certified: false"));
}

#[test]
fn dehn_rejects_a_generator_at_full_scale() {
    let out = amalgam(&["dehn", "--cap", "80", "--word", "x"]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("Nontrivial"));
}

#[test]
fn dehn_accepts_a_relator_conjugate_and_replays_the_trace() {
    let out = amalgam(&[
        "dehn",
        "--stages",
        "",
        "--relator",
        "x a x^-1 a^-1",
        "--lambda",
        "1/2",
        "--word",
        "a x a x^-1 a^-1 a^-1",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("Trivial"), "unexpected: {}", stdout(&out));
    assert!(stdout(&out).contains("trace replayed"));
}

#[test]
fn dehn_random_strategy_agrees_on_the_verdict() {
    for seed in ["1", "2", "3"] {
        let out = amalgam(&[
            "dehn",
            "--stages",
            "",
            "--relator",
            "x a x^-1 a^-1",
            "--lambda",
            "1/2",
            "--word",
            "x a x^-1 a^-1",
            "--strategy",
            "random",
            "--seed",
            seed,
        ]);
        assert_eq!(code(&out), 0, "seed {seed}: {}", stderr(&out));
    }
}

#[test]
fn dehn_refuses_an_uncertified_set() {
    let out = amalgam(&["dehn", "--cap", "8", "--stages", "0,1", "--word", "x"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("small-cancellation"));
}

#[test]
fn verify_step_passes_at_small_scale() {
    let out = amalgam(&[
        "verify-step",
        "--cap",
        "4",
        "--radius",
        "2",
        "--lambda",
        "1/2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("all checks passed"));
}

#[test]
fn verify_step_accepts_an_explicit_head() {
    let out = amalgam(&[
        "verify-step",
        "--head",
        "s x^-1",
        "--cap",
        "4",
        "--radius",
        "2",
        "--lambda",
        "1/2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn verify_step_rejects_a_collapsing_head() {
    // hₙ = x installs h = identity·…; the step hypotheses fail up front.
    let out = amalgam(&["verify-step", "--head", "x", "--cap", "4"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn topology_base_certifies_a_miniature_chain() {
    let json = scratch("base.json");
    let out = amalgam(&[
        "topology-base",
        "--cap",
        "38",
        "--count",
        "3",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("all certificates hold"));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["command"], "topology-base");
    assert_eq!(doc["report"]["ks"], serde_json::json!([1, 2, 3]));
}

#[test]
fn json_reports_are_byte_identical_across_runs() {
    let a = scratch("pieces-a.json");
    let b = scratch("pieces-b.json");
    for path in [&a, &b] {
        let out = amalgam(&[
            "pieces",
            "--cap",
            "38",
            "--stages",
            "0,3",
            "--json",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    let bytes_a = fs::read(&a).unwrap();
    let bytes_b = fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b, "reports differ across identical runs");

    let doc: serde_json::Value = serde_json::from_slice(&bytes_a).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config"]["source"], "preset:amalgam-h1");
    assert_eq!(doc["config"]["params"]["cap"], 38);
    assert_eq!(doc["config"]["params"]["stages"], serde_json::json!([0, 3]));
    assert_eq!(doc["report"]["certified"], true);
}

#[test]
fn config_files_resolve_and_embed() {
    let conf = scratch("system.conf");
    fs::write(
        &conf,
        "# comment lines and blanks are skipped\n\n\
         K.generators = s x y h\nL.generators = s a\nshared = s\n\
         x = x\ny = y\na = a\nh = h\n",
    )
    .unwrap();
    let json = scratch("config-run.json");
    let out = amalgam(&[
        "check-cc",
        "--config",
        conf.to_str().unwrap(),
        "--cap",
        "38",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let source = doc["config"]["source"].as_str().unwrap();
    assert!(source.starts_with("file:"), "source: {source}");
    assert_eq!(doc["config"]["k_generators"], serde_json::json!(["s", "x", "y", "h"]));
    assert_eq!(doc["config"]["shared"], serde_json::json!(["s"]));
}

#[test]
fn config_file_errors_name_the_problem() {
    let conf = scratch("missing-h.conf");
    fs::write(&conf, "K.generators = s x y\nL.generators = s a\nshared = s\nx = x\ny = y\na = a\n")
        .unwrap();
    let out = amalgam(&["check-cc", "--config", conf.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`h`"), "stderr: {}", stderr(&out));
}

#[test]
fn usage_and_validation_errors_exit_two() {
    let unknown_flag = amalgam(&["check-cc", "--frobnicate"]);
    assert_eq!(code(&unknown_flag), 2);

    let bad_word = amalgam(&["normal-form", "--word", "q q"]);
    assert_eq!(code(&bad_word), 2);
    assert!(stderr(&bad_word).contains("--word"));

    let bad_cap = amalgam(&["pieces", "--cap", "1"]);
    assert_eq!(code(&bad_cap), 2);
    assert!(stderr(&bad_cap).contains("--cap"));

    let empty_set = amalgam(&["pieces", "--stages", ""]);
    assert_eq!(code(&empty_set), 2);

    let bad_lambda = amalgam(&["pieces", "--lambda", "zero"]);
    assert_eq!(code(&bad_lambda), 2);

    let bad_preset = amalgam(&["pieces", "--preset", "nonesuch"]);
    assert_eq!(code(&bad_preset), 2);
    assert!(stderr(&bad_preset).contains("nonesuch"));
}
