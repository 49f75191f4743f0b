//! End-to-end checks of the shipped binary: every bundled game file loads
//! and its embedded [expect] annotations hold, machine output is
//! byte-identical across identical runs, and exit codes follow the
//! documented contract.

use metagame_cli::gamefile;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mg")
}

fn games_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("games")
}

fn game_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(games_dir())
        .expect("games directory ships with the crate")
        .map(|e| e.expect("readable dir entry").path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no bundled game files found");
    files
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal exit")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

/// Parses records-mode stdout and returns the trailing summary object.
fn summary(output: &Output) -> serde_json::Value {
    let text = stdout(output);
    let last = text.lines().last().expect("at least a summary record");
    let value: serde_json::Value = serde_json::from_str(last).expect("valid record json");
    assert_eq!(value["record"], "summary");
    value
}

#[test]
fn every_shipped_file_loads() {
    for path in game_files() {
        let file = gamefile::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let base = file.base_game().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if file.meta.is_some() {
            file.meta_game(&base).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}

#[test]
fn shipped_annotations_hold() {
    for path in game_files() {
        let file = gamefile::load(&path).expect("loads");
        let Some(expect) = file.expect.clone() else { continue };
        let path_str = path.to_str().expect("utf-8 path");

        if let Some(count) = expect.solve_equilibria {
            let out = run(&["solve", path_str, "--format", "records"]);
            let s = summary(&out);
            assert_eq!(
                s["equilibria"], count as u64,
                "{}: solve found {} equilibria, annotation says {count}",
                path.display(),
                s["equilibria"]
            );
            assert_eq!(exit_code(&out), if count > 0 { 0 } else { 4 }, "{}", path.display());
        }

        if let Some(status) = &expect.audit {
            let out = run(&["audit", path_str, "--format", "records"]);
            let text = stdout(&out);
            let mut worst = "unique";
            for line in text.lines() {
                let value: serde_json::Value = serde_json::from_str(line).expect("record json");
                if value["record"] == "audit" {
                    match value["status"].as_str().expect("status string") {
                        "multiple" => worst = "multiple",
                        "unknown" if worst != "multiple" => worst = "unknown",
                        _ => {}
                    }
                }
            }
            assert_eq!(worst, status, "{}: audit status", path.display());
            let expected_exit = match status.as_str() {
                "multiple" => 3,
                "unknown" => 4,
                _ => 0,
            };
            assert_eq!(exit_code(&out), expected_exit, "{}: audit exit", path.display());
        }

        if let Some(count) = expect.meta_equilibria {
            let out = run(&["solve-meta", path_str, "--format", "records"]);
            let s = summary(&out);
            assert_eq!(
                s["equilibria"], count as u64,
                "{}: solve-meta equilibrium count",
                path.display()
            );
        }

        if let Some(code) = expect.solve_meta_exit {
            let out = run(&["solve-meta", path_str]);
            assert_eq!(exit_code(&out), code, "{}: solve-meta exit", path.display());
        }
    }
}

#[test]
fn records_output_is_byte_identical_across_runs() {
    let reform = games_dir().join("reform.toml");
    let reform = reform.to_str().expect("utf-8 path");
    let first = run(&["solve-meta", reform, "--format", "records"]);
    let second = run(&["solve-meta", reform, "--format", "records"]);
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());

    let sweep_args = ["sweep", "cyber", "-n", "3", "--seed", "11", "--format", "records"];
    let first = run(&sweep_args);
    let second = run(&sweep_args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn malformed_files_exit_with_the_schema_code() {
    let dir = std::env::temp_dir();
    let garbled = dir.join("mg_cli_test_garbled.toml");
    std::fs::write(&garbled, "this is not [ toml").expect("tmp write");
    let out = run(&["solve", garbled.to_str().expect("utf-8 path")]);
    assert_eq!(exit_code(&out), 2);

    // structurally valid toml, wrong payoff table length
    let short = dir.join("mg_cli_test_short.toml");
    std::fs::write(
        &short,
        r#"
[game]
players = ["a", "b"]
[game.actions]
a = ["x", "y"]
b = ["x", "y"]
[[game.payoffs]]
player = "a"
table = [1.0, 2.0]
[[game.payoffs]]
player = "b"
table = [1.0, 2.0, 3.0, 4.0]
"#,
    )
    .expect("tmp write");
    let out = run(&["solve", short.to_str().expect("utf-8 path")]);
    assert_eq!(exit_code(&out), 2);
    let text = stdout(&out);
    assert!(text.contains("expected 4 entries"), "diagnostic names the size: {text}");
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let target = std::env::temp_dir().join("mg_cli_test_report.txt");
    let _ = std::fs::remove_file(&target);
    let pd = games_dir().join("pd.toml");
    let out = run(&[
        "solve",
        pd.to_str().expect("utf-8 path"),
        "--format",
        "records",
        "--out",
        target.to_str().expect("utf-8 path"),
    ]);
    assert_eq!(exit_code(&out), 0);
    assert!(stdout(&out).is_empty(), "report went to the file, not stdout");
    let written = std::fs::read_to_string(&target).expect("report file exists");
    let direct = run(&["solve", pd.to_str().expect("utf-8 path"), "--format", "records"]);
    assert_eq!(written, stdout(&direct));
}

#[test]
fn human_output_aligns_its_tables() {
    let out = run(&["solve", games_dir().join("pd.toml").to_str().expect("utf-8 path")]);
    let text = stdout(&out);
    assert!(text.contains("player  type  strategy"));
    assert!(text.contains("------  ----"));
}
