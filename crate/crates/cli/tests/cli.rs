use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bootstrap-bench");

const TINY: &str = r#"
env = "redundant_arm"
budgets = [2]
repetitions = 2
master_seed = 5

[train]
epochs = 3
ensemble_size = 2
hidden = [8, 8]

[ns]
population_size = 6
generations = 2
k_nearest = 3
archive_add_per_gen = 2
suite_size = 4
"#;

fn bench(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("BOOTSTRAP_BENCH_OUT")
        .output()
        .unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path.to_string_lossy().into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn runs_agree_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(bench(&["run", "--config", &config, "--out", path(&a), "--jobs", "1"]).status.success());
    assert!(bench(&["run", "--config", &config, "--out", path(&b), "--jobs", "3"]).status.success());
    for file in ["errors.csv", "table.csv", "table_outcome.csv", "suite.json"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let manifest = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"run_hash\""));
}

#[test]
fn subcommands_compose_into_the_run_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let full = dir.path().join("full");
    let steps = dir.path().join("steps");
    assert!(bench(&["run", "--config", &config, "--out", path(&full)]).status.success());

    let out = bench(&["ns", "--config", &config, "--out", path(&steps)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gather = [
        "gather", "--config", &config, "--out", path(&steps), "--method", "rarph", "--budget", "2",
        "--repetition", "1",
    ];
    assert!(bench(&gather).status.success());
    let dataset = steps.join("datasets/rarph_b2_r1.csv");
    assert!(bench(&["train", "--config", &config, "--out", path(&steps), "--dataset", path(&dataset)])
        .status
        .success());
    let model = steps.join("models/rarph_b2_r1.json");
    let suite = steps.join("suite.json");
    let out = bench(&[
        "evaluate", "--config", &config, "--out", path(&steps), "--model", path(&model), "--suite",
        path(&suite),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let sliced: Vec<String> = std::fs::read_to_string(full.join("errors.csv"))
        .unwrap()
        .lines()
        .filter(|l| l.contains(",rarph,2,") && l.split(',').nth(4) == Some("1"))
        .map(String::from)
        .collect();
    let mut staged: Vec<String> = std::fs::read_to_string(steps.join("errors/rarph_b2_r1.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(String::from)
        .collect();
    let mut sliced_sorted = sliced.clone();
    sliced_sorted.sort();
    staged.sort();
    assert!(!staged.is_empty());
    assert_eq!(staged, sliced_sorted);
}

#[test]
fn report_names_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let errors = dir.path().join("errors.csv");
    std::fs::write(
        &errors,
        "env,method,budget,horizon,repetition,trajectory_id,error,diverged,outcome_error\n\
         ball_in_cup,random_policy,5,1,0,0,0.5,false,0.4\n\
         ball_in_cup,random_actions,5,1,0,0,0.7,false,0.6\n",
    )
    .unwrap();
    let out = bench(&["report", "--out", path(dir.path()), "--errors", path(&errors)]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("budget 5") && stderr.contains("rarph"), "{stderr}");
}

#[test]
fn exit_codes_separate_usage_from_configuration() {
    assert_eq!(bench(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(bench(&[]).status.code(), Some(1));
    assert_eq!(bench(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "env = \"ball_in_cup\"\nbudgets = []\n").unwrap();
    assert_eq!(bench(&["run", "--config", path(&bad), "--out", path(dir.path())]).status.code(), Some(2));
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(bench(&["ns", "--config", path(&bad)]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(bench(&["ns", "--config", path(&missing)]).status.code(), Some(2));

    let config = write_config(dir.path());
    let out = bench(&["gather", "--config", &config, "--out", path(dir.path()), "--budget", "99"]);
    assert_eq!(out.status.code(), Some(1));
}
