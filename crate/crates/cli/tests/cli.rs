use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use monopriv_cli::{Format, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monopriv"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_config(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ALG1_SUITE: &str = r#"
mass_tol = 1e-12

[mechanism]
kind = "alg1"
budget = 8.0
epsilon = 0.5
n = 4

[loss_model]
kind = "tight_dp"
relation = "monotonic"

[[profiles]]
bits = [1, 0, 1, 1]
valuations = [0.0, 1.0, 2.0, 40.0]

[[profiles]]
bits = [0, 0, 1, 0]
valuations = [3.0, 0.5, 1.0, 1.0]

[[checks]]
kind = "truthful"
players = "eligible"

[[checks]]
kind = "ir"

[[checks]]
kind = "accuracy"
alpha = 0.75
alpha_prime = 0.5
beta = 0.7357588823428847

[[checks]]
kind = "dp"
epsilon = 0.5
"#;

#[test]
fn passing_suite_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.toml", ALG1_SUITE);
    let out_dir = dir.path().join("out");
    let o = run_config(&cfg, &["--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "check,mechanism,profile_id,player,verdict,margin,witness"
    );
    // theta = 2 with ties included: 3 eligible per profile
    assert_eq!(lines.count(), 6 + 8 + 2 + 8);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["exit_code"], 0);
    assert_eq!(report["counts"]["fail"], 0);
}

#[test]
fn untruthful_baseline_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "pd.json",
        r#"{
  "mechanism": {"kind": "pay_declared", "epsilon": 0.5},
  "loss_model": {"kind": "tight_dp", "relation": "general"},
  "profiles": [{"bits": [1, 0], "valuations": [1.0, 2.0]}],
  "checks": [{"kind": "truthful"}]
}"#,
    );
    let o = run_config(&cfg, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("declare=100"), "{}", stdout(&o));
}

#[test]
fn empty_check_list_exits_zero_with_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "empty.toml",
        "[mechanism]\nkind = \"exact_sum\"\n",
    );
    let out_dir = dir.path().join("out");
    let o = run_config(&cfg, &["--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn straddling_monte_carlo_exits_two() {
    // the exact miss probability is 2/3, so a 99% interval around the
    // empirical rate straddles beta = 2/3
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.toml",
        r#"
seed = 11
[mechanism]
kind = "alg1"
budget = 4.0
epsilon = 0.6931471805599453
n = 2

[[profiles]]
bits = [0, 0]
valuations = [0.0, 0.0]

[[checks]]
kind = "accuracy"
alpha = 0.5
beta = 0.6666666666666666
mode = { kind = "monte_carlo", trials = 2000 }
"#,
    );
    let o = run_config(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn config_errors_exit_three_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(
        dir.path(),
        "typo.toml",
        &ALG1_SUITE.replace("budget = 8.0", "budgte = 8.0"),
    );
    let o = run_config(&typo, &[]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("budgte") && e.contains("line"), "{e}");

    let bad_json = write(
        dir.path(),
        "bad.json",
        "{\"mechanism\": {\"kind\": \"alg1\",}}",
    );
    let o = run_config(&bad_json, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let missing = write(
        dir.path(),
        "missing.toml",
        "profiles = { path = \"nowhere.json\" }\n[mechanism]\nkind = \"exact_sum\"\n",
    );
    let o = run_config(&missing, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nowhere.json"), "{}", stderr(&o));

    let no_seed = write(
        dir.path(),
        "noseed.toml",
        "[mechanism]\nkind = \"exact_sum\"\n[[checks]]\nkind = \"accuracy\"\nalpha = 0.5\nbeta = 0.1\nmode = { kind = \"monte_carlo\", trials = 10 }\n",
    );
    let o = run_config(&no_seed, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));

    let bad_eps = write(
        dir.path(),
        "eps.toml",
        &ALG1_SUITE.replace("epsilon = 0.5\nn = 4", "epsilon = 0.0\nn = 4"),
    );
    let o = run_config(&bad_eps, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));

    let o = run_config(&dir.path().join("absent.toml"), &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn profiles_can_live_in_a_file() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "profiles.json",
        r#"[{"bits": [1, 0], "valuations": [0.0, 0.0]}, {"bits": [1, 1], "valuations": [0.0, 5.0]}]"#,
    );
    let cfg = write(
        dir.path(),
        "cfg.toml",
        r#"
profiles = { path = "profiles.json" }
[mechanism]
kind = "alg1"
budget = 4.0
epsilon = 0.5
n = 2
[loss_model]
kind = "tight_dp"
relation = "monotonic"
[[checks]]
kind = "ir"
"#,
    );
    let o = run_config(&cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 profiles"));
}

#[test]
fn round_trip_gives_identical_report_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "seed = 5\n{}\n[[checks]]\nkind = \"accuracy\"\nalpha = 0.5\nbeta = 0.5\nmode = {{ kind = \"monte_carlo\", trials = 500 }}\n\n[[checks]]\nkind = \"audit_general\"\n",
        ALG1_SUITE.replace("relation = \"monotonic\"", "relation = \"general\"\ndelta = 0.041666666666666664")
            .replace("kind = \"tight_dp\"", "kind = \"increasing_threshold\"")
    );
    let original = write(dir.path(), "a.toml", &text);
    let cfg = RunConfig::load(&original).unwrap();
    let json = write(dir.path(), "b.json", &cfg.to_string(Format::Json).unwrap());
    let toml = write(dir.path(), "c.toml", &cfg.to_string(Format::Toml).unwrap());
    let mut outputs = Vec::new();
    for (k, p) in [&original, &json, &toml].into_iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let o = run_config(p, &["--out", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0..=2)), "{}", stderr(&o));
        outputs.push((
            std::fs::read(out.join("report.json")).unwrap(),
            std::fs::read(out.join("results.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn seed_controls_monte_carlo_and_sequential_matches_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.toml",
        r#"
seed = 1
[mechanism]
kind = "alg1"
budget = 8.0
epsilon = 0.5
n = 4
[[profiles]]
bits = [1, 0, 1, 1]
valuations = [0.0, 1.0, 2.0, 0.5]
[[checks]]
kind = "accuracy"
alpha = 0.5
beta = 0.5
mode = { kind = "monte_carlo", trials = 3000 }
"#,
    );
    let read = |extra: &[&str], tag: &str| {
        let out = dir.path().join(tag);
        let mut args = vec!["--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = run_config(&cfg, &args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read_to_string(out.join("results.csv")).unwrap()
    };
    let a = read(&[], "a");
    let b = read(&["--sequential"], "b");
    let c = read(&["--seed", "2"], "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn demos_run() {
    for name in ["thm_mon", "thm_imp", "thm_monimp", "tradeoff", "subsample"] {
        let o = run(&["demo", name]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
    let mon = stdout(&run(&["demo", "thm_mon"]));
    assert!(mon.contains(" 0 fail, 0 inconclusive"), "{mon}");
    let imp = stdout(&run(&["demo", "thm_imp"]));
    assert!(
        imp.contains("individual rationality violated at hybrid 1"),
        "{imp}"
    );
    assert!(
        imp.contains("end-to-end distance [1.000000e0, 1.000000e0]"),
        "{imp}"
    );
    let monimp = stdout(&run(&["demo", "thm_monimp"]));
    assert!(monimp.contains("impossibility respected"), "{monimp}");
    let o = run(&["demo", "thm_foo"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn demo_config_is_a_valid_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["demo", "thm_monimp", "--show-config"]);
    let cfg = write(dir.path(), "demo.toml", &stdout(&o));
    let o = run_config(&cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("impossibility respected"));
}

#[test]
fn dist_and_version() {
    let o = run(&["dist", "--epsilon", "0.6931471805599453"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("[3.333333e-1, 3.333333e-1]"), "{s}");
    assert!(s.contains("pure dp level 0.69314718"), "{s}");
    let o = run(&["dist", "--epsilon=-1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["dist", "--epsilonn", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["version"]);
    assert!(stdout(&o).starts_with("monopriv "));
}
