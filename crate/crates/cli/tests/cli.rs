use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cuqb_core::trace::read_jsonl;

fn cuqb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuqb")).args(args).env_remove("CUQB_OUT_DIR").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--n-raw", "128", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    cuqb(&args)
}

#[test]
fn lists_all_problems() {
    let o = cuqb(&["list-problems"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 23);
    assert!(text.lines().next().unwrap().contains("box"));
    let booth = rows.iter().find(|r| r[0] == "booth").unwrap();
    assert_eq!(&booth[1..4], &["2", "1", "0"]);
    assert!(text.contains("[-10, 10]^2"), "{text}");
    let ex216 = rows.iter().find(|r| r[0] == "ex216").unwrap();
    assert_eq!(&ex216[1..4], &["10", "4", "5"]);
}

#[test]
fn booth_run_writes_a_complete_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--problem", "booth", "--solver", "cuqb", "--seed", "0", "--budget", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = fs::File::open(dir.path().join("booth__cuqb__seed0.jsonl")).unwrap();
    let r = read_jsonl(std::io::BufReader::new(f)).unwrap();
    assert_eq!(r.iterations.len(), 20);
    assert_eq!(r.summary.evaluations, 20);
    assert!(r.recommended().is_some());
    let summary = fs::read_to_string(dir.path().join("summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("booth\tcuqb\t0\tcompleted\t20\t"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json[0]["status"]["kind"], "completed");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "problems = [\"booth\"]\nsolvers = [\"random\", \"eic\"]\nseeds = \"0..1\"\ntotal_budget = 8\n").unwrap();
    let out = dir.path().join("out");
    let o = cuqb(&["run", "--config", cfg.to_str().unwrap(), "--T", "7", "--n-raw", "64", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).filter(|n| n.ends_with(".jsonl")).collect();
    names.sort();
    assert_eq!(names, ["booth__eic__seed0.jsonl", "booth__eic__seed1.jsonl", "booth__random__seed0.jsonl", "booth__random__seed1.jsonl"]);
    let r = read_jsonl(std::io::BufReader::new(fs::File::open(out.join("booth__eic__seed1.jsonl")).unwrap())).unwrap();
    assert_eq!(r.iterations.len(), 7);
}

#[test]
fn unknown_solver_names_the_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--problem", "booth", "--solver", "ucb"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for s in ["cuqb", "eic", "eic-cf", "epbo", "random"] {
        assert!(err.contains(s), "{err}");
    }
}

#[test]
fn unknown_problem_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--problem", "no-such-problem"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no-such-problem"));
}

#[test]
fn infeasible_toy_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--problem", "infeasible-toy", "--budget", "30"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("infeasible(t="));
}

#[test]
fn profile_over_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--problem", "booth", "--solver", "cuqb", "--solver", "random", "--seeds", "0..2", "--budget", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pi_at = |tau: &str| -> Vec<Option<usize>> {
        let out = dir.path().join(format!("tau{tau}"));
        let o = cuqb(&["profile", dir.path().to_str().unwrap(), "--tau", tau, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(out.join("profile_curves.tsv").exists());
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("profile.json")).unwrap()).unwrap();
        assert!(!json["curves"].is_null());
        let pi = fs::read_to_string(out.join("profile_pi.tsv")).unwrap();
        pi.lines()
            .skip(1)
            .map(|row| {
                let cols: Vec<&str> = row.split('\t').collect();
                assert_eq!(cols[1], "booth");
                if cols[3] == "inf" { None } else { Some(cols[3].parse().unwrap()) }
            })
            .collect()
    };
    let loose = pi_at("1");
    let tight = pi_at("0.01");
    assert_eq!(loose.len(), 2);
    for (l, t) in loose.iter().zip(&tight) {
        let l = l.expect("tau = 1 passes once the initial design is matched");
        assert!((1..=12).contains(&l));
        assert!(t.is_none_or(|t| t >= l));
    }
}

#[test]
fn profile_rejects_empty_and_incomplete_directories() {
    let dir = tempfile::tempdir().unwrap();
    let o = cuqb(&["profile", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no .jsonl traces"));

    let o = run_into(dir.path(), &["--problem", "booth", "--solver", "cuqb", "--solver", "random", "--seeds", "0..1", "--budget", "6"]);
    assert!(o.status.success());
    fs::remove_file(dir.path().join("booth__random__seed1.jsonl")).unwrap();
    let o = cuqb(&["profile", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("booth/random/seed1"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_queries() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--problem", "bazaraa", "--seed", "4", "--budget", "9"];
    assert!(run_into(a.path(), &args).status.success());
    assert!(run_into(b.path(), &args).status.success());
    let read = |d: &Path| read_jsonl(std::io::BufReader::new(fs::File::open(d.join("bazaraa__cuqb__seed4.jsonl")).unwrap())).unwrap();
    let (ra, rb) = (read(a.path()), read(b.path()));
    for (x, y) in ra.iterations.iter().zip(&rb.iterations) {
        assert_eq!(x.x, y.x);
        assert_eq!(x.y, y.y);
    }
}
