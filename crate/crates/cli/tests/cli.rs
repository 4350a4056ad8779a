use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn poolprop(args: &[&str]) -> Output {
    poolprop_env(args, &[])
}

fn poolprop_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_poolprop"));
    cmd.args(args).env_remove("POOLPROP_SEED").env("RUST_LOG", "info");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixtures(dir: &Path) -> PathBuf {
    let out = dir.join("fx");
    let o = poolprop(&["fixtures", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_flag() {
    let text = stdout(&poolprop(&["--help"]));
    for flag in [
        "--sigma",
        "--canny-high-pct",
        "--canny-low-ratio",
        "--label",
        "--window",
        "--stride",
        "--pool",
        "--dims",
        "--signed",
        "--exemplar",
        "--n",
        "--seed",
        "--max-proposals",
        "--nms",
        "--no-rank",
        "--jobs",
        "--no-timing",
    ] {
        assert!(text.contains(flag), "missing {flag} in help:\n{text}");
    }
    for sub in ["propose", "train-templates", "evaluate", "sweep-generation", "sweep-ranking", "fixtures"] {
        assert!(text.contains(sub), "missing {sub}");
    }
}

#[test]
fn fixtures_are_listed_and_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (fa, fb) = (fixtures(a.path()), fixtures(b.path()));
    let manifest = fs::read_to_string(fa.join("manifest.csv")).unwrap();
    assert_eq!(data_lines(&manifest).len(), 23);
    let corpus = fs::read_to_string(fa.join("corpus.csv")).unwrap();
    assert_eq!(data_lines(&corpus).len(), 20);
    let mut names: Vec<_> = fs::read_dir(&fa).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        assert_eq!(fs::read(fa.join(&name)).unwrap(), fs::read(fb.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn blank_image_gives_header_only_csv() {
    let dir = TempDir::new().unwrap();
    let img = dir.path().join("blank.png");
    poolprop::ingest::GrayImage::filled(64, 48, 128).unwrap().save_png(&img).unwrap();
    let o = poolprop(&["--no-rank", "propose", s(&img)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), format!("{}\n", poolprop::ingest::PROPOSALS_HEADER));
    assert!(stderr(&o).contains("blank: 0 components, no proposals"), "{}", stderr(&o));
}

#[test]
fn three_component_fixture_yields_six_unranked_proposals() {
    let dir = TempDir::new().unwrap();
    let fx = fixtures(dir.path());
    let o = poolprop(&["--no-rank", "propose", s(&fx.join("three_components.png"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6, "{text}");
    assert!(rows.iter().all(|r| r.starts_with("three_components,") && r.ends_with(',')));
}

#[test]
fn bad_flag_combinations_fail_before_reading_inputs() {
    let missing = "/nonexistent/never.png";
    for args in [
        vec!["propose", missing],
        vec!["--no-rank", "propose", "--templates", "/nonexistent/t.txt", missing],
        vec!["--no-rank", "--nms", "0.5", "propose", missing],
        vec!["--jobs", "0", "--no-rank", "propose", missing],
        vec!["--window", "1x1", "--stride", "1x1", "--no-rank", "propose", missing],
    ] {
        let o = poolprop(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = stderr(&o);
        assert!(err.contains("error:"), "{err}");
        assert!(!err.contains("never.png"), "touched the input for {args:?}: {err}");
    }
    let o = poolprop_env(&["--no-rank", "propose", missing], &[("POOLPROP_SEED", "abc")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_unreadable_image_is_fatal_but_batch_is_partial() {
    let dir = TempDir::new().unwrap();
    let fx = fixtures(dir.path());
    let broken = dir.path().join("broken.png");
    fs::write(&broken, b"\x89PNG\r\n\x1a\nnot really").unwrap();

    let o = poolprop(&["--no-rank", "propose", s(&broken)]);
    assert_eq!(o.status.code(), Some(1));

    let out = dir.path().join("batch.csv");
    let o = poolprop(&[
        "--no-rank",
        "propose",
        s(&fx.join("three_components.png")),
        s(&broken),
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let fx = fixtures(dir.path());
    let corpus = fx.join("corpus.csv");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let base = dir.path().join(run);
        fs::create_dir_all(&base).unwrap();
        let templates = base.join("templates.txt");
        let o = poolprop(&["--n", "5", "--dims", "30", "train-templates", "--dataset", s(&corpus), "-o", s(&templates)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let eval_dir = base.join("eval");
        let o = poolprop(&[
            "--n",
            "5",
            "--dims",
            "30",
            "--no-timing",
            "evaluate",
            "--dataset",
            s(&corpus),
            "--templates",
            s(&templates),
            "--out-dir",
            s(&eval_dir),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let ranked = base.join("ranked.csv");
        let o = poolprop(&[
            "--dims",
            "30",
            "propose",
            "--templates",
            s(&templates),
            s(&fx.join("text_00.png")),
            s(&fx.join("text_01.png")),
            "-o",
            s(&ranked),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let files = ["templates.txt", "eval/summary.csv", "eval/curve.csv", "eval/proposals.csv", "ranked.csv"];
        outputs.push(files.map(|f| fs::read(base.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let summary = String::from_utf8(outputs[0][1].clone()).unwrap();
    assert!(summary.contains("iou,recall,nppb,mean_time_s"));
    assert!(data_lines(&summary).iter().skip(1).all(|l| l.ends_with(',')), "{summary}");
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let dir = TempDir::new().unwrap();
    let fx = fixtures(dir.path());
    let out = dir.path().join("eval");
    let o = poolprop_env(
        &[
            "--seed",
            "3",
            "--no-rank",
            "--no-timing",
            "evaluate",
            "--dataset",
            s(&fx.join("corpus.csv")),
            "--out-dir",
            s(&out),
        ],
        &[("POOLPROP_SEED", "99")],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert!(header.starts_with("# ") && header.contains("seed=99"), "{header}");
}
