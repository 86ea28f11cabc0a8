use std::path::Path;
use std::process::{Command, Output};

use wavescope::experiment::ExperimentConfig;
use wavescope::video_io::load_clip;

fn wavescope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavescope")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = wavescope(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dataset(dir: &Path) {
    ok(&[
        "simulate", "make-dataset", "--n-real", "3", "--n-fake", "3", "--frames", "4", "--height", "32", "--width", "32",
        "--out", s(dir),
    ]);
}

#[test]
fn fswt_then_ifswt_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    dataset(&ds);
    let input = ds.join("real_0001.y4m");
    let bands = tmp.path().join("bands");
    let back = tmp.path().join("back.y4m");
    ok(&["fswt", s(&input), "--levels", "3", "--out", s(&bands)]);
    ok(&["ifswt", s(&bands), "--out", s(&back)]);
    let (a, b) = (load_clip(&input).unwrap(), load_clip(&back).unwrap());
    assert_eq!((a.frames, a.height, a.width), (b.frames, b.height, b.width));
    let max = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
    assert!(max <= 1.0 / 255.0, "max diff {max}");
}

#[test]
fn train_score_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    dataset(&ds);
    let (model, scores, report) = (tmp.path().join("m.json"), tmp.path().join("s.csv"), tmp.path().join("r.csv"));
    let manifest = ds.join("manifest.json");
    ok(&["train", "--manifest", s(&manifest), "--augment", "waverep:0.1", "--epochs", "100", "--out", s(&model)]);
    ok(&["score", "--model", s(&model), "--manifest", s(&manifest), "--out", s(&scores)]);
    ok(&["eval", "--scores", s(&scores), "--out", s(&report)]);
    let text = std::fs::read_to_string(&report).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["auc", "bacc", "pd_at_5", "nll", "ece", "threshold"]);
}

#[test]
fn waverep_attack_and_compress_write_clips() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    dataset(&ds);
    let (real, fake) = (ds.join("real_0000.y4m"), ds.join("fake_0000.y4m"));
    let out = tmp.path().join("o.y4m");
    let log = tmp.path().join("log.csv");
    ok(&["waverep", "--fake", s(&fake), "--real", s(&real), "--mask", "all", "--out", s(&out)]);
    assert_eq!(load_clip(&out).unwrap().data, load_clip(&real).unwrap().data);
    ok(&["waverep", "--fake", s(&fake), "--real", s(&real), "--p", "0.5", "--seed", "3", "--log", s(&log), "--out", s(&out)]);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 5);
    ok(&["attack", "--real", s(&real), "--fake", s(&fake), "--out", s(&out)]);
    ok(&["compress", "--in", s(&real), "--out", s(&out), "--q", "0.2"]);
    ok(&["spectrum", "--manifest", s(&ds.join("manifest.json")), "--label", "fake", "--out-dir", s(&tmp.path().join("sp"))]);
    for name in ["s_yx.wvt", "s_tx.pgm", "s_yt.pgm", "run.json"] {
        assert!(tmp.path().join("sp").join(name).exists(), "{name}");
    }
}

#[test]
fn single_class_eval_fails_naming_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("s.csv");
    std::fs::write(&scores, "id,label,score,prob\na,1,0.5,0.62\nb,1,1.0,0.73\n").unwrap();
    let out = wavescope(&["eval", "--scores", s(&scores), "--out", s(&tmp.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("auc"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(wavescope(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(wavescope(&["train", "--augment", "none"]).status.code(), Some(2));
    assert_eq!(wavescope(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_runtime_error() {
    let out = wavescope(&["fswt", "/nonexistent/clip.y4m", "--out", "/tmp/unused-bands"]);
    assert_eq!(out.status.code(), Some(1));
}

#[cfg(not(feature = "external-encoder"))]
#[test]
fn external_encoder_without_feature_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    dataset(&ds);
    let out = wavescope(&["compress", "--in", s(&ds.join("real_0000.y4m")), "--out", s(&tmp.path().join("c.y4m")), "--crf", "23"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn shipped_config_matches_defaults() {
    let text = include_str!("../../../configs/default.toml");
    assert_eq!(ExperimentConfig::from_toml(text).unwrap(), ExperimentConfig::default());
}

#[test]
fn default_run_writes_outputs_in_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let start = std::time::Instant::now();
    ok(&["run", "--config", config, "--out-dir", s(tmp.path())]);
    assert!(start.elapsed().as_secs() < 600);
    for f in ["run.json", "config.toml", "summary.json", "models/waverep.json", "reports/compressed_none.csv"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}
