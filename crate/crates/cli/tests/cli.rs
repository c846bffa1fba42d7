use std::path::Path;
use std::process::{Command, Output};

use lipinc_core::ingest::write_manifest;
use lipinc_core::synth::{render_clip, Mode, SynthSpec};

fn lipinc(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lipinc"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("LIPINC_SEED");
    if let Some(s) = seed_env {
        cmd.env("LIPINC_SEED", s);
    }
    cmd.output().expect("spawn lipinc")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn clip_dir(frames: usize, dir: &Path) -> std::path::PathBuf {
    let spec = SynthSpec { frames, seed: 3, ..SynthSpec::default() };
    let (clip, _) = render_clip(&spec, "short", Mode::Real);
    write_manifest(&clip, dir).unwrap()
}

#[test]
fn extract_rejects_short_clip() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = clip_dir(3, &tmp.path().join("clip"));
    let out = lipinc(&["extract", "--manifest", s(&manifest), "--out", s(&tmp.path().join("b.lpsq"))], None);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("E_TOO_SHORT") && err.contains("3 frames"), "{err}");
    assert!(!tmp.path().join("b.lpsq").exists());
}

#[test]
fn extract_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = clip_dir(40, &tmp.path().join("clip"));
    let a = tmp.path().join("a.lpsq");
    let b = tmp.path().join("b.lpsq");
    for out in [&a, &b] {
        let o = lipinc(&["extract", "--manifest", s(&manifest), "--out", s(out)], None);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn usage_errors_exit_one_and_name_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lipinc(&["synth", "--out", s(tmp.path()), "--clips", "many"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--clips"), "{}", stderr(&out));

    let out = lipinc(&["train", "--data", s(tmp.path()), "--out", "m.lpnc", "--fusion", "sum"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--fusion"), "{}", stderr(&out));

    let out = lipinc(&["synth", "--out", s(tmp.path()), "--clips", "1"], None);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    let out = lipinc(&["synth", "--out", s(tmp.path()), "--clips", "4"], Some("seven"));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("LIPINC_SEED"), "{}", stderr(&out));
}

#[test]
fn seed_environment_overrides_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let args = |d: &Path, seed: &str| vec!["synth".to_string(), "--out".into(), s(d).into(), "--clips".into(), "4".into(), "--frames".into(), "8".into(), "--seed".into(), seed.into()];
    let run = |d: &Path, seed: &str, env: Option<&str>| {
        let a = args(d, seed);
        let v: Vec<&str> = a.iter().map(String::as_str).collect();
        assert!(lipinc(&v, env).status.success());
    };
    run(&a, "5", None);
    run(&b, "1", Some("5"));
    run(&c, "1", None);
    let manifest = |d: &Path| std::fs::read(d.join("clips/clip_0000/manifest.json")).unwrap();
    assert_eq!(manifest(&a), manifest(&b));
    assert_ne!(manifest(&a), manifest(&c));
}

#[test]
fn train_without_inconsistency_term_logs_il() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let o = lipinc(&["synth", "--out", s(&data), "--clips", "10", "--frames", "40", "--seed", "2"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = tmp.path().join("m.lpnc");
    let o = lipinc(
        &["train", "--data", s(&data), "--out", s(&ckpt), "--preset", "desk", "--epochs", "2", "--lambda-il", "0"],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let log = String::from_utf8(o.stdout).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("epoch,L_CL,L_IL,L_total"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r[2] > 0.0);
        assert_eq!(r[3], r[1]);
    }
    assert!(ckpt.exists());

    let report = tmp.path().join("r.json");
    let o = lipinc(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--report", s(&report), "--split", "all"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 10);
}
