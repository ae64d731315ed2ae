use std::path::Path;
use std::process::{Command, Output};

fn biosynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biosynth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&biosynth(&["--help"])), 0);
    assert_eq!(code(&biosynth(&["generate", "--no-such-flag"])), 1);
    assert_eq!(code(&biosynth(&[])), 1);
}

#[test]
fn generate_replay_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("set.ndjson");
    let o = biosynth(&[
        "generate", "-o", p(&out), "-n", "3", "--duration", "6", "--seed", "5", "--csv", "--plots", "--workers", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dataset = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = dataset.lines().collect();
    assert_eq!(lines.len(), 3);
    for i in 0..3 {
        assert!(dir.path().join(format!("set_{i:05}_0.csv")).exists());
        assert!(dir.path().join(format!("set_{i:05}_0.svg")).exists());
    }
    let csv = std::fs::read_to_string(dir.path().join("set_00000_0.csv")).unwrap();
    assert!(csv.starts_with("time,value,seg_label,noise_level,quality,artifact"));

    let manifest = dir.path().join("set.manifest.json");
    for i in 0..3 {
        let replayed = dir.path().join(format!("replay{i}.ndjson"));
        let o = biosynth(&["replay", p(&manifest), "--index", &i.to_string(), "--verify", "-o", p(&replayed)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(std::fs::read_to_string(&replayed).unwrap(), format!("{}\n", lines[i]));
    }

    let svg = dir.path().join("one.svg");
    let o = biosynth(&["plot", p(&out), "--index", "1", "-o", p(&svg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("class=\"trace\""));
    assert_eq!(code(&biosynth(&["plot", p(&out), "--index", "9", "-o", p(&svg)])), 2);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = biosynth(&["generate", "-o", p(&out), "-n", "4", "--duration", "5", "--seed", "11", "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.ndjson", "1"), run("b.ndjson", "3"));
}

#[test]
fn tampered_manifest_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("set.ndjson");
    assert_eq!(code(&biosynth(&["generate", "-o", p(&out), "-n", "1", "--duration", "4"])), 0);
    let manifest = dir.path().join("set.manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["signals"][0]["records"][0]["sha256"] = "00".into();
    std::fs::write(&manifest, m.to_string()).unwrap();
    let o = biosynth(&["replay", p(&manifest), "--index", "0", "--verify", "-o", p(&dir.path().join("r"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not match"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[limits.ecg.R]\na = [1.2, 0.8]\n").unwrap();
    let o = biosynth(&["generate", "-c", p(&cfg), "-o", p(&dir.path().join("x.ndjson"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("low > high"), "{}", stderr(&o));

    std::fs::write(&cfg, "duration = 10\n[output\n").unwrap();
    let o = biosynth(&["generate", "-c", p(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.toml:2:"), "{}", stderr(&o));

    std::fs::write(&cfg, "duration = 10\nbogus = 3\n").unwrap();
    let o = biosynth(&["generate", "-c", p(&cfg), "--strict", "-o", p(&dir.path().join("x.ndjson"))]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("bogus"));

    let o = biosynth(&["generate", "--seed", "18446744073709551615", "-o", p(&dir.path().join("x.ndjson"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_files_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = biosynth(&["generate", "-c", p(&missing)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("nope.toml"));
    let o = biosynth(&["analyze", "dfa", p(&dir.path().join("nope.txt"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn intervals_feed_dfa() {
    let dir = tempfile::tempdir().unwrap();
    let iv = dir.path().join("iv.csv");
    let o = biosynth(&["intervals", "--beats", "4000", "--seed", "3", "-o", p(&iv)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&iv).unwrap();
    assert_eq!(text.lines().next(), Some("interval_s"));
    assert_eq!(text.lines().count(), 4001);

    let o = biosynth(&["analyze", "dfa", p(&iv)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let alpha: f64 = stdout
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# alpha="))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(alpha > 0.5 && alpha < 1.5, "{alpha}");
}

#[test]
fn noise_and_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let noise = dir.path().join("noise.csv");
    let o = biosynth(&["noise", "--duration", "20", "--fs", "250", "--amplitude", "0.5", "-o", p(&noise)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&noise).unwrap();
    assert!(text.starts_with("# fs=250"));
    assert_eq!(text.lines().count(), 5001);

    let psd = dir.path().join("psd.csv");
    let o = biosynth(&["noise", "--estimate", p(&noise), "-o", p(&psd)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = biosynth(&["noise", "--psd", p(&psd), "--duration", "5", "-o", p(&dir.path().join("again.csv"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = biosynth(&["analyze", "roundtrip", "--alpha", "0.5", "--seeds", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().skip(2).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let err: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(err.abs() < 0.25, "{r}");
    }
}
