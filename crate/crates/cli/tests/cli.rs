use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use miniformer::data::copy_task;
use miniformer_cli::{cmd_params, cmd_score, cmd_train, cmd_translate, RunConfig};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_miniformer"))
}

/// Writes a small copy-task corpus and a config for it; returns the config path.
fn toy_setup(dir: &Path, lr: &str, max_epochs: usize) -> PathBuf {
    copy_task(1000, 6, 2, 5, 3).save(&dir.join("toy")).unwrap();
    let cfg = dir.join("toy.conf");
    fs::write(
        &cfg,
        format!(
            "source = toy.src\ntarget = toy.tgt\noutput_dir = out\nseed = 5\n\
             d_embed = 16\nd_hidden = 16\nbatch_size = 16\nlr = {lr}\nmax_epochs = {max_epochs}\n"
        ),
    )
    .unwrap();
    cfg
}

fn kv_pairs(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .filter(|l| l.contains('='))
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.parse::<f64>().unwrap())
        })
        .collect()
}

#[test]
fn score_fixture_matches_hand_computed_values() {
    let dir = repo_root().join("fixtures/score");
    let mut out = Vec::new();
    cmd_score(&dir.join("hyp.txt"), &dir.join("ref.txt"), false, false, &mut out).unwrap();
    let printed = String::from_utf8(out).unwrap();
    let expected: Vec<String> = fs::read_to_string(dir.join("expected.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && l.contains('='))
        .map(String::from)
        .collect();
    let got: Vec<String> = printed.lines().filter(|l| l.contains('=')).map(String::from).collect();
    assert_eq!(got, expected);
    assert!(printed.lines().next().unwrap().contains("BLEU-1"));
}

#[test]
fn identical_files_score_one_everywhere() {
    let hyp = repo_root().join("fixtures/score/ref.txt");
    for (cumulative, sentence) in [(false, false), (true, false), (false, true)] {
        let mut out = Vec::new();
        cmd_score(&hyp, &hyp, cumulative, sentence, &mut out).unwrap();
        let pairs = kv_pairs(&String::from_utf8(out).unwrap());
        assert_eq!(pairs.len(), 13);
        for (k, v) in pairs {
            // sentence-level BLEU-3/4 of the two-token line has no n-grams at all
            if sentence && (k == "bleu3" || k == "bleu4") {
                continue;
            }
            assert_eq!(v, 1.0, "{k} (cumulative={cumulative}, sentence={sentence})");
        }
    }
}

#[test]
fn score_line_mismatch_exits_2_with_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h"), "a b\nc\n").unwrap();
    fs::write(dir.path().join("r"), "a b\n").unwrap();
    let out = bin()
        .args(["score", "--hyp"])
        .arg(dir.path().join("h"))
        .arg("--ref")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("has 2") && err.contains("has 1"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn params_reports_ratio_below_one_at_desk_config() {
    let out = bin()
        .args(["params", "--config"])
        .arg(repo_root().join("configs/desk.conf"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ratio_line = text.lines().find(|l| l.starts_with("ratio=")).unwrap();
    let digits = ratio_line.trim_start_matches("ratio=");
    assert_eq!(digits.split('.').nth(1).unwrap().len(), 3);
    assert!(digits.parse::<f64>().unwrap() < 1.0);
    assert!(text.contains("miniformer.total=") && text.contains("transformer.encoder="));
}

#[test]
fn doubling_hidden_size_grows_both_counts() {
    let dir = tempfile::tempdir().unwrap();
    let totals = |d_hidden: usize| {
        let cfg = dir.path().join(format!("h{d_hidden}.conf"));
        fs::write(&cfg, format!("max_vocab = 500\nd_hidden = {d_hidden}\n")).unwrap();
        let mut out = Vec::new();
        cmd_params(&cfg, &mut out).unwrap();
        let pairs = kv_pairs(&String::from_utf8(out).unwrap());
        let get = |k: &str| pairs.iter().find(|(n, _)| n == k).unwrap().1;
        (get("miniformer.total"), get("transformer.total"))
    };
    let (m1, t1) = totals(16);
    let (m2, t2) = totals(32);
    assert!(m2 > m1 && t2 > t1);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "d_hidden = 32\nlearning_rate = 0.1\n").unwrap();
    for cmd in ["train", "params"] {
        let out = bin().args([cmd, "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8(out.stderr).unwrap().contains("learning_rate"));
    }
}

#[test]
fn missing_corpus_exits_3_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    fs::write(&cfg, "source = nowhere.src\ntarget = nowhere.tgt\n").unwrap();
    let out = bin().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("nowhere.src"));
}

#[test]
fn diverging_training_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path(), "1e300", 3);
    let out = bin().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_translate_score_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path(), "0.01", 60);
    let summary = cmd_train(&cfg, None, &mut std::io::sink()).unwrap();
    let out = dir.path().join("out");
    for f in [
        "checkpoint.bin",
        "vocab.src",
        "vocab.tgt",
        "train.log",
        "config.resolved",
        "test.src",
        "test.ref",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(summary.report.best_val_loss < summary.report.initial_val_loss);
    let log = fs::read_to_string(out.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), summary.report.epochs.len());
    assert!(log.lines().all(|l| {
        let keys: Vec<&str> = l.split(' ').map(|kv| kv.split('=').next().unwrap()).collect();
        keys == ["epoch", "train_loss", "val_loss", "seconds"]
    }));
    let resolved = RunConfig::load(&out.join("config.resolved")).unwrap();
    assert_eq!(resolved.seed, 5);

    let hyp = out.join("test.hyp");
    let n = cmd_translate(&out.join("checkpoint.bin"), &out.join("test.src"), &hyp, None).unwrap();
    let src = fs::read_to_string(out.join("test.src")).unwrap();
    let translated = fs::read_to_string(&hyp).unwrap();
    assert_eq!(n, src.lines().count());
    assert_eq!(translated.lines().count(), n);
    let exact = src.lines().zip(translated.lines()).filter(|(a, b)| a == b).count();
    assert!(exact * 20 >= n * 19, "only {exact}/{n} copied exactly");

    let mut report = Vec::new();
    cmd_score(&hyp, &out.join("test.ref"), false, false, &mut report).unwrap();
    let bleu1 = kv_pairs(&String::from_utf8(report).unwrap())[0].1;
    assert!(bleu1 >= 0.9, "bleu1 {bleu1}");

    // empty input produces an empty output file
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let status = bin()
        .args(["translate", "--checkpoint"])
        .arg(out.join("checkpoint.bin"))
        .arg("--in")
        .arg(&empty)
        .arg("--out")
        .arg(dir.path().join("empty.out"))
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(dir.path().join("empty.out")).unwrap(), "");

    // a vocabulary that no longer matches the checkpoint is a config error
    fs::write(out.join("vocab.tgt"), "only\ntwo\n").unwrap();
    let out_status = bin()
        .args(["translate", "--checkpoint"])
        .arg(out.join("checkpoint.bin"))
        .arg("--in")
        .arg(out.join("test.src"))
        .arg("--out")
        .arg(dir.path().join("x.out"))
        .output()
        .unwrap();
    assert_eq!(out_status.status.code(), Some(2));
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path(), "0.01", 1);
    let out = bin()
        .env("MINIFORMER_SEED", "99")
        .args(["train", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = fs::read_to_string(dir.path().join("out/config.resolved")).unwrap();
    assert!(resolved.contains("seed = 99"));
    let bad = bin()
        .env("MINIFORMER_SEED", "abc")
        .args(["train", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_checkpoint_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path(), "0.01", 2);
    cmd_train(&cfg, None, &mut std::io::sink()).unwrap();
    let first = fs::read(dir.path().join("out/checkpoint.bin")).unwrap();
    cmd_train(&cfg, None, &mut std::io::sink()).unwrap();
    assert_eq!(fs::read(dir.path().join("out/checkpoint.bin")).unwrap(), first);
    cmd_train(&cfg, Some(6), &mut std::io::sink()).unwrap();
    assert_ne!(fs::read(dir.path().join("out/checkpoint.bin")).unwrap(), first);
}
