//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use miniformer::data::{copy_task, ParallelCorpus};
use miniformer::layers::{multi_head_attention, scaled_dot_attention, AttentionMask, MultiHeadAttention};
use miniformer::metrics::{brevity_penalty, lcs_length, modified_precision, score_corpus, BleuMode};
use miniformer::models::{MiniFormerConfig, Model, ModelConfig, Seq2Seq, TransformerConfig};
use miniformer::tensor::{Graph, ParamStore, Tensor};
use miniformer::training::{decode_checkpoint, encode_checkpoint, evaluate_loss, prepare_data, DataConfig};
use miniformer_cli::{cmd_params, cmd_score, cmd_train, cmd_translate, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::cases::CASES;
use common::{brute_force_lcs, fixture_dir, noise, parse_kv, random_pairs, read_lines_tokens};

const GRADIENT_BUDGET: Duration = Duration::from_secs(30);
const LCS_BUDGET: Duration = Duration::from_secs(10);
const MINIFORMER_BUDGET: Duration = Duration::from_secs(5 * 60);
const TRANSFORMER_BUDGET: Duration = Duration::from_secs(10 * 60);

const TOL_GRADIENT: f64 = 1e-4;
/// Metric values are compared after rounding to 4 decimals.
const TOL_METRIC: f64 = 5e-5;
const CLIPPED_P1: f64 = 1.0 / 3.0;
const BREVITY_3_OF_4: f64 = 0.7165;
const LCS_PAIRS: usize = 200;
const LCS_MAX_LEN: usize = 10;
const MINIFORMER_BLEU1: f64 = 0.90;
const TRANSFORMER_BLEU1: f64 = 0.85;
const TOL_ATTENTION_SUM: f64 = 1e-9;
const TOL_SOFTMAX_SHIFT: f64 = 1e-12;
const INVARIANT_TRIALS: u64 = 100;
const UNTRAINED_LOSS_BAND: f64 = 0.15;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Check = (&'static str, fn(u64) -> Result<(), String>);

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn within(start: Instant, budget: Duration) -> Result<String, String> {
    let took = start.elapsed();
    if took <= budget {
        Ok(format!("{:.1}s", took.as_secs_f64()))
    } else {
        Err(format!("took {:.1}s, budget {}s", took.as_secs_f64(), budget.as_secs()))
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0, "");
    let mut failures = Vec::new();
    for case in CASES {
        let err = (case.run)();
        let tol = case.tol.min(TOL_GRADIENT);
        if err.is_nan() || err >= tol {
            failures.push(format!("{} {err:.2e} >= {tol:.0e}", case.name));
        }
        if err > worst.0 {
            worst = (err, case.name);
        }
    }
    let time = within(start, GRADIENT_BUDGET)?;
    if !failures.is_empty() {
        return Err(failures.join(", "));
    }
    Ok(format!(
        "{} cases, worst {:.2e} ({}), {time}",
        CASES.len(),
        worst.0,
        worst.1
    ))
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn metric_fixtures() -> Outcome {
    let (m, t) = modified_precision(&[toks("the the the")], &[toks("the cat")], 1).map_err(|e| e.to_string())?;
    let p1 = m as f64 / t as f64;
    if (p1 - CLIPPED_P1).abs() > 1e-15 {
        return Err(format!("clipped p1 = {p1}, want 1/3"));
    }
    let bp = brevity_penalty(3, 4);
    if (bp - BREVITY_3_OF_4).abs() > TOL_METRIC {
        return Err(format!("BP(3, 4) = {bp:.6}, want {BREVITY_3_OF_4}"));
    }

    let dir = fixture_dir().join("score");
    let report = score_corpus(
        &read_lines_tokens(&dir.join("hyp.txt")),
        &read_lines_tokens(&dir.join("ref.txt")),
        BleuMode::Individual,
    )
    .map_err(|e| e.to_string())?;
    let expected = parse_kv(&fs::read_to_string(dir.join("expected.txt")).map_err(|e| e.to_string())?);
    let got = report.entries();
    if expected.len() != got.len() {
        return Err(format!(
            "fixture has {} values, report has {}",
            expected.len(),
            got.len()
        ));
    }
    for ((ek, ev), (gk, gv)) in expected.iter().zip(&got) {
        let ev: f64 = ev.parse().map_err(|_| format!("bad fixture value {ev}"))?;
        if ek != gk || (ev - gv).abs() > TOL_METRIC {
            return Err(format!("{gk} = {gv:.4}, fixture {ek} = {ev:.4}"));
        }
    }

    let refs = read_lines_tokens(&dir.join("ref.txt"));
    let identical = score_corpus(&refs, &refs, BleuMode::Individual).map_err(|e| e.to_string())?;
    if let Some((k, v)) = identical.entries().into_iter().find(|(_, v)| *v != 1.0) {
        return Err(format!("identical corpora give {k} = {v}"));
    }
    Ok(format!(
        "p1 = {p1:.4}, BP = {bp:.4}, {} fixture values, identical = 1",
        got.len()
    ))
}

fn lcs_oracle() -> Outcome {
    let start = Instant::now();
    for (i, (a, b)) in random_pairs(LCS_PAIRS, 4, LCS_MAX_LEN, 2024).iter().enumerate() {
        let (dp, brute) = (lcs_length(a, b), brute_force_lcs(a, b));
        if dp != brute {
            return Err(format!("pair {i}: dp {dp}, brute force {brute}"));
        }
    }
    Ok(format!("{LCS_PAIRS} pairs agree, {}", within(start, LCS_BUDGET)?))
}

/// Trains with a shipped config redirected into `work`, translates the
/// held-out fifth and returns its corpus BLEU-1.
fn train_and_score(config: &str, work: &Path) -> Result<f64, String> {
    let mut cfg = RunConfig::load(&repo_root().join("configs").join(config)).map_err(|e| e.to_string())?;
    cfg.output_dir = work.join("run");
    let conf = work.join(config);
    fs::write(&conf, cfg.resolved()).map_err(|e| e.to_string())?;
    cmd_train(&conf, None, &mut std::io::sink()).map_err(|e| e.to_string())?;
    let run = &cfg.output_dir;
    cmd_translate(
        &run.join("checkpoint.bin"),
        &run.join("test.src"),
        &run.join("test.hyp"),
        None,
    )
    .map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    cmd_score(&run.join("test.hyp"), &run.join("test.ref"), false, false, &mut out).map_err(|e| e.to_string())?;
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    parse_kv(&text)
        .into_iter()
        .find(|(k, _)| k == "bleu1")
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| "score printed no bleu1".to_string())
}

fn toy_convergence(config: &str, threshold: f64, budget: Duration) -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let bleu1 = train_and_score(config, work.path())?;
    let time = within(start, budget)?;
    if bleu1 >= threshold {
        Ok(format!("BLEU-1 {bleu1:.4} >= {threshold}, {time}"))
    } else {
        Err(format!("BLEU-1 {bleu1:.4} < {threshold}, {time}"))
    }
}

fn size_ratio() -> Outcome {
    let ratio = cmd_params(&repo_root().join("configs/desk.conf"), &mut std::io::sink()).map_err(|e| e.to_string())?;
    let defaults = RunConfig::default();
    let mini = Model::new(
        &ModelConfig::MiniFormer(defaults.mini_config(defaults.max_vocab, defaults.max_vocab)),
        0,
    )
    .map_err(|e| e.to_string())?;
    let trans = Model::new(
        &ModelConfig::Transformer(defaults.transformer_config(defaults.max_vocab, defaults.max_vocab)),
        0,
    )
    .map_err(|e| e.to_string())?;
    let default_ratio = mini.store().numel() as f64 / trans.store().numel() as f64;
    if ratio < 1.0 && default_ratio < 1.0 {
        Ok(format!(
            "ratio {ratio:.3} (desk.conf), {default_ratio:.3} (built-in defaults)"
        ))
    } else {
        Err(format!(
            "ratio {ratio:.3} (desk.conf), {default_ratio:.3} (built-in defaults)"
        ))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    copy_task(400, 8, 2, 6, 9)
        .save(&dir.path().join("toy"))
        .map_err(|e| e.to_string())?;
    let conf = dir.path().join("toy.conf");
    fs::write(
        &conf,
        "source = toy.src\ntarget = toy.tgt\noutput_dir = run\nseed = 3\nd_embed = 16\nd_hidden = 16\nmax_epochs = 3\n",
    )
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for _ in 0..2 {
        cmd_train(&conf, None, &mut std::io::sink()).map_err(|e| e.to_string())?;
        runs.push(fs::read(dir.path().join("run/checkpoint.bin")).map_err(|e| e.to_string())?);
    }
    if runs[0] == runs[1] {
        Ok(format!("{} identical bytes", runs[0].len()))
    } else {
        Err("checkpoints differ".into())
    }
}

fn attention_invariants(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, tq, tk, d) = (3, rng.gen_range(1..5), rng.gen_range(1..6), 4);
    let lens: Vec<usize> = (0..b).map(|_| rng.gen_range(1..=tk)).collect();
    let mask = AttentionMask::padding(&lens, tq, tk);
    let mut g = Graph::new();
    let q = g.constant(noise(&[b, tq, d], seed));
    let k = g.constant(noise(&[b, tk, d], seed + 1));
    let out = scaled_dot_attention(&mut g, q, k, k, Some(&mask)).map_err(|e| e.to_string())?;
    for (row, keep) in g.value(out.weights).data().chunks(tk).zip(mask.keep().chunks(tk)) {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > TOL_ATTENTION_SUM {
            return Err(format!("attention row sums to {sum}"));
        }
        if row.iter().zip(keep).any(|(w, &kept)| !kept && *w != 0.0) {
            return Err("masked key received weight".into());
        }
    }
    Ok(())
}

fn causal_invariant(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, t, d) = (2, 5, 4);
    let mut store = ParamStore::new();
    let mha = MultiHeadAttention::new(&mut store, "mha", d, 2, &mut rng).map_err(|e| e.to_string())?;
    let mask = AttentionMask::causal(b, t);
    let run = |input: Tensor| -> Vec<f64> {
        let mut g = Graph::new();
        let v = g.constant(input);
        let y = multi_head_attention(&mut g, &store, &mha, v, v, v, Some(&mask)).unwrap();
        g.value(y).data().to_vec()
    };
    let x = noise(&[b, t, d], seed);
    let pos = rng.gen_range(0..t - 1);
    let mut perturbed = x.clone();
    for row in 0..b {
        for later in pos + 1..t {
            for k in 0..d {
                perturbed.data_mut()[(row * t + later) * d + k] += rng.gen_range(-1.0..1.0);
            }
        }
    }
    let (a, p) = (run(x), run(perturbed));
    for row in 0..b {
        let r = row * t * d..(row * t + pos + 1) * d;
        if a[r.clone()] != p[r] {
            return Err(format!("position <= {pos} changed when later inputs changed"));
        }
    }
    Ok(())
}

fn softmax_invariant(seed: u64) -> Result<(), String> {
    let x = noise(&[3, 5], seed);
    let c = ChaCha8Rng::seed_from_u64(seed).gen_range(-50.0..50.0);
    let shifted = Tensor::new(x.shape(), x.data().iter().map(|v| v + c).collect()).map_err(|e| e.to_string())?;
    let mut g = Graph::new();
    let (a, s) = (g.constant(x), g.constant(shifted));
    let (sa, ss) = (
        g.softmax(a).map_err(|e| e.to_string())?,
        g.softmax(s).map_err(|e| e.to_string())?,
    );
    let diff = g
        .value(sa)
        .data()
        .iter()
        .zip(g.value(ss).data())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    if diff > TOL_SOFTMAX_SHIFT {
        return Err(format!("softmax shifted by {c:.2} moved by {diff:.2e}"));
    }
    Ok(())
}

fn checkpoint_invariant(seed: u64) -> Result<(), String> {
    let cfg = if seed.is_multiple_of(2) {
        ModelConfig::MiniFormer(MiniFormerConfig {
            vocab_src: 7,
            vocab_tgt: 8,
            d_embed: 4,
            d_hidden: 3,
            ..MiniFormerConfig::default()
        })
    } else {
        ModelConfig::Transformer(TransformerConfig {
            vocab_src: 7,
            vocab_tgt: 8,
            d_model: 4,
            n_heads: 2,
            d_ff: 6,
            ..TransformerConfig::default()
        })
    };
    let model = Model::new(&cfg, seed).map_err(|e| e.to_string())?;
    let bytes = encode_checkpoint(&model, None, seed, 0);
    let back = decode_checkpoint(&bytes).map_err(|e| e.to_string())?;
    if encode_checkpoint(&back.model, None, seed, 0) != bytes {
        return Err("re-encoded checkpoint differs".into());
    }
    for ((_, p), (_, q)) in model.store().iter().zip(back.model.store().iter()) {
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if p.name != q.name || bits(&p.value) != bits(&q.value) {
            return Err(format!("parameter {} not restored bit-exactly", p.name));
        }
    }
    Ok(())
}

fn invariants() -> Outcome {
    let checks: [Check; 4] = [
        ("attention", attention_invariants),
        ("causal", causal_invariant),
        ("softmax", softmax_invariant),
        ("checkpoint", checkpoint_invariant),
    ];
    for (name, check) in checks {
        for seed in 0..INVARIANT_TRIALS {
            check(seed).map_err(|e| format!("{name} seed {seed}: {e}"))?;
        }
    }
    Ok(format!("{} checks x {INVARIANT_TRIALS} seeds", checks.len()))
}

fn untrained_loss() -> Outcome {
    let corpus = ParallelCorpus::load(&fixture_dir().join("copy_task/train")).map_err(|e| e.to_string())?;
    let data = prepare_data(
        &corpus,
        &DataConfig {
            seed: 17,
            ..DataConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mini = MiniFormerConfig {
        vocab_src: data.vocab_src.len(),
        vocab_tgt: data.vocab_tgt.len(),
        ..MiniFormerConfig::default()
    };
    let trans = TransformerConfig::matched(&mini, 4, 2, 256);
    let ln_v = (data.vocab_tgt.len() as f64).ln();
    let mut parts = Vec::new();
    for (name, cfg) in [
        ("miniformer", ModelConfig::MiniFormer(mini)),
        ("transformer", ModelConfig::Transformer(trans)),
    ] {
        let model = Model::new(&cfg, 17).map_err(|e| e.to_string())?;
        let loss = evaluate_loss(&model, &data.train).map_err(|e| e.to_string())?;
        let rel = (loss - ln_v).abs() / ln_v;
        if rel > UNTRAINED_LOSS_BAND {
            return Err(format!(
                "{name} initial loss {loss:.4} is {:.1}% from ln V = {ln_v:.4}",
                rel * 100.0
            ));
        }
        parts.push(format!("{name} {loss:.4}"));
    }
    Ok(format!(
        "{} vs ln {} = {ln_v:.4}",
        parts.join(", "),
        data.vocab_tgt.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 gradient suite", gradients),
        ("2 metric oracle fixtures", metric_fixtures),
        ("3 LCS vs brute force", lcs_oracle),
        ("4 Mini-Former copy task", || {
            toy_convergence("copy_task.conf", MINIFORMER_BLEU1, MINIFORMER_BUDGET)
        }),
        ("5 Transformer copy task", || {
            toy_convergence("copy_task_transformer.conf", TRANSFORMER_BLEU1, TRANSFORMER_BUDGET)
        }),
        ("6 size ratio below 1", size_ratio),
        ("7 deterministic training", determinism),
        ("8 invariant suite", invariants),
        ("9 untrained loss near ln V", untrained_loss),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
