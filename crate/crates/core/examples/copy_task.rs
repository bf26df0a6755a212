//! Trains a model on the synthetic copy task and scores the held-out fifth.
//!
//! `cargo run --release --example copy_task -- [miniformer|transformer]`

use miniformer::data::copy_task;
use miniformer::metrics::{score_corpus, BleuMode};
use miniformer::models::{count_params, MiniFormerConfig, Model, ModelConfig, ModelKind, TransformerConfig};
use miniformer::training::{fit, prepare_data, translate_sentences, AdamState, DataConfig, TrainConfig};

fn main() -> miniformer::Result<()> {
    let kind: ModelKind = std::env::args().nth(1).as_deref().unwrap_or("miniformer").parse()?;
    let corpus = copy_task(2000, 20, 3, 10, 17);
    let data = prepare_data(
        &corpus,
        &DataConfig {
            seed: 17,
            ..DataConfig::default()
        },
    )?;
    let mini = MiniFormerConfig {
        vocab_src: data.vocab_src.len(),
        vocab_tgt: data.vocab_tgt.len(),
        ..MiniFormerConfig::default()
    };
    let config = match kind {
        ModelKind::MiniFormer => ModelConfig::MiniFormer(mini),
        ModelKind::Transformer => ModelConfig::Transformer(TransformerConfig::matched(&mini, 4, 2, 256)),
    };
    let mut model = Model::new(&config, 17)?;
    println!("{kind}: {} parameters", count_params(&model).total);
    let mut adam = AdamState::new(miniformer::models::Seq2Seq::store(&model), 1e-3);
    let train = TrainConfig {
        seed: 17,
        ..TrainConfig::default()
    };
    let report = fit(&mut model, &mut adam, &data.train, &data.val, &train, |log| {
        println!("{log}")
    })?;
    println!("best epoch {}", report.best_epoch);
    let sources: Vec<Vec<String>> = data.test.sources().map(<[String]>::to_vec).collect();
    let refs: Vec<Vec<String>> = data.test.targets().map(<[String]>::to_vec).collect();
    let hyps = translate_sentences(&model, &data.vocab_src, &data.vocab_tgt, &sources, 20, 64)?;
    let scores = score_corpus(&hyps, &refs, BleuMode::Individual)?;
    print!("{}", scores.table(&kind.to_string()));
    Ok(())
}
