//! Writes a synthetic copy-task corpus as `<prefix>.src` / `<prefix>.tgt`.
//!
//! `cargo run --example copy_corpus -- <prefix> [pairs] [vocab] [min_len] [max_len] [seed]`

use std::path::PathBuf;

use miniformer::data::copy_task;

fn main() -> miniformer::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let prefix = PathBuf::from(args.first().map(String::as_str).unwrap_or("copy"));
    let num = |i: usize, default: u64| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let corpus = copy_task(
        num(1, 2000) as usize,
        num(2, 20) as usize,
        num(3, 3) as usize,
        num(4, 10) as usize,
        num(5, 17),
    );
    corpus.save(&prefix)?;
    println!("wrote {} pairs to {}.{{src,tgt}}", corpus.len(), prefix.display());
    Ok(())
}
