use std::fmt::Write;
use std::hash::Hash;

use super::{
    bleu_n, brevity_penalty, check_parallel, cumulative_bleu, modified_precision, rouge, rouge_sentence, BleuMode,
    RougeVariant, SENTENCE_EPS,
};
use crate::error::{contract, Result};

/// Precision, recall and F1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

/// BLEU-1..4 plus ROUGE-1, ROUGE-2 and ROUGE-L triples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub bleu: [f64; 4],
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
}

impl MetricReport {
    /// `metric=value` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .bleu
            .iter()
            .enumerate()
            .map(|(i, &b)| (format!("bleu{}", i + 1), b))
            .collect();
        for (name, s) in [
            ("rouge1", self.rouge1),
            ("rouge2", self.rouge2),
            ("rougeL", self.rouge_l),
        ] {
            out.push((format!("{name}_p"), s.p));
            out.push((format!("{name}_r"), s.r));
            out.push((format!("{name}_f"), s.f));
        }
        out
    }

    pub fn kv_lines(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v:.4}\n"))
            .collect()
    }

    /// One table row per system, BLEU columns then ROUGE P/R/F cells.
    pub fn table(&self, system: &str) -> String {
        let header = [
            "Metric", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-1", "ROUGE-2", "ROUGE-L",
        ];
        let mut cells = vec![system.to_string()];
        cells.extend(self.bleu.iter().map(|b| format!("{b:.4}")));
        for s in [self.rouge1, self.rouge2, self.rouge_l] {
            cells.push(format!("P:{:.4} R:{:.4} F:{:.4}", s.p, s.r, s.f));
        }
        let widths: Vec<usize> = header.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
        let row = |items: &[String]| {
            let mut line = String::from("|");
            for (item, w) in items.iter().zip(&widths) {
                let _ = write!(line, " {item:<w$} |");
            }
            line.push('\n');
            line
        };
        let rule: String = {
            let mut s = String::from("|");
            for w in &widths {
                s.push_str(&"-".repeat(w + 2));
                s.push('|');
            }
            s.push('\n');
            s
        };
        let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
        format!("{}{}{}", row(&header), rule, row(&cells))
    }
}

/// Corpus-level scores.
pub fn score_corpus<T: Hash + Eq + Clone>(hyps: &[Vec<T>], refs: &[Vec<T>], mode: BleuMode) -> Result<MetricReport> {
    check_parallel(hyps, refs)?;
    if hyps.is_empty() {
        return Err(contract("cannot score an empty corpus"));
    }
    let mut bleu = [0.0; 4];
    for (n, b) in bleu.iter_mut().enumerate() {
        *b = match mode {
            BleuMode::Individual => bleu_n(hyps, refs, n + 1)?,
            BleuMode::Cumulative => cumulative_bleu(hyps, refs, n + 1)?,
        };
    }
    Ok(MetricReport {
        bleu,
        rouge1: rouge(hyps, refs, RougeVariant::N(1))?,
        rouge2: rouge(hyps, refs, RougeVariant::N(2))?,
        rouge_l: rouge(hyps, refs, RougeVariant::L)?,
    })
}

fn sentence_report<T: Hash + Eq + Clone>(hyp: &[T], reference: &[T], mode: BleuMode) -> Result<MetricReport> {
    let h = [hyp.to_vec()];
    let r = [reference.to_vec()];
    let bp = brevity_penalty(hyp.len(), reference.len());
    let mut precisions = [0.0; 4];
    for (n, p) in precisions.iter_mut().enumerate() {
        let (m, t) = modified_precision(&h, &r, n + 1)?;
        *p = m as f64 / (t as f64 + SENTENCE_EPS);
    }
    let mut bleu = [0.0; 4];
    for n in 0..4 {
        bleu[n] = match mode {
            BleuMode::Individual => bp * precisions[n],
            BleuMode::Cumulative if precisions[..=n].contains(&0.0) => 0.0,
            BleuMode::Cumulative => {
                let mean = precisions[..=n].iter().map(|p| p.ln()).sum::<f64>() / (n + 1) as f64;
                bp * mean.exp()
            }
        };
    }
    Ok(MetricReport {
        bleu,
        rouge1: rouge_sentence(hyp, reference, RougeVariant::N(1))?,
        rouge2: rouge_sentence(hyp, reference, RougeVariant::N(2))?,
        rouge_l: rouge_sentence(hyp, reference, RougeVariant::L)?,
    })
}

/// Per-sentence reports, plus their unweighted mean.
pub fn score_sentences<T: Hash + Eq + Clone>(
    hyps: &[Vec<T>],
    refs: &[Vec<T>],
    mode: BleuMode,
) -> Result<(Vec<MetricReport>, MetricReport)> {
    check_parallel(hyps, refs)?;
    if hyps.is_empty() {
        return Err(contract("cannot score an empty corpus"));
    }
    let reports = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| sentence_report(h, r, mode))
        .collect::<Result<Vec<_>>>()?;
    let k = reports.len() as f64;
    let mut mean = MetricReport::default();
    for rep in &reports {
        for n in 0..4 {
            mean.bleu[n] += rep.bleu[n] / k;
        }
        for (dst, src) in [
            (&mut mean.rouge1, rep.rouge1),
            (&mut mean.rouge2, rep.rouge2),
            (&mut mean.rouge_l, rep.rouge_l),
        ] {
            dst.p += src.p / k;
            dst.r += src.r / k;
            dst.f += src.f / k;
        }
    }
    Ok((reports, mean))
}
