use super::{ParallelCorpus, Vocab, BOS, EOS, PAD};
use crate::error::{contract, Result};

/// Padded id matrices for one minibatch, row-major.
///
/// Target rows are `[BOS, tokens.., EOS, PAD..]`; `tgt_lengths` counts the
/// BOS and EOS markers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub size: usize,
    pub src_ids: Vec<usize>,
    pub src_len: usize,
    pub tgt_ids: Vec<usize>,
    pub tgt_len: usize,
    pub src_lengths: Vec<usize>,
    pub tgt_lengths: Vec<usize>,
    /// `true` where the source position holds a real token.
    pub src_pad_mask: Vec<bool>,
}

impl Batch {
    /// Pads raw (unmarked) id sequences into a batch.
    pub fn from_ids(src: &[Vec<usize>], tgt: &[Vec<usize>]) -> Result<Self> {
        if src.len() != tgt.len() || src.is_empty() {
            return Err(contract(format!(
                "batch needs equal non-zero row counts, got {} and {}",
                src.len(),
                tgt.len()
            )));
        }
        if src.iter().any(Vec::is_empty) {
            return Err(contract("empty source sentence in batch"));
        }
        let size = src.len();
        let src_len = src.iter().map(Vec::len).max().unwrap_or(0);
        let tgt_len = tgt.iter().map(|t| t.len() + 2).max().unwrap_or(2);
        let mut src_ids = vec![PAD; size * src_len];
        let mut tgt_ids = vec![PAD; size * tgt_len];
        let mut src_pad_mask = vec![false; size * src_len];
        for (b, (s, t)) in src.iter().zip(tgt).enumerate() {
            src_ids[b * src_len..b * src_len + s.len()].copy_from_slice(s);
            src_pad_mask[b * src_len..b * src_len + s.len()].fill(true);
            let row = &mut tgt_ids[b * tgt_len..(b + 1) * tgt_len];
            row[0] = BOS;
            row[1..=t.len()].copy_from_slice(t);
            row[t.len() + 1] = EOS;
        }
        Ok(Batch {
            size,
            src_ids,
            src_len,
            tgt_ids,
            tgt_len,
            src_lengths: src.iter().map(Vec::len).collect(),
            tgt_lengths: tgt.iter().map(|t| t.len() + 2).collect(),
            src_pad_mask,
        })
    }

    pub fn src_row(&self, b: usize) -> &[usize] {
        &self.src_ids[b * self.src_len..b * self.src_len + self.src_lengths[b]]
    }

    /// Target tokens of row `b` without BOS/EOS.
    pub fn tgt_tokens(&self, b: usize) -> &[usize] {
        &self.tgt_ids[b * self.tgt_len + 1..b * self.tgt_len + self.tgt_lengths[b] - 1]
    }

    /// Decoder inputs `tgt[:, :-1]`, shape `[size, tgt_len - 1]`.
    pub fn decoder_inputs(&self) -> Vec<usize> {
        self.tgt_ids
            .chunks(self.tgt_len)
            .flat_map(|row| row[..self.tgt_len - 1].iter().copied())
            .collect()
    }

    /// Gold next tokens `tgt[:, 1:]` and their non-PAD mask.
    pub fn gold(&self) -> (Vec<usize>, Vec<bool>) {
        let gold: Vec<usize> = self
            .tgt_ids
            .chunks(self.tgt_len)
            .flat_map(|row| row[1..].iter().copied())
            .collect();
        let mask = gold.iter().map(|&t| t != PAD).collect();
        (gold, mask)
    }

    /// Number of predicted (non-PAD gold) positions.
    pub fn target_tokens(&self) -> usize {
        self.tgt_lengths.iter().map(|l| l - 1).sum()
    }

    /// The same rows re-padded with extra trailing PAD columns.
    pub fn with_extra_padding(&self, src_extra: usize, tgt_extra: usize) -> Batch {
        let repad = |ids: &[usize], len: usize, extra: usize| -> Vec<usize> {
            ids.chunks(len)
                .flat_map(|row| row.iter().copied().chain(std::iter::repeat_n(PAD, extra)))
                .collect()
        };
        let src_len = self.src_len + src_extra;
        Batch {
            size: self.size,
            src_ids: repad(&self.src_ids, self.src_len, src_extra),
            src_len,
            tgt_ids: repad(&self.tgt_ids, self.tgt_len, tgt_extra),
            tgt_len: self.tgt_len + tgt_extra,
            src_lengths: self.src_lengths.clone(),
            tgt_lengths: self.tgt_lengths.clone(),
            src_pad_mask: self
                .src_ids
                .chunks(self.src_len)
                .zip(&self.src_lengths)
                .flat_map(|(_, &l)| (0..src_len).map(move |s| s < l))
                .collect(),
        }
    }

    /// Rows in the given order (used for batch-permutation checks).
    pub fn select_rows(&self, order: &[usize]) -> Result<Batch> {
        let src: Vec<Vec<usize>> = order.iter().map(|&b| self.src_row(b).to_vec()).collect();
        let tgt: Vec<Vec<usize>> = order.iter().map(|&b| self.tgt_tokens(b).to_vec()).collect();
        let mut out = Batch::from_ids(&src, &tgt)?;
        if out.src_len < self.src_len || out.tgt_len < self.tgt_len {
            out = out.with_extra_padding(self.src_len - out.src_len, self.tgt_len - out.tgt_len);
        }
        Ok(out)
    }
}

/// Encodes, length-filters, sorts by source length and chunks the corpus.
///
/// Returns the batches and the number of pairs dropped for exceeding
/// `max_len` on either side. The final partial batch is kept.
pub fn make_batches(
    corpus: &ParallelCorpus,
    vocab_src: &Vocab,
    vocab_tgt: &Vocab,
    batch_size: usize,
    max_len: usize,
) -> Result<(Vec<Batch>, usize)> {
    if batch_size == 0 {
        return Err(contract("batch size must be at least 1"));
    }
    let mut encoded: Vec<(Vec<usize>, Vec<usize>)> = corpus
        .pairs
        .iter()
        .filter(|p| p.source.len() <= max_len && p.target.len() <= max_len)
        .map(|p| (vocab_src.encode(&p.source), vocab_tgt.encode(&p.target)))
        .collect();
    let dropped = corpus.len() - encoded.len();
    if encoded.is_empty() {
        return Err(contract(format!("all {} pairs exceed max_len {max_len}", corpus.len())));
    }
    encoded.sort_by_key(|(s, _)| s.len());
    let batches = encoded
        .chunks(batch_size)
        .map(|chunk| {
            let (src, tgt): (Vec<_>, Vec<_>) = chunk.iter().cloned().unzip();
            Batch::from_ids(&src, &tgt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((batches, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SentencePair, UNK};

    fn corpus(n: usize) -> ParallelCorpus {
        ParallelCorpus::from_pairs(
            (0..n)
                .map(|i| SentencePair {
                    source: (0..1 + i % 4).map(|j| format!("a{j}")).collect(),
                    target: (0..1 + i % 3).map(|j| format!("b{j}")).collect(),
                })
                .collect(),
        )
    }

    fn vocabs() -> (Vocab, Vocab) {
        (
            Vocab::from_tokens(["a0", "a1", "a2", "a3"]).unwrap(),
            Vocab::from_tokens(["b0", "b1"]).unwrap(),
        )
    }

    #[test]
    fn batch_sizes_keep_partial_tail() {
        let (vs, vt) = vocabs();
        let (batches, dropped) = make_batches(&corpus(65), &vs, &vt, 32, 64).unwrap();
        assert_eq!(dropped, 0);
        let sizes: Vec<usize> = batches.iter().map(|b| b.size).collect();
        assert_eq!(sizes, vec![32, 32, 1]);
    }

    #[test]
    fn target_rows_are_framed_and_padded() {
        let (vs, vt) = vocabs();
        let (batches, _) = make_batches(&corpus(10), &vs, &vt, 4, 64).unwrap();
        for batch in &batches {
            for row in batch.tgt_ids.chunks(batch.tgt_len) {
                assert_eq!(row[0], BOS);
                assert_eq!(row.iter().filter(|&&t| t == EOS).count(), 1);
                let eos = row.iter().position(|&t| t == EOS).unwrap();
                assert!(row[eos + 1..].iter().all(|&t| t == PAD));
            }
            for (b, &len) in batch.src_lengths.iter().enumerate() {
                for s in 0..batch.src_len {
                    assert_eq!(batch.src_pad_mask[b * batch.src_len + s], s < len);
                    if s >= len {
                        assert_eq!(batch.src_ids[b * batch.src_len + s], PAD);
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_target_token_encodes_to_unk() {
        let (vs, vt) = vocabs();
        let (batches, _) = make_batches(&corpus(3), &vs, &vt, 8, 64).unwrap();
        // third pair's target is b0 b1 b2; b2 is outside the target vocab
        assert!(batches[0].tgt_ids.contains(&UNK));
    }

    #[test]
    fn long_pairs_dropped_and_counted() {
        let (vs, vt) = vocabs();
        let (batches, dropped) = make_batches(&corpus(8), &vs, &vt, 8, 2).unwrap();
        assert_eq!(dropped, 5);
        assert_eq!(batches[0].size, 3);
        assert!(make_batches(&corpus(8), &vs, &vt, 8, 0).is_err());
        assert!(make_batches(&corpus(8), &vs, &vt, 0, 8).is_err());
    }

    #[test]
    fn sorted_by_source_length() {
        let (vs, vt) = vocabs();
        let (batches, _) = make_batches(&corpus(20), &vs, &vt, 5, 64).unwrap();
        let lens: Vec<usize> = batches.iter().flat_map(|b| b.src_lengths.clone()).collect();
        assert!(lens.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn decoder_views() {
        let b = Batch::from_ids(&[vec![5, 6]], &[vec![7, 8, 9]]).unwrap();
        assert_eq!(b.tgt_ids, vec![BOS, 7, 8, 9, EOS]);
        assert_eq!(b.decoder_inputs(), vec![BOS, 7, 8, 9]);
        assert_eq!(b.gold(), (vec![7, 8, 9, EOS], vec![true; 4]));
        assert_eq!(b.tgt_tokens(0), &[7, 8, 9]);
        let p = b.with_extra_padding(2, 1);
        assert_eq!(p.src_ids, vec![5, 6, PAD, PAD]);
        assert_eq!(p.gold().1, vec![true, true, true, true, false]);
    }
}
