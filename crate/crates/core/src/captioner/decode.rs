use super::{ModelError, ModelParams};
use crate::corpus::{Vocabulary, EOS, PAD, SOS};
use crate::dsp::FeatureMatrix;
use crate::numcore::Real;

impl<R: Real> ModelParams<R> {
    /// Greedy token ids (EOS excluded) for standardized features.
    ///
    /// Decoding starts from SOS and a zero hidden state, feeds
    /// `[word_emb(prev); v]` at each step and stops at EOS or after
    /// `max_len` tokens. PAD and SOS are never valid predictions and are
    /// excluded from the argmax; ties go to the smallest id.
    pub fn greedy_decode_ids(&self, f: &FeatureMatrix, max_len: usize) -> Result<Vec<usize>, ModelError> {
        let (v, _) = self.encode(f)?;
        let mut h = vec![R::zero(); self.decoder.hidden_size()];
        let mut prev = SOS;
        let mut out = Vec::new();
        let mut x = Vec::with_capacity(self.decoder.input_size());
        for _ in 0..max_len {
            x.clear();
            x.extend_from_slice(self.word_emb.forward(prev)?);
            x.extend_from_slice(&v);
            let (next, _) = self.decoder.forward(&x, &h)?;
            let logits = self.out_proj.forward(&next)?;
            let mut best = EOS;
            for (id, &l) in logits.iter().enumerate() {
                if id == PAD || id == SOS {
                    continue;
                }
                if l > logits[best] || (l == logits[best] && id < best) {
                    best = id;
                }
            }
            if best == EOS {
                break;
            }
            out.push(best);
            prev = best;
            h = next;
        }
        Ok(out)
    }

    /// Greedy caption as surface tokens; UNK predictions are dropped.
    pub fn greedy_decode(&self, f: &FeatureMatrix, vocab: &Vocabulary, max_len: usize) -> Result<Vec<String>, ModelError> {
        Ok(vocab.decode(&self.greedy_decode_ids(f, max_len)?))
    }
}
