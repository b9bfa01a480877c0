use super::{LossReport, ModelError, ModelParams, COSINE_EPS};
use crate::corpus::{EOS, SOS};
use crate::dsp::FeatureMatrix;
use crate::numcore::{
    cosine_dissim_backward, cosine_dissim_forward, mean_pool_backward, mean_pool_forward,
    softmax_ce_backward, softmax_ce_forward, CosineCache, GruCache, Real, SoftmaxCeCache,
};

#[derive(Debug, Clone)]
pub struct EncoderCache<R> {
    steps: Vec<GruCache<R>>,
    pooled: Vec<R>,
}

/// Shifted decoder streams for one caption.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherForcing<R> {
    /// `[SOS, gt_1, ..., gt_{L-1}]`
    pub inputs: Vec<usize>,
    /// `[gt_1, ..., gt_L = EOS]`
    pub targets: Vec<usize>,
    /// `concat(word_emb[inputs[t]], v)` per step.
    pub step_inputs: Vec<Vec<R>>,
}

#[derive(Debug, Clone)]
struct SentenceCache<R> {
    pooled: Vec<R>,
    cosine: CosineCache<R>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<R> {
    encoder: EncoderCache<R>,
    inputs: Vec<usize>,
    decoder_steps: Vec<GruCache<R>>,
    hidden: Vec<Vec<R>>,
    ce: Vec<SoftmaxCeCache<R>>,
    sentence: Option<SentenceCache<R>>,
    alpha: R,
    ce_value: R,
    sentence_value: Option<R>,
}

impl<R: Real> ForwardCache<R> {
    /// Combined loss in the working precision (the report holds it rounded
    /// to `f64`).
    pub fn combined_loss(&self) -> R {
        match self.sentence_value {
            Some(s) => self.ce_value + self.alpha * s,
            None => self.ce_value,
        }
    }
}

impl<R: Real> ModelParams<R> {
    fn check_features(&self, f: &FeatureMatrix) -> Result<(), ModelError> {
        if f.frames() == 0 {
            return Err(ModelError::EmptySequence);
        }
        if f.dims() != self.encoder.input_size() {
            return Err(ModelError::DimensionMismatch {
                expected: self.encoder.input_size(),
                found: f.dims(),
            });
        }
        Ok(())
    }

    /// Audio embedding `v`: encoder GRU from a zero state over all frames,
    /// mean-pooled, then projected by `enc_proj`.
    pub fn encode(&self, f: &FeatureMatrix) -> Result<(Vec<R>, EncoderCache<R>), ModelError> {
        self.check_features(f)?;
        let mut h = vec![R::zero(); self.encoder.hidden_size()];
        let mut steps = Vec::with_capacity(f.frames());
        let mut states = Vec::with_capacity(f.frames());
        let mut x = vec![R::zero(); f.dims()];
        for row in f.rows() {
            for (xi, &v) in x.iter_mut().zip(row) {
                *xi = R::lit(v as f64);
            }
            let (next, cache) = self.encoder.forward(&x, &h)?;
            steps.push(cache);
            states.push(next.clone());
            h = next;
        }
        let pooled = mean_pool_forward(&states)?;
        let v = self.enc_proj.forward(&pooled)?;
        Ok((v, EncoderCache { steps, pooled }))
    }

    fn step_input(&self, token: usize, v: &[R]) -> Result<Vec<R>, ModelError> {
        let mut x = self.word_emb.forward(token)?.to_vec();
        x.extend_from_slice(v);
        Ok(x)
    }

    /// Shift-by-one decoder inputs and targets for an encoded caption
    /// (`ids` must end with EOS).
    pub fn teacher_forced_step_inputs(&self, v: &[R], ids: &[usize]) -> Result<TeacherForcing<R>, ModelError> {
        if ids.last() != Some(&EOS) {
            return Err(ModelError::EmptyCaption);
        }
        let vocab = self.word_emb.vocab_size();
        if let Some(&id) = ids.iter().find(|&&id| id >= vocab) {
            return Err(ModelError::TokenOutOfRange { id, vocab });
        }
        let inputs: Vec<usize> = std::iter::once(SOS).chain(ids[..ids.len() - 1].iter().copied()).collect();
        let step_inputs = inputs
            .iter()
            .map(|&tok| self.step_input(tok, v))
            .collect::<Result<_, _>>()?;
        Ok(TeacherForcing {
            inputs,
            targets: ids.to_vec(),
            step_inputs,
        })
    }

    /// Teacher-forced loss of one (audio, caption) pair.
    ///
    /// `ids` is the encoded caption ending with EOS. With `sentence_target`
    /// present the report includes the cosine sentence loss against it and
    /// `combined = ce + alpha * sentence`; otherwise `combined = ce`.
    pub fn forward_loss(
        &self,
        f: &FeatureMatrix,
        ids: &[usize],
        sentence_target: Option<&[f32]>,
        alpha: f64,
    ) -> Result<(LossReport, ForwardCache<R>), ModelError> {
        let (v, encoder) = self.encode(f)?;
        let tf = self.teacher_forced_step_inputs(&v, ids)?;

        let mut h = vec![R::zero(); self.decoder.hidden_size()];
        let mut decoder_steps = Vec::with_capacity(ids.len());
        let mut hidden = Vec::with_capacity(ids.len());
        let mut ce_caches = Vec::with_capacity(ids.len());
        let mut ce = R::zero();
        for (x, &target) in tf.step_inputs.iter().zip(&tf.targets) {
            let (next, cache) = self.decoder.forward(x, &h)?;
            let logits = self.out_proj.forward(&next)?;
            let (loss, ce_cache) = softmax_ce_forward(&logits, target)?;
            ce += loss;
            decoder_steps.push(cache);
            ce_caches.push(ce_cache);
            hidden.push(next.clone());
            h = next;
        }

        let (sentence, sentence_loss) = match sentence_target {
            Some(target) => {
                let expected = self.sent_proj.output_dim();
                if target.len() != expected
                    || target.iter().any(|v| !v.is_finite())
                    || target.iter().all(|&v| v == 0.0)
                {
                    return Err(ModelError::BadSentenceEmbedding { expected });
                }
                let target: Vec<R> = target.iter().map(|&v| R::lit(v as f64)).collect();
                let pooled = mean_pool_forward(&hidden)?;
                let predicted = self.sent_proj.forward(&pooled)?;
                let (loss, cosine) = cosine_dissim_forward(&predicted, &target, R::lit(COSINE_EPS))?;
                (Some(SentenceCache { pooled, cosine }), Some(loss))
            }
            None => (None, None),
        };

        let ce_value = ce;
        let ce = ce.as_f64();
        let sentence_value = sentence_loss;
        let sentence_loss = sentence_loss.map(Real::as_f64);
        let combined = ce + sentence_loss.map_or(0.0, |s| alpha * s);
        let report = LossReport {
            ce,
            sentence: sentence_loss,
            combined,
            token_count: ids.len(),
        };
        Ok((
            report,
            ForwardCache {
                encoder,
                inputs: tf.inputs,
                decoder_steps,
                hidden,
                ce: ce_caches,
                sentence,
                alpha: R::lit(alpha),
                ce_value,
                sentence_value,
            },
        ))
    }

    /// Gradient of the combined loss, accumulated into `grads`.
    pub fn backward_into(&self, cache: &ForwardCache<R>, grads: &mut ModelParams<R>) -> Result<(), ModelError> {
        let steps = cache.hidden.len();
        let emb_dim = self.word_emb.dim();
        let hidden_size = self.decoder.hidden_size();

        // sentence branch: cosine -> sent_proj -> mean pool over decoder states
        let mut dh_sentence = vec![R::zero(); hidden_size];
        if let Some(s) = &cache.sentence {
            if cache.alpha != R::zero() {
                let dpred = cosine_dissim_backward(&s.cosine, cache.alpha);
                let dpooled = self.sent_proj.backward(&s.pooled, &dpred, &mut grads.sent_proj)?;
                dh_sentence = mean_pool_backward(&dpooled, steps)?;
            }
        }

        let mut dv = vec![R::zero(); self.enc_proj.output_dim()];
        let mut dh_next = vec![R::zero(); hidden_size];
        for t in (0..steps).rev() {
            let dlogits = softmax_ce_backward(&cache.ce[t], R::one());
            let mut dh = self.out_proj.backward(&cache.hidden[t], &dlogits, &mut grads.out_proj)?;
            for ((d, &s), &n) in dh.iter_mut().zip(&dh_sentence).zip(&dh_next) {
                *d += s + n;
            }
            let (dx, dh_prev) = self.decoder.backward(&cache.decoder_steps[t], &dh, &mut grads.decoder)?;
            self.word_emb.backward(cache.inputs[t], &dx[..emb_dim], &mut grads.word_emb)?;
            for (a, &b) in dv.iter_mut().zip(&dx[emb_dim..]) {
                *a += b;
            }
            dh_next = dh_prev;
        }

        let enc = &cache.encoder;
        let dpooled = self.enc_proj.backward(&enc.pooled, &dv, &mut grads.enc_proj)?;
        let dh_each = mean_pool_backward(&dpooled, enc.steps.len())?;
        let mut dh_next = vec![R::zero(); self.encoder.hidden_size()];
        for step in enc.steps.iter().rev() {
            let dh: Vec<R> = dh_each.iter().zip(&dh_next).map(|(&a, &b)| a + b).collect();
            let (_, dh_prev) = self.encoder.backward(step, &dh, &mut grads.encoder)?;
            dh_next = dh_prev;
        }
        Ok(())
    }

    /// Gradient of the combined loss as a fresh parameter-shaped struct.
    pub fn backward(&self, cache: &ForwardCache<R>) -> Result<ModelParams<R>, ModelError> {
        let mut grads = self.zeros_like();
        self.backward_into(cache, &mut grads)?;
        Ok(grads)
    }
}
