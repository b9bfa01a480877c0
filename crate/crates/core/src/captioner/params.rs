use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{ModelConfig, ModelError};
use crate::numcore::{init_uniform, Affine, Embedding, GruCell, Real, Tensor};

pub const TENSOR_COUNT: usize = 15;

/// Checkpoint names of the learnable tensors, in iteration order.
pub const TENSOR_NAMES: [&str; TENSOR_COUNT] = [
    "encoder.w_ih",
    "encoder.w_hh",
    "encoder.b_ih",
    "encoder.b_hh",
    "enc_proj.weight",
    "enc_proj.bias",
    "word_emb",
    "decoder.w_ih",
    "decoder.w_hh",
    "decoder.b_ih",
    "decoder.b_hh",
    "out_proj.weight",
    "out_proj.bias",
    "sent_proj.weight",
    "sent_proj.bias",
];

/// All learnable tensors of the captioner. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<R> {
    pub encoder: GruCell<R>,
    pub enc_proj: Affine<R>,
    pub word_emb: Embedding<R>,
    pub decoder: GruCell<R>,
    pub out_proj: Affine<R>,
    pub sent_proj: Affine<R>,
}

impl<R: Real> ModelParams<R> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            encoder: GruCell::zeros(cfg.feat_dim, cfg.enc_hidden),
            enc_proj: Affine::zeros(cfg.enc_hidden, cfg.v_dim),
            word_emb: Embedding::zeros(cfg.vocab_size, cfg.word_emb_dim),
            decoder: GruCell::zeros(cfg.word_emb_dim + cfg.v_dim, cfg.dec_hidden),
            out_proj: Affine::zeros(cfg.dec_hidden, cfg.vocab_size),
            sent_proj: Affine::zeros(cfg.dec_hidden, cfg.sent_emb_dim),
        }
    }

    /// Every tensor drawn from uniform(-1/√H, 1/√H), where H is the hidden
    /// size of the GRU the tensor belongs to or reads from.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut p = Self::zeros(cfg);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let enc_bound = 1.0 / (cfg.enc_hidden as f64).sqrt();
        let dec_bound = 1.0 / (cfg.dec_hidden as f64).sqrt();
        for (name, t) in p.tensors_mut() {
            let bound = if name.starts_with("enc") { enc_bound } else { dec_bound };
            init_uniform(t, bound, &mut rng);
        }
        p
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor<R>); TENSOR_COUNT] {
        let [e0, e1, e2, e3] = self.encoder.tensors();
        let [d0, d1, d2, d3] = self.decoder.tensors();
        let t = [
            e0,
            e1,
            e2,
            e3,
            &self.enc_proj.weight,
            &self.enc_proj.bias,
            &self.word_emb.table,
            d0,
            d1,
            d2,
            d3,
            &self.out_proj.weight,
            &self.out_proj.bias,
            &self.sent_proj.weight,
            &self.sent_proj.bias,
        ];
        let mut i = 0;
        t.map(|x| {
            i += 1;
            (TENSOR_NAMES[i - 1], x)
        })
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<R>); TENSOR_COUNT] {
        let [e0, e1, e2, e3] = self.encoder.tensors_mut();
        let [d0, d1, d2, d3] = self.decoder.tensors_mut();
        let t = [
            e0,
            e1,
            e2,
            e3,
            &mut self.enc_proj.weight,
            &mut self.enc_proj.bias,
            &mut self.word_emb.table,
            d0,
            d1,
            d2,
            d3,
            &mut self.out_proj.weight,
            &mut self.out_proj.bias,
            &mut self.sent_proj.weight,
            &mut self.sent_proj.bias,
        ];
        let mut i = 0;
        t.map(|x| {
            i += 1;
            (TENSOR_NAMES[i - 1], x)
        })
    }

    /// Expected tensor shapes for `cfg`, in [`TENSOR_NAMES`] order.
    pub fn expected_shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
        Self::zeros(cfg)
            .tensors()
            .iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect()
    }

    /// Builds parameters from named tensors, failing on the first shape that
    /// disagrees with `cfg`.
    pub fn from_tensors(cfg: &ModelConfig, tensors: Vec<Tensor<R>>) -> Result<Self, ModelError> {
        let mut p = Self::zeros(cfg);
        if tensors.len() != TENSOR_COUNT {
            return Err(ModelError::ParamShape {
                name: "tensor count",
                expected: vec![TENSOR_COUNT],
                found: vec![tensors.len()],
            });
        }
        for ((name, slot), t) in p.tensors_mut().into_iter().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(ModelError::ParamShape {
                    name,
                    expected: slot.shape().to_vec(),
                    found: t.shape().to_vec(),
                });
            }
            *slot = t;
        }
        Ok(p)
    }

    pub fn cast<S: Real>(&self) -> ModelParams<S> {
        ModelParams {
            encoder: GruCell {
                w_ih: self.encoder.w_ih.cast(),
                w_hh: self.encoder.w_hh.cast(),
                b_ih: self.encoder.b_ih.cast(),
                b_hh: self.encoder.b_hh.cast(),
            },
            enc_proj: Affine {
                weight: self.enc_proj.weight.cast(),
                bias: self.enc_proj.bias.cast(),
            },
            word_emb: Embedding {
                table: self.word_emb.table.cast(),
            },
            decoder: GruCell {
                w_ih: self.decoder.w_ih.cast(),
                w_hh: self.decoder.w_hh.cast(),
                b_ih: self.decoder.b_ih.cast(),
                b_hh: self.decoder.b_hh.cast(),
            },
            out_proj: Affine {
                weight: self.out_proj.weight.cast(),
                bias: self.out_proj.bias.cast(),
            },
            sent_proj: Affine {
                weight: self.sent_proj.weight.cast(),
                bias: self.sent_proj.bias.cast(),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn fill_zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill(R::zero());
        }
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: R, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.axpy(scale, b);
        }
    }

    pub fn scale(&mut self, factor: R) {
        for (_, t) in self.tensors_mut() {
            t.scale(factor);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.sum_squares()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// All entries concatenated in [`TENSOR_NAMES`] order.
    pub fn flatten(&self) -> Vec<R> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t.as_slice());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten_from(&mut self, flat: &[R]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut off = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }
}
