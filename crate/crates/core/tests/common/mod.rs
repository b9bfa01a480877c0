#![allow(dead_code)]

use audiocap::captioner::{ModelConfig, ModelParams};
use audiocap::corpus::EOS;
use audiocap::dsp::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// H=8, V=20, D=6 configuration used by the gradient checks.
pub fn tiny_config(alpha: f64) -> ModelConfig {
    ModelConfig {
        feat_dim: 6,
        enc_hidden: 8,
        v_dim: 4,
        dec_hidden: 8,
        word_emb_dim: 5,
        vocab_size: 20,
        sent_emb_dim: 10,
        alpha,
        max_decode_len: 12,
    }
}

pub struct TinyCase {
    pub params: ModelParams<f64>,
    pub features: FeatureMatrix,
    pub ids: Vec<usize>,
    pub target: Vec<f32>,
}

/// Random parameters (wider than the default init so every gate is
/// exercised), `frames` feature rows and a `len`-token caption plus EOS.
pub fn tiny_case(cfg: &ModelConfig, seed: u64, frames: usize, len: usize) -> TinyCase {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut params = ModelParams::<f64>::zeros(cfg);
    for (_, t) in params.tensors_mut() {
        for v in t.as_mut_slice() {
            *v = rng.gen_range(-0.6..0.6);
        }
    }
    let data = (0..frames * cfg.feat_dim).map(|_| rng.gen_range(-2.0f32..2.0)).collect();
    let features = FeatureMatrix::new(frames, cfg.feat_dim, data).unwrap();
    let mut ids: Vec<usize> = (0..len).map(|_| rng.gen_range(4..cfg.vocab_size)).collect();
    ids.push(EOS);
    let target = (0..cfg.sent_emb_dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    TinyCase {
        params,
        features,
        ids,
        target,
    }
}

/// Independent straight-line evaluation of the full model loss, written
/// against raw parameter slices rather than the library layers.
pub mod oracle {
    use super::*;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn lin(w: &[f64], b: &[f64], x: &[f64], row: usize) -> f64 {
        let n = x.len();
        b[row] + (0..n).map(|k| w[row * n + k] * x[k]).sum::<f64>()
    }

    pub fn gru(w_ih: &[f64], w_hh: &[f64], b_ih: &[f64], b_hh: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
        let hs = h.len();
        (0..hs)
            .map(|j| {
                let r = sig(lin(w_ih, b_ih, x, j) + lin(w_hh, b_hh, h, j));
                let z = sig(lin(w_ih, b_ih, x, hs + j) + lin(w_hh, b_hh, h, hs + j));
                let n = (lin(w_ih, b_ih, x, 2 * hs + j) + r * lin(w_hh, b_hh, h, 2 * hs + j)).tanh();
                (1.0 - z) * n + z * h[j]
            })
            .collect()
    }

    fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
        let n = rows.len() as f64;
        (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
    }

    fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        (0..b.len()).map(|i| lin(w, b, x, i)).collect()
    }

    /// `v` for the encoder described by `p`.
    pub fn encode(cfg: &ModelConfig, p: &ModelParams<f64>, f: &FeatureMatrix) -> Vec<f64> {
        let t: Vec<&[f64]> = p.tensors().iter().map(|(_, t)| t.as_slice()).collect();
        let mut h = vec![0.0; cfg.enc_hidden];
        let mut states = Vec::new();
        for row in f.rows() {
            let x: Vec<f64> = row.iter().map(|&v| v as f64).collect();
            h = gru(t[0], t[1], t[2], t[3], &x, &h);
            states.push(h.clone());
        }
        affine(t[4], t[5], &mean(&states))
    }

    /// `(ce, sentence)` for one teacher-forced caption.
    pub fn loss(cfg: &ModelConfig, p: &ModelParams<f64>, f: &FeatureMatrix, ids: &[usize], target: &[f32]) -> (f64, f64) {
        let t: Vec<&[f64]> = p.tensors().iter().map(|(_, t)| t.as_slice()).collect();
        let v = encode(cfg, p, f);
        let e = cfg.word_emb_dim;
        let mut h = vec![0.0; cfg.dec_hidden];
        let mut prev = 1usize;
        let mut ce = 0.0;
        let mut states = Vec::new();
        for &target_id in ids {
            let mut x = t[6][prev * e..(prev + 1) * e].to_vec();
            x.extend_from_slice(&v);
            h = gru(t[7], t[8], t[9], t[10], &x, &h);
            states.push(h.clone());
            let logits = affine(t[11], t[12], &h);
            let lse = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
            ce += lse - logits[target_id];
            prev = target_id;
        }
        let pred = affine(t[13], t[14], &mean(&states));
        let tgt: Vec<f64> = target.iter().map(|&v| v as f64).collect();
        let dot: f64 = pred.iter().zip(&tgt).map(|(a, b)| a * b).sum();
        let na = pred.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb = tgt.iter().map(|b| b * b).sum::<f64>().sqrt();
        (ce, 1.0 - dot / (na * nb).max(1e-8))
    }
}

pub mod dd;
pub mod synth;
pub mod wavs;

use audiocap::numcore::{grad_check, GradCheckReport};

/// Central-difference check of the full combined-loss gradient.
///
/// The analytic gradient comes from the `f64` backward pass. The loss is
/// re-evaluated in double-double arithmetic and the closure returns its
/// offset from the unperturbed loss, so the difference quotient is not
/// limited by the rounding of a loss of order 10 in `f64`.
pub fn full_model_grad_check(case: &TinyCase, alpha: f64) -> GradCheckReport {
    use dd::Dd;
    let p = &case.params;
    let (_, cache) = p
        .forward_loss(&case.features, &case.ids, Some(&case.target), alpha)
        .unwrap();
    let analytic = p.backward(&cache).unwrap().flatten();

    let base_flat = p.flatten();
    let mut probe: ModelParams<Dd> = p.cast();
    let mut eval = |flat: &[f64]| -> Dd {
        let wide: Vec<Dd> = flat.iter().map(|&v| Dd::from_f64(v)).collect();
        probe.unflatten_from(&wide);
        probe
            .forward_loss(&case.features, &case.ids, Some(&case.target), alpha)
            .unwrap()
            .1
            .combined_loss()
    };
    let base = eval(&base_flat);
    grad_check(&base_flat, &analytic, 1e-5, |flat| {
        use audiocap::numcore::Real;
        (eval(flat) - base).as_f64()
    })
}
