mod common;

use audiocap::corpus::{read_embeddings, write_embeddings};
use audiocap::dsp::FeatureStats;
use audiocap::trainer::{
    decode_checkpoint, encode_checkpoint, train, Captioner, LossMode, TrainConfig, TrainError, TrainInputs, Validation,
};
use common::synth::{single_caption_corpus, small_arch};
use std::path::Path;

fn config(epochs: usize, mode: LossMode) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        loss_mode: mode,
        seed: 5,
        arch: small_arch(),
        ..TrainConfig::default()
    }
}

#[test]
fn single_epoch_selects_epoch_one() {
    let (clips, emb) = single_caption_corpus(10, 6, 5, 16, 1);
    let out = train::<f64>(TrainInputs::new(&clips, Some(&emb)), &config(1, LossMode::Combined), |_| {}).unwrap();
    assert_eq!(out.checkpoint.epoch, 1);
    assert_eq!(out.log.len(), 1);
    assert_eq!(out.checkpoint.best_val_cider, out.log[0].val_cider);
    assert_eq!((out.train_ids.len(), out.val_ids.len()), (9, 1));
}

#[test]
fn best_cider_is_max_of_log_and_loss_drops() {
    let (clips, emb) = single_caption_corpus(12, 5, 4, 16, 2);
    let val = clips[..4].to_vec();
    let inputs = TrainInputs {
        validation: Validation::Clips(&val),
        ..TrainInputs::new(&clips, Some(&emb))
    };
    let mut seen = Vec::new();
    let out = train::<f64>(inputs, &TrainConfig { adam: audiocap::trainer::AdamConfig { lr: 3e-3, ..Default::default() }, ..config(30, LossMode::Combined) }, |r| seen.push(*r)).unwrap();
    assert_eq!(seen, out.log);
    let max = out.log.iter().map(|r| r.val_cider).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.checkpoint.best_val_cider, max);
    let first = out.log.iter().position(|r| r.val_cider == max).unwrap();
    assert_eq!(out.checkpoint.epoch, first + 1);
    for r in &out.log {
        assert!(r.ce >= 0.0);
        let s = r.sentence.unwrap();
        assert!((0.0..=2.0).contains(&s));
        assert!((r.combined - (r.ce + 10.0 * s)).abs() <= 1e-9 * r.combined.abs().max(1.0));
    }
    assert!(out.log.last().unwrap().combined < out.log[0].combined);
}

#[test]
fn f64_runs_are_bit_identical() {
    let (clips, emb) = single_caption_corpus(10, 5, 4, 16, 3);
    let cfg = config(3, LossMode::Combined);
    let a = train::<f64>(TrainInputs::new(&clips, Some(&emb)), &cfg, |_| {}).unwrap();
    let b = train::<f64>(TrainInputs::new(&clips, Some(&emb)), &cfg, |_| {}).unwrap();
    assert_eq!(encode_checkpoint(&a.checkpoint), encode_checkpoint(&b.checkpoint));
    assert_eq!(a.log, b.log);
    assert_eq!(a.final_params, b.final_params);
}

#[test]
fn thread_count_does_not_change_result() {
    let (clips, emb) = single_caption_corpus(10, 5, 4, 16, 4);
    let cfg = TrainConfig { batch_size: 9, ..config(2, LossMode::Combined) };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train::<f64>(TrainInputs::new(&clips, Some(&emb)), &cfg, |_| {}).unwrap())
    };
    assert_eq!(run(1).final_params, run(3).final_params);
}

#[test]
fn ce_only_ignores_embeddings() {
    let (clips, _) = single_caption_corpus(8, 5, 4, 16, 5);
    let out = train::<f32>(TrainInputs::new(&clips, None), &config(2, LossMode::CeOnly), |_| {}).unwrap();
    assert!(out.log.iter().all(|r| r.sentence.is_none() && r.combined == r.ce));
    assert_eq!(out.checkpoint.config.sent_emb_dim, small_arch().sent_emb_dim);
}

#[test]
fn combined_requires_embedding_rows() {
    let (mut clips, emb) = single_caption_corpus(8, 5, 4, 16, 6);
    clips[3].entry.captions[0].embedding_row = None;
    let err = train::<f64>(TrainInputs::new(&clips, Some(&emb)), &config(1, LossMode::Combined), |_| {}).unwrap_err();
    match err {
        TrainError::MissingEmbedding(id) => assert_eq!(id, "clip003_0"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        train::<f64>(TrainInputs::new(&clips, None), &config(1, LossMode::Combined), |_| {}),
        Err(TrainError::InvalidConfig(_))
    ));
}

#[test]
fn invalid_configs_rejected() {
    let (clips, emb) = single_caption_corpus(4, 5, 4, 16, 7);
    for cfg in [
        TrainConfig { val_ratio: 1.0, ..config(1, LossMode::Combined) },
        TrainConfig { epochs: 0, ..config(1, LossMode::Combined) },
        TrainConfig { adam: audiocap::trainer::AdamConfig { lr: 0.0, ..Default::default() }, ..config(1, LossMode::Combined) },
    ] {
        assert!(matches!(
            train::<f64>(TrainInputs::new(&clips, Some(&emb)), &cfg, |_| {}),
            Err(TrainError::InvalidConfig(_))
        ));
    }
    assert!(matches!(
        train::<f64>(TrainInputs::new(&clips[..1], Some(&emb)), &config(1, LossMode::Combined), |_| {}),
        Err(TrainError::TooFewEntries(1))
    ));
}

#[test]
fn exploding_lr_reports_non_finite_loss() {
    let (clips, emb) = single_caption_corpus(8, 5, 4, 16, 8);
    let cfg = TrainConfig { adam: audiocap::trainer::AdamConfig { lr: 1e30, ..Default::default() }, ..config(5, LossMode::Combined) };
    let err = train::<f32>(TrainInputs::new(&clips, Some(&emb)), &cfg, |_| {}).unwrap_err();
    match err {
        TrainError::NonFiniteLoss { audio_ids, .. } => assert!(!audio_ids.is_empty()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn clipping_keeps_training_finite() {
    let (clips, emb) = single_caption_corpus(8, 5, 4, 16, 9);
    let cfg = TrainConfig { clip_norm: Some(5.0), ..config(2, LossMode::Combined) };
    let out = train::<f64>(TrainInputs::new(&clips, Some(&emb)), &cfg, |_| {}).unwrap();
    assert!(out.log.iter().all(|r| r.combined.is_finite()));
}

#[test]
fn checkpoint_round_trip_preserves_decoding() {
    let (clips, emb) = single_caption_corpus(10, 6, 5, 16, 10);
    let out = train::<f64>(TrainInputs::new(&clips, Some(&emb)), &config(3, LossMode::Combined), |_| {}).unwrap();
    let bytes = encode_checkpoint(&out.checkpoint);
    let back = decode_checkpoint(&bytes, Path::new("mem")).unwrap();
    assert_eq!(back, out.checkpoint);
    let (a, b) = (Captioner::new(out.checkpoint), Captioner::new(back));
    for c in &clips {
        assert_eq!(a.caption(&c.features).unwrap(), b.caption(&c.features).unwrap());
    }
}

#[test]
fn precomputed_stats_are_embedded() {
    let (clips, emb) = single_caption_corpus(6, 5, 4, 16, 11);
    let stats = FeatureStats { mean: vec![0.5; 4], std: vec![2.0; 4] };
    let inputs = TrainInputs { stats: Some(&stats), ..TrainInputs::new(&clips, Some(&emb)) };
    let out = train::<f64>(inputs, &config(1, LossMode::Combined), |_| {}).unwrap();
    assert_eq!(out.checkpoint.stats, stats);
}

#[test]
fn embeddings_survive_disk_round_trip_for_training() {
    let (clips, emb) = single_caption_corpus(6, 5, 4, 16, 12);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.semb");
    write_embeddings(&emb, &p).unwrap();
    let back = read_embeddings(&p, Some(16)).unwrap();
    let cfg = config(1, LossMode::Combined);
    let a = train::<f64>(TrainInputs::new(&clips, Some(&emb)), &cfg, |_| {}).unwrap();
    let b = train::<f64>(TrainInputs::new(&clips, Some(&back)), &cfg, |_| {}).unwrap();
    assert_eq!(a.final_params, b.final_params);
}
