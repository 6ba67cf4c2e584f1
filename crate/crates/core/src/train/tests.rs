use super::*;
use crate::channel::ChannelSample;

fn quick(mode: LossMode) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        steps: 3,
        lr: 1e-3,
        loss_mode: mode,
        ..TrainConfig::default()
    }
}

#[test]
fn rejection_sampling_respects_predicate() {
    let code = Code::bch(4, 2).unwrap();
    for step in 0..5 {
        let b = sample_batch(&code, &quick(LossMode::HybridPrePost), step).unwrap();
        assert_eq!(b.samples.len(), 8);
        assert!(b.samples.iter().all(|s| s.hard_errors() > 2 && s.codeword.is_zero()));
        assert!(b.retained_fraction() <= 1.0);
        let b = sample_batch(&code, &quick(LossMode::HybridPost), step).unwrap();
        assert_eq!(b.attempts, 8);
    }
}

#[test]
fn rejection_rate_rises_with_snr() {
    let code = Code::bch(5, 3).unwrap();
    let mut last = 1.0;
    for snr in [1.0, 2.0, 3.0, 4.0] {
        let cfg = TrainConfig {
            batch_size: 256,
            snr_low_db: snr,
            snr_high_db: snr,
            loss_mode: LossMode::HybridPre,
            ..TrainConfig::default()
        };
        let b = sample_batch(&code, &cfg, 0).unwrap();
        assert!(b.retained_fraction() < last, "{snr}: {}", b.retained_fraction());
        last = b.retained_fraction();
    }
}

#[test]
fn pathological_rejection_aborts() {
    let code = Code::bch(3, 1).unwrap();
    let cfg = TrainConfig {
        batch_size: 1,
        snr_low_db: 25.0,
        snr_high_db: 25.0,
        loss_mode: LossMode::HybridPre,
        ..TrainConfig::default()
    };
    assert!(matches!(
        sample_batch(&code, &cfg, 0),
        Err(Error::PathologicalRejection { .. })
    ));
}

#[test]
fn zero_steps_leave_model_unchanged() {
    let code = Code::bch(3, 1).unwrap();
    let mut model = EcctModel::new(&code, Default::default(), 1).unwrap();
    let before = model.params().to_vec();
    let cfg = TrainConfig {
        steps: 0,
        ..quick(LossMode::Bce)
    };
    let rep = train(&mut model, &cfg, None).unwrap();
    assert!(rep.steps.is_empty());
    assert_eq!(model.params(), &before[..]);
}

#[test]
fn training_is_deterministic_and_checkpointed() {
    let code = Code::bch(3, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut model = EcctModel::new(&code, Default::default(), 2).unwrap();
        let path = dir.path().join(name);
        let rep = train(&mut model, &quick(LossMode::HybridPrePost), Some(&path)).unwrap();
        assert_eq!(rep.steps.len(), 3);
        std::fs::read(path).unwrap()
    };
    let a = run("a.ckpt");
    assert_eq!(a, run("b.ckpt"));
    let back = EcctModel::load(&dir.path().join("a.ckpt"), &code).unwrap();
    assert_ne!(back.params(), EcctModel::new(&code, Default::default(), 2).unwrap().params());
}

#[test]
fn divergence_is_reported() {
    let code = Code::bch(3, 1).unwrap();
    let mut model = EcctModel::new(&code, Default::default(), 3).unwrap();
    model.params_mut()[0].data_mut()[0] = f64::NAN;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let err = train(&mut model, &quick(LossMode::Bce), Some(&path)).unwrap_err();
    assert_eq!(err, Error::Divergence { step: 0 });
    assert!(path.exists());
}

fn frames(code: &Code, count: u64, seed: u64) -> Vec<ChannelSample> {
    (0..count)
        .map(|i| {
            let mut rng = substream(seed, 99, i);
            let x = crate::channel::random_codeword(code, &mut rng);
            transmit(&x, 0.8, &mut rng).unwrap()
        })
        .collect()
}

#[test]
fn zero_codeword_equivalence() {
    let code = Code::bch(4, 2).unwrap();
    let model = EcctModel::new(&code, Default::default(), 4).unwrap();
    let gate = TrainConfig {
        loss_mode: LossMode::HybridPrePost,
        ..TrainConfig::default()
    }
    .gate(&code);
    for s in frames(&code, 100, 5) {
        let xs = crate::channel::modulate(&s.codeword);
        let shifted: Vec<f64> = s.received.iter().zip(&xs).map(|(y, x)| y * x - 1.0).collect();
        let z = ChannelSample::from_noise(Word::zeros(15), shifted, s.sigma).unwrap();
        for g in [None, gate.as_ref()] {
            let a = evaluate_loss(&model, std::slice::from_ref(&s), g).unwrap().total;
            let b = evaluate_loss(&model, &[z.clone()], g).unwrap().total;
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn gated_loss_never_exceeds_bce() {
    let code = Code::bch(4, 2).unwrap();
    let model = EcctModel::new(&code, Default::default(), 6).unwrap();
    let samples = frames(&code, 64, 7);
    let bce = evaluate_loss(&model, &samples, None).unwrap();
    let hyb = evaluate_loss(&model, &samples, LossMode::HybridPost.gate_for(&code).as_ref()).unwrap();
    assert!(hyb.total <= bce.total);
    let (l, g) = loss_and_gradients(&model, &samples, None).unwrap();
    assert!((l - bce.total).abs() < 1e-12);
    assert_eq!(g.len(), model.params().len());
}

#[test]
fn config_text_round_trip() {
    let mut cfg = TrainConfig::default();
    cfg.apply_kv_text("# toy\nsteps = 10\nloss_mode=hybrid-post\n\nlr=0.001\n").unwrap();
    assert_eq!(cfg.steps, 10);
    assert_eq!(cfg.loss_mode, LossMode::HybridPost);
    let mut back = TrainConfig::default();
    back.apply_kv_text(&cfg.to_kv_text()).unwrap();
    assert_eq!(back, cfg);
    assert!(cfg.apply_kv_text("steps 10").is_err());
    assert!(cfg.apply_kv_text("bogus=1").is_err());
    let bad = TrainConfig {
        snr_low_db: 5.0,
        snr_high_db: 4.0,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
    for m in LossMode::ALL {
        assert_eq!(m.to_string().parse::<LossMode>().unwrap(), m);
    }
}
