use chansr::dataset::{synthesize_maps, ChannelMap, Normalization, SynthesisSpec};
use chansr::model::{
    build_model, forward, load_checkpoint, load_checkpoint_for, save_checkpoint, ArchConfig, Task,
};
use chansr::train::{
    evaluate_prepared, finetune_stage, prepare, pretrain_stage, train_two_stage, PreparedSample, Stage, StageData,
    TrainConfig, TrainLog,
};
use chansr::Error;

fn maps(scenes: usize) -> Vec<ChannelMap> {
    synthesize_maps(&SynthesisSpec {
        scenes,
        grid_h: 16,
        grid_w: 16,
        seed: 3,
        ..Default::default()
    })
    .unwrap()
}

fn config(pre: usize, fine: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        pretrain_epochs: pre,
        finetune_epochs: fine,
        learning_rate: lr,
        ..Default::default()
    }
}

fn prepared(maps: &[ChannelMap]) -> Vec<PreparedSample> {
    prepare(maps, 2, false, &Normalization::default()).unwrap()
}

#[test]
fn one_epoch_on_one_sample_is_one_step() {
    let m = maps(2);
    let (train, test) = (prepared(&m[..1]), prepared(&m[1..]));
    let norm = Normalization::default();
    let data = StageData { train: &train, test: &test, norm: &norm };
    let cfg = config(1, 1, 1e-3);
    let mut log = TrainLog::default();
    let ck = pretrain_stage(build_model(&cfg.arch, 1).unwrap(), &data, &cfg, &mut log, |_| {}).unwrap();
    assert_eq!(ck.optimizer.unwrap().step, 1);
    assert_eq!(log.records.len(), 1);
    assert_eq!(log.records[0].steps, 1);
    assert_eq!(log.records[0].sigma.len(), 6);
}

#[test]
fn finetune_freezes_backbone_and_sigmas_but_moves_heads() {
    let m = maps(3);
    let (train, test) = (prepared(&m[..2]), prepared(&m[2..]));
    let norm = Normalization::default();
    let data = StageData { train: &train, test: &test, norm: &norm };
    let cfg = config(2, 2, 1e-3);
    let out = train_two_stage(&data, &cfg, |_| {}).unwrap();
    let (a, b) = (&out.pretrained.params, &out.finetuned.params);
    let bits = |v: Vec<f32>| v.into_iter().map(f32::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(a.backbone_values()), bits(b.backbone_values()));
    assert_eq!(a.log_sigma.map(f32::to_bits), b.log_sigma.map(f32::to_bits));
    for t in Task::ALL {
        assert_ne!(a.head(t), b.head(t), "head {} did not move", t.name());
    }
    let sigmas: Vec<usize> = out.log.stage(Stage::Pretrain).map(|r| r.sigma.len()).collect();
    assert_eq!(sigmas, vec![6, 6]);
}

#[test]
fn single_task_finetune_touches_only_its_head() {
    let m = maps(3);
    let (train, test) = (prepared(&m[..2]), prepared(&m[2..]));
    let norm = Normalization::default();
    let data = StageData { train: &train, test: &test, norm: &norm };
    let cfg = TrainConfig {
        tasks: vec![Task::PathLoss],
        ..config(1, 1, 1e-3)
    };
    let out = train_two_stage(&data, &cfg, |_| {}).unwrap();
    for t in Task::ALL {
        let moved = out.pretrained.params.head(t) != out.finetuned.params.head(t);
        assert_eq!(moved, t == Task::PathLoss, "{}", t.name());
    }
}

#[test]
fn fixed_seeds_reproduce_every_logged_metric() {
    let m = maps(3);
    let (train, test) = (prepared(&m[..2]), prepared(&m[2..]));
    let norm = Normalization::default();
    let data = StageData { train: &train, test: &test, norm: &norm };
    let cfg = config(2, 1, 1e-3);
    let a = train_two_stage(&data, &cfg, |_| {}).unwrap().log.metric_sequence();
    let b = train_two_stage(&data, &cfg, |_| {}).unwrap().log.metric_sequence();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }
    let other = TrainConfig { shuffle_seed: 2, ..cfg };
    assert_ne!(a, train_two_stage(&data, &other, |_| {}).unwrap().log.metric_sequence());
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let m = maps(3);
    let (train, test) = (prepared(&m[..2]), prepared(&m[2..]));
    let norm = Normalization::default();
    let data = StageData { train: &train, test: &test, norm: &norm };
    let cfg = config(3, 2, 0.0);
    let out = train_two_stage(&data, &cfg, |_| {}).unwrap();
    let init = build_model(&cfg.arch, cfg.init_seed).unwrap();
    assert_eq!(out.finetuned.params, init);
    let snaps: Vec<_> = out.log.records.iter().map(|r| r.test.clone().unwrap()).collect();
    assert!(snaps.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn training_loss_decreases() {
    let m = maps(4);
    let (train, test) = (prepared(&m[..3]), prepared(&m[3..]));
    let norm = Normalization::default();
    let data = StageData { train: &train, test: &test, norm: &norm };
    let cfg = config(15, 0, 1e-3);
    let mut log = TrainLog::default();
    pretrain_stage(build_model(&cfg.arch, 1).unwrap(), &data, &cfg, &mut log, |_| {}).unwrap();
    let first = log.records.first().unwrap().objective;
    let last = log.records.last().unwrap().objective;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn checkpoint_round_trip_and_resume() {
    let m = maps(3);
    let (train, test) = (prepared(&m[..2]), prepared(&m[2..]));
    let norm = Normalization::default();
    let data = StageData { train: &train, test: &test, norm: &norm };
    let cfg = config(1, 1, 1e-3);
    let mut log = TrainLog::default();
    let ck = pretrain_stage(build_model(&cfg.arch, 1).unwrap(), &data, &cfg, &mut log, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    save_checkpoint(&path, &ck).unwrap();
    let back = load_checkpoint_for(&path, &cfg.arch).unwrap();
    assert_eq!(back, ck);

    let x = &train[0].input;
    let before = forward(&ck.params, x).unwrap();
    let after = forward(&back.params, x).unwrap();
    assert_eq!(before, after);

    // Fine-tuning from the reloaded checkpoint equals fine-tuning in memory.
    let resumed = finetune_stage(back, &data, &cfg, &mut TrainLog::default(), |_| {}).unwrap();
    let direct = finetune_stage(ck, &data, &cfg, &mut TrainLog::default(), |_| {}).unwrap();
    assert_eq!(resumed.params, direct.params);

    let wrong = ArchConfig { n_blocks: 2, ..ArchConfig::default() };
    assert!(matches!(load_checkpoint_for(&path, &wrong), Err(Error::ConfigMismatch { .. })));
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Parse(_))));
}

#[test]
fn evaluation_scores_the_test_split() {
    let m = maps(3);
    let test = prepared(&m[2..]);
    let norm = Normalization::default();
    let params = build_model(&ArchConfig::default(), 1).unwrap();
    let r = evaluate_prepared(&params, &test, &norm, "init").unwrap();
    assert_eq!(r.samples, 1);
    assert_eq!(r.scale, 2);
    assert!(r.valid_cells > 0 && (0.0..=1.0).contains(&r.accuracy));
}
