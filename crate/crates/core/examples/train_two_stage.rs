//! Pre-train and fine-tune on a small synthetic dataset, then compare the
//! model with the bilinear baseline.
//!
//! cargo run --release --example train_two_stage -- [pretrain_epochs] [finetune_epochs]

use chansr::dataset::{synthesize_maps, Channel, SynthesisSpec};
use chansr::eval::{bilinear_baseline_set, format_table, write_curves};
use chansr::model::save_checkpoint;
use chansr::train::{evaluate_prepared, prepare, train_two_stage, StageData, TrainConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).map_or(default, |s| s.parse().expect("epoch count"))
}

fn main() -> chansr::Result<()> {
    let spec = SynthesisSpec {
        scenes: 16,
        grid_h: 32,
        grid_w: 32,
        ..SynthesisSpec::default()
    };
    let maps = synthesize_maps(&spec)?;
    let manifest = chansr::dataset::manifest_for(&spec, &maps)?;
    let norm = manifest.normalization.clone();
    let pick = |tag| manifest.with_split(tag).map(|e| maps[e.id].clone()).collect::<Vec<_>>();
    let (train_maps, test_maps) = (pick(chansr::dataset::SplitTag::Train), pick(chansr::dataset::SplitTag::Test));

    let cfg = TrainConfig {
        pretrain_epochs: arg(1, 30),
        finetune_epochs: arg(2, 10),
        learning_rate: 1e-4,
        eval_every: 5,
        ..TrainConfig::default()
    };
    let train = prepare(&train_maps, cfg.scale, false, &norm)?;
    let test = prepare(&test_maps, cfg.scale, false, &norm)?;
    let data = StageData {
        train: &train,
        test: &test,
        norm: &norm,
    };
    let out = train_two_stage(&data, &cfg, |r| {
        if let Some(t) = &r.test {
            println!(
                "{} epoch {:>3} objective {:+.4} test PL MAE {:.2}",
                r.stage.name(),
                r.epoch + 1,
                r.objective,
                t.mae_of(Channel::PathLoss.name()).unwrap_or(f64::NAN)
            );
        }
    })?;

    let reports = vec![
        evaluate_prepared(&out.pretrained.params, &test, &norm, "pretrained")?,
        evaluate_prepared(&out.finetuned.params, &test, &norm, "finetuned")?,
        bilinear_baseline_set(&test_maps, cfg.scale)?,
    ];
    print!("{}", format_table(&reports));

    let dir = std::env::temp_dir().join("chansr-example-train");
    std::fs::create_dir_all(&dir)?;
    save_checkpoint(&dir.join("finetuned.ckpt"), &out.finetuned)?;
    write_curves(&dir.join("curves.csv"), &out.log)?;
    println!("checkpoint and curves in {}", dir.display());
    Ok(())
}
