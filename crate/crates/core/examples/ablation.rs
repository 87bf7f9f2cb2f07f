//! Run the cumulative ablation (single task, multi-task, residual blocks,
//! augmentation) with a short budget and print the gains table.
//!
//! cargo run --release --example ablation -- [epochs_per_stage]

use chansr::dataset::{manifest_for, synthesize_maps, SplitTag, SynthesisSpec};
use chansr::eval::{format_ablation, run_ablation, AblationVariant};
use chansr::train::TrainConfig;

fn main() -> chansr::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(10, |s| s.parse().expect("epoch count"));
    let spec = SynthesisSpec {
        scenes: 12,
        grid_h: 32,
        grid_w: 32,
        ..SynthesisSpec::default()
    };
    let maps = synthesize_maps(&spec)?;
    let manifest = manifest_for(&spec, &maps)?;
    let pick = |tag| manifest.with_split(tag).map(|e| maps[e.id].clone()).collect::<Vec<_>>();
    let base = TrainConfig {
        pretrain_epochs: epochs,
        finetune_epochs: epochs,
        learning_rate: 1e-4,
        ..TrainConfig::default()
    };
    let table = run_ablation(
        &pick(SplitTag::Train),
        &pick(SplitTag::Test),
        &AblationVariant::ALL,
        &[1, 2],
        &base,
        &manifest.normalization,
    )?;
    print!("{}", format_ablation(&table));
    Ok(())
}
