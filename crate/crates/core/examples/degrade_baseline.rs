//! Degrade synthetic maps at several scale factors and score the bilinear
//! baseline on them.
//!
//! cargo run --example degrade_baseline

use chansr::dataset::{degrade, synthesize_maps, Channel, SynthesisSpec, REGRESSION_TARGETS};
use chansr::eval::{bilinear_baseline_set, format_table};
use chansr::loss::build_masks;

fn main() -> chansr::Result<()> {
    let spec = SynthesisSpec {
        scenes: 8,
        ..SynthesisSpec::default()
    };
    let maps = synthesize_maps(&spec)?;

    let lr = degrade(&maps[0], 4)?;
    let masks = build_masks(&maps[0], 4)?;
    println!(
        "map 0 at s=4: {} anchors, {} valid cells of {}",
        lr.lattice.anchor_count(maps[0].height(), maps[0].width()),
        masks.valid_count(),
        maps[0].plane_len()
    );
    let row = 10;
    let hr_row: Vec<String> = (0..8).map(|c| format!("{:7.1}", maps[0].get(Channel::PathLoss, row, c))).collect();
    let lr_row: Vec<String> = (0..8).map(|c| format!("{:7.1}", lr.map.get(Channel::PathLoss, row, c))).collect();
    println!("PL row {row} HR: {}", hr_row.join(""));
    println!("PL row {row} LR: {}", lr_row.join(""));

    let reports = [1, 2, 4, 8]
        .into_iter()
        .map(|s| bilinear_baseline_set(&maps, s))
        .collect::<chansr::Result<Vec<_>>>()?;
    print!("{}", format_table(&reports));
    for r in &reports {
        let cells: Vec<String> = REGRESSION_TARGETS.iter().map(|&c| format!("{}={:.2}", c.name(), r.mae(c))).collect();
        println!("s={} {}", r.scale, cells.join(" "));
    }
    Ok(())
}
