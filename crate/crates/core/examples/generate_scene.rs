//! Generate one synthetic scene, trace its channel maps and print an ASCII
//! view of the LOS/NLOS classes.
//!
//! cargo run --example generate_scene -- [seed]

use chansr::dataset::{Channel, LosState};
use chansr::scene::{generate_scene, los_census, render_maps, trace_channel, SceneParams};

fn main() -> chansr::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(1), |s| s.parse()).expect("seed must be an integer");
    let scene = generate_scene(seed, 48, 48, &SceneParams::default())?;
    let tx = scene.tx();
    println!(
        "scene {seed}: {} buildings, {:.1}% coverage, tx at ({}, {}) {:.1} m",
        scene.buildings().len(),
        100.0 * scene.coverage(),
        tx.row,
        tx.col,
        tx.height_m
    );

    let map = render_maps(&scene, seed);
    let [los, nlos, nan] = los_census(&map);
    println!("cells: {los} LOS, {nlos} NLOS, {nan} in buildings");

    for r in 0..map.height() {
        let line: String = (0..map.width())
            .map(|c| {
                if (r, c) == (tx.row, tx.col) {
                    return 'T';
                }
                match map.los_state(r, c) {
                    Some(LosState::Los) => '.',
                    Some(LosState::Nlos) => 'o',
                    _ => '#',
                }
            })
            .collect();
        println!("{line}");
    }

    let probe = (map.height() - 2, map.width() - 2);
    let s = trace_channel(&scene, probe, seed);
    println!("receiver {probe:?}: {s:?}");
    println!(
        "path loss range {:.1} .. {:.1} dB",
        map.channel(Channel::PathLoss).iter().filter(|v| **v < 0.0).cloned().fold(f32::INFINITY, f32::min),
        map.channel(Channel::PathLoss).iter().filter(|v| **v < 0.0).cloned().fold(f32::NEG_INFINITY, f32::max)
    );
    Ok(())
}
