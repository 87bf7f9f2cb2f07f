//! Finite-difference checks of every differentiable op and of the full
//! model with its multi-task loss.
//!
//! cargo run --example gradient_check -- [seeds]

use chansr::diffcore::{builtin_checks, grad_check, ConvCheck};
use chansr::loss::ModelLossCheck;
use chansr::model::ArchConfig;

fn main() -> chansr::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(Ok(3), |s| s.parse()).expect("seed count");
    for seed in 0..seeds {
        for op in builtin_checks(seed) {
            let r = grad_check(op.as_ref(), seed)?;
            println!("seed {seed} {:<12} max rel error {:.2e} over {} inputs", r.op, r.max_rel_error, r.checked);
        }
        let op = ModelLossCheck {
            config: ArchConfig::default(),
            h: 8,
            w: 8,
            scale: 2,
            seed,
        };
        let r = grad_check(&op, seed)?;
        println!(
            "seed {seed} {:<12} max rel error {:.2e} over {} parameters (worst in {})",
            r.op, r.max_rel_error, r.checked, r.worst_group
        );
    }
    let bad = grad_check(&ConvCheck::corrupted([1, 2, 6, 6], 3), 0)?;
    println!("corrupted conv backward: max rel error {:.2e}", bad.max_rel_error);
    Ok(())
}
