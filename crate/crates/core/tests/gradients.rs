use chansr::diffcore::{builtin_checks, grad_check, ConvCheck};
use chansr::loss::ModelLossCheck;
use chansr::model::ArchConfig;

#[test]
fn every_op_passes_over_ten_seeds() {
    for seed in 0..10 {
        for op in builtin_checks(seed) {
            let r = grad_check(op.as_ref(), seed).unwrap();
            assert!(r.max_rel_error < 1e-3, "seed {seed}: {r:?}");
        }
    }
}

#[test]
fn model_and_multi_task_loss_pass() {
    for (seed, config) in [(0, ArchConfig::default()), (1, ArchConfig::flat()), (2, ArchConfig::default())] {
        let op = ModelLossCheck {
            config,
            h: 8,
            w: 8,
            scale: 2,
            seed,
        };
        let r = grad_check(&op, seed).unwrap();
        assert!(r.max_rel_error < 1e-3, "seed {seed}: {r:?}");
        assert_eq!(r.checked, op.config.param_count());
    }
}

#[test]
fn doubled_weight_gradient_is_caught() {
    for seed in 0..10 {
        let r = grad_check(&ConvCheck::corrupted([1, 2, 6, 6], 3), seed).unwrap();
        assert!(r.max_rel_error > 0.1, "seed {seed}: {r:?}");
    }
}
