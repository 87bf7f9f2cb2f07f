mod common;

use chansr::dataset::{augment, degrade, Channel, Transform, REGRESSION_TARGETS};
use chansr::diffcore::{ops, Grid4};
use chansr::eval::{compute_metrics, Prediction};
use chansr::loss::{build_masks, build_masks_on, mtl_loss, MASK_WEIGHT};
use common::{oracle_instance, random_map, rng, ORACLE_TOL};
use proptest::prelude::*;

#[test]
fn hundred_instances_match_naive_oracles() {
    let gap = (0..100u64).map(oracle_instance).fold(Default::default(), common::OracleGap::merge);
    assert!(gap.max() < ORACLE_TOL, "{gap:?}");
}

#[test]
fn rotated_masks_are_rotated() {
    let hr = random_map(&mut rng(5), 8, 8, 0.3);
    let masks = build_masks(&hr, 2).unwrap();
    let t = Transform::Rot90;
    let lattice = t.apply_lattice(degrade(&hr, 2).unwrap().lattice, 8, 8).unwrap();
    let rotated = build_masks_on(&t.apply_map(&hr), lattice).unwrap();
    assert_eq!(t.apply_planes(&masks.m_na, 8, 8), rotated.m_na);
    assert_eq!(t.apply_planes(&masks.m_gt, 8, 8), rotated.m_gt);
}

#[test]
fn augmentation_keeps_value_multisets() {
    let hr = random_map(&mut rng(9), 6, 4, 0.2);
    let out = augment(std::slice::from_ref(&hr));
    assert_eq!(out.len(), 6);
    for m in &out {
        for ch in Channel::ALL {
            let mut a: Vec<u32> = hr.channel(ch).iter().map(|v| v.to_bits()).collect();
            let mut b: Vec<u32> = m.channel(ch).iter().map(|v| v.to_bits()).collect();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_hold_only_two_values(seed in any::<u64>(), s in prop::sample::select(vec![1usize, 2, 4]), k in 1usize..4) {
        let hr = random_map(&mut rng(seed), s * k, s * (k + 1), 0.3);
        let m = build_masks(&hr, s).unwrap();
        for v in m.m_na.iter().chain(&m.m_gt) {
            prop_assert!(*v == MASK_WEIGHT || *v == 1.0);
        }
    }

    #[test]
    fn garbage_at_excluded_cells_changes_no_metric(seed in any::<u64>(), s in prop::sample::select(vec![2usize, 4])) {
        let mut r = rng(seed);
        let hr = random_map(&mut r, 2 * s, 3 * s, 0.3);
        let masks = build_masks(&hr, s).unwrap();
        prop_assume!(masks.valid_count() > 0);
        let mut noisy = hr.clone();
        for ch in REGRESSION_TARGETS {
            for v in noisy.channel_mut(ch) {
                *v += 1.5;
            }
        }
        let clean = Prediction::from_map(&noisy).unwrap();
        let mut dirty = clean.clone();
        for i in 0..masks.h * masks.w {
            if !masks.is_valid(i) {
                for plane in dirty.regression.iter_mut() {
                    plane[i] = f32::NAN;
                }
                dirty.class[i] = (dirty.class[i] + 1) % 3;
            }
        }
        let a = compute_metrics(&clean, &hr, &masks, "x").unwrap();
        let b = compute_metrics(&dirty, &hr, &masks, "x").unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mtl_gradient_matches_differences(l in prop::collection::vec(0.0f64..10.0, 6), s in prop::collection::vec(-2.0f64..2.0, 6)) {
        let out = mtl_loss(&l, &s).unwrap();
        let eps = 1e-6;
        for m in 0..6 {
            let mut up = s.clone();
            let mut dn = s.clone();
            up[m] += eps;
            dn[m] -= eps;
            let fd = (mtl_loss(&l, &up).unwrap().value - mtl_loss(&l, &dn).unwrap().value) / (2.0 * eps);
            prop_assert!((fd - out.d_log_sigma[m]).abs() <= 1e-6 * fd.abs().max(1.0));
            prop_assert!((out.d_loss[m] - 0.5 * (-2.0 * s[m]).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_sigmas_halve_the_sum(l in prop::collection::vec(0.0f64..10.0, 6)) {
        let v = mtl_loss(&l, &[0.0; 6]).unwrap().value;
        prop_assert!((v - l.iter().sum::<f64>() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution(data in prop::collection::vec(-50.0f64..50.0, 3 * 4)) {
        let y = ops::softmax_channelwise(&Grid4::new([1, 3, 2, 2], data).unwrap());
        for i in 0..4 {
            let p: Vec<f64> = (0..3).map(|k| y.plane(0, k)[i]).collect();
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}

