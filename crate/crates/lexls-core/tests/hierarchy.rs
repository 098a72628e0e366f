//! Derivative and measure properties of the shipped constraint blocks.

use lexls_core::hierarchy::{hessian_fd_ratio, jacobian_fd_ratio, Hierarchy, Kind, SoiState};
use lexls_core::problems::{build_cartpole_hierarchy, build_test_hierarchy, CartPoleSpec, TestHierarchySpec, TEST_N};
use proptest::prelude::*;

fn check_blocks(h: &Hierarchy, x: &[f64]) -> Result<(), TestCaseError> {
    for (l, level) in h.levels().iter().enumerate() {
        for blk in &level.blocks {
            let r = jacobian_fd_ratio(blk.as_ref(), x, 1e-6);
            prop_assert!(r <= 1.0, "level {l} ({}) jacobian ratio {r}", level.name);
            let lambda: Vec<f64> = (0..blk.dim()).map(|i| 1.0 - 0.3 * i as f64).collect();
            if let Some(r) = hessian_fd_ratio(blk.as_ref(), x, &lambda, 1e-5) {
                prop_assert!(r <= 1.0, "level {l} ({}) hessian ratio {r}", level.name);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn test_hierarchy_blocks_match_differences(x in proptest::collection::vec(-3.0f64..3.0, TEST_N)) {
        check_blocks(&build_test_hierarchy(&TestHierarchySpec::default()), &x)?;
    }

    #[test]
    fn h_measure_is_nonnegative(
        x in proptest::collection::vec(-3.0f64..3.0, TEST_N),
        shift in proptest::collection::vec(-1.0f64..1.0, 9),
        l in 0usize..9,
    ) {
        let h = build_test_hierarchy(&TestHierarchySpec::default());
        let exact: Vec<Vec<f64>> = (0..h.p()).map(|k| h.f_plus(&x, k).unwrap()).collect();
        prop_assert_eq!(h.h_measure(&x, l, &exact).unwrap(), 0.0);
        let shifted: Vec<Vec<f64>> = exact.iter().zip(&shift).map(|(v, s)| v.iter().map(|e| e + s).collect()).collect();
        let m = h.h_measure(&x, l, &shifted).unwrap();
        prop_assert!(m >= 0.0);
        let expected: f64 = (0..l).map(|k| shift[k].abs() * exact[k].len() as f64).sum();
        prop_assert!((m - expected).abs() <= 1e-12 * (1.0 + expected));
        prop_assert_eq!(m == 0.0, shift[..l].iter().all(|s| *s == 0.0));
    }

    #[test]
    fn linearization_reproduces_residual_at_zero_step(x in proptest::collection::vec(-3.0f64..3.0, TEST_N)) {
        let h = build_test_hierarchy(&TestHierarchySpec::default());
        let data = h.linearize(&x, &SoiState::off(h.p()), 1.0, h.p()).unwrap();
        for (l, lvl) in data.levels.iter().enumerate() {
            let f = h.evaluate_level(l, &x).unwrap();
            let a0 = lvl.a.mul_vec(&[0.0; TEST_N]);
            for i in 0..f.len() {
                prop_assert_eq!(a0[i] - lvl.b[i], f[i]);
            }
            prop_assert_eq!(&lvl.kinds, &h.level(l).kinds());
        }
    }
}

#[test]
fn cartpole_blocks_match_differences() {
    let pb = build_cartpole_hierarchy(&CartPoleSpec { horizon: 6, ..CartPoleSpec::default() });
    let mut x = pb.initial_guess();
    // move off the rollout so the dynamics defects are nonzero
    for (i, v) in x.iter_mut().enumerate() {
        *v += 0.01 * ((i * 7919) % 13) as f64;
    }
    check_blocks(&pb.hierarchy, &x).unwrap();
}

#[test]
fn inequality_clamping_in_f_plus() {
    let h = build_test_hierarchy(&TestHierarchySpec::default());
    assert_eq!(h.level(0).kinds(), vec![Kind::Inequality]);
    // inside the disk the inequality residual is clamped to zero
    let inside = vec![0.0; TEST_N];
    assert_eq!(h.f_plus(&inside, 0).unwrap(), vec![0.0]);
    let mut outside = inside.clone();
    outside[0] = 2.0;
    assert!((h.f_plus(&outside, 0).unwrap()[0] - 2.1).abs() < 1e-12);
}
