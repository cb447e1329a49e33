use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use subdiff_core::{Fd2d, Rect, ScalarMode, SineSpectral2D, SpatialOperator};

fn ops() -> Vec<Box<dyn SpatialOperator>> {
    let dom = Rect::new(0.0, 2.0, -1.0, 0.5).unwrap();
    vec![
        Box::new(ScalarMode::with_norm(-2.5, 0.5).unwrap()),
        Box::new(Fd2d::new(0.7, 9, 6, dom).unwrap()),
        Box::new(SineSpectral2D::new(0.3, 7, 5, 14, 10, dom).unwrap()),
    ]
}

fn vector(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn operator_is_symmetric_and_negative(seed in any::<u64>()) {
        for op in ops() {
            let n = op.dof();
            let u = vector(seed, n);
            let v = vector(seed ^ 0xabcdef, n);
            let (mut lu, mut lv) = (vec![0.0; n], vec![0.0; n]);
            op.apply(&u, &mut lu);
            op.apply(&v, &mut lv);
            let a = op.inner(&lu, &v);
            let b = op.inner(&u, &lv);
            prop_assert!((a - b).abs() <= 1e-10 * (a.abs() + b.abs() + 1e-300));
            prop_assert!(op.inner(&lu, &u) < 0.0);
        }
    }

    #[test]
    fn shifted_solve_inverts(seed in any::<u64>(), gamma in 0.1f64..1e4) {
        for op in ops() {
            let n = op.dof();
            let r = vector(seed, n);
            let mut x = vec![0.0; n];
            op.solve_shifted(gamma, 1.0, &r, &mut x);
            let mut lx = vec![0.0; n];
            op.apply(&x, &mut lx);
            let res: Vec<f64> = (0..n).map(|i| gamma * x[i] - lx[i] - r[i]).collect();
            prop_assert!(op.l2_norm(&res) <= 1e-10 * op.l2_norm(&r));
        }
    }
}

#[test]
fn eigenvalues_are_negative() {
    for op in ops() {
        assert!(op.eigenvalues().iter().all(|l| *l < 0.0));
        assert_eq!(op.eigenvalues().len(), op.dof());
    }
}

#[test]
fn physical_round_trip() {
    for op in ops() {
        let u = vector(7, op.dof());
        let back = op.from_physical(&op.to_physical(&u));
        for (a, b) in u.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn spectral_lowest_mode() {
    let op = SineSpectral2D::with_cutoff(1.0 / (2.0 * PI * PI), 8, Rect::UNIT).unwrap();
    let u = op.sample(&|x, y| (PI * x).sin() * (PI * y).sin());
    assert_relative_eq!(op.l2_norm(&u), 0.5, epsilon = 1e-13);
    let mut lu = vec![0.0; u.len()];
    op.apply(&u, &mut lu);
    for (a, b) in lu.iter().zip(&u) {
        assert_relative_eq!(*a, -b, epsilon = 1e-13);
    }
    assert_relative_eq!(op.evaluate(&u, 0.5, 0.5), 1.0, epsilon = 1e-13);
}

#[test]
fn fd_mode_norm_converges() {
    let op = Fd2d::new(1.0, 63, 63, Rect::UNIT).unwrap();
    let u = op.sample(&|x, y| (PI * x).sin() * (PI * y).sin());
    assert_relative_eq!(op.l2_norm(&u), 0.5, epsilon = 1e-12);
}

#[test]
fn multiply_by_constant_field() {
    for op in ops() {
        let u = vector(3, op.dof());
        let w = vec![2.5; op.grid().len()];
        let mut out = vec![0.0; u.len()];
        op.multiply(&w, &u, &mut out);
        for (a, b) in out.iter().zip(&u) {
            assert_relative_eq!(*a, 2.5 * b, epsilon = 1e-12);
        }
    }
}
