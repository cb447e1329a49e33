use subdiff_core::mittag_leffler::{integral, ml_neg, ml_neg_with_branch, series, Branch};

fn oracle() -> Vec<(f64, f64, f64)> {
    include_str!("fixtures/ml_oracle.csv")
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.trim().parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect()
}

#[test]
fn matches_high_precision_table() {
    let mut worst = 0.0f64;
    for (alpha, x, want) in oracle() {
        let got = ml_neg(alpha, x).unwrap();
        let rel = ((got - want) / want).abs();
        worst = worst.max(rel);
        assert!(rel <= 1e-10, "alpha={alpha} x={x}: got {got}, want {want}, rel {rel:e}");
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn monotone_and_positive_on_grid() {
    for ai in 1..=10 {
        let alpha = ai as f64 / 10.0;
        let mut prev = f64::INFINITY;
        for xi in 0..=500 {
            let x = xi as f64 / 10.0;
            let v = ml_neg(alpha, x).unwrap();
            assert!(v > 0.0 && v <= 1.0, "alpha={alpha} x={x}: {v}");
            assert!(v < prev, "alpha={alpha} x={x}: {v} !< {prev}");
            prev = v;
        }
    }
}

#[test]
fn branches_agree_near_switch_points() {
    for ai in 1..=9 {
        let alpha = ai as f64 / 10.0;
        // the series switch sits at x^(1/alpha) = 3
        let x_sw = 3f64.powf(alpha);
        for &f in &[0.9, 1.0, 1.1] {
            let x = x_sw * f;
            let s = series(alpha, x);
            let i = integral(alpha, x);
            assert!(((s - i) / i).abs() < 1e-9, "alpha={alpha} x={x}: {s} vs {i}");
        }
    }
}

#[test]
fn asymptotic_branch_agrees_with_integral_where_taken() {
    for ai in 1..=9 {
        let alpha = ai as f64 / 10.0;
        for xi in 1..=100 {
            let x = xi as f64 / 2.0;
            let (v, b) = ml_neg_with_branch(alpha, x).unwrap();
            if b == Branch::Asymptotic {
                let i = integral(alpha, x);
                assert!(((v - i) / i).abs() < 1e-9, "alpha={alpha} x={x}: {v} vs {i}");
            }
        }
    }
}
