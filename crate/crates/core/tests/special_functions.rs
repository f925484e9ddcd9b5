//! Special functions against a frozen 50-digit mpmath table.

use wavesplit::numerics::{bessel_i0_scaled, bessel_i1_scaled, bessel_j0, erf};

struct Row {
    x: f64,
    j0: f64,
    i0: f64,
    i1: f64,
    erf: f64,
}

fn table() -> Vec<Row> {
    let text = include_str!("data/special_functions.txt");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|s| s.parse().unwrap()).collect();
            Row {
                x: v[0],
                j0: v[1],
                i0: v[2],
                i1: v[3],
                erf: v[4],
            }
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[test]
fn scaled_modified_bessel_matches_table() {
    let mut worst = (0.0f64, 0.0f64);
    for r in table() {
        let e0 = rel(bessel_i0_scaled(r.x), r.i0);
        let e1 = rel(bessel_i1_scaled(r.x), r.i1);
        worst.0 = worst.0.max(e0);
        worst.1 = worst.1.max(e1);
    }
    assert!(worst.0 <= 1e-14 && worst.1 <= 1e-14, "worst rel err {worst:?}");
}

#[test]
fn j0_matches_table() {
    // Relative to the envelope max(|J0|, sqrt(2/(pi x)) ∧ 1): near zeros of J0 the
    // relative error of any double-precision evaluation is unbounded.
    let mut worst = 0.0f64;
    for r in table() {
        let env = r.j0.abs().max((2.0 / (std::f64::consts::PI * r.x)).sqrt().min(1.0));
        worst = worst.max((bessel_j0(r.x) - r.j0).abs() / env);
    }
    assert!(worst <= 1e-14, "worst {worst:e}");
}

#[test]
fn erf_matches_table() {
    let mut worst = 0.0f64;
    for r in table() {
        worst = worst.max(rel(erf(r.x), r.erf));
        assert_eq!(erf(-r.x), -erf(r.x));
    }
    assert!(worst <= 1e-14, "worst {worst:e}");
    assert!((erf(6.0) - 1.0).abs() <= 1e-15);
}
