//! Quick property checks runnable from the command line.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blending::{partition_of_unity, BlendingWindow};
use crate::error::{Error, Result};
use crate::farhist::{precompute_hankel_with, HankelTable, HANKEL_NODES};
use crate::local::local_rule;
use crate::numerics::integrate_with_breaks;
use crate::nudft::{Method, NudftPlan, WavevectorLattice};
use crate::oracle::{direct_u, OracleConfig};
use crate::params::derive_params;
use crate::soe::SoeApproximation;
use crate::sources::{Signature, SourceSet};

pub const SUITES: [&str; 8] = ["params", "blending", "soe", "nudft", "nearhist", "farhist", "local", "oracle"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn verdict(name: &str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Run one suite by name, or all of them.
pub fn selftest(suite: Option<&str>) -> Result<Vec<SuiteResult>> {
    let names: Vec<&str> = match suite {
        None => SUITES.to_vec(),
        Some(s) if SUITES.contains(&s) => vec![s],
        Some(s) => {
            return Err(Error::Config(format!("unknown suite `{s}` (one of {})", SUITES.join(", "))))
        }
    };
    names.into_iter().map(run_suite).collect()
}

fn run_suite(name: &str) -> Result<SuiteResult> {
    match name {
        "params" => params_suite(),
        "blending" => blending_suite(),
        "soe" => {
            let soe = SoeApproximation::default_build().with_validity(2.0 * 2f64.sqrt() + 1.0, 4.8284 - 0.0179, 100.0)?;
            check_soe(&soe, 100.0)
        }
        "nudft" => nudft_suite(),
        "nearhist" => nearhist_suite(),
        "farhist" => {
            let (soe, table) = small_hankel_table()?;
            check_hankel_table(&table, &soe)
        }
        "local" => local_suite(),
        "oracle" => oracle_suite(),
        _ => unreachable!(),
    }
}

fn params_suite() -> Result<SuiteResult> {
    let dp = derive_params(1e-7, 16, 1.0, 1.0, 983.0, 8.0, 20)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let ok = rel(dp.dk, 0.9202) < 0.005 && rel(dp.delta, 0.0179) < 0.03 && rel(dp.dt, 0.00112) < 0.03;
    Ok(verdict("params", ok, format!("dk={:.5} delta={:.5} dt={:.6} K={:.1}", dp.dk, dp.delta, dp.dt, dp.k_cut)))
}

fn blending_suite() -> Result<SuiteResult> {
    let w = BlendingWindow::from_tolerance(0.0179, 1e-7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let tau = rng.random_range(-0.1..5.0);
        worst = worst.max((partition_of_unity(&w, 4.8284, tau) - 1.0).abs());
    }
    Ok(verdict("blending", worst <= 1e-13, format!("partition of unity defect {worst:.2e}")))
}

/// Sup relative error on the validity box at a 60 × 60 grid; fails when above the tolerance.
pub fn check_soe(soe: &SoeApproximation, t_max: f64) -> Result<SuiteResult> {
    let v = soe.validate(t_max, 60)?;
    Ok(verdict(
        "soe",
        !v.flagged,
        format!("sup relative error {:.2e} at (r, t) = ({:.4}, {:.4}), tolerance {:.1e}", v.max_rel_err, v.at.0, v.at.1, soe.tolerance),
    ))
}

fn nudft_suite() -> Result<SuiteResult> {
    let lat = Arc::new(WavevectorLattice::half_disk(0.9, 30.0)?);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<[f64; 2]> = (0..200).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let c: Vec<Complex64> = (0..200).map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
    let fast = NudftPlan::new(lat.clone(), 1e-10)?.with_method(Method::Fast).type1(&pts, &c)?;
    let direct = NudftPlan::new(lat, 1e-10)?.with_method(Method::Direct).type1(&pts, &c)?;
    let scale: f64 = c.iter().map(|z| z.norm()).sum();
    let err = fast.iter().zip(&direct).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())) / scale;
    Ok(verdict("nudft", err <= 1e-9, format!("fast vs direct type-1 error {err:.2e} (relative to Σ|c|)")))
}

fn nearhist_suite() -> Result<SuiteResult> {
    use crate::nearhist::{precompute_drive_weights, sinc_kernel};
    let dp = derive_params(1e-12, 24, 1.0, 1.0, 40.0, 8.0, 8)?;
    let win = BlendingWindow::from_tolerance(dp.delta, dp.eps)?;
    let shift = dp.a_plus - dp.delta;
    let mut worst = 0.0f64;
    for kappa in [0.0, 5.0, 50.0] {
        let w = precompute_drive_weights(&dp, &win, &[kappa]);
        let h_w: f64 = w.p.iter().sum::<f64>() - w.p_delayed.iter().sum::<f64>();
        let psi = |d: f64, s: f64| {
            2.0 * (kappa * (d + s)).cos() * win.bump(d) + sinc_kernel(kappa, d + s) * win.bump_derivative(d)
        };
        let edges = win.bump(0.0)
            * (sinc_kernel(kappa, dp.a_plus) - sinc_kernel(kappa, dp.delta) - sinc_kernel(kappa, shift));
        let f = integrate_with_breaks(|d| psi(d, 0.0) - psi(d, shift), &[0.0, dp.delta], 1e-15, 1e-14).value + edges;
        let h = f * integrate_with_breaks(|s| sinc_kernel(kappa, s), &[0.0, dp.dt], 1e-18, 1e-14).value;
        let scale: f64 = w.p.iter().chain(&w.p_delayed).map(|v| v.abs()).sum();
        worst = worst.max((h_w - h).abs() / scale);
    }
    Ok(verdict("nearhist", worst <= 1e-10, format!("constant-drive weight defect {worst:.2e}")))
}

/// Small table (Δ = 1, K_f = 20) for the far-history suite.
pub fn small_hankel_table() -> Result<(SoeApproximation, HankelTable)> {
    let soe = crate::soe::build_soe(36.0, 10, 16)?;
    let a = 2.0 * 2f64.sqrt() + 1.0;
    let lat = WavevectorLattice::half_disk(0.92, 20.0)?;
    let (kappas, _) = lat.radius_classes();
    let table = precompute_hankel_with(&soe, 1.0, a, 20.0, &kappas, HANKEL_NODES)?;
    Ok((soe, table))
}

/// Recompute every entry with twice the nodes per panel and compare.
pub fn check_hankel_table(table: &HankelTable, soe: &SoeApproximation) -> Result<SuiteResult> {
    let fine = precompute_hankel_with(
        soe,
        table.big_delta(),
        table.a_radius(),
        table.k_far(),
        table.kappas(),
        2 * HANKEL_NODES,
    )?;
    let scale = (0..table.kappas().len()).fold(0.0f64, |m, c| m.max(fine.max_abs(c)));
    let mut worst = 0.0f64;
    for c in 0..table.kappas().len() {
        for (a, b) in table.row(c).iter().zip(fine.row(c)) {
            worst = worst.max((a - b).abs());
        }
    }
    let rel = worst / scale;
    Ok(verdict("farhist", rel <= 1e-12, format!("Hankel table vs doubled rule: {rel:.2e} relative to max |H|")))
}

fn local_suite() -> Result<SuiteResult> {
    let dt = 0.01;
    let win = BlendingWindow::from_tolerance(0.2, 1e-10)?;
    let sigma = |d: f64| (3.0 * (1.0 - d)).cos() + 0.2;
    let mut worst = 0.0f64;
    for r in [1e-5, 1e-3, 0.05, 0.15] {
        let v = local_rule(r, dt, &win)?.apply(sigma);
        let smax = (0.2 / r).acosh();
        let e = integrate_with_breaks(
            |s| sigma(r * s.cosh()) * win.complement(r * s.cosh()) / (2.0 * PI),
            &[0.0, smax],
            1e-16,
            1e-14,
        )
        .value;
        worst = worst.max((v - e).abs() / e.abs());
    }
    Ok(verdict("local", worst <= 1e-11, format!("local rule vs adaptive oracle {worst:.2e}")))
}

fn oracle_suite() -> Result<SuiteResult> {
    let s = SourceSet::new(
        vec![[0.3, 0.0]],
        vec![Signature::Custom(Arc::new(|t: f64| if t > 0.0 { 1.0 } else { 0.0 }))],
    )?;
    let u = direct_u([0.0, 0.0], 2.5, &s, &OracleConfig::default());
    let exact = (2.5f64 / 0.3).acosh() / (2.0 * PI);
    let err = (u - exact).abs() / exact;
    Ok(verdict("oracle", err <= 1e-10, format!("unit-step field vs arccosh {err:.2e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in selftest(None).unwrap() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(selftest(Some("nope")).is_err());
    }

    #[test]
    fn corrupted_hankel_table_fails() {
        let (soe, mut table) = small_hankel_table().unwrap();
        let scale = table.max_abs(0);
        table.row_mut(3)[7] += 1e-3 * scale;
        assert!(!check_hankel_table(&table, &soe).unwrap().passed);
    }

    #[test]
    fn over_tight_soe_fails() {
        let soe = SoeApproximation::default_build()
            .with_validity(3.8284, 4.8105, 100.0)
            .unwrap()
            .with_tolerance(1e-18);
        let r = check_soe(&soe, 100.0).unwrap();
        assert!(!r.passed);
        assert!(r.detail.contains("sup relative error"));
    }
}
