//! Run orchestration, reports and error studies.

mod config;
mod frame;
pub mod selftest;
mod simulation;

use std::fmt::Write as _;
use std::path::Path;

pub use config::{read_points, OutputMode, SimulationConfig, SourceSpec, TargetSpec};
pub use frame::{FieldFrame, MAGIC};
pub use simulation::{auto_soe_panels, soe_for, Evaluation, PhaseTimings, Simulation};

use crate::error::{Error, Result};
use crate::oracle::{direct_u_many, OracleConfig};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<FieldFrame>,
    pub report: String,
    pub timings: PhaseTimings,
    pub step_times: Vec<f64>,
}

/// Steps at which to evaluate: the nearest step to each requested time, or the last.
pub fn output_steps(cfg: &SimulationConfig, dt: f64, n_steps: usize) -> Vec<i64> {
    let mut steps: Vec<i64> = if cfg.output_times.is_empty() {
        vec![n_steps as i64]
    } else {
        cfg.output_times
            .iter()
            .map(|&t| ((t / dt).round() as i64).clamp(0, n_steps as i64))
            .collect()
    };
    steps.sort_unstable();
    steps.dedup();
    steps
}

pub fn run(cfg: &SimulationConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(cfg)?;
    run_simulation(cfg, &mut sim)
}

pub fn run_simulation(cfg: &SimulationConfig, sim: &mut Simulation) -> Result<RunOutput> {
    let (nx, ny) = cfg.targets.dims();
    let dp = sim.params().clone();
    let mut frames = Vec::new();
    for step in output_steps(cfg, dp.dt, dp.n_steps) {
        sim.advance_to(step)?;
        let ev = sim.evaluate()?;
        let mut frame = FieldFrame::new(ev.t, nx, ny, ev.total.clone())?;
        if let (Some(n), Some(f)) = (ev.near, ev.far) {
            frame.components = Some([ev.local, n, f]);
        }
        frames.push(frame);
    }
    let report = report_text(cfg, sim);
    Ok(RunOutput {
        frames,
        report,
        timings: sim.timings().clone(),
        step_times: sim.step_times().to_vec(),
    })
}

/// Write frames (binary, or CSV) and the report into `dir`.
pub fn write_outputs(out: &RunOutput, points: &[[f64; 2]], dir: &Path, csv: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, f) in out.frames.iter().enumerate() {
        if csv {
            std::fs::write(dir.join(format!("frame_{i:03}.csv")), f.to_csv(points)?)?;
        } else {
            f.write(&dir.join(format!("frame_{i:03}.bin")))?;
        }
    }
    std::fs::write(dir.join("report.txt"), &out.report)?;
    Ok(())
}

pub fn report_text(cfg: &SimulationConfig, sim: &Simulation) -> String {
    let dp = sim.params();
    let t = sim.timings();
    let mut s = String::new();
    let _ = writeln!(s, "[parameters]");
    let _ = writeln!(s, "eps = {:e}", dp.eps);
    let _ = writeln!(s, "W = {}", dp.w);
    let _ = writeln!(s, "p = {}", dp.p);
    let _ = writeln!(s, "dt = {:.6e}", dp.dt);
    let _ = writeln!(s, "delta = {:.6e}", dp.delta);
    let _ = writeln!(s, "A = {:.6}", dp.a_radius);
    let _ = writeln!(s, "A_plus = {:.6}", dp.a_plus);
    let _ = writeln!(s, "K0 = {:.4}", dp.k0);
    let _ = writeln!(s, "K = {:.4}", dp.k_cut);
    let _ = writeln!(s, "dk = {:.6}", dp.dk);
    let _ = writeln!(s, "K_f = {}", dp.k_far);
    let _ = writeln!(s, "T = {}", dp.t_final);
    let _ = writeln!(s, "steps = {}", dp.n_steps);
    let _ = writeln!(s, "sources = {}", sim.sources().len());
    let _ = writeln!(s, "targets = {}", sim.targets().len());
    let _ = writeln!(s, "near modes = {}", sim.near_plan().lattice().len());
    let _ = writeln!(s, "far modes = {}", sim.far_plan().lattice().len());
    let _ = writeln!(s, "poles = {}", sim.soe().len());
    let _ = writeln!(s, "local pairs = {}", sim.local_pairs());
    let _ = writeln!(s, "transform tol = {:e}", cfg.transform_tolerance());
    let _ = writeln!(s, "\n[timings]");
    let _ = writeln!(s, "precompute = {:.4} s", t.precompute);
    let _ = writeln!(s, "local eval = {:.4} s", t.local_eval);
    let _ = writeln!(s, "history eval = {:.4} s", t.history_eval);
    let _ = writeln!(s, "alpha update = {:.4} s", t.alpha_update);
    let _ = writeln!(s, "beta update = {:.4} s", t.beta_update);
    let _ = writeln!(s, "type-1 transforms = {:.4} s", t.type1);
    let _ = writeln!(s, "total per step = {:.6} s", t.per_step());
    s
}

/// Max-norm absolute error E and relative error Ẽ = E / ‖oracle‖∞ (None for a zero oracle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub abs: f64,
    pub rel: Option<f64>,
}

pub fn error_metrics(values: &[f64], oracle: &[f64]) -> Result<ErrorMetrics> {
    if values.len() != oracle.len() {
        return Err(Error::InvalidInput("field and oracle differ in length".into()));
    }
    let abs = values
        .iter()
        .zip(oracle)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let norm = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ErrorMetrics {
        abs,
        rel: (norm > 0.0).then(|| abs / norm),
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub p: usize,
    /// (Δt actually used, Ẽ)
    pub points: Vec<(f64, f64)>,
    /// Least-squares log-log slope over the pre-plateau points, if at least three.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Errors at or below this are treated as plateau.
    pub plateau_threshold: f64,
}

impl ConvergenceTable {
    pub fn to_text(&self) -> String {
        let mut s = String::from("p,dt,rel_err\n");
        for r in &self.rows {
            for (dt, e) in &r.points {
                let _ = writeln!(s, "{},{:.6e},{:.6e}", r.p, dt, e);
            }
        }
        for r in &self.rows {
            match r.slope {
                Some(v) => {
                    let _ = writeln!(s, "# slope p={}: {:.3}", r.p, v);
                }
                None => {
                    let _ = writeln!(s, "# slope p={}: unavailable (fewer than 3 pre-plateau points)", r.p);
                }
            }
        }
        s
    }
}

/// Least-squares slope of log e against log dt over points with e above `threshold`.
pub fn fit_slope(points: &[(f64, f64)], threshold: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, e)| e > threshold)
        .map(|&(dt, e)| (dt.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Ẽ at the final time for each (p, Δt), against `direct_u`.
pub fn convergence(
    template: &SimulationConfig,
    dts: &[f64],
    orders: &[usize],
    plateau_threshold: f64,
) -> Result<ConvergenceTable> {
    let sources = template.load_sources()?;
    let points = template.targets.points();
    let t = template.t_final;
    let ocfg = OracleConfig::for_sources(&sources, t)?;
    let oracle = direct_u_many(&points, t, &sources, &ocfg);
    let mut rows = Vec::new();
    for &p in orders {
        let mut pts = Vec::new();
        for &dt in dts {
            let mut cfg = template.clone();
            cfg.p = p;
            cfg.dt = Some(dt);
            cfg.output_times = vec![t];
            cfg.mode = OutputMode::Total;
            let mut sim = Simulation::with_sources(&cfg, sources.clone())?;
            let n = sim.params().n_steps as i64;
            sim.advance_to(n)?;
            let ev = sim.evaluate()?;
            let m = error_metrics(&ev.total, &oracle)?;
            let rel = m.rel.ok_or_else(|| Error::Domain("oracle field is identically zero".into()))?;
            pts.push((sim.params().dt, rel));
        }
        rows.push(ConvergenceRow {
            p,
            slope: fit_slope(&pts, plateau_threshold),
            points: pts,
        });
    }
    Ok(ConvergenceTable {
        rows,
        plateau_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_cases() {
        let a = [1.0, -0.5, 0.25];
        let m = error_metrics(&a, &a).unwrap();
        assert_eq!((m.abs, m.rel), (0.0, Some(0.0)));
        let b = [1.0, -0.5 + 1e-6, 0.25];
        let m = error_metrics(&b, &a).unwrap();
        assert!((m.abs - 1e-6).abs() < 1e-15 && (m.rel.unwrap() - 1e-6).abs() < 1e-15);
        let m = error_metrics(&[0.0], &[0.0]).unwrap();
        assert_eq!(m.rel, None);
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| {
            let dt = 0.1 / 2f64.powi(i);
            (dt, 3.0 * dt.powi(4))
        }).collect();
        assert!((fit_slope(&pts, 0.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(fit_slope(&pts[..2], 0.0), None);
        assert_eq!(fit_slope(&pts, 1.0), None);
    }
}
