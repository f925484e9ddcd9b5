//! Sum-of-exponentials approximation 1/√(t² − r²) ≈ Σ q_l I0(rλ_l) e^{−λ_l t}.
//!
//! Built from 1/√(t² − r²) = ∫₀^∞ I0(rλ) e^{−λt} dλ truncated at λ_max and
//! discretized with composite Gauss–Legendre on dyadically graded panels.

use crate::error::{Error, Result};
use crate::numerics::{bessel_i0_scaled, standard_rule};

pub const DEFAULT_LAMBDA_MAX: f64 = 36.0;
pub const DEFAULT_PANELS: usize = 20;
pub const DEFAULT_NODES_PER_PANEL: usize = 32;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityBox {
    pub r_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone)]
pub struct SoeApproximation {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub tolerance: f64,
    pub validity: Option<ValidityBox>,
}

#[derive(Debug, Clone, Copy)]
pub struct SoeValidation {
    pub max_rel_err: f64,
    pub at: (f64, f64),
    pub flagged: bool,
}

/// Panels are [0, λ_max/2^{n−1}] followed by the dyadic intervals up to λ_max,
/// so that N_λ = n·N_g.
pub fn build_soe(lambda_max: f64, n: usize, ng: usize) -> Result<SoeApproximation> {
    if !(lambda_max > 0.0) || n == 0 || ng == 0 {
        return Err(Error::InvalidInput(format!(
            "build_soe: need lambda_max > 0, n ≥ 1, N_g ≥ 1 (got {lambda_max}, {n}, {ng})"
        )));
    }
    let rule = standard_rule(ng);
    let mut edges = vec![0.0];
    for k in (0..n).rev() {
        edges.push(lambda_max / 2f64.powi(k as i32));
    }
    let mut nodes = Vec::with_capacity(n * ng);
    let mut weights = Vec::with_capacity(n * ng);
    for w in edges.windows(2) {
        for (x, q) in rule.mapped(w[0], w[1]) {
            nodes.push(x);
            weights.push(q);
        }
    }
    Ok(SoeApproximation {
        nodes,
        weights,
        lambda_max,
        panels: n,
        nodes_per_panel: ng,
        tolerance: DEFAULT_TOLERANCE,
        validity: None,
    })
}

impl SoeApproximation {
    pub fn default_build() -> Self {
        build_soe(DEFAULT_LAMBDA_MAX, DEFAULT_PANELS, DEFAULT_NODES_PER_PANEL).unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn with_validity(mut self, r_max: f64, t_min: f64, t_max: f64) -> Result<Self> {
        if !(r_max >= 0.0 && t_min > r_max && t_max >= t_min) {
            return Err(Error::InvalidInput(format!(
                "validity box needs 0 ≤ r_max < t_min ≤ t_max (got {r_max}, {t_min}, {t_max})"
            )));
        }
        self.validity = Some(ValidityBox { r_max, t_min, t_max });
        Ok(self)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    /// Σ q_l [e^{−rλ_l} I0(rλ_l)] e^{−λ_l (t − r)}.
    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        let inside = r >= 0.0
            && t > r
            && self
                .validity
                .is_none_or(|v| r <= v.r_max && t >= v.t_min && t <= v.t_max);
        if !inside {
            return Err(Error::Domain(format!("soe_eval outside validity box at r={r}, t={t}")));
        }
        Ok(self.eval_unchecked(r, t))
    }

    fn eval_unchecked(&self, r: f64, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&l, &q)| q * bessel_i0_scaled(r * l) * (-l * (t - r)).exp())
            .sum()
    }

    /// Sup relative error over a samples × samples grid: r uniform on [0, r_max],
    /// t geometric on [t_min, t_max]. A 1×1 grid is the single point (0, t_max).
    pub fn validate(&self, t_max: f64, samples: usize) -> Result<SoeValidation> {
        let v = self.validity.ok_or_else(|| {
            Error::InvalidInput("soe_validate needs a validity box".to_string())
        })?;
        if samples == 0 || t_max < v.t_min {
            return Err(Error::InvalidInput(format!("bad sampling request ({samples}, {t_max})")));
        }
        let (rs, ts): (Vec<f64>, Vec<f64>) = if samples == 1 {
            (vec![0.0], vec![t_max])
        } else {
            let s = (samples - 1) as f64;
            (
                (0..samples).map(|i| v.r_max * i as f64 / s).collect(),
                (0..samples)
                    .map(|j| v.t_min * (t_max / v.t_min).powf(j as f64 / s))
                    .collect(),
            )
        };
        let mut worst = SoeValidation {
            max_rel_err: 0.0,
            at: (rs[0], ts[0]),
            flagged: false,
        };
        let mut scaled = vec![0.0; self.len()];
        for &r in &rs {
            for (s, (&l, &q)) in scaled.iter_mut().zip(self.nodes.iter().zip(&self.weights)) {
                *s = q * bessel_i0_scaled(r * l);
            }
            for &t in &ts {
                let approx: f64 = scaled
                    .iter()
                    .zip(&self.nodes)
                    .map(|(&s, &l)| s * (-l * (t - r)).exp())
                    .sum();
                let exact = 1.0 / ((t - r) * (t + r)).sqrt();
                let err = (approx - exact).abs() / exact;
                if err > worst.max_rel_err {
                    worst.max_rel_err = err;
                    worst.at = (r, t);
                }
            }
        }
        worst.flagged = worst.max_rel_err > self.tolerance;
        Ok(worst)
    }
}
