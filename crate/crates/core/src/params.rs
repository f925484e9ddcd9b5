//! Derived discretization parameters.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

pub const DEFAULT_K_FAR: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub eps: f64,
    /// Window shape b = ln(1/ε).
    pub b: f64,
    /// Blending width in steps.
    pub w: usize,
    pub dt: f64,
    /// Temporal blending width δ = WΔt.
    pub delta: f64,
    /// Radial blending width Δ.
    pub big_delta: f64,
    /// Near/far gap a.
    pub gap: f64,
    /// A = 2√2 + Δ.
    pub a_radius: f64,
    /// A⁺ = A + a.
    pub a_plus: f64,
    pub k0: f64,
    /// Near lattice cut-off K = K₀ + 2b/δ.
    pub k_cut: f64,
    pub dk: f64,
    pub k_far: f64,
    pub p: usize,
    pub t_final: f64,
    pub n_steps: usize,
}

/// Largest stable step (π − 2b/W)/K₀.
pub fn dt_bound(eps: f64, w: usize, k0: f64) -> f64 {
    (PI - 2.0 * (1.0 / eps).ln() / w as f64) / k0
}

/// Largest Poisson-exact lattice spacing 2π/(A⁺ + 2).
pub fn dk_bound(a_plus: f64) -> f64 {
    2.0 * PI / (a_plus + 2.0)
}

pub fn derive_params(
    eps: f64,
    w: usize,
    big_delta: f64,
    gap: f64,
    k0: f64,
    t_final: f64,
    p: usize,
) -> Result<DerivedParams> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("tolerance ε = {eps} must lie in (0, 1)")));
    }
    if !(big_delta > 0.0) || !(gap > 0.0) {
        return Err(Error::Config(format!("Δ = {big_delta} and a = {gap} must be positive")));
    }
    if !(k0 > 0.0) || !k0.is_finite() {
        return Err(Error::Config(format!("source bandwidth K₀ = {k0} must be positive")));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::Config(format!("final time T = {t_final} must be positive")));
    }
    if p == 0 {
        return Err(Error::Config("interpolation order p must be at least 1".to_string()));
    }
    let b = (1.0 / eps).ln();
    let w_min = (2.0 * b / PI).floor() as usize + 1;
    if w < w_min {
        return Err(Error::Config(format!(
            "W = {w} too small for ε = {eps}: need W > 2b/π, minimal feasible W = {w_min}"
        )));
    }
    let a_radius = 2.0 * SQRT_2 + big_delta;
    let a_plus = a_radius + gap;
    let mut dp = DerivedParams {
        eps,
        b,
        w,
        dt: 0.0,
        delta: 0.0,
        big_delta,
        gap,
        a_radius,
        a_plus,
        k0,
        k_cut: 0.0,
        dk: dk_bound(a_plus),
        k_far: DEFAULT_K_FAR,
        p,
        t_final,
        n_steps: 0,
    };
    dp.set_dt(dt_bound(eps, w, k0))?;
    Ok(dp)
}

impl DerivedParams {
    /// Use a step no larger than `dt`, shrunk so that T is a whole number of steps.
    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        let bound = dt_bound(self.eps, self.w, self.k0);
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {dt} exceeds the bandlimit bound {bound}"
            )));
        }
        self.set_dt(dt)?;
        Ok(self)
    }

    pub fn with_dk(mut self, dk: f64) -> Result<Self> {
        let bound = dk_bound(self.a_plus);
        if !(dk > 0.0) || dk > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "lattice spacing {dk} exceeds the exactness bound {bound}"
            )));
        }
        self.dk = dk;
        Ok(self)
    }

    pub fn with_k_far(mut self, k_far: f64) -> Result<Self> {
        if !(k_far >= 0.0) || !k_far.is_finite() {
            return Err(Error::Config(format!("far cut-off K_f = {k_far} must be ≥ 0")));
        }
        self.k_far = k_far;
        Ok(self)
    }

    fn set_dt(&mut self, dt: f64) -> Result<()> {
        let n_steps = (self.t_final / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        self.n_steps = n_steps;
        self.dt = self.t_final / n_steps as f64;
        self.delta = self.w as f64 * self.dt;
        self.k_cut = self.k0 + 2.0 * self.b / self.delta;
        if self.delta > self.a_plus - self.delta {
            return Err(Error::Config(format!(
                "blending width δ = {} overlaps the far window (A⁺ − δ = {})",
                self.delta,
                self.a_plus - self.delta
            )));
        }
        if self.near_delay_steps() < self.p.div_ceil(2) + 1 {
            return Err(Error::Config(format!(
                "time step {} too large: the delay A⁺ − δ spans fewer than ⌈p/2⌉ + 1 steps",
                self.dt
            )));
        }
        Ok(())
    }

    /// floor((A⁺ − δ)/Δt): whole steps in the delayed near drive.
    pub fn near_delay_steps(&self) -> usize {
        ((self.a_plus - self.delta) / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    /// Fractional part of (A⁺ − δ)/Δt.
    pub fn near_delay_frac(&self) -> f64 {
        let x = (self.a_plus - self.delta) / self.dt;
        (x - self.near_delay_steps() as f64).max(0.0)
    }

    /// ceil(A⁺/Δt): delay in steps of the far-history integration front.
    pub fn far_delay_steps(&self) -> usize {
        (self.a_plus / self.dt * (1.0 - 1e-12)).ceil() as usize
    }

    /// Signature levels needed by the local stencil: W + 1 + ⌈p/2⌉.
    pub fn local_levels(&self) -> usize {
        self.w + 1 + self.p.div_ceil(2)
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_defaults() {
        let dp = derive_params(1e-7, 16, 1.0, 1.0, 983.0, 8.0, 20).unwrap();
        assert!((dp.a_radius - 3.8284).abs() < 1e-4);
        assert!((dp.a_plus - 4.8284).abs() < 1e-4);
        assert!((dp.dk - 0.9202).abs() < 1e-4);
        assert!((dp.delta - 16.0 * dp.dt).abs() < 1e-15);
        assert!(dp.dt <= dt_bound(1e-7, 16, 983.0));
        assert!((dp.n_steps as f64 * dp.dt - 8.0).abs() < 1e-12);
        assert!(dp.delta <= dp.a_plus - dp.delta);
    }

    #[test]
    fn infeasible_w_names_minimum() {
        let err = derive_params(1e-7, 10, 1.0, 1.0, 983.0, 8.0, 20).unwrap_err();
        assert!(err.to_string().contains("minimal feasible W = 11"), "{err}");
        assert!(derive_params(1e-7, 11, 1.0, 1.0, 983.0, 8.0, 20).is_ok());
    }

    #[test]
    fn overrides_are_bounded() {
        let dp = derive_params(1e-8, 24, 1.0, 1.0, 60.0, 8.0, 4).unwrap();
        assert!(dp.clone().with_dt(dp.dt * 2.0).is_err());
        let half = dp.clone().with_dt(dp.dt / 2.0).unwrap();
        assert_eq!(half.n_steps, 2 * dp.n_steps);
        assert!(dp.clone().with_dk(1.0).is_err());
        assert!(dp.with_dk(0.46).is_ok());
    }

    #[test]
    fn delay_bookkeeping() {
        let dp = derive_params(1e-8, 24, 1.0, 1.0, 60.0, 8.0, 4).unwrap();
        let j0 = dp.near_delay_steps() as f64;
        let f = dp.near_delay_frac();
        assert!((0.0..1.0).contains(&f));
        assert!(((j0 + f) * dp.dt - (dp.a_plus - dp.delta)).abs() < 1e-12);
        let jf = dp.far_delay_steps() as f64;
        assert!(jf * dp.dt >= dp.a_plus - 1e-12 && (jf - 1.0) * dp.dt < dp.a_plus);
    }
}
