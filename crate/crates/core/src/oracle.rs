//! Brute-force reference values: the exact field, its three windowed parts, and
//! the spectral coefficients they correspond to.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::blending::BlendingWindow;
use crate::farhist::RADIAL_SHAPE;
use crate::numerics::{bessel_j0, integrate_with_breaks, standard_rule};
use crate::error::{Error, Result};
use crate::sources::SourceSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Gauss–Legendre nodes per source for `direct_u`.
    pub nodes: usize,
    /// Relative tolerance of the adaptive component oracles.
    pub adaptive_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            nodes: 256,
            adaptive_tol: 1e-12,
        }
    }
}

/// max(⌈3 ω_max √T / π⌉, ⌈ω_max T / 2⌉ + 64), clamped to [64, 4000].
pub fn default_nodes(omega_max: f64, t: f64) -> usize {
    let t = t.max(0.0);
    let a = (3.0 * omega_max * t.sqrt() / PI).ceil() as usize;
    let b = (omega_max * t / 2.0).ceil() as usize + 64;
    a.max(b).clamp(64, 4000)
}

impl OracleConfig {
    pub fn for_sources(sources: &SourceSet, t: f64) -> Result<Self> {
        let omega = sources.max_frequency().ok_or_else(|| {
            Error::Config("custom signatures need an explicit oracle node count".to_string())
        })?;
        Ok(Self {
            nodes: default_nodes(omega, t),
            ..Self::default()
        })
    }

    pub fn with_nodes(mut self, nodes: usize) -> Result<Self> {
        if nodes < 16 {
            return Err(Error::Config(format!("oracle node count {nodes} below 16")));
        }
        self.nodes = nodes;
        Ok(self)
    }
}

/// G(x, t) = H(t − |x|) / (2π√(t² − |x|²)); +∞ on the light cone.
pub fn green(x: [f64; 2], t: f64) -> f64 {
    let r = x[0].hypot(x[1]);
    if t < r {
        0.0
    } else if t == r {
        f64::INFINITY
    } else {
        1.0 / (2.0 * PI * ((t - r) * (t + r)).sqrt())
    }
}

/// Radial window φ_Δ of width Δ used by the truncated kernel.
pub fn radial_window(big_delta: f64) -> Result<BlendingWindow> {
    BlendingWindow::new(big_delta, RADIAL_SHAPE)
}

/// 𝒢_A(x, t) = φ_Δ(A − |x|) G(x, t).
pub fn truncated_green(x: [f64; 2], t: f64, window: &BlendingWindow, a_radius: f64) -> f64 {
    let r = x[0].hypot(x[1]);
    let cut = window.cumulative(a_radius - r);
    if cut == 0.0 {
        return 0.0;
    }
    cut * green(x, t)
}

fn distance(x: [f64; 2], y: [f64; 2]) -> f64 {
    (x[0] - y[0]).hypot(x[1] - y[1])
}

/// u(x, t) = (1/π) Σ_j ∫₀^√(t−r_j) σ_j(t − r_j − s²) / √(s² + 2r_j) ds.
pub fn direct_u(x: [f64; 2], t: f64, sources: &SourceSet, cfg: &OracleConfig) -> f64 {
    let rule = standard_rule(cfg.nodes);
    let mut u = 0.0;
    for (j, &y) in sources.positions().iter().enumerate() {
        let r = distance(x, y);
        if r == 0.0 || r >= t {
            continue;
        }
        let sig = &sources.signatures()[j];
        u += rule.integrate(0.0, (t - r).sqrt(), |s| {
            sig.eval(t - r - s * s) / (s * s + 2.0 * r).sqrt()
        });
    }
    u / PI
}

/// `direct_u` at many points in parallel.
pub fn direct_u_many(points: &[[f64; 2]], t: f64, sources: &SourceSet, cfg: &OracleConfig) -> Vec<f64> {
    points.par_iter().map(|&x| direct_u(x, t, sources, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Local,
    Near,
    Far,
}

/// Geometry of the split: temporal window (width δ), A⁺, and the radial window on A.
#[derive(Debug, Clone)]
pub struct SplitGeometry {
    pub window: BlendingWindow,
    pub a_plus: f64,
    pub radial: BlendingWindow,
    pub a_radius: f64,
}

impl SplitGeometry {
    /// Weight of delay τ in each component.
    pub fn weight(&self, which: Component, tau: f64) -> f64 {
        match which {
            Component::Local => self.window.complement(tau),
            Component::Near => self.window.cumulative(tau) * self.window.cumulative(self.a_plus - tau),
            Component::Far => self.window.complement(self.a_plus - tau),
        }
    }

    /// Delay range [lo, hi] outside which the weight vanishes.
    fn support(&self, which: Component) -> (f64, f64) {
        let d = self.window.width();
        match which {
            Component::Local => (0.0, d),
            Component::Near => (0.0, self.a_plus),
            Component::Far => (self.a_plus - d, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentValue {
    pub value: f64,
    /// False when an adaptive integral hit its segment limit.
    pub converged: bool,
}

/// Adaptive quadrature of one windowed part; the far part uses 𝒢_A.
pub fn direct_component(
    x: [f64; 2],
    t: f64,
    sources: &SourceSet,
    which: Component,
    geom: &SplitGeometry,
    cfg: &OracleConfig,
) -> ComponentValue {
    let (lo, hi) = geom.support(which);
    let d = geom.window.width();
    let mut value = 0.0;
    let mut converged = true;
    for (j, &y) in sources.positions().iter().enumerate() {
        let r = distance(x, y);
        let start = r.max(lo);
        let end = t.min(hi);
        if r == 0.0 || end <= start {
            continue;
        }
        let radial = if which == Component::Far {
            geom.radial.cumulative(geom.a_radius - r)
        } else {
            1.0
        };
        if radial == 0.0 {
            continue;
        }
        let sig = &sources.signatures()[j];
        // τ = r + s² over [start, end]
        let s_of = |tau: f64| (tau - r).max(0.0).sqrt();
        let mut breaks = vec![s_of(start)];
        for b in [d, geom.a_plus - d, geom.a_plus] {
            if b > start && b < end {
                breaks.push(s_of(b));
            }
        }
        breaks.push(s_of(end));
        // Extra breaks every unit of delay keep the initial partition ahead of oscillation.
        let mut tau = start.floor() + 1.0;
        while tau < end {
            breaks.push(s_of(tau));
            tau += 1.0;
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let res = integrate_with_breaks(
            |s| {
                let tau = r + s * s;
                2.0 * sig.eval(t - tau) * geom.weight(which, tau) / (s * s + 2.0 * r).sqrt()
            },
            &breaks,
            1e-300,
            cfg.adaptive_tol,
        );
        converged &= res.converged;
        value += radial * res.value / (2.0 * PI);
    }
    ComponentValue { value, converged }
}

/// S(k, τ) = Σ_j σ_j(τ) e^{ik·y_j}.
pub fn spectral_source_at(k: [f64; 2], tau: f64, sources: &SourceSet) -> Complex64 {
    sources
        .positions()
        .iter()
        .zip(sources.signatures())
        .map(|(y, s)| Complex64::from_polar(s.eval(tau), k[0] * y[0] + k[1] * y[1]))
        .sum()
}

/// Near-history coefficient α(k, t) = ∫ sin(κ(t−τ))/κ · φ(t−τ)φ(A⁺ − t + τ) S(k, τ) dτ.
pub fn duhamel_alpha(
    k: [f64; 2],
    t: f64,
    sources: &SourceSet,
    geom: &SplitGeometry,
    tol: f64,
) -> (Complex64, bool) {
    let kappa = k[0].hypot(k[1]);
    let d = geom.window.width();
    let hi = t.min(geom.a_plus);
    if hi <= 0.0 {
        return (Complex64::new(0.0, 0.0), true);
    }
    let mut breaks = vec![0.0];
    for b in [d, geom.a_plus - d] {
        if b < hi {
            breaks.push(b);
        }
    }
    let steps = (hi * (1.0 + kappa) / 2.0).ceil() as usize;
    for i in 1..steps {
        breaks.push(hi * i as f64 / steps as f64);
    }
    breaks.push(hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kernel = |delay: f64| {
        crate::nearhist::sinc_kernel(kappa, delay) * geom.weight(Component::Near, delay)
    };
    // Real and imaginary parts can cancel to nearly zero, so the error is also
    // measured against the L1 norm of the integrand.
    let l1 = integrate_with_breaks(
        |u| kernel(u).abs() * (0..sources.len()).map(|j| sources.eval(j, t - u).abs()).sum::<f64>(),
        &breaks,
        1e-300,
        1e-3,
    )
    .value;
    let floor = (tol * l1).max(1e-300);
    let re = integrate_with_breaks(|u| kernel(u) * spectral_source_at(k, t - u, sources).re, &breaks, floor, tol);
    let im = integrate_with_breaks(|u| kernel(u) * spectral_source_at(k, t - u, sources).im, &breaks, floor, tol);
    (Complex64::new(re.value, im.value), re.converged && im.converged)
}

/// Ĝ_A(κ, d) = ∫₀^A r J0(κr) φ_Δ(A − r) / √(d² − r²) dr for d > A.
pub fn truncated_green_hat(kappa: f64, d: f64, geom: &SplitGeometry, tol: f64) -> f64 {
    let a = geom.a_radius;
    let n = ((a * kappa.max(1.0) / PI).ceil() as usize).max(2);
    let breaks: Vec<f64> = (0..=n).map(|i| a * i as f64 / n as f64).collect();
    integrate_with_breaks(
        |r| r * bessel_j0(kappa * r) * geom.radial.cumulative(a - r) / ((d - r) * (d + r)).sqrt(),
        &breaks,
        1e-300,
        tol,
    )
    .value
}

/// Far-history coefficient α_F(k, t) by nested quadrature of its definition.
pub fn far_alpha_direct(k: [f64; 2], t: f64, sources: &SourceSet, geom: &SplitGeometry, tol: f64) -> Complex64 {
    let kappa = k[0].hypot(k[1]);
    let lo = geom.a_plus - geom.window.width();
    if t <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let steps = ((t - lo) * 4.0).ceil() as usize;
    let mut breaks: Vec<f64> = (0..=steps).map(|i| lo + (t - lo) * i as f64 / steps as f64).collect();
    if geom.a_plus < t {
        breaks.push(geom.a_plus);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let f = |delay: f64| {
        let w = geom.weight(Component::Far, delay);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        spectral_source_at(k, t - delay, sources) * (w * truncated_green_hat(kappa, delay, geom, tol))
    };
    let re = integrate_with_breaks(|u| f(u).re, &breaks, 1e-300, tol).value;
    let im = integrate_with_breaks(|u| f(u).im, &breaks, 1e-300, tol).value;
    Complex64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::Signature;
    use std::sync::Arc;

    fn geom() -> SplitGeometry {
        let a_radius = 2.0 * std::f64::consts::SQRT_2 + 1.0;
        SplitGeometry {
            window: BlendingWindow::from_tolerance(0.2, 1e-10).unwrap(),
            a_plus: a_radius + 1.0,
            radial: radial_window(1.0).unwrap(),
            a_radius,
        }
    }

    #[test]
    fn green_values() {
        assert_eq!(green([2.0, 0.0], 1.0), 0.0);
        assert!((green([0.0, 0.0], 2.0) - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((green([1.0, 0.0], 2f64.sqrt()) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(green([1.0, 0.0], 1.0).is_infinite());
    }

    #[test]
    fn truncated_green_cases() {
        let g = geom();
        let a = g.a_radius;
        assert_eq!(truncated_green([a + 0.1, 0.0], a + 1.0, &g.radial, a), 0.0);
        let x = [a - 1.1, 0.0];
        assert_eq!(truncated_green(x, a, &g.radial, a), green(x, a));
        let x = [a - 0.5, 0.0];
        let v = truncated_green(x, a, &g.radial, a);
        assert!((v - green(x, a) * g.radial.cumulative(0.5)).abs() < 1e-16);
    }

    #[test]
    fn unit_step_source_gives_arccosh() {
        let s = SourceSet::new(
            vec![[0.3, 0.0]],
            vec![Signature::Custom(Arc::new(|t: f64| if t > 0.0 { 1.0 } else { 0.0 }))],
        )
        .unwrap();
        let cfg = OracleConfig::default();
        let t = 2.5;
        let u = direct_u([0.0, 0.0], t, &s, &cfg);
        let exact = (t / 0.3f64).acosh() / (2.0 * PI);
        assert!((u - exact).abs() < 1e-10 * exact, "{u} vs {exact}");
        assert_eq!(direct_u([0.0, 0.0], 0.2, &s, &cfg), 0.0);
    }

    #[test]
    fn mirror_symmetry() {
        let s = SourceSet::erf_sine(vec![[0.4, 0.2], [-0.4, 0.2]], &[1.5, 1.5], &[7.0, 7.0]).unwrap();
        let cfg = OracleConfig::for_sources(&s, 4.0).unwrap();
        let a = direct_u([0.3, -0.5], 4.0, &s, &cfg);
        let b = direct_u([-0.3, -0.5], 4.0, &s, &cfg);
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
    }

    #[test]
    fn node_doubling_is_converged() {
        let s = SourceSet::erf_sine(
            vec![[0.4, 0.2], [-0.7, 0.9], [0.1, -0.3]],
            &[1.5, 2.2, 3.0],
            &[20.0 * PI, 13.0, 50.0],
        )
        .unwrap();
        for t in [3.0, 6.0, 8.0] {
            let cfg = OracleConfig::for_sources(&s, t).unwrap();
            let twice = cfg.with_nodes(2 * cfg.nodes).unwrap();
            for x in [[0.0, 0.0], [0.9, -0.9], [0.4, 0.21]] {
                let a = direct_u(x, t, &s, &cfg);
                let b = direct_u(x, t, &s, &twice);
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-3), "t={t} x={x:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn components_sum_to_total() {
        use rand::{Rng, SeedableRng};
        let g = geom();
        let s = SourceSet::erf_sine(
            vec![[0.4, 0.2], [-0.7, 0.9], [0.1, -0.3]],
            &[1.5, 2.2, 3.0],
            &[9.0, 13.0, 20.0],
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let t = rng.random_range(1.0..9.0);
            let cfg = OracleConfig::for_sources(&s, t).unwrap().with_nodes(1024).unwrap();
            let total = direct_u(x, t, &s, &cfg);
            let parts: f64 = [Component::Local, Component::Near, Component::Far]
                .iter()
                .map(|&c| {
                    let v = direct_component(x, t, &s, c, &g, &cfg);
                    assert!(v.converged);
                    v.value
                })
                .sum();
            assert!((parts - total).abs() < 1e-9 * total.abs().max(1e-2), "x={x:?} t={t}: {parts} vs {total}");
        }
    }

    #[test]
    fn component_supports() {
        let g = geom();
        let s = SourceSet::erf_sine(vec![[0.5, 0.5]], &[1.5], &[9.0]).unwrap();
        let cfg = OracleConfig::default();
        let far = direct_component([0.0, 0.0], g.a_plus - 0.3, &s, Component::Far, &g, &cfg);
        assert_eq!(far.value, 0.0);
        let local = direct_component([-0.5, -0.5], 5.0, &s, Component::Local, &g, &cfg);
        assert_eq!(local.value, 0.0);
    }
}
