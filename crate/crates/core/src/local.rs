//! Time-local part u_ℓ: singular quadrature over delays in (r, δ) for sources
//! within δ of a target, applied as a sparse operator on recent signature levels.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::blending::BlendingWindow;
use crate::error::{Error, Result};
use crate::numerics::{lagrange_weights, standard_rule, stencil_start};
use crate::sources::SignatureRing;

/// Nodes in the square-root regime.
pub const SQRT_NODES: usize = 60;
/// Total nodes in the cosh regime, split evenly between the two legs.
pub const COSH_NODES: usize = 80;

/// Transition distance r₀ = Δt/100.
pub fn transition_radius(dt: f64) -> f64 {
    dt / 100.0
}

/// Source neighbours of each target at distance in (0, δ), stored CSR.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    radius: f64,
    offsets: Vec<usize>,
    sources: Vec<u32>,
    distances: Vec<f64>,
}

impl NeighborIndex {
    /// Uniform hash with cell size `radius`.
    pub fn build(targets: &[[f64; 2]], sources: &[[f64; 2]], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("neighbour radius {radius} must be positive")));
        }
        let cell = |p: [f64; 2]| ((p[0] / radius).floor() as i64, (p[1] / radius).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (j, &y) in sources.iter().enumerate() {
            grid.entry(cell(y)).or_default().push(j as u32);
        }
        let lists: Vec<Vec<(u32, f64)>> = targets
            .par_iter()
            .map(|&x| {
                let (cx, cy) = cell(x);
                let mut out = Vec::new();
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(ids) = grid.get(&(cx + dx, cy + dy)) {
                            for &j in ids {
                                let y = sources[j as usize];
                                let r = (x[0] - y[0]).hypot(x[1] - y[1]);
                                if r > 0.0 && r < radius {
                                    out.push((j, r));
                                }
                            }
                        }
                    }
                }
                out.sort_unstable_by_key(|&(j, _)| j);
                out
            })
            .collect();
        let mut offsets = Vec::with_capacity(targets.len() + 1);
        offsets.push(0);
        let mut ids = Vec::new();
        let mut distances = Vec::new();
        for l in lists {
            for (j, r) in l {
                ids.push(j);
                distances.push(r);
            }
            offsets.push(ids.len());
        }
        Ok(Self {
            radius,
            offsets,
            sources: ids,
            distances,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn targets(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn pairs(&self) -> usize {
        self.sources.len()
    }

    /// (source, distance) pairs of target `i`, sorted by source.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        self.sources[a..b]
            .iter()
            .zip(&self.distances[a..b])
            .map(|(&j, &r)| (j as usize, r))
    }
}

/// Delays and weights with ∫_r^δ σ(t−τ)[1−φ(τ)] / (2π√(τ²−r²)) dτ ≈ Σ w_m σ(t − d_m).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRule {
    pub delays: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LocalRule {
    pub fn apply(&self, sigma_at_delay: impl Fn(f64) -> f64) -> f64 {
        self.delays
            .iter()
            .zip(&self.weights)
            .map(|(&d, &w)| w * sigma_at_delay(d))
            .sum()
    }
}

pub fn local_rule(r: f64, dt: f64, window: &BlendingWindow) -> Result<LocalRule> {
    local_rule_with(r, dt, window, SQRT_NODES, COSH_NODES)
}

pub fn local_rule_with(
    r: f64,
    dt: f64,
    window: &BlendingWindow,
    sqrt_nodes: usize,
    cosh_nodes: usize,
) -> Result<LocalRule> {
    rule_with_factor(r, dt, window.width(), sqrt_nodes, cosh_nodes, |d| window.complement(d))
}

/// As [`local_rule_with`] with 1 − φ replaced by `factor`.
pub fn rule_with_factor(
    r: f64,
    dt: f64,
    delta: f64,
    sqrt_nodes: usize,
    cosh_nodes: usize,
    factor: impl Fn(f64) -> f64,
) -> Result<LocalRule> {
    if !(r > 0.0 && r < delta) {
        return Err(Error::Domain(format!("local rule needs 0 < r < δ = {delta}, got r = {r}")));
    }
    let c = 1.0 / (2.0 * PI);
    let mut delays = Vec::new();
    let mut weights = Vec::new();
    let tau0 = 2.0 * dt;
    if r > transition_radius(dt) || tau0 >= delta {
        // τ = r + s²
        for (s, w) in standard_rule(sqrt_nodes).mapped(0.0, (delta - r).sqrt()) {
            let d = r + s * s;
            delays.push(d);
            weights.push(c * w * 2.0 * factor(d) / (s * s + 2.0 * r).sqrt());
        }
    } else {
        let half = cosh_nodes.div_ceil(2);
        // τ = r cosh s on [r, τ₀]
        for (s, w) in standard_rule(half).mapped(0.0, (tau0 / r).acosh()) {
            let d = r * s.cosh();
            delays.push(d);
            weights.push(c * w * factor(d));
        }
        for (d, w) in standard_rule(half).mapped(tau0, delta) {
            delays.push(d);
            weights.push(c * w * factor(d) / ((d - r) * (d + r)).sqrt());
        }
    }
    Ok(LocalRule { delays, weights })
}

/// Fused weights η per (target, source) pair over the most recent `n_max` levels.
#[derive(Debug, Clone)]
pub struct LocalStencil {
    n_max: usize,
    offsets: Vec<usize>,
    sources: Vec<u32>,
    /// [pair][k], k = delay in steps
    eta: Vec<f64>,
}

impl LocalStencil {
    /// Stencil from `index`, interpolating with the p levels nearest each delay.
    pub fn build(index: &NeighborIndex, dt: f64, window: &BlendingWindow, p: usize) -> Result<Self> {
        let w = (window.width() / dt).round() as usize;
        let n_max = w + 1 + p.div_ceil(2);
        let rows: Vec<Result<Vec<f64>>> = (0..index.pairs())
            .into_par_iter()
            .map(|pair| {
                let rule = local_rule(index.distances[pair], dt, window)?;
                Ok(fuse(&rule, dt, p, n_max))
            })
            .collect();
        let mut eta = Vec::with_capacity(index.pairs() * n_max);
        for row in rows {
            eta.extend(row?);
        }
        Ok(Self {
            n_max,
            offsets: index.offsets.clone(),
            sources: index.sources.clone(),
            eta,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn pairs(&self) -> usize {
        self.sources.len()
    }

    /// η of pair `pair`, indexed by delay in steps.
    pub fn eta(&self, pair: usize) -> &[f64] {
        &self.eta[pair * self.n_max..(pair + 1) * self.n_max]
    }

    /// u_ℓ at every target at time level `n`.
    pub fn apply(&self, ring: &SignatureRing, n: i64) -> Result<Vec<f64>> {
        let levels: Vec<&[f64]> = (0..self.n_max)
            .map(|k| ring.level(n - k as i64))
            .collect::<Result<_>>()?;
        let targets = self.offsets.len() - 1;
        Ok((0..targets)
            .into_par_iter()
            .map(|i| {
                let mut u = 0.0;
                for pair in self.offsets[i]..self.offsets[i + 1] {
                    let j = self.sources[pair] as usize;
                    let eta = self.eta(pair);
                    for (k, lvl) in levels.iter().enumerate() {
                        u += eta[k] * lvl[j];
                    }
                }
                u
            })
            .collect())
    }
}

/// Fold Lagrange interpolation into the rule: η_k = Σ_m w_m ξ_{m,k}.
pub fn fuse(rule: &LocalRule, dt: f64, p: usize, n_max: usize) -> Vec<f64> {
    let mut eta = vec![0.0; n_max];
    let mut xi = vec![0.0; p];
    for (&d, &w) in rule.delays.iter().zip(&rule.weights) {
        let y = d / dt;
        let k0 = stencil_start(y, p, 0, n_max as i64 - 1);
        lagrange_weights(y, k0, p, &mut xi);
        for (i, x) in xi.iter().enumerate() {
            eta[k0 as usize + i] += w * x;
        }
    }
    eta
}

/// Convenience wrapper: u_ℓ at level `n`.
pub fn apply_local(stencil: &LocalStencil, ring: &SignatureRing, n: i64) -> Result<Vec<f64>> {
    stencil.apply(ring, n)
}
