//! Near history: Fourier data α(k, t), α̇(k, t) advanced by the exact one-step
//! Duhamel recurrence of the driven oscillator α̈ + κ²α = F.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::blending::BlendingWindow;
use crate::error::{Error, Result};
use crate::numerics::{lagrange_weights, standard_rule, stencil_start};
use crate::nudft::{NudftPlan, WavevectorLattice};
use crate::params::DerivedParams;
use crate::sources::SpectralSourceHistory;

/// Gauss nodes per step for h and g.
pub const STEP_NODES: usize = 12;

/// sin(κx)/κ with the κ → 0 limit x.
#[inline]
pub fn sinc_kernel(kappa: f64, x: f64) -> f64 {
    if kappa == 0.0 {
        x
    } else {
        (kappa * x).sin() / kappa
    }
}

/// Ψ(κ, τ) = 2cos(κτ)φ'(τ) + sin(κτ)/κ φ''(τ), shifted by `shift` inside the trigonometric factors.
#[inline]
fn psi(kappa: f64, tau: f64, shift: f64, d1: f64, d2: f64) -> f64 {
    2.0 * (kappa * (tau + shift)).cos() * d1 + sinc_kernel(kappa, tau + shift) * d2
}

/// Half-width of the Lagrange stencil that places the window-edge terms off the grid.
pub const JUMP_HALF: usize = 4;

/// Drive weights per radius class;
/// `h = Σ_m P_m S(n − m) − Σ_m PA_m S(n − j0 − m)`.
///
/// Stored weights include both factors of Δt (outer Gauss and inner trapezoid).
#[derive(Debug, Clone)]
pub struct DriveWeights {
    pub w: usize,
    classes: usize,
    /// [m][class], m in 0..W + JUMP_HALF
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// [m + JUMP_HALF][class], m in −JUMP_HALF..=W + JUMP_HALF, for delayed levels n − j0 − m
    pub p_delayed: Vec<f64>,
    pub q_delayed: Vec<f64>,
}

impl DriveWeights {
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Current-time levels n, n − 1, … used by the drive.
    pub fn now_levels(&self) -> usize {
        self.w + JUMP_HALF
    }

    /// Delayed levels n − j0 + JUMP_HALF down to n − j0 − W − JUMP_HALF.
    pub fn delayed_levels(&self) -> usize {
        self.w + 1 + 2 * JUMP_HALF
    }
}

/// Drive weights for the classes `kappas`.
///
/// The current-level drive uses delays (θ_g + m)Δt, m = 0..W−1. The delayed drive uses
/// grid-aligned levels n − j0 − m, m = 0..W, at delays (θ_g − f + m)Δt where
/// A⁺ − δ = (j0 + f)Δt, so no off-grid signature values are needed.
///
/// φ' jumps by J = φ'(0) at both ends of its support, so the second derivative of the
/// near window carries point masses at delays δ, A⁺ − δ and A⁺. Their contributions
/// J·sin(κD)/κ·S(t − D) are interpolated from the grid with 2·JUMP_HALF points.
pub fn precompute_drive_weights(
    dp: &DerivedParams,
    window: &BlendingWindow,
    kappas: &[f64],
) -> DriveWeights {
    let w = dp.w;
    let dt = dp.dt;
    let shift = dp.a_plus - dp.delta;
    let frac = dp.near_delay_frac();
    let rule = standard_rule(STEP_NODES);
    let nodes: Vec<(f64, f64)> = rule.mapped(0.0, 1.0).collect();
    let nc = kappas.len();
    let half = JUMP_HALF as i64;
    let q = 2 * JUMP_HALF;
    let jump = window.bump(0.0);
    // Window derivatives depend only on the delay, not on κ.
    let derivs = |d: f64| (window.bump(d), window.bump_derivative(d));
    let cur: Vec<Vec<(f64, f64)>> = (0..w)
        .map(|m| nodes.iter().map(|&(th, _)| derivs((th + m as f64) * dt)).collect())
        .collect();
    let del: Vec<Vec<(f64, f64)>> = (0..=w)
        .map(|m| {
            nodes
                .iter()
                .map(|&(th, _)| derivs((th - frac + m as f64) * dt))
                .collect()
        })
        .collect();
    // Edge terms per Gauss node: (D, sign, m-position, current ring?) with m = n − level.
    let edges: Vec<(f64, f64, bool, Vec<(i64, f64)>)> = [
        (dp.delta, -1.0, w as f64, true),
        (shift, -1.0, frac, false),
        (dp.a_plus, 1.0, frac + w as f64, false),
    ]
    .iter()
    .map(|&(d, sign, base, now)| {
        let (lo, hi) = if now { (0, w as i64 + half - 1) } else { (-half, w as i64 + half) };
        let stencils = nodes
            .iter()
            .map(|&(th, _)| {
                let x = base - th;
                let start = stencil_start(x, q, lo, hi);
                let mut l = vec![0.0; q];
                lagrange_weights(x, start, q, &mut l);
                (start, l)
            })
            .collect::<Vec<_>>();
        (d, sign, now, stencils.into_iter().flat_map(|(s, l)| (0..q).map(move |i| (s + i as i64, l[i]))).collect())
    })
    .collect();
    let mut out = DriveWeights {
        w,
        classes: nc,
        p: vec![0.0; (w + JUMP_HALF) * nc],
        q: vec![0.0; (w + JUMP_HALF) * nc],
        p_delayed: vec![0.0; (w + 1 + 2 * JUMP_HALF) * nc],
        q_delayed: vec![0.0; (w + 1 + 2 * JUMP_HALF) * nc],
    };
    for (c, &kappa) in kappas.iter().enumerate() {
        let outer: Vec<(f64, f64)> = nodes
            .iter()
            .map(|&(th, wg)| {
                let rem = (1.0 - th) * dt;
                (wg * dt * sinc_kernel(kappa, rem), wg * dt * (kappa * rem).cos())
            })
            .collect();
        for m in 0..w {
            let (mut p, mut q) = (0.0, 0.0);
            for (g, &(th, _)) in nodes.iter().enumerate() {
                let (d1, d2) = cur[m][g];
                let ps = psi(kappa, (th + m as f64) * dt, 0.0, d1, d2);
                p += outer[g].0 * ps;
                q += outer[g].1 * ps;
            }
            out.p[m * nc + c] = p * dt;
            out.q[m * nc + c] = q * dt;
        }
        for m in 0..=w {
            let (mut p, mut q) = (0.0, 0.0);
            for (g, &(th, _)) in nodes.iter().enumerate() {
                let (d1, d2) = del[m][g];
                if d1 == 0.0 && d2 == 0.0 {
                    continue;
                }
                let ps = psi(kappa, (th - frac + m as f64) * dt, shift, d1, d2);
                p += outer[g].0 * ps;
                q += outer[g].1 * ps;
            }
            out.p_delayed[(m + JUMP_HALF) * nc + c] = p * dt;
            out.q_delayed[(m + JUMP_HALF) * nc + c] = q * dt;
        }
        for (d, sign, now, taps) in &edges {
            let amp = sign * jump * sinc_kernel(kappa, *d);
            for (g, chunk) in taps.chunks(q).enumerate() {
                for &(m, l) in chunk {
                    let (dp_, dq_) = (amp * l * outer[g].0, amp * l * outer[g].1);
                    if *now {
                        out.p[m as usize * nc + c] += dp_;
                        out.q[m as usize * nc + c] += dq_;
                    } else {
                        let i = (m + half) as usize * nc + c;
                        out.p_delayed[i] -= dp_;
                        out.q_delayed[i] -= dq_;
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct NearHistoryState {
    kappas: Vec<f64>,
    class_of: Vec<u32>,
    weights: DriveWeights,
    // per class: cos κΔt, sin κΔt / κ, κ sin κΔt
    rotation: Vec<[f64; 3]>,
    alpha: Vec<Complex64>,
    alpha_dot: Vec<Complex64>,
    step: i64,
    delay_steps: i64,
}

const CHUNK: usize = 256;

impl NearHistoryState {
    /// State over modes whose radius class is `class_of[i]`, class radii `kappas`.
    pub fn new(
        dp: &DerivedParams,
        window: &BlendingWindow,
        kappas: Vec<f64>,
        class_of: Vec<u32>,
    ) -> Result<Self> {
        if class_of.iter().any(|&c| c as usize >= kappas.len()) {
            return Err(Error::InvalidInput("class index out of range".to_string()));
        }
        if (window.width() - dp.delta).abs() > 1e-12 * dp.delta {
            return Err(Error::InvalidInput(format!(
                "drive window width {} differs from δ = {}",
                window.width(),
                dp.delta
            )));
        }
        let weights = precompute_drive_weights(dp, window, &kappas);
        let rotation = kappas
            .iter()
            .map(|&k| {
                let (s, c) = (k * dp.dt).sin_cos();
                [c, sinc_kernel(k, dp.dt), k * s]
            })
            .collect();
        let n = class_of.len();
        Ok(Self {
            kappas,
            class_of,
            weights,
            rotation,
            alpha: vec![Complex64::new(0.0, 0.0); n],
            alpha_dot: vec![Complex64::new(0.0, 0.0); n],
            step: 0,
            delay_steps: dp.near_delay_steps() as i64,
        })
    }

    pub fn for_lattice(
        dp: &DerivedParams,
        window: &BlendingWindow,
        lattice: &WavevectorLattice,
    ) -> Result<Self> {
        let (kappas, class_of) = lattice.radius_classes();
        Self::new(dp, window, kappas, class_of)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn alpha(&self) -> &[Complex64] {
        &self.alpha
    }

    pub fn alpha_dot(&self) -> &[Complex64] {
        &self.alpha_dot
    }

    pub fn weights(&self) -> &DriveWeights {
        &self.weights
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    /// Centre of the delayed levels used at the current step: n − j0.
    ///
    /// The drive reads n − j0 + JUMP_HALF down to n − j0 − W − JUMP_HALF.
    pub fn delayed_level(&self) -> i64 {
        self.step - self.delay_steps
    }

    /// Advance from t_n to t_{n+1}.
    ///
    /// `s_now` must hold levels n − W − JUMP_HALF + 1..=n and `s_delayed` levels
    /// n − j0 − W − JUMP_HALF..=n − j0 + JUMP_HALF.
    pub fn step_alpha(
        &mut self,
        s_now: &SpectralSourceHistory,
        s_delayed: &SpectralSourceHistory,
    ) -> Result<()> {
        let n = self.step;
        let nd = self.delayed_level() + JUMP_HALF as i64;
        let now: Vec<&[Complex64]> = (0..self.weights.now_levels())
            .map(|m| s_now.level(n - m as i64))
            .collect::<Result<_>>()?;
        let del: Vec<&[Complex64]> = (0..self.weights.delayed_levels())
            .map(|m| s_delayed.level(nd - m as i64))
            .collect::<Result<_>>()?;
        if now.iter().chain(&del).any(|s| s.len() != self.alpha.len()) {
            return Err(Error::State("spectral slice length differs from the mode count".into()));
        }
        let nc = self.weights.classes;
        let wts = &self.weights;
        let rot = &self.rotation;
        let class_of = &self.class_of;
        self.alpha
            .par_chunks_mut(CHUNK)
            .zip(self.alpha_dot.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(chunk, (a, ad))| {
                let base = chunk * CHUNK;
                let len = a.len();
                let cls = &class_of[base..base + len];
                let mut h = [Complex64::new(0.0, 0.0); CHUNK];
                let mut g = [Complex64::new(0.0, 0.0); CHUNK];
                for (m, s) in now.iter().enumerate() {
                    let (pw, qw) = (&wts.p[m * nc..], &wts.q[m * nc..]);
                    let s = &s[base..base + len];
                    for i in 0..len {
                        let c = cls[i] as usize;
                        h[i] += s[i] * pw[c];
                        g[i] += s[i] * qw[c];
                    }
                }
                for (m, s) in del.iter().enumerate() {
                    let (pw, qw) = (&wts.p_delayed[m * nc..], &wts.q_delayed[m * nc..]);
                    let s = &s[base..base + len];
                    for i in 0..len {
                        let c = cls[i] as usize;
                        h[i] -= s[i] * pw[c];
                        g[i] -= s[i] * qw[c];
                    }
                }
                for i in 0..len {
                    let [c, s_over_k, k_s] = rot[cls[i] as usize];
                    let (x, v) = (a[i], ad[i]);
                    a[i] = x * c + v * s_over_k + h[i];
                    ad[i] = -x * k_s + v * c + g[i];
                }
            });
        self.step += 1;
        Ok(())
    }
}

/// u_nh at targets, with optional extra coefficients added at the given lattice indices.
#[derive(Debug, Clone)]
pub struct NearEvaluation {
    pub values: Vec<f64>,
    /// max |Im| of the transform; meaningful only on a full (non-half) lattice.
    pub imag_residual: f64,
}

pub fn eval_near_history(
    plan: &NudftPlan,
    alpha: &[Complex64],
    extra: Option<(&[usize], &[Complex64])>,
    targets: &[[f64; 2]],
) -> Result<NearEvaluation> {
    let lat = plan.lattice();
    if alpha.len() != lat.len() {
        return Err(Error::InvalidInput("α length differs from the lattice".to_string()));
    }
    let mut coeffs = alpha.to_vec();
    if let Some((index, values)) = extra {
        if index.len() != values.len() {
            return Err(Error::InvalidInput("extra coefficient index/value mismatch".into()));
        }
        for (&i, &v) in index.iter().zip(values) {
            coeffs[i] += v;
        }
    }
    let scale = (lat.spacing() / (2.0 * PI)).powi(2);
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c *= scale * lat.multiplicity(i);
    }
    let u = plan.type2(&coeffs, targets)?;
    Ok(NearEvaluation {
        values: u.iter().map(|z| z.re).collect(),
        imag_residual: u.iter().fold(0.0, |m, z| m.max(z.im.abs())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_with_breaks;
    use crate::params::derive_params;

    fn setup() -> (DerivedParams, BlendingWindow) {
        let dp = derive_params(1e-12, 24, 1.0, 1.0, 40.0, 8.0, 8).unwrap();
        let win = BlendingWindow::from_tolerance(dp.delta, dp.eps).unwrap();
        (dp, win)
    }

    #[test]
    fn zero_drive_keeps_zero_state() {
        let (dp, win) = setup();
        let mut st = NearHistoryState::new(&dp, &win, vec![0.0, 3.0], vec![0, 1, 1]).unwrap();
        let w = st.weights().clone();
        let now = SpectralSourceHistory::new(3, w.now_levels(), 0, dp.dt);
        let del = SpectralSourceHistory::new(3, w.delayed_levels(), st.delayed_level() + JUMP_HALF as i64, dp.dt);
        st.step_alpha(&now, &del).unwrap();
        assert!(st.alpha().iter().all(|a| a.norm() == 0.0));
        // Missing slices are a state error.
        let short = SpectralSourceHistory::new(3, 2, 0, dp.dt);
        assert!(st.step_alpha(&short, &del).is_err());
    }

    #[test]
    fn origin_weights_are_finite() {
        let (dp, win) = setup();
        let w = precompute_drive_weights(&dp, &win, &[0.0]);
        assert!(w.p.iter().chain(&w.q).chain(&w.p_delayed).all(|v| v.is_finite()));
    }

    // Constant S: the drive weights reproduce h by adaptive quadrature of the
    // defining double integral, window-edge point masses included. The residual is
    // the trapezoid error at the O(ε) edge discontinuities, so only a tight ε is checked.
    #[test]
    fn weights_reproduce_h_for_constant_source() {
        for eps in [1e-12] {
            let dp = derive_params(eps, 24, 1.0, 1.0, 40.0, 8.0, 8).unwrap();
            let win = BlendingWindow::from_tolerance(dp.delta, dp.eps).unwrap();
            for kappa in [0.0, 0.92, 5.0, 50.0] {
                let w = precompute_drive_weights(&dp, &win, &[kappa]);
                let (h, g) = constant_drive(&dp, &win, kappa);
                let h_w: f64 = w.p.iter().sum::<f64>() - w.p_delayed.iter().sum::<f64>();
                let g_w: f64 = w.q.iter().sum::<f64>() - w.q_delayed.iter().sum::<f64>();
                // Current and delayed drives cancel at κ = 0; measure against their size.
                let mag = |a: &[f64], b: &[f64]| a.iter().chain(b).map(|v| v.abs()).sum::<f64>();
                let (sh, sg) = (mag(&w.p, &w.p_delayed), mag(&w.q, &w.q_delayed));
                assert!((h_w - h).abs() < 1e-10 * sh, "ε={eps} κ={kappa}: {h_w} vs {h} (scale {sh})");
                assert!((g_w - g).abs() < 1e-10 * sg, "ε={eps} κ={kappa}: {g_w} vs {g} (scale {sg})");
            }
        }
    }

    fn constant_drive(dp: &DerivedParams, win: &BlendingWindow, kappa: f64) -> (f64, f64) {
        let shift = dp.a_plus - dp.delta;
        let smooth = integrate_with_breaks(
            |d| psi(kappa, d, 0.0, win.bump(d), win.bump_derivative(d))
                - psi(kappa, d, shift, win.bump(d), win.bump_derivative(d)),
            &[0.0, dp.delta],
            1e-15,
            1e-14,
        )
        .value;
        let edges = win.bump(0.0)
            * (-sinc_kernel(kappa, dp.delta) - sinc_kernel(kappa, shift) + sinc_kernel(kappa, dp.a_plus));
        let f = smooth + edges;
        let h = f * integrate_with_breaks(|s| sinc_kernel(kappa, s), &[0.0, dp.dt], 1e-18, 1e-14).value;
        let g = f * integrate_with_breaks(|s| (kappa * s).cos(), &[0.0, dp.dt], 1e-18, 1e-14).value;
        (h, g)
    }
}
