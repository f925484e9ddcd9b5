//! Far history: per-pole exponential recurrences on a coarse Fourier lattice.
//!
//! Coefficients are stored pre-multiplied by e^{Aλ_l}; every weight applied to
//! them carries e^{-λ_l(d - A)} with delay d > A, and the Hankel table carries
//! the matching e^{-Aλ_l}, so no intermediate overflows.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::blending::BlendingWindow;
use crate::error::{Error, Result};
use crate::numerics::{bessel_i0_scaled, bessel_j0, lagrange_weights, standard_rule, stencil_start};
use crate::nudft::WavevectorLattice;
use crate::params::DerivedParams;
use crate::soe::SoeApproximation;
use crate::sources::SpectralSourceHistory;

/// Shape parameter of the radial window φ_Δ.
pub const RADIAL_SHAPE: f64 = 30.0;
/// Gauss nodes per Hankel panel.
pub const HANKEL_NODES: usize = 16;
/// Gauss nodes per step for the β1 increment.
pub const BETA1_NODES: usize = 8;

/// β2 nodes over the width-δ transition window.
pub fn beta2_nodes(w: usize) -> usize {
    (1.6 * w as f64).ceil() as usize + 16
}

/// ℋ_l(κ) = q_l e^{-Aλ_l} ∫₀^A J0(κr) I0(λ_l r) φ_Δ(A − r) r dr over radius classes.
#[derive(Debug, Clone)]
pub struct HankelTable {
    big_delta: f64,
    a_radius: f64,
    k_far: f64,
    poles: usize,
    kappas: Vec<f64>,
    /// [class][pole]
    values: Vec<f64>,
}

impl HankelTable {
    pub fn big_delta(&self) -> f64 {
        self.big_delta
    }

    pub fn a_radius(&self) -> f64 {
        self.a_radius
    }

    pub fn k_far(&self) -> f64 {
        self.k_far
    }

    pub fn poles(&self) -> usize {
        self.poles
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.values[class * self.poles..(class + 1) * self.poles]
    }

    pub fn row_mut(&mut self, class: usize) -> &mut [f64] {
        &mut self.values[class * self.poles..(class + 1) * self.poles]
    }

    /// max_l |ℋ_l| for one class.
    pub fn max_abs(&self, class: usize) -> f64 {
        self.row(class).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// ℋ_l at radii `kappas`, by composite Gauss–Legendre with panels of length ≤ π/K_f.
///
/// `k_far` sets the panel length only; radii beyond it are still tabulated.
pub fn precompute_hankel(
    soe: &SoeApproximation,
    big_delta: f64,
    a_radius: f64,
    k_far: f64,
    kappas: &[f64],
) -> Result<HankelTable> {
    precompute_hankel_with(soe, big_delta, a_radius, k_far, kappas, HANKEL_NODES)
}

pub fn precompute_hankel_with(
    soe: &SoeApproximation,
    big_delta: f64,
    a_radius: f64,
    k_far: f64,
    kappas: &[f64],
    nodes_per_panel: usize,
) -> Result<HankelTable> {
    if !(big_delta > 0.0) || !(a_radius > big_delta) {
        return Err(Error::InvalidInput(format!(
            "radial window Δ = {big_delta} must be positive and below A = {a_radius}"
        )));
    }
    let window = BlendingWindow::new(big_delta, RADIAL_SHAPE)?;
    let k_panel = k_far.max(kappas.iter().cloned().fold(0.0, f64::max)).max(1.0);
    let panels = (a_radius * k_panel / std::f64::consts::PI).ceil().max(1.0) as usize;
    let h = a_radius / panels as f64;
    let rule = standard_rule(nodes_per_panel);
    let mut r = Vec::with_capacity(panels * nodes_per_panel);
    let mut wr = Vec::with_capacity(panels * nodes_per_panel);
    for k in 0..panels {
        for (x, w) in rule.mapped(k as f64 * h, (k + 1) as f64 * h) {
            r.push(x);
            wr.push(w * x * window.cumulative(a_radius - x));
        }
    }
    // Per pole: radial weights q_l e^{-λ(A-r)} [e^{-λr} I0(λr)] r φ_Δ w, trimmed to the
    // range where they are not negligible.
    let poles = soe.nodes.len();
    let radial: Vec<(usize, Vec<f64>)> = soe
        .nodes
        .par_iter()
        .zip(&soe.weights)
        .map(|(&lam, &q)| {
            let full: Vec<f64> = r
                .iter()
                .zip(&wr)
                .map(|(&x, &w)| q * w * bessel_i0_scaled(lam * x) * (-lam * (a_radius - x)).exp())
                .collect();
            let peak = full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let first = full
                .iter()
                .position(|v| v.abs() > peak * 1e-30)
                .unwrap_or(full.len());
            (first, full[first..].to_vec())
        })
        .collect();
    let mut values = vec![0.0; kappas.len() * poles];
    values
        .par_chunks_mut(poles)
        .zip(kappas.par_iter())
        .for_each(|(row, &kappa)| {
            let j0: Vec<f64> = r.iter().map(|&x| bessel_j0(kappa * x)).collect();
            for (l, (first, wts)) in radial.iter().enumerate() {
                row[l] = wts.iter().zip(&j0[*first..]).map(|(a, b)| a * b).sum();
            }
        });
    Ok(HankelTable {
        big_delta,
        a_radius,
        k_far,
        poles,
        kappas: kappas.to_vec(),
        values,
    })
}

/// Hankel table on the radius classes of a far lattice.
pub fn hankel_for_lattice(
    soe: &SoeApproximation,
    dp: &DerivedParams,
    lattice: &WavevectorLattice,
) -> Result<(HankelTable, Vec<u32>)> {
    let (kappas, class_of) = lattice.radius_classes();
    let table = precompute_hankel(soe, dp.big_delta, dp.a_radius, dp.k_far, &kappas)?;
    Ok((table, class_of))
}

/// max_l |ℋ_l(K_f)| for the default pole set.
pub fn decay_report(big_delta: f64, k_far: f64) -> Result<f64> {
    let soe = SoeApproximation::default_build();
    let a = 2.0 * std::f64::consts::SQRT_2 + big_delta;
    let t = precompute_hankel(&soe, big_delta, a, k_far, &[k_far])?;
    Ok(t.max_abs(0))
}

/// β̃_l = e^{Aλ_l} β_l on the far lattice, advanced one step at a time.
///
/// At step n the bulk part β̃1 covers τ ∈ [0, (n − J)Δt] with J = ⌈A⁺/Δt⌉; the rest of
/// the far window, [(n − J)Δt, t_n − A⁺ + δ], is integrated afresh by [`Self::beta2`].
#[derive(Debug, Clone)]
pub struct FarHistoryState {
    lambdas: Vec<f64>,
    decay: Vec<f64>,
    p: usize,
    modes: usize,
    step: i64,
    far_delay: i64,
    /// β1 stencil start relative to n − J, and weights [pole][p].
    beta1_start: i64,
    beta1_weights: Vec<f64>,
    /// β2 level range relative to n, and weights [pole][level].
    beta2_start: i64,
    beta2_levels: usize,
    beta2_weights: Vec<f64>,
    /// [mode][pole]
    beta1: Vec<Complex64>,
}

const CHUNK: usize = 64;

impl FarHistoryState {
    /// State for `modes` far modes and poles `lambdas`; `window` is the temporal window (width δ).
    pub fn new(
        dp: &DerivedParams,
        window: &BlendingWindow,
        lambdas: &[f64],
        modes: usize,
    ) -> Result<Self> {
        if (window.width() - dp.delta).abs() > 1e-12 * dp.delta {
            return Err(Error::InvalidInput(format!(
                "far window width {} differs from δ = {}",
                window.width(),
                dp.delta
            )));
        }
        let dt = dp.dt;
        let p = dp.p;
        let big_j = dp.far_delay_steps() as i64;
        let a = dp.a_radius;
        let np = lambdas.len();
        let mut lw = vec![0.0; p];

        let beta1_start = stencil_start(0.5, p, i64::MIN / 2, i64::MAX / 2);
        let mut beta1_weights = vec![0.0; np * p];
        for (th, wg) in standard_rule(BETA1_NODES).mapped(0.0, 1.0) {
            lagrange_weights(th, beta1_start, p, &mut lw);
            // delay from τ to t_{n+1}
            let d = (big_j as f64 + 1.0 - th) * dt;
            for (l, &lam) in lambdas.iter().enumerate() {
                let e = wg * dt * (-lam * (d - a)).exp();
                for i in 0..p {
                    beta1_weights[l * p + i] += e * lw[i];
                }
            }
        }

        // β2 nodes in grid units relative to n: plain piece [−J, −A⁺/Δt], window piece
        // [−A⁺/Δt, −(A⁺ − δ)/Δt].
        let x_a = -dp.a_plus / dt;
        let x_end = -(dp.a_plus - dp.delta) / dt;
        let mut nodes: Vec<(f64, f64)> = Vec::new();
        if x_a > -(big_j as f64) {
            nodes.extend(standard_rule(BETA1_NODES).mapped(-(big_j as f64), x_a));
        }
        for (x, w) in standard_rule(beta2_nodes(dp.w)).mapped(x_a, x_end) {
            nodes.push((x, w * window.complement(x * dt + dp.a_plus)));
        }
        let starts: Vec<i64> = nodes
            .iter()
            .map(|&(x, _)| stencil_start(x, p, i64::MIN / 2, i64::MAX / 2))
            .collect();
        let beta2_start = *starts.iter().min().unwrap();
        let beta2_end = *starts.iter().max().unwrap() + p as i64 - 1;
        let beta2_levels = (beta2_end - beta2_start + 1) as usize;
        let mut beta2_weights = vec![0.0; np * beta2_levels];
        for (&(x, wg), &s) in nodes.iter().zip(&starts) {
            lagrange_weights(x, s, p, &mut lw);
            let d = -x * dt;
            for (l, &lam) in lambdas.iter().enumerate() {
                let e = wg * dt * (-lam * (d - a)).exp();
                let row = &mut beta2_weights[l * beta2_levels..];
                for i in 0..p {
                    row[(s - beta2_start) as usize + i] += e * lw[i];
                }
            }
        }

        Ok(Self {
            lambdas: lambdas.to_vec(),
            decay: lambdas.iter().map(|&l| (-l * dt).exp()).collect(),
            p,
            modes,
            step: 0,
            far_delay: big_j,
            beta1_start,
            beta1_weights,
            beta2_start,
            beta2_levels,
            beta2_weights,
            beta1: vec![Complex64::new(0.0, 0.0); modes * np],
        })
    }

    pub fn poles(&self) -> usize {
        self.lambdas.len()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    /// β̃1 laid out [mode][pole].
    pub fn beta1(&self) -> &[Complex64] {
        &self.beta1
    }

    /// Signature levels read at step n, as offsets (lo, hi) relative to n.
    pub fn level_span(&self) -> (i64, i64) {
        let b1 = -self.far_delay + self.beta1_start;
        let lo = b1.min(self.beta2_start);
        let hi = (b1 + self.p as i64 - 1).max(self.beta2_start + self.beta2_levels as i64 - 1);
        (lo, hi)
    }

    /// Ring capacity covering [`Self::level_span`].
    pub fn ring_capacity(&self) -> usize {
        let (lo, hi) = self.level_span();
        (hi - lo + 1) as usize
    }

    fn levels<'a>(
        &self,
        ring: &'a SpectralSourceHistory,
        start: i64,
        count: usize,
    ) -> Result<Vec<&'a [Complex64]>> {
        let out: Vec<&[Complex64]> = (0..count)
            .map(|i| ring.level(start + i as i64))
            .collect::<Result<_>>()?;
        if out.iter().any(|s| s.len() != self.modes) {
            return Err(Error::State("far slice length differs from the mode count".into()));
        }
        Ok(out)
    }

    /// Advance β̃1 from t_n to t_{n+1}.
    pub fn step_beta(&mut self, ring: &SpectralSourceHistory) -> Result<()> {
        let m = self.step - self.far_delay;
        let np = self.lambdas.len();
        // Before the range opens (m < 0) β1 stays zero, but the same work is done so
        // every step costs the same.
        let live = m >= 0;
        let p = self.p;
        let s = self.levels(ring, m + self.beta1_start, p)?;
        let (decay, wts) = (&self.decay, &self.beta1_weights);
        self.beta1
            .par_chunks_mut(np * CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                let mut sv = vec![Complex64::new(0.0, 0.0); p];
                for (j, beta) in block.chunks_mut(np).enumerate() {
                    let k = chunk * CHUNK + j;
                    for (i, v) in sv.iter_mut().enumerate() {
                        *v = s[i][k];
                    }
                    for l in 0..np {
                        let w = &wts[l * p..(l + 1) * p];
                        let mut inc = Complex64::new(0.0, 0.0);
                        for i in 0..p {
                            inc += sv[i] * w[i];
                        }
                        if live {
                            beta[l] = beta[l] * decay[l] + inc;
                        } else {
                            std::hint::black_box(inc);
                        }
                    }
                }
            });
        self.step += 1;
        Ok(())
    }

    /// β̃2 at t_n, laid out [mode][pole].
    pub fn beta2(&self, ring: &SpectralSourceHistory) -> Result<Vec<Complex64>> {
        let np = self.lambdas.len();
        let nl = self.beta2_levels;
        let s = self.levels(ring, self.step + self.beta2_start, nl)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.modes * np];
        out.par_chunks_mut(np).enumerate().for_each(|(k, row)| {
            let sv: Vec<Complex64> = s.iter().map(|lvl| lvl[k]).collect();
            for (l, o) in row.iter_mut().enumerate() {
                let w = &self.beta2_weights[l * nl..(l + 1) * nl];
                *o = sv.iter().zip(w).map(|(a, b)| a * b).sum();
            }
        });
        Ok(out)
    }

    /// α_F(k, t_n) = Σ_l ℋ_l(κ) (β̃1 + β̃2) on the far modes, with mode classes `class_of`.
    pub fn assemble_alpha_f(
        &self,
        table: &HankelTable,
        class_of: &[u32],
        ring: &SpectralSourceHistory,
    ) -> Result<Vec<Complex64>> {
        let np = self.lambdas.len();
        if table.poles() != np {
            return Err(Error::InvalidInput(format!(
                "Hankel table has {} poles, state has {np}",
                table.poles()
            )));
        }
        if class_of.len() != self.modes {
            return Err(Error::InvalidInput("class map length differs from the mode count".into()));
        }
        if class_of.iter().any(|&c| c as usize >= table.kappas().len()) {
            return Err(Error::InvalidInput("class index out of range".to_string()));
        }
        let b2 = self.beta2(ring)?;
        Ok((0..self.modes)
            .into_par_iter()
            .map(|k| {
                let h = table.row(class_of[k] as usize);
                let b1 = &self.beta1[k * np..(k + 1) * np];
                let b2 = &b2[k * np..(k + 1) * np];
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..np {
                    acc += (b1[l] + b2[l]) * h[l];
                }
                acc
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_adaptive;
    use crate::params::derive_params;

    #[test]
    fn zero_frequency_smallest_pole_matches_adaptive() {
        let soe = SoeApproximation::default_build();
        let a = 2.0 * std::f64::consts::SQRT_2 + 1.0;
        let t = precompute_hankel(&soe, 1.0, a, 80.0, &[0.0]).unwrap();
        let win = BlendingWindow::new(1.0, RADIAL_SHAPE).unwrap();
        let (lam, q) = (soe.nodes[0], soe.weights[0]);
        let exact = integrate_adaptive(
            |r| q * (-a * lam).exp() * crate::numerics::bessel_i0_scaled(lam * r) * (lam * r).exp()
                * win.cumulative(a - r) * r,
            0.0,
            a,
            1e-300,
            1e-14,
        )
        .value;
        assert!((t.row(0)[0] - exact).abs() <= 1e-12 * exact.abs(), "{} vs {exact}", t.row(0)[0]);
    }

    #[test]
    fn decay_rows() {
        let v80 = decay_report(1.0, 80.0).unwrap();
        let v55 = decay_report(1.0, 55.0).unwrap();
        assert!(v80 <= 1e-13, "{v80}");
        assert!((1e-14..=1e-11).contains(&v55), "{v55}");
    }

    #[test]
    fn hankel_rule_converged_by_doubling() {
        let soe = crate::soe::build_soe(36.0, 12, 16).unwrap();
        let a = 2.0 * std::f64::consts::SQRT_2 + 1.0;
        let ks = [0.0, 3.7, 20.0, 55.0];
        let t1 = precompute_hankel_with(&soe, 1.0, a, 55.0, &ks, 16).unwrap();
        let t2 = precompute_hankel_with(&soe, 1.0, a, 55.0, &ks, 32).unwrap();
        let scale = t2.max_abs(0);
        for c in 0..ks.len() {
            for (x, y) in t1.row(c).iter().zip(t2.row(c)) {
                assert!((x - y).abs() < 1e-15 * scale.max(1.0), "{x} vs {y}");
            }
        }
    }

    fn setup() -> DerivedParams {
        derive_params(1e-10, 20, 1.0, 1.0, 20.0, 8.0, 8).unwrap()
    }

    fn filled_ring(dp: &DerivedParams, st: &FarHistoryState, n: i64, s: impl Fn(f64) -> f64) -> SpectralSourceHistory {
        let (lo, hi) = st.level_span();
        let mut ring = SpectralSourceHistory::new(1, st.ring_capacity(), n + lo - 1, dp.dt);
        for lvl in n + lo..=n + hi {
            let t = lvl as f64 * dp.dt;
            ring.push(&[Complex64::new(s(t), 0.0)]);
        }
        ring
    }

    #[test]
    fn beta1_recurrence_matches_closed_form() {
        let dp = setup();
        let win = BlendingWindow::from_tolerance(dp.delta, dp.eps).unwrap();
        let lam = 2.0;
        let mut st = FarHistoryState::new(&dp, &win, &[lam], 1).unwrap();
        let src = |t: f64| (0.3 * t).exp();
        let big_j = dp.far_delay_steps() as i64;
        for n in 0..dp.n_steps as i64 {
            let ring = filled_ring(&dp, &st, n, src);
            st.step_beta(&ring).unwrap();
            let t = (n + 1) as f64 * dp.dt;
            let upper = (n + 1 - big_j) as f64 * dp.dt;
            let b = st.beta1()[0] * (-lam * dp.a_radius).exp();
            if upper <= 0.0 {
                assert_eq!(b.norm(), 0.0);
                continue;
            }
            // ∫₀^u e^{-λ(t-τ)} e^{0.3τ} dτ
            let exact = (-lam * t).exp() * (((lam + 0.3) * upper).exp() - 1.0) / (lam + 0.3);
            assert!((b.re - exact).abs() < 1e-10 * exact.abs().max(1e-3), "n={n}: {} vs {exact}", b.re);
        }
    }

    #[test]
    fn zero_source_decays_exactly() {
        let dp = setup();
        let win = BlendingWindow::from_tolerance(dp.delta, dp.eps).unwrap();
        let mut st = FarHistoryState::new(&dp, &win, &[0.5, 3.0], 1).unwrap();
        st.beta1 = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)];
        st.step = 1000;
        let ring = filled_ring(&dp, &st, 1000, |_| 0.0);
        st.step_beta(&ring).unwrap();
        assert_eq!(st.beta1()[0], Complex64::new(1.0, -2.0) * (-0.5 * dp.dt).exp());
        assert_eq!(st.beta1()[1], Complex64::new(0.5, 0.0) * (-3.0 * dp.dt).exp());
    }

    #[test]
    fn beta2_matches_adaptive_window_integral() {
        let dp = setup();
        let win = BlendingWindow::from_tolerance(dp.delta, dp.eps).unwrap();
        let lam = 1.3;
        let mut st = FarHistoryState::new(&dp, &win, &[lam], 1).unwrap();
        let src = |t: f64| (2.0 * t).sin() + 0.5;
        let n = 300;
        st.step = n;
        let ring = filled_ring(&dp, &st, n, src);
        let b2 = st.beta2(&ring).unwrap()[0] * (-lam * dp.a_radius).exp();
        let t = n as f64 * dp.dt;
        let lo = (n - dp.far_delay_steps() as i64) as f64 * dp.dt;
        let hi = t - dp.a_plus + dp.delta;
        let exact = integrate_adaptive(
            |tau| (-lam * (t - tau)).exp() * src(tau) * win.complement(tau - t + dp.a_plus),
            lo,
            hi,
            1e-16,
            1e-14,
        )
        .value;
        assert!((b2.re - exact).abs() < 1e-10 * exact.abs(), "{} vs {exact}", b2.re);
    }

    #[test]
    fn missing_levels_are_state_errors() {
        let dp = setup();
        let win = BlendingWindow::from_tolerance(dp.delta, dp.eps).unwrap();
        let mut st = FarHistoryState::new(&dp, &win, &[1.0], 1).unwrap();
        st.step = 500;
        let ring = SpectralSourceHistory::new(1, 3, 500, dp.dt);
        assert!(st.step_beta(&ring).is_err());
        assert!(st.beta2(&ring).is_err());
    }
}
