//! Kaiser–Bessel blending windows.
//!
//! `bump` is the window derivative φ'(t) supported on [0, width], `cumulative`
//! its integral φ(t) rising from 0 to 1.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{bessel_i0_scaled, i1_scaled_over_x, standard_rule, StandardRule};

const CUMULATIVE_NODES: usize = 64;

#[derive(Debug, Clone)]
pub struct BlendingWindow {
    width: f64,
    shape: f64,
    // b / (width sinh b) written as (b / width) * 2 e^{-b} / (1 - e^{-2b}) times e^{b}
    // so that the peak value stays finite for large b.
    scale: f64,
    cumulative_rule: Arc<StandardRule>,
}

impl BlendingWindow {
    pub fn new(width: f64, shape: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidInput(format!("window width {width} must be positive")));
        }
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::InvalidInput(format!("window shape {shape} must be positive")));
        }
        let scale = shape / width * 2.0 / (1.0 - (-2.0 * shape).exp());
        Ok(Self {
            width,
            shape,
            scale,
            cumulative_rule: standard_rule(CUMULATIVE_NODES),
        })
    }

    /// Window with shape b = ln(1/eps).
    pub fn from_tolerance(width: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidInput(format!("tolerance {eps} must lie in (0, 1)")));
        }
        Self::new(width, (1.0 / eps).ln())
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// φ'(t) = b / (width sinh b) · I0(b √(1 − (2t/width − 1)²)) on [0, width].
    pub fn bump(&self, t: f64) -> f64 {
        if !(0.0..=self.width).contains(&t) {
            return 0.0;
        }
        let u = 2.0 * t / self.width - 1.0;
        let z = (1.0 - u * u).max(0.0).sqrt();
        let bz = self.shape * z;
        self.scale * bessel_i0_scaled(bz) * (bz - self.shape).exp()
    }

    /// φ''(t), using I0' = I1 and the finite limit I1(y)/y → 1/2 at the endpoints.
    pub fn bump_derivative(&self, t: f64) -> f64 {
        if !(0.0..=self.width).contains(&t) {
            return 0.0;
        }
        let b = self.shape;
        let u = 2.0 * t / self.width - 1.0;
        let z = (1.0 - u * u).max(0.0).sqrt();
        let bz = b * z;
        -self.scale * (2.0 * b * b / self.width) * u * i1_scaled_over_x(bz) * (bz - b).exp()
    }

    /// φ(t) = ∫₀ᵗ φ'(s) ds.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.width {
            return 1.0;
        }
        if t > 0.5 * self.width {
            // The bump is symmetric about its midpoint.
            return 1.0 - self.cumulative(self.width - t);
        }
        self.cumulative_rule.integrate(0.0, t, |s| self.bump(s))
    }

    /// 1 − φ(t), evaluated without cancellation near t = 0.
    pub fn complement(&self, t: f64) -> f64 {
        if t >= 0.5 * self.width {
            self.cumulative(self.width - t)
        } else {
            1.0 - self.cumulative(t)
        }
    }

    /// ∫ φ'(t) e^{iωt} dt = e^{i·width·ω/2} (b / sinh b) sinc √((width·ω/2)² − b²).
    pub fn bump_fourier(&self, omega: f64) -> Complex64 {
        let b = self.shape;
        let x = 0.5 * self.width * omega;
        let w = x * x - b * b;
        // (b / sinh b) · sinc √w, arranged to avoid overflow of sinh.
        let amp = if w.abs() < 1e-6 {
            let series = 1.0 - w / 6.0 + w * w / 120.0 - w * w * w / 5040.0;
            series * 2.0 * b * (-b).exp() / (1.0 - (-2.0 * b).exp())
        } else if w < 0.0 {
            let s = (-w).sqrt();
            (b / s) * (s - b).exp() * (1.0 - (-2.0 * s).exp()) / (1.0 - (-2.0 * b).exp())
        } else {
            let s = w.sqrt();
            2.0 * b * (-b).exp() / (1.0 - (-2.0 * b).exp()) * s.sin() / s
        };
        Complex64::from_polar(amp, x)
    }

    /// Frequency beyond which |bump_fourier| obeys the bandlimit bound with factor θ.
    pub fn bandlimit(&self, theta: f64) -> f64 {
        2.0 * self.shape / (self.width * (1.0 - 1.0 / (theta * theta)).sqrt())
    }
}

/// Sum of the local, near and far time windows at delay `tau` (identically 1).
pub fn partition_of_unity(window: &BlendingWindow, a_plus: f64, tau: f64) -> f64 {
    let local = 1.0 - window.cumulative(tau);
    let near = window.cumulative(tau) * window.cumulative(a_plus - tau);
    let far = 1.0 - window.cumulative(a_plus - tau);
    local + near + far
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_adaptive;

    fn window() -> BlendingWindow {
        BlendingWindow::from_tolerance(1.0, 1e-8).unwrap()
    }

    #[test]
    fn bump_support_and_midpoint() {
        let w = window();
        let b = w.shape();
        assert_eq!(w.bump(-0.1), 0.0);
        assert_eq!(w.bump(1.1), 0.0);
        let mid = b * bessel_i0_scaled(b) * b.exp() / b.sinh();
        assert!((w.bump(0.5) - mid).abs() < 1e-13 * mid);
        // mpmath: b I0(b) / sinh b at b = ln 1e8
        assert!((w.bump(0.5) - 3.44845773050905).abs() < 1e-13);
    }

    #[test]
    fn endpoint_jump_is_small() {
        let w = window();
        // jump / peak = 1 / I0(b) ~ sqrt(2 pi b) e^{-b}
        let b = w.shape();
        let ratio = w.bump(0.0) / w.bump(0.5);
        assert!(ratio <= (2.0 * std::f64::consts::PI * b).sqrt() * (-b).exp());
        assert!(w.bump(0.0) <= 2.0 * b * (-b).exp() / w.width() * 1.000001);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let w = window();
        let h = 1e-5;
        let fd = (w.bump(0.25 + h) - w.bump(0.25 - h)) / (2.0 * h);
        assert!(((w.bump_derivative(0.25) - fd) / fd).abs() < 1e-8);
        assert_eq!(w.bump_derivative(0.5).abs(), 0.0);
        let h = 1e-7;
        let fd0 = (w.bump(h) - w.bump(0.0)) / h;
        assert!(((w.bump_derivative(0.0) - fd0) / fd0).abs() < 1e-4);
    }

    #[test]
    fn cumulative_values() {
        let w = window();
        assert_eq!(w.cumulative(0.0), 0.0);
        assert_eq!(w.cumulative(1.0), 1.0);
        assert!((w.cumulative(0.5) - 0.5).abs() < 1e-15);
        assert!((w.cumulative(0.5 - 1e-9) - w.cumulative(0.5 + 1e-9)).abs() < 1e-8);
        let oracle = integrate_adaptive(|t| w.bump(t), 0.0, 0.4, 1e-15, 1e-15).value;
        assert!((w.cumulative(0.4) - oracle).abs() < 1e-12);
        // Normalization of the bump, not just the symmetric construction.
        let total = integrate_adaptive(|t| w.bump(t), 0.0, 1.0, 1e-15, 1e-15).value;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fourier_transform_matches_quadrature() {
        let w = window();
        assert!((w.bump_fourier(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let om = 3.7;
        let re = integrate_adaptive(|t| w.bump(t) * (om * t).cos(), 0.0, 1.0, 1e-15, 1e-15).value;
        let im = integrate_adaptive(|t| w.bump(t) * (om * t).sin(), 0.0, 1.0, 1e-15, 1e-15).value;
        assert!((w.bump_fourier(om) - Complex64::new(re, im)).norm() < 1e-10);
        // Continuity across the branch point width·ω/2 = b.
        let wb = 2.0 * w.shape() / w.width();
        let a = w.bump_fourier(wb * (1.0 - 1e-9)).norm();
        let c = w.bump_fourier(wb * (1.0 + 1e-9)).norm();
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn fourier_bandlimit_bound() {
        let w = window();
        let (b, eps, theta) = (w.shape(), (-w.shape()).exp(), 2.0);
        let lo = w.bandlimit(theta);
        for i in 0..400 {
            let om = lo * (1e4 * b / w.width() / lo).powf(i as f64 / 399.0);
            let bound = 4.0 * b * theta * eps / (w.width() * om);
            assert!(w.bump_fourier(om).norm() <= bound, "omega={om}");
        }
        let om = 4.0 * b / w.width();
        assert!(w.bump_fourier(om).norm() <= 4.0 * b * theta * eps / (w.width() * om));
    }
}
