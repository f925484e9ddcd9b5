/// Bessel function of the first kind, order zero.
#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

// Power series for x at or below this point, asymptotic expansion above.
const SERIES_SWITCH: f64 = 20.0;

/// e^{-x} I0(x) for x >= 0.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= SERIES_SWITCH {
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0, 1.0);
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        asymptotic(0.0, x)
    }
}

/// e^{-x} I1(x) for x >= 0.
pub fn bessel_i1_scaled(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= SERIES_SWITCH {
        0.5 * x * series_i1_over_half_x(x) * (-x).exp()
    } else {
        asymptotic(1.0, x)
    }
}

/// e^{-x} I1(x) / x, finite at x = 0 (limit 1/2).
pub fn i1_scaled_over_x(x: f64) -> f64 {
    if x <= SERIES_SWITCH {
        0.5 * series_i1_over_half_x(x) * (-x).exp()
    } else {
        asymptotic(1.0, x) / x
    }
}

// sum_k (x^2/4)^k / (k! (k+1)!)
fn series_i1_over_half_x(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + 1.0));
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
        k += 1.0;
    }
}

fn asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    let mut k = 1.0f64;
    loop {
        let next = -term * (mu - (2.0 * k - 1.0).powi(2)) / (8.0 * k * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_small_arguments() {
        assert_eq!(bessel_i0_scaled(0.0), 1.0);
        assert_eq!(bessel_i1_scaled(0.0), 0.0);
        assert!((bessel_i0_scaled(1.0) - 0.4657596075936404).abs() < 1e-15);
        assert!((i1_scaled_over_x(0.0) - 0.5).abs() < 1e-16);
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!((bessel_j0(10.0) + 0.2459357644513483).abs() < 1e-15);
        assert!(bessel_j0(2.404825557695773).abs() < 1e-13);
    }

    #[test]
    fn branch_switch_is_continuous() {
        let a = SERIES_SWITCH;
        let b = f64::from_bits(SERIES_SWITCH.to_bits() + 1);
        for f in [bessel_i0_scaled, bessel_i1_scaled] {
            assert!(((f(a) - f(b)) / f(a)).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_and_bounded() {
        let mut prev = 1.0;
        for i in 1..2000 {
            let v = bessel_i0_scaled(i as f64 * 0.07);
            assert!(v > 0.0 && v <= prev);
            prev = v;
        }
    }
}
