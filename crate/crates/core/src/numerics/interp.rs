/// First index of the `p`-point stencil nearest to grid position `x`,
/// clamped to `[lo, hi - p + 1]`.
pub fn stencil_start(x: f64, p: usize, lo: i64, hi: i64) -> i64 {
    let s = (x - (p as f64 - 1.0) / 2.0 + 0.5).floor() as i64;
    s.clamp(lo, hi - p as i64 + 1)
}

/// Lagrange weights for the nodes `start, start + 1, …, start + p - 1` at position `x`
/// (all in grid units).
pub fn lagrange_weights(x: f64, start: i64, p: usize, out: &mut [f64]) {
    debug_assert!(out.len() >= p);
    for i in 0..p {
        let xi = (start + i as i64) as f64;
        let mut w = 1.0;
        for j in 0..p {
            if j != i {
                let xj = (start + j as i64) as f64;
                w *= (x - xj) / (xi - xj);
            }
        }
        out[i] = w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials() {
        let mut w = [0.0; 6];
        let x = 3.37;
        let s = stencil_start(x, 6, 0, 100);
        assert_eq!(s, 1);
        lagrange_weights(x, s, 6, &mut w);
        let v: f64 = (0..6).map(|i| w[i] * ((s + i as i64) as f64).powi(5)).sum();
        assert!((v - x.powi(5)).abs() < 1e-11);
    }

    #[test]
    fn on_grid_is_exact() {
        let mut w = [0.0; 4];
        lagrange_weights(7.0, 6, 4, &mut w);
        assert_eq!(w, [0.0, 1.0, 0.0, 0.0]);
    }
}
