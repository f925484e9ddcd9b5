//! Non-uniform discrete Fourier transforms between scattered points and a
//! disk-truncated wavevector lattice.
//!
//! type 1: out_n = Σ_j s_j e^{+i nΔk·x_j}
//! type 2: out_j = Σ_n c_n e^{−i nΔk·x_j}

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::numerics::standard_rule;

#[derive(Debug, Clone)]
struct Row {
    n2: i32,
    first_n1: i32,
    start: usize,
    end: usize,
}

/// Lattice points nΔk with |n|Δk ≤ K_cut, ordered by row (n2) then n1.
///
/// A half lattice keeps one representative of each ±n pair (n2 > 0, or n2 = 0 and
/// n1 ≥ 0); it suffices for real fields, whose coefficients are Hermitian.
#[derive(Debug, Clone)]
pub struct WavevectorLattice {
    spacing: f64,
    k_cut: f64,
    half: bool,
    modes: Vec<[i32; 2]>,
    rows: Vec<Row>,
    n_max: i32,
}

impl WavevectorLattice {
    pub fn disk(spacing: f64, k_cut: f64) -> Result<Self> {
        Self::build(spacing, k_cut, false)
    }

    pub fn half_disk(spacing: f64, k_cut: f64) -> Result<Self> {
        Self::build(spacing, k_cut, true)
    }

    fn build(spacing: f64, k_cut: f64, half: bool) -> Result<Self> {
        if !(spacing > 0.0) || !(k_cut >= 0.0) || !k_cut.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lattice needs spacing > 0 and K_cut ≥ 0 (got {spacing}, {k_cut})"
            )));
        }
        let n_max = (k_cut / spacing * (1.0 + 1e-14)).floor() as i32;
        let r2 = (k_cut / spacing).powi(2) * (1.0 + 1e-12);
        let mut modes = Vec::new();
        let mut rows = Vec::new();
        let lo2 = if half { 0 } else { -n_max };
        for n2 in lo2..=n_max {
            let m = ((r2 - (n2 as f64).powi(2)).max(0.0).sqrt()).floor() as i32;
            if (n2 as f64).powi(2) > r2 {
                continue;
            }
            let first = if half && n2 == 0 { 0 } else { -m };
            let start = modes.len();
            for n1 in first..=m {
                modes.push([n1, n2]);
            }
            rows.push(Row {
                n2,
                first_n1: first,
                start,
                end: modes.len(),
            });
        }
        Ok(Self {
            spacing,
            k_cut,
            half,
            modes,
            rows,
            n_max,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn k_cut(&self) -> f64 {
        self.k_cut
    }

    pub fn is_half(&self) -> bool {
        self.half
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[[i32; 2]] {
        &self.modes
    }

    pub fn n_max(&self) -> i32 {
        self.n_max
    }

    pub fn wavevector(&self, i: usize) -> [f64; 2] {
        let [a, b] = self.modes[i];
        [a as f64 * self.spacing, b as f64 * self.spacing]
    }

    pub fn kappa(&self, i: usize) -> f64 {
        let [a, b] = self.modes[i];
        (((a as i64).pow(2) + (b as i64).pow(2)) as f64).sqrt() * self.spacing
    }

    /// Number of full-lattice modes represented by entry `i` (2 for a half-lattice
    /// entry paired with its mirror image, otherwise 1).
    pub fn multiplicity(&self, i: usize) -> f64 {
        if self.half && self.modes[i] != [0, 0] {
            2.0
        } else {
            1.0
        }
    }

    pub fn position(&self, n: [i32; 2]) -> Option<usize> {
        let r = self
            .rows
            .binary_search_by_key(&n[1], |r| r.n2)
            .ok()
            .map(|k| &self.rows[k])?;
        let off = n[0] - r.first_n1;
        (off >= 0 && r.start + (off as usize) < r.end).then(|| r.start + off as usize)
    }

    /// Distinct |n|² values: (κ per class, class index per mode).
    pub fn radius_classes(&self) -> (Vec<f64>, Vec<u32>) {
        let mut map: HashMap<i64, u32> = HashMap::new();
        let mut keys: Vec<i64> = self
            .modes
            .iter()
            .map(|&[a, b]| (a as i64).pow(2) + (b as i64).pow(2))
            .collect();
        let class_of_key = keys.clone();
        keys.sort_unstable();
        keys.dedup();
        for (c, &k) in keys.iter().enumerate() {
            map.insert(k, c as u32);
        }
        let kappas = keys.iter().map(|&k| (k as f64).sqrt() * self.spacing).collect();
        let class_of = class_of_key.iter().map(|k| map[k]).collect();
        (kappas, class_of)
    }

    /// For each mode of `sub`, its index in `self`. Fails unless `sub` is a sublattice
    /// with the same spacing and symmetry.
    pub fn embedding(&self, sub: &WavevectorLattice) -> Result<Vec<usize>> {
        if sub.spacing != self.spacing || sub.half != self.half {
            return Err(Error::InvalidInput(
                "sublattice must share spacing and symmetry".to_string(),
            ));
        }
        sub.modes
            .iter()
            .map(|&n| {
                self.position(n).ok_or_else(|| {
                    Error::InvalidInput(format!("mode {n:?} missing from the parent lattice"))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auto,
    Direct,
    Fast,
}

/// Reusable transform setup for one lattice and tolerance.
pub struct NudftPlan {
    lattice: Arc<WavevectorLattice>,
    tol: f64,
    method: Method,
    nf: usize,
    width: usize,
    beta: f64,
    // 1D deconvolution factors indexed by n + n_max
    correction: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for NudftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NudftPlan")
            .field("modes", &self.lattice.len())
            .field("tol", &self.tol)
            .field("method", &self.method)
            .field("nf", &self.nf)
            .field("width", &self.width)
            .finish()
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-14..=1e-2).contains(&tol) {
        return Err(Error::InvalidInput(format!("transform tolerance {tol} outside [1e-14, 1e-2]")));
    }
    Ok(())
}

fn smooth_size(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 && m.is_multiple_of(2) {
            return m;
        }
        m += 1;
    }
}

impl NudftPlan {
    pub fn new(lattice: Arc<WavevectorLattice>, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        let width = ((1.0 / tol).log10().ceil() as usize + 1).clamp(2, 16);
        let beta = 2.30 * width as f64;
        let ms = 2 * lattice.n_max() as usize + 1;
        let nf = smooth_size((2 * ms).max(2 * width));
        let h = 2.0 * PI / nf as f64;
        let rule = standard_rule(4 * width + 40);
        let half_w = width as f64 / 2.0;
        let correction = (-lattice.n_max()..=lattice.n_max())
            .map(|n| {
                let a = n as f64 * h * half_w;
                half_w * rule.integrate(-1.0, 1.0, |z| es_kernel(z, beta) * (a * z).cos())
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            fwd: planner.plan_fft_forward(nf),
            inv: planner.plan_fft_inverse(nf),
            lattice,
            tol,
            method: Method::Auto,
            nf,
            width,
            beta,
            correction,
        })
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn lattice(&self) -> &WavevectorLattice {
        &self.lattice
    }

    fn use_direct(&self, points: usize) -> bool {
        match self.method {
            Method::Direct => true,
            Method::Fast => false,
            Method::Auto => {
                let direct = (points * self.lattice.len()) as f64;
                if direct < 1e4 {
                    return true;
                }
                let n2 = (self.nf * self.nf) as f64;
                let fast = 3.0 * n2 * n2.log2() + 4.0 * (points * self.width * self.width) as f64
                    + 2.0 * self.lattice.len() as f64;
                direct < fast
            }
        }
    }

    pub fn type1(&self, points: &[[f64; 2]], strengths: &[Complex64]) -> Result<Vec<Complex64>> {
        check_points(points)?;
        if points.len() != strengths.len() {
            return Err(Error::InvalidInput("points and strengths differ in length".to_string()));
        }
        if points.is_empty() {
            return Ok(vec![Complex64::new(0.0, 0.0); self.lattice.len()]);
        }
        if self.use_direct(points.len()) {
            Ok(type1_direct(&self.lattice, points, strengths))
        } else {
            Ok(self.type1_fast(points, strengths))
        }
    }

    pub fn type2(&self, coeffs: &[Complex64], targets: &[[f64; 2]]) -> Result<Vec<Complex64>> {
        check_points(targets)?;
        if coeffs.len() != self.lattice.len() {
            return Err(Error::InvalidInput(format!(
                "coefficient array has {} entries, lattice has {}",
                coeffs.len(),
                self.lattice.len()
            )));
        }
        if targets.is_empty() {
            return Ok(Vec::new());
        }
        if self.use_direct(targets.len()) {
            Ok(type2_direct(&self.lattice, coeffs, targets))
        } else {
            Ok(self.type2_fast(coeffs, targets))
        }
    }

    // Kernel weights along one axis for a point at angle θ.
    fn axis_weights(&self, theta: f64, out: &mut [f64]) -> i64 {
        let h = 2.0 * PI / self.nf as f64;
        let g = theta.rem_euclid(2.0 * PI) / h;
        let half_w = self.width as f64 / 2.0;
        let l0 = (g - half_w).ceil() as i64;
        for (k, o) in out.iter_mut().enumerate() {
            *o = es_kernel(((l0 + k as i64) as f64 - g) / half_w, self.beta);
        }
        l0
    }

    fn fft2(&self, grid: &mut [Complex64], forward: bool) {
        let fft = if forward { &self.fwd } else { &self.inv };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(grid, &mut scratch);
        transpose(grid, self.nf);
        fft.process_with_scratch(grid, &mut scratch);
    }

    fn type1_fast(&self, points: &[[f64; 2]], strengths: &[Complex64]) -> Vec<Complex64> {
        let nf = self.nf;
        let w = self.width;
        let dk = self.lattice.spacing();
        let mut grid = vec![Complex64::new(0.0, 0.0); nf * nf];
        let (mut w1, mut w2) = (vec![0.0; w], vec![0.0; w]);
        for (x, &s) in points.iter().zip(strengths) {
            let l1 = self.axis_weights(dk * x[0], &mut w1);
            let l2 = self.axis_weights(dk * x[1], &mut w2);
            for (b, &v2) in w2.iter().enumerate() {
                let row = (l2 + b as i64).rem_euclid(nf as i64) as usize * nf;
                let sv = s * v2;
                for (a, &v1) in w1.iter().enumerate() {
                    let col = (l1 + a as i64).rem_euclid(nf as i64) as usize;
                    grid[row + col] += sv * v1;
                }
            }
        }
        // [l2][l1] -> [n1][n2]
        self.fft2(&mut grid, false);
        let nm = self.lattice.n_max();
        self.lattice
            .modes()
            .iter()
            .map(|&[n1, n2]| {
                let i1 = n1.rem_euclid(nf as i32) as usize;
                let i2 = n2.rem_euclid(nf as i32) as usize;
                grid[i1 * nf + i2]
                    / (self.correction[(n1 + nm) as usize] * self.correction[(n2 + nm) as usize])
            })
            .collect()
    }

    fn type2_fast(&self, coeffs: &[Complex64], targets: &[[f64; 2]]) -> Vec<Complex64> {
        let nf = self.nf;
        let w = self.width;
        let dk = self.lattice.spacing();
        let nm = self.lattice.n_max();
        let mut grid = vec![Complex64::new(0.0, 0.0); nf * nf];
        for (&[n1, n2], &c) in self.lattice.modes().iter().zip(coeffs) {
            let i1 = n1.rem_euclid(nf as i32) as usize;
            let i2 = n2.rem_euclid(nf as i32) as usize;
            grid[i1 * nf + i2] +=
                c / (self.correction[(n1 + nm) as usize] * self.correction[(n2 + nm) as usize]);
        }
        // [n1][n2] -> [l2][l1]
        self.fft2(&mut grid, true);
        targets
            .par_iter()
            .map(|x| {
                let (mut w1, mut w2) = (vec![0.0; w], vec![0.0; w]);
                let l1 = self.axis_weights(dk * x[0], &mut w1);
                let l2 = self.axis_weights(dk * x[1], &mut w2);
                let mut acc = Complex64::new(0.0, 0.0);
                for (b, &v2) in w2.iter().enumerate() {
                    let row = (l2 + b as i64).rem_euclid(nf as i64) as usize * nf;
                    let mut r = Complex64::new(0.0, 0.0);
                    for (a, &v1) in w1.iter().enumerate() {
                        let col = (l1 + a as i64).rem_euclid(nf as i64) as usize;
                        r += grid[row + col] * v1;
                    }
                    acc += r * v2;
                }
                acc
            })
            .collect()
    }
}

fn check_points(points: &[[f64; 2]]) -> Result<()> {
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidInput("non-finite point coordinates".to_string()));
    }
    Ok(())
}

#[inline]
fn es_kernel(z: f64, beta: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (beta * ((1.0 - z * z).sqrt() - 1.0)).exp()
    }
}

fn transpose(a: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            a.swap(i * n + j, j * n + i);
        }
    }
}

// e^{i n θ} for n = −n_max..=n_max.
fn phases(theta: f64, n_max: i32, out: &mut [Complex64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let (s, c) = ((k as i32 - n_max) as f64 * theta).sin_cos();
        *o = Complex64::new(c, s);
    }
}

fn type1_direct(
    lat: &WavevectorLattice,
    points: &[[f64; 2]],
    strengths: &[Complex64],
) -> Vec<Complex64> {
    let nm = lat.n_max();
    let ms = 2 * nm as usize + 1;
    let dk = lat.spacing();
    let mut out = vec![Complex64::new(0.0, 0.0); lat.len()];
    let (mut e1, mut e2) = (vec![Complex64::default(); ms], vec![Complex64::default(); ms]);
    for (x, &s) in points.iter().zip(strengths) {
        phases(dk * x[0], nm, &mut e1);
        phases(dk * x[1], nm, &mut e2);
        for row in &lat.rows {
            let c = s * e2[(row.n2 + nm) as usize];
            let base = (row.first_n1 + nm) as usize;
            for (o, e) in out[row.start..row.end].iter_mut().zip(&e1[base..]) {
                *o += c * e;
            }
        }
    }
    out
}

fn type2_direct(
    lat: &WavevectorLattice,
    coeffs: &[Complex64],
    targets: &[[f64; 2]],
) -> Vec<Complex64> {
    let nm = lat.n_max();
    let ms = 2 * nm as usize + 1;
    let dk = lat.spacing();
    targets
        .par_iter()
        .map(|x| {
            let (mut e1, mut e2) = (vec![Complex64::default(); ms], vec![Complex64::default(); ms]);
            phases(-dk * x[0], nm, &mut e1);
            phases(-dk * x[1], nm, &mut e2);
            let mut acc = Complex64::new(0.0, 0.0);
            for row in &lat.rows {
                let base = (row.first_n1 + nm) as usize;
                let r: Complex64 = coeffs[row.start..row.end]
                    .iter()
                    .zip(&e1[base..])
                    .map(|(c, e)| c * e)
                    .sum();
                acc += r * e2[(row.n2 + nm) as usize];
            }
            acc
        })
        .collect()
}

/// One-shot type-1 transform.
pub fn type1(
    points: &[[f64; 2]],
    strengths: &[Complex64],
    lattice: &WavevectorLattice,
    tol: f64,
) -> Result<Vec<Complex64>> {
    NudftPlan::new(Arc::new(lattice.clone()), tol)?.type1(points, strengths)
}

/// One-shot type-2 transform.
pub fn type2(
    coeffs: &[Complex64],
    lattice: &WavevectorLattice,
    targets: &[[f64; 2]],
    tol: f64,
) -> Result<Vec<Complex64>> {
    NudftPlan::new(Arc::new(lattice.clone()), tol)?.type2(coeffs, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect()
    }

    fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn lattice_shape() {
        let lat = WavevectorLattice::disk(0.92, 5.0).unwrap();
        assert!(lat.modes().iter().all(|&n| lat.position([-n[0], -n[1]]).is_some()));
        assert!((0..lat.len()).all(|i| lat.kappa(i) <= 5.0));
        let half = WavevectorLattice::half_disk(0.92, 5.0).unwrap();
        assert_eq!(2 * half.len() - 1, lat.len());
        let m: f64 = (0..half.len()).map(|i| half.multiplicity(i)).sum();
        assert_eq!(m as usize, lat.len());
        for (i, &n) in lat.modes().iter().enumerate() {
            assert_eq!(lat.position(n), Some(i));
        }
        let sub = WavevectorLattice::disk(0.92, 2.0).unwrap();
        let emb = lat.embedding(&sub).unwrap();
        assert!(emb.iter().zip(sub.modes()).all(|(&i, &n)| lat.modes()[i] == n));
    }

    #[test]
    fn trivial_transforms() {
        let lat = WavevectorLattice::disk(0.9, 6.0).unwrap();
        let out = type1(&[[0.0, 0.0]], &[Complex64::new(1.0, 0.0)], &lat, 1e-12).unwrap();
        assert!(out.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-14));
        let y = [0.3, -0.7];
        let out = type1(&[y, [-y[0], -y[1]]], &[Complex64::new(1.0, 0.0); 2], &lat, 1e-12).unwrap();
        for (i, v) in out.iter().enumerate() {
            let k = lat.wavevector(i);
            assert!((v - Complex64::new(2.0 * (k[0] * y[0] + k[1] * y[1]).cos(), 0.0)).norm() < 1e-13);
        }
        let mut c = vec![Complex64::default(); lat.len()];
        c[lat.position([0, 0]).unwrap()] = Complex64::new(1.0, 0.0);
        let u = type2(&c, &lat, &random_points(7, 1), 1e-12).unwrap();
        assert!(u.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-14));
        let empty = type1(&[], &[], &lat, 1e-12).unwrap();
        assert!(empty.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn fast_matches_direct() {
        for (tol, modes_cut, npts) in [(1e-12, 0.92 * 5.0, 100), (1e-9, 0.92 * 32.0, 500), (1e-6, 20.0, 300)] {
            let lat = Arc::new(WavevectorLattice::disk(0.92, modes_cut).unwrap());
            let pts = random_points(npts, 3);
            let s = random_complex(npts, 4);
            let fast = NudftPlan::new(lat.clone(), tol).unwrap().with_method(Method::Fast);
            let direct = NudftPlan::new(lat.clone(), tol).unwrap().with_method(Method::Direct);
            let a = fast.type1(&pts, &s).unwrap();
            let b = direct.type1(&pts, &s).unwrap();
            assert!(rel_l2(&a, &b) <= tol, "type1 tol={tol}: {}", rel_l2(&a, &b));
            let c = random_complex(lat.len(), 5);
            let a = fast.type2(&c, &pts).unwrap();
            let b = direct.type2(&c, &pts).unwrap();
            assert!(rel_l2(&a, &b) <= tol, "type2 tol={tol}: {}", rel_l2(&a, &b));
        }
    }

    #[test]
    fn adjoint_identity() {
        let lat = Arc::new(WavevectorLattice::disk(0.92, 30.0).unwrap());
        let pts = random_points(200, 8);
        let s = random_complex(200, 9);
        let c = random_complex(lat.len(), 10);
        for m in [Method::Direct, Method::Fast] {
            let plan = NudftPlan::new(lat.clone(), 1e-12).unwrap().with_method(m);
            let f = plan.type1(&pts, &s).unwrap();
            let g = plan.type2(&c, &pts).unwrap();
            let lhs: Complex64 = f.iter().zip(&c).map(|(a, b)| a * b.conj()).sum();
            let rhs: Complex64 = s.iter().zip(&g).map(|(a, b)| a * b.conj()).sum();
            assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm(), "{m:?}");
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let lat = WavevectorLattice::disk(1.0, 3.0).unwrap();
        assert!(type1(&[[0.0, 0.0]], &[Complex64::new(1.0, 0.0)], &lat, 1e-16).is_err());
        assert!(type2(&vec![Complex64::default(); lat.len()], &lat, &[[f64::NAN, 0.0]], 1e-8).is_err());
    }
}
