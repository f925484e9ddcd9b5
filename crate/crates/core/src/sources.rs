//! Point sources, their time signatures, and sampled histories.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{erfc, lagrange_weights, stencil_start};
use crate::nudft::NudftPlan;

/// Earliest onset for the erf-sine family: 0.5(erf(−7.5) + 1) < 1e-24.
pub const MIN_ONSET: f64 = 1.5;

#[derive(Clone)]
pub enum Signature {
    /// 0.5[erf(5(t − t0)) + 1] sin(ω(t − t0))
    ErfSine { t0: f64, omega: f64 },
    /// Caller-supplied signature; must vanish for t ≤ 0.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signature::ErfSine { t0, omega } => write!(f, "ErfSine {{ t0: {t0}, omega: {omega} }}"),
            Signature::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Signature {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            // 0.5(erf(z) + 1) = 0.5 erfc(−z) keeps relative accuracy before onset.
            Signature::ErfSine { t0, omega } => {
                0.5 * erfc(-5.0 * (t - t0)) * (omega * (t - t0)).sin()
            }
            Signature::Custom(f) => f(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SourceSet {
    positions: Vec<[f64; 2]>,
    signatures: Vec<Signature>,
}

const BOX_SLACK: f64 = 1e-12;

impl SourceSet {
    pub fn new(positions: Vec<[f64; 2]>, signatures: Vec<Signature>) -> Result<Self> {
        if positions.len() != signatures.len() {
            return Err(Error::InvalidInput(format!(
                "{} positions but {} signatures",
                positions.len(),
                signatures.len()
            )));
        }
        for (j, p) in positions.iter().enumerate() {
            if !(p[0].abs() <= 1.0 + BOX_SLACK && p[1].abs() <= 1.0 + BOX_SLACK) {
                return Err(Error::InvalidInput(format!(
                    "source {j} at {p:?} lies outside [-1, 1]²"
                )));
            }
        }
        for (j, s) in signatures.iter().enumerate() {
            if let Signature::ErfSine { t0, omega } = s {
                if !(*t0 >= MIN_ONSET) || !omega.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "source {j}: onset t0 = {t0} must be ≥ {MIN_ONSET} (finite ω)"
                    )));
                }
            }
        }
        Ok(Self {
            positions,
            signatures,
        })
    }

    pub fn erf_sine(positions: Vec<[f64; 2]>, t0: &[f64], omega: &[f64]) -> Result<Self> {
        if t0.len() != positions.len() || omega.len() != positions.len() {
            return Err(Error::InvalidInput("mismatched source parameter arrays".to_string()));
        }
        let sigs = t0
            .iter()
            .zip(omega)
            .map(|(&t0, &omega)| Signature::ErfSine { t0, omega })
            .collect();
        Self::new(positions, sigs)
    }

    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            signatures: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    /// σ_j(t).
    pub fn eval(&self, j: usize, t: f64) -> f64 {
        self.signatures[j].eval(t)
    }

    pub fn sample(&self, t: f64, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.signatures) {
            *o = s.eval(t);
        }
    }

    /// Largest |ω_j|, or None if any signature is opaque.
    pub fn max_frequency(&self) -> Option<f64> {
        self.signatures.iter().try_fold(0.0f64, |m, s| match s {
            Signature::ErfSine { omega, .. } => Some(m.max(omega.abs())),
            Signature::Custom(_) => None,
        })
    }

    /// K₀ = max|ω_j| + 10√(ln(1/ε)).
    pub fn bandwidth_k0(&self, eps: f64) -> Result<f64> {
        let w = self.max_frequency().ok_or_else(|| {
            Error::Config("custom signatures need a caller-supplied bandwidth K₀".to_string())
        })?;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidInput(format!("tolerance {eps} outside (0, 1]")));
        }
        Ok(w + 10.0 * (1.0 / eps).ln().sqrt())
    }

    /// Parse `y1 y2 t0 omega` lines (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        let (mut pos, mut t0, mut om) = (Vec::new(), Vec::new(), Vec::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            if v.len() != 4 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected `y1 y2 t0 omega`, found {} fields", v.len()),
                });
            }
            pos.push([v[0], v[1]]);
            t0.push(v[2]);
            om.push(v[3]);
        }
        Self::erf_sine(pos, &t0, &om)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Text form readable by [`SourceSet::parse`]; fails for opaque signatures.
    pub fn to_text(&self) -> Result<String> {
        let mut s = String::from("# y1 y2 t0 omega\n");
        for (p, sig) in self.positions.iter().zip(&self.signatures) {
            match sig {
                Signature::ErfSine { t0, omega } => {
                    s.push_str(&format!("{:e} {:e} {:e} {:e}\n", p[0], p[1], t0, omega))
                }
                Signature::Custom(_) => {
                    return Err(Error::InvalidInput("custom signatures cannot be written".into()))
                }
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Uniform positions in [-1, 1]².
    Random,
    /// Circle (0.8 cos s + 0.2, 0.8 sin s + 0.2), linear sweep of t0 and ω.
    Circle,
    /// Star-shaped curve r(s) = 0.61 + 0.2cos60s − 0.1sin20s + 0.05cos30s − 0.1cos40s.
    Curve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaLaw {
    /// ω = ω_max z^{1/3}, z uniform on [0, 1]
    CubeRoot,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub count: usize,
    pub seed: u64,
    pub omega_max: f64,
    pub t0_min: f64,
    pub t0_max: f64,
    pub omega_law: OmegaLaw,
}

impl GeneratorSpec {
    pub fn random(count: usize, seed: u64, omega_max: f64) -> Self {
        Self {
            kind: GeneratorKind::Random,
            count,
            seed,
            omega_max,
            t0_min: MIN_ONSET,
            t0_max: 7.0,
            omega_law: OmegaLaw::CubeRoot,
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<SourceSet> {
    if !(spec.t0_min >= MIN_ONSET && spec.t0_max >= spec.t0_min) {
        return Err(Error::Config(format!(
            "onset range [{}, {}] must start at ≥ {MIN_ONSET}",
            spec.t0_min, spec.t0_max
        )));
    }
    if !(spec.omega_max >= 0.0) {
        return Err(Error::Config("omega_max must be ≥ 0".to_string()));
    }
    let m = spec.count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw_omega = |rng: &mut ChaCha8Rng| {
        let z: f64 = rng.random();
        match spec.omega_law {
            OmegaLaw::CubeRoot => spec.omega_max * z.cbrt(),
            OmegaLaw::Uniform => spec.omega_max * z,
        }
    };
    let frac = |j: usize| if m > 1 { j as f64 / (m - 1) as f64 } else { 0.0 };
    let sweep = |j: usize| spec.t0_min + (spec.t0_max - spec.t0_min) * frac(j);
    let (mut pos, mut t0, mut om) = (Vec::with_capacity(m), Vec::new(), Vec::new());
    for j in 0..m {
        let s = 2.0 * PI * j as f64 / m as f64;
        match spec.kind {
            GeneratorKind::Random => {
                pos.push([rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]);
                t0.push(rng.random_range(spec.t0_min..=spec.t0_max));
                om.push(draw_omega(&mut rng));
            }
            GeneratorKind::Circle => {
                pos.push([0.8 * s.cos() + 0.2, 0.8 * s.sin() + 0.2]);
                t0.push(sweep(j));
                om.push(spec.omega_max * frac(j));
            }
            GeneratorKind::Curve => {
                let r = 0.61 + 0.2 * (60.0 * s).cos() - 0.1 * (20.0 * s).sin()
                    + 0.05 * (30.0 * s).cos()
                    - 0.1 * (40.0 * s).cos();
                pos.push([r * s.cos(), r * s.sin()]);
                t0.push(sweep(j));
                om.push(draw_omega(&mut rng));
            }
        }
    }
    SourceSet::erf_sine(pos, &t0, &om)
}

/// σ_j(t_m) at the most recent uniform time levels. Levels ≤ 0 read as zero.
#[derive(Debug, Clone)]
pub struct SignatureRing {
    sources: usize,
    levels: VecDeque<Vec<f64>>,
    newest: i64,
    zeros: Vec<f64>,
}

impl SignatureRing {
    /// Ring holding `capacity` levels, initially levels ≤ 0 (all zero).
    pub fn new(sources: usize, capacity: usize) -> Self {
        Self {
            sources,
            levels: (0..capacity.max(1)).map(|_| vec![0.0; sources]).collect(),
            newest: 0,
            zeros: vec![0.0; sources],
        }
    }

    pub fn capacity(&self) -> usize {
        self.levels.len()
    }

    pub fn newest(&self) -> i64 {
        self.newest
    }

    pub fn oldest(&self) -> i64 {
        self.newest - self.levels.len() as i64 + 1
    }

    /// Append level newest + 1 sampled from `sources` at t = level·dt.
    pub fn advance(&mut self, sources: &SourceSet, dt: f64) {
        let mut buf = self.levels.pop_front().unwrap();
        self.newest += 1;
        sources.sample(self.newest as f64 * dt, &mut buf);
        self.levels.push_back(buf);
    }

    pub fn level(&self, level: i64) -> Result<&[f64]> {
        if level <= 0 && level < self.oldest() {
            return Ok(&self.zeros);
        }
        if level < self.oldest() || level > self.newest {
            return Err(Error::State(format!(
                "signature level {level} outside retained range [{}, {}]",
                self.oldest(),
                self.newest
            )));
        }
        Ok(&self.levels[(level - self.oldest()) as usize])
    }

    pub fn value(&self, j: usize, level: i64) -> Result<f64> {
        debug_assert!(j < self.sources);
        Ok(self.level(level)?[j])
    }
}

/// S(k, t_m) on one lattice for a window of consecutive levels.
#[derive(Debug, Clone)]
pub struct SpectralSourceHistory {
    levels: VecDeque<Vec<Complex64>>,
    newest: i64,
    dt: f64,
}

impl SpectralSourceHistory {
    /// `capacity` levels of `modes` entries, pre-filled with zeros up to `newest`.
    pub fn new(modes: usize, capacity: usize, newest: i64, dt: f64) -> Self {
        Self {
            levels: (0..capacity.max(1))
                .map(|_| vec![Complex64::new(0.0, 0.0); modes])
                .collect(),
            newest,
            dt,
        }
    }

    pub fn newest(&self) -> i64 {
        self.newest
    }

    pub fn oldest(&self) -> i64 {
        self.newest - self.levels.len() as i64 + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Recycle the oldest slot as level newest + 1 and return it for filling.
    pub fn advance(&mut self) -> &mut [Complex64] {
        let buf = self.levels.pop_front().unwrap();
        self.levels.push_back(buf);
        self.newest += 1;
        self.levels.back_mut().unwrap()
    }

    /// Append level newest + 1 with the given values.
    pub fn push(&mut self, values: &[Complex64]) {
        self.advance().copy_from_slice(values);
    }

    pub fn level(&self, level: i64) -> Result<&[Complex64]> {
        if level < self.oldest() || level > self.newest {
            return Err(Error::State(format!(
                "spectral level {level} outside stored range [{}, {}]",
                self.oldest(),
                self.newest
            )));
        }
        Ok(&self.levels[(level - self.oldest()) as usize])
    }

    /// Stencil start level and p Lagrange weights for time τ.
    pub fn stencil(&self, tau: f64, p: usize) -> Result<(i64, Vec<f64>)> {
        let x = tau / self.dt;
        let start = (x - (p as f64 - 1.0) / 2.0 + 0.5).floor() as i64;
        if start < self.oldest() || start + p as i64 - 1 > self.newest {
            return Err(Error::Range(format!(
                "interpolation at τ = {tau} needs levels [{start}, {}], stored [{}, {}]",
                start + p as i64 - 1,
                self.oldest(),
                self.newest
            )));
        }
        debug_assert_eq!(start, stencil_start(x, p, i64::MIN / 2, i64::MAX / 2));
        let mut w = vec![0.0; p];
        lagrange_weights(x, start, p, &mut w);
        Ok((start, w))
    }

    /// p-point Lagrange interpolation of S(k_index, ·) at time τ.
    pub fn time_interpolate(&self, k_index: usize, tau: f64, p: usize) -> Result<Complex64> {
        let (start, w) = self.stencil(tau, p)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, wi) in w.iter().enumerate() {
            acc += self.level(start + i as i64)?[k_index] * wi;
        }
        Ok(acc)
    }
}

/// S(k, t) = Σ_j σ_j(t) e^{ik·y_j} on the plan's lattice.
pub fn spectral_source(
    sources: &SourceSet,
    plan: &NudftPlan,
    sigma: &[f64],
) -> Result<Vec<Complex64>> {
    let s: Vec<Complex64> = sigma.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.type1(sources.positions(), &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::erf;
    use crate::nudft::WavevectorLattice;

    #[test]
    fn erf_sine_values() {
        let s = SourceSet::erf_sine(vec![[0.0, 0.0]], &[2.0], &[PI]).unwrap();
        assert!(s.eval(0, 3.0).abs() < 1e-12);
        assert_eq!(s.eval(0, 2.0), 0.0);
        let v = 0.5 * (erf(2.5) + 1.0);
        assert!((s.eval(0, 2.5) - v).abs() < 1e-15);
        assert!((s.eval(0, 2.5) - 0.99979).abs() < 1e-5);
        assert_eq!(s.eval(0, -1.0), 0.0);
        let z = SourceSet::erf_sine(vec![[0.0, 0.0]], &[2.0], &[0.0]).unwrap();
        assert_eq!(z.eval(0, 4.0), 0.0);
        // Before onset the signature is negligible.
        let e = SourceSet::erf_sine(vec![[0.0, 0.0]], &[1.5], &[1.0]).unwrap();
        assert!(e.eval(0, 1e-9).abs() < 1e-24);
    }

    #[test]
    fn bandwidth() {
        let s = SourceSet::erf_sine(vec![[0.0, 0.0]], &[2.0], &[300.0 * PI]).unwrap();
        assert!((s.bandwidth_k0(1e-7).unwrap() - 983.0).abs() < 1.0);
        let s = SourceSet::erf_sine(vec![[0.0, 0.0]], &[2.0], &[0.0]).unwrap();
        assert!((s.bandwidth_k0(1e-7).unwrap() - 40.15).abs() < 0.01);
        assert_eq!(s.bandwidth_k0(1.0).unwrap(), 0.0);
        let c = SourceSet::new(vec![[0.0, 0.0]], vec![Signature::Custom(Arc::new(|_| 1.0))]).unwrap();
        assert!(c.bandwidth_k0(1e-7).is_err());
    }

    #[test]
    fn validation() {
        assert!(SourceSet::erf_sine(vec![[1.5, 0.0]], &[2.0], &[1.0]).is_err());
        assert!(SourceSet::erf_sine(vec![[0.0, 0.0]], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let text = "# comment\n0.1 -0.2 2.0 3.0  # trailing\n\n-0.5 0.5 1.5 0.0\n";
        let s = SourceSet::parse(text).unwrap();
        assert_eq!(s.len(), 2);
        let back = SourceSet::parse(&s.to_text().unwrap()).unwrap();
        assert_eq!(back.positions(), s.positions());
        let err = SourceSet::parse("0.1 0.2 3.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn generators_are_seeded_and_in_box() {
        for kind in [GeneratorKind::Random, GeneratorKind::Circle, GeneratorKind::Curve] {
            let spec = GeneratorSpec {
                kind,
                ..GeneratorSpec::random(300, 7, 20.0 * PI)
            };
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a.positions(), b.positions());
            assert!(a.max_frequency().unwrap() <= 20.0 * PI);
        }
    }

    #[test]
    fn ring_matches_fresh_evaluation() {
        let src = generate(&GeneratorSpec::random(5, 1, 10.0)).unwrap();
        let mut ring = SignatureRing::new(5, 8);
        let dt = 0.37;
        for _ in 0..20 {
            ring.advance(&src, dt);
        }
        for level in ring.oldest()..=ring.newest() {
            for j in 0..5 {
                assert_eq!(ring.value(j, level).unwrap(), src.eval(j, level as f64 * dt));
            }
        }
        assert!(ring.level(ring.oldest() - 1).is_err());
        assert!(ring.level(ring.newest() + 1).is_err());
    }

    #[test]
    fn spectral_source_trivial_cases() {
        let lat = std::sync::Arc::new(WavevectorLattice::disk(0.92, 5.0).unwrap());
        let plan = NudftPlan::new(lat.clone(), 1e-12).unwrap();
        let src = SourceSet::erf_sine(vec![[0.0, 0.0]], &[2.0], &[1.0]).unwrap();
        let s = spectral_source(&src, &plan, &[0.7]).unwrap();
        assert!(s.iter().all(|v| (v - Complex64::new(0.7, 0.0)).norm() < 1e-14));
        let src = generate(&GeneratorSpec::random(9, 2, 1.0)).unwrap();
        let sig: Vec<f64> = (0..9).map(|j| j as f64 - 3.0).collect();
        let s = spectral_source(&src, &plan, &sig).unwrap();
        let o = lat.position([0, 0]).unwrap();
        assert!((s[o].re - sig.iter().sum::<f64>()).abs() < 1e-12);
        for (i, &n) in lat.modes().iter().enumerate() {
            let m = lat.position([-n[0], -n[1]]).unwrap();
            assert!((s[i] - s[m].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn time_interpolation() {
        let dt = 0.01;
        let mut h = SpectralSourceHistory::new(1, 40, -1, dt);
        for m in 0..40 {
            h.push(&[Complex64::new((5.0 * m as f64 * dt).sin(), 0.0)]);
        }
        let v = h.time_interpolate(0, 0.123, 8).unwrap();
        assert!((v.re - 0.615f64.sin()).abs() < 1e-10);
        assert_eq!(h.time_interpolate(0, 0.2, 8).unwrap().re, (5.0 * 20.0 * dt).sin());
        assert!(h.time_interpolate(0, 0.385, 8).is_err());
        let mut c = SpectralSourceHistory::new(1, 10, 0, 0.1);
        for _ in 0..10 {
            c.push(&[Complex64::new(2.5, -1.0)]);
        }
        let v = c.time_interpolate(0, 0.537, 4).unwrap();
        assert!((v - Complex64::new(2.5, -1.0)).norm() < 1e-14);
    }
}
