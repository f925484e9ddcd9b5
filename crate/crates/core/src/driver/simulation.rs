//! Time-stepping pipeline.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::blending::BlendingWindow;
use crate::error::{Error, Result};
use crate::farhist::{hankel_for_lattice, FarHistoryState, HankelTable};
use crate::local::{LocalStencil, NeighborIndex};
use crate::nearhist::{eval_near_history, NearHistoryState, JUMP_HALF};
use crate::nudft::{NudftPlan, WavevectorLattice};
use crate::params::DerivedParams;
use crate::soe::{build_soe, SoeApproximation, DEFAULT_LAMBDA_MAX};
use crate::sources::{SignatureRing, SourceSet, SpectralSourceHistory};

use super::config::{OutputMode, SimulationConfig};

/// Seconds spent per phase, summed over the run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimings {
    pub precompute: f64,
    pub local_eval: f64,
    pub history_eval: f64,
    pub alpha_update: f64,
    pub beta_update: f64,
    pub type1: f64,
    pub steps: usize,
    pub stepping: f64,
}

impl PhaseTimings {
    pub fn per_step(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.stepping / self.steps as f64
        }
    }
}

/// Fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub step: i64,
    pub t: f64,
    pub total: Vec<f64>,
    pub local: Vec<f64>,
    /// Near and far parts, present only when evaluated separately.
    pub near: Option<Vec<f64>>,
    pub far: Option<Vec<f64>>,
}

/// Panel count for the pole set: ⌈log2(λ_max T)⌉ + 1 clamped to [4, 20].
pub fn auto_soe_panels(t_final: f64) -> usize {
    ((DEFAULT_LAMBDA_MAX * t_final).log2().ceil() as i64 + 1).clamp(4, 20) as usize
}

/// Pole set valid on the far-history box, growing the panel count until validation passes.
pub fn soe_for(dp: &DerivedParams, panels: Option<usize>, nodes: usize) -> Result<SoeApproximation> {
    let t_min = dp.a_plus - dp.delta;
    let t_max = dp.t_final.max(t_min);
    let tol = (dp.eps * 1e-2).clamp(1e-12, 1e-6);
    let mut n = panels.unwrap_or_else(|| auto_soe_panels(dp.t_final));
    loop {
        let soe = build_soe(DEFAULT_LAMBDA_MAX, n, nodes)?
            .with_validity(dp.a_radius, t_min, t_max)?
            .with_tolerance(tol);
        let v = soe.validate(t_max, 40)?;
        if !v.flagged || panels.is_some() || n >= 20 {
            return Ok(soe);
        }
        n += 1;
    }
}

#[derive(Debug)]
pub struct Simulation {
    dp: DerivedParams,
    mode: OutputMode,
    sources: SourceSet,
    targets: Vec<[f64; 2]>,
    near_plan: NudftPlan,
    far_plan: NudftPlan,
    embedding: Vec<usize>,
    soe: SoeApproximation,
    hankel: HankelTable,
    far_class: Vec<u32>,
    near: NearHistoryState,
    far: FarHistoryState,
    sig: SignatureRing,
    s_now: SpectralSourceHistory,
    s_delayed: SpectralSourceHistory,
    far_ring: SpectralSourceHistory,
    /// Delayed-ring level computed at step n is n − j0 + lookahead.
    lookahead: i64,
    far_hi: i64,
    stencil: LocalStencil,
    step: i64,
    timings: PhaseTimings,
    step_times: Vec<f64>,
    strengths: Vec<Complex64>,
    sigma: Vec<f64>,
}

impl Simulation {
    pub fn new(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let sources = cfg.load_sources()?;
        Self::with_sources(cfg, sources)
    }

    pub fn with_sources(cfg: &SimulationConfig, sources: SourceSet) -> Result<Self> {
        let dp = cfg.derive(&sources)?;
        Self::from_parts(
            dp,
            sources,
            cfg.targets.points(),
            cfg.transform_tolerance(),
            cfg.soe_panels,
            cfg.soe_nodes,
            cfg.mode,
        )
    }

    pub fn from_parts(
        dp: DerivedParams,
        sources: SourceSet,
        targets: Vec<[f64; 2]>,
        transform_tol: f64,
        soe_panels: Option<usize>,
        soe_nodes: usize,
        mode: OutputMode,
    ) -> Result<Self> {
        let clock = Instant::now();
        if targets.iter().any(|x| !(x[0].abs() <= 1.0 + 1e-12 && x[1].abs() <= 1.0 + 1e-12)) {
            return Err(Error::Config("targets must lie in [-1, 1]²".into()));
        }
        let window = BlendingWindow::from_tolerance(dp.delta, dp.eps)?;
        let near_lattice = Arc::new(WavevectorLattice::half_disk(dp.dk, dp.k_cut.max(dp.k_far))?);
        let far_lattice = Arc::new(WavevectorLattice::half_disk(dp.dk, dp.k_far)?);
        let embedding = near_lattice.embedding(&far_lattice)?;
        let near_plan = NudftPlan::new(near_lattice.clone(), transform_tol)?;
        let far_plan = NudftPlan::new(far_lattice.clone(), transform_tol)?;
        let soe = soe_for(&dp, soe_panels, soe_nodes)?;
        let (hankel, far_class) = hankel_for_lattice(&soe, &dp, &far_lattice)?;
        let near = NearHistoryState::for_lattice(&dp, &window, &near_lattice)?;
        let far = FarHistoryState::new(&dp, &window, &soe.nodes, far_lattice.len())?;

        let j0 = dp.near_delay_steps() as i64;
        let (far_lo, far_hi) = far.level_span();
        let lookahead = (far_hi + j0).max(JUMP_HALF as i64);
        let w = dp.w;
        let s_now = SpectralSourceHistory::new(near_lattice.len(), near.weights().now_levels(), 0, dp.dt);
        let s_delayed = SpectralSourceHistory::new(
            near_lattice.len(),
            w + JUMP_HALF + 1 + lookahead as usize,
            -j0 + lookahead,
            dp.dt,
        );
        let far_ring = SpectralSourceHistory::new(
            far_lattice.len(),
            (far_hi - far_lo + 1) as usize,
            far_hi,
            dp.dt,
        );
        if far_hi > 0 || -j0 + lookahead > 0 {
            return Err(Error::Config("history delay too short for the interpolation order".into()));
        }
        if far_hi < -j0 - (w + JUMP_HALF) as i64 {
            return Err(Error::Config("far history reads levels older than the delayed ring".into()));
        }
        let index = NeighborIndex::build(&targets, sources.positions(), dp.delta)?;
        let stencil = LocalStencil::build(&index, dp.dt, &window, dp.p)?;
        let sig = SignatureRing::new(sources.len(), stencil.n_max());
        let m = sources.len();
        Ok(Self {
            dp,
            mode,
            sources,
            targets,
            near_plan,
            far_plan,
            embedding,
            soe,
            hankel,
            far_class,
            near,
            far,
            sig,
            s_now,
            s_delayed,
            far_ring,
            lookahead,
            far_hi,
            stencil,
            step: 0,
            timings: PhaseTimings {
                precompute: clock.elapsed().as_secs_f64(),
                ..PhaseTimings::default()
            },
            step_times: Vec::new(),
            strengths: vec![Complex64::new(0.0, 0.0); m],
            sigma: vec![0.0; m],
        })
    }

    pub fn params(&self) -> &DerivedParams {
        &self.dp
    }

    pub fn sources(&self) -> &SourceSet {
        &self.sources
    }

    pub fn targets(&self) -> &[[f64; 2]] {
        &self.targets
    }

    pub fn step_index(&self) -> i64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dp.dt
    }

    pub fn near_state(&self) -> &NearHistoryState {
        &self.near
    }

    pub fn far_state(&self) -> &FarHistoryState {
        &self.far
    }

    pub fn near_plan(&self) -> &NudftPlan {
        &self.near_plan
    }

    pub fn far_plan(&self) -> &NudftPlan {
        &self.far_plan
    }

    pub fn soe(&self) -> &SoeApproximation {
        &self.soe
    }

    pub fn hankel(&self) -> &HankelTable {
        &self.hankel
    }

    pub fn local_pairs(&self) -> usize {
        self.stencil.pairs()
    }

    pub fn timings(&self) -> &PhaseTimings {
        &self.timings
    }

    /// Wall time of each completed step.
    pub fn step_times(&self) -> &[f64] {
        &self.step_times
    }

    fn spectral_at(&mut self, level: i64) -> Result<Vec<Complex64>> {
        self.sources.sample(level as f64 * self.dp.dt, &mut self.sigma);
        for (s, &v) in self.strengths.iter_mut().zip(&self.sigma) {
            *s = Complex64::new(v, 0.0);
        }
        self.near_plan.type1(self.sources.positions(), &self.strengths)
    }

    /// Advance from t_n to t_{n+1}.
    pub fn step(&mut self) -> Result<()> {
        let start = Instant::now();
        let c = Instant::now();
        self.near.step_alpha(&self.s_now, &self.s_delayed)?;
        self.timings.alpha_update += c.elapsed().as_secs_f64();
        let c = Instant::now();
        self.far.step_beta(&self.far_ring)?;
        self.timings.beta_update += c.elapsed().as_secs_f64();
        self.step += 1;
        let n = self.step;
        let j0 = self.dp.near_delay_steps() as i64;

        let c = Instant::now();
        let now = self.spectral_at(n)?;
        self.s_now.push(&now);
        let delayed = self.spectral_at(n - j0 + self.lookahead)?;
        self.s_delayed.push(&delayed);
        self.timings.type1 += c.elapsed().as_secs_f64();

        let src = self.s_delayed.level(n + self.far_hi)?;
        let buf = self.far_ring.advance();
        for (b, &i) in buf.iter_mut().zip(&self.embedding) {
            *b = src[i];
        }
        self.sig.advance(&self.sources, self.dp.dt);

        let dt = start.elapsed().as_secs_f64();
        self.step_times.push(dt);
        self.timings.steps += 1;
        self.timings.stepping += dt;
        Ok(())
    }

    pub fn advance_to(&mut self, step: i64) -> Result<()> {
        if step < self.step {
            return Err(Error::State(format!("cannot rewind from step {} to {step}", self.step)));
        }
        while self.step < step {
            self.step()?;
        }
        Ok(())
    }

    /// α_F on the far lattice at the current step.
    pub fn alpha_far(&self) -> Result<Vec<Complex64>> {
        self.far.assemble_alpha_f(&self.hankel, &self.far_class, &self.far_ring)
    }

    /// Fields at the targets at the current step.
    pub fn evaluate(&mut self) -> Result<Evaluation> {
        let c = Instant::now();
        let local = self.stencil.apply(&self.sig, self.step)?;
        self.timings.local_eval += c.elapsed().as_secs_f64();
        let c = Instant::now();
        let alpha_f = self.alpha_far()?;
        let (total, near, far) = match self.mode {
            OutputMode::Total => {
                let h = eval_near_history(
                    &self.near_plan,
                    self.near.alpha(),
                    Some((&self.embedding, &alpha_f)),
                    &self.targets,
                )?;
                let total = h.values.iter().zip(&local).map(|(a, b)| a + b).collect();
                (total, None, None)
            }
            OutputMode::Components => {
                let nh = eval_near_history(&self.near_plan, self.near.alpha(), None, &self.targets)?;
                let fh = eval_near_history(&self.far_plan, &alpha_f, None, &self.targets)?;
                let total = (0..self.targets.len())
                    .map(|i| local[i] + nh.values[i] + fh.values[i])
                    .collect();
                (total, Some(nh.values), Some(fh.values))
            }
        };
        self.timings.history_eval += c.elapsed().as_secs_f64();
        Ok(Evaluation {
            step: self.step,
            t: self.time(),
            total,
            local,
            near,
            far,
        })
    }
}
