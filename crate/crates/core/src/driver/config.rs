//! `key = value` run configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::params::{derive_params, DerivedParams, DEFAULT_K_FAR};
use crate::sources::{generate, GeneratorKind, GeneratorSpec, OmegaLaw, SourceSet, MIN_ONSET};

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    File(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// nx × ny equispaced points over [-1, 1]², endpoints included.
    Grid { nx: usize, ny: usize },
    Points(Vec<[f64; 2]>),
}

impl TargetSpec {
    pub fn points(&self) -> Vec<[f64; 2]> {
        match self {
            TargetSpec::Grid { nx, ny } => {
                let coord = |i: usize, n: usize| {
                    if n == 1 {
                        0.0
                    } else {
                        -1.0 + 2.0 * i as f64 / (n - 1) as f64
                    }
                };
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..*ny {
                    for i in 0..*nx {
                        out.push([coord(i, *nx), coord(j, *ny)]);
                    }
                }
                out
            }
            TargetSpec::Points(p) => p.clone(),
        }
    }

    /// (nx, ny); a point list is reported as len × 1.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            TargetSpec::Grid { nx, ny } => (*nx, *ny),
            TargetSpec::Points(p) => (p.len(), 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Total,
    /// Total plus the local, near and far parts.
    Components,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub eps: f64,
    pub w: usize,
    pub p: usize,
    pub big_delta: f64,
    pub gap: f64,
    pub t_final: f64,
    pub dt: Option<f64>,
    pub dk: Option<f64>,
    pub k0: Option<f64>,
    pub k_far: f64,
    pub sources: SourceSpec,
    pub targets: TargetSpec,
    /// Empty means the final time only.
    pub output_times: Vec<f64>,
    pub out_dir: Option<PathBuf>,
    pub transform_tol: Option<f64>,
    pub mode: OutputMode,
    pub soe_panels: Option<usize>,
    pub soe_nodes: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            w: 24,
            p: 4,
            big_delta: 1.0,
            gap: 1.0,
            t_final: 8.0,
            dt: None,
            dk: None,
            k0: None,
            k_far: DEFAULT_K_FAR,
            sources: SourceSpec::Generator(GeneratorSpec::random(10, 1, 10.0)),
            targets: TargetSpec::Grid { nx: 10, ny: 10 },
            output_times: Vec::new(),
            out_dir: None,
            transform_tol: None,
            mode: OutputMode::Total,
            soe_panels: None,
            soe_nodes: 32,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Parse {
        line,
        msg: format!("{key}: {e}"),
    })
}

fn parse_list(key: &str, v: &str, line: usize) -> Result<Vec<f64>> {
    v.split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<f64>(key, s, line))
        .collect()
}

/// Read `x y` lines.
pub fn read_points(path: &Path) -> Result<Vec<[f64; 2]>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let v = parse_list("point", line, i + 1)?;
        if v.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected `x y`, found {} fields", v.len()),
            });
        }
        out.push([v[0], v[1]]);
    }
    Ok(out)
}

impl SimulationConfig {
    /// Parse config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut gen = GeneratorSpec::random(10, 1, 10.0);
        let mut source_file: Option<PathBuf> = None;
        let mut have_generator = false;
        let mut targets_file: Option<PathBuf> = None;
        let mut have_grid = false;
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: ln,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "eps" => cfg.eps = parse_num(key, v, ln)?,
                "W" => cfg.w = parse_num(key, v, ln)?,
                "p" => cfg.p = parse_num(key, v, ln)?,
                "Delta" => cfg.big_delta = parse_num(key, v, ln)?,
                "a" => cfg.gap = parse_num(key, v, ln)?,
                "T" => cfg.t_final = parse_num(key, v, ln)?,
                "dt" => cfg.dt = Some(parse_num(key, v, ln)?),
                "dk" => cfg.dk = Some(parse_num(key, v, ln)?),
                "k0" => cfg.k0 = Some(parse_num(key, v, ln)?),
                "k_far" => cfg.k_far = parse_num(key, v, ln)?,
                "sources" => source_file = Some(base.join(v)),
                "generator" => {
                    have_generator = true;
                    gen.kind = match v {
                        "random" => GeneratorKind::Random,
                        "circle" => GeneratorKind::Circle,
                        "curve" => GeneratorKind::Curve,
                        _ => {
                            return Err(Error::Parse {
                                line: ln,
                                msg: format!("unknown generator `{v}` (random, circle, curve)"),
                            })
                        }
                    }
                }
                "count" => gen.count = parse_num(key, v, ln)?,
                "seed" => gen.seed = parse_num(key, v, ln)?,
                "omega_max" => gen.omega_max = parse_num(key, v, ln)?,
                "omega_law" => {
                    gen.omega_law = match v {
                        "cuberoot" => OmegaLaw::CubeRoot,
                        "uniform" => OmegaLaw::Uniform,
                        _ => {
                            return Err(Error::Parse {
                                line: ln,
                                msg: format!("unknown omega_law `{v}` (cuberoot, uniform)"),
                            })
                        }
                    }
                }
                "t0_min" => gen.t0_min = parse_num(key, v, ln)?,
                "t0_max" => gen.t0_max = parse_num(key, v, ln)?,
                "grid" => {
                    have_grid = true;
                    let (a, b) = v.split_once('x').ok_or_else(|| Error::Parse {
                        line: ln,
                        msg: format!("grid must look like `10x10`, found `{v}`"),
                    })?;
                    cfg.targets = TargetSpec::Grid {
                        nx: parse_num(key, a.trim(), ln)?,
                        ny: parse_num(key, b.trim(), ln)?,
                    };
                }
                "targets" => targets_file = Some(base.join(v)),
                "output_times" => cfg.output_times = parse_list(key, v, ln)?,
                "out_dir" => cfg.out_dir = Some(base.join(v)),
                "transform_tol" => cfg.transform_tol = Some(parse_num(key, v, ln)?),
                "mode" => {
                    cfg.mode = match v {
                        "total" => OutputMode::Total,
                        "components" => OutputMode::Components,
                        _ => {
                            return Err(Error::Parse {
                                line: ln,
                                msg: format!("unknown mode `{v}` (total, components)"),
                            })
                        }
                    }
                }
                "soe_panels" => {
                    cfg.soe_panels = if v == "auto" { None } else { Some(parse_num(key, v, ln)?) }
                }
                "soe_nodes" => cfg.soe_nodes = parse_num(key, v, ln)?,
                _ => {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        cfg.sources = match (source_file, have_generator) {
            (Some(_), true) => {
                return Err(Error::Config("give either `sources` or `generator`, not both".into()))
            }
            (Some(f), false) => SourceSpec::File(f),
            (None, _) => SourceSpec::Generator(gen),
        };
        if let Some(f) = targets_file {
            if have_grid {
                return Err(Error::Config("give either `grid` or `targets`, not both".into()));
            }
            cfg.targets = TargetSpec::Points(read_points(&f)?);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn load_sources(&self) -> Result<SourceSet> {
        match &self.sources {
            SourceSpec::File(p) => SourceSet::from_file(p),
            SourceSpec::Generator(g) => generate(g),
        }
    }

    /// Derived parameters with any overrides applied, checked for feasibility.
    pub fn derive(&self, sources: &SourceSet) -> Result<DerivedParams> {
        let k0 = match self.k0 {
            Some(k) => k,
            None => sources.bandwidth_k0(self.eps)?,
        };
        let mut dp = derive_params(self.eps, self.w, self.big_delta, self.gap, k0, self.t_final, self.p)?;
        if let Some(dt) = self.dt {
            dp = dp.with_dt(dt)?;
        }
        if let Some(dk) = self.dk {
            dp = dp.with_dk(dk)?;
        }
        dp.with_k_far(self.k_far)
    }

    /// Transform tolerance: explicit, or ε/100 clamped to the supported range.
    pub fn transform_tolerance(&self) -> f64 {
        self.transform_tol.unwrap_or((self.eps * 1e-2).clamp(1e-14, 1e-2))
    }

    pub fn validate(&self) -> Result<()> {
        if let SourceSpec::Generator(g) = &self.sources {
            if g.t0_min < MIN_ONSET {
                return Err(Error::Config(format!("t0_min must be ≥ {MIN_ONSET}")));
            }
        }
        if let TargetSpec::Grid { nx, ny } = self.targets {
            if nx == 0 || ny == 0 {
                return Err(Error::Config("grid dimensions must be positive".into()));
            }
        }
        if self.output_times.iter().any(|&t| !(t >= 0.0 && t <= self.t_final * (1.0 + 1e-12))) {
            return Err(Error::Config(format!("output times must lie in [0, T = {}]", self.t_final)));
        }
        if self.soe_nodes == 0 || self.soe_panels == Some(0) {
            return Err(Error::Config("soe_nodes and soe_panels must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_rejects_unknown() {
        let text = "# run\neps = 1e-6\nW = 16\np=6\nT = 6\ngenerator = random\ncount = 20\nseed = 4\nomega_max = 62.8\ngrid = 5x4\noutput_times = 3, 6\nmode = components\n";
        let cfg = SimulationConfig::parse(text, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.eps, 1e-6);
        assert_eq!((cfg.w, cfg.p), (16, 6));
        assert_eq!(cfg.targets.dims(), (5, 4));
        assert_eq!(cfg.output_times, vec![3.0, 6.0]);
        assert_eq!(cfg.mode, OutputMode::Components);
        match &cfg.sources {
            SourceSpec::Generator(g) => assert_eq!((g.count, g.seed), (20, 4)),
            _ => panic!(),
        }
        let err = SimulationConfig::parse("bogus = 1\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        assert!(SimulationConfig::parse("eps 1\n", Path::new(".")).is_err());
    }

    #[test]
    fn grid_points_cover_box() {
        let p = TargetSpec::Grid { nx: 3, ny: 2 }.points();
        assert_eq!(p, vec![[-1.0, -1.0], [0.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0]]);
    }
}
