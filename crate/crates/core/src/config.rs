//! Flat `key = value` experiment configuration.
//!
//! One key per line; `#` starts a comment. Unknown keys are rejected.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `problem` | `static` | `static`, `time_varying` or `custom` |
//! | `nx`, `ny` | 50 | cells per axis |
//! | `x0`, `x1`, `y0`, `y1` | -1, 1, -1, 1 | domain bounds |
//! | `dt`, `t_final` | 0.01, 1 | time step and final time |
//! | `layout` | `vertical` | `vertical`, `horizontal`, `four_squares`, `monolithic` |
//! | `overlap` | 10 | shared cell rows/columns |
//! | `models` | all `fom` | comma list of `fom`/`rom`, one per subdomain |
//! | `rank`, `data`, `lambda`, `centering` | 6, 30, 0.01, true | ROM settings |
//! | `rank_policy` | `strict` | `pad` lets `rank` exceed the numerical rank of the training data |
//! | `delta_abs`, `delta_rel`, `max_sweeps` | 1e-10, 1e-10, 100 | Schwarz stopping |
//! | `out` | `out` | output directory |
//! | `repeats` | 1 | online runs averaged for timing |
//! | `bc_left`, `bc_right`, `bc_top`, `bc_bottom`, `ic` | 0 | custom problem data; side values are numbers or `q:<mu>` |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fem::{BoundaryCondition, StateVector};
use crate::mesh::{build_grid, DecompositionConfig, Layout, Rect, StructuredGrid};
use crate::schwarz::{CoupledSpec, ModelKind, RomOptions, SchwarzConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    StaticBcs,
    TimeVaryingBcs,
    Custom,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::StaticBcs => "static",
            Problem::TimeVaryingBcs => "time_varying",
            Problem::Custom => "custom",
        }
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(Problem::StaticBcs),
            "time_varying" => Ok(Problem::TimeVaryingBcs),
            "custom" => Ok(Problem::Custom),
            other => Err(Error::Config(format!("unknown problem `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub nx: usize,
    pub ny: usize,
    pub bounds: Rect,
    pub dt: f64,
    pub t_final: f64,
    pub layout: Layout,
    pub overlap: usize,
    /// Empty means every subdomain runs the FOM.
    pub models: Vec<ModelKind>,
    pub rom: RomOptions,
    pub schwarz: SchwarzConfig,
    pub out: PathBuf,
    pub repeats: usize,
    pub custom_bc: BoundaryCondition,
    pub custom_ic: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::StaticBcs,
            nx: 50,
            ny: 50,
            bounds: Rect::new(-1.0, 1.0, -1.0, 1.0),
            dt: 0.01,
            t_final: 1.0,
            layout: Layout::Vertical,
            overlap: 10,
            models: Vec::new(),
            rom: RomOptions::default(),
            schwarz: SchwarzConfig::default(),
            out: PathBuf::from("out"),
            repeats: 1,
            custom_bc: BoundaryCondition::uniform(0.0),
            custom_ic: 0.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
            .map_err(|e: Error| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets one key; shared by the file parser and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "problem" => self.problem = value.parse()?,
            "nx" => self.nx = parse(key, value)?,
            "ny" => self.ny = parse(key, value)?,
            "x0" => self.bounds.x0 = parse(key, value)?,
            "x1" => self.bounds.x1 = parse(key, value)?,
            "y0" => self.bounds.y0 = parse(key, value)?,
            "y1" => self.bounds.y1 = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "t_final" => self.t_final = parse(key, value)?,
            "layout" => self.layout = value.parse()?,
            "overlap" => self.overlap = parse(key, value)?,
            "models" => {
                self.models = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(str::parse)
                        .collect::<Result<Vec<ModelKind>>>()?
                }
            }
            "rank" => self.rom.rank = parse(key, value)?,
            "data" => self.rom.n_train = parse(key, value)?,
            "lambda" => self.rom.lambda = parse(key, value)?,
            "centering" => self.rom.centering = parse_bool(key, value)?,
            "rank_policy" => self.rom.rank_policy = value.parse()?,
            "delta_abs" => self.schwarz.delta_abs = parse(key, value)?,
            "delta_rel" => self.schwarz.delta_rel = parse(key, value)?,
            "max_sweeps" => self.schwarz.max_sweeps = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "repeats" => self.repeats = parse(key, value)?,
            "bc_left" => self.custom_bc.left = value.parse()?,
            "bc_right" => self.custom_bc.right = value.parse()?,
            "bc_top" => self.custom_bc.top = value.parse()?,
            "bc_bottom" => self.custom_bc.bottom = value.parse()?,
            "ic" => self.custom_ic = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.decomposition().validate(&grid)?;
        crate::fem::step_count(self.dt, self.t_final)?;
        self.schwarz.validate()?;
        let n_sub = self.layout.subdomain_count();
        if !self.models.is_empty() && self.models.len() != n_sub {
            return Err(Error::Config(format!(
                "`models` lists {} entries but the {} layout has {n_sub} subdomains",
                self.models.len(),
                self.layout
            )));
        }
        if self.rom.rank == 0 || self.rom.n_train == 0 {
            return Err(Error::Config("`rank` and `data` must be positive".into()));
        }
        if !(self.rom.lambda >= 0.0) {
            return Err(Error::Config(format!("`lambda` must be >= 0, got {}", self.rom.lambda)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("`repeats` must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<StructuredGrid> {
        build_grid(self.nx, self.ny, self.bounds).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn decomposition(&self) -> DecompositionConfig {
        DecompositionConfig::new(self.layout, self.overlap)
    }

    pub fn assignment(&self) -> Vec<ModelKind> {
        if self.models.is_empty() {
            vec![ModelKind::Fom; self.layout.subdomain_count()]
        } else {
            self.models.clone()
        }
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        match self.problem {
            Problem::StaticBcs => BoundaryCondition::static_case(),
            Problem::TimeVaryingBcs => BoundaryCondition::time_varying_case(),
            Problem::Custom => self.custom_bc,
        }
    }

    pub fn initial_condition(&self, grid: &StructuredGrid) -> StateVector {
        let v = match self.problem {
            Problem::StaticBcs | Problem::TimeVaryingBcs => 0.0,
            Problem::Custom => self.custom_ic,
        };
        StateVector::full(DVector::from_element(grid.n_nodes(), v))
    }

    pub fn coupled_spec(&self) -> Result<CoupledSpec> {
        let grid = self.grid()?;
        Ok(CoupledSpec {
            ic: self.initial_condition(&grid),
            grid,
            decomposition: self.decomposition(),
            assignment: self.assignment(),
            schwarz: self.schwarz,
            bc: self.boundary_condition(),
            dt: self.dt,
            t_final: self.t_final,
            rom: self.rom,
        })
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", k + 1)))?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", k + 1)))?;
        }
        Ok(cfg)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let models = self
            .models
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(f, "problem = {}", self.problem.name())?;
        writeln!(f, "nx = {}", self.nx)?;
        writeln!(f, "ny = {}", self.ny)?;
        writeln!(f, "x0 = {}", self.bounds.x0)?;
        writeln!(f, "x1 = {}", self.bounds.x1)?;
        writeln!(f, "y0 = {}", self.bounds.y0)?;
        writeln!(f, "y1 = {}", self.bounds.y1)?;
        writeln!(f, "dt = {}", self.dt)?;
        writeln!(f, "t_final = {}", self.t_final)?;
        writeln!(f, "layout = {}", self.layout)?;
        writeln!(f, "overlap = {}", self.overlap)?;
        writeln!(f, "models = {models}")?;
        writeln!(f, "rank = {}", self.rom.rank)?;
        writeln!(f, "data = {}", self.rom.n_train)?;
        writeln!(f, "lambda = {}", self.rom.lambda)?;
        writeln!(f, "centering = {}", self.rom.centering)?;
        writeln!(f, "rank_policy = {}", self.rom.rank_policy)?;
        writeln!(f, "delta_abs = {}", self.schwarz.delta_abs)?;
        writeln!(f, "delta_rel = {}", self.schwarz.delta_rel)?;
        writeln!(f, "max_sweeps = {}", self.schwarz.max_sweeps)?;
        writeln!(f, "out = {}", self.out.display())?;
        writeln!(f, "repeats = {}", self.repeats)?;
        writeln!(f, "bc_left = {}", self.custom_bc.left)?;
        writeln!(f, "bc_right = {}", self.custom_bc.right)?;
        writeln!(f, "bc_top = {}", self.custom_bc.top)?;
        writeln!(f, "bc_bottom = {}", self.custom_bc.bottom)?;
        writeln!(f, "ic = {}", self.custom_ic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::SideValue;
    use crate::pod::RankPolicy;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_reference_setup() {
        let cfg: ExperimentConfig = "".parse().unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!((cfg.nx, cfg.ny, cfg.dt, cfg.t_final), (50, 50, 0.01, 1.0));
        assert_eq!(cfg.schwarz.delta_abs, 1e-10);
        assert_eq!(cfg.rom.lambda, 1e-2);
        assert!(cfg.rom.centering);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_keys_and_comments() {
        let cfg: ExperimentConfig = "# heading\nlayout = four_squares\nmodels = rom,rom,fom,rom # Ω3 is FE\n\
                                     problem=time_varying\ndata=40\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.layout, Layout::FourSquares);
        assert_eq!(cfg.models[2], ModelKind::Fom);
        assert_eq!(cfg.problem, Problem::TimeVaryingBcs);
        assert_eq!(cfg.rom.n_train, 40);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!("bogus = 1".parse::<ExperimentConfig>().is_err());
        assert!("nx = -3".parse::<ExperimentConfig>().is_err());
        assert!("no equals sign".parse::<ExperimentConfig>().is_err());
        let cfg: ExperimentConfig = "models = rom".parse().unwrap();
        assert!(cfg.validate().is_err());
        let cfg: ExperimentConfig = "dt = 0.3".parse().unwrap();
        assert!(cfg.validate().is_err());
        let cfg: ExperimentConfig = "overlap = 50".parse().unwrap();
        assert!(cfg.validate().is_err());
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            (1usize..80, 1usize..80, -5.0f64..0.0, 0.5f64..5.0, 1e-4f64..0.5),
            prop_oneof![
                Just(Layout::Vertical),
                Just(Layout::Horizontal),
                Just(Layout::FourSquares),
                Just(Layout::Monolithic)
            ],
            (0usize..30, 1usize..40, 1usize..120, 0.0f64..1.0, any::<bool>(), any::<bool>()),
            proptest::collection::vec(prop_oneof![Just(ModelKind::Fom), Just(ModelKind::Rom)], 0..5),
            (-3.0f64..3.0, 0.5f64..8.0, 1usize..9),
        )
            .prop_map(|((nx, ny, x0, w, dt), layout, (overlap, rank, data, lambda, centering, pad), models, (c, mu, repeats))| {
                let mut cfg = ExperimentConfig {
                    nx,
                    ny,
                    bounds: Rect::new(x0, x0 + w, x0 * 0.5, x0 * 0.5 + w),
                    dt,
                    layout,
                    overlap,
                    models,
                    repeats,
                    problem: Problem::Custom,
                    custom_ic: c,
                    ..ExperimentConfig::default()
                };
                let rank_policy = if pad { RankPolicy::Pad } else { RankPolicy::Strict };
                cfg.rom = RomOptions { rank, n_train: data, lambda, centering, rank_policy };
                cfg.custom_bc.top = SideValue::Oscillating { mu };
                cfg.custom_bc.left = SideValue::Constant(c);
                cfg.out = PathBuf::from(format!("runs/{nx}x{ny}"));
                cfg
            })
    }

    proptest! {
        #[test]
        fn config_round_trip(cfg in arb_config()) {
            let text = cfg.to_string();
            let back: ExperimentConfig = text.parse().unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
