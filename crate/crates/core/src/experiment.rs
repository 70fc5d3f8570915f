//! Commands behind the CLI: monolithic data generation, coupled runs,
//! parameter sweeps and heatmap rendering.
//!
//! All commands read an [`ExperimentConfig`] and write into its `out`
//! directory. `snapshots.csv` there is the interchange file between the
//! monolithic solve and ROM training.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fem;
use crate::io;
use crate::metrics::RunStats;
use crate::mesh::StructuredGrid;
use crate::pod::SnapshotSet;
use crate::schwarz::{CoupledProblem, CoupledRun, ModelKind};

pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const BOUNDARY_FILE: &str = "boundary.csv";
pub const MERGED_FILE: &str = "merged.csv";
pub const STEPS_FILE: &str = "steps.csv";
pub const STATS_FILE: &str = "stats.csv";

/// Tolerance when matching stored time stamps and boundary data to a config.
const DATA_MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct MonolithicOutput {
    pub snapshots: SnapshotSet,
    pub snapshot_path: PathBuf,
    pub boundary_path: PathBuf,
    /// Wall clock of the time loop alone.
    pub wall_seconds: f64,
}

/// Solves the monolithic problem and writes the full-nodal snapshot matrix
/// and the boundary history.
pub fn cmd_monolithic(cfg: &ExperimentConfig) -> Result<MonolithicOutput> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let bc = cfg.boundary_condition();
    let ic = cfg.initial_condition(&grid);
    let stepper = fem::monolithic_stepper(&grid, cfg.dt)?;
    let mut best = f64::INFINITY;
    let mut snapshots = None;
    for _ in 0..cfg.repeats {
        let (s, secs) = fem::solve_monolithic_with(&stepper, &grid, &bc, &ic, cfg.dt, cfg.t_final)?;
        best = best.min(secs);
        snapshots.get_or_insert(s);
    }
    let snapshots = snapshots.expect("repeats >= 1");
    let snapshot_path = cfg.out.join(SNAPSHOT_FILE);
    let boundary_path = cfg.out.join(BOUNDARY_FILE);
    io::write_snapshot_csv(&snapshot_path, &snapshots.times, &snapshots.full_nodal())?;
    io::write_boundary_csv(&boundary_path, &snapshots.times, &snapshots.boundary_nodes, &snapshots.boundary)?;
    Ok(MonolithicOutput {
        snapshots,
        snapshot_path,
        boundary_path,
        wall_seconds: best,
    })
}

/// Monolithic online time averaged over `repeats` runs, for speed comparisons.
pub fn monolithic_seconds(cfg: &ExperimentConfig, repeats: usize) -> Result<f64> {
    let grid = cfg.grid()?;
    let bc = cfg.boundary_condition();
    let ic = cfg.initial_condition(&grid);
    let stepper = fem::monolithic_stepper(&grid, cfg.dt)?;
    let mut total = 0.0;
    for _ in 0..repeats.max(1) {
        total += fem::solve_monolithic_with(&stepper, &grid, &bc, &ic, cfg.dt, cfg.t_final)?.1;
    }
    Ok(total / repeats.max(1) as f64)
}

/// Reads `<out>/snapshots.csv` and checks it belongs to this configuration.
pub fn load_snapshots(cfg: &ExperimentConfig, grid: &StructuredGrid) -> Result<SnapshotSet> {
    let path = cfg.out.join(SNAPSHOT_FILE);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run the `monolithic` command with the same config first",
            path.display()
        )));
    }
    let (times, full) = io::read_snapshot_csv(&path)?;
    check_snapshots(cfg, grid, &path, &times, &full)?;
    SnapshotSet::from_full_nodal(&full, times, grid.interior_nodes(), grid.boundary_nodes())
}

fn check_snapshots(
    cfg: &ExperimentConfig,
    grid: &StructuredGrid,
    path: &Path,
    times: &[f64],
    full: &DMatrix<f64>,
) -> Result<()> {
    let stale = |why: String| {
        Error::Config(format!(
            "{} does not match the config ({why}); rerun the `monolithic` command",
            path.display()
        ))
    };
    if full.nrows() != grid.n_nodes() {
        return Err(stale(format!("{} rows, grid has {} nodes", full.nrows(), grid.n_nodes())));
    }
    let expected = fem::time_grid(cfg.dt, fem::step_count(cfg.dt, cfg.t_final)?);
    if times.len() != expected.len() || times.iter().zip(&expected).any(|(a, b)| (a - b).abs() > DATA_MATCH_TOL) {
        return Err(stale(format!("{} time stamps, expected {}", times.len(), expected.len())));
    }
    let bc = cfg.boundary_condition();
    let boundary = grid.boundary_nodes();
    for (p, &t) in times.iter().enumerate() {
        let g = bc.values_at(grid, &boundary, t)?;
        if boundary
            .iter()
            .zip(g.iter())
            .any(|(&n, v)| (full[(n, p)] - v).abs() > DATA_MATCH_TOL)
        {
            return Err(stale(format!("boundary values differ at t = {t}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub run: CoupledRun,
    pub stats: RunStats,
    pub projection_errors: Vec<Option<f64>>,
}

/// Coupled run on the stored monolithic data: writes the merged solution and
/// per-step sweep counts, and appends a row to `stats.csv`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let out = coupled_run(cfg)?;
    io::write_snapshot_csv(&cfg.out.join(MERGED_FILE), &out.run.times, &out.run.merged)?;
    io::write_steps_csv(&cfg.out.join(STEPS_FILE), &out.run)?;
    io::append_stats_row(&cfg.out.join(STATS_FILE), &out.stats.csv_row())?;
    Ok(out)
}

/// Coupled run without writing files. The reference comes from
/// `snapshots.csv` when present; an all-FOM run without one solves the
/// monolithic problem in memory instead.
pub fn coupled_run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = cfg.coupled_spec()?;
    let needs_training = spec.assignment.contains(&ModelKind::Rom);
    let snapshots = if needs_training || cfg.out.join(SNAPSHOT_FILE).exists() {
        load_snapshots(cfg, &spec.grid)?
    } else {
        fem::solve_monolithic(&spec.grid, &spec.bc, &spec.ic, spec.dt, spec.t_final)?
    };
    coupled_run_with(cfg, &snapshots)
}

/// Coupled run against given monolithic snapshots (training and reference).
pub fn coupled_run_with(cfg: &ExperimentConfig, snapshots: &SnapshotSet) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = cfg.coupled_spec()?;
    let problem = CoupledProblem::prepare(spec, Some(snapshots))?;
    let run = problem.run_repeated(cfg.repeats)?;
    let stats = RunStats::from_run(&run, &snapshots.full_nodal(), &problem.projection_errors)?;
    Ok(RunOutput {
        run,
        stats,
        projection_errors: problem.projection_errors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Data,
    Overlap,
    Rank,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Data => "data",
            SweepAxis::Overlap => "overlap",
            SweepAxis::Rank => "rank",
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: usize) {
        match self {
            SweepAxis::Data => cfg.rom.n_train = value,
            SweepAxis::Overlap => cfg.overlap = value,
            SweepAxis::Rank => cfg.rom.rank = value,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "data" => Ok(SweepAxis::Data),
            "overlap" => Ok(SweepAxis::Overlap),
            "rank" | "r" => Ok(SweepAxis::Rank),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}` (expected data, overlap or rank)"
            ))),
        }
    }
}

/// Parses a comma-separated list of positive integers.
pub fn parse_values(list: &str) -> Result<Vec<usize>> {
    let values = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid sweep value `{}`", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config("empty sweep value list".into()));
    }
    Ok(values)
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub sweep_path: PathBuf,
    pub pareto_path: PathBuf,
    /// One entry per value, in order: the stats or the error message.
    pub rows: Vec<(usize, std::result::Result<RunStats, String>)>,
}

/// Varies one parameter and records a stats row per value. A failing value
/// leaves an error row and the sweep moves on. Rows run one after another so
/// timings are not skewed by contention.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[usize]) -> Result<SweepOutput> {
    if values.is_empty() {
        return Err(Error::Config("empty sweep value list".into()));
    }
    let grid = cfg.grid()?;
    let needs_training = cfg.assignment().contains(&ModelKind::Rom);
    let snapshots = if needs_training || cfg.out.join(SNAPSHOT_FILE).exists() {
        load_snapshots(cfg, &grid)?
    } else {
        cfg.validate()?;
        let ic = cfg.initial_condition(&grid);
        fem::solve_monolithic(&grid, &cfg.boundary_condition(), &ic, cfg.dt, cfg.t_final)?
    };

    let mut rows = Vec::with_capacity(values.len());
    let mut table = format!("{}\n", RunStats::CSV_HEADER);
    let mut pareto = String::from("label,online_seconds,e_avg\n");
    for &v in values {
        let mut c = cfg.clone();
        axis.apply(&mut c, v);
        match coupled_run_with(&c, &snapshots) {
            Ok(out) => {
                table.push_str(&out.stats.csv_row());
                table.push('\n');
                pareto.push_str(&format!(
                    "{}={v} {},{},{:e}\n",
                    axis,
                    RunStats::assignment_label(&out.stats.assignment),
                    out.stats.online_seconds,
                    out.stats.e_avg
                ));
                rows.push((v, Ok(out.stats)));
            }
            Err(e) => {
                let msg = e.to_string();
                table.push_str(&RunStats::error_row(
                    c.layout,
                    &c.assignment(),
                    c.overlap,
                    c.rom.rank,
                    c.rom.n_train,
                    c.rom.lambda,
                    &msg,
                ));
                table.push('\n');
                rows.push((v, Err(msg)));
            }
        }
    }
    let sweep_path = cfg.out.join(format!("sweep_{axis}.csv"));
    let pareto_path = cfg.out.join(format!("pareto_{axis}.csv"));
    io::write_bytes(&sweep_path, table.as_bytes())?;
    io::write_bytes(&pareto_path, pareto.as_bytes())?;
    Ok(SweepOutput {
        sweep_path,
        pareto_path,
        rows,
    })
}

/// Renders the snapshot column at time `t` of `input` as a grayscale PPM in
/// the config's output directory. The grid size comes from the config.
pub fn cmd_render(cfg: &ExperimentConfig, input: &Path, t: f64) -> Result<PathBuf> {
    let (times, full) = io::read_snapshot_csv(input)?;
    let n_nodes = (cfg.nx + 1) * (cfg.ny + 1);
    if full.nrows() != n_nodes {
        return Err(Error::Config(format!(
            "{} has {} rows but a {}x{} grid has {n_nodes} nodes",
            input.display(),
            full.nrows(),
            cfg.nx,
            cfg.ny
        )));
    }
    let column = times
        .iter()
        .position(|&s| (s - t).abs() <= DATA_MATCH_TOL)
        .ok_or_else(|| {
            let available = times.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
            Error::InvalidArgument(format!("no snapshot at t = {t}; available times: {available}"))
        })?;
    let values: Vec<f64> = full.column(column).iter().copied().collect();
    let bytes = io::render_ppm(cfg.nx, cfg.ny, &values)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    let path = cfg.out.join(format!("{stem}_t{t}.ppm"));
    io::write_bytes(&path, &bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Problem;

    fn small(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            nx: 8,
            ny: 8,
            t_final: 0.05,
            overlap: 2,
            out: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn axis_and_value_parsing() {
        assert_eq!("Data".parse::<SweepAxis>().unwrap(), SweepAxis::Data);
        assert_eq!("r".parse::<SweepAxis>().unwrap(), SweepAxis::Rank);
        assert!("lambda".parse::<SweepAxis>().is_err());
        assert_eq!(parse_values("1, 2,5").unwrap(), vec![1, 2, 5]);
        assert!(parse_values("1,x").is_err());
        assert!(parse_values("-1").is_err());
    }

    #[test]
    fn run_without_training_data_names_monolithic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.models = vec![ModelKind::Rom, ModelKind::Rom];
        let err = cmd_run(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("monolithic"), "{err}");
    }

    #[test]
    fn stale_snapshots_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        cmd_monolithic(&cfg).unwrap();
        let mut other = cfg.clone();
        other.problem = Problem::TimeVaryingBcs;
        let grid = other.grid().unwrap();
        let err = load_snapshots(&other, &grid).unwrap_err();
        assert!(err.to_string().contains("boundary values differ"), "{err}");
        other = cfg.clone();
        other.t_final = 0.1;
        assert!(load_snapshots(&other, &grid).is_err());
    }

    #[test]
    fn render_lists_available_times() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let mono = cmd_monolithic(&cfg).unwrap();
        let err = cmd_render(&cfg, &mono.snapshot_path, 0.5).unwrap_err();
        assert!(err.to_string().contains("0.03"), "{err}");
        let path = cmd_render(&cfg, &mono.snapshot_path, 0.05).unwrap();
        let bytes = std::fs::read(path).unwrap();
        assert!(bytes.starts_with(b"P6\n9 9\n255\n"));
    }
}
