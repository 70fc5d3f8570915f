//! Error and performance diagnostics of coupled runs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::Layout;
use crate::schwarz::{CoupledRun, ModelKind};

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSeries {
    pub e_avg: f64,
    pub e_max: f64,
    /// Relative error at `t_2..t_tau`.
    pub per_step: Vec<f64>,
}

/// Relative l2 error of `approx` against `reference` per column, skipping the
/// initial condition column. Both matrices are full-nodal (`n_nodes x tau`).
pub fn relative_error_series(approx: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<ErrorSeries> {
    if approx.shape() != reference.shape() {
        return Err(Error::InvalidArgument(format!(
            "solution shapes differ: {:?} vs {:?}",
            approx.shape(),
            reference.shape()
        )));
    }
    if reference.ncols() < 2 {
        return Err(Error::InsufficientData("need at least two time levels".into()));
    }
    let mut per_step = Vec::with_capacity(reference.ncols() - 1);
    for p in 1..reference.ncols() {
        let r = reference.column(p);
        let norm = r.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm(format!("reference solution is zero at step {}", p + 1)));
        }
        per_step.push((r - approx.column(p)).norm() / norm);
    }
    let e_avg = per_step.iter().sum::<f64>() / per_step.len() as f64;
    let e_max = per_step.iter().copied().fold(0.0, f64::max);
    Ok(ErrorSeries {
        e_avg,
        e_max,
        per_step,
    })
}

/// Unweighted mean of per-subdomain projection errors.
pub fn average_projection_error(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no projection errors to average".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// One row of the stats table.
#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub layout: Layout,
    pub assignment: Vec<ModelKind>,
    pub overlap: usize,
    pub rank: usize,
    pub data: usize,
    pub lambda: f64,
    pub e_avg: f64,
    pub e_max: f64,
    /// NaN when no subdomain runs a ROM.
    pub e_proj_avg: f64,
    pub avg_sweeps: f64,
    pub online_seconds: f64,
}

impl RunStats {
    pub const CSV_HEADER: &'static str =
        "layout,model_assignment,overlap,r,data,lambda,e_avg,e_max,e_proj_avg,avg_sweeps,online_seconds,status";

    pub fn from_run(run: &CoupledRun, reference: &DMatrix<f64>, projection_errors: &[Option<f64>]) -> Result<Self> {
        let errors = relative_error_series(&run.merged, reference)?;
        let proj: Vec<f64> = projection_errors.iter().flatten().copied().collect();
        let e_proj_avg = if proj.is_empty() {
            f64::NAN
        } else {
            average_projection_error(&proj)?
        };
        Ok(Self {
            layout: run.layout,
            assignment: run.assignment.clone(),
            overlap: run.overlap,
            rank: run.rom.rank,
            data: run.rom.n_train,
            lambda: run.rom.lambda,
            e_avg: errors.e_avg,
            e_max: errors.e_max,
            e_proj_avg,
            avg_sweeps: run.average_sweeps(),
            online_seconds: run.online_seconds,
        })
    }

    pub fn assignment_label(assignment: &[ModelKind]) -> String {
        assignment.iter().map(|k| k.name()).collect::<Vec<_>>().join("-")
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{},{},ok",
            self.layout,
            Self::assignment_label(&self.assignment),
            self.overlap,
            self.rank,
            self.data,
            self.lambda,
            self.e_avg,
            self.e_max,
            self.e_proj_avg,
            self.avg_sweeps,
            self.online_seconds
        )
    }

    /// Row for a failed run: parameters kept, metrics NaN, status carries the error.
    pub fn error_row(
        layout: Layout,
        assignment: &[ModelKind],
        overlap: usize,
        rank: usize,
        data: usize,
        lambda: f64,
        message: &str,
    ) -> String {
        let message: String = message
            .chars()
            .map(|c| if c == ',' || c == '\n' { ';' } else { c })
            .collect();
        format!(
            "{layout},{},{overlap},{rank},{data},{lambda:e},NaN,NaN,NaN,NaN,NaN,error: {message}",
            Self::assignment_label(assignment)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field() -> DMatrix<f64> {
        DMatrix::from_fn(5, 4, |i, p| 1.0 + i as f64 * 0.3 + p as f64)
    }

    #[test]
    fn identical_solutions() {
        let e = relative_error_series(&field(), &field()).unwrap();
        assert_eq!((e.e_avg, e.e_max), (0.0, 0.0));
        assert_eq!(e.per_step.len(), 3);
    }

    #[test]
    fn uniform_scaling_error() {
        let mono = field();
        let e = relative_error_series(&(&mono * 1.01), &mono).unwrap();
        assert_abs_diff_eq!(e.e_avg, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(e.e_max, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let mut mono = field();
        mono.column_mut(2).fill(0.0);
        assert!(matches!(relative_error_series(&field(), &mono), Err(Error::ZeroNorm(_))));
        // the initial column is excluded
        let mut mono = field();
        mono.column_mut(0).fill(0.0);
        assert!(relative_error_series(&field(), &mono).is_ok());
    }

    #[test]
    fn projection_averages() {
        assert_eq!(average_projection_error(&[0.5]).unwrap(), 0.5);
        assert_abs_diff_eq!(average_projection_error(&[0.01, 0.03]).unwrap(), 0.02, epsilon = 1e-15);
        assert!(average_projection_error(&[]).is_err());
    }

    #[test]
    fn error_rows_keep_the_schema() {
        let row = RunStats::error_row(Layout::Vertical, &[ModelKind::Rom, ModelKind::Rom], 1, 2, 3, 0.0, "bad, thing");
        assert_eq!(
            row.split(',').count(),
            RunStats::CSV_HEADER.split(',').count()
        );
        assert!(row.ends_with("error: bad; thing"));
    }
}
