//! Operator inference: reduced operators `K̂`, `B̂` learned from projected
//! snapshots by Tikhonov-regularized least squares, and the implicit reduced step.
//!
//! The model is `d/dt xhat = K̂ xhat + B̂ y`, where `xhat = psi^T (x - mean)`
//! and `y` stacks the subdomain's physical and Schwarz boundary values
//! (boundary inputs are not centered).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pod::{PodBasis, SnapshotSet};

/// Default regularization weight.
pub const DEFAULT_LAMBDA: f64 = 1e-2;

/// Regression inputs aligned on the training times `t_1..t_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingData {
    /// `r x j` reduced states.
    pub xhat: DMatrix<f64>,
    /// `r x (j-1)` backward-difference derivatives at `t_2..t_j`.
    pub xdot_hat: DMatrix<f64>,
    /// `m x j` boundary inputs.
    pub y: DMatrix<f64>,
}

impl TrainingData {
    /// Projects the first `n_train` snapshots onto `basis` and differences them.
    pub fn from_snapshots(snaps: &SnapshotSet, basis: &PodBasis, n_train: usize, dt: f64) -> Result<Self> {
        if n_train > snaps.n_times() {
            return Err(Error::InvalidArgument(format!(
                "training window {n_train} exceeds {} snapshots",
                snaps.n_times()
            )));
        }
        let xhat = basis.project_columns(&snaps.x.columns(0, n_train).into_owned());
        let xdot_hat = estimate_derivatives(&xhat, dt)?;
        Ok(Self {
            xhat,
            xdot_hat,
            y: snaps.boundary.columns(0, n_train).into_owned(),
        })
    }

    pub fn len(&self) -> usize {
        self.xhat.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.xhat.ncols() == 0
    }
}

/// First-order backward differences; column `p-1` is `(x_p - x_{p-1}) / dt`.
pub fn estimate_derivatives(xhat: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let j = xhat.ncols();
    if j < 2 {
        return Err(Error::InsufficientData(format!(
            "derivative estimation needs at least 2 samples, got {j}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    Ok(DMatrix::from_fn(xhat.nrows(), j - 1, |i, p| {
        (xhat[(i, p + 1)] - xhat[(i, p)]) / dt
    }))
}

/// Minimizes `sum_p |xdot_p - K xhat_p - B y_p|^2 + lambda^2 (|K|_F^2 + |B|_F^2)`
/// over samples `p = 2..j`, solved through the row-augmented least-squares system.
pub fn infer_operators(data: &TrainingData, lambda: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = data.xhat.nrows();
    let m = data.y.nrows();
    let j = data.xhat.ncols();
    if j < 2 {
        return Err(Error::InsufficientData(format!(
            "operator inference needs at least 2 samples, got {j}"
        )));
    }
    if data.y.ncols() != j || data.xdot_hat.shape() != (r, j - 1) {
        return Err(Error::InvalidArgument("training data dimensions disagree".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization weight must be non-negative, got {lambda}"
        )));
    }
    let samples = j - 1;
    let unknowns = r + m;

    // rows: one per sample (D^T), then lambda * I
    let mut lhs = DMatrix::zeros(samples + unknowns, unknowns);
    for p in 0..samples {
        for i in 0..r {
            lhs[(p, i)] = data.xhat[(i, p + 1)];
        }
        for i in 0..m {
            lhs[(p, r + i)] = data.y[(i, p + 1)];
        }
    }
    let mut rhs = DMatrix::zeros(samples + unknowns, r);
    for p in 0..samples {
        for i in 0..r {
            rhs[(p, i)] = data.xdot_hat[(i, p)];
        }
    }

    if lambda == 0.0 {
        let d = lhs.rows(0, samples).into_owned();
        let sv = d.singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > smax * 1e-12 * samples.max(unknowns) as f64).count();
        if smax == 0.0 || rank < unknowns {
            return Err(Error::RankDeficientRegression {
                rank: if smax == 0.0 { 0 } else { rank },
                required: unknowns,
            });
        }
    } else {
        for k in 0..unknowns {
            lhs[(samples + k, k)] = lambda;
        }
    }

    let qr = lhs.qr();
    let qtb = qr.q().tr_mul(&rhs);
    let solution = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Solver("triangular factor of the regression is singular".into()))?;
    // solution is (r + m) x r and holds [K B]^T
    let operators = solution.transpose();
    let k_hat = operators.columns(0, r).into_owned();
    let b_hat = operators.columns(r, m).into_owned();
    if k_hat.iter().chain(b_hat.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Solver("inferred operators contain non-finite entries".into()));
    }
    Ok((k_hat, b_hat))
}

/// Regularized least-squares objective, for diagnostics and tests.
pub fn regression_objective(data: &TrainingData, k_hat: &DMatrix<f64>, b_hat: &DMatrix<f64>, lambda: f64) -> f64 {
    let j = data.xhat.ncols();
    let states = data.xhat.columns(1, j - 1);
    let inputs = data.y.columns(1, j - 1);
    let residual = &data.xdot_hat - k_hat * states - b_hat * inputs;
    residual.norm_squared() + lambda * lambda * (k_hat.norm_squared() + b_hat.norm_squared())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub basis: PodBasis,
    pub k_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    /// Local grid node of each boundary input, identical to the FE boundary ordering.
    pub boundary_nodes: Vec<usize>,
    pub lambda: f64,
}

impl ReducedModel {
    /// Learns a model from subdomain-local snapshots with the given basis.
    pub fn train(snaps: &SnapshotSet, basis: PodBasis, n_train: usize, dt: f64, lambda: f64) -> Result<Self> {
        let data = TrainingData::from_snapshots(snaps, &basis, n_train, dt)?;
        let (k_hat, b_hat) = infer_operators(&data, lambda)?;
        Ok(Self {
            basis,
            k_hat,
            b_hat,
            boundary_nodes: snaps.boundary_nodes.clone(),
            lambda,
        })
    }

    pub fn rank(&self) -> usize {
        self.k_hat.nrows()
    }

    pub fn n_boundary(&self) -> usize {
        self.b_hat.ncols()
    }

    pub fn stepper(&self, dt: f64) -> Result<RomStepper> {
        RomStepper::new(self.clone(), dt)
    }
}

/// Backward Euler for the reduced system with `I - dt K̂` factored once.
#[derive(Clone, Debug)]
pub struct RomStepper {
    model: ReducedModel,
    dt: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl RomStepper {
    pub fn new(model: ReducedModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let r = model.rank();
        let system = DMatrix::identity(r, r) - &model.k_hat * dt;
        let lu = system.clone().lu();
        let singular = !lu.is_invertible()
            || (0..r).any(|i| lu.u()[(i, i)].abs() <= 1e-14 * system.amax().max(1.0));
        if singular {
            let eig = model.k_hat.complex_eigenvalues();
            let closest = eig
                .iter()
                .map(|e| (e.re - 1.0 / dt).hypot(e.im))
                .fold(f64::INFINITY, f64::min);
            return Err(Error::SingularReducedStep {
                dt,
                hint: format!(
                    "an eigenvalue of K̂ lies within {closest:.3e} of 1/dt = {:.3e}",
                    1.0 / dt
                ),
            });
        }
        Ok(Self { model, dt, lu })
    }

    pub fn model(&self) -> &ReducedModel {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Solves `(I - dt K̂) xhat_{n+1} = xhat_n + dt B̂ y_{n+1}`.
    pub fn step(&self, xhat_n: &DVector<f64>, y_next: &DVector<f64>) -> Result<DVector<f64>> {
        if xhat_n.len() != self.model.rank() || y_next.len() != self.model.n_boundary() {
            return Err(Error::InvalidArgument(format!(
                "reduced step expects state {} and input {}, got {} and {}",
                self.model.rank(),
                self.model.n_boundary(),
                xhat_n.len(),
                y_next.len()
            )));
        }
        let rhs = xhat_n + (&self.model.b_hat * y_next) * self.dt;
        let next = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularReducedStep {
                dt: self.dt,
                hint: "LU solve failed".into(),
            })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("reduced state became non-finite".into()));
        }
        Ok(next)
    }
}

/// One reduced backward Euler step; factors `I - dt K̂` on every call.
pub fn rom_step(model: &ReducedModel, xhat_n: &DVector<f64>, y_next: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    RomStepper::new(model.clone(), dt)?.step(xhat_n, y_next)
}

/// Full interior state `psi xhat + mean`.
pub fn reconstruct(model: &ReducedModel, xhat: &DVector<f64>) -> DVector<f64> {
    model.basis.lift(xhat)
}
