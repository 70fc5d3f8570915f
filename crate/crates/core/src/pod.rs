//! Snapshot matrices and truncated POD bases.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::Subdomain;

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Interior-state snapshots with the boundary values recorded alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    /// `N x tau` interior states, one column per time.
    pub x: DMatrix<f64>,
    pub times: Vec<f64>,
    /// `m x tau` boundary values (physical nodes, then Schwarz nodes).
    pub boundary: DMatrix<f64>,
    /// Grid node of each row of `x`.
    pub interior_nodes: Vec<usize>,
    /// Grid node of each row of `boundary`.
    pub boundary_nodes: Vec<usize>,
}

impl SnapshotSet {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Full-nodal matrix (`n_nodes x tau`) combining interior and boundary rows.
    pub fn full_nodal(&self) -> DMatrix<f64> {
        let n = self.interior_nodes.len() + self.boundary_nodes.len();
        let mut full = DMatrix::zeros(n, self.n_times());
        for (row, &node) in self.interior_nodes.iter().enumerate() {
            full.set_row(node, &self.x.row(row));
        }
        for (row, &node) in self.boundary_nodes.iter().enumerate() {
            full.set_row(node, &self.boundary.row(row));
        }
        full
    }

    /// Splits a full-nodal matrix into interior and boundary rows.
    pub fn from_full_nodal(
        full: &DMatrix<f64>,
        times: Vec<f64>,
        interior_nodes: Vec<usize>,
        boundary_nodes: Vec<usize>,
    ) -> Result<Self> {
        if full.ncols() != times.len() {
            return Err(Error::InvalidArgument(format!(
                "{} snapshot columns but {} time stamps",
                full.ncols(),
                times.len()
            )));
        }
        if let Some(&bad) = interior_nodes
            .iter()
            .chain(&boundary_nodes)
            .find(|&&n| n >= full.nrows())
        {
            return Err(Error::InvalidArgument(format!(
                "node {bad} outside snapshot matrix with {} rows",
                full.nrows()
            )));
        }
        Ok(Self {
            x: full.select_rows(&interior_nodes),
            boundary: full.select_rows(&boundary_nodes),
            times,
            interior_nodes,
            boundary_nodes,
        })
    }

    /// Subdomain-local snapshots read from a monolithic full-nodal history.
    ///
    /// Rows follow the subdomain's local ordering: interior nodes, and for the
    /// boundary the physical nodes followed by the Schwarz nodes.
    pub fn restrict(full: &DMatrix<f64>, times: &[f64], sub: &Subdomain) -> Result<Self> {
        let interior: Vec<usize> = sub.partition.interior.iter().map(|&l| sub.parent_of[l]).collect();
        let boundary: Vec<usize> = sub
            .partition
            .boundary()
            .iter()
            .map(|&l| sub.parent_of[l])
            .collect();
        let global = Self::from_full_nodal(full, times.to_vec(), interior, boundary)?;
        Ok(Self {
            interior_nodes: sub.partition.interior.clone(),
            boundary_nodes: sub.partition.boundary(),
            ..global
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis {
    /// Temporal mean of the training snapshots (zero when centering is off).
    pub mean: DVector<f64>,
    /// `N x r` orthonormal basis.
    pub psi: DMatrix<f64>,
    /// Nonzero singular values of the training matrix, descending.
    pub singular_values: Vec<f64>,
    pub centered: bool,
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.psi.ncols()
    }

    pub fn numerical_rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Reduced coordinates `psi^T (x - mean)`.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.psi.tr_mul(&(x - &self.mean))
    }

    /// Reduced coordinates of every column of `x`.
    pub fn project_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        self.psi.tr_mul(&centered)
    }

    /// `psi * xhat + mean`.
    pub fn lift(&self, xhat: &DVector<f64>) -> DVector<f64> {
        &self.psi * xhat + &self.mean
    }
}

/// What to do when more modes are requested than the training data support.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RankPolicy {
    /// Requests beyond the numerical rank are an error.
    #[default]
    Strict,
    /// Modes beyond the numerical rank are filled with the remaining left
    /// singular vectors (orthonormal, carrying no data energy), up to
    /// `min(N, n_train)` modes in total.
    Pad,
}

impl RankPolicy {
    pub fn name(self) -> &'static str {
        match self {
            RankPolicy::Strict => "strict",
            RankPolicy::Pad => "pad",
        }
    }
}

impl fmt::Display for RankPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(RankPolicy::Strict),
            "pad" => Ok(RankPolicy::Pad),
            other => Err(Error::Config(format!("unknown rank policy `{other}` (expected strict or pad)"))),
        }
    }
}

/// Truncated POD basis of the first `n_train` snapshot columns.
pub fn pod_basis(snaps: &SnapshotSet, r: usize, centering: bool, n_train: usize) -> Result<PodBasis> {
    pod_basis_with(snaps, r, centering, n_train, RankPolicy::Strict)
}

/// [`pod_basis`] with an explicit policy for `r` beyond the numerical rank.
pub fn pod_basis_with(
    snaps: &SnapshotSet,
    r: usize,
    centering: bool,
    n_train: usize,
    policy: RankPolicy,
) -> Result<PodBasis> {
    let (n, tau) = snaps.x.shape();
    if n_train == 0 || n_train > tau {
        return Err(Error::InvalidArgument(format!(
            "training window {n_train} must lie in 1..={tau}"
        )));
    }
    if r == 0 || r > n.min(n_train) {
        return Err(Error::InvalidArgument(format!(
            "basis size {r} must lie in 1..={}",
            n.min(n_train)
        )));
    }
    let mut train = snaps.x.columns(0, n_train).into_owned();
    let mean = if centering {
        train.column_mean()
    } else {
        DVector::zeros(n)
    };
    for mut col in train.column_iter_mut() {
        col -= &mean;
    }

    let svd = train.svd(true, false);
    let u = svd.u.as_ref().ok_or_else(|| Error::Solver("SVD did not return U".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let cutoff = sigma.first().copied().unwrap_or(0.0) * RANK_TOLERANCE;
    let rank = sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
    if r > rank && (policy == RankPolicy::Strict || rank == 0) {
        return Err(Error::RankExceeded { requested: r, rank });
    }

    let mut psi = DMatrix::zeros(n, r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        let mut col = u.column(src).into_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        psi.set_column(dst, &col);
    }
    Ok(PodBasis {
        mean,
        psi,
        singular_values: sigma[..rank].to_vec(),
        centered: centering,
    })
}

/// `||X - psi psi^T X||_F / ||X||_F` over every snapshot column, centered with the basis mean.
pub fn projection_error(snaps: &SnapshotSet, basis: &PodBasis) -> Result<f64> {
    if snaps.x.nrows() != basis.psi.nrows() {
        return Err(Error::InvalidArgument(format!(
            "snapshots have {} rows, basis has {}",
            snaps.x.nrows(),
            basis.psi.nrows()
        )));
    }
    let mut centered = snaps.x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &basis.mean;
    }
    let norm = centered.norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm("snapshot matrix has zero Frobenius norm".into()));
    }
    let coeffs = basis.psi.tr_mul(&centered);
    let residual = &centered - &basis.psi * coeffs;
    Ok(residual.norm() / norm)
}

/// Fraction of squared singular-value energy captured by the leading `r` modes.
pub fn energy_fraction(basis: &PodBasis, r: usize) -> f64 {
    energy_fraction_of(&basis.singular_values, r)
}

pub fn energy_fraction_of(singular_values: &[f64], r: usize) -> f64 {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    let head: f64 = singular_values.iter().take(r).map(|s| s * s).sum();
    head / total
}

/// Smallest rank whose energy fraction reaches `threshold`.
pub fn rank_for_energy(singular_values: &[f64], threshold: f64) -> Option<usize> {
    (1..=singular_values.len()).find(|&r| energy_fraction_of(singular_values, r) >= threshold)
}
