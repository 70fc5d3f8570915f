//! Overlapping multiplicative Schwarz coupling of finite-element models and
//! operator-inference reduced models for the 2D heat equation.
//!
//! The pipeline is: build a [`mesh::StructuredGrid`], solve the monolithic
//! problem with [`fem`], compress its snapshots with [`pod`], learn reduced
//! operators with [`opinf`], and couple any mix of full and reduced
//! subdomain models through [`schwarz`]. [`metrics`] compares the merged
//! result against the monolithic reference.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod opinf;
pub mod pod;
pub mod schwarz;

pub use config::{ExperimentConfig, Problem};
pub use error::{Error, Result};
pub use fem::{BoundaryCondition, FemOperators, FemStepper, SideValue, StateVector};
pub use mesh::{build_grid, DecompositionConfig, Layout, Rect, StructuredGrid, Subdomain};
pub use metrics::{relative_error_series, ErrorSeries, RunStats};
pub use opinf::{ReducedModel, RomStepper};
pub use pod::{PodBasis, SnapshotSet};
pub use schwarz::{run_coupled, CoupledProblem, CoupledRun, CoupledSpec, ModelKind, RomOptions, SchwarzConfig};
