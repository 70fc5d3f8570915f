//! Multiplicative (alternating) Schwarz coupling of FOM and ROM subdomains.
//!
//! Within each time interval `[t_n, t_{n+1}]` the subdomains are visited in
//! ascending order; each visit refreshes its boundary vector `y_i` (physical
//! data at `t_{n+1}`, transmission data from the neighbors' latest iterates)
//! and re-solves one implicit step from its `t_n` state. Sweeps repeat until
//! both the absolute and relative iterate differences fall below tolerance.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{self, BoundaryCondition, FemStepper, Ordering, StateVector};
use crate::mesh::{DecompositionConfig, Layout, Side, StructuredGrid, Subdomain};
use crate::opinf::{ReducedModel, RomStepper};
use crate::pod::{self, RankPolicy, SnapshotSet};

/// Norm below which a subdomain's relative term falls back to its absolute term.
pub const RELATIVE_GUARD: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchwarzConfig {
    pub delta_abs: f64,
    pub delta_rel: f64,
    pub max_sweeps: usize,
}

impl Default for SchwarzConfig {
    fn default() -> Self {
        Self {
            delta_abs: 1e-10,
            delta_rel: 1e-10,
            max_sweeps: 100,
        }
    }
}

impl SchwarzConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_abs > 0.0 && self.delta_rel > 0.0) || self.max_sweeps == 0 {
            return Err(Error::InvalidArgument(format!(
                "Schwarz tolerances must be positive and max_sweeps >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Which model runs on a subdomain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Fom,
    Rom,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fom => "fom",
            ModelKind::Rom => "rom",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fom" | "fe" => Ok(ModelKind::Fom),
            "rom" | "opinf" => Ok(ModelKind::Rom),
            other => Err(Error::Config(format!("unknown model kind `{other}` (fom|rom)"))),
        }
    }
}

#[derive(Clone, Debug)]
enum LocalSolver {
    Fom(Arc<FemStepper>),
    Rom(Arc<RomStepper>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Interior(usize),
    Boundary(usize),
}

/// Where a Schwarz value comes from: supplier subdomain and its local node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct GammaSource {
    slot: usize,
    supplier: usize,
    supplier_node: usize,
}

/// A subdomain together with its solver and current state.
#[derive(Clone, Debug)]
pub struct SubdomainModel {
    pub subdomain: Arc<Subdomain>,
    solver: LocalSolver,
    /// Interior values (FOM) or reduced coordinates (ROM).
    state: DVector<f64>,
    /// Current boundary vector, physical values then Schwarz values.
    boundary: DVector<f64>,
    roles: Vec<Role>,
    physical_sides: Vec<Side>,
    gamma_sources: Vec<GammaSource>,
}

impl SubdomainModel {
    pub fn kind(&self) -> ModelKind {
        match self.solver {
            LocalSolver::Fom(_) => ModelKind::Fom,
            LocalSolver::Rom(_) => ModelKind::Rom,
        }
    }

    pub fn fom(subdomain: Arc<Subdomain>, stepper: Arc<FemStepper>, grid: &StructuredGrid) -> Result<Self> {
        if stepper.ops().interior_map != subdomain.partition.interior
            || stepper.ops().boundary_map != subdomain.partition.boundary()
        {
            return Err(Error::Invariant("FE operator ordering differs from subdomain partition".into()));
        }
        Self::build(subdomain, LocalSolver::Fom(stepper), grid)
    }

    pub fn rom(subdomain: Arc<Subdomain>, stepper: Arc<RomStepper>, grid: &StructuredGrid) -> Result<Self> {
        if stepper.model().boundary_nodes != subdomain.partition.boundary() {
            return Err(Error::Invariant(
                "reduced model boundary ordering differs from subdomain partition".into(),
            ));
        }
        if stepper.model().basis.psi.nrows() != subdomain.partition.interior.len() {
            return Err(Error::Invariant("reduced basis row count differs from interior count".into()));
        }
        Self::build(subdomain, LocalSolver::Rom(stepper), grid)
    }

    fn build(subdomain: Arc<Subdomain>, solver: LocalSolver, grid: &StructuredGrid) -> Result<Self> {
        let n_local = subdomain.local_grid.n_nodes();
        let mut roles = vec![Role::Interior(usize::MAX); n_local];
        for (k, &n) in subdomain.partition.interior.iter().enumerate() {
            roles[n] = Role::Interior(k);
        }
        for (k, &n) in subdomain.partition.boundary().iter().enumerate() {
            roles[n] = Role::Boundary(k);
        }
        let physical_sides = subdomain
            .partition
            .physical
            .iter()
            .map(|&l| {
                grid.side_of[subdomain.parent_of[l]]
                    .ok_or_else(|| Error::Invariant(format!("physical node {l} has no side tag")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n_interior = subdomain.partition.interior.len();
        let n_boundary = physical_sides.len() + subdomain.partition.schwarz.len();
        let state_len = match &solver {
            LocalSolver::Fom(_) => n_interior,
            LocalSolver::Rom(s) => s.model().rank(),
        };
        Ok(Self {
            subdomain,
            solver,
            state: DVector::zeros(state_len),
            boundary: DVector::zeros(n_boundary),
            roles,
            physical_sides,
            gamma_sources: Vec::new(),
        })
    }

    /// Sets the state at `t = 0` from a full-nodal initial condition on the parent grid.
    ///
    /// ROM states are projected onto the basis. The boundary vector takes the
    /// physical data at `t0` and the initial condition on the Schwarz nodes.
    pub fn initialize(&mut self, ic: &StateVector, bc: &BoundaryCondition, t0: f64) -> Result<()> {
        if ic.ordering != Ordering::FullNodal {
            return Err(Error::InvalidArgument("initial condition must be full-nodal".into()));
        }
        let sub = &self.subdomain;
        let interior = DVector::from_iterator(
            sub.partition.interior.len(),
            sub.partition.interior.iter().map(|&l| ic.values[sub.parent_of[l]]),
        );
        self.state = match &self.solver {
            LocalSolver::Fom(_) => interior,
            LocalSolver::Rom(s) => s.model().basis.project(&interior),
        };
        let n_phys = self.physical_sides.len();
        for (k, &side) in self.physical_sides.iter().enumerate() {
            self.boundary[k] = bc.value(side, t0);
        }
        for (k, &l) in sub.partition.schwarz.iter().enumerate() {
            self.boundary[n_phys + k] = ic.values[sub.parent_of[l]];
        }
        Ok(())
    }

    /// Raw state: interior values for a FOM, reduced coordinates for a ROM.
    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn boundary_values(&self) -> &DVector<f64> {
        &self.boundary
    }

    /// Interior values in full (grid) coordinates.
    pub fn interior_values(&self) -> DVector<f64> {
        match &self.solver {
            LocalSolver::Fom(_) => self.state.clone(),
            LocalSolver::Rom(s) => s.model().basis.lift(&self.state),
        }
    }

    /// Current value at a local grid node.
    pub fn value_at_local(&self, local: usize) -> f64 {
        match self.roles[local] {
            Role::Boundary(k) => self.boundary[k],
            Role::Interior(k) => match &self.solver {
                LocalSolver::Fom(_) => self.state[k],
                LocalSolver::Rom(s) => {
                    let basis = &s.model().basis;
                    basis.psi.row(k).dot(&self.state.transpose()) + basis.mean[k]
                }
            },
        }
    }

    fn dt(&self) -> f64 {
        match &self.solver {
            LocalSolver::Fom(s) => s.dt(),
            LocalSolver::Rom(s) => s.dt(),
        }
    }

    /// Captures the `t_n` data every sweep restarts from; the boundary
    /// vector still holds the `t_n` values here.
    fn interval_start(&self) -> Result<IntervalStart> {
        Ok(match &self.solver {
            LocalSolver::Fom(s) => IntervalStart::Fom(s.mass_rhs(&self.state, &self.boundary)?),
            LocalSolver::Rom(_) => IntervalStart::Rom(self.state.clone()),
        })
    }

    fn solve_from(&self, start: &IntervalStart) -> Result<DVector<f64>> {
        match (&self.solver, start) {
            (LocalSolver::Fom(s), IntervalStart::Fom(rhs)) => s.solve_from_mass_rhs(rhs, &self.boundary),
            (LocalSolver::Rom(s), IntervalStart::Rom(x)) => s.step(x, &self.boundary),
            _ => Err(Error::Invariant("interval start does not match solver".into())),
        }
    }
}

enum IntervalStart {
    Fom(DVector<f64>),
    Rom(DVector<f64>),
}

/// Values a supplier holds at the given parent-grid nodes.
///
/// Nodes interior to the supplier read its (reconstructed) state; nodes on
/// the supplier's own boundary read its current boundary vector.
pub fn sample_gamma(supplier: &SubdomainModel, grid: &StructuredGrid, gamma_parent_nodes: &[usize]) -> Result<Vec<f64>> {
    gamma_parent_nodes
        .iter()
        .map(|&p| {
            supplier
                .subdomain
                .local_of_parent(grid, p)
                .map(|l| supplier.value_at_local(l))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "Schwarz node {p} is not a node of subdomain {} (non-conformal input)",
                        supplier.subdomain.id + 1
                    ))
                })
        })
        .collect()
}

/// Supplier for a Schwarz node visited at position `me` of an ascending sweep:
/// the candidate updated most recently.
fn most_recent_supplier(me: usize, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut before = None;
    let mut after = None;
    for c in candidates {
        if c < me {
            before = before.max(Some(c));
        } else if c > me {
            after = after.max(Some(c));
        }
    }
    before.or(after)
}

/// Resolves, once, where every Schwarz value of every model comes from.
pub fn link_models(models: &mut [SubdomainModel], grid: &StructuredGrid) -> Result<()> {
    let subs: Vec<Arc<Subdomain>> = models.iter().map(|m| m.subdomain.clone()).collect();
    for (i, model) in models.iter_mut().enumerate() {
        let sub = &subs[i];
        let n_phys = sub.partition.physical.len();
        let mut sources = Vec::with_capacity(sub.partition.schwarz.len());
        for (k, &l) in sub.partition.schwarz.iter().enumerate() {
            let supplier = most_recent_supplier(i, sub.suppliers_of(l)).ok_or_else(|| {
                Error::Invariant(format!("Schwarz node {l} of subdomain {} has no supplier", i + 1))
            })?;
            let target = subs.get(supplier).ok_or_else(|| {
                Error::Config(format!("subdomain {} names missing neighbor {}", i + 1, supplier + 1))
            })?;
            let parent = sub.parent_of[l];
            let supplier_node = target.local_of_parent(grid, parent).ok_or_else(|| {
                Error::Config(format!(
                    "Schwarz node {parent} of subdomain {} is not a node of subdomain {}",
                    i + 1,
                    supplier + 1
                ))
            })?;
            sources.push(GammaSource {
                slot: n_phys + k,
                supplier,
                supplier_node,
            });
        }
        model.gamma_sources = sources;
    }
    Ok(())
}

/// Absolute and relative iterate differences summed over subdomains.
pub fn convergence_measures(previous: &[DVector<f64>], current: &[DVector<f64>]) -> (f64, f64) {
    let mut abs2 = 0.0;
    let mut rel2 = 0.0;
    for (prev, curr) in previous.iter().zip(current) {
        // plain left-to-right sums so the reported values are reproducible
        // from the iterates alone
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for (c, p) in curr.iter().zip(prev.iter()) {
            let d = c - p;
            diff2 += d * d;
            norm2 += c * c;
        }
        abs2 += diff2;
        rel2 += if norm2.sqrt() < RELATIVE_GUARD {
            diff2
        } else {
            diff2 / norm2
        };
    }
    (abs2.sqrt(), rel2.sqrt())
}

/// Outcome of one converged time interval.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub sweeps: usize,
    /// `(eps_abs, eps_rel)` after each sweep.
    pub history: Vec<(f64, f64)>,
}

/// Advances all models from `t_n` to `t_n + dt`.
pub fn schwarz_time_step(
    models: &mut [SubdomainModel],
    t_n: f64,
    dt: f64,
    bc: &BoundaryCondition,
    cfg: &SchwarzConfig,
) -> Result<StepReport> {
    schwarz_time_step_traced(models, t_n, dt, bc, cfg, None)
}

/// As [`schwarz_time_step`], optionally recording the lifted (full-order)
/// interior iterates of every sweep (index 0 holds the `t_n` states).
pub fn schwarz_time_step_traced(
    models: &mut [SubdomainModel],
    t_n: f64,
    dt: f64,
    bc: &BoundaryCondition,
    cfg: &SchwarzConfig,
    mut trace: Option<&mut Vec<Vec<DVector<f64>>>>,
) -> Result<StepReport> {
    if let Some(m) = models.iter().find(|m| m.dt() != dt) {
        return Err(Error::InvalidArgument(format!(
            "subdomain {} was factored for dt = {}, not {dt}",
            m.subdomain.id + 1,
            m.dt()
        )));
    }
    let t_next = t_n + dt;
    let starts = models
        .iter()
        .map(SubdomainModel::interval_start)
        .collect::<Result<Vec<_>>>()?;
    let mut previous: Vec<DVector<f64>> = models.iter().map(SubdomainModel::interior_values).collect();
    if let Some(t) = trace.as_deref_mut() {
        t.push(previous.clone());
    }
    for model in models.iter_mut() {
        for k in 0..model.physical_sides.len() {
            model.boundary[k] = bc.value(model.physical_sides[k], t_next);
        }
    }

    let mut history = Vec::new();
    for sweep in 1..=cfg.max_sweeps {
        for i in 0..models.len() {
            let updates: Vec<(usize, f64)> = models[i]
                .gamma_sources
                .iter()
                .map(|s| (s.slot, models[s.supplier].value_at_local(s.supplier_node)))
                .collect();
            let model = &mut models[i];
            for (slot, v) in updates {
                model.boundary[slot] = v;
            }
            model.state = model.solve_from(&starts[i])?;
        }
        let current: Vec<DVector<f64>> = models.iter().map(SubdomainModel::interior_values).collect();
        let (eps_abs, eps_rel) = convergence_measures(&previous, &current);
        history.push((eps_abs, eps_rel));
        if let Some(t) = trace.as_deref_mut() {
            t.push(current.clone());
        }
        if eps_abs < cfg.delta_abs && eps_rel < cfg.delta_rel {
            return Ok(StepReport { sweeps: sweep, history });
        }
        previous = current;
    }
    let (last_abs, last_rel) = history.last().copied().unwrap_or((f64::NAN, f64::NAN));
    Err(Error::NonConvergence {
        time: t_next,
        max_sweeps: cfg.max_sweeps,
        last_abs,
        last_rel,
        history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Owner {
    Physical(Side),
    Subdomain { sub: usize, interior: usize },
}

/// Which model provides each global node of the merged field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergePlan {
    owners: Vec<Owner>,
}

impl MergePlan {
    /// Physical boundary nodes take the boundary data; every other node is
    /// owned by the subdomain that solves for it, overlap nodes going to the
    /// nearest subdomain center (lowest index on ties).
    pub fn new(grid: &StructuredGrid, subdomains: &[Arc<Subdomain>]) -> Result<Self> {
        let mut owners = Vec::with_capacity(grid.n_nodes());
        for p in 0..grid.n_nodes() {
            if let Some(side) = grid.side_of[p] {
                owners.push(Owner::Physical(side));
                continue;
            }
            let [x, y] = grid.nodes[p];
            let mut best: Option<(f64, Owner)> = None;
            for (s, sub) in subdomains.iter().enumerate() {
                let Some(local) = sub.local_of_parent(grid, p) else {
                    continue;
                };
                let Ok(k) = sub.partition.interior.binary_search(&local) else {
                    continue;
                };
                let d2 = (x - sub.center[0]).powi(2) + (y - sub.center[1]).powi(2);
                if best.is_none_or(|(bd, _)| d2 < bd) {
                    best = Some((d2, Owner::Subdomain { sub: s, interior: k }));
                }
            }
            let (_, owner) = best.ok_or_else(|| {
                Error::Invariant(format!("global node {p} is not solved by any subdomain"))
            })?;
            owners.push(owner);
        }
        Ok(Self { owners })
    }

    /// Subdomain index owning each global node, `None` for physical boundary nodes.
    pub fn owner_of(&self, node: usize) -> Option<usize> {
        match self.owners[node] {
            Owner::Physical(_) => None,
            Owner::Subdomain { sub, .. } => Some(sub),
        }
    }

    pub fn merge(&self, interiors: &[DVector<f64>], bc: &BoundaryCondition, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.owners.len(),
            self.owners.iter().map(|o| match *o {
                Owner::Physical(side) => bc.value(side, t),
                Owner::Subdomain { sub, interior } => interiors[sub][interior],
            }),
        )
    }
}

/// Single global field from the subdomain states at time `t`.
pub fn merge_solutions(
    models: &[SubdomainModel],
    grid: &StructuredGrid,
    bc: &BoundaryCondition,
    t: f64,
) -> Result<StateVector> {
    let subs: Vec<Arc<Subdomain>> = models.iter().map(|m| m.subdomain.clone()).collect();
    let plan = MergePlan::new(grid, &subs)?;
    let interiors: Vec<DVector<f64>> = models.iter().map(SubdomainModel::interior_values).collect();
    Ok(StateVector::full(plan.merge(&interiors, bc, t)))
}

/// ROM training settings, shared by all ROM subdomains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RomOptions {
    pub rank: usize,
    /// Number of training snapshots, counting the initial condition.
    pub n_train: usize,
    pub lambda: f64,
    pub centering: bool,
    pub rank_policy: RankPolicy,
}

impl Default for RomOptions {
    fn default() -> Self {
        Self {
            rank: 6,
            n_train: 30,
            lambda: crate::opinf::DEFAULT_LAMBDA,
            centering: true,
            rank_policy: RankPolicy::Strict,
        }
    }
}

/// Everything that defines a coupled run.
#[derive(Clone, Debug)]
pub struct CoupledSpec {
    pub grid: StructuredGrid,
    pub decomposition: DecompositionConfig,
    /// One entry per subdomain, in subdomain order.
    pub assignment: Vec<ModelKind>,
    pub schwarz: SchwarzConfig,
    pub bc: BoundaryCondition,
    pub ic: StateVector,
    pub dt: f64,
    pub t_final: f64,
    pub rom: RomOptions,
}

/// Offline products of a coupled run: subdomains, factored solvers, trained ROMs.
#[derive(Clone, Debug)]
pub struct CoupledProblem {
    pub spec: CoupledSpec,
    pub subdomains: Vec<Arc<Subdomain>>,
    initial: Vec<SubdomainModel>,
    merge_plan: MergePlan,
    /// Projection error of each ROM subdomain's basis (None for FOM subdomains).
    pub projection_errors: Vec<Option<f64>>,
    /// Singular values of each ROM subdomain's training matrix.
    pub singular_values: Vec<Option<Vec<f64>>>,
    steps: usize,
}

impl CoupledProblem {
    /// Offline phase. `training` is the monolithic snapshot set; it is
    /// required as soon as one subdomain runs a ROM.
    pub fn prepare(spec: CoupledSpec, training: Option<&SnapshotSet>) -> Result<Self> {
        spec.schwarz.validate()?;
        let steps = fem::step_count(spec.dt, spec.t_final)?;
        let subdomains: Vec<Arc<Subdomain>> = crate::mesh::decompose(&spec.grid, spec.decomposition)?
            .into_iter()
            .map(Arc::new)
            .collect();
        if spec.assignment.len() != subdomains.len() {
            return Err(Error::Config(format!(
                "{} layout has {} subdomains but {} model assignments were given",
                spec.decomposition.layout,
                subdomains.len(),
                spec.assignment.len()
            )));
        }
        if spec.ic.len() != spec.grid.n_nodes() || spec.ic.ordering != Ordering::FullNodal {
            return Err(Error::InvalidArgument(format!(
                "initial condition must be full-nodal with {} entries",
                spec.grid.n_nodes()
            )));
        }
        let needs_training = spec.assignment.contains(&ModelKind::Rom);
        let full_training = match (needs_training, training) {
            (false, _) => None,
            (true, None) => {
                return Err(Error::Config(
                    "ROM subdomains need monolithic training snapshots".into(),
                ))
            }
            (true, Some(snaps)) => {
                if snaps.n_times() != steps + 1 {
                    return Err(Error::Config(format!(
                        "training snapshots hold {} times, the run needs {}",
                        snaps.n_times(),
                        steps + 1
                    )));
                }
                let full = snaps.full_nodal();
                if full.nrows() != spec.grid.n_nodes() {
                    return Err(Error::Config(format!(
                        "training snapshots have {} nodes, grid has {}",
                        full.nrows(),
                        spec.grid.n_nodes()
                    )));
                }
                Some((full, snaps.times.clone()))
            }
        };

        let mut models = Vec::with_capacity(subdomains.len());
        let mut projection_errors = Vec::with_capacity(subdomains.len());
        let mut singular_values = Vec::with_capacity(subdomains.len());
        for (sub, &kind) in subdomains.iter().zip(&spec.assignment) {
            let model = match kind {
                ModelKind::Fom => {
                    projection_errors.push(None);
                    singular_values.push(None);
                    let ops = fem::assemble(&sub.local_grid, &sub.partition)?;
                    let stepper = Arc::new(FemStepper::new(ops, spec.dt)?);
                    SubdomainModel::fom(sub.clone(), stepper, &spec.grid)?
                }
                ModelKind::Rom => {
                    let (full, times) = full_training.as_ref().expect("checked above");
                    let local = SnapshotSet::restrict(full, times, sub)?;
                    let basis = pod::pod_basis_with(
                        &local,
                        spec.rom.rank,
                        spec.rom.centering,
                        spec.rom.n_train,
                        spec.rom.rank_policy,
                    )?;
                    projection_errors.push(Some(pod::projection_error(&local, &basis)?));
                    singular_values.push(Some(basis.singular_values.clone()));
                    let rom = ReducedModel::train(&local, basis, spec.rom.n_train, spec.dt, spec.rom.lambda)?;
                    let stepper = Arc::new(rom.stepper(spec.dt)?);
                    SubdomainModel::rom(sub.clone(), stepper, &spec.grid)?
                }
            };
            models.push(model);
        }
        link_models(&mut models, &spec.grid)?;
        for m in &mut models {
            m.initialize(&spec.ic, &spec.bc, 0.0)?;
        }
        let merge_plan = MergePlan::new(&spec.grid, &subdomains)?;
        Ok(Self {
            spec,
            subdomains,
            initial: models,
            merge_plan,
            projection_errors,
            singular_values,
            steps,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn merge_plan(&self) -> &MergePlan {
        &self.merge_plan
    }

    /// Models initialized at `t = 0`.
    pub fn initial_models(&self) -> Vec<SubdomainModel> {
        self.initial.clone()
    }

    /// Online phase; only the time loop is timed.
    pub fn run(&self) -> Result<CoupledRun> {
        let spec = &self.spec;
        let times = fem::time_grid(spec.dt, self.steps);
        let mut models = self.initial.clone();
        let mut merged = DMatrix::zeros(spec.grid.n_nodes(), times.len());
        let mut sweeps = Vec::with_capacity(self.steps);
        let mut final_eps = Vec::with_capacity(self.steps);

        let start = Instant::now();
        let mut ic = spec.ic.values.clone();
        for &b in &spec.grid.boundary_nodes() {
            ic[b] = spec.bc.value(spec.grid.side_of[b].expect("boundary node"), times[0]);
        }
        merged.set_column(0, &ic);
        let mut interiors = Vec::with_capacity(models.len());
        for p in 1..times.len() {
            let report = schwarz_time_step(&mut models, times[p - 1], spec.dt, &spec.bc, &spec.schwarz)?;
            interiors.clear();
            interiors.extend(models.iter().map(SubdomainModel::interior_values));
            merged.set_column(p, &self.merge_plan.merge(&interiors, &spec.bc, times[p]));
            sweeps.push(report.sweeps);
            final_eps.push(*report.history.last().expect("at least one sweep"));
        }
        let online_seconds = start.elapsed().as_secs_f64();

        Ok(CoupledRun {
            times,
            merged,
            sweeps,
            final_eps,
            online_seconds,
            layout: spec.decomposition.layout,
            overlap: spec.decomposition.overlap,
            assignment: spec.assignment.clone(),
            rom: spec.rom,
        })
    }

    /// Runs the online phase `repeats` times and averages the wall clock.
    pub fn run_repeated(&self, repeats: usize) -> Result<CoupledRun> {
        let mut run = self.run()?;
        let mut total = run.online_seconds;
        for _ in 1..repeats.max(1) {
            total += self.run()?.online_seconds;
        }
        run.online_seconds = total / repeats.max(1) as f64;
        Ok(run)
    }
}

/// Offline setup followed by the online Schwarz time loop.
pub fn run_coupled(spec: CoupledSpec, training: Option<&SnapshotSet>) -> Result<CoupledRun> {
    CoupledProblem::prepare(spec, training)?.run()
}

/// Results of the online phase.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledRun {
    pub times: Vec<f64>,
    /// Global full-nodal solution, one column per time.
    pub merged: DMatrix<f64>,
    /// Sweeps per time step (`tau - 1` entries).
    pub sweeps: Vec<usize>,
    /// Converged `(eps_abs, eps_rel)` per time step.
    pub final_eps: Vec<(f64, f64)>,
    pub online_seconds: f64,
    pub layout: Layout,
    pub overlap: usize,
    pub assignment: Vec<ModelKind>,
    pub rom: RomOptions,
}

impl CoupledRun {
    pub fn average_sweeps(&self) -> f64 {
        if self.sweeps.is_empty() {
            return 0.0;
        }
        self.sweeps.iter().sum::<usize>() as f64 / self.sweeps.len() as f64
    }
}
