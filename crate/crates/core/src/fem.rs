//! P1 finite elements for the heat equation `u_t - Δu = 0` with Dirichlet lifting.
//!
//! The semi-discrete system is kept in mass-matrix form
//! `M_ii x' = -A_ii x - A_ib g`, and backward Euler gives
//! `(M_ii + dt A_ii) x_{n+1} = M_ii x_n - dt A_ib g_{n+1}`.
//! The boundary time-derivative term `M_ib g'` is not included.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DMatrixViewMut, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::mesh::{NodePartition, Side, StructuredGrid};
use crate::pod::SnapshotSet;

/// Local P1 stiffness matrix of a triangle.
pub fn element_stiffness(p: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let area = signed_area(p);
    if area.abs() <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateElement { index: 0, area });
    }
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let scale = 1.0 / (4.0 * area.abs());
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) * scale;
        }
    }
    Ok(k)
}

/// Consistent P1 mass matrix `area/12 * [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn element_mass(p: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let area = signed_area(p).abs();
    if area <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateElement { index: 0, area });
    }
    let off = area / 12.0;
    let diag = 2.0 * off;
    Ok([[diag, off, off], [off, diag, off], [off, off, diag]])
}

fn signed_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

/// Assembled operators of one grid, split into interior and boundary blocks.
#[derive(Clone, Debug)]
pub struct FemOperators {
    pub mass_ii: CsrMatrix<f64>,
    pub stiff_ii: CsrMatrix<f64>,
    pub mass_ib: CsrMatrix<f64>,
    pub stiff_ib: CsrMatrix<f64>,
    /// Full node-numbered stiffness, kept for diagnostics.
    pub stiffness_full: CsrMatrix<f64>,
    pub mass_full: CsrMatrix<f64>,
    /// Local grid node of each interior unknown.
    pub interior_map: Vec<usize>,
    /// Local grid node of each boundary value: physical nodes, then Schwarz nodes.
    pub boundary_map: Vec<usize>,
}

impl FemOperators {
    pub fn n_interior(&self) -> usize {
        self.interior_map.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_map.len()
    }
}

pub fn assemble(grid: &StructuredGrid, partition: &NodePartition) -> Result<FemOperators> {
    let n = grid.n_nodes();
    let mut stiff = CooMatrix::new(n, n);
    let mut mass = CooMatrix::new(n, n);
    for (t, tri) in grid.triangles.iter().enumerate() {
        let p = tri.map(|v| grid.nodes[v]);
        let with_index = |e: Error| match e {
            Error::DegenerateElement { area, .. } => Error::DegenerateElement { index: t, area },
            other => other,
        };
        let ke = element_stiffness(p).map_err(with_index)?;
        let me = element_mass(p).map_err(with_index)?;
        for a in 0..3 {
            for b in 0..3 {
                stiff.push(tri[a], tri[b], ke[a][b]);
                mass.push(tri[a], tri[b], me[a][b]);
            }
        }
    }
    let stiffness_full = CsrMatrix::from(&stiff);
    let mass_full = CsrMatrix::from(&mass);

    let interior_map = partition.interior.clone();
    let boundary_map = partition.boundary();
    if interior_map.len() + boundary_map.len() != n {
        return Err(Error::Invariant(format!(
            "partition covers {} of {n} nodes",
            interior_map.len() + boundary_map.len()
        )));
    }
    // position of each grid node inside its block
    let mut slot = vec![Slot::Unset; n];
    for (k, &v) in interior_map.iter().enumerate() {
        slot[v] = Slot::Interior(k);
    }
    for (k, &v) in boundary_map.iter().enumerate() {
        if slot[v] != Slot::Unset {
            return Err(Error::Invariant(format!("node {v} classified twice")));
        }
        slot[v] = Slot::Boundary(k);
    }

    let ni = interior_map.len();
    let nb = boundary_map.len();
    let split = |full: &CsrMatrix<f64>| {
        let mut ii = CooMatrix::new(ni, ni);
        let mut ib = CooMatrix::new(ni, nb);
        for (r, c, &v) in full.triplet_iter() {
            if let Slot::Interior(ri) = slot[r] {
                match slot[c] {
                    Slot::Interior(ci) => ii.push(ri, ci, v),
                    Slot::Boundary(cb) => ib.push(ri, cb, v),
                    Slot::Unset => unreachable!(),
                }
            }
        }
        (CsrMatrix::from(&ii), CsrMatrix::from(&ib))
    };
    let (stiff_ii, stiff_ib) = split(&stiffness_full);
    let (mass_ii, mass_ib) = split(&mass_full);
    Ok(FemOperators {
        mass_ii,
        stiff_ii,
        mass_ib,
        stiff_ib,
        stiffness_full,
        mass_full,
        interior_map,
        boundary_map,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Unset,
    Interior(usize),
    Boundary(usize),
}

/// `y = a * x`.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let (offsets, cols, vals) = a.csr_data();
    for (r, out) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in offsets[r]..offsets[r + 1] {
            acc += vals[k] * x[cols[k]];
        }
        *out = acc;
    }
}

/// How the known boundary values enter the interior equations.
///
/// Lifting the weak form `(u - u_n, v) + dt (grad u, grad v) = 0` with
/// `u = x + g` gives `(M_ii + dt A_ii) x_{n+1} = M_ii x_n + M_ib g_n -
/// (M_ib + dt A_ib) g_{n+1}`. Dropping the two `M_ib` terms changes nothing
/// when the boundary data are constant in time, but on transmission
/// boundaries (whose values move every step) it leaves a residual
/// `M_ib (g_{n+1} - g_n)` that keeps coupled solutions away from the
/// monolithic one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Lifting {
    /// Keeps the boundary mass terms.
    #[default]
    Consistent,
    /// Boundary data enter only through `dt A_ib g_{n+1}`.
    StiffnessOnly,
}

/// Backward Euler integrator with `M_ii + dt A_ii` factored once.
pub struct FemStepper {
    ops: FemOperators,
    dt: f64,
    lifting: Lifting,
    factor: CscCholesky<f64>,
}

impl fmt::Debug for FemStepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FemStepper")
            .field("dt", &self.dt)
            .field("lifting", &self.lifting)
            .field("n_interior", &self.ops.n_interior())
            .finish()
    }
}

impl FemStepper {
    pub fn new(ops: FemOperators, dt: f64) -> Result<Self> {
        Self::with_lifting(ops, dt, Lifting::default())
    }

    pub fn with_lifting(ops: FemOperators, dt: f64, lifting: Lifting) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let mut system = CooMatrix::new(ops.n_interior(), ops.n_interior());
        for (r, c, &v) in ops.mass_ii.triplet_iter() {
            system.push(r, c, v);
        }
        for (r, c, &v) in ops.stiff_ii.triplet_iter() {
            system.push(r, c, dt * v);
        }
        let system = CscMatrix::from(&system);
        let factor = CscCholesky::factor(&system)
            .map_err(|e| Error::Solver(format!("Cholesky factorization of M + dt*A failed: {e:?}")))?;
        Ok(Self {
            ops,
            dt,
            lifting,
            factor,
        })
    }

    pub fn ops(&self) -> &FemOperators {
        &self.ops
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lifting(&self) -> Lifting {
        self.lifting
    }

    fn check_boundary(&self, g: &DVector<f64>) -> Result<()> {
        if g.len() != self.ops.n_boundary() {
            return Err(Error::InvalidArgument(format!(
                "boundary vector has length {}, expected {}",
                g.len(),
                self.ops.n_boundary()
            )));
        }
        Ok(())
    }

    /// The part of the right-hand side fixed during one time interval:
    /// `M_ii x_n + M_ib g_n`, or `M_ii x_n` without boundary mass terms.
    pub fn mass_rhs(&self, x_n: &DVector<f64>, g_n: &DVector<f64>) -> Result<DVector<f64>> {
        if x_n.len() != self.ops.n_interior() {
            return Err(Error::InvalidArgument(format!(
                "state has length {}, expected {}",
                x_n.len(),
                self.ops.n_interior()
            )));
        }
        self.check_boundary(g_n)?;
        let mut out = DVector::zeros(self.ops.n_interior());
        spmv(&self.ops.mass_ii, x_n.as_slice(), out.as_mut_slice());
        if self.lifting == Lifting::Consistent {
            let mut lift = vec![0.0; self.ops.n_interior()];
            spmv(&self.ops.mass_ib, g_n.as_slice(), &mut lift);
            for (o, l) in out.iter_mut().zip(&lift) {
                *o += l;
            }
        }
        Ok(out)
    }

    /// Solves one step given the precomputed [`FemStepper::mass_rhs`].
    pub fn solve_from_mass_rhs(&self, mass_rhs: &DVector<f64>, g_next: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_boundary(g_next)?;
        let n = self.ops.n_interior();
        let mut stiff = vec![0.0; n];
        spmv(&self.ops.stiff_ib, g_next.as_slice(), &mut stiff);
        let mut x: DVector<f64> = mass_rhs.clone();
        for (xi, si) in x.iter_mut().zip(&stiff) {
            *xi -= self.dt * si;
        }
        if self.lifting == Lifting::Consistent {
            let mut mass = vec![0.0; n];
            spmv(&self.ops.mass_ib, g_next.as_slice(), &mut mass);
            for (xi, mi) in x.iter_mut().zip(&mass) {
                *xi -= mi;
            }
        }
        self.factor
            .solve_mut(DMatrixViewMut::from_slice(x.as_mut_slice(), n, 1));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite backward Euler solution".into()));
        }
        Ok(x)
    }

    /// Advances `x_n` (with boundary values `g_n`) to the next time level
    /// with boundary values `g_next`.
    pub fn step(&self, x_n: &DVector<f64>, g_n: &DVector<f64>, g_next: &DVector<f64>) -> Result<DVector<f64>> {
        self.solve_from_mass_rhs(&self.mass_rhs(x_n, g_n)?, g_next)
    }
}

/// One backward Euler step with consistent lifting. Factors the system on
/// every call; use [`FemStepper`] when stepping repeatedly.
pub fn backward_euler_step(
    ops: &FemOperators,
    x_n: &DVector<f64>,
    g_n: &DVector<f64>,
    g_next: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    FemStepper::new(ops.clone(), dt)?.step(x_n, g_n, g_next)
}

/// Time profile of the Dirichlet data on one side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SideValue {
    Constant(f64),
    /// `q(t, mu) = 1 + 0.5 sin(2 pi mu t)`.
    Oscillating { mu: f64 },
}

impl SideValue {
    pub fn at(self, t: f64) -> f64 {
        match self {
            SideValue::Constant(c) => c,
            SideValue::Oscillating { mu } => oscillating_bc(t, mu),
        }
    }
}

pub fn oscillating_bc(t: f64, mu: f64) -> f64 {
    1.0 + 0.5 * (2.0 * std::f64::consts::PI * mu * t).sin()
}

impl fmt::Display for SideValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SideValue::Constant(c) => write!(f, "{c}"),
            SideValue::Oscillating { mu } => write!(f, "q:{mu}"),
        }
    }
}

impl FromStr for SideValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("invalid boundary value `{s}` (expected a number or q:<mu>)"));
        if let Some(mu) = s.strip_prefix("q:") {
            let mu = mu.trim().parse().map_err(|_| bad())?;
            Ok(SideValue::Oscillating { mu })
        } else {
            s.parse().map(SideValue::Constant).map_err(|_| bad())
        }
    }
}

/// Dirichlet data per side of the global rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub left: SideValue,
    pub right: SideValue,
    pub top: SideValue,
    pub bottom: SideValue,
}

impl BoundaryCondition {
    pub fn uniform(c: f64) -> Self {
        let v = SideValue::Constant(c);
        Self {
            left: v,
            right: v,
            top: v,
            bottom: v,
        }
    }

    /// Top = bottom = 0, left = 2, right = 5.
    pub fn static_case() -> Self {
        Self {
            left: SideValue::Constant(2.0),
            right: SideValue::Constant(5.0),
            top: SideValue::Constant(0.0),
            bottom: SideValue::Constant(0.0),
        }
    }

    /// Left = q(t, 2), top = q(t, 4), bottom = 5, right = 1.
    pub fn time_varying_case() -> Self {
        Self {
            left: SideValue::Oscillating { mu: 2.0 },
            right: SideValue::Constant(1.0),
            top: SideValue::Oscillating { mu: 4.0 },
            bottom: SideValue::Constant(5.0),
        }
    }

    pub fn value(&self, side: Side, t: f64) -> f64 {
        match side {
            Side::Left => self.left.at(t),
            Side::Right => self.right.at(t),
            Side::Top => self.top.at(t),
            Side::Bottom => self.bottom.at(t),
        }
    }

    /// Values at `t` for the given nodes of `grid`; every node must be tagged.
    pub fn values_at(&self, grid: &StructuredGrid, nodes: &[usize], t: f64) -> Result<DVector<f64>> {
        nodes
            .iter()
            .map(|&n| {
                grid.side_of[n]
                    .map(|side| self.value(side, t))
                    .ok_or_else(|| Error::Invariant(format!("node {n} is not on the boundary")))
            })
            .collect::<Result<Vec<_>>>()
            .map(DVector::from_vec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    Interior,
    FullNodal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub values: DVector<f64>,
    pub ordering: Ordering,
}

impl StateVector {
    pub fn full(values: DVector<f64>) -> Self {
        Self {
            values,
            ordering: Ordering::FullNodal,
        }
    }

    pub fn interior(values: DVector<f64>) -> Self {
        Self {
            values,
            ordering: Ordering::Interior,
        }
    }

    /// Nodal interpolation of `v(x, y)` on the grid.
    pub fn interpolate(grid: &StructuredGrid, v: impl Fn(f64, f64) -> f64) -> Self {
        Self::full(DVector::from_iterator(
            grid.n_nodes(),
            grid.nodes.iter().map(|p| v(p[0], p[1])),
        ))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gather(&self, nodes: &[usize]) -> DVector<f64> {
        DVector::from_iterator(nodes.len(), nodes.iter().map(|&n| self.values[n]))
    }
}

/// Number of steps `K` with `K * dt = t_final`.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0 && t_final > 0.0 && dt.is_finite() && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and T > 0, got dt = {dt}, T = {t_final}"
        )));
    }
    let k = (t_final / dt).round();
    if (k * dt - t_final).abs() > 1e-9 * t_final || k < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "T = {t_final} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(k as usize)
}

/// Time stamps `t_p = p dt`, `p = 0..=K`.
pub fn time_grid(dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|p| p as f64 * dt).collect()
}

/// Monolithic backward Euler run collecting `K + 1` snapshots, the first being the IC.
pub fn solve_monolithic(
    grid: &StructuredGrid,
    bc: &BoundaryCondition,
    ic: &StateVector,
    dt: f64,
    t_final: f64,
) -> Result<SnapshotSet> {
    let stepper = monolithic_stepper(grid, dt)?;
    solve_monolithic_with(&stepper, grid, bc, ic, dt, t_final).map(|(snaps, _)| snaps)
}

pub fn monolithic_stepper(grid: &StructuredGrid, dt: f64) -> Result<FemStepper> {
    let partition = NodePartition {
        interior: grid.interior_nodes(),
        physical: grid.boundary_nodes(),
        schwarz: Vec::new(),
    };
    FemStepper::new(assemble(grid, &partition)?, dt)
}

/// Runs the monolithic time loop with a prepared stepper and returns the
/// snapshots together with the wall-clock seconds of the loop alone.
pub fn solve_monolithic_with(
    stepper: &FemStepper,
    grid: &StructuredGrid,
    bc: &BoundaryCondition,
    ic: &StateVector,
    dt: f64,
    t_final: f64,
) -> Result<(SnapshotSet, f64)> {
    if ic.ordering != Ordering::FullNodal || ic.len() != grid.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "initial condition must be full-nodal with {} entries",
            grid.n_nodes()
        )));
    }
    let steps = step_count(dt, t_final)?;
    let times = time_grid(dt, steps);
    let ops = stepper.ops();
    let interior = ops.interior_map.clone();
    let boundary = ops.boundary_map.clone();
    let mut x = DMatrix::zeros(interior.len(), times.len());
    let mut g = DMatrix::zeros(boundary.len(), times.len());

    let start = std::time::Instant::now();
    let mut state = ic.gather(&interior);
    x.set_column(0, &state);
    // the boundary rows of the initial state carry the boundary data at t0
    let mut g_prev = bc.values_at(grid, &boundary, times[0])?;
    g.set_column(0, &g_prev);
    for p in 1..times.len() {
        let g_next = bc.values_at(grid, &boundary, times[p])?;
        state = stepper.step(&state, &g_prev, &g_next)?;
        x.set_column(p, &state);
        g.set_column(p, &g_next);
        g_prev = g_next;
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok((
        SnapshotSet {
            x,
            times,
            boundary: g,
            interior_nodes: interior,
            boundary_nodes: boundary,
        },
        seconds,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, Rect};
    use approx::assert_abs_diff_eq;

    const UNIT_TRI: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn monolithic_ops(grid: &StructuredGrid) -> FemOperators {
        let partition = NodePartition {
            interior: grid.interior_nodes(),
            physical: grid.boundary_nodes(),
            schwarz: vec![],
        };
        assemble(grid, &partition).unwrap()
    }

    fn dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(a.nrows(), a.ncols());
        for (r, c, &v) in a.triplet_iter() {
            d[(r, c)] += v;
        }
        d
    }

    #[test]
    fn unit_triangle_matrices() {
        let k = element_stiffness(UNIT_TRI).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k[i][j], expected[i][j], epsilon = 1e-15);
            }
        }
        let m = element_mass(UNIT_TRI).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert_abs_diff_eq!(m[i][j], e, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(element_stiffness(flat), Err(Error::DegenerateElement { .. })));
        assert!(matches!(element_mass(flat), Err(Error::DegenerateElement { .. })));
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let g = build_grid(2, 2, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        let ops = monolithic_ops(&g);
        let a = dense(&ops.stiffness_full);
        for r in 0..a.nrows() {
            assert!(a.row(r).sum().abs() <= 1e-12);
        }
    }

    #[test]
    fn blocks_are_symmetric_and_definite() {
        let g = build_grid(5, 4, Rect::new(-1.0, 2.0, 0.0, 1.0)).unwrap();
        let ops = monolithic_ops(&g);
        let m = dense(&ops.mass_ii);
        let a = dense(&ops.stiff_ii);
        assert!((&m - m.transpose()).amax() <= 1e-12);
        assert!((&a - a.transpose()).amax() <= 1e-12);
        assert!(m.clone().cholesky().is_some());
        let eig = a.symmetric_eigenvalues();
        assert!(eig.min() > -1e-12);
    }

    #[test]
    fn constants_are_preserved() {
        let g = build_grid(6, 5, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        let ops = monolithic_ops(&g);
        let c = 3.25;
        let x = DVector::from_element(ops.n_interior(), c);
        let gb = DVector::from_element(ops.n_boundary(), c);
        let next = backward_euler_step(&ops, &x, &gb, &gb, 0.01).unwrap();
        assert!(next.iter().all(|v| (v - c).abs() <= 1e-12));
        let stiff_only = FemStepper::with_lifting(ops.clone(), 0.01, Lifting::StiffnessOnly).unwrap();
        let next = stiff_only.step(&x, &gb, &gb).unwrap();
        assert!(next.iter().all(|v| (v - c).abs() <= 1e-12));

        let zero = backward_euler_step(
            &ops,
            &DVector::zeros(ops.n_interior()),
            &DVector::zeros(ops.n_boundary()),
            &DVector::zeros(ops.n_boundary()),
            0.01,
        )
        .unwrap();
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn rejects_bad_step_inputs() {
        let g = build_grid(3, 3, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        let ops = monolithic_ops(&g);
        let x = DVector::zeros(ops.n_interior());
        let gb = DVector::zeros(ops.n_boundary());
        assert!(backward_euler_step(&ops, &x, &gb, &gb, 0.0).is_err());
        assert!(backward_euler_step(&ops, &x, &gb, &DVector::zeros(3), 0.1).is_err());
        assert!(backward_euler_step(&ops, &x, &DVector::zeros(3), &gb, 0.1).is_err());
        assert!(backward_euler_step(&ops, &DVector::zeros(2), &gb, &gb, 0.1).is_err());
    }

    #[test]
    fn translation_invariance() {
        let a = build_grid(8, 8, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        let b = build_grid(8, 8, Rect::new(4.0, 5.0, -2.0, -1.0)).unwrap();
        let (oa, ob) = (monolithic_ops(&a), monolithic_ops(&b));
        assert_eq!(oa.stiffness_full.values(), ob.stiffness_full.values());
        for (x, y) in oa.mass_full.values().iter().zip(ob.mass_full.values()) {
            assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn bc_presets() {
        let bc = BoundaryCondition::time_varying_case();
        assert_abs_diff_eq!(bc.value(Side::Left, 0.125), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(bc.value(Side::Top, 0.0625), 1.5, epsilon = 1e-15);
        assert_eq!(bc.value(Side::Bottom, 0.3), 5.0);
        assert_eq!("q:2".parse::<SideValue>().unwrap(), SideValue::Oscillating { mu: 2.0 });
        assert_eq!("-1.5".parse::<SideValue>().unwrap(), SideValue::Constant(-1.5));
        assert!("q:".parse::<SideValue>().is_err());
        for v in [SideValue::Constant(0.1), SideValue::Oscillating { mu: 4.0 }] {
            assert_eq!(v.to_string().parse::<SideValue>().unwrap(), v);
        }
    }

    #[test]
    fn step_count_checks_divisibility() {
        assert_eq!(step_count(0.01, 1.0).unwrap(), 100);
        assert_eq!(step_count(0.25, 1.0).unwrap(), 4);
        assert!(step_count(0.3, 1.0).is_err());
        assert!(step_count(0.0, 1.0).is_err());
    }

    #[test]
    fn monolithic_snapshot_counts() {
        let g = build_grid(4, 4, Rect::new(-1.0, 1.0, -1.0, 1.0)).unwrap();
        let ic = StateVector::full(DVector::zeros(g.n_nodes()));
        let snaps = solve_monolithic(&g, &BoundaryCondition::static_case(), &ic, 0.01, 1.0).unwrap();
        assert_eq!(snaps.times.len(), 101);
        assert_eq!(snaps.x.ncols(), 101);
        assert_eq!(snaps.x.nrows(), 9);
        assert_eq!(snaps.boundary.nrows(), 16);

        let zero = solve_monolithic(&g, &BoundaryCondition::uniform(0.0), &ic, 0.1, 1.0).unwrap();
        assert_eq!(zero.x.amax(), 0.0);

        let c = StateVector::full(DVector::from_element(g.n_nodes(), 2.0));
        let steady = solve_monolithic(&g, &BoundaryCondition::uniform(2.0), &c, 0.1, 1.0).unwrap();
        assert!(steady.x.iter().all(|v| (v - 2.0).abs() <= 1e-12));
    }
}
