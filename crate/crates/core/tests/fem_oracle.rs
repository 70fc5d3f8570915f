//! The sparse lifted backward Euler step against an independent dense
//! full-nodal solve with Dirichlet rows replaced by the boundary data.

use nalgebra::{DMatrix, DVector};
use opinf_schwarz::fem::{self, BoundaryCondition, FemStepper, Lifting, StateVector};
use opinf_schwarz::mesh::{build_grid, NodePartition, Rect, StructuredGrid};
use proptest::prelude::*;

/// Dense full-nodal mass and stiffness. Stiffness from constant P1 gradients,
/// mass from the edge-midpoint rule (exact for products of linears).
fn dense_operators(grid: &StructuredGrid) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = grid.n_nodes();
    let mut m = DMatrix::zeros(n, n);
    let mut a = DMatrix::zeros(n, n);
    for tri in &grid.triangles {
        let p: Vec<[f64; 2]> = tri.iter().map(|&k| grid.nodes[k]).collect();
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = 0.5 * det.abs();
        // gradient of the hat function at vertex k: rotate the opposite edge
        let grads: Vec<[f64; 2]> = (0..3)
            .map(|k| {
                let (b, c) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                [(b[1] - c[1]) / det, (c[0] - b[0]) / det]
            })
            .collect();
        // barycentric values at the three edge midpoints
        let mids = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                let (gi, gj) = (tri[i], tri[j]);
                a[(gi, gj)] += area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                let q: f64 = mids.iter().map(|l| l[i] * l[j]).sum::<f64>() / 3.0;
                m[(gi, gj)] += area * q;
            }
        }
    }
    (m, a)
}

/// One backward Euler step on the full nodal vector `u_n`.
fn dense_step(m: &DMatrix<f64>, a: &DMatrix<f64>, boundary: &[usize], u_n: &DVector<f64>, g_next: &[f64], dt: f64) -> DVector<f64> {
    let mut lhs = m + a * dt;
    let mut rhs = m * u_n;
    for (&b, &v) in boundary.iter().zip(g_next) {
        lhs.row_mut(b).fill(0.0);
        lhs[(b, b)] = 1.0;
        rhs[b] = v;
    }
    lhs.lu().solve(&rhs).expect("nonsingular")
}

fn monolithic_partition(grid: &StructuredGrid) -> NodePartition {
    NodePartition {
        interior: grid.interior_nodes(),
        physical: grid.boundary_nodes(),
        schwarz: Vec::new(),
    }
}

fn compare_trajectory(nx: usize, ny: usize, bc: BoundaryCondition, steps: usize, dt: f64) -> f64 {
    let grid = build_grid(nx, ny, Rect::new(-1.0, 1.0, -1.0, 1.0)).unwrap();
    let part = monolithic_partition(&grid);
    let ops = fem::assemble(&grid, &part).unwrap();
    let stepper = FemStepper::new(ops, dt).unwrap();
    let (m, a) = dense_operators(&grid);
    let interior = grid.interior_nodes();
    let boundary = grid.boundary_nodes();

    let mut u = DVector::zeros(grid.n_nodes());
    let g0 = bc.values_at(&grid, &boundary, 0.0).unwrap();
    for (&b, v) in boundary.iter().zip(g0.iter()) {
        u[b] = *v;
    }
    let mut x = StateVector::full(u.clone()).gather(&interior);
    let mut g_prev = g0;
    let mut worst: f64 = 0.0;
    for p in 1..=steps {
        let t = p as f64 * dt;
        let g_next = bc.values_at(&grid, &boundary, t).unwrap();
        x = stepper.step(&x, &g_prev, &g_next).unwrap();
        u = dense_step(&m, &a, &boundary, &u, g_next.as_slice(), dt);
        for (k, &n) in interior.iter().enumerate() {
            worst = worst.max((x[k] - u[n]).abs());
        }
        g_prev = g_next;
    }
    worst
}

#[test]
fn one_step_on_4x4_matches_dense_solve() {
    let err = compare_trajectory(4, 4, BoundaryCondition::static_case(), 1, 0.01);
    assert!(err <= 1e-12, "max deviation {err:e}");
}

#[test]
fn trajectories_on_small_grids_match_dense_solve() {
    for (nx, ny) in [(2, 2), (3, 5), (8, 8), (8, 4)] {
        for bc in [BoundaryCondition::static_case(), BoundaryCondition::time_varying_case()] {
            let err = compare_trajectory(nx, ny, bc, 20, 0.01);
            assert!(err <= 1e-12, "{nx}x{ny}: max deviation {err:e}");
        }
    }
}

#[test]
fn stiffness_only_lifting_differs_for_moving_boundary_data() {
    let grid = build_grid(6, 6, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
    let ops = fem::assemble(&grid, &monolithic_partition(&grid)).unwrap();
    let consistent = FemStepper::new(ops.clone(), 0.01).unwrap();
    let stiff_only = FemStepper::with_lifting(ops.clone(), 0.01, Lifting::StiffnessOnly).unwrap();
    let x = DVector::zeros(ops.n_interior());
    let g_n = DVector::zeros(ops.n_boundary());
    let g_next = DVector::from_element(ops.n_boundary(), 1.0);
    let a = consistent.step(&x, &g_n, &g_next).unwrap();
    let b = stiff_only.step(&x, &g_n, &g_next).unwrap();
    assert!((a - b).amax() > 1e-3);
    // identical when the boundary data do not move
    let a = consistent.step(&x, &g_next, &g_next).unwrap();
    let b = stiff_only.step(&x, &g_next, &g_next).unwrap();
    assert!((a - b).amax() <= 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constants_are_stationary(nx in 1usize..7, ny in 1usize..7, c in -10.0f64..10.0, dt in 1e-4f64..1.0) {
        let grid = build_grid(nx, ny, Rect::new(0.0, 2.0, -1.0, 0.5)).unwrap();
        let ops = fem::assemble(&grid, &monolithic_partition(&grid)).unwrap();
        let x = DVector::from_element(ops.n_interior(), c);
        let g = DVector::from_element(ops.n_boundary(), c);
        let next = fem::backward_euler_step(&ops, &x, &g, &g, dt).unwrap();
        for v in next.iter() {
            prop_assert!((v - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn energy_decays_with_homogeneous_data(
        nx in 2usize..8,
        ny in 2usize..8,
        seed in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let grid = build_grid(nx, ny, Rect::new(-1.0, 1.0, -1.0, 1.0)).unwrap();
        let ops = fem::assemble(&grid, &monolithic_partition(&grid)).unwrap();
        let stepper = FemStepper::new(ops.clone(), 0.05).unwrap();
        let (m, _) = dense_operators(&grid);
        let interior = grid.interior_nodes();
        let mii = m.select_rows(&interior).select_columns(&interior);
        let zero = DVector::zeros(ops.n_boundary());
        let mut x = DVector::from_fn(ops.n_interior(), |k, _| seed[k % seed.len()]);
        let mut energy = (x.transpose() * &mii * &x)[(0, 0)];
        for _ in 0..10 {
            x = stepper.step(&x, &zero, &zero).unwrap();
            let e = (x.transpose() * &mii * &x)[(0, 0)];
            prop_assert!(e <= energy * (1.0 + 1e-12) + 1e-300);
            energy = e;
        }
    }
}

#[test]
fn dense_and_sparse_assembly_agree() {
    let grid = build_grid(5, 3, Rect::new(-1.0, 1.5, 0.0, 1.0)).unwrap();
    let ops = fem::assemble(&grid, &monolithic_partition(&grid)).unwrap();
    let (m, a) = dense_operators(&grid);
    let sparse_a = DMatrix::from(&ops.stiffness_full);
    let sparse_m = DMatrix::from(&ops.mass_full);
    assert!((sparse_a - a).amax() <= 1e-13);
    assert!((sparse_m - m).amax() <= 1e-14);
}
