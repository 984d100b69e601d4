//! Shared helpers for the integration and acceptance suites: a tiny
//! fitted fixture and an independent dense monolithic solve of the coupled
//! system, used as the oracle for the Schur complement path.

#![allow(dead_code)]

use tideflow::assembly::{
    assemble_continuity_rhs, assemble_forcing, assemble_pressure_block, assemble_velocity_block,
    boundary_constraints, build_block_system, BlockSystem, ConvectionForm, VelocityBlockInputs,
};
use tideflow::fe::{interpolate_p2, mean_zero_project, CompositePressure, DofMapP2, P2Velocity};
use tideflow::geo::Vec2;
use tideflow::interface::assemble_interface_blocks;
use tideflow::mesh::{build_fitted_topology, FittedMesh, PhysParams};
use tideflow::mesher::{circle_polygon, generate_fitted, DomainSpec};
use tideflow::solver::{solve_step, CondensedInterfaceOp, SolverConfig};

pub fn tiny_fixture(phys: PhysParams) -> (FittedMesh, DofMapP2) {
    let k = 8;
    let gamma = circle_polygon(Vec2::ZERO, 0.5, k);
    let mut spec = DomainSpec::square2(0.55);
    spec.uniform = true;
    let (tri, ids) = generate_fitted(&spec, &gamma).unwrap();
    assert!(tri.n_triangles() <= 80, "fixture too large: {}", tri.n_triangles());
    let fm = build_fitted_topology(tri, ids, &phys).unwrap();
    let dm = DofMapP2::build(&fm.tri);
    (fm, dm)
}

/// Independent dense Gaussian elimination with partial pivoting; the
/// oracle deliberately avoids the crate's LU code path.
pub fn dense_solve(a: &mut Vec<Vec<f64>>, b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        assert!(a[piv][col].abs() > 1e-13, "oracle matrix singular at {col}");
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        b[col] /= a[col][col];
        for r in 0..col {
            b[r] -= a[r][col] * b[col];
            a[r][col] = 0.0;
        }
    }
}

/// Assemble the full coupled matrix (momentum, continuity, interface
/// motion, curvature) densely from the same blocks the solver uses, pin
/// the two pressure coefficients in the oracle's gauge, and solve.
pub fn monolithic_solve(
    sys: &BlockSystem,
    fm: &FittedMesh,
    tau: f64,
    gamma_coef: f64,
) -> (Vec<f64>, CompositePressure, Vec<f64>, Vec<Vec2>) {
    let n_u = sys.n_u;
    let n_p = sys.n_p;
    let kg = sys.blocks.k_gamma;
    let n = n_u + n_p + kg + 2 * kg;
    let mut a = vec![vec![0.0f64; n]; n];
    let mut rhs = vec![0.0f64; n];

    for r in 0..n_u {
        for k in sys.b.row_ptr[r]..sys.b.row_ptr[r + 1] {
            a[r][sys.b.col_idx[k] as usize] += sys.b.values[k];
        }
        for k in sys.c.row_ptr[r]..sys.c.row_ptr[r + 1] {
            let p = sys.c.col_idx[k] as usize;
            a[r][n_u + p] += sys.c.values[k];
            a[n_u + p][r] += sys.c.values[k];
        }
        rhs[r] = sys.rhs_u[r];
    }
    for (p, v) in sys.rhs_p.iter().enumerate() {
        rhs[n_u + p] = *v;
    }
    // interface coupling: -gamma N kappa in unconstrained momentum rows;
    // N^T U - (1/tau) N_G^T dX = 0; N_G kappa + A_G dX = -A_G X
    let col_kappa = n_u + n_p;
    let col_dx = n_u + n_p + kg;
    for k in 0..kg {
        for &(dof, w) in &sys.blocks.ngo[k] {
            for c in 0..2 {
                let row = 2 * dof as usize + c;
                let wc = if c == 0 { w.x } else { w.y };
                if !sys.constrained[row] {
                    a[row][col_kappa + k] -= gamma_coef * wc;
                }
                a[col_kappa + k][row] += wc;
            }
        }
        for c in 0..2 {
            a[col_kappa + k][col_dx + 2 * k + c] -= sys.blocks.omega[k].comp(c) / tau;
            a[col_dx + 2 * k + c][col_kappa + k] += sys.blocks.omega[k].comp(c);
        }
    }
    // A_Gamma block and its rhs
    let ax = sys.blocks.a_gamma_apply(&sys.x_gamma);
    for j in 0..kg {
        let (p, q) = (j, (j + 1) % kg);
        let w = 1.0 / sys.blocks.seg_len[j];
        for c in 0..2 {
            a[col_dx + 2 * p + c][col_dx + 2 * p + c] += w;
            a[col_dx + 2 * q + c][col_dx + 2 * q + c] += w;
            a[col_dx + 2 * p + c][col_dx + 2 * q + c] -= w;
            a[col_dx + 2 * q + c][col_dx + 2 * p + c] -= w;
        }
    }
    for k in 0..kg {
        rhs[col_dx + 2 * k] = -ax[k].x;
        rhs[col_dx + 2 * k + 1] = -ax[k].y;
    }
    // pin the oracle pressure gauge: first P1 and first P0 coefficient
    for pin in [n_u, n_u + fm.tri.n_vertices()] {
        for c in 0..n {
            a[pin][c] = 0.0;
            a[c][pin] = 0.0;
        }
        a[pin][pin] = 1.0;
        rhs[pin] = 0.0;
    }
    dense_solve(&mut a, &mut rhs);

    let u = rhs[..n_u].to_vec();
    let mut p = CompositePressure::from_flat(&fm.tri, &rhs[n_u..n_u + n_p]);
    mean_zero_project(&mut p, &fm.tri);
    let kappa = rhs[col_kappa..col_kappa + kg].to_vec();
    let dx = (0..kg)
        .map(|k| Vec2::new(rhs[col_dx + 2 * k], rhs[col_dx + 2 * k + 1]))
        .collect();
    (u, p, kappa, dx)
}

pub struct SchemeMatrix<'a> {
    pub name: &'static str,
    pub convection: ConvectionForm,
    pub transport: &'a P2Velocity,
    pub rho_old: Option<&'a [f64]>,
    pub mass_tri: Option<&'a tideflow::mesh::Triangulation>,
}

pub fn check_scheme_against_monolithic(
    fm: &FittedMesh,
    dm: &DofMapP2,
    phys: &PhysParams,
    setup: &SchemeMatrix,
    u_old: &P2Velocity,
) {
    let tau = 0.05;
    let inputs = VelocityBlockInputs {
        tau,
        transport: setup.transport,
        convection: setup.convection,
        rho_old: setup.rho_old,
        mass_tri: setup.mass_tri,
        u_old,
    };
    let (b_coo, rhs_mass) = assemble_velocity_block(fm, dm, &inputs).unwrap();
    let c_coo = assemble_pressure_block(fm, dm).unwrap();
    let f1 = interpolate_p2(|p| Vec2::new(0.3 * p.y, -0.2 * p.x), dm);
    let f2 = interpolate_p2(|_| Vec2::new(0.0, -0.98), dm);
    let forcing = assemble_forcing(fm, dm, &f1, &f2, None).unwrap();
    let g = |p: Vec2| Vec2::new(0.05 * p.y, 0.0);
    let g_h = interpolate_p2(g, dm);
    let beta = assemble_continuity_rhs(fm, dm, None, Some(&g_h)).unwrap();
    let constraints = boundary_constraints(fm, dm, &g).unwrap();
    let blocks = assemble_interface_blocks(fm, dm).unwrap();
    let mut rhs_u = rhs_mass;
    for (r, f) in rhs_u.iter_mut().zip(&forcing) {
        *r += f;
    }
    let sys = build_block_system(fm, dm, b_coo, c_coo, rhs_u, beta, &constraints, blocks);

    let xi = CondensedInterfaceOp::factor(&sys.blocks, tau).unwrap();
    let cfg = SolverConfig {
        rtol: 1e-12,
        restart: 80,
        max_iterations: 800,
    };
    let sol = solve_step(&sys, &fm.tri, phys.gamma, &cfg, &xi).unwrap();
    let (u_mono, p_mono, kappa_mono, dx_mono) = monolithic_solve(&sys, fm, tau, phys.gamma);

    let du = sol
        .u
        .iter()
        .zip(&u_mono)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let dk = sol
        .kappa
        .iter()
        .zip(&kappa_mono)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let dx = sol
        .delta_x
        .iter()
        .zip(&dx_mono)
        .map(|(a, b)| (*a - *b).norm())
        .fold(0.0, f64::max);
    let mut dp = 0.0f64;
    for t in 0..fm.tri.n_triangles() {
        let l = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        dp = dp.max((sol.p.eval(&fm.tri, t, l) - p_mono.eval(&fm.tri, t, l)).abs());
    }
    assert!(
        du <= 1e-8 && dk <= 1e-8 && dx <= 1e-8 && dp <= 1e-8,
        "{}: schur vs monolithic mismatch: u {du:.2e}, p {dp:.2e}, kappa {dk:.2e}, dX {dx:.2e}",
        setup.name
    );
}

