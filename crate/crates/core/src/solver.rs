//! Solution of the coupled per-step linear system by interface condensation
//! and a Schur complement reduction: the small curvature/displacement block
//! is eliminated with a dense LU factorization, and the remaining velocity
//! and pressure saddle point problem is solved with preconditioned GMRES.
//!
//! The preconditioner is the plain Navier-Stokes saddle matrix, made
//! invertible by pinning one P1 and one P0 pressure coefficient, and
//! factorized sparsely. The outer system runs in the full redundant
//! pressure space (singular but consistent); the returned pressure is
//! normalized to zero mean.

use crate::assembly::BlockSystem;
use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::fe::{mean_zero_project, CompositePressure};
use crate::geo::Vec2;
use crate::interface::InterfaceBlocks;
use crate::mesh::Triangulation;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::sync::Once;

static FAER_SETUP: Once = Once::new();

fn faer_sequential() {
    FAER_SETUP.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub rtol: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: 1e-9,
            restart: 50,
            max_iterations: 400,
        }
    }
}

/// Dense LU of the interface condensed operator
/// [[0, -(1/tau) N^T], [N, A]].
pub struct CondensedInterfaceOp {
    pub k_gamma: usize,
    lu: DenseLu,
}

impl CondensedInterfaceOp {
    pub fn factor(blocks: &InterfaceBlocks, tau: f64) -> Result<Self> {
        let xi = blocks.xi_gamma_dense(tau);
        let lu = DenseLu::factor(&xi)?;
        Ok(CondensedInterfaceOp {
            k_gamma: blocks.k_gamma,
            lu,
        })
    }

    /// Solve Xi (kappa; deltaX) = (r_kappa; r_x).
    pub fn solve(&self, r_kappa: &[f64], r_x: &[Vec2]) -> (Vec<f64>, Vec<Vec2>) {
        let k = self.k_gamma;
        let mut rhs = vec![0.0; 3 * k];
        rhs[..k].copy_from_slice(r_kappa);
        for (i, v) in r_x.iter().enumerate() {
            rhs[k + 2 * i] = v.x;
            rhs[k + 2 * i + 1] = v.y;
        }
        self.lu.solve_in_place(&mut rhs);
        let kappa = rhs[..k].to_vec();
        let dx = (0..k)
            .map(|i| Vec2::new(rhs[k + 2 * i], rhs[k + 2 * i + 1]))
            .collect();
        (kappa, dx)
    }
}

/// Matrix-free application of the reduced saddle point operator
/// [[B + gamma N Xi^{-1}_kk N^T, C], [C^T, 0]].
pub struct SchurOperator<'a> {
    pub sys: &'a BlockSystem,
    pub xi: &'a CondensedInterfaceOp,
    pub gamma: f64,
}

impl SchurOperator<'_> {
    pub fn n(&self) -> usize {
        self.sys.n_u + self.sys.n_p
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n_u = self.sys.n_u;
        let (xu, xp) = x.split_at(n_u);
        let (yu, yp) = y.split_at_mut(n_u);
        self.sys.b.matvec_into(xu, yu);
        // yu += C xp
        for r in 0..n_u {
            let mut s = 0.0;
            for k in self.sys.c.row_ptr[r]..self.sys.c.row_ptr[r + 1] {
                s += self.sys.c.values[k] * xp[self.sys.c.col_idx[k] as usize];
            }
            yu[r] += s;
        }
        if self.gamma != 0.0 {
            let ntu = self.sys.blocks.ngo_transpose_apply(xu);
            let zeros = vec![Vec2::ZERO; self.xi.k_gamma];
            let (kappa, _) = self.xi.solve(&ntu, &zeros);
            let mut add = vec![0.0; n_u];
            self.sys.blocks.ngo_apply_add(&kappa, self.gamma, &mut add);
            for r in 0..n_u {
                if !self.sys.constrained[r] {
                    yu[r] += add[r];
                }
            }
        }
        for v in yp.iter_mut() {
            *v = 0.0;
        }
        self.sys.c.matvec_transpose_add(xu, yp);
    }
}

/// Sparse LU of the doctored saddle matrix [[B, C], [C^T, 0]] with one P1
/// and one P0 pressure coefficient pinned.
pub struct SaddlePreconditioner {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SaddlePreconditioner {
    pub fn build(sys: &BlockSystem, tri: &Triangulation) -> Result<Self> {
        faer_sequential();
        let n_u = sys.n_u;
        let n_p = sys.n_p;
        let n = n_u + n_p;
        // pinned pressure coefficients: the first P1 dof and the first P0 dof
        let pin1 = n_u;
        let pin0 = n_u + tri.n_vertices();
        let mut trip: Vec<Triplet<usize, usize, f64>> =
            Vec::with_capacity(sys.b.nnz() + 2 * sys.c.nnz() + 2);
        for r in 0..n_u {
            for k in sys.b.row_ptr[r]..sys.b.row_ptr[r + 1] {
                trip.push(Triplet::new(r, sys.b.col_idx[k] as usize, sys.b.values[k]));
            }
            for k in sys.c.row_ptr[r]..sys.c.row_ptr[r + 1] {
                let p = n_u + sys.c.col_idx[k] as usize;
                if p != pin1 && p != pin0 {
                    trip.push(Triplet::new(r, p, sys.c.values[k]));
                    trip.push(Triplet::new(p, r, sys.c.values[k]));
                }
            }
        }
        trip.push(Triplet::new(pin1, pin1, 1.0));
        trip.push(Triplet::new(pin0, pin0, 1.0));
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|_| Error::PreconditionerFactorization)?;
        let lu = mat
            .sp_lu()
            .map_err(|_| Error::PreconditionerFactorization)?;
        Ok(SaddlePreconditioner { n, lu })
    }

    pub fn apply(&self, r: &[f64], out: &mut [f64]) {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| r[i]);
        self.lu.solve_in_place(rhs.as_mut());
        for i in 0..self.n {
            out[i] = rhs[(i, 0)];
        }
    }
}

/// Left-preconditioned restarted GMRES.
///
/// Returns the solution, the iteration count and the final relative
/// residual (in the preconditioned norm).
pub fn gmres(
    n: usize,
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, usize, f64)> {
    let mut x = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut mb = vec![0.0; n];
    precond(b, &mut mb);
    let bnorm = norm2(&mb);
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let m = cfg.restart.max(1);
    let mut total_iters = 0usize;
    let mut rel = f64::INFINITY;

    while total_iters < cfg.max_iterations {
        // r = M^-1 (b - A x)
        apply(&x, &mut work);
        let mut diff = vec![0.0; n];
        for i in 0..n {
            diff[i] = b[i] - work[i];
        }
        let mut r = vec![0.0; n];
        precond(&diff, &mut r);
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= cfg.rtol {
            return Ok((x, total_iters, rel));
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if total_iters >= cfg.max_iterations {
                break;
            }
            total_iters += 1;
            apply(&v[k], &mut work);
            let mut w = vec![0.0; n];
            precond(&work, &mut w);
            // modified Gram-Schmidt
            for (j, vj) in v.iter().enumerate().take(k + 1) {
                let hjk = dot(&w, vj);
                h[j][k] = hjk;
                for i in 0..n {
                    w[i] -= hjk * vj[i];
                }
            }
            let hkk = norm2(&w);
            h[k + 1][k] = hkk;
            // apply accumulated Givens rotations
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + hkk * hkk).sqrt();
            if denom == 0.0 {
                k_used = k + 1;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = hkk / denom;
            h[k][k] = denom;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= cfg.rtol || hkk == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hkk).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0f64; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i];
            }
        }
        if rel <= cfg.rtol {
            return Ok((x, total_iters, rel));
        }
    }
    Err(Error::GmresNoConvergence {
        iterations: total_iters,
        residual: rel,
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of one coupled solve.
pub struct StepSolution {
    pub u: Vec<f64>,
    pub p: CompositePressure,
    pub kappa: Vec<f64>,
    pub delta_x: Vec<Vec2>,
    pub gmres_iterations: usize,
}

/// Solve the coupled system: GMRES on the reduced (U, P) problem, then the
/// interface unknowns by back substitution through the condensed operator.
/// The condensed factorization is created once per time step by the caller
/// and reused across fixed point iterations.
pub fn solve_step(
    sys: &BlockSystem,
    tri: &Triangulation,
    gamma: f64,
    cfg: &SolverConfig,
    xi: &CondensedInterfaceOp,
) -> Result<StepSolution> {
    let n_u = sys.n_u;
    let n = n_u + sys.n_p;

    // rhs: c + gamma N [Xi^-1 (0; -A X)]_kappa on the unconstrained rows
    let mut rhs = vec![0.0; n];
    rhs[..n_u].copy_from_slice(&sys.rhs_u);
    if gamma != 0.0 {
        let ax = sys.blocks.a_gamma_apply(&sys.x_gamma);
        let neg_ax: Vec<Vec2> = ax.iter().map(|&v| -v).collect();
        let zeros = vec![0.0; sys.blocks.k_gamma];
        let (kappa0, _) = xi.solve(&zeros, &neg_ax);
        let mut add = vec![0.0; n_u];
        sys.blocks.ngo_apply_add(&kappa0, gamma, &mut add);
        for r in 0..n_u {
            if !sys.constrained[r] {
                rhs[r] += add[r];
            }
        }
    }
    rhs[n_u..].copy_from_slice(&sys.rhs_p);

    let precond = SaddlePreconditioner::build(sys, tri)?;
    let op = SchurOperator { sys, xi, gamma };
    let apply = |x: &[f64], y: &mut [f64]| op.apply(x, y);
    let prec = |r: &[f64], z: &mut [f64]| precond.apply(r, z);
    let (mut sol, iters, _res) = gmres(n, &apply, &prec, &rhs, cfg)?;

    // prescribe constrained values exactly
    for d in 0..n_u {
        if sys.constrained[d] {
            sol[d] = sys.rhs_u[d];
        }
    }

    // back substitution: (kappa, deltaX) = Xi^-1 (-N^T U; -A X)
    let ntu = sys.blocks.ngo_transpose_apply(&sol[..n_u]);
    let neg_ntu: Vec<f64> = ntu.iter().map(|v| -v).collect();
    let ax = sys.blocks.a_gamma_apply(&sys.x_gamma);
    let neg_ax: Vec<Vec2> = ax.iter().map(|&v| -v).collect();
    let (kappa, delta_x) = xi.solve(&neg_ntu, &neg_ax);

    let mut p = CompositePressure::from_flat(tri, &sol[n_u..]);
    mean_zero_project(&mut p, tri);

    Ok(StepSolution {
        u: sol[..n_u].to_vec(),
        p,
        kappa,
        delta_x,
        gmres_iterations: iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmres_identity_converges_in_one_iteration() {
        let n = 7;
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let prec = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let cfg = SolverConfig::default();
        let (x, iters, _) = gmres(n, &apply, &prec, &b, &cfg).unwrap();
        assert!(iters <= 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_zero_rhs_returns_zero() {
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let prec = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let cfg = SolverConfig::default();
        let (x, iters, _) = gmres(4, &apply, &prec, &[0.0; 4], &cfg).unwrap();
        assert_eq!(iters, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gmres_spd_fixture_matches_direct_solve() {
        // 5x5 SPD matrix with known solution
        let a = [
            [4.0, 1.0, 0.0, 0.0, 1.0],
            [1.0, 5.0, 2.0, 0.0, 0.0],
            [0.0, 2.0, 6.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 4.0, 1.0],
            [1.0, 0.0, 0.0, 1.0, 3.0],
        ];
        let x_true = [1.0, -2.0, 3.0, -4.0, 5.0];
        let mut b = [0.0; 5];
        for i in 0..5 {
            for j in 0..5 {
                b[i] += a[i][j] * x_true[j];
            }
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..5 {
                y[i] = (0..5).map(|j| a[i][j] * x[j]).sum();
            }
        };
        let prec = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let cfg = SolverConfig {
            rtol: 1e-14,
            restart: 10,
            max_iterations: 100,
        };
        let (x, _, _) = gmres(5, &apply, &prec, &b, &cfg).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-11);
        }
    }

    #[test]
    fn gmres_reports_nonconvergence() {
        // a cyclic shift needs n iterations; give it far fewer
        let n = 30;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = x[(i + 1) % n];
            }
        };
        let prec = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let cfg = SolverConfig {
            rtol: 1e-14,
            restart: 3,
            max_iterations: 5,
        };
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        assert!(matches!(
            gmres(n, &apply, &prec, &b, &cfg),
            Err(Error::GmresNoConvergence { .. })
        ));
    }
}
