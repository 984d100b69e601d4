//! Parametric P1 finite elements on the interface polygon: mass lumped
//! inner products, the surface gradient stiffness, the lumped and exact
//! normal coupling operators, and the discrete curvature.
//!
//! Mass lumping makes the curvature equation block diagonal per vertex: the
//! lumped weighted normal of vertex k collects (|segment| / d) nu from its
//! two adjacent segments.

use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::fe::DofMapP2;
use crate::geo::Vec2;
use crate::mesh::FittedMesh;
use crate::quadrature::gauss3_unit;

/// Scalar function on the interface: one value per vertex.
pub type SurfaceScalar = Vec<f64>;
/// Vector function on the interface: one vector per vertex.
pub type SurfaceVector = Vec<Vec2>;

/// Mass lumped inner product of two scalar interface functions:
/// (1/d) sum_j |sigma_j| sum_{vertices of sigma_j} (v w)(q).
pub fn lumped_inner(v: &[f64], w: &[f64], seg_len: &[f64]) -> f64 {
    let k = v.len();
    assert_eq!(w.len(), k);
    assert_eq!(seg_len.len(), k);
    let mut s = 0.0;
    for j in 0..k {
        let a = j;
        let b = (j + 1) % k;
        s += 0.5 * seg_len[j] * (v[a] * w[a] + v[b] * w[b]);
    }
    s
}

/// Assembled interface operators for one time step.
#[derive(Clone, Debug)]
pub struct InterfaceBlocks {
    pub k_gamma: usize,
    pub seg_len: Vec<f64>,
    pub normals: Vec<Vec2>,
    /// Lumped weighted normals: omega_k = sum over adjacent segments of
    /// (|sigma| / d) nu. These are the columns of N_Gamma.
    pub omega: Vec<Vec2>,
    /// Exact normal coupling: per interface vertex k, the coupled bulk
    /// scalar P2 dofs with their vector weights nu_j int_sigma chi_k phi_i.
    pub ngo: Vec<Vec<(u32, Vec2)>>,
}

impl InterfaceBlocks {
    /// A_Gamma applied to a vector interface function, componentwise:
    /// (A x)_k = sum over segments at k of (x_k - x_other) / |sigma|.
    pub fn a_gamma_apply(&self, x: &[Vec2]) -> Vec<Vec2> {
        let k = self.k_gamma;
        let mut y = vec![Vec2::ZERO; k];
        for j in 0..k {
            let a = j;
            let b = (j + 1) % k;
            let d = (x[a] - x[b]) / self.seg_len[j];
            y[a] += d;
            y[b] -= d;
        }
        y
    }

    /// N_Gamma applied to a scalar (curvature-like) function.
    pub fn n_gamma_apply(&self, kappa: &[f64]) -> Vec<Vec2> {
        self.omega
            .iter()
            .zip(kappa)
            .map(|(&w, &k)| w * k)
            .collect()
    }

    /// N_Gamma^T applied to a vector interface function.
    pub fn n_gamma_transpose_apply(&self, x: &[Vec2]) -> Vec<f64> {
        self.omega.iter().zip(x).map(|(&w, &v)| w.dot(v)).collect()
    }

    /// N_{Gamma,Omega} applied to a scalar interface function, accumulated
    /// into a bulk velocity vector (interleaved components).
    pub fn ngo_apply_add(&self, kappa: &[f64], scale: f64, out: &mut [f64]) {
        for (k, entries) in self.ngo.iter().enumerate() {
            let kk = scale * kappa[k];
            if kk == 0.0 {
                continue;
            }
            for &(dof, w) in entries {
                out[2 * dof as usize] += w.x * kk;
                out[2 * dof as usize + 1] += w.y * kk;
            }
        }
    }

    /// N_{Gamma,Omega}^T applied to a bulk velocity vector.
    pub fn ngo_transpose_apply(&self, u: &[f64]) -> Vec<f64> {
        self.ngo
            .iter()
            .map(|entries| {
                entries
                    .iter()
                    .map(|&(dof, w)| {
                        w.x * u[2 * dof as usize] + w.y * u[2 * dof as usize + 1]
                    })
                    .sum()
            })
            .collect()
    }

    /// Dense interface condensed operator
    /// [[0, -(1/tau) N^T], [N, A]] over (kappa; deltaX interleaved).
    pub fn xi_gamma_dense(&self, tau: f64) -> DenseMat {
        let k = self.k_gamma;
        let n = 3 * k;
        let mut m = DenseMat::zeros(n, n);
        for i in 0..k {
            for c in 0..2 {
                // -(1/tau) N^T block: row i (kappa eq), col k + 2i + c
                m.set(i, k + 2 * i + c, -self.omega[i].comp(c) / tau);
                // N block: row k + 2i + c, col i
                m.set(k + 2 * i + c, i, self.omega[i].comp(c));
            }
        }
        // A_Gamma block, same scalar stiffness per component
        for j in 0..k {
            let a = j;
            let b = (j + 1) % k;
            let w = 1.0 / self.seg_len[j];
            for c in 0..2 {
                m.add(k + 2 * a + c, k + 2 * a + c, w);
                m.add(k + 2 * b + c, k + 2 * b + c, w);
                m.add(k + 2 * a + c, k + 2 * b + c, -w);
                m.add(k + 2 * b + c, k + 2 * a + c, -w);
            }
        }
        m
    }
}

/// Assemble the interface blocks for the current fitted mesh. The exact
/// coupling N_{Gamma,Omega} integrates the bulk P2 trace against the hat
/// function and the piecewise constant normal with 3-point Gauss, exact for
/// the cubic integrand.
pub fn assemble_interface_blocks(fm: &FittedMesh, dofmap: &DofMapP2) -> Result<InterfaceBlocks> {
    let curve = &fm.interface;
    let k_gamma = curve.n_vertices();
    let mut seg_len = Vec::with_capacity(k_gamma);
    for j in 0..k_gamma {
        let len = curve.segment_len(&fm.tri, j);
        if len < 1e-300 {
            return Err(Error::DegenerateSegment(j));
        }
        seg_len.push(len);
    }
    let normals = curve.normals.clone();

    let mut omega = vec![Vec2::ZERO; k_gamma];
    for j in 0..k_gamma {
        let w = normals[j] * (seg_len[j] / 2.0);
        omega[j] += w;
        omega[(j + 1) % k_gamma] += w;
    }

    let rule = gauss3_unit();
    let mut ngo: Vec<Vec<(u32, Vec2)>> = vec![Vec::new(); k_gamma];
    for j in 0..k_gamma {
        let (ga, gb) = curve.segment(j);
        let mid = dofmap
            .edge_dof(ga, gb)
            .ok_or(Error::NotFitted(ga, gb))?;
        let dofs = [ga as u32, gb as u32, mid];
        // trace of the P2 basis along the segment from a to b
        let trace = |t: f64| [
            (1.0 - t) * (1.0 - 2.0 * t),
            t * (2.0 * t - 1.0),
            4.0 * t * (1.0 - t),
        ];
        let ka = j;
        let kb = (j + 1) % k_gamma;
        let mut wa = [0.0; 3];
        let mut wb = [0.0; 3];
        for (t, w) in rule {
            let phi = trace(t);
            for i in 0..3 {
                wa[i] += w * (1.0 - t) * phi[i];
                wb[i] += w * t * phi[i];
            }
        }
        for i in 0..3 {
            ngo[ka].push((dofs[i], normals[j] * (seg_len[j] * wa[i])));
            ngo[kb].push((dofs[i], normals[j] * (seg_len[j] * wb[i])));
        }
    }

    Ok(InterfaceBlocks {
        k_gamma,
        seg_len,
        normals,
        omega,
        ngo,
    })
}

/// Discrete curvature of the interface polygon: the vertexwise solution of
/// the lumped Laplace-Beltrami identity,
/// kappa_k = -(A_Gamma X)_k . omega_k / |omega_k|^2.
pub fn discrete_curvature(fm: &FittedMesh, blocks: &InterfaceBlocks) -> Result<SurfaceScalar> {
    let x: Vec<Vec2> = fm
        .interface
        .vertices
        .iter()
        .map(|&v| fm.tri.vertices[v])
        .collect();
    let ax = blocks.a_gamma_apply(&x);
    let mut kappa = Vec::with_capacity(blocks.k_gamma);
    for k in 0..blocks.k_gamma {
        let w2 = blocks.omega[k].norm_sq();
        if w2.sqrt() < 1e-14 {
            return Err(Error::CuspVertex(k));
        }
        kappa.push(-ax[k].dot(blocks.omega[k]) / w2);
    }
    Ok(kappa)
}
