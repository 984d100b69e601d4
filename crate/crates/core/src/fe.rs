//! Finite element spaces on the bulk mesh: the P2 velocity space, piecewise
//! linear and piecewise constant scalars, and the composite P1+P0 pressure.
//!
//! Vector fields store d interleaved components per scalar degree of
//! freedom. Local P2 dof order: the three vertices, then the midpoints of
//! the edges opposite local vertices 0, 1, 2.

use crate::geo::{barycentric, Vec2};
use crate::mesh::Triangulation;
use std::collections::HashMap;

/// P2 basis values at a barycentric point.
#[inline]
pub fn p2_basis(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

/// Gradients of the P2 basis with respect to the barycentric coordinates.
#[inline]
pub fn p2_grad_bary(l: [f64; 3]) -> [[f64; 3]; 6] {
    [
        [4.0 * l[0] - 1.0, 0.0, 0.0],
        [0.0, 4.0 * l[1] - 1.0, 0.0],
        [0.0, 0.0, 4.0 * l[2] - 1.0],
        [0.0, 4.0 * l[2], 4.0 * l[1]],
        [4.0 * l[2], 0.0, 4.0 * l[0]],
        [4.0 * l[1], 4.0 * l[0], 0.0],
    ]
}

/// Gradients of the barycentric coordinates on a triangle (constant).
#[inline]
pub fn bary_gradients(p: &[Vec2; 3]) -> [Vec2; 3] {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    [
        (p[1] - p[2]).perp_cw() / area2,
        (p[2] - p[0]).perp_cw() / area2,
        (p[0] - p[1]).perp_cw() / area2,
    ]
}

/// Physical gradients of the six P2 basis functions at a barycentric point.
#[inline]
pub fn p2_gradients(l: [f64; 3], grad_l: &[Vec2; 3]) -> [Vec2; 6] {
    let gb = p2_grad_bary(l);
    let mut out = [Vec2::ZERO; 6];
    for (o, row) in out.iter_mut().zip(gb.iter()) {
        *o = grad_l[0] * row[0] + grad_l[1] * row[1] + grad_l[2] * row[2];
    }
    out
}

/// Degree-of-freedom map for the scalar P2 space: vertex dofs first, then
/// one dof per edge midpoint. Shared edges share midpoint dofs.
#[derive(Clone, Debug)]
pub struct DofMapP2 {
    pub tri_dofs: Vec<[u32; 6]>,
    pub n_vertices: usize,
    pub n_scalar: usize,
    /// Position of each scalar dof (vertices, then edge midpoints).
    pub node_pos: Vec<Vec2>,
    /// Edge endpoints per edge dof (dof index minus `n_vertices`).
    pub edges: Vec<(u32, u32)>,
    edge_lookup: HashMap<(u32, u32), u32>,
}

impl DofMapP2 {
    pub fn build(tri: &Triangulation) -> DofMapP2 {
        let nv = tri.n_vertices();
        let mut edge_lookup: HashMap<(u32, u32), u32> = HashMap::new();
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let mut tri_dofs = Vec::with_capacity(tri.n_triangles());
        for t in &tri.triangles {
            let mut dofs = [0u32; 6];
            for k in 0..3 {
                dofs[k] = t[k] as u32;
            }
            for k in 0..3 {
                let a = t[(k + 1) % 3] as u32;
                let b = t[(k + 2) % 3] as u32;
                let key = (a.min(b), a.max(b));
                let id = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    (edges.len() - 1) as u32
                });
                dofs[3 + k] = nv as u32 + id;
            }
            tri_dofs.push(dofs);
        }
        let mut node_pos: Vec<Vec2> = tri.vertices.clone();
        node_pos.extend(
            edges
                .iter()
                .map(|&(a, b)| (tri.vertices[a as usize] + tri.vertices[b as usize]) * 0.5),
        );
        DofMapP2 {
            tri_dofs,
            n_vertices: nv,
            n_scalar: nv + edges.len(),
            node_pos,
            edges,
            edge_lookup,
        }
    }

    /// Refresh node positions after vertices moved (same connectivity).
    pub fn refresh_positions(&mut self, tri: &Triangulation) {
        for (i, v) in tri.vertices.iter().enumerate() {
            self.node_pos[i] = *v;
        }
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            self.node_pos[self.n_vertices + e] =
                (tri.vertices[a as usize] + tri.vertices[b as usize]) * 0.5;
        }
    }

    pub fn edge_dof(&self, a: usize, b: usize) -> Option<u32> {
        let (a, b) = (a as u32, b as u32);
        self.edge_lookup
            .get(&(a.min(b), a.max(b)))
            .map(|&e| self.n_vertices as u32 + e)
    }

    pub fn n_velocity_dofs(&self) -> usize {
        2 * self.n_scalar
    }
}

/// P2 vector field, components interleaved per scalar dof.
#[derive(Clone, Debug)]
pub struct P2Velocity {
    pub coeffs: Vec<f64>,
}

impl P2Velocity {
    pub fn zeros(dofmap: &DofMapP2) -> Self {
        P2Velocity {
            coeffs: vec![0.0; dofmap.n_velocity_dofs()],
        }
    }

    #[inline]
    pub fn node_value(&self, dof: usize) -> Vec2 {
        Vec2::new(self.coeffs[2 * dof], self.coeffs[2 * dof + 1])
    }

    pub fn set_node_value(&mut self, dof: usize, v: Vec2) {
        self.coeffs[2 * dof] = v.x;
        self.coeffs[2 * dof + 1] = v.y;
    }

    /// Value at a barycentric point of triangle `t`.
    pub fn eval(&self, dofmap: &DofMapP2, t: usize, l: [f64; 3]) -> Vec2 {
        let basis = p2_basis(l);
        let mut v = Vec2::ZERO;
        for (k, &phi) in basis.iter().enumerate() {
            let dof = dofmap.tri_dofs[t][k] as usize;
            v += self.node_value(dof) * phi;
        }
        v
    }

    /// Jacobian [du_i/dx_j] at a barycentric point of triangle `t`.
    pub fn eval_gradient(
        &self,
        dofmap: &DofMapP2,
        t: usize,
        l: [f64; 3],
        grad_l: &[Vec2; 3],
    ) -> [[f64; 2]; 2] {
        let grads = p2_gradients(l, grad_l);
        let mut g = [[0.0; 2]; 2];
        for (k, gk) in grads.iter().enumerate() {
            let dof = dofmap.tri_dofs[t][k] as usize;
            let u = self.node_value(dof);
            g[0][0] += u.x * gk.x;
            g[0][1] += u.x * gk.y;
            g[1][0] += u.y * gk.x;
            g[1][1] += u.y * gk.y;
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, &c| m.max(c.abs()))
    }
}

/// Interpolate a vector-valued function onto the P2 space (nodal values).
pub fn interpolate_p2(f: impl Fn(Vec2) -> Vec2, dofmap: &DofMapP2) -> P2Velocity {
    let mut out = P2Velocity {
        coeffs: Vec::with_capacity(dofmap.n_velocity_dofs()),
    };
    for &p in &dofmap.node_pos {
        let v = f(p);
        out.coeffs.push(v.x);
        out.coeffs.push(v.y);
    }
    out
}

/// Piecewise constant interpolation: each element of the target mesh takes
/// the source field's value at the element barycentre.
pub fn interpolate_p0(
    old_values: &[f64],
    old_mesh: &Triangulation,
    new_mesh: &Triangulation,
) -> crate::error::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(new_mesh.n_triangles());
    let mut hint = 0usize;
    for t in 0..new_mesh.n_triangles() {
        let b = new_mesh.barycentre(t);
        let el = crate::motion::locate_walk(old_mesh, hint, b)?;
        hint = el;
        out.push(old_values[el]);
    }
    Ok(out)
}

/// Composite pressure: continuous piecewise linear nodal part plus a
/// piecewise constant part. The representation is redundant; uniqueness is
/// handled by the solver, not here.
#[derive(Clone, Debug)]
pub struct CompositePressure {
    pub p1: Vec<f64>,
    pub p0: Vec<f64>,
}

impl CompositePressure {
    pub fn zeros(tri: &Triangulation) -> Self {
        CompositePressure {
            p1: vec![0.0; tri.n_vertices()],
            p0: vec![0.0; tri.n_triangles()],
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.p1.len() + self.p0.len()
    }

    pub fn eval(&self, tri: &Triangulation, t: usize, l: [f64; 3]) -> f64 {
        let v = tri.triangles[t];
        self.p1[v[0]] * l[0] + self.p1[v[1]] * l[1] + self.p1[v[2]] * l[2] + self.p0[t]
    }

    pub fn eval_at(&self, tri: &Triangulation, t: usize, p: Vec2) -> f64 {
        let c = tri.tri_coords(t);
        self.eval(tri, t, barycentric(c[0], c[1], c[2], p))
    }

    pub fn integral(&self, tri: &Triangulation) -> f64 {
        let mut s = 0.0;
        for t in 0..tri.n_triangles() {
            let v = tri.triangles[t];
            let area = tri.tri_area(t);
            s += area * ((self.p1[v[0]] + self.p1[v[1]] + self.p1[v[2]]) / 3.0 + self.p0[t]);
        }
        s
    }

    /// Flat coefficient vector: P1 part first, then P0.
    pub fn from_flat(tri: &Triangulation, flat: &[f64]) -> Self {
        let nv = tri.n_vertices();
        CompositePressure {
            p1: flat[..nv].to_vec(),
            p0: flat[nv..].to_vec(),
        }
    }
}

/// Shift the pressure by a constant so that its integral over the domain
/// vanishes. Only the P1 coefficients change, by the same constant.
pub fn mean_zero_project(p: &mut CompositePressure, tri: &Triangulation) {
    let area = tri.total_area();
    let mean = p.integral(tri) / area;
    for a in &mut p.p1 {
        *a -= mean;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryEdge, Marker};

    fn two_tri_square() -> Triangulation {
        Triangulation::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![
                BoundaryEdge { v: [0, 1], marker: Marker::Dirichlet },
                BoundaryEdge { v: [1, 2], marker: Marker::Dirichlet },
                BoundaryEdge { v: [2, 3], marker: Marker::Dirichlet },
                BoundaryEdge { v: [3, 0], marker: Marker::Dirichlet },
            ],
        )
    }

    #[test]
    fn dof_counts() {
        let tri = two_tri_square();
        let dm = DofMapP2::build(&tri);
        // 4 vertices + 5 edges
        assert_eq!(dm.n_scalar, 9);
        // shared diagonal edge dof appears in both triangles
        let shared = dm.edge_dof(0, 2).unwrap();
        assert!(dm.tri_dofs[0].contains(&shared));
        assert!(dm.tri_dofs[1].contains(&shared));
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let tri = two_tri_square();
        let dm = DofMapP2::build(&tri);
        let f = |p: Vec2| Vec2::new(p.x * p.x, p.x * p.y);
        let u = interpolate_p2(f, &dm);
        // evaluate at interior points of both triangles
        for (t, l) in [(0, [0.2, 0.5, 0.3]), (1, [0.1, 0.3, 0.6])] {
            let c = tri.tri_coords(t);
            let p = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
            let v = u.eval(&dm, t, l);
            assert!((v - f(p)).norm() < 1e-14);
        }
    }

    #[test]
    fn p2_gradient_of_quadratic() {
        let tri = two_tri_square();
        let dm = DofMapP2::build(&tri);
        let u = interpolate_p2(|p| Vec2::new(p.x * p.x, p.x * p.y), &dm);
        let t = 0;
        let coords = tri.tri_coords(t);
        let gl = bary_gradients(&coords);
        let l = [0.3, 0.4, 0.3];
        let p = coords[0] * l[0] + coords[1] * l[1] + coords[2] * l[2];
        let g = u.eval_gradient(&dm, t, l, &gl);
        assert!((g[0][0] - 2.0 * p.x).abs() < 1e-13);
        assert!((g[0][1] - 0.0).abs() < 1e-13);
        assert!((g[1][0] - p.y).abs() < 1e-13);
        assert!((g[1][1] - p.x).abs() < 1e-13);
    }

    #[test]
    fn composite_redundancy_evaluates_to_zero() {
        let tri = two_tri_square();
        let p = CompositePressure {
            p1: vec![1.0; 4],
            p0: vec![-1.0; 2],
        };
        for t in 0..2 {
            for l in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.4, 0.4, 0.2]] {
                assert!(p.eval(&tri, t, l).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mean_zero_shifts_constant() {
        let tri = two_tri_square();
        let mut p = CompositePressure {
            p1: vec![5.0; 4],
            p0: vec![0.0; 2],
        };
        mean_zero_project(&mut p, &tri);
        assert!(p.integral(&tri).abs() < 1e-14);
        for t in 0..2 {
            assert!(p.eval(&tri, t, [0.4, 0.3, 0.3]).abs() < 1e-14);
        }
        // already mean-zero stays put
        let before = p.p1.clone();
        mean_zero_project(&mut p, &tri);
        for (a, b) in p.p1.iter().zip(&before) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
