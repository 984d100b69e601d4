//! Bulk triangulation and fitted-interface topology: storage, phase
//! classification, normal orientation and quality measurement.
//!
//! The interface is an ordered closed polygon whose segments coincide with
//! edges of the bulk mesh, so each triangle lies entirely in one phase and
//! the piecewise constant density/viscosity jump across mesh lines.

use crate::error::{Error, Result};
use crate::geo::{orient2d, point_in_polygon, tri_area, Vec2, GEOM_REL_TOL};
use std::collections::HashMap;

/// Boundary markers: Dirichlet part and free-slip part of the outer boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    Dirichlet,
    Slip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub marker: Marker,
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    pub vertices: Vec<Vec2>,
    /// Vertex ids per triangle, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// `neighbors[t][k]` is the triangle sharing the edge opposite local
    /// vertex `k` of triangle `t`, or `None` on the boundary.
    pub neighbors: Vec<[Option<usize>; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

impl Triangulation {
    pub fn new(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Self {
        let neighbors = build_neighbors(&triangles);
        Triangulation {
            vertices,
            triangles,
            neighbors,
            boundary_edges,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn tri_coords(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_coords(t);
        tri_area(a, b, c)
    }

    pub fn barycentre(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.tri_coords(t);
        (a + b + c) / 3.0
    }

    pub fn diameter(&self) -> f64 {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (hi - lo).norm()
    }

    /// Map from sorted vertex pair to (triangle, local edge) pairs.
    pub fn edge_map(&self) -> HashMap<(usize, usize), Vec<(usize, usize)>> {
        let mut map: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                map.entry(key).or_default().push((t, k));
            }
        }
        map
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.tri_area(t)).sum()
    }
}

fn build_neighbors(triangles: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
    let mut map: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    let mut neighbors = vec![[None; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            let key = (a.min(b), a.max(b));
            if let Some(&(t2, k2)) = map.get(&key) {
                neighbors[t][k] = Some(t2);
                neighbors[t2][k2] = Some(t);
            } else {
                map.insert(key, (t, k));
            }
        }
    }
    neighbors
}

/// Ordered closed interface polygon. Segment `j` runs from vertex `j` to
/// vertex `j + 1` (mod K); `normals[j]` is the unit normal pointing into
/// the `+` phase.
#[derive(Clone, Debug)]
pub struct InterfaceCurve {
    pub vertices: Vec<usize>,
    pub normals: Vec<Vec2>,
}

impl InterfaceCurve {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_segments(&self) -> usize {
        self.vertices.len()
    }

    pub fn segment(&self, j: usize) -> (usize, usize) {
        (self.vertices[j], self.vertices[(j + 1) % self.vertices.len()])
    }

    pub fn coords(&self, tri: &Triangulation) -> Vec<Vec2> {
        self.vertices.iter().map(|&v| tri.vertices[v]).collect()
    }

    pub fn segment_len(&self, tri: &Triangulation, j: usize) -> f64 {
        let (a, b) = self.segment(j);
        tri.vertices[a].dist(tri.vertices[b])
    }

    pub fn total_length(&self, tri: &Triangulation) -> f64 {
        (0..self.n_segments()).map(|j| self.segment_len(tri, j)).sum()
    }
}

/// Bulk triangulation together with the embedded interface, per-element
/// phase labels and the piecewise constant material fields.
#[derive(Clone, Debug)]
pub struct FittedMesh {
    pub tri: Triangulation,
    pub interface: InterfaceCurve,
    pub labels: Vec<Phase>,
    pub density: Vec<f64>,
    pub viscosity: Vec<f64>,
}

/// Piecewise constant material parameters of the two phases.
#[derive(Clone, Copy, Debug)]
pub struct PhysParams {
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub gamma: f64,
}

impl PhysParams {
    pub fn uniform(rho: f64, mu: f64, gamma: f64) -> Self {
        PhysParams {
            rho_plus: rho,
            rho_minus: rho,
            mu_plus: mu,
            mu_minus: mu,
            gamma,
        }
    }
}

/// Classify phases and orient interface normals for a triangulation that is
/// fitted to the given interface vertex loop.
///
/// The `+` phase is the component touching the outer boundary; normals point
/// into it. Fails when the loop is not closed, a loop edge is not a bulk
/// edge, or the loop does not separate the mesh.
pub fn build_fitted_topology(
    tri: Triangulation,
    loop_vertices: Vec<usize>,
    phys: &PhysParams,
) -> Result<FittedMesh> {
    let k_gamma = loop_vertices.len();
    if k_gamma < 3 {
        return Err(Error::LoopNotClosed);
    }
    {
        let mut seen = vec![false; tri.n_vertices()];
        for &v in &loop_vertices {
            if v >= tri.n_vertices() || seen[v] {
                return Err(Error::LoopNotClosed);
            }
            seen[v] = true;
        }
    }
    let tol = GEOM_REL_TOL * tri.diameter();
    for j in 0..k_gamma {
        let a = loop_vertices[j];
        let b = loop_vertices[(j + 1) % k_gamma];
        if tri.vertices[a].dist(tri.vertices[b]) <= tol {
            return Err(Error::DegenerateSegment(j));
        }
    }

    // Each loop segment must be a bulk edge shared by exactly two triangles.
    let edge_map = tri.edge_map();
    let mut seg_tris: Vec<[usize; 2]> = Vec::with_capacity(k_gamma);
    let mut is_interface_edge: HashMap<(usize, usize), usize> = HashMap::new();
    for j in 0..k_gamma {
        let a = loop_vertices[j];
        let b = loop_vertices[(j + 1) % k_gamma];
        let key = (a.min(b), a.max(b));
        match edge_map.get(&key) {
            Some(adj) if adj.len() == 2 => {
                seg_tris.push([adj[0].0, adj[1].0]);
                is_interface_edge.insert(key, j);
            }
            _ => return Err(Error::NotFitted(a, b)),
        }
    }

    // Flood fill the + phase from a triangle touching the outer boundary.
    // The rightmost vertex always lies on the outer boundary, never on the
    // interface or a hole, so its star is a safe seed.
    let start = outermost_triangle(&tri).ok_or(Error::NonSeparatingLoop)?;
    let n_tris = tri.n_triangles();
    let mut labels = vec![None::<Phase>; n_tris];
    flood(&tri, &is_interface_edge, start, Phase::Plus, &mut labels);
    let first_unlabeled = labels.iter().position(|l| l.is_none());
    match first_unlabeled {
        Some(seed) => {
            flood(&tri, &is_interface_edge, seed, Phase::Minus, &mut labels);
        }
        None => return Err(Error::NonSeparatingLoop),
    }
    if labels.iter().any(|l| l.is_none()) {
        // more than two components; the remaining ones were not reached
        return Err(Error::NonSeparatingLoop);
    }
    let labels: Vec<Phase> = labels.into_iter().map(|l| l.unwrap()).collect();
    // Every interface segment must separate a + from a - triangle.
    for (j, st) in seg_tris.iter().enumerate() {
        if labels[st[0]] == labels[st[1]] {
            return Err(Error::SelfIntersection(j));
        }
    }

    // Normals: rotate the segment tangent by -90 degrees, then flip globally
    // so they point into the + phase. The parity of a ray cast from a +
    // barycentre (even-odd point-in-polygon test) tells which side the +
    // phase occupies; together with the loop orientation this fixes the flip.
    let poly: Vec<Vec2> = loop_vertices.iter().map(|&v| tri.vertices[v]).collect();
    let mut normals: Vec<Vec2> = (0..k_gamma)
        .map(|j| {
            let a = poly[j];
            let b = poly[(j + 1) % k_gamma];
            (b - a).perp_cw().normalized()
        })
        .collect();
    let plus_tri = (0..n_tris)
        .find(|&t| labels[t] == Phase::Plus)
        .ok_or(Error::NonSeparatingLoop)?;
    let plus_inside = point_in_polygon(tri.barycentre(plus_tri), &poly);
    let ccw = crate::geo::polygon_area(&poly) > 0.0;
    // CCW loop: perp_cw(tangent) points away from the enclosed region.
    let outward_is_plus = !plus_inside;
    let flip = outward_is_plus != ccw;
    if flip {
        for n in &mut normals {
            *n = -*n;
        }
    }

    let density: Vec<f64> = labels
        .iter()
        .map(|l| match l {
            Phase::Plus => phys.rho_plus,
            Phase::Minus => phys.rho_minus,
        })
        .collect();
    let viscosity: Vec<f64> = labels
        .iter()
        .map(|l| match l {
            Phase::Plus => phys.mu_plus,
            Phase::Minus => phys.mu_minus,
        })
        .collect();

    Ok(FittedMesh {
        tri,
        interface: InterfaceCurve {
            vertices: loop_vertices,
            normals,
        },
        labels,
        density,
        viscosity,
    })
}

fn outermost_triangle(tri: &Triangulation) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in tri.vertices.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) => {
                let bv = tri.vertices[b];
                if v.x > bv.x || (v.x == bv.x && v.y > bv.y) {
                    best = Some(i);
                }
            }
        }
    }
    let v = best?;
    (0..tri.n_triangles()).find(|&t| tri.triangles[t].contains(&v))
}

fn flood(
    tri: &Triangulation,
    interface_edges: &HashMap<(usize, usize), usize>,
    start: usize,
    phase: Phase,
    labels: &mut [Option<Phase>],
) {
    let mut stack = vec![start];
    labels[start] = Some(phase);
    while let Some(t) = stack.pop() {
        for k in 0..3 {
            if let Some(nb) = tri.neighbors[t][k] {
                if labels[nb].is_some() {
                    continue;
                }
                let a = tri.triangles[t][(k + 1) % 3];
                let b = tri.triangles[t][(k + 2) % 3];
                if interface_edges.contains_key(&(a.min(b), a.max(b))) {
                    continue;
                }
                labels[nb] = Some(phase);
                stack.push(nb);
            }
        }
    }
}

/// Minimum interior angle over all triangles, in degrees. The angle at each
/// corner is computed from the face normals as acos(-n_i . n_j); a
/// degenerate triangle reports 0.
pub fn min_angle(tri: &Triangulation) -> f64 {
    let mut min = f64::INFINITY;
    for t in 0..tri.n_triangles() {
        min = min.min(tri_min_angle(&tri.tri_coords(t)));
    }
    if min.is_infinite() {
        0.0
    } else {
        min
    }
}

/// Minimum angle of a single triangle in degrees.
pub fn tri_min_angle(p: &[Vec2; 3]) -> f64 {
    if orient2d(p[0], p[1], p[2]).abs() == 0.0 {
        return 0.0;
    }
    // outward normal of edge opposite vertex k
    let normal = |k: usize| -> Vec2 {
        let a = p[(k + 1) % 3];
        let b = p[(k + 2) % 3];
        (b - a).perp_cw().normalized()
    };
    let n = [normal(0), normal(1), normal(2)];
    let mut min = f64::INFINITY;
    for i in 0..3 {
        let j = (i + 1) % 3;
        let c = (-n[i].dot(n[j])).clamp(-1.0, 1.0);
        min = min.min(c.acos());
    }
    min.to_degrees()
}

/// The remeshing criterion: true when the minimum angle is at or below the
/// threshold `c_a` (degrees).
pub fn needs_remesh(tri: &Triangulation, c_a: f64) -> bool {
    min_angle(tri) <= c_a
}

/// The fitted invariant: every interface segment is an interior bulk edge
/// whose two adjacent triangles carry opposite phase labels.
pub fn check_fitted(fm: &FittedMesh) -> crate::error::Result<()> {
    let edge_map = fm.tri.edge_map();
    for j in 0..fm.interface.n_segments() {
        let (a, b) = fm.interface.segment(j);
        match edge_map.get(&(a.min(b), a.max(b))) {
            Some(adj) if adj.len() == 2 => {
                if fm.labels[adj[0].0] == fm.labels[adj[1].0] {
                    return Err(crate::error::Error::SelfIntersection(j));
                }
            }
            _ => return Err(crate::error::Error::NotFitted(a, b)),
        }
    }
    Ok(())
}

/// Area of the minus phase and length of the interface polygon.
pub fn inner_measures(fm: &FittedMesh) -> (f64, f64) {
    let area = (0..fm.tri.n_triangles())
        .filter(|&t| fm.labels[t] == Phase::Minus)
        .map(|t| fm.tri.tri_area(t))
        .sum();
    let length = fm.interface.total_length(&fm.tri);
    (area, length)
}
