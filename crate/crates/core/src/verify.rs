//! Verification machinery: the two expanding-circle exact solutions, the
//! time-accumulated error norms with their estimated convergence orders,
//! and the rising-bubble benchmark quantities.

use crate::fe::{bary_gradients, interpolate_p2, p2_basis, DofMapP2, P2Velocity};
use crate::geo::Vec2;
use crate::mesh::{inner_measures, FittedMesh, Phase, PhysParams};
use crate::mesher::DomainSpec;
use crate::quadrature::tri_rule;
use crate::schemes::{Problem, SchemeState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseId {
    /// Expanding circle with linear velocity and constant divergence.
    Sol1,
    /// Divergence-free expanding circle on the square with a hole.
    Sol2,
}

/// A closed-form exact solution of the two-phase flow problem, posed as an
/// expanding circle centred at the origin.
#[derive(Clone, Copy, Debug)]
pub struct ExactCase {
    pub id: CaseId,
    pub alpha: f64,
    pub r0: f64,
    pub phys: PhysParams,
}

impl ExactCase {
    pub fn sol1(alpha: f64) -> ExactCase {
        ExactCase {
            id: CaseId::Sol1,
            alpha,
            r0: 0.5,
            phys: PhysParams::uniform(1.0, 1.0, 1.0),
        }
    }

    pub fn sol2(alpha: f64) -> ExactCase {
        ExactCase {
            id: CaseId::Sol2,
            alpha,
            r0: 0.5,
            phys: PhysParams {
                rho_plus: 1e3,
                rho_minus: 1e2,
                mu_plus: 10.0,
                mu_minus: 1.0,
                gamma: 1.0,
            },
        }
    }

    pub fn parse(s: &str) -> Option<ExactCase> {
        match s {
            "sol1" => Some(ExactCase::sol1(0.15)),
            "sol2" => Some(ExactCase::sol2(0.15)),
            _ => None,
        }
    }

    pub fn domain(&self, h_char: f64) -> DomainSpec {
        match self.id {
            CaseId::Sol1 => DomainSpec::square2(h_char),
            CaseId::Sol2 => DomainSpec::square2_with_hole(h_char),
        }
    }

    pub fn domain_area(&self) -> f64 {
        match self.id {
            CaseId::Sol1 => 4.0,
            CaseId::Sol2 => 4.0 - 4.0 / 9.0,
        }
    }

    pub fn radius(&self, t: f64) -> f64 {
        match self.id {
            CaseId::Sol1 => (self.alpha * t).exp() * self.r0,
            CaseId::Sol2 => (self.r0 * self.r0 + 2.0 * self.alpha * t).sqrt(),
        }
    }

    /// Mean curvature of the circle, negative for the convex inner phase.
    pub fn curvature(&self, t: f64) -> f64 {
        -1.0 / self.radius(t)
    }

    pub fn velocity(&self, z: Vec2, _t: f64) -> Vec2 {
        match self.id {
            CaseId::Sol1 => z * self.alpha,
            CaseId::Sol2 => z * (self.alpha / z.norm_sq()),
        }
    }

    /// Pressure with the mean correction computed from `inner_area` (the
    /// polygonal area when comparing against discrete solutions, the exact
    /// disc area otherwise).
    pub fn pressure(&self, z: Vec2, t: f64, inner_area: f64) -> f64 {
        let r = self.radius(t);
        let kappa = self.curvature(t);
        let dmu = self.phys.mu_plus - self.phys.mu_minus;
        let c = match self.id {
            CaseId::Sol1 => -(self.phys.gamma - 2.0 * self.alpha * dmu * r) * kappa,
            CaseId::Sol2 => -(self.phys.gamma + 2.0 * self.alpha * dmu / r) * kappa,
        };
        let chi = if z.norm() < r { 1.0 } else { 0.0 };
        c * (chi - inner_area / self.domain_area())
    }

    pub fn exact_inner_area(&self, t: f64) -> f64 {
        let r = self.radius(t);
        std::f64::consts::PI * r * r
    }

    pub fn f_div(&self) -> Option<f64> {
        match self.id {
            CaseId::Sol1 => Some(2.0 * self.alpha),
            CaseId::Sol2 => None,
        }
    }

    pub fn problem(&self) -> Problem {
        let alpha = self.alpha;
        let case = *self;
        let f1: Box<dyn Fn(Vec2, f64) -> Vec2> = match self.id {
            CaseId::Sol1 => Box::new(move |z, _| z * (alpha * alpha)),
            CaseId::Sol2 => Box::new(move |z, _| {
                let r2 = z.norm_sq();
                z * (-alpha * alpha / (r2 * r2))
            }),
        };
        Problem {
            phys: self.phys,
            f1,
            f2: Box::new(|_, _| Vec2::ZERO),
            g: Box::new(move |z, t| case.velocity(z, t)),
            f_div: self.f_div().map(|fd| {
                Box::new(move |_: Vec2, _: f64| fd) as Box<dyn Fn(Vec2, f64) -> f64>
            }),
        }
    }
}

/// Time-accumulated error norms of one run.
#[derive(Clone, Copy, Debug, Default)]
pub struct ErrorReport {
    pub interface_sup: f64,
    pub velocity_l2: f64,
    pub velocity_h1: f64,
    pub pressure_l2: f64,
    pub cpu_seconds: f64,
}

/// Estimated order of convergence between two levels with mesh sizes
/// h_coarse > h_fine.
pub fn eoc(err_coarse: f64, err_fine: f64, h_ratio: f64) -> f64 {
    (err_fine / err_coarse).ln() / (1.0 / h_ratio).ln()
}

/// Incremental accumulator of the paper-style error quantities: feed every
/// state of the trajectory (the initial state is skipped), then `finish`.
pub struct ErrorAccumulator {
    case: ExactCase,
    tau: f64,
    interface_sup: f64,
    vel_l2_sq: f64,
    vel_h1_sq: f64,
    p_l2_sq: f64,
}

impl ErrorAccumulator {
    pub fn new(case: ExactCase, tau: f64) -> Self {
        ErrorAccumulator {
            case,
            tau,
            interface_sup: 0.0,
            vel_l2_sq: 0.0,
            vel_h1_sq: 0.0,
            p_l2_sq: 0.0,
        }
    }

    pub fn add_state(&mut self, state: &SchemeState) {
        if state.index == 0 {
            return;
        }
        let t = state.t;
        let r = self.case.radius(t);

        // interface: max vertex distance to the exact circle
        for &v in &state.mesh.interface.vertices {
            let e = (state.mesh.tri.vertices[v].norm() - r).abs();
            self.interface_sup = self.interface_sup.max(e);
        }

        // velocity errors against the interpolated exact velocity on the
        // mesh carrying U^m
        let case = self.case;
        let exact = interpolate_p2(|p| case.velocity(p, t), &state.vel_dofmap);
        let mut diff = state.velocity.clone();
        for (d, e) in diff.coeffs.iter_mut().zip(&exact.coeffs) {
            *d -= e;
        }
        let (l2_sq, h1_semi_sq) = p2_norms_sq(&diff, &state.vel_mesh, &state.vel_dofmap);
        self.vel_l2_sq += self.tau * l2_sq;
        self.vel_h1_sq += self.tau * (l2_sq + h1_semi_sq);

        // pressure error with the discrete inner area in the mean
        // correction (the minus phase region, which excludes any hole)
        let (inner_area, _) = inner_measures(&state.mesh);
        let p_err = pressure_error_sq(state, &self.case, t, inner_area, r);
        self.p_l2_sq += self.tau * p_err;
    }

    pub fn finish(self, cpu_seconds: f64) -> ErrorReport {
        ErrorReport {
            interface_sup: self.interface_sup,
            velocity_l2: self.vel_l2_sq.sqrt(),
            velocity_h1: self.vel_h1_sq.sqrt(),
            pressure_l2: self.p_l2_sq.sqrt(),
            cpu_seconds,
        }
    }
}

/// L2 and H1-seminorm squares of a P2 field.
fn p2_norms_sq(u: &P2Velocity, fm: &FittedMesh, dofmap: &DofMapP2) -> (f64, f64) {
    let rule = tri_rule(5).expect("rule");
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for t in 0..fm.tri.n_triangles() {
        let coords = fm.tri.tri_coords(t);
        let area = fm.tri.tri_area(t);
        let grad_l = bary_gradients(&coords);
        for q in 0..rule.points.len() {
            let w = rule.weights[q] * area;
            let v = u.eval(dofmap, t, rule.points[q]);
            l2 += w * v.norm_sq();
            let g = u.eval_gradient(dofmap, t, rule.points[q], &grad_l);
            h1 += w * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
    }
    (l2, h1)
}

/// Squared L2 error of the composite pressure against the discontinuous
/// exact pressure. Elements near the exact circle are integrated on a
/// subdivided quadrature to resolve the jump location mismatch.
fn pressure_error_sq(
    state: &SchemeState,
    case: &ExactCase,
    t: f64,
    inner_area: f64,
    r: f64,
) -> f64 {
    let fm = &state.vel_mesh;
    let p = &state.pressure;
    let mut total = 0.0;
    for el in 0..fm.tri.n_triangles() {
        let coords = fm.tri.tri_coords(el);
        let verts = fm.tri.triangles[el];
        let p1 = [p.p1[verts[0]], p.p1[verts[1]], p.p1[verts[2]]];
        let p0 = p.p0[el];
        total += pressure_err_rec(&coords, p1, p0, case, t, inner_area, r, 3);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn pressure_err_rec(
    coords: &[Vec2; 3],
    p1: [f64; 3],
    p0: f64,
    case: &ExactCase,
    t: f64,
    inner_area: f64,
    r: f64,
    depth: usize,
) -> f64 {
    let s: Vec<f64> = coords.iter().map(|c| c.norm() - r).collect();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let diam = coords[0]
        .dist(coords[1])
        .max(coords[1].dist(coords[2]))
        .max(coords[2].dist(coords[0]));
    let straddles = smin < 0.25 * diam && smax > -0.25 * diam;
    if depth > 0 && straddles {
        // split at edge midpoints; the P1 coefficients restrict linearly
        let m = [
            (coords[1] + coords[2]) * 0.5,
            (coords[2] + coords[0]) * 0.5,
            (coords[0] + coords[1]) * 0.5,
        ];
        let pm = [
            0.5 * (p1[1] + p1[2]),
            0.5 * (p1[2] + p1[0]),
            0.5 * (p1[0] + p1[1]),
        ];
        let mut sum = 0.0;
        sum += pressure_err_rec(&[coords[0], m[2], m[1]], [p1[0], pm[2], pm[1]], p0, case, t, inner_area, r, depth - 1);
        sum += pressure_err_rec(&[coords[1], m[0], m[2]], [p1[1], pm[0], pm[2]], p0, case, t, inner_area, r, depth - 1);
        sum += pressure_err_rec(&[coords[2], m[1], m[0]], [p1[2], pm[1], pm[0]], p0, case, t, inner_area, r, depth - 1);
        sum += pressure_err_rec(&[m[0], m[1], m[2]], [pm[0], pm[1], pm[2]], p0, case, t, inner_area, r, depth - 1);
        return sum;
    }
    let rule = tri_rule(5).expect("rule");
    let area = crate::geo::tri_area(coords[0], coords[1], coords[2]);
    let mut sum = 0.0;
    for q in 0..rule.points.len() {
        let l = rule.points[q];
        let z = coords[0] * l[0] + coords[1] * l[1] + coords[2] * l[2];
        let ph = p1[0] * l[0] + p1[1] * l[1] + p1[2] * l[2] + p0;
        let pe = case.pressure(z, t, inner_area);
        sum += rule.weights[q] * area * (ph - pe) * (ph - pe);
    }
    sum
}

/// Benchmark quantities of one state: vertical centre of mass, degree of
/// sphericity, rise velocity, and the inner area.
pub fn bubble_quantities(state: &SchemeState) -> (f64, f64, f64, f64) {
    let fm = &state.mesh;
    let (area_minus, gamma_len) = inner_measures(fm);
    let rule = tri_rule(5).expect("rule");

    // centre of mass over the current minus phase
    let mut zc = 0.0;
    for t in 0..fm.tri.n_triangles() {
        if fm.labels[t] != Phase::Minus {
            continue;
        }
        let coords = fm.tri.tri_coords(t);
        let area = fm.tri.tri_area(t);
        for q in 0..rule.points.len() {
            let l = rule.points[q];
            let z = coords[0] * l[0] + coords[1] * l[1] + coords[2] * l[2];
            zc += rule.weights[q] * area * z.y;
        }
    }
    zc /= area_minus;

    let sphericity = 2.0 * (std::f64::consts::PI * area_minus).sqrt() / gamma_len;

    // rise velocity over the mesh carrying U^m
    let vm = &state.vel_mesh;
    let (vm_area_minus, _) = inner_measures(vm);
    let mut vc = 0.0;
    for t in 0..vm.tri.n_triangles() {
        if vm.labels[t] != Phase::Minus {
            continue;
        }
        let area = vm.tri.tri_area(t);
        for q in 0..rule.points.len() {
            let basis = p2_basis(rule.points[q]);
            let mut uy = 0.0;
            for (k, &phi) in basis.iter().enumerate() {
                uy += state.velocity.coeffs[2 * state.vel_dofmap.tri_dofs[t][k] as usize + 1] * phi;
            }
            vc += rule.weights[q] * area * uy;
        }
    }
    vc /= vm_area_minus;

    (zc, sphericity, vc, area_minus)
}

/// One row of the rising-bubble time series.
#[derive(Clone, Copy, Debug)]
pub struct BubbleSample {
    pub t: f64,
    pub z_c: f64,
    pub sphericity: f64,
    pub v_c: f64,
    pub rel_area: f64,
    pub n_elements: usize,
    pub n_remesh: usize,
}

/// Accumulates the benchmark time series over a run.
#[derive(Default)]
pub struct BubbleSeries {
    pub samples: Vec<BubbleSample>,
    initial_area: Option<f64>,
}

impl BubbleSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self, state: &SchemeState) {
        let (z_c, sphericity, v_c, area) = bubble_quantities(state);
        let a0 = *self.initial_area.get_or_insert(area);
        self.samples.push(BubbleSample {
            t: state.t,
            z_c,
            sphericity,
            v_c,
            rel_area: area / a0,
            n_elements: state.mesh.tri.n_triangles(),
            n_remesh: state.remesh_count,
        });
    }

    pub fn max_rise_velocity(&self) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.v_c, s.t))
            .fold(None, |acc, (v, t)| match acc {
                Some((bv, _)) if bv >= v => acc,
                _ => Some((v, t)),
            })
    }

    pub fn min_sphericity(&self) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.sphericity, s.t))
            .fold(None, |acc, (v, t)| match acc {
                Some((bv, _)) if bv <= v => acc,
                _ => Some((v, t)),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_fitted_topology;
    use crate::mesher::{circle_polygon, generate_fitted};

    #[test]
    fn sol1_pressure_values_at_t0() {
        let case = ExactCase::sol1(0.15);
        // exact disc area ratio: pi/16 on (-1,1)^2
        let inner = case.exact_inner_area(0.0);
        let p_in = case.pressure(Vec2::new(0.1, 0.0), 0.0, inner);
        let p_out = case.pressure(Vec2::new(0.9, 0.0), 0.0, inner);
        assert!((p_in - 2.0 * (1.0 - std::f64::consts::PI / 16.0)).abs() < 1e-12);
        assert!((p_out + 2.0 * std::f64::consts::PI / 16.0).abs() < 1e-12);
    }

    #[test]
    fn static_case_jump_is_laplace() {
        let case = ExactCase::sol1(0.0);
        assert_eq!(case.velocity(Vec2::new(0.3, 0.4), 1.0), Vec2::ZERO);
        let inner = case.exact_inner_area(0.5);
        let jump = case.pressure(Vec2::new(0.01, 0.0), 0.5, inner)
            - case.pressure(Vec2::new(0.99, 0.0), 0.5, inner);
        // [p] = -gamma kappa = gamma / r
        assert!((jump - 1.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn sol2_radius_and_velocity() {
        let case = ExactCase::sol2(0.15);
        let r1 = case.radius(1.0);
        assert!((r1 - 0.55f64.sqrt()).abs() < 1e-14);
        let u = case.velocity(Vec2::new(1.0, 0.0), 1.0);
        assert!((u - Vec2::new(0.15, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn stress_balance_identity_over_time() {
        for case in [ExactCase::sol1(0.15), ExactCase::sol2(0.15)] {
            let dmu = case.phys.mu_plus - case.phys.mu_minus;
            for i in 0..20 {
                let t = i as f64 * 0.05;
                let r = case.radius(t);
                let kappa = case.curvature(t);
                let inner = case.exact_inner_area(t);
                let eps = 1e-9;
                let p_in = case.pressure(Vec2::new(r - eps, 0.0), t, inner);
                let p_out = case.pressure(Vec2::new(r + eps, 0.0), t, inner);
                // normal-stress balance for the radially symmetric flows
                let visc_jump = match case.id {
                    CaseId::Sol1 => 2.0 * case.alpha * dmu,
                    CaseId::Sol2 => -2.0 * case.alpha * dmu / (r * r),
                };
                let resid = (p_in - p_out) + case.phys.gamma * kappa + visc_jump;
                assert!(resid.abs() < 1e-12, "t={t}: residual {resid}");
            }
        }
    }

    #[test]
    fn eoc_reproduces_paper_example() {
        let e = eoc(3.05157e-01, 1.57053e-01, 2.0);
        assert!((e - 0.96).abs() < 0.005, "EOC {e}");
    }

    #[test]
    fn bubble_quantities_on_static_disc() {
        let k = 64;
        let r = 0.25;
        let h = 2.0 * std::f64::consts::PI * r / k as f64;
        let spec = DomainSpec::bench_column(h);
        let gamma = circle_polygon(Vec2::new(0.5, 0.5), r, k);
        let (tri, ids) = generate_fitted(&spec, &gamma).unwrap();
        let phys = PhysParams {
            rho_plus: 1e3,
            rho_minus: 1e2,
            mu_plus: 10.0,
            mu_minus: 1.0,
            gamma: 24.5,
        };
        let fm = build_fitted_topology(tri, ids, &phys).unwrap();
        let state = SchemeState::initial(fm, |_| Vec2::ZERO).unwrap();
        let (zc, sph, vc, _) = bubble_quantities(&state);
        assert!((zc - 0.5).abs() < 1e-10, "z_c {zc}");
        assert_eq!(vc, 0.0);
        assert!(sph >= 0.9995 && sph <= 1.0, "sphericity {sph}");
    }

    #[test]
    fn sphericity_of_square_region() {
        // unit inner square: sphericity = sqrt(pi)/2
        let (tri, gamma_loop) = square_fixture();
        let phys = PhysParams::uniform(1.0, 1.0, 1.0);
        let fm = build_fitted_topology(tri, gamma_loop, &phys).unwrap();
        let state = SchemeState::initial(fm, |_| Vec2::ZERO).unwrap();
        let (_, sph, _, _) = bubble_quantities(&state);
        assert!((sph - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    fn square_fixture() -> (crate::mesh::Triangulation, Vec<usize>) {
        // 3x3 grid with the middle cell as the inner region
        let n = 4usize;
        let mut vertices = Vec::new();
        for j in 0..n {
            for i in 0..n {
                vertices.push(Vec2::new(i as f64, j as f64));
            }
        }
        let idx = |i: usize, j: usize| j * n + i;
        let mut triangles = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut boundary = Vec::new();
        for i in 0..n - 1 {
            for (e0, e1) in [
                (idx(i, 0), idx(i + 1, 0)),
                (idx(i, n - 1), idx(i + 1, n - 1)),
                (idx(0, i), idx(0, i + 1)),
                (idx(n - 1, i), idx(n - 1, i + 1)),
            ] {
                boundary.push(crate::mesh::BoundaryEdge {
                    v: [e0, e1],
                    marker: crate::mesh::Marker::Dirichlet,
                });
            }
        }
        let tri = crate::mesh::Triangulation::new(vertices, triangles, boundary);
        (tri, vec![idx(1, 1), idx(2, 1), idx(2, 2), idx(1, 2)])
    }

    #[test]
    fn rigid_translation_shifts_centre_only() {
        let (tri, gamma_loop) = square_fixture();
        let phys = PhysParams::uniform(1.0, 1.0, 1.0);
        let fm = build_fitted_topology(tri, gamma_loop, &phys).unwrap();
        let state = SchemeState::initial(fm.clone(), |_| Vec2::ZERO).unwrap();
        let (zc0, sph0, _, a0) = bubble_quantities(&state);
        let mut shifted = fm;
        for v in shifted.tri.vertices.iter_mut() {
            v.y += 0.25;
        }
        let state2 = SchemeState::initial(shifted, |_| Vec2::ZERO).unwrap();
        let (zc1, sph1, _, a1) = bubble_quantities(&state2);
        assert!((zc1 - zc0 - 0.25).abs() < 1e-12);
        assert!((sph1 - sph0).abs() < 1e-13);
        assert!((a1 - a0).abs() < 1e-13);
    }
}
