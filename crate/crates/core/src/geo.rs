//! Small 2D vector type and the geometric predicates shared by the mesh
//! machinery. All predicates work with a tolerance relative to the domain
//! diameter; exact arithmetic is not used.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Relative tolerance for geometric predicates, scaled by the domain diameter.
pub const GEOM_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product `self x o`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotation by -90 degrees: tangent -> right-hand normal.
    pub fn perp_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn comp(self, c: usize) -> f64 {
        match c {
            0 => self.x,
            _ => self.y,
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}
impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}
impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}
impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}
impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}
impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}
impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

/// Twice the signed area of the triangle (a, b, c); positive when CCW.
pub fn orient2d(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Signed area of the triangle (a, b, c).
pub fn tri_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * orient2d(a, b, c)
}

/// Positive when `p` lies strictly inside the circumcircle of the CCW
/// triangle (a, b, c).
pub fn incircle(a: Vec2, b: Vec2, c: Vec2, p: Vec2) -> f64 {
    let ax = a.x - p.x;
    let ay = a.y - p.y;
    let bx = b.x - p.x;
    let by = b.y - p.y;
    let cx = c.x - p.x;
    let cy = c.y - p.y;
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

/// Circumcenter of triangle (a, b, c). Caller must ensure non-degeneracy.
pub fn circumcenter(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    let d = 2.0 * orient2d(a, b, c);
    let a2 = a.norm_sq();
    let b2 = b.norm_sq();
    let c2 = c.norm_sq();
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    Vec2::new(ux, uy)
}

/// Barycentric coordinates of `p` with respect to triangle (a, b, c).
pub fn barycentric(a: Vec2, b: Vec2, c: Vec2, p: Vec2) -> [f64; 3] {
    let d = orient2d(a, b, c);
    let l0 = orient2d(p, b, c) / d;
    let l1 = orient2d(a, p, c) / d;
    let l2 = orient2d(a, b, p) / d;
    [l0, l1, l2]
}

/// Distance from point `p` to the closed segment (a, b).
pub fn point_segment_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = (p - a).dot(ab) / ab.norm_sq();
    let t = t.clamp(0.0, 1.0);
    (a + ab * t).dist(p)
}

/// Even-odd test: true when `p` lies inside the closed polygon `poly`.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > p.y) != (pj.y > p.y) {
            let xint = pi.x + (p.y - pi.y) / (pj.y - pi.y) * (pj.x - pi.x);
            if p.x < xint {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Area of a closed polygon by the shoelace formula (positive when CCW).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += poly[i].cross(poly[j]);
    }
    0.5 * s
}
