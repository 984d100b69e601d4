//! Quadrature rules. One degree-5 rule serves all bulk integrals (the
//! implicit convection integrand is the worst case at degree 5); interface
//! line integrals use 3-point Gauss, exact for the cubic coupling integrand.

use crate::error::{Error, Result};

/// A rule on the reference triangle in barycentric coordinates. Weights are
/// relative to the triangle area and sum to one.
#[derive(Clone, Debug)]
pub struct TriRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

const W_CENTROID: f64 = 0.225;
const B1: f64 = 0.470_142_064_105_115_1;
const A1: f64 = 1.0 - 2.0 * B1;
const W1: f64 = 0.132_394_152_788_506_2;
const B2: f64 = 0.101_286_507_323_456_34;
const A2: f64 = 1.0 - 2.0 * B2;
const W2: f64 = 0.125_939_180_544_827_15;

const DEG5_POINTS: [[f64; 3]; 7] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [A1, B1, B1],
    [B1, A1, B1],
    [B1, B1, A1],
    [A2, B2, B2],
    [B2, A2, B2],
    [B2, B2, A2],
];
const DEG5_WEIGHTS: [f64; 7] = [W_CENTROID, W1, W1, W1, W2, W2, W2];

/// The 7-point degree-5 rule, returned for any requested degree up to 5.
pub fn tri_rule(degree: usize) -> Result<TriRule> {
    if degree > 5 {
        return Err(Error::UnsupportedQuadratureDegree(degree));
    }
    Ok(TriRule {
        points: &DEG5_POINTS,
        weights: &DEG5_WEIGHTS,
    })
}

/// 3-point Gauss-Legendre rule on [0, 1]: (t, w) with weights summing to 1.
pub fn gauss3_unit() -> [(f64, f64); 3] {
    let s = (3.0f64 / 5.0).sqrt();
    [
        (0.5 * (1.0 - s), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + s), 5.0 / 18.0),
    ]
}
