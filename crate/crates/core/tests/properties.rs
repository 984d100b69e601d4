//! Property tests over the geometric and algebraic invariants.

use proptest::prelude::*;
use tideflow::geo::{polygon_area, tri_area, Vec2};
use tideflow::interface::lumped_inner;
use tideflow::mesh::tri_min_angle;
use tideflow::sparse::Coo;

fn rot(p: Vec2, angle: f64, shift: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * p.x - s * p.y + shift.x, s * p.x + c * p.y + shift.y)
}

proptest! {
    #[test]
    fn min_angle_rigid_motion_invariant(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0,
        bx in -1.0f64..1.0, by in -1.0f64..1.0,
        cx in -1.0f64..1.0, cy in -1.0f64..1.0,
        angle in 0.0f64..std::f64::consts::TAU,
        sx in -5.0f64..5.0, sy in -5.0f64..5.0,
    ) {
        let p = [Vec2::new(ax, ay), Vec2::new(bx, by), Vec2::new(cx, cy)];
        prop_assume!(tri_area(p[0], p[1], p[2]).abs() > 1e-3);
        let shift = Vec2::new(sx, sy);
        let q = [rot(p[0], angle, shift), rot(p[1], angle, shift), rot(p[2], angle, shift)];
        let a0 = tri_min_angle(&p);
        let a1 = tri_min_angle(&q);
        prop_assert!((a0 - a1).abs() < 1e-10, "angles {a0} vs {a1}");
    }

    #[test]
    fn lumped_inner_symmetric_bilinear(
        vals in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0.1f64..2.0), 3..12),
        s in -3.0f64..3.0,
    ) {
        let v: Vec<f64> = vals.iter().map(|t| t.0).collect();
        let w: Vec<f64> = vals.iter().map(|t| t.1).collect();
        let lens: Vec<f64> = vals.iter().map(|t| t.2).collect();
        let a = lumped_inner(&v, &w, &lens);
        let b = lumped_inner(&w, &v, &lens);
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
        let c = lumped_inner(&sv, &w, &lens);
        prop_assert!((c - s * a).abs() < 1e-10 * (1.0 + c.abs()));
        // partition of unity: <1, 1> is the total length
        let ones = vec![1.0; v.len()];
        let total: f64 = lens.iter().sum();
        prop_assert!((lumped_inner(&ones, &ones, &lens) - total).abs() < 1e-12 * total);
    }

    #[test]
    fn polygon_area_rotation_invariant(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..10),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let poly: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let rotated: Vec<Vec2> = poly.iter().map(|&p| rot(p, angle, Vec2::ZERO)).collect();
        let a0 = polygon_area(&poly);
        let a1 = polygon_area(&rotated);
        prop_assert!((a0 - a1).abs() < 1e-12);
    }

    #[test]
    fn csr_matvec_matches_triplets(
        entries in prop::collection::vec((0usize..8, 0usize..8, -3.0f64..3.0), 0..40),
        x in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let mut coo = Coo::new(8, 8);
        let mut dense = [[0.0f64; 8]; 8];
        for &(r, c, v) in &entries {
            coo.push(r, c, v);
            dense[r][c] += v;
        }
        let csr = coo.to_csr();
        let y = csr.matvec(&x);
        for r in 0..8 {
            let want: f64 = (0..8).map(|c| dense[r][c] * x[c]).sum();
            prop_assert!((y[r] - want).abs() < 1e-12);
        }
        let yt = csr.matvec_transpose(&x);
        for c in 0..8 {
            let want: f64 = (0..8).map(|r| dense[r][c] * x[r]).sum();
            prop_assert!((yt[c] - want).abs() < 1e-12);
        }
    }
}
