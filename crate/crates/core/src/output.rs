//! Output emission: VTK legacy unstructured grids with each triangle
//! subdivided into four so the quadratic velocity is sampled at all its
//! nodes, RFC-4180 CSV time series, and the convergence error table.
//! All writers format floats with nine significant digits so identical runs
//! produce identical bytes.

use crate::error::Result;
use crate::fe::DofMapP2;
use crate::mesh::Phase;
use crate::schemes::SchemeState;
use crate::verify::{eoc, BubbleSample, ErrorReport};
use std::fmt::Write as _;
use std::path::Path;

fn fmt9(x: f64) -> String {
    format!("{:.8e}", x)
}

/// Write one state as a VTK legacy ASCII unstructured grid. Points are the
/// P2 nodes (vertices and edge midpoints); each bulk triangle becomes four
/// linear cells. Velocity is point data; the composite pressure is written
/// as its P1 point part plus the P0 cell part, along with the phase label.
pub fn write_vtk(state: &SchemeState, path: &Path) -> Result<()> {
    let fm = &state.vel_mesh;
    let dm = &state.vel_dofmap;
    let n_pts = dm.n_scalar;
    let n_tris = fm.tri.n_triangles();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ntwo-phase flow state\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n_pts} double");
    for p in &dm.node_pos {
        let _ = writeln!(s, "{} {} 0", fmt9(p.x), fmt9(p.y));
    }
    let _ = writeln!(s, "CELLS {} {}", 4 * n_tris, 4 * n_tris * 4);
    for t in 0..n_tris {
        let d = &dm.tri_dofs[t];
        // corners (v_k with its two adjacent midpoints), then the centre
        let _ = writeln!(s, "3 {} {} {}", d[0], d[5], d[4]);
        let _ = writeln!(s, "3 {} {} {}", d[1], d[3], d[5]);
        let _ = writeln!(s, "3 {} {} {}", d[2], d[4], d[3]);
        let _ = writeln!(s, "3 {} {} {}", d[3], d[4], d[5]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", 4 * n_tris);
    for _ in 0..4 * n_tris {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {n_pts}");
    s.push_str("VECTORS velocity double\n");
    for dof in 0..n_pts {
        let v = state.velocity.node_value(dof);
        let _ = writeln!(s, "{} {} 0", fmt9(v.x), fmt9(v.y));
    }
    s.push_str("SCALARS pressure_p1 double 1\nLOOKUP_TABLE default\n");
    for dof in 0..n_pts {
        let val = if dof < dm.n_vertices {
            state.pressure.p1[dof]
        } else {
            let (a, b) = dm.edges[dof - dm.n_vertices];
            0.5 * (state.pressure.p1[a as usize] + state.pressure.p1[b as usize])
        };
        let _ = writeln!(s, "{}", fmt9(val));
    }
    let _ = writeln!(s, "CELL_DATA {}", 4 * n_tris);
    s.push_str("SCALARS pressure_p0 double 1\nLOOKUP_TABLE default\n");
    for t in 0..n_tris {
        let line = fmt9(state.pressure.p0[t]);
        for _ in 0..4 {
            let _ = writeln!(s, "{line}");
        }
    }
    s.push_str("SCALARS phase double 1\nLOOKUP_TABLE default\n");
    for t in 0..n_tris {
        let v = match fm.labels[t] {
            Phase::Plus => 1.0,
            Phase::Minus => -1.0,
        };
        for _ in 0..4 {
            let _ = writeln!(s, "{}", fmt9(v));
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Expected number of VTK points for a mesh (vertices plus edges).
pub fn vtk_point_count(dm: &DofMapP2) -> usize {
    dm.n_scalar
}

/// RFC-4180 CSV of the benchmark time series, one row per recorded step.
pub fn write_series_csv(samples: &[BubbleSample], path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str("t,z_c,sphericity,V_c,rel_area,n_elements,n_remesh\r\n");
    for row in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}\r",
            fmt9(row.t),
            fmt9(row.z_c),
            fmt9(row.sphericity),
            fmt9(row.v_c),
            fmt9(row.rel_area),
            row.n_elements,
            row.n_remesh
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Error table over refinement levels, mirroring the convergence tables:
/// interface error, velocity errors, pressure error, per-level EOCs and CPU
/// seconds.
pub fn format_error_table(rows: &[(usize, ErrorReport)]) -> String {
    let mut s = String::new();
    s.push_str("J_Gamma,interface_error,velocity_L2,EOC_v,velocity_H1,pressure_L2,EOC_p,cpu_s\r\n");
    for (i, (j_gamma, r)) in rows.iter().enumerate() {
        let (eoc_v, eoc_p) = if i == 0 {
            ("-".to_string(), "-".to_string())
        } else {
            let prev = &rows[i - 1].1;
            let ev = if prev.velocity_l2 > 0.0 && r.velocity_l2 > 0.0 {
                format!("{:.2}", eoc(prev.velocity_l2, r.velocity_l2, 2.0))
            } else {
                "-".to_string()
            };
            let ep = if prev.pressure_l2 > 0.0 && r.pressure_l2 > 0.0 {
                format!("{:.2}", eoc(prev.pressure_l2, r.pressure_l2, 2.0))
            } else {
                "-".to_string()
            };
            (ev, ep)
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.1}\r",
            j_gamma,
            fmt9(r.interface_sup),
            fmt9(r.velocity_l2),
            eoc_v,
            fmt9(r.velocity_h1),
            fmt9(r.pressure_l2),
            eoc_p,
            r.cpu_seconds
        );
    }
    s
}

pub fn write_error_table(rows: &[(usize, ErrorReport)], path: &Path) -> Result<()> {
    std::fs::write(path, format_error_table(rows))?;
    Ok(())
}
