//! MSH 2.2 ASCII mesh files for interop with external mesh generators.
//!
//! Physical tags: surface 1 = plus phase, surface 2 = minus phase,
//! line 11 = Dirichlet boundary, line 12 = free-slip boundary,
//! line 20 = interface.

use crate::error::{Error, Result};
use crate::geo::Vec2;
use crate::mesh::{BoundaryEdge, FittedMesh, Marker, Phase, Triangulation};
use std::fmt::Write as _;
use std::path::Path;

pub const TAG_PLUS: u32 = 1;
pub const TAG_MINUS: u32 = 2;
pub const TAG_DIRICHLET: u32 = 11;
pub const TAG_SLIP: u32 = 12;
pub const TAG_INTERFACE: u32 = 20;

pub fn save_msh(fm: &FittedMesh, path: &Path) -> Result<()> {
    let tri = &fm.tri;
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", tri.n_vertices());
    for (i, v) in tri.vertices.iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} 0", i + 1, v.x, v.y);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let n_elems = tri.n_triangles() + tri.boundary_edges.len() + fm.interface.n_segments();
    let _ = writeln!(s, "{n_elems}");
    let mut id = 1;
    for be in &tri.boundary_edges {
        let tag = match be.marker {
            Marker::Dirichlet => TAG_DIRICHLET,
            Marker::Slip => TAG_SLIP,
        };
        let _ = writeln!(s, "{id} 1 2 {tag} {tag} {} {}", be.v[0] + 1, be.v[1] + 1);
        id += 1;
    }
    for j in 0..fm.interface.n_segments() {
        let (a, b) = fm.interface.segment(j);
        let _ = writeln!(
            s,
            "{id} 1 2 {TAG_INTERFACE} {TAG_INTERFACE} {} {}",
            a + 1,
            b + 1
        );
        id += 1;
    }
    for (t, tv) in tri.triangles.iter().enumerate() {
        let tag = match fm.labels[t] {
            Phase::Plus => TAG_PLUS,
            Phase::Minus => TAG_MINUS,
        };
        let _ = writeln!(
            s,
            "{id} 2 2 {tag} {tag} {} {} {}",
            tv[0] + 1,
            tv[1] + 1,
            tv[2] + 1
        );
        id += 1;
    }
    s.push_str("$EndElements\n");
    std::fs::write(path, s)?;
    Ok(())
}

pub struct LoadedMsh {
    pub tri: Triangulation,
    /// Interface vertex loop in polygon order (empty when the file has no
    /// interface lines).
    pub gamma_loop: Vec<usize>,
}

pub fn load_msh(path: &Path) -> Result<LoadedMsh> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();

    expect_line(&mut lines, "$MeshFormat")?;
    let fmt = lines
        .next()
        .ok_or_else(|| Error::MalformedMsh("missing format line".into()))?;
    let version = fmt.split_whitespace().next().unwrap_or("");
    if version != "2.2" {
        return Err(Error::UnsupportedMshVersion(version.to_string()));
    }
    expect_line(&mut lines, "$EndMeshFormat")?;

    expect_line(&mut lines, "$Nodes")?;
    let n_nodes: usize = parse_next(&mut lines, "node count")?;
    let mut vertices = vec![Vec2::ZERO; n_nodes];
    for _ in 0..n_nodes {
        let line = lines
            .next()
            .ok_or_else(|| Error::MalformedMsh("truncated nodes".into()))?;
        let mut it = line.split_whitespace();
        let id: usize = field(&mut it, "node id")?;
        let x: f64 = field(&mut it, "x")?;
        let y: f64 = field(&mut it, "y")?;
        if id == 0 || id > n_nodes {
            return Err(Error::MalformedMsh(format!("node id {id} out of range")));
        }
        vertices[id - 1] = Vec2::new(x, y);
    }
    expect_line(&mut lines, "$EndNodes")?;

    expect_line(&mut lines, "$Elements")?;
    let n_elems: usize = parse_next(&mut lines, "element count")?;
    let mut triangles = Vec::new();
    let mut boundary_edges = Vec::new();
    let mut gamma_segments: Vec<(usize, usize)> = Vec::new();
    for _ in 0..n_elems {
        let line = lines
            .next()
            .ok_or_else(|| Error::MalformedMsh("truncated elements".into()))?;
        let mut it = line.split_whitespace();
        let _id: usize = field(&mut it, "element id")?;
        let ty: usize = field(&mut it, "element type")?;
        let n_tags: usize = field(&mut it, "tag count")?;
        if n_tags == 0 {
            return Err(Error::MalformedMsh("missing physical tags".into()));
        }
        let mut phys = 0u32;
        for k in 0..n_tags {
            let tag: u32 = field(&mut it, "tag")?;
            if k == 0 {
                phys = tag;
            }
        }
        match ty {
            1 => {
                let a: usize = field(&mut it, "line node")?;
                let b: usize = field(&mut it, "line node")?;
                match phys {
                    TAG_DIRICHLET => boundary_edges.push(BoundaryEdge {
                        v: [a - 1, b - 1],
                        marker: Marker::Dirichlet,
                    }),
                    TAG_SLIP => boundary_edges.push(BoundaryEdge {
                        v: [a - 1, b - 1],
                        marker: Marker::Slip,
                    }),
                    TAG_INTERFACE => gamma_segments.push((a - 1, b - 1)),
                    other => {
                        return Err(Error::MalformedMsh(format!(
                            "unknown line physical tag {other}"
                        )))
                    }
                }
            }
            2 => {
                let a: usize = field(&mut it, "tri node")?;
                let b: usize = field(&mut it, "tri node")?;
                let c: usize = field(&mut it, "tri node")?;
                triangles.push([a - 1, b - 1, c - 1]);
            }
            other => {
                return Err(Error::MalformedMsh(format!(
                    "unsupported element type {other}"
                )))
            }
        }
    }
    expect_line(&mut lines, "$EndElements")?;

    let gamma_loop = chain_segments(&gamma_segments)?;
    Ok(LoadedMsh {
        tri: Triangulation::new(vertices, triangles, boundary_edges),
        gamma_loop,
    })
}

fn chain_segments(segments: &[(usize, usize)]) -> Result<Vec<usize>> {
    if segments.is_empty() {
        return Ok(Vec::new());
    }
    let mut next = std::collections::HashMap::new();
    for &(a, b) in segments {
        if next.insert(a, b).is_some() {
            return Err(Error::MalformedMsh("interface lines do not chain".into()));
        }
    }
    let mut out = Vec::with_capacity(segments.len());
    let start = segments[0].0;
    let mut cur = start;
    loop {
        out.push(cur);
        cur = *next
            .get(&cur)
            .ok_or_else(|| Error::MalformedMsh("open interface chain".into()))?;
        if cur == start {
            break;
        }
        if out.len() > segments.len() {
            return Err(Error::MalformedMsh("interface chain does not close".into()));
        }
    }
    if out.len() != segments.len() {
        return Err(Error::MalformedMsh("disconnected interface lines".into()));
    }
    Ok(out)
}

fn expect_line(lines: &mut std::str::Lines, want: &str) -> Result<()> {
    match lines.next() {
        Some(l) if l.trim() == want => Ok(()),
        Some(l) => Err(Error::MalformedMsh(format!("expected {want}, got {l}"))),
        None => Err(Error::MalformedMsh(format!("expected {want}, got EOF"))),
    }
}

fn parse_next<T: std::str::FromStr>(lines: &mut std::str::Lines, what: &str) -> Result<T> {
    lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::MalformedMsh(format!("bad {what}")))
}

fn field<'a, T: std::str::FromStr>(
    it: &mut impl Iterator<Item = &'a str>,
    what: &str,
) -> Result<T> {
    it.next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedMsh(format!("bad {what}")))
}
