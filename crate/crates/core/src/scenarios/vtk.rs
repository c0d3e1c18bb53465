//! Legacy ASCII VTK output on the P2 node set.
//!
//! Each triangle is split into four linear triangles through its edge
//! midpoints. P1 fields are interpolated linearly onto the midpoints.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{FeSpace, FieldVector, SpaceKind};

/// Subtriangles in P2 local numbering.
const SPLIT: [[usize; 3]; 4] = [[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]];

/// Writes point data on the nodes of `p2` (a P2 space). Every field must
/// live on the same mesh; P1 fields are lifted to midpoints.
pub fn write_vtk<W: Write>(mut out: W, p2: &FeSpace, fields: &[(&str, &FeSpace, &FieldVector)]) -> Result<()> {
    if p2.kind().local_nodes() != 6 {
        return Err(Error::invalid("VTK output needs a P2 node set"));
    }
    let mesh = p2.mesh();
    let nodes = p2.nodes();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "natconv")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", nodes.len())?;
    for p in nodes {
        writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    let nt = 4 * mesh.n_triangles();
    writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
    for t in 0..mesh.n_triangles() {
        let en = p2.element_nodes(t);
        for s in SPLIT {
            writeln!(out, "3 {} {} {}", en[s[0]], en[s[1]], en[s[2]])?;
        }
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", nodes.len())?;
    for (name, space, field) in fields {
        space.check(field)?;
        if !space.same_mesh(p2) {
            return Err(Error::invalid(format!("field '{name}' lives on another mesh")));
        }
        let n = nodes.len();
        let component = |c: usize| -> Vec<f64> {
            match space.kind() {
                SpaceKind::ScalarP1 => {
                    let nv = mesh.n_vertices();
                    let mut v = field.values[..nv].to_vec();
                    v.extend(mesh.edges().iter().map(|&[a, b]| 0.5 * (field.values[a] + field.values[b])));
                    v
                }
                _ => field.values[c * n..(c + 1) * n].to_vec(),
            }
        };
        match space.kind().components() {
            1 => {
                writeln!(out, "SCALARS {name} double 1")?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for v in component(0) {
                    writeln!(out, "{v:.16e}")?;
                }
            }
            _ => {
                writeln!(out, "VECTORS {name} double")?;
                let (x, y) = (component(0), component(1));
                for (a, b) in x.iter().zip(&y) {
                    writeln!(out, "{a:.16e} {b:.16e} 0")?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::Mesh;

    #[test]
    fn writes_a_consistent_grid() {
        let mesh = Arc::new(Mesh::unit_square(2).unwrap());
        let s2 = FeSpace::new(mesh.clone(), SpaceKind::ScalarP2);
        let v2 = FeSpace::new(mesh.clone(), SpaceKind::VectorP2);
        let s1 = FeSpace::new(mesh.clone(), SpaceKind::ScalarP1);
        let t = s2.interpolate_scalar(|p| p[0]).unwrap();
        let u = v2.interpolate_vector(|p| [p[1], -p[0]]).unwrap();
        let p = s1.interpolate_scalar(|p| p[0] + p[1]).unwrap();
        let mut buf = Vec::new();
        write_vtk(&mut buf, &s2, &[("T", &s2, &t), ("u", &v2, &u), ("p", &s1, &p)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let n = s2.n_nodes();
        assert!(text.contains(&format!("POINTS {n} double")));
        assert!(text.contains("CELLS 32 128"));
        assert!(text.contains("SCALARS T double 1"));
        assert!(text.contains("VECTORS u double"));
        // The lifted P1 field equals x + y at every P2 node.
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.iter().position(|l| l.starts_with("SCALARS p")).unwrap() + 2;
        for (k, node) in s2.nodes().iter().enumerate() {
            let v: f64 = lines[start + k].parse().unwrap();
            assert!((v - node[0] - node[1]).abs() < 1e-14);
        }
        assert!(write_vtk(Vec::new(), &s1, &[]).is_err());
    }
}
