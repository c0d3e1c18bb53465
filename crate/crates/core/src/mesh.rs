//! Structured triangulations of the unit square with tagged cavity walls.
//!
//! Vertices are numbered row by row, `i + j * (m + 1)`, and every square is
//! split along its lower-left to upper-right diagonal into
//! `(v00, v10, v11)` and `(v00, v11, v01)`, both counterclockwise.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

const WALL_TOL: f64 = 1e-12;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Which part of the cavity boundary an edge lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// x = 0
    HotWall,
    /// x = 1
    ColdWall,
    /// y = 0 and y = 1
    Insulated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug)]
pub struct Mesh {
    id: u64,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Unique edges with sorted endpoints.
    edges: Vec<[usize; 2]>,
    /// Local edges `(0,1), (1,2), (2,0)` of each triangle.
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<(usize, Option<usize>)>,
    boundary_edges: Vec<BoundaryEdge>,
    h: f64,
    subdivisions: Option<usize>,
}

/// Builds the `m x m` structured triangulation of `[0,1]^2`.
///
/// The returned mesh has no boundary tags yet; see [`tag_boundary`].
pub fn build_structured_mesh(m: usize) -> Result<Mesh> {
    if m == 0 {
        return Err(Error::invalid("mesh needs at least one subdivision per side"));
    }
    let n = m + 1;
    let step = 1.0 / m as f64;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            // Exact 0 and 1 on the walls.
            let x = if i == m { 1.0 } else { i as f64 * step };
            let y = if j == m { 1.0 } else { j as f64 * step };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let v00 = i + j * n;
            let v10 = v00 + 1;
            let v01 = v00 + n;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut mesh = Mesh::from_parts(vertices, triangles)?;
    mesh.subdivisions = Some(m);
    Ok(mesh)
}

/// Tags every edge with a single adjacent triangle by the wall it lies on.
pub fn tag_boundary(mut mesh: Mesh) -> Result<Mesh> {
    let mut tagged = Vec::new();
    for (e, &(_, other)) in mesh.edge_triangles.iter().enumerate() {
        if other.is_some() {
            continue;
        }
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let on = |p: [f64; 2], k: usize, v: f64| (p[k] - v).abs() <= WALL_TOL;
        let tag = if on(pa, 0, 0.0) && on(pb, 0, 0.0) {
            BoundaryTag::HotWall
        } else if on(pa, 0, 1.0) && on(pb, 0, 1.0) {
            BoundaryTag::ColdWall
        } else if (on(pa, 1, 0.0) && on(pb, 1, 0.0)) || (on(pa, 1, 1.0) && on(pb, 1, 1.0)) {
            BoundaryTag::Insulated
        } else {
            return Err(Error::InconsistentMesh(format!(
                "edge {e} ({pa:?} - {pb:?}) has one adjacent triangle but lies on no wall"
            )));
        };
        tagged.push(BoundaryEdge { edge: e, vertices: [a, b], tag });
    }
    mesh.boundary_edges = tagged;
    Ok(mesh)
}

impl Mesh {
    /// Structured, tagged `m x m` mesh of the unit square.
    pub fn unit_square(m: usize) -> Result<Mesh> {
        tag_boundary(build_structured_mesh(m)?)
    }

    /// Builds edge connectivity for an arbitrary triangulation.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<(usize, Option<usize>)> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut h: f64 = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InconsistentMesh(format!("triangle {t} references a missing vertex")));
            }
            if signed_area(&vertices, tri) <= 0.0 {
                return Err(Error::InconsistentMesh(format!("triangle {t} is not counterclockwise")));
            }
            let mut local = [0; 3];
            for (k, (a, b)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])].into_iter().enumerate() {
                let key = if a < b { [a, b] } else { [b, a] };
                let e = match edge_index.get(&key) {
                    Some(&e) => {
                        let slot = &mut edge_triangles[e];
                        if slot.1.is_some() {
                            return Err(Error::InconsistentMesh(format!(
                                "edge {key:?} is shared by more than two triangles"
                            )));
                        }
                        slot.1 = Some(t);
                        e
                    }
                    None => {
                        let e = edges.len();
                        edges.push(key);
                        edge_triangles.push((t, None));
                        edge_index.insert(key, e);
                        let (pa, pb) = (vertices[a], vertices[b]);
                        h = h.max((pa[0] - pb[0]).hypot(pa[1] - pb[1]));
                        e
                    }
                };
                local[k] = e;
            }
            triangle_edges.push(local);
        }
        Ok(Mesh {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            boundary_edges: Vec::new(),
            h,
            subdivisions: None,
        })
    }

    /// Process-unique identity, used to reject fields from a different mesh.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn edge_triangles(&self) -> &[(usize, Option<usize>)] {
        &self.edge_triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Longest edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn subdivisions(&self) -> Option<usize> {
        self.subdivisions
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Wall a boundary point belongs to; corners go to the vertical walls.
    pub fn classify_boundary_point(p: [f64; 2]) -> Option<BoundaryTag> {
        if p[0].abs() <= WALL_TOL {
            Some(BoundaryTag::HotWall)
        } else if (p[0] - 1.0).abs() <= WALL_TOL {
            Some(BoundaryTag::ColdWall)
        } else if p[1].abs() <= WALL_TOL || (p[1] - 1.0).abs() <= WALL_TOL {
            Some(BoundaryTag::Insulated)
        } else {
            None
        }
    }

    /// Finds a triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        const SLACK: f64 = 1e-12;
        if let Some(m) = self.subdivisions {
            if !(-SLACK..=1.0 + SLACK).contains(&p[0]) || !(-SLACK..=1.0 + SLACK).contains(&p[1]) {
                return None;
            }
            let cell = |c: f64| ((c * m as f64).floor().max(0.0) as usize).min(m - 1);
            let (i, j) = (cell(p[0]), cell(p[1]));
            let local_x = p[0] * m as f64 - i as f64;
            let local_y = p[1] * m as f64 - j as f64;
            let t = 2 * (j * m + i) + usize::from(local_y > local_x);
            return Some((t, self.barycentric(t, p)));
        }
        (0..self.n_triangles()).find_map(|t| {
            let bary = self.barycentric(t, p);
            bary.iter().all(|&l| l >= -SLACK).then_some((t, bary))
        })
    }

    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}
