//! Degree-of-freedom layouts and discrete fields.

use std::sync::{Arc, OnceLock};

use super::basis::{p2_gradients, p2_values, ElementGeometry};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Two P2 components, stored component-blocked: all `u1`, then all `u2`.
    VectorP2,
    ScalarP2,
    ScalarP1,
}

impl SpaceKind {
    pub fn components(self) -> usize {
        match self {
            SpaceKind::VectorP2 => 2,
            _ => 1,
        }
    }

    pub fn local_nodes(self) -> usize {
        match self {
            SpaceKind::ScalarP1 => 3,
            _ => 6,
        }
    }
}

/// Sparsity pattern shared by all matrices assembled over one scalar space,
/// with the value slot of every local entry.
#[derive(Debug)]
pub struct ElementPattern {
    pub template: CsrMatrix,
    /// `scatter[t * k * k + i * k + j]` is the slot of local entry `(i, j)`.
    pub scatter: Vec<usize>,
    pub local: usize,
}

#[derive(Debug)]
pub struct FeSpace {
    kind: SpaceKind,
    mesh: Arc<Mesh>,
    nodes: Vec<[f64; 2]>,
    /// Scalar node indices, `local_nodes` per triangle.
    element_nodes: Vec<usize>,
    /// Boundary scalar nodes with the wall they lie on, sorted by node.
    boundary_nodes: Vec<(usize, BoundaryTag)>,
    pattern: OnceLock<ElementPattern>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, kind: SpaceKind) -> Self {
        let nv = mesh.n_vertices();
        let mut nodes: Vec<[f64; 2]> = mesh.vertices().to_vec();
        let k = kind.local_nodes();
        let mut element_nodes = Vec::with_capacity(k * mesh.n_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            element_nodes.extend_from_slice(tri);
            if k == 6 {
                element_nodes.extend(mesh.triangle_edges()[t].iter().map(|&e| nv + e));
            }
        }
        let mut boundary_nodes = Vec::new();
        for be in mesh.boundary_edges() {
            for v in be.vertices {
                if let Some(tag) = Mesh::classify_boundary_point(mesh.vertices()[v]) {
                    boundary_nodes.push((v, tag));
                }
            }
            if k == 6 {
                boundary_nodes.push((nv + be.edge, be.tag));
            }
        }
        boundary_nodes.sort_by_key(|&(n, _)| n);
        boundary_nodes.dedup_by_key(|&mut (n, _)| n);
        if k == 6 {
            nodes.extend(mesh.edges().iter().map(|&[a, b]| {
                let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
            }));
        }
        Self { kind, mesh, nodes, element_nodes, boundary_nodes, pattern: OnceLock::new() }
    }

    /// Same mesh and node layout, different kind (P2 scalar <-> P2 vector).
    pub fn with_kind(&self, kind: SpaceKind) -> FeSpace {
        FeSpace::new(self.mesh.clone(), kind)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Number of scalar nodes (vertices, plus edge midpoints for P2).
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        self.kind.components() * self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Scalar node indices of triangle `t`.
    pub fn element_nodes(&self, t: usize) -> &[usize] {
        let k = self.kind.local_nodes();
        &self.element_nodes[t * k..(t + 1) * k]
    }

    /// Global dofs of triangle `t`, component-major for vector spaces.
    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        let n = self.n_nodes();
        (0..self.kind.components())
            .flat_map(|c| self.element_nodes(t).iter().map(move |&s| c * n + s))
            .collect()
    }

    pub fn boundary_nodes(&self) -> &[(usize, BoundaryTag)] {
        &self.boundary_nodes
    }

    /// Boundary dofs of every component with their wall tags.
    pub fn boundary_dofs(&self) -> Vec<(usize, BoundaryTag)> {
        let n = self.n_nodes();
        (0..self.kind.components())
            .flat_map(|c| self.boundary_nodes.iter().map(move |&(s, tag)| (c * n + s, tag)))
            .collect()
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        self.mesh.id() == other.mesh.id()
    }

    /// Scalar pattern of this space's nodes, built on first use.
    pub fn pattern(&self) -> &ElementPattern {
        self.pattern.get_or_init(|| {
            let k = self.kind.local_nodes();
            let nt = self.mesh.n_triangles();
            let mut triplets = Vec::with_capacity(nt * k * k);
            for t in 0..nt {
                let nodes = self.element_nodes(t);
                for &i in nodes {
                    for &j in nodes {
                        triplets.push((i, j, 0.0));
                    }
                }
            }
            let n = self.n_nodes();
            let template = CsrMatrix::from_triplets(n, n, &triplets).expect("element nodes are in range");
            let scatter = triplets.iter().map(|&(i, j, _)| template.position(i, j).unwrap()).collect();
            ElementPattern { template, scatter, local: k }
        })
    }

    pub fn zeros(&self) -> FieldVector {
        FieldVector { kind: self.kind, mesh_id: self.mesh.id(), values: vec![0.0; self.dof_count()] }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<FieldVector> {
        if values.len() != self.dof_count() {
            return Err(Error::invalid(format!(
                "field has {} coefficients, space has {} dofs",
                values.len(),
                self.dof_count()
            )));
        }
        Ok(FieldVector { kind: self.kind, mesh_id: self.mesh.id(), values })
    }

    pub fn check(&self, field: &FieldVector) -> Result<()> {
        if field.kind != self.kind || field.mesh_id != self.mesh.id() || field.values.len() != self.dof_count() {
            return Err(Error::invalid(format!(
                "field ({:?}, mesh {}) does not belong to space ({:?}, mesh {})",
                field.kind,
                field.mesh_id,
                self.kind,
                self.mesh.id()
            )));
        }
        Ok(())
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate_scalar(&self, f: impl Fn([f64; 2]) -> f64) -> Result<FieldVector> {
        if self.kind == SpaceKind::VectorP2 {
            return Err(Error::invalid("scalar interpolation into a vector space"));
        }
        self.field(self.nodes.iter().map(|&p| f(p)).collect())
    }

    /// Nodal interpolant of a vector function.
    pub fn interpolate_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<FieldVector> {
        if self.kind != SpaceKind::VectorP2 {
            return Err(Error::invalid("vector interpolation into a scalar space"));
        }
        let n = self.n_nodes();
        let mut values = vec![0.0; 2 * n];
        for (s, &p) in self.nodes.iter().enumerate() {
            let v = f(p);
            values[s] = v[0];
            values[n + s] = v[1];
        }
        self.field(values)
    }

    /// Local shape function values at a barycentric point.
    pub fn shape_values(&self, bary: &[f64; 3]) -> ([f64; 6], usize) {
        match self.kind {
            SpaceKind::ScalarP1 => ([bary[0], bary[1], bary[2], 0.0, 0.0, 0.0], 3),
            _ => (p2_values(bary), 6),
        }
    }

    /// Value of component `c` of `field` in triangle `t` at barycentric `bary`.
    pub fn value_in(&self, field: &[f64], c: usize, t: usize, bary: &[f64; 3]) -> f64 {
        let (phi, k) = self.shape_values(bary);
        let off = c * self.n_nodes();
        self.element_nodes(t).iter().zip(&phi[..k]).map(|(&s, p)| p * field[off + s]).sum()
    }

    /// Gradient of component `c` of `field` in triangle `t`.
    pub fn gradient_in(&self, field: &[f64], c: usize, t: usize, bary: &[f64; 3]) -> [f64; 2] {
        let geo = ElementGeometry::new(&self.mesh, t);
        let off = c * self.n_nodes();
        let nodes = self.element_nodes(t);
        let mut g = [0.0; 2];
        match self.kind {
            SpaceKind::ScalarP1 => {
                for (i, &s) in nodes.iter().enumerate() {
                    g[0] += field[off + s] * geo.grad_lambda[i][0];
                    g[1] += field[off + s] * geo.grad_lambda[i][1];
                }
            }
            _ => {
                for (&s, d) in nodes.iter().zip(p2_gradients(bary, &geo.grad_lambda)) {
                    g[0] += field[off + s] * d[0];
                    g[1] += field[off + s] * d[1];
                }
            }
        }
        g
    }

    /// Point evaluation of every component; `None` outside the mesh.
    pub fn evaluate(&self, field: &FieldVector, p: [f64; 2]) -> Option<Vec<f64>> {
        let (t, bary) = self.mesh.locate(p)?;
        Some((0..self.kind.components()).map(|c| self.value_in(&field.values, c, t, &bary)).collect())
    }

    /// Gradient of every component at `p`; `None` outside the mesh.
    pub fn evaluate_gradient(&self, field: &FieldVector, p: [f64; 2]) -> Option<Vec<[f64; 2]>> {
        let (t, bary) = self.mesh.locate(p)?;
        Some((0..self.kind.components()).map(|c| self.gradient_in(&field.values, c, t, &bary)).collect())
    }
}

/// Coefficients of a discrete field, tagged with the space they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldVector {
    kind: SpaceKind,
    mesh_id: u64,
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &FieldVector, b: f64) -> FieldVector {
        assert_eq!(self.kind, other.kind);
        assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        FieldVector { kind: self.kind, mesh_id: self.mesh_id, values }
    }

    pub fn with_values(&self, values: Vec<f64>) -> FieldVector {
        assert_eq!(values.len(), self.values.len());
        FieldVector { kind: self.kind, mesh_id: self.mesh_id, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(m: usize, kind: SpaceKind) -> FeSpace {
        FeSpace::new(Arc::new(Mesh::unit_square(m).unwrap()), kind)
    }

    #[test]
    fn dof_counts() {
        let mesh = Arc::new(Mesh::unit_square(3).unwrap());
        let (v, e) = (mesh.n_vertices(), mesh.n_edges());
        assert_eq!(FeSpace::new(mesh.clone(), SpaceKind::VectorP2).dof_count(), 2 * (v + e));
        assert_eq!(FeSpace::new(mesh.clone(), SpaceKind::ScalarP2).dof_count(), v + e);
        assert_eq!(FeSpace::new(mesh, SpaceKind::ScalarP1).dof_count(), v);
    }

    #[test]
    fn boundary_nodes_lie_on_the_boundary() {
        let s = space(4, SpaceKind::ScalarP2);
        assert_eq!(s.boundary_nodes().len(), 4 * 2 * 4);
        for &(n, tag) in s.boundary_nodes() {
            assert_eq!(Mesh::classify_boundary_point(s.nodes()[n]), Some(tag));
        }
        let corners = s.boundary_nodes().iter().filter(|&&(n, _)| {
            let p = s.nodes()[n];
            (p[0] == 0.0 || p[0] == 1.0) && (p[1] == 0.0 || p[1] == 1.0)
        });
        assert!(corners.into_iter().all(|&(_, tag)| tag != BoundaryTag::Insulated));
        let v = space(4, SpaceKind::VectorP2);
        assert_eq!(v.boundary_dofs().len(), 2 * 32);
        assert!(v.boundary_dofs().iter().all(|&(d, _)| d < v.dof_count()));
    }

    #[test]
    fn interpolation_of_constants_and_coordinates() {
        let s = space(3, SpaceKind::ScalarP2);
        assert!(s.interpolate_scalar(|_| 3.0).unwrap().values.iter().all(|&v| v == 3.0));
        let x = s.interpolate_scalar(|p| p[0]).unwrap();
        for (v, p) in x.values.iter().zip(s.nodes()) {
            assert_eq!(*v, p[0]);
        }
        assert!(s.interpolate_vector(|_| [0.0, 0.0]).is_err());
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let s = space(5, SpaceKind::ScalarP2);
        let f = |p: [f64; 2]| p[0] * p[0] - 0.5 * p[0] * p[1] + 2.0 * p[1] * p[1] - p[1] + 0.25;
        let field = s.interpolate_scalar(f).unwrap();
        for p in [[0.13, 0.77], [0.5, 0.5], [0.91, 0.02], [0.333, 0.666]] {
            let v = s.evaluate(&field, p).unwrap()[0];
            assert!((v - f(p)).abs() < 1e-13);
            let g = s.evaluate_gradient(&field, p).unwrap()[0];
            assert!((g[0] - (2.0 * p[0] - 0.5 * p[1])).abs() < 1e-12);
            assert!((g[1] - (-0.5 * p[0] + 4.0 * p[1] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_fields_are_component_blocked() {
        let s = space(2, SpaceKind::VectorP2);
        let u = s.interpolate_vector(|p| [p[1], -p[0]]).unwrap();
        let v = s.evaluate(&u, [0.3, 0.6]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-14 && (v[1] + 0.3).abs() < 1e-14);
        assert_eq!(u.values[s.n_nodes() + 1], -s.nodes()[1][0]);
    }

    #[test]
    fn foreign_fields_are_rejected() {
        let a = space(2, SpaceKind::ScalarP2);
        let b = space(2, SpaceKind::ScalarP2);
        assert!(a.check(&a.zeros()).is_ok());
        assert!(a.check(&b.zeros()).is_err());
        assert!(a.field(vec![0.0; 3]).is_err());
    }
}
