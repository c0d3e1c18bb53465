//! Operator and load assembly by degree-6 quadrature.
//!
//! Scalar operators on one space share that space's [`ElementPattern`], so
//! they can be combined by adding value arrays. Element contributions are
//! computed in parallel and scattered sequentially, which keeps the result
//! independent of the thread count.

use rayon::prelude::*;

use super::basis::{p2_gradients, p2_values, ElementGeometry};
use super::quadrature::QuadratureRule;
use super::space::{FeSpace, FieldVector, SpaceKind};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Basis values and weights at the quadrature points of one element.
struct ElementQuadrature {
    rule: QuadratureRule,
    p2: Vec<[f64; 6]>,
}

impl ElementQuadrature {
    fn new() -> Self {
        let rule = QuadratureRule::degree6();
        let p2 = rule.points.iter().map(p2_values).collect();
        Self { rule, p2 }
    }

    /// Values and physical gradients of the local basis at point `q`.
    fn basis(&self, kind: SpaceKind, geo: &ElementGeometry, q: usize) -> ([f64; 6], [[f64; 2]; 6]) {
        let l = &self.rule.points[q];
        match kind {
            SpaceKind::ScalarP1 => {
                let g = geo.grad_lambda;
                ([l[0], l[1], l[2], 0.0, 0.0, 0.0], [g[0], g[1], g[2], [0.0; 2], [0.0; 2], [0.0; 2]])
            }
            _ => (self.p2[q], p2_gradients(l, &geo.grad_lambda)),
        }
    }
}

fn scalar_kind(space: &FeSpace) -> SpaceKind {
    match space.kind() {
        SpaceKind::VectorP2 => SpaceKind::ScalarP2,
        k => k,
    }
}

/// Assembles a scalar operator into `space`'s pattern from per-element
/// `k x k` local matrices.
fn assemble_pattern<F>(space: &FeSpace, local: F) -> Vec<f64>
where
    F: Fn(usize, &ElementGeometry, &mut [f64]) + Sync,
{
    let pattern = space.pattern();
    let k = pattern.local;
    let nt = space.mesh().n_triangles();
    let mut locals = vec![0.0; nt * k * k];
    locals.par_chunks_mut(k * k).enumerate().for_each(|(t, out)| {
        let geo = ElementGeometry::new(space.mesh(), t);
        local(t, &geo, out);
    });
    let mut values = vec![0.0; pattern.template.nnz()];
    for (slot, v) in pattern.scatter.iter().zip(&locals) {
        values[*slot] += v;
    }
    values
}

/// Assembles a load vector over the scalar nodes of `space` from per-element
/// local vectors of length `components * k`.
fn assemble_load<F>(space: &FeSpace, local: F) -> Vec<f64>
where
    F: Fn(usize, &ElementGeometry, &mut [f64]) + Sync,
{
    let k = space.kind().local_nodes();
    let nc = space.kind().components();
    let n = space.n_nodes();
    let nt = space.mesh().n_triangles();
    let mut locals = vec![0.0; nt * nc * k];
    locals.par_chunks_mut(nc * k).enumerate().for_each(|(t, out)| {
        let geo = ElementGeometry::new(space.mesh(), t);
        local(t, &geo, out);
    });
    let mut values = vec![0.0; nc * n];
    for (t, chunk) in locals.chunks(nc * k).enumerate() {
        let nodes = space.element_nodes(t);
        for c in 0..nc {
            for (i, &s) in nodes.iter().enumerate() {
                values[c * n + s] += chunk[c * k + i];
            }
        }
    }
    values
}

/// Two copies of a square scalar operator on the diagonal.
pub fn block_diag2(a: &CsrMatrix) -> CsrMatrix {
    let n = a.nrows();
    let nnz = a.nnz();
    let mut offsets = a.row_offsets().to_vec();
    offsets.extend(a.row_offsets()[1..].iter().map(|o| o + nnz));
    let mut cols = a.col_indices().to_vec();
    cols.extend(a.col_indices().iter().map(|c| c + n));
    let mut values = a.values().to_vec();
    values.extend_from_slice(a.values());
    CsrMatrix::new(2 * n, 2 * n, offsets, cols, values).expect("block copy preserves the invariants")
}

fn lift(space: &FeSpace, scalar: CsrMatrix) -> CsrMatrix {
    match space.kind() {
        SpaceKind::VectorP2 => block_diag2(&scalar),
        _ => scalar,
    }
}

/// Scalar mass matrix values in `space`'s pattern.
pub fn mass_values(space: &FeSpace) -> Vec<f64> {
    let quad = ElementQuadrature::new();
    let kind = scalar_kind(space);
    let k = kind.local_nodes();
    assemble_pattern(space, |_, geo, out| {
        for (q, w) in quad.rule.weights.iter().enumerate() {
            let (phi, _) = quad.basis(kind, geo, q);
            let wq = 2.0 * geo.area * w;
            for i in 0..k {
                for j in 0..k {
                    out[i * k + j] += wq * phi[i] * phi[j];
                }
            }
        }
    })
}

/// `M_ij = (phi_j, phi_i)`. Vector spaces get one block per component.
pub fn assemble_mass(space: &FeSpace) -> CsrMatrix {
    let scalar = space.pattern().template.with_values(mass_values(space)).expect("pattern sized values");
    lift(space, scalar)
}

/// Scalar stiffness values (coefficient 1) in `space`'s pattern.
pub fn stiffness_values(space: &FeSpace) -> Vec<f64> {
    let quad = ElementQuadrature::new();
    let kind = scalar_kind(space);
    let k = kind.local_nodes();
    assemble_pattern(space, |_, geo, out| {
        for (q, w) in quad.rule.weights.iter().enumerate() {
            let (_, grad) = quad.basis(kind, geo, q);
            let wq = 2.0 * geo.area * w;
            for i in 0..k {
                for j in 0..k {
                    out[i * k + j] += wq * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                }
            }
        }
    })
}

/// `K_ij = coefficient * (grad phi_j, grad phi_i)`.
pub fn assemble_stiffness(space: &FeSpace, coefficient: f64) -> Result<CsrMatrix> {
    if !(coefficient > 0.0) {
        return Err(Error::invalid(format!("stiffness coefficient must be positive, got {coefficient}")));
    }
    let values = stiffness_values(space).into_iter().map(|v| coefficient * v).collect();
    Ok(lift(space, space.pattern().template.with_values(values)?))
}

/// `B_ij = (psi_i, div phi_j)` with `psi` the P1 pressure basis and `phi` the
/// vector P2 basis; shape `n_pressure x n_velocity`.
pub fn assemble_divergence(velocity: &FeSpace, pressure: &FeSpace) -> Result<CsrMatrix> {
    if velocity.kind() != SpaceKind::VectorP2 || pressure.kind() != SpaceKind::ScalarP1 {
        return Err(Error::invalid("divergence needs a vector P2 and a scalar P1 space"));
    }
    if !velocity.same_mesh(pressure) {
        return Err(Error::invalid("velocity and pressure spaces live on different meshes"));
    }
    let quad = ElementQuadrature::new();
    let n = velocity.n_nodes();
    let nt = velocity.mesh().n_triangles();
    let locals: Vec<[f64; 36]> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let geo = ElementGeometry::new(velocity.mesh(), t);
            let mut out = [0.0; 36];
            for (q, w) in quad.rule.weights.iter().enumerate() {
                let (_, grad) = quad.basis(SpaceKind::ScalarP2, &geo, q);
                let psi = quad.rule.points[q];
                let wq = 2.0 * geo.area * w;
                for i in 0..3 {
                    for c in 0..2 {
                        for j in 0..6 {
                            out[i * 12 + c * 6 + j] += wq * psi[i] * grad[j][c];
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut triplets = Vec::with_capacity(nt * 36);
    for (t, local) in locals.iter().enumerate() {
        let pn = pressure.element_nodes(t);
        let vn = velocity.element_nodes(t);
        for i in 0..3 {
            for c in 0..2 {
                for j in 0..6 {
                    triplets.push((pn[i], c * n + vn[j], local[i * 12 + c * 6 + j]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(pressure.dof_count(), velocity.dof_count(), &triplets)
}

fn check_advecting(w: &FieldVector, target: &FeSpace) -> Result<()> {
    if target.kind() == SpaceKind::ScalarP1 {
        return Err(Error::invalid("convection needs a P2 target space"));
    }
    if w.kind() != SpaceKind::VectorP2 || w.mesh_id() != target.mesh().id() || w.len() != 2 * target.n_nodes() {
        return Err(Error::invalid("advecting field must be a vector P2 field on the target mesh"));
    }
    Ok(())
}

/// Skew-symmetric convection `N_ij = b(w, phi_j, phi_i)` over the scalar P2
/// nodes of `space`, in its pattern, with
/// `b(w, v, z) = 1/2 (w . grad v, z) - 1/2 (w . grad z, v)`.
/// `w` holds both velocity components, component-blocked.
pub fn convection_values(space: &FeSpace, w: &[f64]) -> Vec<f64> {
    let quad = ElementQuadrature::new();
    let n = space.n_nodes();
    assemble_pattern(space, |t, geo, out| {
        let nodes = space.element_nodes(t);
        for (q, wt) in quad.rule.weights.iter().enumerate() {
            let (phi, grad) = quad.basis(SpaceKind::ScalarP2, geo, q);
            let mut wq = [0.0; 2];
            for (i, &s) in nodes.iter().enumerate() {
                wq[0] += phi[i] * w[s];
                wq[1] += phi[i] * w[n + s];
            }
            let a: [f64; 6] = std::array::from_fn(|i| wq[0] * grad[i][0] + wq[1] * grad[i][1]);
            let half = geo.area * wt;
            for i in 0..6 {
                for j in 0..6 {
                    out[i * 6 + j] += half * (a[j] * phi[i] - a[i] * phi[j]);
                }
            }
        }
    })
}

/// Convection operator for the advecting velocity `w` on a P2 target space.
pub fn assemble_convection_matrix(w: &FieldVector, target: &FeSpace) -> Result<CsrMatrix> {
    check_advecting(w, target)?;
    let scalar = target.pattern().template.with_values(convection_values(target, &w.values))?;
    Ok(lift(target, scalar))
}

/// `r_i = b(w, z, phi_i)` evaluated directly at the quadrature points.
pub fn apply_convection(w: &FieldVector, z: &FieldVector, target: &FeSpace) -> Result<FieldVector> {
    check_advecting(w, target)?;
    target.check(z)?;
    let quad = ElementQuadrature::new();
    let n = target.n_nodes();
    let nc = target.kind().components();
    let values = assemble_load(target, |t, geo, out| {
        let nodes = target.element_nodes(t);
        for (q, wt) in quad.rule.weights.iter().enumerate() {
            let (phi, grad) = quad.basis(SpaceKind::ScalarP2, geo, q);
            let mut wq = [0.0; 2];
            for (i, &s) in nodes.iter().enumerate() {
                wq[0] += phi[i] * w.values[s];
                wq[1] += phi[i] * w.values[n + s];
            }
            let a: [f64; 6] = std::array::from_fn(|i| wq[0] * grad[i][0] + wq[1] * grad[i][1]);
            let half = geo.area * wt;
            for c in 0..nc {
                let zc = &z.values[c * n..(c + 1) * n];
                let (mut zq, mut wgz) = (0.0, 0.0);
                for (i, &s) in nodes.iter().enumerate() {
                    zq += phi[i] * zc[s];
                    wgz += a[i] * zc[s];
                }
                for i in 0..6 {
                    out[c * 6 + i] += half * (wgz * phi[i] - a[i] * zq);
                }
            }
        }
    });
    target.field(values)
}

/// `r_i = coefficient * (xi T, phi_i)` on the vector P2 space; in the
/// momentum equation `coefficient = Pr Ra`.
pub fn assemble_buoyancy(
    temperature: &FieldVector,
    velocity: &FeSpace,
    coefficient: f64,
    xi: [f64; 2],
) -> Result<FieldVector> {
    if velocity.kind() != SpaceKind::VectorP2 {
        return Err(Error::invalid("buoyancy is a load on the vector P2 space"));
    }
    if temperature.kind() != SpaceKind::ScalarP2
        || temperature.mesh_id() != velocity.mesh().id()
        || temperature.len() != velocity.n_nodes()
    {
        return Err(Error::invalid("temperature must be a scalar P2 field on the velocity mesh"));
    }
    let quad = ElementQuadrature::new();
    let values = assemble_load(velocity, |t, geo, out| {
        let nodes = velocity.element_nodes(t);
        for (q, wt) in quad.rule.weights.iter().enumerate() {
            let phi = &quad.p2[q];
            let tq: f64 = nodes.iter().zip(phi).map(|(&s, p)| p * temperature.values[s]).sum();
            let wq = 2.0 * geo.area * wt * coefficient * tq;
            for c in 0..2 {
                for i in 0..6 {
                    out[c * 6 + i] += wq * xi[c] * phi[i];
                }
            }
        }
    });
    velocity.field(values)
}

/// `r_i = (f, phi_i)` for a scalar source.
pub fn assemble_load_scalar(space: &FeSpace, f: impl Fn([f64; 2]) -> f64 + Sync) -> Result<FieldVector> {
    if space.kind() == SpaceKind::VectorP2 {
        return Err(Error::invalid("scalar load on a vector space"));
    }
    let quad = ElementQuadrature::new();
    let kind = space.kind();
    let k = kind.local_nodes();
    let values = assemble_load(space, |_, geo, out| {
        for (q, wt) in quad.rule.weights.iter().enumerate() {
            let (phi, _) = quad.basis(kind, geo, q);
            let wq = 2.0 * geo.area * wt * f(geo.point(&quad.rule.points[q]));
            for i in 0..k {
                out[i] += wq * phi[i];
            }
        }
    });
    space.field(values)
}

/// `r_i = (f, phi_i)` for a vector body force.
pub fn assemble_load_vector(space: &FeSpace, f: impl Fn([f64; 2]) -> [f64; 2] + Sync) -> Result<FieldVector> {
    if space.kind() != SpaceKind::VectorP2 {
        return Err(Error::invalid("vector load on a scalar space"));
    }
    let quad = ElementQuadrature::new();
    let values = assemble_load(space, |_, geo, out| {
        for (q, wt) in quad.rule.weights.iter().enumerate() {
            let phi = &quad.p2[q];
            let fq = f(geo.point(&quad.rule.points[q]));
            let wq = 2.0 * geo.area * wt;
            for c in 0..2 {
                for i in 0..6 {
                    out[c * 6 + i] += wq * fq[c] * phi[i];
                }
            }
        }
    });
    space.field(values)
}
